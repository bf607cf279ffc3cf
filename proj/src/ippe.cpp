// Homography estimation and infinitesimal plane-based pose decomposition.

#include <cmath>

#include "qadapose/numerics.hpp"
#include "qadapose/pnp.hpp"

namespace qadapose {
namespace {

// Similarity taking points to zero centroid and mean distance sqrt(2).
Eigen::Matrix3d isotropic_normalizer(std::span<const Eigen::Vector2d> pts) {
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  double mean_dist = 0;
  for (const auto& p : pts) mean_dist += (p - c).norm();
  mean_dist /= static_cast<double>(pts.size());
  require(mean_dist > 0, ErrorKind::degeneracy, "homography: coincident points");
  const double s = std::sqrt(2.0) / mean_dist;
  Eigen::Matrix3d t;
  t << s, 0, -s * c.x(), 0, s, -s * c.y(), 0, 0, 1;
  return t;
}

void check_no_three_collinear(std::span<const Eigen::Vector2d> pts) {
  double scale = 0;
  for (const auto& p : pts)
    for (const auto& q : pts) scale = std::max(scale, (p - q).squaredNorm());
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      for (std::size_t k = j + 1; k < pts.size(); ++k) {
        const Eigen::Vector2d a = pts[j] - pts[i];
        const Eigen::Vector2d b = pts[k] - pts[i];
        if (std::abs(a.x() * b.y() - a.y() * b.x()) <= 1e-9 * scale)
          fail(ErrorKind::degeneracy, "homography: three plane points are collinear");
      }
}

// Rotation taking the optical axis onto the ray through (v, 1).
Eigen::Matrix3d ray_rotation(const Eigen::Vector2d& v) {
  const double t = v.norm();
  if (t == 0) return Eigen::Matrix3d::Identity();
  const double s = std::sqrt(1 + t * t);
  const Eigen::Vector3d axis(-v.y() / t, v.x() / t, 0);
  return Eigen::AngleAxisd(std::atan2(t / s, 1 / s), axis).toRotationMatrix();
}

// Translation minimizing the algebraic reprojection error for a fixed rotation.
Eigen::Vector3d planar_translation(const Eigen::Matrix3d& r, const std::vector<Eigen::Vector2d>& plane,
                                   const Correspondences& corr) {
  const Eigen::Index n = static_cast<Eigen::Index>(corr.size());
  Eigen::MatrixXd a(2 * n, 3);
  Eigen::VectorXd b(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector3d x(plane[static_cast<std::size_t>(i)].x(), plane[static_cast<std::size_t>(i)].y(), 0);
    const Eigen::Vector3d rx = r * x;
    const Eigen::Vector2d& uv = corr[static_cast<std::size_t>(i)].image;
    a.row(2 * i) << 1, 0, -uv.x();
    a.row(2 * i + 1) << 0, 1, -uv.y();
    b(2 * i) = uv.x() * rx.z() - rx.x();
    b(2 * i + 1) = uv.y() * rx.z() - rx.y();
  }
  return lstsq(a, b);
}

}  // namespace

Eigen::Matrix3d homography_dlt(std::span<const Eigen::Vector2d> plane, std::span<const Eigen::Vector2d> image) {
  require(plane.size() == image.size(), ErrorKind::contract, "homography: point count mismatch");
  require(plane.size() >= 4, ErrorKind::contract, "homography: need at least 4 points");
  check_no_three_collinear(plane);
  const Eigen::Matrix3d tp = isotropic_normalizer(plane);
  const Eigen::Matrix3d ti = isotropic_normalizer(image);
  const Eigen::Index n = static_cast<Eigen::Index>(plane.size());
  Eigen::MatrixXd a(2 * n, 9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector3d x = tp * plane[static_cast<std::size_t>(i)].homogeneous();
    const Eigen::Vector3d u = ti * image[static_cast<std::size_t>(i)].homogeneous();
    a.row(2 * i) << x.x(), x.y(), 1, 0, 0, 0, -u.x() * x.x(), -u.x() * x.y(), -u.x();
    a.row(2 * i + 1) << 0, 0, 0, x.x(), x.y(), 1, -u.y() * x.x(), -u.y() * x.y(), -u.y();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  Eigen::Matrix3d hm = ti.inverse() * hn * tp;
  if (std::abs(hm(2, 2)) > Tolerances::homography_h33) hm /= hm(2, 2);
  return hm;
}

IppeResult ippe(const Correspondences& corr, const SelectionContext& ctx) {
  require(corr.size() >= 4, ErrorKind::contract, "ippe: need at least 4 correspondences");
  const Eigen::Index n = static_cast<Eigen::Index>(corr.size());
  Points3<double> world(3, n);
  for (Eigen::Index i = 0; i < n; ++i) world.col(i) = corr[static_cast<std::size_t>(i)].world;
  const Eigen::Vector3d centroid = world.rowwise().mean();
  const Points3<double> centered = world.colwise() - centroid;
  const auto eig = sym_eig(Eigen::Matrix3d(centered * centered.transpose() / double(n)));
  if (eig.values(0) > Tolerances::quasi_planar_rel * eig.values(2))
    fail(ErrorKind::contract, "ippe: world points are not coplanar");

  // Plane frame: rows e1, e2, normal. Points map to z = 0; a small
  // out-of-plane residue (a surveyed beacon map) is dropped.
  Eigen::Vector3d normal = eig.vectors.col(0);
  Eigen::Vector3d e1 = eig.vectors.col(2);
  if (std::abs(normal.z()) > 1 - 1e-12) {
    normal = Eigen::Vector3d::UnitZ();
    e1 = Eigen::Vector3d::UnitX();
  }
  const Eigen::Vector3d e2 = normal.cross(e1);
  Eigen::Matrix3d to_plane;
  to_plane.row(0) = e1.transpose();
  to_plane.row(1) = e2.transpose();
  to_plane.row(2) = normal.transpose();

  std::vector<Eigen::Vector2d> plane(static_cast<std::size_t>(n)), image(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    plane[static_cast<std::size_t>(i)] = (to_plane * centered.col(i)).head<2>();
    image[static_cast<std::size_t>(i)] = corr[static_cast<std::size_t>(i)].image;
  }
  const Eigen::Matrix3d h = homography_dlt(plane, image);
  require(std::abs(h(2, 2)) > Tolerances::homography_h33, ErrorKind::degeneracy,
          "ippe: plane centroid maps to infinity");

  // Image of the plane origin and the homography Jacobian there.
  const Eigen::Vector2d v(h(0, 2) / h(2, 2), h(1, 2) / h(2, 2));
  Eigen::Matrix2d jac;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) jac(i, j) = (h(i, j) * h(2, 2) - h(2, j) * h(i, 2)) / (h(2, 2) * h(2, 2));

  const Eigen::Matrix3d rv = ray_rotation(v);
  Eigen::Matrix<double, 2, 3> proj;
  proj << 1, 0, -v.x(), 0, 1, -v.y();
  const Eigen::Matrix2d bmat = (proj * rv).leftCols<2>();
  const Eigen::Matrix2d amat = bmat.inverse() * jac;

  // Singular values of the 2x2 A are (e +- f) / 2; e and f carry no
  // cancellation, so the out-of-plane magnitude sqrt(1 - s2^2/s1^2) = sqrt(e f)/s1
  // keeps full precision near fronto-parallel views.
  const double e = std::hypot(amat(0, 0) + amat(1, 1), amat(1, 0) - amat(0, 1));
  const double f = std::hypot(amat(0, 0) - amat(1, 1), amat(1, 0) + amat(0, 1));
  const double gamma = (e + f) / 2;
  require(gamma > 0, ErrorKind::degeneracy, "ippe: degenerate homography Jacobian");
  const Eigen::Matrix2d r22 = amat / gamma;
  const Eigen::Matrix2d bb = Eigen::Matrix2d::Identity() - r22.transpose() * r22;
  Eigen::Vector2d bdir(std::sqrt(std::max(0.0, bb(0, 0))),
                       (bb(0, 1) < 0 ? -1.0 : 1.0) * std::sqrt(std::max(0.0, bb(1, 1))));
  if (bdir.norm() > 0) bdir.normalize();
  const double bmag = std::sqrt(e * f) / gamma;
  const double b0 = bmag * bdir(0);
  const double b1 = bmag * bdir(1);

  PnPSolution cand[2];
  for (int k = 0; k < 2; ++k) {
    const double sgn = k == 0 ? 1.0 : -1.0;
    Eigen::Vector3d c1(r22(0, 0), r22(1, 0), sgn * b0);
    Eigen::Vector3d c2(r22(0, 1), r22(1, 1), sgn * b1);
    Eigen::Matrix3d rt;
    rt.col(0) = c1;
    rt.col(1) = c2;
    rt.col(2) = c1.cross(c2);
    const Eigen::Matrix3d r_plane = rv * rt;
    const Eigen::Vector3d t_plane = planar_translation(r_plane, plane, corr);
    PnPSolution& s = cand[k];
    s.method = SolverMethod::ippe;
    s.rotation = orthonormalize(Eigen::Matrix3d(r_plane * to_plane));
    s.translation = t_plane - s.rotation * centroid;
    s.reproj_rms = reprojection_rms(s.rotation, s.translation, corr);
  }
  const PnPSolution& best = select_best(std::span<const PnPSolution>(cand, 2), ctx);
  const PnPSolution& other = (&best == &cand[0]) ? cand[1] : cand[0];
  return {best, other};
}

}  // namespace qadapose

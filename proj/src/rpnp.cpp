// RPnP: the pair of points with the widest image separation fixes a rotation
// axis; every other point forms a P3P triplet with that pair, giving a quartic
// f_i in the depth ratio t = d2 / d1. The minima of F = sum f_i^2 are among
// the real roots of the degree-7 F'. Each root fixes the axis direction in
// the camera; the rotation about it and the translation follow linearly.

#include <cmath>

#include "qadapose/numerics.hpp"
#include "qadapose/pnp.hpp"

namespace qadapose {
namespace {

using Poly = std::vector<double>;

Poly poly_add(Poly a, const Poly& b) {
  if (a.size() < b.size()) a.resize(b.size(), 0.0);
  for (std::size_t i = 0; i < b.size(); ++i) a[i] += b[i];
  return a;
}

Poly poly_scale(Poly a, double s) {
  for (double& c : a) c *= s;
  return a;
}

// Quartic in u = t - 1 whose roots are the depth ratios consistent with one
// triplet. Depth ratios sit near 1 when the scene is small against its
// distance; expanding about 1 with w = v2 - v1 keeps the low-order
// coefficients free of cancellation. Rays are unit vectors; d* are the world
// distances P1P2, P1Pi, P2Pi.
Poly p3p_quartic(const Eigen::Vector3d& v1, const Eigen::Vector3d& v2, const Eigen::Vector3d& vi, double d1,
                 double d2, double d3) {
  const double d1s = d1 * d1, d2s = d2 * d2;
  const double k = d3 * d3 - d2s;
  const Eigen::Vector3d w = v2 - v1;
  const Poly q{w.squaredNorm(), 2 * w.dot(v2), 1.0};                   // |t v2 - v1|^2
  const Poly a = poly_add(Poly{0.0, -2 * d1s, -d1s}, poly_scale(q, k));  // D1^2 (1 - t^2) + K q
  const Poly g{-vi.dot(w), -vi.dot(v2)};                                 // cg2 - t cg3
  const Poly e = poly_add(Poly{d1s}, poly_scale(q, -d2s));               // D1^2 - D2^2 q
  Poly f = poly_mul(a, a);
  f = poly_add(f, poly_scale(poly_mul(g, a), -4 * d1s * vi.dot(v1)));
  f = poly_add(f, poly_scale(poly_mul(e, poly_mul(g, g)), 4 * d1s));
  return poly_scale(f, 1.0 / (d1s * d1s));
}

// Newton on F' = sum 2 f f' evaluated per triplet rather than through the
// summed monomial form, which loses digits when roots crowd together.
double polish_root(double u, const std::vector<Poly>& quartics) {
  auto slope = [&](double x, double* curvature) {
    double d1 = 0, d2 = 0;
    for (const Poly& f : quartics) {
      const double v = poly_eval(f, x);
      const Poly df = poly_derivative(f);
      const double dv = poly_eval(df, x);
      d1 += 2 * v * dv;
      d2 += 2 * (dv * dv + v * poly_eval(poly_derivative(df), x));
    }
    if (curvature) *curvature = d2;
    return d1;
  };
  double best = u, x = u, curv = 0;
  double best_g = std::abs(slope(u, &curv));
  for (int it = 0; it < 100 && curv != 0; ++it) {
    const double step = slope(x, &curv) / curv;
    if (curv == 0 || !std::isfinite(step)) break;
    x -= step;
    const double g = std::abs(slope(x, nullptr));
    if (g < best_g) {
      best = x;
      best_g = g;
    }
    if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(x))) break;
  }
  return best;
}

Eigen::Matrix3d frame_with_x(const Eigen::Vector3d& x) {
  Eigen::Vector3d y, z;
  if (std::abs(x.y()) < std::abs(x.z())) {
    z = x.cross(Eigen::Vector3d::UnitY()).normalized();
    y = z.cross(x).normalized();
  } else {
    y = Eigen::Vector3d::UnitZ().cross(x).normalized();
    z = x.cross(y).normalized();
  }
  Eigen::Matrix3d r;
  r << x, y, z;
  return r;
}

}  // namespace

PnPSolution rpnp(const Correspondences& corr, const SelectionContext& ctx) {
  require(corr.size() >= 4, ErrorKind::contract, "rpnp: need at least 4 correspondences");
  const std::size_t n = corr.size();
  std::vector<Eigen::Vector3d> rays(n);
  for (std::size_t i = 0; i < n; ++i) rays[i] = corr[i].image.homogeneous().normalized();

  std::size_t i1 = 0, i2 = 1;
  double widest = -1;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dist = (corr[i].image - corr[j].image).norm();
      if (dist > widest) {
        widest = dist;
        i1 = i;
        i2 = j;
      }
    }

  const Eigen::Vector3d w1 = corr[i1].world, w2 = corr[i2].world;
  const double d12 = (w2 - w1).norm();
  require(d12 > 0, ErrorKind::degeneracy, "rpnp: repeated axis points");
  const Eigen::Vector3d origin = (w1 + w2) / 2;
  const Eigen::Matrix3d ro = frame_with_x((w2 - w1) / d12);
  std::vector<Eigen::Vector3d> local(n);
  for (std::size_t i = 0; i < n; ++i) local[i] = ro.transpose() * (corr[i].world - origin);

  const Eigen::Vector3d& v1 = rays[i1];
  const Eigen::Vector3d& v2 = rays[i2];
  require((v2 - v1).norm() > 1e-12, ErrorKind::degeneracy, "rpnp: axis rays coincide");
  Poly dcost(8, 0.0);
  std::vector<Poly> quartics;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == i1 || i == i2) continue;
    const double d2 = (corr[i].world - w1).norm();
    const double d3 = (corr[i].world - w2).norm();
    require(d2 > 0 && d3 > 0, ErrorKind::degeneracy, "rpnp: repeated points in a triplet");
    const Poly f = p3p_quartic(v1, v2, rays[i], d12, d2, d3);
    dcost = poly_add(dcost, poly_scale(poly_mul(f, poly_derivative(f)), 2.0));
    quartics.push_back(f);
  }
  // Every stationary point is tried: at symmetric fronto-parallel views the
  // true minimum is a multiple root whose F'' sign is rounding noise.
  std::vector<double> roots = real_poly_roots(dcost);
  for (double& u : roots) u = polish_root(u, quartics);
  std::vector<double> ratios;
  for (double u : roots)
    if (u > -1) ratios.push_back(1 + u);
  require(!ratios.empty(), ErrorKind::degeneracy, "rpnp: cost has no admissible minimum");

  Points3<double> world(3, static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) world.col(static_cast<Eigen::Index>(i)) = corr[i].world;

  std::vector<PnPSolution> candidates;
  for (double t : ratios) {
    const Eigen::Matrix3d r0 = frame_with_x((t * v2 - v1).normalized());
    const Eigen::Vector3d a = r0.col(0), b = r0.col(1), e = r0.col(2);
    // unknowns: c, s (rotation about the axis), T
    Eigen::MatrixXd sys(2 * static_cast<Eigen::Index>(n), 5);
    Eigen::VectorXd rhs(2 * static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const double x = local[i].x(), y = local[i].y(), z = local[i].z();
      const Eigen::Index row = 2 * static_cast<Eigen::Index>(i);
      for (int k = 0; k < 2; ++k) {
        const double u = corr[i].image(k);
        const double cos_term = u * (y * b.z() + z * e.z()) - (y * b(k) + z * e(k));
        const double sin_term = u * (y * e.z() - z * b.z()) - (y * e(k) - z * b(k));
        sys.row(row + k) << cos_term, sin_term, (k == 0 ? -1.0 : 0.0), (k == 1 ? -1.0 : 0.0), u;
        rhs(row + k) = x * a(k) - u * x * a.z();
      }
    }
    const Eigen::VectorXd sol = lstsq(sys, rhs);
    const double c = sol(0), s = sol(1);
    if (!(std::hypot(c, s) > 0)) continue;
    Eigen::Matrix3d about_axis;
    about_axis << 1, 0, 0, 0, c, -s, 0, s, c;
    const Eigen::Matrix3d r_local = r0 * about_axis;  // scale absorbed by the depth rescaling below
    Points3<double> cam(3, static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Vector3d p = r_local * local[i] + sol.tail<3>();
      cam.col(static_cast<Eigen::Index>(i)) = rays[i] * p.norm() * (p.z() < 0 ? -1.0 : 1.0);
    }
    try {
      const auto rt = procrustes<double>(world, cam);
      PnPSolution cand;
      cand.method = SolverMethod::rpnp;
      cand.rotation = rt.rotation;
      cand.translation = rt.translation;
      cand.reproj_rms = reprojection_rms(cand.rotation, cand.translation, corr);
      if (in_front(cand.rotation, cand.translation, corr)) candidates.push_back(cand);
    } catch (const Error&) {
    }
  }
  require(!candidates.empty(), ErrorKind::degeneracy, "rpnp: no valid pose");
  return select_best(candidates, ctx);
}

}  // namespace qadapose

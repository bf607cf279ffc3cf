// EPnP: world points as barycentric combinations of control points whose
// camera coordinates lie in the null space of a 2n x 3k system.
// Four control points for general scenes, three for planar ones.

#include <cmath>

#include "qadapose/numerics.hpp"
#include "qadapose/pnp.hpp"

namespace qadapose {
namespace {

struct ControlFrame {
  int count = 4;
  Points3<double> points;     // 3 x count, world
  Eigen::MatrixXd alphas;     // n x count barycentric weights
};

ControlFrame control_frame(const Points3<double>& world) {
  const Eigen::Index n = world.cols();
  const Eigen::Vector3d c0 = world.rowwise().mean();
  const Points3<double> centered = world.colwise() - c0;
  const auto eig = sym_eig(Eigen::Matrix3d(centered * centered.transpose() / double(n)));
  if (!(eig.values(1) > Tolerances::collinear_rel * eig.values(2)))
    fail(ErrorKind::degeneracy, "epnp: world points are collinear");
  const bool planar = eig.values(0) <= Tolerances::planarity_rel * eig.values(2);

  ControlFrame f;
  f.count = planar ? 3 : 4;
  f.points.resize(3, f.count);
  f.points.col(0) = c0;
  // principal axes, largest first, scaled by their standard deviation
  Eigen::Matrix<double, 3, Eigen::Dynamic> axes(3, f.count - 1);
  for (int k = 1; k < f.count; ++k) {
    const Eigen::Index idx = 3 - k;
    axes.col(k - 1) = std::sqrt(eig.values(idx)) * eig.vectors.col(idx);
    f.points.col(k) = c0 + axes.col(k - 1);
  }
  f.alphas.resize(n, f.count);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd a(f.count - 1);
    for (int k = 0; k < f.count - 1; ++k) a(k) = axes.col(k).dot(centered.col(i)) / axes.col(k).squaredNorm();
    f.alphas(i, 0) = 1 - a.sum();
    f.alphas.row(i).tail(f.count - 1) = a.transpose();
  }
  return f;
}

using PairList = std::vector<std::pair<int, int>>;

PairList control_pairs(int count) {
  PairList pairs;
  for (int a = 0; a < count; ++a)
    for (int b = a + 1; b < count; ++b) pairs.emplace_back(a, b);
  return pairs;
}

// Differences of each null vector between the two control points of every pair.
std::vector<std::vector<Eigen::Vector3d>> pair_differences(const Eigen::MatrixXd& null_vectors, const PairList& pairs) {
  std::vector<std::vector<Eigen::Vector3d>> d(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p)
    for (Eigen::Index k = 0; k < null_vectors.cols(); ++k)
      d[p].push_back(null_vectors.col(k).segment<3>(3 * pairs[p].first) -
                     null_vectors.col(k).segment<3>(3 * pairs[p].second));
  return d;
}

// Squared control-point distances are quadratic in the betas; solve the
// linearized system in the products beta_i beta_j for the first `dims` vectors.
Eigen::VectorXd approximate_betas(int dims, const std::vector<std::vector<Eigen::Vector3d>>& d,
                                  const Eigen::VectorXd& rho) {
  const Eigen::Index m = static_cast<Eigen::Index>(d.size());
  if (dims == 1) {
    double num = 0, den = 0;
    for (Eigen::Index p = 0; p < m; ++p) {
      const double dd = d[static_cast<std::size_t>(p)][0].squaredNorm();
      num += dd * rho(p);
      den += dd * dd;
    }
    Eigen::VectorXd b(1);
    b(0) = std::sqrt(std::max(0.0, num / den));
    return b;
  }
  std::vector<std::pair<int, int>> products;
  for (int i = 0; i < dims; ++i)
    for (int j = i; j < dims; ++j) products.emplace_back(i, j);
  Eigen::MatrixXd l(m, static_cast<Eigen::Index>(products.size()));
  for (Eigen::Index p = 0; p < m; ++p)
    for (std::size_t c = 0; c < products.size(); ++c) {
      const auto [i, j] = products[c];
      const double dot = d[static_cast<std::size_t>(p)][static_cast<std::size_t>(i)].dot(
          d[static_cast<std::size_t>(p)][static_cast<std::size_t>(j)]);
      l(p, static_cast<Eigen::Index>(c)) = i == j ? dot : 2 * dot;
    }
  const Eigen::VectorXd prod = lstsq(l, rho);
  // beta_0^2 first, then signs relative to beta_0 from the cross terms
  Eigen::VectorXd b = Eigen::VectorXd::Zero(dims);
  double b00 = prod(0);
  const double flip = b00 < 0 ? -1.0 : 1.0;
  b(0) = std::sqrt(std::abs(b00));
  for (int j = 1; j < dims; ++j) {
    Eigen::Index diag = 0, cross = 0;
    for (std::size_t c = 0; c < products.size(); ++c) {
      if (products[c] == std::make_pair(j, j)) diag = static_cast<Eigen::Index>(c);
      if (products[c] == std::make_pair(0, j)) cross = static_cast<Eigen::Index>(c);
    }
    const double mag = std::sqrt(std::abs(prod(diag)));
    b(j) = (flip * prod(cross) >= 0 ? 1.0 : -1.0) * mag;
  }
  return b;
}

void refine_betas(Eigen::VectorXd& betas, const std::vector<std::vector<Eigen::Vector3d>>& d,
                  const Eigen::VectorXd& rho) {
  const Eigen::Index dims = betas.size();
  const Eigen::Index m = rho.size();
  for (int it = 0; it < 10; ++it) {
    Eigen::MatrixXd jac(m, dims);
    Eigen::VectorXd res(m);
    for (Eigen::Index p = 0; p < m; ++p) {
      Eigen::Vector3d diff = Eigen::Vector3d::Zero();
      for (Eigen::Index k = 0; k < dims; ++k) diff += betas(k) * d[static_cast<std::size_t>(p)][static_cast<std::size_t>(k)];
      res(p) = diff.squaredNorm() - rho(p);
      for (Eigen::Index k = 0; k < dims; ++k)
        jac(p, k) = 2 * diff.dot(d[static_cast<std::size_t>(p)][static_cast<std::size_t>(k)]);
    }
    const Eigen::VectorXd step = lstsq(jac, -res);
    betas += step;
    if (step.norm() <= 1e-14 * std::max(1.0, betas.norm())) break;
  }
}

}  // namespace

PnPSolution epnp(const Correspondences& corr, const EpnpOptions& options, const SelectionContext& ctx) {
  require(corr.size() >= 4, ErrorKind::contract, "epnp: need at least 4 correspondences");
  const Eigen::Index n = static_cast<Eigen::Index>(corr.size());
  Points3<double> world(3, n);
  for (Eigen::Index i = 0; i < n; ++i) world.col(i) = corr[static_cast<std::size_t>(i)].world;
  const ControlFrame frame = control_frame(world);
  const int nc = frame.count;

  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2 * n, 3 * nc);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector2d& uv = corr[static_cast<std::size_t>(i)].image;
    for (int j = 0; j < nc; ++j) {
      const double a = frame.alphas(i, j);
      m(2 * i, 3 * j) = a;
      m(2 * i, 3 * j + 2) = -a * uv.x();
      m(2 * i + 1, 3 * j + 1) = a;
      m(2 * i + 1, 3 * j + 2) = -a * uv.y();
    }
  }
  const auto eig = sym_eig(Eigen::MatrixXd(m.transpose() * m));

  const PairList pairs = control_pairs(nc);
  Eigen::VectorXd rho(static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t p = 0; p < pairs.size(); ++p)
    rho(static_cast<Eigen::Index>(p)) = (frame.points.col(pairs[p].first) - frame.points.col(pairs[p].second)).squaredNorm();

  std::vector<PnPSolution> candidates;
  for (int dims = 1; dims <= 3; ++dims) {
    const Eigen::MatrixXd null_vectors = eig.vectors.leftCols(dims);
    const auto d = pair_differences(null_vectors, pairs);
    Eigen::VectorXd betas;
    if (dims == 3 && nc == 3) {
      // three distance constraints cannot fix six products; start from the 2-D solution
      betas = Eigen::VectorXd::Zero(3);
      betas.head(2) = approximate_betas(2, pair_differences(eig.vectors.leftCols(2), pairs), rho);
    } else {
      betas = approximate_betas(dims, d, rho);
    }
    if (options.refine_betas) refine_betas(betas, d, rho);

    const Eigen::VectorXd x = null_vectors * betas;
    Points3<double> ctrl_cam(3, nc);
    for (int j = 0; j < nc; ++j) ctrl_cam.col(j) = x.segment<3>(3 * j);
    Points3<double> cam = ctrl_cam * frame.alphas.transpose();
    if (cam.row(2).mean() < 0) cam = -cam;
    try {
      const auto rt = procrustes<double>(world, cam);
      PnPSolution s;
      s.method = SolverMethod::epnp;
      s.rotation = rt.rotation;
      s.translation = rt.translation;
      s.reproj_rms = reprojection_rms(s.rotation, s.translation, corr);
      if (in_front(s.rotation, s.translation, corr)) candidates.push_back(s);
    } catch (const Error&) {
      // a collapsed null-space combination; other dimensions may still work
    }
  }
  require(!candidates.empty(), ErrorKind::degeneracy, "epnp: no valid pose");
  return select_best(candidates, ctx);
}

}  // namespace qadapose

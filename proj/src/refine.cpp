#include <cmath>

#include "qadapose/numerics.hpp"
#include "qadapose/pnp.hpp"

namespace qadapose {
namespace {

double cost(const Eigen::Matrix3d& r, const Eigen::Vector3d& t, const Correspondences& corr) {
  double sum = 0;
  for (const auto& c : corr) {
    const Eigen::Vector3d p = r * c.world + t;
    sum += (p.head<2>() / p.z() - c.image).squaredNorm();
  }
  return sum;
}

}  // namespace

PnPSolution refine_gauss_newton(const PnPSolution& initial, const Correspondences& corr, RefineStats* stats) {
  constexpr int kMaxIterations = 50;
  constexpr double kMinStep = 1e-12;
  const Eigen::Index n = static_cast<Eigen::Index>(corr.size());
  Eigen::Matrix3d r = initial.rotation;
  Eigen::Vector3d t = initial.translation;
  double current = in_front(r, t, corr) ? cost(r, t, corr) : INFINITY;
  if (stats) stats->cost_trace.assign(1, current);

  int it = 0;
  for (; it < kMaxIterations && std::isfinite(current); ++it) {
    Eigen::MatrixXd jac(2 * n, 6);
    Eigen::VectorXd res(2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Vector3d rx = r * corr[static_cast<std::size_t>(i)].world;
      const Eigen::Vector3d p = rx + t;
      Eigen::Matrix<double, 2, 3> dproj;
      dproj << 1 / p.z(), 0, -p.x() / (p.z() * p.z()), 0, 1 / p.z(), -p.y() / (p.z() * p.z());
      jac.block<2, 3>(2 * i, 0) = dproj * -skew<double>(rx);  // R <- exp([w]x) R
      jac.block<2, 3>(2 * i, 3) = dproj;
      res.segment<2>(2 * i) = p.head<2>() / p.z() - corr[static_cast<std::size_t>(i)].image;
    }
    Eigen::VectorXd step = lstsq(jac, -res);
    bool accepted = false;
    for (int halving = 0; halving < 20 && !accepted; ++halving) {
      const Eigen::Vector3d w = step.head<3>();
      const Eigen::Matrix3d dr =
          w.norm() > 0 ? Eigen::AngleAxisd(w.norm(), w.normalized()).toRotationMatrix() : Eigen::Matrix3d::Identity();
      const Eigen::Matrix3d r_new = orthonormalize(Eigen::Matrix3d(dr * r));
      const Eigen::Vector3d t_new = t + step.tail<3>();
      const double c = in_front(r_new, t_new, corr) ? cost(r_new, t_new, corr) : INFINITY;
      if (c <= current) {
        r = r_new;
        t = t_new;
        current = c;
        accepted = true;
      } else {
        step *= 0.5;
      }
    }
    if (!accepted) break;
    if (stats) stats->cost_trace.push_back(current);
    if (step.norm() < kMinStep) break;
  }
  if (stats) stats->iterations = it;

  PnPSolution out = initial;
  const double rms = std::sqrt(current / static_cast<double>(n));
  if (std::isfinite(rms) && rms <= initial.reproj_rms) {
    out.rotation = r;
    out.translation = t;
    out.reproj_rms = rms;
  }
  out.refined = true;
  return out;
}

}  // namespace qadapose

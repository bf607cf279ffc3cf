#include <cmath>

#include "qadapose/pnp.hpp"

namespace qadapose {

Correspondences make_correspondences(const BeaconSet& beacons, std::span<const ImagePoint> image_mm,
                                     double h_ap_mm) {
  require(beacons.size() == image_mm.size(), ErrorKind::contract,
          "make_correspondences: beacon and image counts differ");
  require(h_ap_mm > 0, ErrorKind::contract, "make_correspondences: h_ap must be positive");
  Correspondences corr;
  for (std::size_t i = 0; i < beacons.size(); ++i)
    corr.push_back({beacons.beacons[i].position, image_mm[i] / h_ap_mm});
  return corr;
}

std::string to_string(SolverMethod m) {
  switch (m) {
    case SolverMethod::epnp: return "epnp";
    case SolverMethod::ippe: return "ippe";
    case SolverMethod::rpnp: return "rpnp";
  }
  return "?";
}

double reprojection_rms(const Eigen::Matrix3d& r, const Eigen::Vector3d& t, const Correspondences& corr) {
  double sum = 0;
  for (const auto& c : corr) {
    const Eigen::Vector3d p = r * c.world + t;
    sum += (p.head<2>() / p.z() - c.image).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(corr.size()));
}

bool in_front(const Eigen::Matrix3d& r, const Eigen::Vector3d& t, const Correspondences& corr) {
  for (const auto& c : corr)
    if (!((r * c.world + t).z() > 0)) return false;
  return true;
}

const PnPSolution& select_best(std::span<const PnPSolution> candidates, const SelectionContext& ctx) {
  require(!candidates.empty(), ErrorKind::degeneracy, "no pose candidates");
  const PnPSolution* best = nullptr;
  auto tie_key = [&](const PnPSolution& s) {
    const auto e = euler_from_rot(s.rotation).angles;
    if (ctx.previous_gamma) return std::abs(wrap_angle(e(2) - *ctx.previous_gamma));
    return std::abs(e(1));
  };
  for (const auto& c : candidates) {
    if (!std::isfinite(c.reproj_rms)) continue;
    if (best == nullptr) {
      best = &c;
      continue;
    }
    if (c.reproj_rms < best->reproj_rms - 1e-12) {
      best = &c;
    } else if (std::abs(c.reproj_rms - best->reproj_rms) <= 1e-12 && tie_key(c) < tie_key(*best)) {
      best = &c;
    }
  }
  require(best != nullptr, ErrorKind::degeneracy, "no finite pose candidate");
  return *best;
}

Pose solution_to_pose(const PnPSolution& sol) {
  Pose p;
  p.position = sol.receiver_position();
  p.angles = euler_from_rot(Eigen::Matrix3d(sol.rotation)).angles;
  return p;
}

}  // namespace qadapose

#pragma once

// Perspective-n-Point solvers. Solvers work on normalized image coordinates
// (image millimetres divided by h_ap) and return X_cam = R X_world + t.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qadapose/geometry.hpp"

namespace qadapose {

struct Correspondence {
  Eigen::Vector3d world;  // metres
  Eigen::Vector2d image;  // normalized, dimensionless
};

using Correspondences = std::vector<Correspondence>;

/// Pairs beacons with image points (mm) divided by h_ap.
Correspondences make_correspondences(const BeaconSet& beacons, std::span<const ImagePoint> image_mm,
                                     double h_ap_mm);

enum class SolverMethod { epnp, ippe, rpnp };

std::string to_string(SolverMethod m);

struct PnPSolution {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  /// RMS image residual in normalized units; multiply by h_ap for millimetres.
  double reproj_rms = 0;
  SolverMethod method = SolverMethod::ippe;
  bool refined = false;

  Eigen::Vector3d receiver_position() const { return -rotation.transpose() * translation; }
  double reproj_rms_mm(double h_ap_mm) const { return reproj_rms * h_ap_mm; }
};

/// Disambiguation between candidates whose residuals tie within 1e-12.
struct SelectionContext {
  std::optional<double> previous_gamma;  // radians
};

double reprojection_rms(const Eigen::Matrix3d& r, const Eigen::Vector3d& t, const Correspondences& corr);
bool in_front(const Eigen::Matrix3d& r, const Eigen::Vector3d& t, const Correspondences& corr);

/// Picks the lowest-residual candidate; ties go to the previous gamma, else to smaller abs(beta).
const PnPSolution& select_best(std::span<const PnPSolution> candidates, const SelectionContext& ctx = {});

/// Normalized DLT homography taking plane points to image points, H(2,2) = 1
/// unless it is numerically zero.
Eigen::Matrix3d homography_dlt(std::span<const Eigen::Vector2d> plane, std::span<const Eigen::Vector2d> image);

struct IppeResult {
  PnPSolution best;
  PnPSolution alternate;
};

IppeResult ippe(const Correspondences& corr, const SelectionContext& ctx = {});

struct EpnpOptions {
  bool refine_betas = true;  // Gauss-Newton on the null-space weights
};

PnPSolution epnp(const Correspondences& corr, const EpnpOptions& options = {}, const SelectionContext& ctx = {});

PnPSolution rpnp(const Correspondences& corr, const SelectionContext& ctx = {});

struct RefineStats {
  std::vector<double> cost_trace;  // sum of squared residuals per accepted iterate
  int iterations = 0;
};

/// Gauss-Newton on the reprojection cost with a local axis-angle rotation
/// update. Never returns a solution worse than `initial`.
PnPSolution refine_gauss_newton(const PnPSolution& initial, const Correspondences& corr,
                                RefineStats* stats = nullptr);

Pose solution_to_pose(const PnPSolution& sol);

}  // namespace qadapose

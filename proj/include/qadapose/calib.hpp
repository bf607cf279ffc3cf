#pragma once

// Receiver calibration: fit the aperture-model constants to ratio
// measurements taken at surveyed poses.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "qadapose/geometry.hpp"
#include "qadapose/qada.hpp"

namespace qadapose {

struct CalibObservation {
  Pose truth;
  std::vector<RatioPair> ratios;  // one per beacon, in beacon-set order
};

struct CalibBounds {
  double lambda_min = 0.5, lambda_max = 2.0, lambda_step = 0.05;
  double delta_min = -0.3, delta_max = 0.3, delta_step = 0.01;
};

struct CalibOptions {
  CalibBounds bounds;
  /// Estimate h_ap as well. lambda and h_ap only enter as a ratio, so lambda
  /// is then held at its initial value.
  bool free_h_ap = false;
  int max_iterations = 100;
};

struct CalibResult {
  CalibrationParams params;
  double objective = 0;          // sum of squared image residuals, mm^2
  double seed_objective = 0;     // best coarse-grid seed
  double initial_objective = 0;  // at the supplied initial parameters
  int iterations = 0;
  std::string gauge;             // which constants were held fixed
};

/// Coarse grid over (lambda, delta) with the optimal centre per cell, then
/// Gauss-Newton over (lambda, delta, c_x, c_y) [or (h_ap, delta, c_x, c_y)].
/// `initial` supplies l_mm and h_ap_mm, which stay fixed unless freed.
CalibResult estimate_calibration(const std::vector<CalibObservation>& obs, const BeaconSet& beacons,
                                 const CalibrationParams& initial, const CalibOptions& options = {});

/// Sum of squared image residuals of `cal` over the observations.
double calibration_objective(const std::vector<CalibObservation>& obs, const BeaconSet& beacons,
                             const CalibrationParams& cal);

/// Ideal ratios (plus optional Gaussian noise) at the given poses.
std::vector<CalibObservation> synthetic_observations(const BeaconSet& beacons, const CalibrationParams& truth,
                                                     const std::vector<Pose>& poses, double ratio_sigma = 0,
                                                     std::uint64_t seed = 0);

/// Floor poses spread over the square's footprint with varied yaw.
std::vector<Pose> calibration_poses();

/// CSV: x_m,y_m,z_m,alpha_deg,beta_deg,gamma_deg,px0,py0,px1,py1,...
void write_observations(const std::filesystem::path& path, const std::vector<CalibObservation>& obs);
std::vector<CalibObservation> read_observations(const std::filesystem::path& path);

}  // namespace qadapose

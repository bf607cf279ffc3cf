#pragma once

// Monte Carlo studies over floor poses: the grid sweep, the nine-point
// rotation sweep and the transmitter-perturbation study, plus the error
// statistics they report.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "qadapose/keyvalue.hpp"
#include "qadapose/pipeline.hpp"

namespace qadapose {

struct ScenarioConfig {
  // required keys in a scenario file
  double room_x_m = 2.0;
  double room_y_m = 2.0;
  double room_height_m = 3.4;
  double beacon_side_m = 1.2;
  double grid_step_m = 0.25;
  std::vector<double> gamma_deg{0, 120, 240};
  int realizations = 20;
  double snr_db = 10.0;
  std::vector<Solver> solvers{Solver::ippe, Solver::rpnp, Solver::epnp, Solver::epnp_gn};
  std::uint64_t seed = 1;

  // optional keys
  double nine_gamma_step_deg = 10.0;
  AmplitudeModel amplitude = AmplitudeModel::lambertian;
  double lambert_order = 1.0;
  CodeFamily code_family = CodeFamily::kasami;
  int chip_length = 255;
  int samples_per_chip = 4;
  RatioRule ratio_rule = RatioRule::signed_peak;
  Detector detector = Detector::decorrelating;
  double detector_half_extent_mm = 10.0;
  CalibrationParams calibration = CalibrationParams::reference();
  int perturbed_beacon = 0;
  bool redraw_perturbation = true;
  double beacon_sigma_cm = 1.0;
  unsigned threads = 1;

  /// 25 cm grid, 20 trials per cell.
  static ScenarioConfig desk() { return {}; }
  /// 10 cm grid, 50 trials per cell.
  static ScenarioConfig full_scale();

  void validate() const;
  /// Ceiling square centred over the floor.
  BeaconSet beacons() const;
  std::uint64_t code_seed() const;

  /// Reads a scenario block. Required keys must be present, unknown keys are
  /// rejected; calibration keys, when any is present, must all be present.
  static ScenarioConfig from_keyvalues(const KeyValues& kv);
  static ScenarioConfig load(const std::filesystem::path& path);
  KeyValues to_keyvalues() const;
};

inline constexpr std::array<const char*, 6> kCoordNames{"x", "y", "z", "alpha", "beta", "gamma"};
inline constexpr std::array<const char*, 6> kCoordUnits{"cm", "cm", "cm", "deg", "deg", "deg"};

struct ErrorRecord {
  int point_id = 0;
  int gamma_index = 0;
  int trial = 0;
  Solver solver = Solver::ippe;
  Pose truth;
  Pose estimate;
  /// |dx|, |dy|, |dz| in cm; |dalpha|, |dbeta|, |dgamma| in degrees.
  std::array<double, 6> error{};
  bool failed = false;
  std::string failure;
  bool low_confidence = false;
  bool saturated = false;  // some spot clamped at the detector edge
};

struct CoordStats {
  double mean = 0;
  double median = 0;
  double std = 0;  // sample standard deviation
};

struct PooledStats {
  std::array<CoordStats, 6> coords{};
  std::size_t used = 0;
  std::size_t outliers = 0;
};

struct Cdf {
  std::vector<double> values;     // ascending
  std::vector<double> fractions;  // i / n
};

struct SolverSummary {
  Solver solver = Solver::ippe;
  PooledStats stats;     // after the per-cell 3 sigma pass
  std::size_t failures = 0;
  std::array<Cdf, 6> cdf;  // every successful record
  std::array<double, 6> p90{};
};

struct MeanCell {
  int point_id = 0;
  double x_m = 0, y_m = 0, gamma_deg = 0;
  Solver solver = Solver::ippe;
  std::array<double, 6> mean{};
  std::size_t count = 0;
};

struct GridPoint {
  int id = 0;
  double x_m = 0, y_m = 0;
};

struct McReport {
  std::vector<GridPoint> points;
  std::vector<double> gamma_deg;
  std::vector<ErrorRecord> records;  // sorted by point, gamma, trial, solver
  std::vector<SolverSummary> summary;
  std::vector<MeanCell> mean_map;
  std::vector<int> skipped_points;

  const SolverSummary& summary_for(Solver s) const;
  std::size_t outliers() const;
  std::size_t failures() const;
};

/// Cells to evaluate and how to perturb the solver's beacon map.
struct StudyPlan {
  std::vector<GridPoint> points;
  std::vector<double> gamma_deg;
  double beacon_sigma_cm = 0;
};

StudyPlan grid_plan(const ScenarioConfig& cfg);
StudyPlan nine_point_plan(const ScenarioConfig& cfg);

McReport run_study(const ScenarioConfig& cfg, const StudyPlan& plan);
McReport run_grid(const ScenarioConfig& cfg);
McReport run_nine_points(const ScenarioConfig& cfg);
McReport run_robustness(const ScenarioConfig& cfg, double sigma_beacon_cm);

/// |dx|, |dy|, |dz| in cm and wrapped angle errors in degrees.
std::array<double, 6> pose_abs_errors(const Pose& truth, const Pose& estimate);

Cdf cdf(std::span<const double> errors);
/// Nearest-rank percentile, q in (0, 1].
double percentile(std::span<const double> values, double q);

/// Records with any coordinate beyond 3 sigma of that coordinate's
/// distribution over `records` (one pass).
std::vector<bool> outlier_mask(std::span<const ErrorRecord> records);
PooledStats summarize(std::span<const ErrorRecord> records);

/// Writes records.csv, summary.csv, cdf_<coord>.csv and mean_map.csv.
std::vector<std::filesystem::path> write_report(const McReport& report, const std::filesystem::path& dir);

}  // namespace qadapose

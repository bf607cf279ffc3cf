#pragma once

// The positioning chain for one capture: matched filtering, ratio
// extraction, the aperture model inverse, and a PnP solver.

#include <span>
#include <string>
#include <vector>

#include "qadapose/pnp.hpp"
#include "qadapose/signals.hpp"

namespace qadapose {

/// Solver variants exposed to studies. epnp_gn is EPnP followed by
/// refine_gauss_newton.
enum class Solver { ippe, rpnp, epnp, epnp_gn };

std::string to_string(Solver s);
Solver solver_from_string(const std::string& s);
/// "epnp" | "ippe" | "rpnp" | "epnp_gn" | "all"
std::vector<Solver> solvers_from_flag(const std::string& flag);

struct BeaconReading {
  int beacon_id = 0;
  RatioExtraction extraction;
  double significance = 0;  // see emitter_significance
  ImagePoint image;  // mm, through the calibrated aperture model
};

/// Rebuilds the codebook a capture was produced with.
CodeBook codebook_for(const QadaCapture& capture);

/// Correlates each beacon's code and maps the ratios to image points.
/// A beacon with no correlation peak, or one whose code is not significantly
/// present in the sum channel, raises a detection error.
std::vector<BeaconReading> read_image_points(const QadaCapture& capture, const CodeBook& book,
                                             const BeaconSet& beacons, const CalibrationParams& cal,
                                             RatioRule rule = RatioRule::signed_peak,
                                             Detector detector = Detector::decorrelating);

PnPSolution solve(Solver solver, const Correspondences& corr, const SelectionContext& ctx = {});

/// splitmix64 finalizer; used to derive independent seeds from one master seed.
std::uint64_t mix_seed(std::uint64_t x);
/// Seed for a labelled sub-stream, e.g. derive_seed(master, {stream, point, gamma, trial}).
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

}  // namespace qadapose

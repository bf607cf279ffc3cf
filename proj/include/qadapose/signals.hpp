#pragma once

// CDMA emission, QADA capture synthesis and matched filtering.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qadapose/geometry.hpp"
#include "qadapose/qada.hpp"

namespace qadapose {

enum class CodeFamily { kasami, gold };

std::string to_string(CodeFamily f);
CodeFamily code_family_from_string(const std::string& s);

struct CodeBook {
  CodeFamily family = CodeFamily::kasami;
  int chip_length = 255;
  int samples_per_chip = 4;
  std::uint64_t seed = 0;
  std::vector<Eigen::VectorXd> codes;  // +-1 chips, indexed by beacon id

  std::size_t size() const { return codes.size(); }
  /// Each chip repeated samples_per_chip times.
  Eigen::VectorXd waveform(std::size_t index) const;
  Eigen::Index samples() const { return Eigen::Index{chip_length} * samples_per_chip; }
};

/// Binary maximal-length sequence of degree m (period 2^m - 1), bits 0/1.
std::vector<std::uint8_t> m_sequence(int degree);

/// Every member of the small Kasami set (m even) or Gold family.
std::vector<Eigen::VectorXd> code_family(CodeFamily family, int chip_length);

/// Picks `count` codes of the family. The seed fixes a deterministic
/// permutation; codes whose zero-lag cross-correlation with those already
/// picked has the smallest attainable magnitude are preferred, since the
/// emitters are chip-synchronous.
CodeBook gen_codes(CodeFamily family, int chip_length, std::size_t count, std::uint64_t seed,
                   int samples_per_chip = 4);

/// Largest |periodic cross-correlation| / length over all lags and distinct pairs.
double max_normalized_cross_correlation(const std::vector<Eigen::VectorXd>& codes);

struct QadaCapture {
  Eigen::VectorXd v_sum;
  Eigen::VectorXd v_bt;
  Eigen::VectorXd v_lr;
  double snr_db = INFINITY;
  std::uint64_t seed = 0;
  // codebook descriptor
  CodeFamily family = CodeFamily::kasami;
  int chip_length = 255;
  int samples_per_chip = 4;
  std::size_t code_count = 0;
  std::uint64_t code_seed = 0;

  Eigen::Index sample_count() const { return v_sum.size(); }
};

enum class AmplitudeModel { unit, lambertian };

std::string to_string(AmplitudeModel m);
AmplitudeModel amplitude_model_from_string(const std::string& s);

struct SynthesisOptions {
  double snr_db = 10.0;  // on v_sum; +inf disables noise
  AmplitudeModel amplitude = AmplitudeModel::lambertian;
  double lambert_order = 1.0;
  std::uint64_t seed = 0;
  double detector_half_extent_mm = 10.0;
  /// Empty means every beacon emits; otherwise one flag per beacon.
  std::vector<bool> active;
};

struct BeaconEmission {
  ImagePoint image;  // true image point, mm
  RatioPair ratios;  // ratios the receiver would ideally measure
  double amplitude = 0;
  bool out_of_field = false;  // beyond the detector; not received
  bool saturated = false;     // ratio clamped to [-1, 1]
};

struct Synthesis {
  QadaCapture capture;
  std::vector<BeaconEmission> emissions;
};

Synthesis synthesize_capture(const BeaconSet& beacons, const Pose& pose, const CalibrationParams& cal,
                             const CodeBook& book, const SynthesisOptions& options);

struct CorrelationTriple {
  Eigen::VectorXd s;  // against v_sum
  Eigen::VectorXd t;  // against v_bt
  Eigen::VectorXd r;  // against v_lr
  Eigen::Index zero_lag = 0;  // index of lag 0
  int samples_per_chip = 1;
};

/// Full cross-correlation of one code with the three channels.
CorrelationTriple correlate(const QadaCapture& capture, const Eigen::VectorXd& chips, int samples_per_chip);

/// Correlates every code of the book, sharing the channel transforms.
std::vector<CorrelationTriple> correlate_all(const QadaCapture& capture, const CodeBook& book);

enum class RatioRule {
  signed_peak,    // r and t read at the argmax lag of s
  independent_maxima,  // independent maxima of r, t and s
};

std::string to_string(RatioRule r);
RatioRule ratio_rule_from_string(const std::string& s);

struct RatioExtraction {
  RatioPair ratios;
  Eigen::Index peak_index = 0;
  double dominance = 0;  // peak over second-highest non-adjacent lag
  bool low_confidence = false;
};

inline constexpr double kMinPeakDominance = 1.2;

RatioExtraction extract_ratios(const CorrelationTriple& tri, RatioRule rule = RatioRule::signed_peak);

enum class Detector {
  decorrelating,  // matched filter, then the code cross-talk is solved out jointly
  matched,        // matched filter per beacon
};

std::string to_string(Detector d);
Detector detector_from_string(const std::string& s);

/// Ratios for the codes `ids` read jointly. Each code's filter output at its
/// peak lag mixes every emitter through the codes' aperiodic cross-correlation
/// at the lag difference; solving that small Gram system removes the mixing,
/// which is exact for chip-synchronous emitters at infinite SNR. Peak lags,
/// dominance and the low-confidence flag are those of extract_ratios. A code
/// whose joint amplitude is not clearly positive raises a detection error.
/// With RatioRule::independent_maxima this is extract_ratios per code.
std::vector<RatioExtraction> extract_ratios_joint(const std::vector<CorrelationTriple>& tris, const CodeBook& book,
                                                  std::span<const int> ids, RatioRule rule = RatioRule::signed_peak);

inline constexpr double kMinEmitterSignificance = 6.0;

/// Least-squares amplitude of each code in v_sum at the given delays, over
/// its standard error estimated from the fit residual. An emitter that is
/// dark scores like |N(0, 1)|; a received one scores far above.
std::vector<double> emitter_significance(const QadaCapture& capture, const CodeBook& book, std::span<const int> ids,
                                         std::span<const Eigen::Index> delays);

/// CSV (index,v_sum,v_bt,v_lr) plus a sidecar "<path>.meta" key = value header.
void write_capture(const std::filesystem::path& csv_path, const QadaCapture& capture);
QadaCapture read_capture(const std::filesystem::path& csv_path);
std::filesystem::path capture_sidecar_path(const std::filesystem::path& csv_path);

}  // namespace qadapose

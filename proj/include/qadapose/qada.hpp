#pragma once

// Quadrant photodiode behind a square aperture.
//
// The aperture casts a uniform square spot of side l centred on the image
// point. Ratios are (left - right) / sum and (bottom - top) / sum, and the
// calibrated distortion maps them back to an image point:
//
//   [x_r]   -l             [p_x + delta p_y ]   [c_x]
//   [y_r] = -- * lambda *  [-delta p_x + p_y] + [c_y]
//            2

#include <string>

#include "qadapose/geometry.hpp"
#include "qadapose/keyvalue.hpp"

namespace qadapose {

struct CalibrationParams {
  double h_ap_mm = 2.55;
  double lambda = 1.0;
  double delta_rad = 0.0;
  double l_mm = 2.75;
  double c_x_mm = 0.0;
  double c_y_mm = 0.0;

  /// Receiver constants of the laboratory prototype.
  static CalibrationParams reference() { return {2.55, 1.25, 0.1, 2.75, 0.055, -0.035}; }
  /// Distortion-free model with the prototype's aperture geometry.
  static CalibrationParams ideal() { return {2.55, 1.0, 0.0, 2.75, 0.0, 0.0}; }

  void validate() const;

  /// Reads h_ap_mm, lambda, delta_rad, l_mm, c_x_mm, c_y_mm; all required.
  static CalibrationParams from_keyvalues(const KeyValues& kv);
  void to_keyvalues(KeyValues& kv) const;
  static bool present_in(const KeyValues& kv);

  bool operator==(const CalibrationParams&) const = default;
};

struct RatioPair {
  double p_x = 0;
  double p_y = 0;
};

/// Per-quadrant power fractions: top-right, top-left, bottom-left, bottom-right.
struct QuadrantFractions {
  double f[4] = {0.25, 0.25, 0.25, 0.25};
  bool saturated = false;  // spot centre clamped to the detector edge
};

QuadrantFractions quadrant_fractions(const ImagePoint& spot_center, double l_mm);
RatioPair ideal_ratios(const QuadrantFractions& f);

ImagePoint image_point_from_ratios(const RatioPair& p, const CalibrationParams& cal);
RatioPair ratios_from_image_point(const ImagePoint& x, const CalibrationParams& cal);

}  // namespace qadapose

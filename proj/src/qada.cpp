#include "qadapose/qada.hpp"

#include <algorithm>
#include <cmath>

namespace qadapose {

void CalibrationParams::validate() const {
  const bool finite = std::isfinite(h_ap_mm) && std::isfinite(lambda) && std::isfinite(delta_rad) &&
                      std::isfinite(l_mm) && std::isfinite(c_x_mm) && std::isfinite(c_y_mm);
  require(finite, ErrorKind::contract, "calibration: non-finite parameter");
  require(h_ap_mm > 0, ErrorKind::contract, "calibration: h_ap_mm must be positive");
  require(l_mm > 0, ErrorKind::contract, "calibration: l_mm must be positive");
  require(lambda > 0, ErrorKind::contract, "calibration: lambda must be positive");
  require(std::abs(delta_rad) < 0.5, ErrorKind::contract, "calibration: |delta_rad| must be < 0.5");
}

CalibrationParams CalibrationParams::from_keyvalues(const KeyValues& kv) {
  CalibrationParams c;
  c.h_ap_mm = kv.get_double("h_ap_mm");
  c.lambda = kv.get_double("lambda");
  c.delta_rad = kv.get_double("delta_rad");
  c.l_mm = kv.get_double("l_mm");
  c.c_x_mm = kv.get_double("c_x_mm");
  c.c_y_mm = kv.get_double("c_y_mm");
  try {
    c.validate();
  } catch (const Error& e) {
    fail(ErrorKind::config, e.what());
  }
  return c;
}

void CalibrationParams::to_keyvalues(KeyValues& kv) const {
  kv.set("h_ap_mm", format_double(h_ap_mm));
  kv.set("lambda", format_double(lambda));
  kv.set("delta_rad", format_double(delta_rad));
  kv.set("l_mm", format_double(l_mm));
  kv.set("c_x_mm", format_double(c_x_mm));
  kv.set("c_y_mm", format_double(c_y_mm));
}

bool CalibrationParams::present_in(const KeyValues& kv) {
  for (const char* k : {"h_ap_mm", "lambda", "delta_rad", "l_mm", "c_x_mm", "c_y_mm"})
    if (kv.has(k)) return true;
  return false;
}

QuadrantFractions quadrant_fractions(const ImagePoint& spot_center, double l_mm) {
  require(l_mm > 0, ErrorKind::contract, "quadrant_fractions: l must be positive");
  const double half = l_mm / 2;
  if (std::abs(spot_center.x()) > l_mm || std::abs(spot_center.y()) > l_mm)
    fail(ErrorKind::out_of_field, "quadrant_fractions: spot outside the detector");
  QuadrantFractions q;
  const double x = std::clamp(spot_center.x(), -half, half);
  const double y = std::clamp(spot_center.y(), -half, half);
  q.saturated = x != spot_center.x() || y != spot_center.y();
  const double right = (half + x) / l_mm;
  const double top = (half + y) / l_mm;
  q.f[0] = right * top;
  q.f[1] = (1 - right) * top;
  q.f[2] = (1 - right) * (1 - top);
  q.f[3] = right * (1 - top);
  return q;
}

RatioPair ideal_ratios(const QuadrantFractions& q) {
  const double sum = q.f[0] + q.f[1] + q.f[2] + q.f[3];
  return {((q.f[1] + q.f[2]) - (q.f[0] + q.f[3])) / sum, ((q.f[2] + q.f[3]) - (q.f[0] + q.f[1])) / sum};
}

ImagePoint image_point_from_ratios(const RatioPair& p, const CalibrationParams& cal) {
  const double k = -cal.l_mm / 2 * cal.lambda;
  return {k * (p.p_x + cal.delta_rad * p.p_y) + cal.c_x_mm,
          k * (-cal.delta_rad * p.p_x + p.p_y) + cal.c_y_mm};
}

RatioPair ratios_from_image_point(const ImagePoint& x, const CalibrationParams& cal) {
  // M = [[1, d], [-d, 1]], M^-1 = [[1, -d], [d, 1]] / (1 + d^2)
  const double d = cal.delta_rad;
  const double k = -2.0 / (cal.l_mm * cal.lambda) / (1 + d * d);
  const double ux = x.x() - cal.c_x_mm;
  const double uy = x.y() - cal.c_y_mm;
  return {k * (ux - d * uy), k * (d * ux + uy)};
}

}  // namespace qadapose

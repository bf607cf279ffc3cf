#include "qadapose/calib.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "qadapose/errors.hpp"
#include "qadapose/keyvalue.hpp"

namespace qadapose {
namespace {

// Normalised image direction (x/z, y/z) of every beacon at every pose.
std::vector<Vec2<double>> directions(const std::vector<CalibObservation>& obs, const BeaconSet& beacons) {
  std::vector<Vec2<double>> q;
  q.reserve(obs.size() * beacons.size());
  for (const auto& o : obs)
    for (const auto& b : beacons.beacons) q.push_back(project(world_to_cam(o.truth, b.position), 1.0));
  return q;
}

struct Model {
  const std::vector<CalibObservation>& obs;
  const std::vector<Vec2<double>>& q;

  // Stacked residuals, optional Jacobian w.r.t. (lambda or h_ap, delta, c_x, c_y).
  Eigen::VectorXd residual(const CalibrationParams& c, bool free_h, Eigen::MatrixXd* jac) const {
    const Eigen::Index m = static_cast<Eigen::Index>(2 * q.size());
    Eigen::VectorXd r(m);
    if (jac) jac->resize(m, 4);
    const double s = -0.5 * c.l_mm * c.lambda;
    Eigen::Index row = 0;
    std::size_t k = 0;
    for (const auto& o : obs) {
      for (const auto& p : o.ratios) {
        const double ux = p.p_x + c.delta_rad * p.p_y;
        const double uy = -c.delta_rad * p.p_x + p.p_y;
        r(row) = s * ux + c.c_x_mm - c.h_ap_mm * q[k].x();
        r(row + 1) = s * uy + c.c_y_mm - c.h_ap_mm * q[k].y();
        if (jac) {
          auto& j = *jac;
          if (free_h) {
            j(row, 0) = -q[k].x();
            j(row + 1, 0) = -q[k].y();
          } else {
            j(row, 0) = -0.5 * c.l_mm * ux;
            j(row + 1, 0) = -0.5 * c.l_mm * uy;
          }
          j(row, 1) = s * p.p_y;
          j(row + 1, 1) = -s * p.p_x;
          j(row, 2) = 1;
          j(row, 3) = 0;
          j(row + 1, 2) = 0;
          j(row + 1, 3) = 1;
        }
        row += 2;
        ++k;
      }
    }
    return r;
  }
};

void check_observations(const std::vector<CalibObservation>& obs, const BeaconSet& beacons) {
  for (const auto& o : obs)
    if (o.ratios.size() != beacons.size())
      fail(ErrorKind::contract, "calibration: observation has " + std::to_string(o.ratios.size()) +
                                    " ratio pairs for " + std::to_string(beacons.size()) + " beacons");
  std::vector<const Pose*> distinct;
  for (const auto& o : obs) {
    bool seen = false;
    for (const Pose* d : distinct)
      seen = seen || ((d->position - o.truth.position).norm() < 1e-9 && (d->angles - o.truth.angles).norm() < 1e-9);
    if (!seen) distinct.push_back(&o.truth);
  }
  if (distinct.size() < 3)
    fail(ErrorKind::identifiability,
         "calibration needs at least 3 distinct poses, got " + std::to_string(distinct.size()));
}

}  // namespace

double calibration_objective(const std::vector<CalibObservation>& obs, const BeaconSet& beacons,
                             const CalibrationParams& cal) {
  check_observations(obs, beacons);
  const auto q = directions(obs, beacons);
  return Model{obs, q}.residual(cal, false, nullptr).squaredNorm();
}

CalibResult estimate_calibration(const std::vector<CalibObservation>& obs, const BeaconSet& beacons,
                                 const CalibrationParams& initial, const CalibOptions& options) {
  check_observations(obs, beacons);
  initial.validate();
  const auto& bd = options.bounds;
  if (!(bd.lambda_step > 0 && bd.delta_step > 0 && bd.lambda_min > 0 && bd.lambda_max >= bd.lambda_min &&
        bd.delta_max >= bd.delta_min))
    fail(ErrorKind::config, "calibration: invalid search bounds");

  const auto q = directions(obs, beacons);
  const Model model{obs, q};
  CalibResult out;
  out.initial_objective = model.residual(initial, false, nullptr).squaredNorm();
  out.gauge = options.free_h_ap ? "l_mm and lambda fixed" : "l_mm and h_ap_mm fixed";

  // Coarse seeds. The centre enters linearly, so the best one is the mean
  // residual with c removed.
  CalibrationParams best = initial;
  double best_cost = std::numeric_limits<double>::infinity();
  const auto steps = [](double lo, double hi, double st) { return static_cast<int>(std::floor((hi - lo) / st + 1e-9)); };
  const int nl = options.free_h_ap ? 0 : steps(bd.lambda_min, bd.lambda_max, bd.lambda_step);
  const int nd = steps(bd.delta_min, bd.delta_max, bd.delta_step);
  const double n_pts = static_cast<double>(q.size());
  for (int il = 0; il <= nl; ++il) {
    for (int id = 0; id <= nd; ++id) {
      CalibrationParams c = initial;
      if (!options.free_h_ap) c.lambda = bd.lambda_min + il * bd.lambda_step;
      c.delta_rad = bd.delta_min + id * bd.delta_step;
      c.c_x_mm = c.c_y_mm = 0;
      const Eigen::VectorXd r = model.residual(c, false, nullptr);
      const auto pairs = r.reshaped(2, static_cast<Eigen::Index>(q.size()));
      const Eigen::Vector2d mean = pairs.rowwise().sum() / n_pts;
      c.c_x_mm = -mean.x();
      c.c_y_mm = -mean.y();
      const double cost = (pairs.colwise() - mean).squaredNorm();
      if (cost < best_cost) {
        best_cost = cost;
        best = c;
      }
    }
  }
  out.seed_objective = best_cost;

  // Damped Gauss-Newton; a step is kept only if it lowers the cost.
  double mu = 1e-6;
  Eigen::MatrixXd j;
  for (int it = 0; it < options.max_iterations; ++it) {
    out.iterations = it + 1;
    const Eigen::VectorXd r = model.residual(best, options.free_h_ap, &j);
    const Eigen::Matrix4d jtj = j.transpose() * j;
    const Eigen::Vector4d g = j.transpose() * r;
    if (g.lpNorm<Eigen::Infinity>() < 1e-15) break;
    bool improved = false;
    for (int tries = 0; tries < 20 && !improved; ++tries) {
      Eigen::Matrix4d a = jtj;
      a.diagonal() *= 1 + mu;
      const Eigen::Vector4d step = a.ldlt().solve(-g);
      CalibrationParams c = best;
      (options.free_h_ap ? c.h_ap_mm : c.lambda) += step(0);
      c.delta_rad += step(1);
      c.c_x_mm += step(2);
      c.c_y_mm += step(3);
      if (!(c.lambda > 0 && c.h_ap_mm > 0)) {
        mu *= 10;
        continue;
      }
      const double cost = model.residual(c, false, nullptr).squaredNorm();
      if (cost < best_cost) {
        const bool converged = best_cost - cost <= 1e-14 * best_cost || step.norm() < 1e-13;
        best = c;
        best_cost = cost;
        mu = std::max(mu / 10, 1e-12);
        improved = true;
        if (converged) it = options.max_iterations;
      } else {
        mu *= 10;
      }
    }
    if (!improved) break;
  }
  out.params = best;
  out.objective = best_cost;
  return out;
}

std::vector<CalibObservation> synthetic_observations(const BeaconSet& beacons, const CalibrationParams& truth,
                                                     const std::vector<Pose>& poses, double ratio_sigma,
                                                     std::uint64_t seed) {
  if (ratio_sigma < 0) fail(ErrorKind::config, "calibration: ratio noise must be non-negative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, ratio_sigma);
  std::vector<CalibObservation> out;
  for (const auto& pose : poses) {
    CalibObservation o{pose, {}};
    for (const auto& b : beacons.beacons) {
      auto p = ratios_from_image_point(project(world_to_cam(pose, b.position), truth.h_ap_mm), truth);
      if (ratio_sigma > 0) {
        p.p_x += noise(rng);
        p.p_y += noise(rng);
      }
      o.ratios.push_back(p);
    }
    out.push_back(std::move(o));
  }
  return out;
}

std::vector<Pose> calibration_poses() {
  std::vector<Pose> poses;
  const double xy[][2] = {{1.0, 1.0}, {0.7, 0.8}, {1.3, 0.75}, {0.8, 1.3}, {1.25, 1.2}, {1.0, 0.6}};
  int k = 0;
  for (const auto& p : xy) {
    poses.push_back(Pose::from(p[0], p[1], 0.0, deg2rad(0.5 * (k % 3 - 1)), deg2rad(0.4 * (k % 2)),
                               deg2rad(37.0 + 61.0 * k)));
    ++k;
  }
  return poses;
}

void write_observations(const std::filesystem::path& path, const std::vector<CalibObservation>& obs) {
  const std::size_t n = obs.empty() ? 0 : obs.front().ratios.size();
  std::string csv = "x_m,y_m,z_m,alpha_deg,beta_deg,gamma_deg";
  for (std::size_t i = 0; i < n; ++i) csv += ",px" + std::to_string(i) + ",py" + std::to_string(i);
  csv += "\n";
  for (const auto& o : obs) {
    if (o.ratios.size() != n) fail(ErrorKind::contract, "write_observations: ragged ratio lists");
    const auto& p = o.truth.position;
    const auto& a = o.truth.angles;
    csv += format_double(p.x()) + "," + format_double(p.y()) + "," + format_double(p.z()) + "," +
           format_double(rad2deg(a.x())) + "," + format_double(rad2deg(a.y())) + "," + format_double(rad2deg(a.z()));
    for (const auto& r : o.ratios) csv += "," + format_double(r.p_x) + "," + format_double(r.p_y);
    csv += "\n";
  }
  write_file_atomic(path, csv);
}

std::vector<CalibObservation> read_observations(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  const auto where = [&](std::size_t line) { return path.string() + ":" + std::to_string(line) + ": "; };
  std::string line;
  if (!std::getline(in, line) || line.rfind("x_m,y_m,z_m,alpha_deg,beta_deg,gamma_deg", 0) != 0)
    fail(ErrorKind::config, where(1) + "expected header 'x_m,y_m,z_m,alpha_deg,beta_deg,gamma_deg,px0,py0,...'");
  const auto columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',') + 1);
  if (columns < 8 || (columns - 6) % 2 != 0) fail(ErrorKind::config, where(1) + "ratio columns must come in pairs");
  std::vector<CalibObservation> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::logic_error&) {
        fail(ErrorKind::config, where(lineno) + "malformed number '" + cell + "'");
      }
    }
    if (v.size() != columns)
      fail(ErrorKind::config, where(lineno) + "expected " + std::to_string(columns) + " columns, got " +
                                  std::to_string(v.size()));
    CalibObservation o{Pose::from(v[0], v[1], v[2], deg2rad(v[3]), deg2rad(v[4]), deg2rad(v[5])), {}};
    for (std::size_t i = 6; i < columns; i += 2) o.ratios.push_back({v[i], v[i + 1]});
    out.push_back(std::move(o));
  }
  if (out.empty()) fail(ErrorKind::config, path.string() + ": no observations");
  return out;
}

}  // namespace qadapose

#include "qadapose/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <sstream>
#include <thread>

namespace qadapose {
namespace {

// seed stream labels
constexpr std::uint64_t kStreamCodes = 1;
constexpr std::uint64_t kStreamNoise = 2;
constexpr std::uint64_t kStreamBeacon = 3;

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + items[i];
  return out;
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(ErrorKind::config, "key '" + key + "': expected true or false, got '" + v + "'");
}

std::array<double, 6> abs_errors(const Pose& truth, const Pose& est) {
  std::array<double, 6> e{};
  for (int k = 0; k < 3; ++k) e[static_cast<std::size_t>(k)] = std::abs(est.position(k) - truth.position(k)) * 100.0;
  for (int k = 0; k < 3; ++k)
    e[static_cast<std::size_t>(3 + k)] = rad2deg(std::abs(wrap_angle(est.angles(k) - truth.angles(k))));
  return e;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

CoordStats coord_stats(const std::vector<double>& v) {
  CoordStats s;
  if (v.empty()) return s;
  // shifted by the first value so that equal inputs give exactly zero spread
  double shift = 0;
  for (double x : v) shift += x - v.front();
  s.mean = v.front() + shift / static_cast<double>(v.size());
  s.median = median_of(v);
  if (v.size() > 1) {
    double ss = 0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

PooledStats pooled(std::span<const ErrorRecord> records, const std::vector<bool>& exclude) {
  PooledStats out;
  std::array<std::vector<double>, 6> cols;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].failed) continue;
    if (exclude[i]) {
      ++out.outliers;
      continue;
    }
    ++out.used;
    for (std::size_t k = 0; k < 6; ++k) cols[k].push_back(records[i].error[k]);
  }
  for (std::size_t k = 0; k < 6; ++k) out.coords[k] = coord_stats(cols[k]);
  return out;
}

struct Job {
  std::size_t point;
  std::size_t gamma;
  int trial;
};

}  // namespace

// ---------------------------------------------------------------- config

ScenarioConfig ScenarioConfig::full_scale() {
  ScenarioConfig c;
  c.grid_step_m = 0.10;
  c.realizations = 50;
  return c;
}

void ScenarioConfig::validate() const {
  require(room_x_m > 0 && room_y_m > 0 && room_height_m > 0, ErrorKind::config, "room extents must be positive");
  require(beacon_side_m > 0 && beacon_side_m <= std::min(room_x_m, room_y_m), ErrorKind::config,
          "beacon_side_m must be positive and fit in the room");
  require(grid_step_m > 0, ErrorKind::config, "grid_step_m must be positive");
  require(!gamma_deg.empty(), ErrorKind::config, "gamma_deg must list at least one angle");
  require(realizations >= 1, ErrorKind::config, "realizations must be >= 1");
  require(!solvers.empty(), ErrorKind::config, "solvers must not be empty");
  require(nine_gamma_step_deg > 0, ErrorKind::config, "nine_gamma_step_deg must be positive");
  require(lambert_order >= 0, ErrorKind::config, "lambert_order must be >= 0");
  require(samples_per_chip >= 1, ErrorKind::config, "samples_per_chip must be >= 1");
  require(detector_half_extent_mm > 0, ErrorKind::config, "detector_half_extent_mm must be positive");
  require(perturbed_beacon >= 0 && perturbed_beacon < 4, ErrorKind::config, "perturbed_beacon must be 0..3");
  require(beacon_sigma_cm >= 0, ErrorKind::config, "beacon_sigma_cm must be >= 0");
  require(!std::isnan(snr_db), ErrorKind::config, "snr_db must be a number or inf");
  calibration.validate();
}

BeaconSet ScenarioConfig::beacons() const {
  return BeaconSet::square(beacon_side_m, room_x_m / 2, room_y_m / 2, room_height_m);
}

std::uint64_t ScenarioConfig::code_seed() const { return derive_seed(seed, {kStreamCodes}); }

ScenarioConfig ScenarioConfig::from_keyvalues(const KeyValues& kv) {
  ScenarioConfig c;
  c.room_x_m = kv.get_double("room_x_m");
  c.room_y_m = kv.get_double("room_y_m");
  c.room_height_m = kv.get_double("room_height_m");
  c.beacon_side_m = kv.get_double("beacon_side_m");
  c.grid_step_m = kv.get_double("grid_step_m");
  c.gamma_deg = kv.get_doubles("gamma_deg");
  c.realizations = static_cast<int>(kv.get_int("realizations"));
  c.snr_db = kv.get_double("snr_db");
  c.solvers.clear();
  for (const auto& s : kv.get_strings("solvers")) {
    for (Solver v : solvers_from_flag(s))
      if (std::find(c.solvers.begin(), c.solvers.end(), v) == c.solvers.end()) c.solvers.push_back(v);
  }
  c.seed = kv.get_u64("seed");

  if (kv.has("nine_gamma_step_deg")) c.nine_gamma_step_deg = kv.get_double("nine_gamma_step_deg");
  if (kv.has("amplitude")) c.amplitude = amplitude_model_from_string(kv.get_string("amplitude"));
  if (kv.has("lambert_order")) c.lambert_order = kv.get_double("lambert_order");
  if (kv.has("code_family")) c.code_family = code_family_from_string(kv.get_string("code_family"));
  if (kv.has("chip_length")) c.chip_length = static_cast<int>(kv.get_int("chip_length"));
  if (kv.has("samples_per_chip")) c.samples_per_chip = static_cast<int>(kv.get_int("samples_per_chip"));
  if (kv.has("ratio_rule")) c.ratio_rule = ratio_rule_from_string(kv.get_string("ratio_rule"));
  if (kv.has("detector")) c.detector = detector_from_string(kv.get_string("detector"));
  if (kv.has("detector_half_extent_mm")) c.detector_half_extent_mm = kv.get_double("detector_half_extent_mm");
  if (kv.has("perturbed_beacon")) c.perturbed_beacon = static_cast<int>(kv.get_int("perturbed_beacon"));
  if (kv.has("redraw_perturbation"))
    c.redraw_perturbation = parse_bool(kv.get_string("redraw_perturbation"), "redraw_perturbation");
  if (kv.has("beacon_sigma_cm")) c.beacon_sigma_cm = kv.get_double("beacon_sigma_cm");
  if (kv.has("threads")) c.threads = static_cast<unsigned>(kv.get_int("threads"));
  if (CalibrationParams::present_in(kv)) c.calibration = CalibrationParams::from_keyvalues(kv);
  kv.reject_unknown();
  c.validate();
  return c;
}

ScenarioConfig ScenarioConfig::load(const std::filesystem::path& path) {
  return from_keyvalues(KeyValues::load(path));
}

KeyValues ScenarioConfig::to_keyvalues() const {
  KeyValues kv;
  kv.set("room_x_m", format_double(room_x_m));
  kv.set("room_y_m", format_double(room_y_m));
  kv.set("room_height_m", format_double(room_height_m));
  kv.set("beacon_side_m", format_double(beacon_side_m));
  kv.set("grid_step_m", format_double(grid_step_m));
  std::vector<std::string> g, s;
  for (double v : gamma_deg) g.push_back(format_double(v));
  for (Solver v : solvers) s.push_back(to_string(v));
  kv.set("gamma_deg", join(g));
  kv.set("realizations", std::to_string(realizations));
  kv.set("snr_db", format_double(snr_db));
  kv.set("solvers", join(s));
  kv.set("seed", std::to_string(seed));
  kv.set("nine_gamma_step_deg", format_double(nine_gamma_step_deg));
  kv.set("amplitude", to_string(amplitude));
  kv.set("lambert_order", format_double(lambert_order));
  kv.set("code_family", to_string(code_family));
  kv.set("chip_length", std::to_string(chip_length));
  kv.set("samples_per_chip", std::to_string(samples_per_chip));
  kv.set("ratio_rule", to_string(ratio_rule));
  kv.set("detector", to_string(detector));
  kv.set("detector_half_extent_mm", format_double(detector_half_extent_mm));
  kv.set("perturbed_beacon", std::to_string(perturbed_beacon));
  kv.set("redraw_perturbation", redraw_perturbation ? "true" : "false");
  kv.set("beacon_sigma_cm", format_double(beacon_sigma_cm));
  kv.set("threads", std::to_string(threads));
  calibration.to_keyvalues(kv);
  return kv;
}

// ---------------------------------------------------------------- plans

StudyPlan grid_plan(const ScenarioConfig& cfg) {
  cfg.validate();
  StudyPlan plan;
  const int nx = static_cast<int>(std::floor(cfg.room_x_m / cfg.grid_step_m + 1e-9)) + 1;
  const int ny = static_cast<int>(std::floor(cfg.room_y_m / cfg.grid_step_m + 1e-9)) + 1;
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix) plan.points.push_back({iy * nx + ix, ix * cfg.grid_step_m, iy * cfg.grid_step_m});
  plan.gamma_deg = cfg.gamma_deg;
  return plan;
}

StudyPlan nine_point_plan(const ScenarioConfig& cfg) {
  cfg.validate();
  StudyPlan plan;
  // offsets from the centre of the beacon square, first quadrant
  const double offsets[3] = {0.0, 0.5, 1.0};
  int id = 0;
  for (double dx : offsets)
    for (double dy : offsets) plan.points.push_back({id++, cfg.room_x_m / 2 + dx, cfg.room_y_m / 2 + dy});
  for (double g = 0; g < 360.0 - 1e-9; g += cfg.nine_gamma_step_deg) plan.gamma_deg.push_back(g);
  return plan;
}

// ---------------------------------------------------------------- runner

McReport run_study(const ScenarioConfig& cfg, const StudyPlan& plan) {
  cfg.validate();
  require(plan.beacon_sigma_cm >= 0, ErrorKind::config, "beacon sigma must be >= 0");
  const BeaconSet truth_beacons = cfg.beacons();
  const CodeBook book =
      gen_codes(cfg.code_family, cfg.chip_length, truth_beacons.size(), cfg.code_seed(), cfg.samples_per_chip);
  const std::size_t perturbed = static_cast<std::size_t>(cfg.perturbed_beacon);
  require(perturbed < truth_beacons.size(), ErrorKind::config, "perturbed_beacon out of range");

  McReport report;
  report.points = plan.points;
  report.gamma_deg = plan.gamma_deg;

  auto truth_pose = [&](std::size_t p, std::size_t g) {
    return Pose::from(plan.points[p].x_m, plan.points[p].y_m, 0.0, 0.0, 0.0, deg2rad(plan.gamma_deg[g]));
  };

  // cells whose beacons leave the detector cannot be solved
  std::vector<bool> point_skipped(plan.points.size(), false);
  for (std::size_t p = 0; p < plan.points.size(); ++p)
    for (std::size_t g = 0; g < plan.gamma_deg.size() && !point_skipped[p]; ++g) {
      SynthesisOptions probe;
      probe.snr_db = INFINITY;
      probe.amplitude = cfg.amplitude;
      probe.lambert_order = cfg.lambert_order;
      probe.detector_half_extent_mm = cfg.detector_half_extent_mm;
      try {
        const auto syn = synthesize_capture(truth_beacons, truth_pose(p, g), cfg.calibration, book, probe);
        for (const auto& e : syn.emissions)
          if (e.out_of_field) point_skipped[p] = true;
      } catch (const Error&) {
        point_skipped[p] = true;
      }
    }
  for (std::size_t p = 0; p < plan.points.size(); ++p)
    if (point_skipped[p]) report.skipped_points.push_back(plan.points[p].id);

  std::vector<Job> jobs;
  for (std::size_t p = 0; p < plan.points.size(); ++p) {
    if (point_skipped[p]) continue;
    for (std::size_t g = 0; g < plan.gamma_deg.size(); ++g)
      for (int t = 0; t < cfg.realizations; ++t) jobs.push_back({p, g, t});
  }

  Eigen::Vector3d fixed_offset = Eigen::Vector3d::Zero();
  if (plan.beacon_sigma_cm > 0 && !cfg.redraw_perturbation) {
    std::mt19937_64 rng(derive_seed(cfg.seed, {kStreamBeacon}));
    std::normal_distribution<double> n(0.0, plan.beacon_sigma_cm / 100.0);
    for (int k = 0; k < 3; ++k) fixed_offset(k) = n(rng);
  }

  const std::size_t ns = cfg.solvers.size();
  std::vector<ErrorRecord> records(jobs.size() * ns);

  auto run_job = [&](std::size_t j) {
    const Job& job = jobs[j];
    const GridPoint& pt = plan.points[job.point];
    const Pose truth = truth_pose(job.point, job.gamma);
    const auto pid = static_cast<std::uint64_t>(pt.id);
    const auto gid = static_cast<std::uint64_t>(job.gamma);
    const auto tid = static_cast<std::uint64_t>(job.trial);

    SynthesisOptions opt;
    opt.snr_db = cfg.snr_db;
    opt.amplitude = cfg.amplitude;
    opt.lambert_order = cfg.lambert_order;
    opt.detector_half_extent_mm = cfg.detector_half_extent_mm;
    opt.seed = derive_seed(cfg.seed, {kStreamNoise, pid, gid, tid});

    BeaconSet assumed = truth_beacons;
    if (plan.beacon_sigma_cm > 0) {
      Eigen::Vector3d offset = fixed_offset;
      if (cfg.redraw_perturbation) {
        std::mt19937_64 rng(derive_seed(cfg.seed, {kStreamBeacon, pid, gid, tid}));
        std::normal_distribution<double> n(0.0, plan.beacon_sigma_cm / 100.0);
        for (int k = 0; k < 3; ++k) offset(k) = n(rng);
      }
      assumed.beacons[perturbed].position += offset;
    }

    for (std::size_t s = 0; s < ns; ++s) {
      ErrorRecord& r = records[j * ns + s];
      r.point_id = pt.id;
      r.gamma_index = static_cast<int>(job.gamma);
      r.trial = job.trial;
      r.solver = cfg.solvers[s];
      r.truth = truth;
    }
    auto fail_all = [&](const std::string& why, std::size_t from) {
      for (std::size_t s = from; s < ns; ++s) {
        records[j * ns + s].failed = true;
        records[j * ns + s].failure = why;
      }
    };

    Correspondences corr;
    bool low_conf = false, saturated = false;
    try {
      const auto syn = synthesize_capture(truth_beacons, truth, cfg.calibration, book, opt);
      for (const auto& e : syn.emissions) saturated = saturated || e.saturated;
      const auto readings = read_image_points(syn.capture, book, truth_beacons, cfg.calibration, cfg.ratio_rule,
                                              cfg.detector);
      std::vector<ImagePoint> img;
      for (const auto& rd : readings) {
        img.push_back(rd.image);
        low_conf = low_conf || rd.extraction.low_confidence;
      }
      corr = make_correspondences(assumed, img, cfg.calibration.h_ap_mm);
    } catch (const Error& e) {
      fail_all(e.what(), 0);
      return;
    }
    for (std::size_t s = 0; s < ns; ++s) {
      ErrorRecord& r = records[j * ns + s];
      r.low_confidence = low_conf;
      r.saturated = saturated;
      try {
        r.estimate = solution_to_pose(solve(r.solver, corr));
        r.error = abs_errors(truth, r.estimate);
        if (!std::all_of(r.error.begin(), r.error.end(), [](double v) { return std::isfinite(v); }))
          fail(ErrorKind::degeneracy, "non-finite pose");
      } catch (const Error& e) {
        r.failed = true;
        r.failure = e.what();
      }
    }
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(jobs.size())));
  if (threads <= 1) {
    for (std::size_t j = 0; j < jobs.size(); ++j) run_job(j);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t j; (j = next.fetch_add(1)) < jobs.size();) run_job(j);
      });
  }
  report.records = std::move(records);

  // per-solver aggregation; records are already in canonical order
  const std::size_t cells = report.records.size() / std::max<std::size_t>(1, ns * cfg.realizations);
  for (std::size_t s = 0; s < ns; ++s) {
    SolverSummary sum;
    sum.solver = cfg.solvers[s];
    std::vector<ErrorRecord> mine;
    std::vector<bool> exclude;
    std::array<std::vector<double>, 6> all;
    for (std::size_t c = 0; c < cells; ++c) {
      std::vector<ErrorRecord> cell;
      for (int t = 0; t < cfg.realizations; ++t)
        cell.push_back(report.records[(c * static_cast<std::size_t>(cfg.realizations) + static_cast<std::size_t>(t)) * ns + s]);
      std::vector<ErrorRecord> ok;
      for (const auto& r : cell)
        if (!r.failed) ok.push_back(r);
      const auto mask = outlier_mask(ok);
      std::size_t k = 0;
      MeanCell mc;
      mc.point_id = cell.front().point_id;
      mc.gamma_deg = plan.gamma_deg[static_cast<std::size_t>(cell.front().gamma_index)];
      mc.solver = sum.solver;
      for (const auto& gp : plan.points)
        if (gp.id == mc.point_id) {
          mc.x_m = gp.x_m;
          mc.y_m = gp.y_m;
        }
      for (const auto& r : cell) {
        mine.push_back(r);
        if (r.failed) {
          ++sum.failures;
          exclude.push_back(false);
          continue;
        }
        exclude.push_back(mask[k++]);
        ++mc.count;
        for (std::size_t q = 0; q < 6; ++q) {
          mc.mean[q] += r.error[q];
          all[q].push_back(r.error[q]);
        }
      }
      if (mc.count)
        for (double& m : mc.mean) m /= static_cast<double>(mc.count);
      else
        mc.mean.fill(NAN);
      report.mean_map.push_back(mc);
    }
    sum.stats = pooled(mine, exclude);
    for (std::size_t q = 0; q < 6; ++q) {
      if (all[q].empty()) continue;
      sum.cdf[q] = cdf(all[q]);
      sum.p90[q] = percentile(all[q], 0.9);
    }
    report.summary.push_back(std::move(sum));
  }
  return report;
}

std::array<double, 6> pose_abs_errors(const Pose& truth, const Pose& estimate) { return abs_errors(truth, estimate); }

McReport run_grid(const ScenarioConfig& cfg) { return run_study(cfg, grid_plan(cfg)); }

McReport run_nine_points(const ScenarioConfig& cfg) { return run_study(cfg, nine_point_plan(cfg)); }

McReport run_robustness(const ScenarioConfig& cfg, double sigma_beacon_cm) {
  require(sigma_beacon_cm >= 0, ErrorKind::config, "beacon sigma must be >= 0");
  StudyPlan plan = grid_plan(cfg);
  plan.beacon_sigma_cm = sigma_beacon_cm;
  return run_study(cfg, plan);
}

const SolverSummary& McReport::summary_for(Solver s) const {
  for (const auto& x : summary)
    if (x.solver == s) return x;
  fail(ErrorKind::contract, "report has no results for solver " + to_string(s));
}

std::size_t McReport::outliers() const {
  std::size_t n = 0;
  for (const auto& s : summary) n += s.stats.outliers;
  return n;
}

std::size_t McReport::failures() const {
  std::size_t n = 0;
  for (const auto& s : summary) n += s.failures;
  return n;
}

// ---------------------------------------------------------------- statistics

Cdf cdf(std::span<const double> errors) {
  require(!errors.empty(), ErrorKind::contract, "cdf: empty input");
  Cdf c;
  c.values.assign(errors.begin(), errors.end());
  std::sort(c.values.begin(), c.values.end());
  const double n = static_cast<double>(c.values.size());
  for (std::size_t i = 0; i < c.values.size(); ++i) c.fractions.push_back(static_cast<double>(i + 1) / n);
  return c;
}

double percentile(std::span<const double> values, double q) {
  require(!values.empty(), ErrorKind::contract, "percentile: empty input");
  require(q > 0 && q <= 1, ErrorKind::contract, "percentile: q must be in (0, 1]");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size()) - 1e-12));
  return v[std::max<std::size_t>(rank, 1) - 1];
}

std::vector<bool> outlier_mask(std::span<const ErrorRecord> records) {
  std::vector<bool> mask(records.size(), false);
  if (records.size() < 2) return mask;
  for (std::size_t k = 0; k < 6; ++k) {
    std::vector<double> v;
    for (const auto& r : records) v.push_back(r.error[k]);
    const CoordStats s = coord_stats(v);
    for (std::size_t i = 0; i < records.size(); ++i)
      if (std::abs(records[i].error[k] - s.mean) > 3 * s.std) mask[i] = true;
  }
  return mask;
}

PooledStats summarize(std::span<const ErrorRecord> records) {
  require(!records.empty(), ErrorKind::contract, "summarize: empty input");
  std::vector<ErrorRecord> ok;
  for (const auto& r : records)
    if (!r.failed) ok.push_back(r);
  const auto mask = outlier_mask(ok);
  return pooled(ok, mask);
}

// ---------------------------------------------------------------- output

std::vector<std::filesystem::path> write_report(const McReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::io, "cannot create output directory " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& name, const std::string& body) {
    write_file_atomic(dir / name, body);
    written.push_back(dir / name);
  };
  auto num = [](double v) { return format_double(v); };

  std::ostringstream rec;
  rec << "point_id,x_m,y_m,gamma_deg,trial,solver,failed,low_confidence,saturated,"
         "est_x_m,est_y_m,est_z_m,est_alpha_deg,est_beta_deg,est_gamma_deg,"
         "abs_dx_cm,abs_dy_cm,abs_dz_cm,abs_dalpha_deg,abs_dbeta_deg,abs_dgamma_deg\n";
  for (const auto& r : report.records) {
    rec << r.point_id << ',' << num(r.truth.position.x()) << ',' << num(r.truth.position.y()) << ','
        << num(rad2deg(r.truth.angles.z())) << ',' << r.trial << ',' << to_string(r.solver) << ','
        << (r.failed ? 1 : 0) << ',' << (r.low_confidence ? 1 : 0) << ',' << (r.saturated ? 1 : 0);
    if (r.failed) {
      rec << ",,,,,,,,,,,,\n";
      continue;
    }
    for (int k = 0; k < 3; ++k) rec << ',' << num(r.estimate.position(k));
    for (int k = 0; k < 3; ++k) rec << ',' << num(rad2deg(r.estimate.angles(k)));
    for (double e : r.error) rec << ',' << num(e);
    rec << '\n';
  }
  emit("records.csv", rec.str());

  std::ostringstream sum;
  sum << "solver,coordinate,unit,mean,median,std,p90,used,outliers,failures\n";
  for (const auto& s : report.summary)
    for (std::size_t k = 0; k < 6; ++k)
      sum << to_string(s.solver) << ',' << kCoordNames[k] << ',' << kCoordUnits[k] << ','
          << num(s.stats.coords[k].mean) << ',' << num(s.stats.coords[k].median) << ','
          << num(s.stats.coords[k].std) << ',' << num(s.p90[k]) << ',' << s.stats.used << ','
          << s.stats.outliers << ',' << s.failures << '\n';
  emit("summary.csv", sum.str());

  for (std::size_t k = 0; k < 6; ++k) {
    std::ostringstream c;
    c << "solver,abs_error_" << kCoordUnits[k] << ",fraction\n";
    for (const auto& s : report.summary)
      for (std::size_t i = 0; i < s.cdf[k].values.size(); ++i)
        c << to_string(s.solver) << ',' << num(s.cdf[k].values[i]) << ',' << num(s.cdf[k].fractions[i]) << '\n';
    emit(std::string("cdf_") + kCoordNames[k] + ".csv", c.str());
  }

  std::ostringstream mm;
  mm << "x_m,y_m,gamma_deg,solver,coordinate,mean_abs_error\n";
  for (const auto& m : report.mean_map)
    for (std::size_t k = 0; k < 6; ++k)
      mm << num(m.x_m) << ',' << num(m.y_m) << ',' << num(m.gamma_deg) << ',' << to_string(m.solver) << ','
         << kCoordNames[k] << ',' << num(m.mean[k]) << '\n';
  emit("mean_map.csv", mm.str());
  return written;
}

}  // namespace qadapose

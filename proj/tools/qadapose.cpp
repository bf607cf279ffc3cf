// qadapose: command-line front end.
//
// Every run that writes to --out leaves a manifest.cfg there before any
// computation. The manifest is itself a valid --config for the same
// subcommand, so `qadapose <cmd> --config OUT/manifest.cfg --out OUT2`
// reproduces the outputs.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qadapose/calib.hpp"
#include "qadapose/errors.hpp"
#include "qadapose/experiments.hpp"
#include "qadapose/pipeline.hpp"

namespace fs = std::filesystem;
using namespace qadapose;

namespace {

enum Exit { ok = 0, config_error = 2, numeric_error = 3, io_error = 4, internal_error = 1 };

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::config:
      return config_error;
    case ErrorKind::io:
      return io_error;
    default:
      return numeric_error;
  }
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string solver;
  std::optional<double> snr_db;
  std::string out;
  bool full_scale = false;
};

// Command-specific inputs carried in the manifest under input_* keys.
using Inputs = std::map<std::string, std::string>;

const char* kInputKeys[] = {"input_capture", "input_pose",   "input_obs",   "omit_beacons",
                            "free_h_ap",     "observations", "ratio_sigma"};

void add_common(CLI::App* cmd, Common& c, bool needs_out) {
  cmd->add_option("--config", c.config, "scenario file (key = value); a manifest.cfg replays a run");
  cmd->add_option("--seed", c.seed, "master seed, overrides the config");
  cmd->add_option("--solver", c.solver, "epnp | epnp_gn | ippe | rpnp | all, or a comma list");
  cmd->add_option("--snr-db", c.snr_db, "SNR of the summed photocurrent in dB; inf disables noise");
  auto* out = cmd->add_option("--out", c.out, "output directory");
  if (needs_out) out->required();
  cmd->add_flag("--paper-scale", c.full_scale, "10 cm grid, 50 trials per cell (defaults only)");
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<Solver> parse_solvers(const std::string& flag) {
  std::vector<Solver> out;
  std::stringstream ss(flag);
  for (std::string item; std::getline(ss, item, ',');) {
    for (Solver s : solvers_from_flag(item))
      if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
  }
  if (out.empty()) fail(ErrorKind::config, "--solver: empty list");
  return out;
}

// Resolves the scenario: config file (or built-in defaults), then flags.
ScenarioConfig resolve(const Common& c, const std::string& command, Inputs& inputs) {
  ScenarioConfig cfg;
  if (!c.config.empty()) {
    if (c.full_scale) fail(ErrorKind::config, "--paper-scale only selects defaults; it cannot be combined with --config");
    const auto kv = KeyValues::load(c.config);
    if (auto cmd = kv.find("run_command"); cmd && *cmd != command)
      fail(ErrorKind::config, c.config + ": manifest is for '" + *cmd + "', not '" + command + "'");
    for (const char* k : {"run_version", "run_started_utc", "run_outputs"}) kv.find(k);
    for (const char* k : kInputKeys)
      if (auto v = kv.find(k)) inputs.emplace(k, *v);
    cfg = ScenarioConfig::from_keyvalues(kv);
  } else {
    cfg = c.full_scale ? ScenarioConfig::full_scale() : ScenarioConfig::desk();
  }
  if (c.seed) cfg.seed = *c.seed;
  if (c.snr_db) cfg.snr_db = *c.snr_db;
  if (!c.solver.empty()) cfg.solvers = parse_solvers(c.solver);
  cfg.validate();
  return cfg;
}

void write_manifest(const fs::path& dir, const std::string& command, const ScenarioConfig& cfg, const Inputs& inputs,
                    const std::vector<std::string>& outputs) {
  fs::create_directories(dir);
  KeyValues kv;
  kv.set("run_command", command);
  kv.set("run_version", QADAPOSE_VERSION);
  kv.set("run_started_utc", utc_now());
  std::string outs;
  for (const auto& o : outputs) outs += (outs.empty() ? "" : ", ") + o;
  kv.set("run_outputs", outs);
  for (const auto& [k, v] : inputs) kv.set(k, v);
  const auto body = cfg.to_keyvalues();
  for (const auto& k : body.keys()) kv.set(k, *body.find(k));
  write_file_atomic(dir / "manifest.cfg", "# qadapose run manifest\n" + kv.serialize());
}

std::vector<double> parse_list(const std::string& s, const std::string& what) {
  std::vector<double> v;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      fail(ErrorKind::config, what + ": malformed number '" + item + "'");
    }
  }
  return v;
}

Pose parse_pose(const std::string& s) {
  const auto v = parse_list(s, "input_pose");
  if (v.size() != 6) fail(ErrorKind::config, "input_pose: expected x,y,z,alpha,beta,gamma (m, deg)");
  return Pose::from(v[0], v[1], v[2], deg2rad(v[3]), deg2rad(v[4]), deg2rad(v[5]));
}

std::string pose_text(const Pose& p) {
  return format_double(p.position.x()) + "," + format_double(p.position.y()) + "," + format_double(p.position.z()) +
         "," + format_double(rad2deg(p.angles.x())) + "," + format_double(rad2deg(p.angles.y())) + "," +
         format_double(rad2deg(p.angles.z()));
}

CodeBook scenario_codes(const ScenarioConfig& cfg) {
  return gen_codes(cfg.code_family, cfg.chip_length, cfg.beacons().size(), cfg.code_seed(), cfg.samples_per_chip);
}

Synthesis simulate_pose(const ScenarioConfig& cfg, const Pose& pose, const std::string& omit) {
  const auto beacons = cfg.beacons();
  SynthesisOptions opt;
  opt.snr_db = cfg.snr_db;
  opt.amplitude = cfg.amplitude;
  opt.lambert_order = cfg.lambert_order;
  opt.detector_half_extent_mm = cfg.detector_half_extent_mm;
  opt.seed = derive_seed(cfg.seed, {2});
  if (!omit.empty()) {
    opt.active.assign(beacons.size(), true);
    for (double id : parse_list(omit, "omit_beacons")) {
      const auto i = static_cast<long>(id);
      if (i < 0 || i >= static_cast<long>(beacons.size()) || i != id)
        fail(ErrorKind::config, "omit_beacons: no beacon " + format_double(id));
      opt.active[static_cast<std::size_t>(i)] = false;
    }
  }
  return synthesize_capture(beacons, pose, cfg.calibration, scenario_codes(cfg), opt);
}

// ------------------------------------------------------------------ solve

int cmd_solve(const Common& c, const std::string& capture_flag, const std::string& pose_flag,
              const std::string& omit_flag) {
  Inputs in;
  const auto cfg = resolve(c, "solve", in);
  if (!capture_flag.empty()) in["input_capture"] = capture_flag, in.erase("input_pose");
  if (!pose_flag.empty()) in["input_pose"] = pose_flag, in.erase("input_capture");
  if (!omit_flag.empty()) in["omit_beacons"] = omit_flag;
  const bool from_file = in.count("input_capture") != 0;
  if (from_file == (in.count("input_pose") != 0))
    fail(ErrorKind::config, "solve: give exactly one of --capture or --pose");
  if (!c.out.empty()) write_manifest(c.out, "solve", cfg, in, {"pose.cfg"});

  const auto beacons = cfg.beacons();
  std::optional<Pose> truth;
  QadaCapture capture;
  if (from_file) {
    capture = read_capture(in["input_capture"]);
  } else {
    truth = parse_pose(in["input_pose"]);
    capture = simulate_pose(cfg, *truth, in.count("omit_beacons") ? in["omit_beacons"] : "").capture;
  }
  const auto readings = read_image_points(capture, codebook_for(capture), beacons, cfg.calibration,
                                          cfg.ratio_rule, cfg.detector);

  KeyValues rep;
  std::vector<ImagePoint> img;
  for (const auto& r : readings) {
    const std::string b = "beacon" + std::to_string(r.beacon_id) + ".";
    rep.set(b + "image_mm", format_double(r.image.x()) + "," + format_double(r.image.y()));
    rep.set(b + "ratios", format_double(r.extraction.ratios.p_x) + "," + format_double(r.extraction.ratios.p_y));
    rep.set(b + "significance", format_double(r.significance));
    rep.set(b + "low_confidence", r.extraction.low_confidence ? "true" : "false");
    img.push_back(r.image);
  }
  const auto corr = make_correspondences(beacons, img, cfg.calibration.h_ap_mm);
  if (truth) rep.set("truth", pose_text(*truth));
  int failures = 0;
  for (Solver s : cfg.solvers) {
    const std::string p = to_string(s) + ".";
    try {
      const auto sol = solve(s, corr);
      const Pose est = solution_to_pose(sol);
      rep.set(p + "pose", pose_text(est));
      rep.set(p + "reproj_rms_mm", format_double(sol.reproj_rms_mm(cfg.calibration.h_ap_mm)));
      if (truth) {
        const auto e = pose_abs_errors(*truth, est);
        std::string t;
        for (double v : e) t += (t.empty() ? "" : ",") + format_double(v);
        rep.set(p + "abs_error_cm_deg", t);
      }
    } catch (const Error& e) {
      ++failures;
      rep.set(p + "failure", e.what());
    }
  }
  const std::string text = "# pose = x_m,y_m,z_m,alpha_deg,beta_deg,gamma_deg\n" + rep.serialize();
  std::cout << text;
  if (!c.out.empty()) write_file_atomic(fs::path(c.out) / "pose.cfg", text);
  return failures == static_cast<int>(cfg.solvers.size()) ? numeric_error : ok;
}

// --------------------------------------------------------------- simulate

int cmd_simulate(const Common& c, const std::string& pose_flag, const std::string& omit_flag, bool observations,
                 std::optional<double> ratio_sigma) {
  Inputs in;
  const auto cfg = resolve(c, "simulate", in);
  if (!pose_flag.empty()) in["input_pose"] = pose_flag;
  if (!omit_flag.empty()) in["omit_beacons"] = omit_flag;
  if (observations) in["observations"] = "true";
  if (ratio_sigma) in["ratio_sigma"] = format_double(*ratio_sigma);
  const fs::path out = c.out;

  if (in.count("observations") && in["observations"] == "true") {
    const double sigma = in.count("ratio_sigma") ? parse_list(in["ratio_sigma"], "ratio_sigma").at(0) : 0.0;
    write_manifest(out, "simulate", cfg, in, {"observations.csv"});
    const auto obs =
        synthetic_observations(cfg.beacons(), cfg.calibration, calibration_poses(), sigma, derive_seed(cfg.seed, {4}));
    write_observations(out / "observations.csv", obs);
    std::cout << "wrote " << obs.size() << " observations to " << (out / "observations.csv").string() << "\n";
    return ok;
  }
  if (!in.count("input_pose")) fail(ErrorKind::config, "simulate: --pose is required (or --observations)");
  write_manifest(out, "simulate", cfg, in, {"capture.csv", "capture.csv.meta", "truth.cfg"});
  const Pose pose = parse_pose(in["input_pose"]);
  const auto syn = simulate_pose(cfg, pose, in.count("omit_beacons") ? in["omit_beacons"] : "");
  write_capture(out / "capture.csv", syn.capture);
  KeyValues t;
  t.set("pose", pose_text(pose));
  for (std::size_t i = 0; i < syn.emissions.size(); ++i) {
    const auto& e = syn.emissions[i];
    const std::string b = "beacon" + std::to_string(i) + ".";
    t.set(b + "image_mm", format_double(e.image.x()) + "," + format_double(e.image.y()));
    t.set(b + "amplitude", format_double(e.amplitude));
    t.set(b + "saturated", e.saturated ? "true" : "false");
    t.set(b + "out_of_field", e.out_of_field ? "true" : "false");
  }
  write_file_atomic(out / "truth.cfg", t.serialize());
  std::cout << "wrote " << syn.capture.sample_count() << " samples to " << (out / "capture.csv").string() << "\n";
  return ok;
}

// --------------------------------------------------------- Monte Carlo

void print_summary(const McReport& r, std::ostream& os) {
  os << "records " << r.records.size() << ", failures " << r.failures() << ", outliers " << r.outliers()
     << ", skipped points " << r.skipped_points.size() << "\n";
  char line[160];
  std::snprintf(line, sizeof line, "%-8s %9s %9s %9s %9s %9s %9s   (p90; cm, deg)\n", "solver", "x", "y", "z", "alpha",
                "beta", "gamma");
  os << line;
  for (const auto& s : r.summary) {
    std::snprintf(line, sizeof line, "%-8s %9.3f %9.3f %9.3f %9.3f %9.3f %9.3f\n", to_string(s.solver).c_str(),
                  s.p90[0], s.p90[1], s.p90[2], s.p90[3], s.p90[4], s.p90[5]);
    os << line;
  }
}

std::vector<std::string> report_files() {
  std::vector<std::string> f{"records.csv", "summary.csv", "mean_map.csv"};
  for (const char* k : kCoordNames) f.push_back(std::string("cdf_") + k + ".csv");
  return f;
}

int cmd_mc(const Common& c, const std::string& command, std::optional<double> sigma_cm,
           std::optional<unsigned> threads) {
  Inputs in;
  auto cfg = resolve(c, command, in);
  if (sigma_cm) cfg.beacon_sigma_cm = *sigma_cm;
  if (threads) cfg.threads = *threads;
  cfg.validate();
  write_manifest(c.out, command, cfg, in, report_files());
  McReport r;
  if (command == "mc-grid")
    r = run_grid(cfg);
  else if (command == "mc-nine")
    r = run_nine_points(cfg);
  else
    r = run_robustness(cfg, cfg.beacon_sigma_cm);
  write_report(r, c.out);
  print_summary(r, std::cout);
  return ok;
}

// -------------------------------------------------------------- calibrate

int cmd_calibrate(const Common& c, const std::string& obs_flag, bool free_h) {
  Inputs in;
  const auto cfg = resolve(c, "calibrate", in);
  if (!obs_flag.empty()) in["input_obs"] = obs_flag;
  if (free_h) in["free_h_ap"] = "true";
  if (!in.count("input_obs")) fail(ErrorKind::config, "calibrate: --obs is required");
  CalibOptions opt;
  opt.free_h_ap = in.count("free_h_ap") && in["free_h_ap"] == "true";
  if (!c.out.empty()) write_manifest(c.out, "calibrate", cfg, in, {"calibration.cfg"});

  const auto obs = read_observations(in["input_obs"]);
  // Start from the distortion-free model; the gauge constants come from the scenario.
  CalibrationParams init = CalibrationParams::ideal();
  init.l_mm = cfg.calibration.l_mm;
  init.h_ap_mm = cfg.calibration.h_ap_mm;
  if (opt.free_h_ap) init.lambda = cfg.calibration.lambda;
  const auto r = estimate_calibration(obs, cfg.beacons(), init, opt);
  KeyValues kv;
  r.params.to_keyvalues(kv);
  const std::string text = "# gauge: " + r.gauge + "\n# objective_mm2: " + format_double(r.objective) +
                           "\n# seed_objective_mm2: " + format_double(r.seed_objective) +
                           "\n# observations: " + std::to_string(obs.size()) + "\n" + kv.serialize();
  std::cout << text;
  if (!c.out.empty()) write_file_atomic(fs::path(c.out) / "calibration.cfg", text);
  return ok;
}

// ----------------------------------------------------------------- report

int cmd_report(const std::string& dir) {
  std::istringstream in(read_file(fs::path(dir) / "summary.csv"));
  std::string line;
  std::getline(in, line);
  if (line.rfind("solver,coordinate,unit,mean,median,std,p90", 0) != 0)
    fail(ErrorKind::config, dir + "/summary.csv: unexpected header");
  std::printf("%-8s %-6s %-4s %10s %10s %10s %10s %6s %5s %5s\n", "solver", "coord", "unit", "mean", "median", "std",
              "p90", "used", "outl", "fail");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 10) fail(ErrorKind::config, dir + "/summary.csv: malformed row '" + line + "'");
    std::printf("%-8s %-6s %-4s %10.4f %10.4f %10.4f %10.4f %6s %5s %5s\n", f[0].c_str(), f[1].c_str(), f[2].c_str(),
                std::stod(f[3]), std::stod(f[4]), std::stod(f[5]), std::stod(f[6]), f[7].c_str(), f[8].c_str(),
                f[9].c_str());
  }
  if (fs::exists(fs::path(dir) / "manifest.cfg")) {
    const auto m = KeyValues::load(fs::path(dir) / "manifest.cfg");
    std::printf("\nrun: %s, seed %s, version %s\n", m.get_string("run_command").c_str(), m.get_string("seed").c_str(),
                m.get_string("run_version").c_str());
  }
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Indoor positioning from a quadrant photodiode and coded ceiling beacons"};
  app.set_version_flag("--version", QADAPOSE_VERSION);
  app.require_subcommand(1);

  Common common;
  std::string capture, pose, omit, obs, report_dir;
  bool observations = false, free_h = false;
  std::optional<double> ratio_sigma, sigma_cm;
  std::optional<unsigned> threads;

  auto* solve = app.add_subcommand("solve", "estimate the receiver pose from a capture or a simulated pose");
  add_common(solve, common, false);
  solve->add_option("--capture", capture, "capture CSV (with its .meta sidecar)");
  solve->add_option("--pose", pose, "simulate at x,y,z,alpha,beta,gamma (m, deg) and solve");
  solve->add_option("--omit-beacon", omit, "comma list of beacons left dark in the simulation");

  auto* sim = app.add_subcommand("simulate", "write a synthetic capture or calibration observations");
  add_common(sim, common, true);
  sim->add_option("--pose", pose, "receiver pose x,y,z,alpha,beta,gamma (m, deg)");
  sim->add_option("--omit-beacon", omit, "comma list of beacons left dark");
  sim->add_flag("--observations", observations, "write calibration observations instead of a capture");
  sim->add_option("--ratio-sigma", ratio_sigma, "ratio noise for --observations");

  std::map<std::string, CLI::App*> mc;
  for (const char* name : {"mc-grid", "mc-nine", "mc-robust"}) {
    auto* cmd = app.add_subcommand(name, std::string(name) == "mc-grid"   ? "Monte Carlo over the floor grid"
                                         : std::string(name) == "mc-nine" ? "nine points under full rotation"
                                                                          : "grid with one perturbed transmitter");
    add_common(cmd, common, true);
    cmd->add_option("--threads", threads, "worker threads");
    if (std::string(name) == "mc-robust") cmd->add_option("--sigma-cm", sigma_cm, "transmitter position sigma (cm)");
    mc[name] = cmd;
  }

  auto* cal = app.add_subcommand("calibrate", "fit receiver constants to an observations CSV");
  add_common(cal, common, false);
  cal->add_option("--obs", obs, "observations CSV");
  cal->add_flag("--free-h-ap", free_h, "estimate h_ap and hold lambda");

  auto* rep = app.add_subcommand("report", "print the summary of a Monte Carlo output directory");
  rep->add_option("dir", report_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : config_error;
  }

  try {
    if (solve->parsed()) return cmd_solve(common, capture, pose, omit);
    if (sim->parsed()) return cmd_simulate(common, pose, omit, observations, ratio_sigma);
    for (const auto& [name, cmd] : mc)
      if (cmd->parsed()) return cmd_mc(common, name, sigma_cm, threads);
    if (cal->parsed()) return cmd_calibrate(common, obs, free_h);
    if (rep->parsed()) return cmd_report(report_dir);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return io_error;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return internal_error;
  }
  return internal_error;
}

#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "qadapose/keyvalue.hpp"

namespace fs = std::filesystem;
using qadapose::KeyValues;
using qadapose::read_file;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "qadapose_cli_test";

int run(const std::string& args, const std::string& tag = "last") {
  const std::string cmd = std::string(QADAPOSE_CLI) + " " + args + " > " + (kRoot / (tag + ".out")).string() +
                          " 2> " + (kRoot / (tag + ".err")).string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string err(const std::string& tag = "last") { return read_file(kRoot / (tag + ".err")); }

std::vector<double> numbers(const std::string& csv) {
  std::vector<double> v;
  std::stringstream ss(csv);
  for (std::string s; std::getline(ss, s, ',');) v.push_back(std::stod(s));
  return v;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

const char* kSmoke =
    "room_x_m = 1.2\nroom_y_m = 1.2\nroom_height_m = 3.4\nbeacon_side_m = 1.2\ngrid_step_m = 5\n"
    "gamma_deg = 0\nrealizations = 2\nsnr_db = 10\nsolvers = ippe, epnp\nseed = 5\n";

struct Fresh {
  Fresh() {
    fs::remove_all(kRoot);
    fs::create_directories(kRoot);
  }
};

}  // namespace

TEST_CASE("noiseless synthetic solve returns the generating pose") {
  Fresh f;
  REQUIRE(run("solve --pose 1.2,0.8,0,0.5,-0.3,75 --snr-db inf --solver all --out " + (kRoot / "s").string()) == 0);
  const auto kv = KeyValues::load(kRoot / "s" / "pose.cfg");
  const auto truth = numbers(kv.get_string("truth"));
  for (const char* s : {"ippe", "rpnp", "epnp", "epnp_gn"}) {
    const auto est = numbers(kv.get_string(std::string(s) + ".pose"));
    REQUIRE(est.size() == 6);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(est[k] - truth[k]) < 1e-6);
    for (int k = 3; k < 6; ++k) CHECK(std::abs(est[k] - truth[k]) < 1e-4);
  }
  CHECK(fs::exists(kRoot / "s" / "manifest.cfg"));
}

TEST_CASE("a saved capture replays to the same pose") {
  Fresh f;
  const auto sim = (kRoot / "sim").string();
  REQUIRE(run("simulate --pose 0.9,1.1,0,0,0,200 --seed 3 --out " + sim) == 0);
  REQUIRE(run("solve --capture " + sim + "/capture.csv --solver all --out " + (kRoot / "a").string()) == 0);
  REQUIRE(run("solve --capture " + sim + "/capture.csv --solver all --out " + (kRoot / "b").string()) == 0);
  CHECK(read_file(kRoot / "a" / "pose.cfg") == read_file(kRoot / "b" / "pose.cfg"));
  // same seed straight from the pose gives the same estimates
  REQUIRE(run("solve --pose 0.9,1.1,0,0,0,200 --seed 3 --solver all --out " + (kRoot / "c").string()) == 0);
  const auto a = KeyValues::load(kRoot / "a" / "pose.cfg");
  const auto c = KeyValues::load(kRoot / "c" / "pose.cfg");
  CHECK(a.get_string("ippe.pose") == c.get_string("ippe.pose"));
  CHECK(a.get_string("epnp_gn.pose") == c.get_string("epnp_gn.pose"));
  // replaying the manifest of the file-based run
  REQUIRE(run("solve --config " + (kRoot / "a" / "manifest.cfg").string() + " --out " + (kRoot / "d").string()) == 0);
  CHECK(read_file(kRoot / "a" / "pose.cfg") == read_file(kRoot / "d" / "pose.cfg"));
}

TEST_CASE("missing beacon codes are detection failures, distinct from I/O") {
  Fresh f;
  const auto sim = kRoot / "sim";
  REQUIRE(run("simulate --pose 1,1,0,0,0,0 --out " + sim.string()) == 0);
  // a capture whose codebook holds three codes for four beacons
  auto meta = read_file(sim / "capture.csv.meta");
  const auto pos = meta.find("code_count = 4");
  REQUIRE(pos != std::string::npos);
  meta.replace(pos, 14, "code_count = 3");
  write(sim / "capture.csv.meta", meta);
  CHECK(run("solve --capture " + (sim / "capture.csv").string()) == 3);
  CHECK(err().find("beacon 3: no code") != std::string::npos);

  CHECK(run("solve --pose 1,1,0,0,0,0 --omit-beacon 1") == 3);
  CHECK(err().find("beacon 1") != std::string::npos);
  CHECK(run("solve --capture " + (kRoot / "absent.csv").string()) == 4);
}

TEST_CASE("smoke Monte Carlo run, manifest replay and seed override") {
  Fresh f;
  write(kRoot / "smoke.cfg", kSmoke);
  const auto t0 = std::chrono::steady_clock::now();
  REQUIRE(run("mc-grid --config " + (kRoot / "smoke.cfg").string() + " --out " + (kRoot / "m1").string()) == 0);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(secs < 1.0);
  for (const char* file : {"manifest.cfg", "records.csv", "summary.csv", "mean_map.csv", "cdf_x.csv", "cdf_gamma.csv"})
    CHECK(fs::exists(kRoot / "m1" / file));
  const auto records = read_file(kRoot / "m1" / "records.csv");
  CHECK(std::count(records.begin(), records.end(), '\n') == 1 + 2 * 2);

  REQUIRE(run("mc-grid --config " + (kRoot / "m1" / "manifest.cfg").string() + " --out " + (kRoot / "m2").string()) ==
          0);
  CHECK(read_file(kRoot / "m2" / "records.csv") == records);
  CHECK(read_file(kRoot / "m2" / "summary.csv") == read_file(kRoot / "m1" / "summary.csv"));

  REQUIRE(run("mc-grid --config " + (kRoot / "smoke.cfg").string() + " --seed 99 --out " + (kRoot / "m3").string()) ==
          0);
  CHECK(KeyValues::load(kRoot / "m3" / "manifest.cfg").get_string("seed") == "99");
  CHECK(read_file(kRoot / "m3" / "records.csv") != records);

  CHECK(run("report " + (kRoot / "m1").string(), "rep") == 0);
  CHECK(read_file(kRoot / "rep.out").find("ippe") != std::string::npos);
  CHECK(run("mc-grid --config " + (kRoot / "m1" / "manifest.cfg").string() + " --out " + (kRoot / "m4").string() +
            " --solver rpnp") == 0);
  CHECK(run("mc-nine --config " + (kRoot / "m1" / "manifest.cfg").string() + " --out " + (kRoot / "m5").string()) ==
        2);  // a grid manifest is not a nine-point config
}

TEST_CASE("config errors name the offending key and exit 2") {
  Fresh f;
  std::string cfg = kSmoke;
  cfg.erase(cfg.find("realizations = 2\n"), 17);
  write(kRoot / "bad.cfg", cfg);
  CHECK(run("mc-grid --config " + (kRoot / "bad.cfg").string() + " --out " + (kRoot / "o").string()) == 2);
  CHECK(err().find("realizations") != std::string::npos);

  write(kRoot / "bad2.cfg", std::string(kSmoke) + "colour = blue\n");
  CHECK(run("mc-grid --config " + (kRoot / "bad2.cfg").string() + " --out " + (kRoot / "o").string()) == 2);
  CHECK(err().find("colour") != std::string::npos);

  CHECK(run("mc-grid --solver dls --out " + (kRoot / "o").string()) == 2);
  CHECK(run("mc-grid --paper-scale --config " + (kRoot / "bad2.cfg").string() + " --out " + (kRoot / "o").string()) ==
        2);
  CHECK(run("mc-grid") == 2);  // --out is required
  CHECK(run("mc-grid --config " + (kRoot / "none.cfg").string() + " --out " + (kRoot / "o").string()) == 4);
}

TEST_CASE("calibration from simulated observations") {
  Fresh f;
  REQUIRE(run("simulate --observations --out " + (kRoot / "obs").string()) == 0);
  REQUIRE(run("calibrate --obs " + (kRoot / "obs" / "observations.csv").string() + " --out " +
              (kRoot / "cal").string()) == 0);
  const auto text = read_file(kRoot / "cal" / "calibration.cfg");
  CHECK(text.find("# gauge:") != std::string::npos);
  const auto kv = KeyValues::load(kRoot / "cal" / "calibration.cfg");
  CHECK(std::abs(kv.get_double("lambda") - 1.25) < 1e-8);
  CHECK(std::abs(kv.get_double("delta_rad") - 0.1) < 1e-8);
  CHECK(std::abs(kv.get_double("c_x_mm") - 0.055) < 1e-8);
  CHECK(std::abs(kv.get_double("c_y_mm") + 0.035) < 1e-8);

  write(kRoot / "two.csv", "x_m,y_m,z_m,alpha_deg,beta_deg,gamma_deg,px0,py0,px1,py1,px2,py2,px3,py3\n"
                           "1,1,0,0,0,0,0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1\n"
                           "1,1,0,0,0,10,0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1\n");
  CHECK(run("calibrate --obs " + (kRoot / "two.csv").string()) == 3);
  CHECK(err().find("3 distinct poses") != std::string::npos);
}

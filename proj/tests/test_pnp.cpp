#include <random>

#include "doctest.h"
#include "qadapose/pnp.hpp"

using namespace qadapose;

namespace {

constexpr double kHap = 2.55;

Correspondences synth(const std::vector<Eigen::Vector3d>& world, const Pose& pose) {
  Correspondences c;
  for (const auto& w : world) c.push_back({w, project(world_to_cam(pose, w), 1.0)});
  return c;
}

std::vector<Eigen::Vector3d> square_points() {
  std::vector<Eigen::Vector3d> w;
  for (const auto& b : BeaconSet::square().beacons) w.push_back(b.position);
  return w;
}

Pose floor_pose(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 2), g(-std::numbers::pi, std::numbers::pi);
  Pose p;
  p.position = {u(rng), u(rng), 0};
  p.angles = {0, 0, g(rng)};
  return p;
}

double angle_error(const Pose& a, const Pose& b) {
  double e = 0;
  for (int k = 0; k < 3; ++k) e = std::max(e, std::abs(wrap_angle(a.angles(k) - b.angles(k))));
  return e;
}

}  // namespace

TEST_CASE("homography_dlt") {
  const std::vector<Eigen::Vector2d> pts{{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.3, 0.6}};
  Eigen::Matrix3d h = homography_dlt(pts, pts);
  CHECK((h - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);

  Eigen::Matrix3d sim;
  const double c = std::cos(0.4) * 1.7, s = std::sin(0.4) * 1.7;
  sim << c, -s, 0.3, s, c, -2.0, 0, 0, 1;
  std::vector<Eigen::Vector2d> img;
  for (const auto& p : pts) img.push_back((sim * p.homogeneous()).hnormalized());
  h = homography_dlt(pts, img);
  CHECK((h - sim).cwiseAbs().maxCoeff() < 1e-10);

  // pin-hole view of the ceiling square
  Pose pose;
  pose.position = {0.3, 1.6, 0};
  pose.angles = {0.05, -0.03, 2.0};
  std::vector<Eigen::Vector2d> plane, proj;
  for (const auto& w : square_points()) {
    plane.push_back(w.head<2>());
    proj.push_back(project(world_to_cam(pose, w), 1.0));
  }
  h = homography_dlt(plane, proj);
  for (std::size_t i = 0; i < plane.size(); ++i)
    CHECK(((h * plane[i].homogeneous()).hnormalized() - proj[i]).norm() < 1e-10);

  const std::vector<Eigen::Vector2d> line{{0, 0}, {1, 1}, {2, 2}, {0, 1}};
  try {
    homography_dlt(line, line);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::degeneracy);
  }
}

TEST_CASE("ippe: exact recovery on the reference scenario") {
  Pose truth;
  truth.position = {1, 1, 0};
  truth.angles = {0, 0, deg2rad(120)};
  const auto corr = synth(square_points(), truth);
  const auto res = ippe(corr);
  // Directly under the centroid the plane is fronto-parallel to the centroid
  // ray; the tilt is then second order in the homography Jacobian and the
  // closed form bottoms out near sqrt(machine epsilon).
  const Pose est = solution_to_pose(res.best);
  CHECK((est.position - truth.position).norm() < 1e-6);
  CHECK(angle_error(est, truth) < 1e-6);
  CHECK(res.best.reproj_rms_mm(kHap) < 1e-8);
  CHECK(res.best.reproj_rms <= res.alternate.reproj_rms + 1e-12);
  const Pose polished = solution_to_pose(refine_gauss_newton(res.best, corr));
  CHECK((polished.position - truth.position).norm() < 1e-8);
  CHECK(angle_error(polished, truth) < 1e-8);
}

TEST_CASE("ippe: exact recovery away from the centroid ray") {
  for (const Eigen::Vector3d pos : {Eigen::Vector3d(0.3, 1.6, 0), Eigen::Vector3d(1.8, 0.2, 0), Eigen::Vector3d(0.5, 0.5, 0)}) {
    Pose truth;
    truth.position = pos;
    truth.angles = {0, 0, deg2rad(120)};
    const auto res = ippe(synth(square_points(), truth));
    const Pose est = solution_to_pose(res.best);
    CHECK((est.position - truth.position).norm() < 1e-8);
    CHECK(angle_error(est, truth) < 1e-8);
    CHECK(res.best.reproj_rms_mm(kHap) < 1e-9);
  }
}

TEST_CASE("ippe: fronto-parallel pure translation") {
  Pose truth;
  truth.position = {1, 1, 0};
  const auto res = ippe(synth(square_points(), truth));
  CHECK((solution_to_pose(res.best).position - truth.position).norm() < 1e-6);
  CHECK(std::abs(res.best.reproj_rms - res.alternate.reproj_rms) < 1e-9);
  // the two tilts are mirror images: the alternate's tilt is the negated best tilt
  const Eigen::Vector3d nb = res.best.rotation.col(2), na = res.alternate.rotation.col(2);
  CHECK((nb.head<2>() + na.head<2>()).norm() < 1e-6);
}

TEST_CASE("ippe: tilted view gives distinct candidates; non-coplanar input is rejected") {
  Pose truth;
  truth.position = {0.2, 0.4, 0};
  truth.angles = {0.2, -0.1, 1.0};
  const auto res = ippe(synth(square_points(), truth));
  CHECK((res.best.rotation - res.alternate.rotation).norm() > 1e-3);
  CHECK(res.alternate.reproj_rms > res.best.reproj_rms);

  // a centimetre of beacon height error is fitted through, not rejected
  auto near = square_points();
  near[1].z() += 0.01;
  const auto fitted = ippe(synth(near, truth)).best;
  CHECK((solution_to_pose(fitted).position - truth.position).norm() < 0.05);

  auto pts = square_points();
  pts[2].z() += 0.3;
  try {
    ippe(synth(pts, truth));
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::contract);
  }
}

TEST_CASE("epnp: non-planar cloud and planar square") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<Eigen::Vector3d> cloud;
  for (int i = 0; i < 6; ++i) cloud.push_back(Eigen::Vector3d(1 + u(rng), 1 + u(rng), 3 + 0.5 * u(rng)));
  for (int rep = 0; rep < 50; ++rep) {
    const Pose truth = floor_pose(rng);
    auto sol = epnp(synth(cloud, truth));
    CHECK((solution_to_pose(sol).position - truth.position).norm() < 1e-6);
    sol = epnp(synth(square_points(), truth));
    CHECK((solution_to_pose(sol).position - truth.position).norm() < 1e-4);
    CHECK(sol.method == SolverMethod::epnp);
  }
  const std::vector<Eigen::Vector3d> line{{0, 0, 3}, {1, 1, 3}, {2, 2, 3}, {3, 3, 3}};
  Pose p;
  CHECK_THROWS_AS(epnp(synth(line, p)), Error);
  CHECK_THROWS_AS(epnp(synth({{0, 0, 3}, {1, 0, 3}, {0, 1, 3}}, p)), Error);
}

TEST_CASE("rpnp: planar square and near-minimal non-planar set") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int rep = 0; rep < 50; ++rep) {
    const Pose truth = floor_pose(rng);
    auto sol = rpnp(synth(square_points(), truth));
    CHECK((solution_to_pose(sol).position - truth.position).norm() < 1e-6);

    std::vector<Eigen::Vector3d> four;
    for (int i = 0; i < 4; ++i) four.push_back(Eigen::Vector3d(1 + u(rng), 1 + u(rng), 3 + 0.4 * u(rng)));
    sol = rpnp(synth(four, truth));
    CHECK((solution_to_pose(sol).position - truth.position).norm() < 1e-6);
  }
  auto pts = square_points();
  pts[3] = pts[0];
  Pose p;
  p.position = {1, 1, 0};
  CHECK_THROWS_AS(rpnp(synth(pts, p)), Error);
}

TEST_CASE("exact recovery over 500 random floor poses") {
  std::mt19937_64 rng(2024);
  const auto world = square_points();
  double ippe_pos = 0, ippe_ang = 0, rpnp_pos = 0, rpnp_ang = 0, epnp_pos = 0, epnp_gn_pos = 0;
  for (int rep = 0; rep < 500; ++rep) {
    const Pose truth = floor_pose(rng);
    const auto corr = synth(world, truth);
    const Pose pi = solution_to_pose(ippe(corr).best);
    const Pose pr = solution_to_pose(rpnp(corr));
    const auto e = epnp(corr);
    const Pose pe = solution_to_pose(e);
    const Pose pg = solution_to_pose(refine_gauss_newton(e, corr));
    ippe_pos = std::max(ippe_pos, (pi.position - truth.position).norm());
    ippe_ang = std::max(ippe_ang, angle_error(pi, truth));
    rpnp_pos = std::max(rpnp_pos, (pr.position - truth.position).norm());
    rpnp_ang = std::max(rpnp_ang, angle_error(pr, truth));
    epnp_pos = std::max(epnp_pos, (pe.position - truth.position).norm());
    epnp_gn_pos = std::max(epnp_gn_pos, (pg.position - truth.position).norm());
  }
  CHECK(ippe_pos < 1e-6);
  CHECK(ippe_ang < 1e-6);
  CHECK(rpnp_pos < 1e-6);
  CHECK(rpnp_ang < 1e-6);
  CHECK(epnp_pos < 1e-4);
  CHECK(epnp_gn_pos < 1e-8);
}

TEST_CASE("cheirality and equivariance") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> g(0, 0.002);
  const auto world = square_points();
  const Eigen::Vector3d shift(3.0, -1.5, 0.7);
  for (int rep = 0; rep < 50; ++rep) {
    const Pose truth = floor_pose(rng);
    auto corr = synth(world, truth);
    for (auto& c : corr) c.image += Eigen::Vector2d(g(rng), g(rng));
    auto moved = corr;
    for (auto& c : moved) c.world += shift;

    const auto check_pair = [&](const PnPSolution& a, const PnPSolution& b) {
      CHECK(in_front(a.rotation, a.translation, corr));
      CHECK(in_front(b.rotation, b.translation, moved));
      CHECK(std::abs(a.reproj_rms - b.reproj_rms) < 1e-9);
      CHECK((b.receiver_position() - a.receiver_position() - shift).norm() < 1e-9);
    };
    check_pair(ippe(corr).best, ippe(moved).best);
    check_pair(rpnp(corr), rpnp(moved));
    check_pair(epnp(corr), epnp(moved));
  }
}

TEST_CASE("refine_gauss_newton") {
  const auto world = square_points();
  Pose truth;
  truth.position = {0.6, 1.4, 0};
  truth.angles = {0, 0, deg2rad(200)};
  const auto corr = synth(world, truth);
  const auto exact = ippe(corr).best;
  RefineStats stats;
  const auto same = refine_gauss_newton(exact, corr, &stats);
  CHECK((same.translation - exact.translation).norm() < 1e-12);
  CHECK(same.refined);

  PnPSolution off = exact;
  off.rotation = rot_from_euler(deg2rad(1.0), 0.0, 0.0) * exact.rotation;
  off.translation += Eigen::Vector3d(0.01, 0, 0);
  off.reproj_rms = reprojection_rms(off.rotation, off.translation, corr);
  const auto fixed = refine_gauss_newton(off, corr);
  const Pose p = solution_to_pose(fixed);
  CHECK((p.position - truth.position).norm() < 1e-8);
  CHECK(angle_error(p, truth) < 1e-8);

  std::mt19937_64 rng(12);
  std::normal_distribution<double> g(0, 0.003);
  auto noisy = corr;
  for (auto& c : noisy) c.image += Eigen::Vector2d(g(rng), g(rng));
  const auto init = epnp(noisy);
  const auto ref = refine_gauss_newton(init, noisy, &stats);
  CHECK(ref.reproj_rms <= init.reproj_rms);
  REQUIRE(stats.cost_trace.size() >= 1);
  for (std::size_t i = 1; i < stats.cost_trace.size(); ++i) CHECK(stats.cost_trace[i] <= stats.cost_trace[i - 1]);
  CHECK(stats.iterations <= 50);
}

TEST_CASE("solution_to_pose and selection") {
  PnPSolution id;
  const Pose p = solution_to_pose(id);
  CHECK(p.position.norm() == 0);
  CHECK(p.angles.norm() == 0);

  PnPSolution rz;
  rz.rotation = rot_z(0.8);
  const Pose q = solution_to_pose(rz);
  CHECK(q.angles(0) == 0);
  CHECK(q.angles(1) == 0);

  PnPSolution a, b;
  a.rotation = rot_z(0.1);
  b.rotation = rot_z(2.0);
  a.reproj_rms = b.reproj_rms = 1e-3;
  const std::vector<PnPSolution> both{a, b};
  SelectionContext ctx;
  ctx.previous_gamma = 1.9;
  CHECK(&select_best(both, ctx) == &both[1]);
  ctx.previous_gamma = 0.0;
  CHECK(&select_best(both, ctx) == &both[0]);
  PnPSolution c = a;
  c.rotation = rot_y(0.3) * rot_z(2.0);
  const std::vector<PnPSolution> tilt{c, a};
  CHECK(&select_best(tilt) == &tilt[1]);
  PnPSolution worse = b;
  worse.reproj_rms = 1;
  const std::vector<PnPSolution> mixed{worse, a};
  CHECK(&select_best(mixed) == &mixed[1]);
}

TEST_CASE("make_correspondences") {
  const auto beacons = BeaconSet::square();
  const std::vector<ImagePoint> img{{2.55, 0}, {0, 0}, {0, -1.275}, {1, 1}};
  const auto c = make_correspondences(beacons, img, kHap);
  CHECK(c[0].image.x() == doctest::Approx(1));
  CHECK(c[2].image.y() == doctest::Approx(-0.5));
  CHECK(c[3].world == beacons.beacons[3].position);
  CHECK_THROWS_AS(make_correspondences(beacons, std::span(img).first(3), kHap), Error);
}

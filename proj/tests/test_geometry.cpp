#include <random>

#include "doctest.h"
#include "qadapose/geometry.hpp"

using namespace qadapose;

TEST_CASE("rot_from_euler conventions") {
  CHECK((rot_from_euler(0.0, 0.0, 0.0) - Eigen::Matrix3d::Identity()).norm() == 0);
  const Eigen::Matrix3d rz = rot_from_euler(0.0, 0.0, std::numbers::pi / 2);
  CHECK((rz * Eigen::Vector3d::UnitX() - Eigen::Vector3d::UnitY()).norm() < 1e-15);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-std::numbers::pi, std::numbers::pi);
  for (int i = 0; i < 200; ++i) {
    const double g1 = u(rng), g2 = u(rng);
    CHECK((rot_z(g1) * rot_z(g2) - rot_z(g1 + g2)).cwiseAbs().maxCoeff() < 1e-12);
    const Eigen::Matrix3d r = rot_from_euler(u(rng), u(rng) / 2.2, u(rng));
    CHECK((r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(r.determinant() == doctest::Approx(1).epsilon(1e-10));
  }
}

TEST_CASE("euler_from_rot round trip") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> b(-1.5, 1.5);
  for (int i = 0; i < 500; ++i) {
    const Eigen::Vector3d a(u(rng), b(rng), u(rng));
    const auto e = euler_from_rot(rot_from_euler(a(0), a(1), a(2)));
    CHECK_FALSE(e.gimbal_lock);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(wrap_angle(e.angles(k) - a(k))) < 1e-10);
  }
  CHECK(euler_from_rot(Eigen::Matrix3d(Eigen::Matrix3d::Identity())).angles.norm() == 0);
  const auto z = euler_from_rot(rot_z(0.7));
  CHECK(std::abs(z.angles(0)) < 1e-15);
  CHECK(std::abs(z.angles(1)) < 1e-15);
  CHECK(z.angles(2) == doctest::Approx(0.7));
}

TEST_CASE("euler_from_rot at gimbal lock") {
  const Eigen::Matrix3d r = rot_from_euler(0.4, std::numbers::pi / 2, -0.3);
  const auto e = euler_from_rot(r);
  CHECK(e.gimbal_lock);
  CHECK(e.angles(0) == 0);
  CHECK((rot_from_euler(e.angles(0), e.angles(1), e.angles(2)) - r).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("wrap_angle range") {
  CHECK(wrap_angle(std::numbers::pi) == doctest::Approx(std::numbers::pi));
  CHECK(wrap_angle(-std::numbers::pi) == doctest::Approx(std::numbers::pi));
  CHECK(wrap_angle(3 * std::numbers::pi / 2) == doctest::Approx(-std::numbers::pi / 2));
}

TEST_CASE("world_to_cam") {
  Pose p;
  CHECK((world_to_cam(p, Eigen::Vector3d(0, 0, 3.4)) - Eigen::Vector3d(0, 0, 3.4)).norm() == 0);
  p.position = {1, 1, 0};
  CHECK((world_to_cam(p, Eigen::Vector3d(1.6, 1.0, 3.4)) - Eigen::Vector3d(0.6, 0, 3.4)).norm() < 1e-15);

  Pose q = p;
  q.angles(2) = deg2rad(120);
  const auto beacons = BeaconSet::square();
  for (const auto& b : beacons.beacons) {
    const Eigen::Vector3d c0 = world_to_cam(p, b.position);
    CHECK((world_to_cam(q, b.position) - rot_z(deg2rad(120.0)) * c0).norm() < 1e-12);
  }
  // rigid: distances preserved
  q.angles = {0.1, -0.2, 0.3};
  for (std::size_t i = 0; i < beacons.size(); ++i)
    for (std::size_t j = 0; j < beacons.size(); ++j) {
      const double dw = (beacons.beacons[i].position - beacons.beacons[j].position).norm();
      const double dc = (world_to_cam(q, beacons.beacons[i].position) - world_to_cam(q, beacons.beacons[j].position)).norm();
      CHECK(std::abs(dw - dc) < 1e-12);
    }
}

TEST_CASE("project") {
  CHECK(project(Eigen::Vector3d(0, 0, 3.4), 2.55).norm() == 0);
  const auto x = project(Eigen::Vector3d(0.6, 0, 3.4), 2.55);
  CHECK(x.x() == doctest::Approx(2.55 * 0.6 / 3.4).epsilon(1e-15));
  CHECK(x.x() == doctest::Approx(0.45));
  CHECK(x.y() == 0);
  const Eigen::Vector3d c(0.3, -0.2, 2.0);
  CHECK((project(Eigen::Vector3d(c.x(), c.y(), 2 * c.z()), 2.55) - project(c, 2.55) / 2).norm() < 1e-15);
  for (double k : {0.1, 3.0, 1e3}) CHECK((project(Eigen::Vector3d(k * c), 2.55) - project(c, 2.55)).norm() < 1e-14);

  try {
    project(Eigen::Vector3d(0, 0, -1), 2.55);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::behind_camera);
  }
  try {
    project(Eigen::Vector3d(0, 0, 1e-12), 2.55);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::degeneracy);
  }
}

TEST_CASE("reproj_rms") {
  const auto beacons = BeaconSet::square();
  Pose p;
  p.position = {0.8, 1.3, 0};
  p.angles = {0.02, -0.01, 1.0};
  const Eigen::Matrix3d r = rotation_of(p);
  const Eigen::Vector3d t = -r * p.position;
  std::vector<Eigen::Vector2d> obs;
  for (const auto& b : beacons.beacons) obs.push_back(project(world_to_cam(p, b.position), 2.55));
  CHECK(reproj_rms<double>(r, t, beacons, obs, 2.55) < 1e-15);

  auto shifted = obs;
  for (auto& o : shifted) o.x() += 1.0;
  CHECK(reproj_rms<double>(r, t, beacons, shifted, 2.55) == doctest::Approx(1.0));

  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0, 0.1);
  auto noisy = obs;
  double sum = 0;
  for (auto& o : noisy) {
    const Eigen::Vector2d d(g(rng), g(rng));
    o += d;
    sum += d.squaredNorm();
  }
  CHECK(reproj_rms<double>(r, t, beacons, noisy, 2.55) == doctest::Approx(std::sqrt(sum / 4)).epsilon(1e-12));
  obs.pop_back();
  CHECK_THROWS_AS(reproj_rms<double>(r, t, beacons, obs, 2.55), Error);
}

TEST_CASE("BeaconSet") {
  auto s = BeaconSet::square();
  CHECK_NOTHROW(s.validate());
  CHECK(s.beacons[0].position.isApprox(Eigen::Vector3d(0.4, 0.4, 3.4)));
  CHECK(s.beacons[2].position.isApprox(Eigen::Vector3d(1.6, 1.6, 3.4)));
  auto dup = s;
  dup.beacons[1].id = dup.beacons[0].id;
  CHECK_THROWS_AS(dup.validate(), Error);
  auto tilted = s;
  tilted.beacons[3].position.z() += 1e-6;
  CHECK_THROWS_AS(tilted.validate(), Error);
  tilted.planar = false;
  CHECK_NOTHROW(tilted.validate());
  auto few = s;
  few.beacons.pop_back();
  CHECK_THROWS_AS(few.validate(), Error);
}

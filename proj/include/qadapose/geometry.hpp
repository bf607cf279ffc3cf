#pragma once

// Frames and projection.
//
// World frame: metres, origin at a room corner, z up.
// Camera frame: origin at the aperture centre, z along the receiver normal
// (towards the ceiling for a floor-mounted receiver).
// X_cam = R (X_world - C), R = Rx(alpha) Ry(beta) Rz(gamma), C = receiver position.
// Image plane: millimetres, x_r = h_ap * x_cam / z_cam.

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "qadapose/errors.hpp"
#include "qadapose/numerics.hpp"

namespace qadapose {

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;

/// Image point on the detector plane in millimetres.
using ImagePoint = Eigen::Vector2d;

template <typename Scalar>
Scalar wrap_angle(Scalar a) {
  constexpr Scalar pi = std::numbers::pi_v<Scalar>;
  a = std::remainder(a, Scalar(2) * pi);
  if (a <= -pi) a += Scalar(2) * pi;
  return a;
}

template <typename Scalar>
struct PoseT {
  Vec3<Scalar> position = Vec3<Scalar>::Zero();  // metres
  Vec3<Scalar> angles = Vec3<Scalar>::Zero();    // alpha, beta, gamma in radians

  static PoseT from(Scalar x, Scalar y, Scalar z, Scalar alpha, Scalar beta, Scalar gamma) {
    PoseT p;
    p.position << x, y, z;
    p.angles << wrap_angle(alpha), wrap_angle(beta), wrap_angle(gamma);
    return p;
  }
};
using Pose = PoseT<double>;

template <typename Scalar>
Mat3<Scalar> rot_x(Scalar a) {
  Mat3<Scalar> r;
  r << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return r;
}

template <typename Scalar>
Mat3<Scalar> rot_y(Scalar a) {
  Mat3<Scalar> r;
  r << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return r;
}

template <typename Scalar>
Mat3<Scalar> rot_z(Scalar a) {
  Mat3<Scalar> r;
  r << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return r;
}

template <typename Scalar>
Mat3<Scalar> rot_from_euler(Scalar alpha, Scalar beta, Scalar gamma) {
  return rot_x(alpha) * rot_y(beta) * rot_z(gamma);
}

template <typename Scalar>
struct EulerAngles {
  Vec3<Scalar> angles;
  bool gimbal_lock = false;  // alpha forced to zero
};

template <typename Scalar>
EulerAngles<Scalar> euler_from_rot(const Mat3<Scalar>& r) {
  EulerAngles<Scalar> out;
  const Scalar sb = std::clamp(r(0, 2), Scalar(-1), Scalar(1));
  const Scalar cb = std::hypot(r(0, 0), r(0, 1));
  const Scalar beta = std::atan2(sb, cb);
  if (cb < Scalar(Tolerances::gimbal_cos)) {
    out.gimbal_lock = true;
    out.angles << Scalar(0), beta, std::atan2(r(1, 0), r(1, 1));
  } else {
    out.angles << std::atan2(-r(1, 2), r(2, 2)), beta, std::atan2(-r(0, 1), r(0, 0));
  }
  return out;
}

template <typename Scalar>
Mat3<Scalar> rotation_of(const PoseT<Scalar>& pose) {
  return rot_from_euler(pose.angles(0), pose.angles(1), pose.angles(2));
}

template <typename Scalar>
Vec3<Scalar> world_to_cam(const PoseT<Scalar>& pose, const Vec3<Scalar>& p) {
  return rotation_of(pose) * (p - pose.position);
}

/// Pin-hole projection. Camera point in metres, h_ap and result in millimetres.
template <typename Scalar>
Vec2<Scalar> project(const Vec3<Scalar>& p_cam, Scalar h_ap) {
  if (!(p_cam.z() > Scalar(0))) fail(ErrorKind::behind_camera, "project: point behind the aperture");
  if (p_cam.z() < Scalar(Tolerances::min_depth))
    fail(ErrorKind::degeneracy, "project: point too close to the aperture plane");
  return Vec2<Scalar>(h_ap * p_cam.x() / p_cam.z(), h_ap * p_cam.y() / p_cam.z());
}

struct Beacon {
  int id = 0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
};

struct BeaconSet {
  std::vector<Beacon> beacons;
  bool planar = true;

  std::size_t size() const { return beacons.size(); }

  Points3<double> positions() const {
    Points3<double> p(3, static_cast<Eigen::Index>(beacons.size()));
    for (std::size_t i = 0; i < beacons.size(); ++i) p.col(static_cast<Eigen::Index>(i)) = beacons[i].position;
    return p;
  }

  /// Throws on fewer than four beacons, duplicate ids, or a planar set
  /// whose heights differ.
  void validate() const;

  /// Four ceiling beacons on a square of the given side, centred on (cx, cy).
  static BeaconSet square(double side = 1.2, double cx = 1.0, double cy = 1.0, double height = 3.4);
};

/// Root-mean-square image residual (mm) of the pose X_cam = R X + t.
template <typename Scalar>
Scalar reproj_rms(const Mat3<Scalar>& r, const Vec3<Scalar>& t, const BeaconSet& beacons,
                  std::span<const Vec2<Scalar>> observed, Scalar h_ap) {
  require(observed.size() == beacons.size(), ErrorKind::contract,
          "reproj_rms: observation count does not match beacons");
  Scalar sum = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const Vec3<Scalar> cam = r * beacons.beacons[i].position.template cast<Scalar>() + t;
    sum += (project(cam, h_ap) - observed[i]).squaredNorm();
  }
  return std::sqrt(sum / Scalar(observed.size()));
}

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

}  // namespace qadapose

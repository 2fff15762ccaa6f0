#pragma once

// Coordinate algebra shared by every module.
//
// Conventions:
//   * every length is in millimeters;
//   * angles are radians internally and degrees at reporting interfaces;
//   * a transform named T_a_from_b maps coordinates expressed in frame b into
//     frame a, so compose(T_a_from_b, T_b_from_c) yields T_a_from_c.

#include <array>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace uscal {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;

constexpr double deg2rad(double deg) noexcept { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) noexcept { return rad * 180.0 / kPi; }

/// Rigid transform x' = R x + t.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  RigidTransform() = default;
  RigidTransform(const Mat3& r, const Vec3& t) : rotation(r), translation(t) {}

  static RigidTransform identity() { return {}; }
  static RigidTransform from_translation(const Vec3& t) { return {Mat3::Identity(), t}; }
  static RigidTransform from_rotation(const Mat3& r) { return {r, Vec3::Zero()}; }
  /// Quaternion is normalized before use.
  static RigidTransform from_quaternion(const Eigen::Quaterniond& q, const Vec3& t);

  [[nodiscard]] Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  [[nodiscard]] Vec3 apply_direction(const Vec3& d) const { return rotation * d; }
  [[nodiscard]] Eigen::Quaterniond quaternion() const;
  [[nodiscard]] Eigen::Matrix4d matrix() const;

  /// Orthonormality and det(R) = +1 within `tol`.
  [[nodiscard]] bool is_valid(double tol = 1e-9) const;
};

RigidTransform compose(const RigidTransform& a_from_b, const RigidTransform& b_from_c);
RigidTransform invert(const RigidTransform& t);

inline RigidTransform operator*(const RigidTransform& a_from_b, const RigidTransform& b_from_c) {
  return compose(a_from_b, b_from_c);
}

Mat3 rot_x(double rad);
Mat3 rot_y(double rad);
Mat3 rot_z(double rad);
Mat3 axis_angle(const Vec3& axis, double rad);

/// Rotation angle of R in radians, in [0, pi].
double rotation_angle(const Mat3& r);

/// Closest rotation in the Frobenius sense (orthogonal polar factor, det +1).
Mat3 nearest_rotation(const Mat3& m);

/// Intrinsic Z-Y-X decomposition R = Rz(yaw) * Ry(pitch) * Rx(roll).
struct EulerZyx {
  double roll = 0.0;   // about x, radians
  double pitch = 0.0;  // about y, radians
  double yaw = 0.0;    // about z, radians
  bool gimbal_lock = false;
};

EulerZyx euler_zyx(const Mat3& r);
Mat3 from_euler_zyx(double roll, double pitch, double yaw);

/// Pinhole camera; pixel centers sit on integer coordinates.
struct CameraIntrinsics {
  double fx = 600.0;
  double fy = 600.0;
  double cx = 320.0;
  double cy = 240.0;
  int width = 640;
  int height = 480;

  /// Throws InvalidArgument on fx/fy <= 0 or principal point outside the frame.
  void validate() const;
};

/// u = fx x / z + cx, v = fy y / z + cy. Throws NonPositiveDepth for z <= 0.
Vec2 project(const CameraIntrinsics& k, const Vec3& p_cam);

/// Inverse of project at z-depth `depth`. Throws NonPositiveDepth for depth <= 0.
Vec3 unproject(const CameraIntrinsics& k, const Vec2& pixel, double depth);

/// Offsets between a ground-truth pose and an estimate. Euler angles are the
/// Z-Y-X decomposition of R_gt^T R_est in degrees, ordered {about x, about y,
/// about z}, each in (-180, 180].
struct PoseOffset {
  double center_offset = 0.0;
  std::array<double, 3> euler_offsets{0.0, 0.0, 0.0};
  bool gimbal_lock = false;
};

PoseOffset pose_offset(const RigidTransform& t_gt, const RigidTransform& t_est);

/// Camera pose looking from `eye` at `target`; image y follows `down` as
/// closely as possible. Returns T_world_from_cam.
RigidTransform look_at(const Vec3& eye, const Vec3& target, const Vec3& down);

Mat3 skew(const Vec3& v);

}  // namespace uscal

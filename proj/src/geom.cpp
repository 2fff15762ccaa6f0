#include "uscal/geom.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SVD>

#include "uscal/error.hpp"

namespace uscal {

namespace {

constexpr double kDriftTolerance = 1e-12;
constexpr double kGimbalTolerance = 1e-6;

double wrap_degrees(double deg) {
  // (-180, 180]
  if (deg <= -180.0) deg += 360.0;
  if (deg > 180.0) deg -= 360.0;
  return deg;
}

}  // namespace

RigidTransform RigidTransform::from_quaternion(const Eigen::Quaterniond& q, const Vec3& t) {
  return {q.normalized().toRotationMatrix(), t};
}

Eigen::Quaterniond RigidTransform::quaternion() const {
  Eigen::Quaterniond q(rotation);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  return q;
}

Eigen::Matrix4d RigidTransform::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

bool RigidTransform::is_valid(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
}

RigidTransform compose(const RigidTransform& a_from_b, const RigidTransform& b_from_c) {
  RigidTransform out{a_from_b.rotation * b_from_c.rotation,
                     a_from_b.rotation * b_from_c.translation + a_from_b.translation};
  const double drift =
      (out.rotation.transpose() * out.rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (drift > kDriftTolerance) out.rotation = nearest_rotation(out.rotation);
  return out;
}

RigidTransform invert(const RigidTransform& t) {
  const Mat3 rt = t.rotation.transpose();
  return {rt, -(rt * t.translation)};
}

Mat3 rot_x(double rad) {
  return Eigen::AngleAxisd(rad, Vec3::UnitX()).toRotationMatrix();
}

Mat3 rot_y(double rad) {
  return Eigen::AngleAxisd(rad, Vec3::UnitY()).toRotationMatrix();
}

Mat3 rot_z(double rad) {
  return Eigen::AngleAxisd(rad, Vec3::UnitZ()).toRotationMatrix();
}

Mat3 axis_angle(const Vec3& axis, double rad) {
  return Eigen::AngleAxisd(rad, axis.normalized()).toRotationMatrix();
}

double rotation_angle(const Mat3& r) {
  // atan2 form stays accurate near 0 and pi, unlike acos((tr - 1) / 2).
  const Vec3 w(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  return std::atan2(0.5 * w.norm(), 0.5 * (r.trace() - 1.0));
}

Mat3 nearest_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

EulerZyx euler_zyx(const Mat3& r) {
  EulerZyx e;
  const double s = std::clamp(-r(2, 0), -1.0, 1.0);
  e.pitch = std::asin(s);
  if (std::abs(std::abs(e.pitch) - kPi / 2.0) < kGimbalTolerance) {
    // Roll and yaw share an axis; put everything in yaw.
    e.gimbal_lock = true;
    e.roll = 0.0;
    e.yaw = std::atan2(-r(0, 1), r(1, 1));
    return e;
  }
  e.roll = std::atan2(r(2, 1), r(2, 2));
  e.yaw = std::atan2(r(1, 0), r(0, 0));
  return e;
}

Mat3 from_euler_zyx(double roll, double pitch, double yaw) {
  return rot_z(yaw) * rot_y(pitch) * rot_x(roll);
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw Error(ErrorKind::InvalidArgument, "image size must be positive");
  }
  if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
    throw Error(ErrorKind::InvalidArgument, "principal point outside the image");
  }
}

Vec2 project(const CameraIntrinsics& k, const Vec3& p_cam) {
  if (!(p_cam.z() > 0.0)) {
    throw Error(ErrorKind::NonPositiveDepth, "cannot project a point with z <= 0");
  }
  return {k.fx * p_cam.x() / p_cam.z() + k.cx, k.fy * p_cam.y() / p_cam.z() + k.cy};
}

Vec3 unproject(const CameraIntrinsics& k, const Vec2& pixel, double depth) {
  if (!(depth > 0.0)) {
    throw Error(ErrorKind::NonPositiveDepth, "cannot unproject with depth <= 0");
  }
  return {(pixel.x() - k.cx) / k.fx * depth, (pixel.y() - k.cy) / k.fy * depth, depth};
}

PoseOffset pose_offset(const RigidTransform& t_gt, const RigidTransform& t_est) {
  PoseOffset out;
  out.center_offset = (t_gt.translation - t_est.translation).norm();
  const EulerZyx e = euler_zyx(t_gt.rotation.transpose() * t_est.rotation);
  out.euler_offsets = {wrap_degrees(rad2deg(e.roll)), wrap_degrees(rad2deg(e.pitch)),
                       wrap_degrees(rad2deg(e.yaw))};
  out.gimbal_lock = e.gimbal_lock;
  return out;
}

RigidTransform look_at(const Vec3& eye, const Vec3& target, const Vec3& down) {
  const Vec3 z = (target - eye).normalized();
  Vec3 y = down - down.dot(z) * z;
  if (y.norm() < 1e-9) {
    throw Error(ErrorKind::InvalidArgument, "look_at: down hint parallel to the view axis");
  }
  y.normalize();
  const Vec3 x = y.cross(z);
  Mat3 r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return {r, eye};
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

}  // namespace uscal

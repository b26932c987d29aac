#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "adalio/error.hpp"

namespace adalio {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline bool all_finite(const Vec3& v) { return v.allFinite(); }

/// Timestamped LiDAR return in the sensor frame. Coordinates are always finite.
class Point3 {
 public:
  Point3() = default;
  Point3(double x, double y, double z, double intensity = 0.0, double time_offset = 0.0)
      : xyz_(x, y, z), intensity_(intensity), time_offset_(time_offset) {
    if (!xyz_.allFinite() || !std::isfinite(intensity) || !std::isfinite(time_offset)) {
      throw Error(ErrorCode::kInput, "non-finite point component");
    }
  }
  explicit Point3(const Vec3& p, double intensity = 0.0, double time_offset = 0.0)
      : Point3(p.x(), p.y(), p.z(), intensity, time_offset) {}

  double x() const { return xyz_.x(); }
  double y() const { return xyz_.y(); }
  double z() const { return xyz_.z(); }
  double intensity() const { return intensity_; }
  double time_offset() const { return time_offset_; }
  const Vec3& position() const { return xyz_; }

  Point3 with_position(const Vec3& p) const { return Point3(p, intensity_, time_offset_); }
  Point3 with_time_offset(double t) const { return Point3(xyz_, intensity_, t); }

  bool operator==(const Point3& o) const {
    return xyz_ == o.xyz_ && intensity_ == o.intensity_ && time_offset_ == o.time_offset_;
  }

 private:
  Vec3 xyz_ = Vec3::Zero();
  double intensity_ = 0.0;
  double time_offset_ = 0.0;
};

struct LidarScan {
  std::vector<Point3> points;
  double t_start = 0.0;
  double t_end = 0.0;

  double duration() const { return t_end - t_start; }

  void validate() const {
    if (!(t_end > t_start)) throw Error(ErrorCode::kInput, "scan t_end must exceed t_start");
    const double dur = duration();
    for (const auto& p : points) {
      if (p.time_offset() < 0.0 || p.time_offset() > dur + 1e-9) {
        throw Error(ErrorCode::kInput, "point time_offset outside scan window");
      }
    }
  }
};

struct ImuSample {
  double t = 0.0;
  Vec3 gyro = Vec3::Zero();
  Vec3 accel = Vec3::Zero();

  bool finite() const { return std::isfinite(t) && gyro.allFinite() && accel.allFinite(); }
};

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

/// Unit quaternion rotation; the matrix form is computed on demand.
class Rotation {
 public:
  Rotation() = default;
  explicit Rotation(const Eigen::Quaterniond& q) : q_(q.normalized()) {}
  explicit Rotation(const Mat3& m) : q_(Eigen::Quaterniond(m).normalized()) {}

  static Rotation identity() { return Rotation(); }

  const Eigen::Quaterniond& quaternion() const { return q_; }
  Mat3 matrix() const { return q_.toRotationMatrix(); }
  Rotation inverse() const { return Rotation(q_.conjugate()); }
  Vec3 operator*(const Vec3& v) const { return q_ * v; }
  Rotation operator*(const Rotation& o) const { return Rotation(q_ * o.q_); }

  /// Same quaternion up to sign, within tol.
  bool is_approx(const Rotation& o, double tol = 1e-9) const {
    return std::abs(std::abs(q_.dot(o.q_)) - 1.0) <= tol;
  }

 private:
  Eigen::Quaterniond q_ = Eigen::Quaterniond::Identity();
};

inline constexpr double kSmallAngle = 1e-8;

inline Rotation so3_exp(const Vec3& omega) {
  const double theta = omega.norm();
  Eigen::Quaterniond q;
  if (theta < kSmallAngle) {
    const double t2 = theta * theta;
    q.w() = 1.0 - t2 / 8.0;
    q.vec() = omega * (0.5 - t2 / 48.0);
  } else {
    q.w() = std::cos(0.5 * theta);
    q.vec() = omega * (std::sin(0.5 * theta) / theta);
  }
  return Rotation(q);
}

/// Principal-branch logarithm, |result| <= pi.
inline Vec3 so3_log(const Rotation& r) {
  Eigen::Quaterniond q = r.quaternion();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const double vn = q.vec().norm();
  if (vn < kSmallAngle) {
    const double w = q.w();
    return q.vec() * (2.0 / w) * (1.0 - vn * vn / (3.0 * w * w));
  }
  const double theta = 2.0 * std::atan2(vn, q.w());
  return q.vec() * (theta / vn);
}

inline Rotation slerp(const Rotation& a, const Rotation& b, double s) {
  const Vec3 delta = so3_log(a.inverse() * b);
  return a * so3_exp(delta * s);
}

struct Pose {
  Rotation rotation;
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }

  Vec3 operator*(const Vec3& p) const { return rotation * p + translation; }
  Pose operator*(const Pose& o) const { return {rotation * o.rotation, rotation * o.translation + translation}; }
  Pose inverse() const {
    const Rotation ri = rotation.inverse();
    return {ri, -(ri * translation)};
  }
};

inline Point3 transform_point(const Pose& pose, const Point3& p) {
  return p.with_position(pose * p.position());
}

/// Linear on translation, spherical-linear on rotation; s in [0, 1].
inline Pose interpolate(const Pose& a, const Pose& b, double s) {
  return {slerp(a.rotation, b.rotation, s), a.translation + s * (b.translation - a.translation)};
}

}  // namespace adalio

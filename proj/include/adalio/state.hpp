#pragma once

#include <Eigen/Core>

#include "adalio/geometry.hpp"

namespace adalio {

inline constexpr int kStateDim = 18;

// Error-state block offsets: [dtheta, dp, dv, dbg, dba, dg].
inline constexpr int kRot = 0;
inline constexpr int kPos = 3;
inline constexpr int kVel = 6;
inline constexpr int kBg = 9;
inline constexpr int kBa = 12;
inline constexpr int kGrav = 15;

using ErrorVec = Eigen::Matrix<double, kStateDim, 1>;
using ErrorCov = Eigen::Matrix<double, kStateDim, kStateDim>;
using JacobianRow = Eigen::Matrix<double, 1, kStateDim>;

/// Filter state. Rotation maps body to world; rotation errors are applied on
/// the right, R = R_nominal * Exp(dtheta).
struct NavState {
  Rotation rotation;
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 bias_gyro = Vec3::Zero();
  Vec3 bias_accel = Vec3::Zero();
  Vec3 gravity{0.0, 0.0, -9.81};
  double t = 0.0;

  Pose pose() const { return {rotation, position}; }

  NavState boxplus(const ErrorVec& dx) const {
    NavState out = *this;
    out.rotation = rotation * so3_exp(dx.segment<3>(kRot));
    out.position += dx.segment<3>(kPos);
    out.velocity += dx.segment<3>(kVel);
    out.bias_gyro += dx.segment<3>(kBg);
    out.bias_accel += dx.segment<3>(kBa);
    out.gravity += dx.segment<3>(kGrav);
    return out;
  }

  /// this boxminus other, i.e. the dx with other.boxplus(dx) == this.
  ErrorVec boxminus(const NavState& other) const {
    ErrorVec dx;
    dx.segment<3>(kRot) = so3_log(other.rotation.inverse() * rotation);
    dx.segment<3>(kPos) = position - other.position;
    dx.segment<3>(kVel) = velocity - other.velocity;
    dx.segment<3>(kBg) = bias_gyro - other.bias_gyro;
    dx.segment<3>(kBa) = bias_accel - other.bias_accel;
    dx.segment<3>(kGrav) = gravity - other.gravity;
    return dx;
  }

  bool finite() const {
    return rotation.quaternion().coeffs().allFinite() && position.allFinite() && velocity.allFinite() &&
           bias_gyro.allFinite() && bias_accel.allFinite() && gravity.allFinite();
  }
};

inline void symmetrize(ErrorCov& cov) { cov = 0.5 * (cov + cov.transpose()).eval(); }

}  // namespace adalio

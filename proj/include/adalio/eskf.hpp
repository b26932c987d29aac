#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "adalio/degeneracy.hpp"
#include "adalio/geometry.hpp"
#include "adalio/plane.hpp"
#include "adalio/state.hpp"
#include "adalio/voxel_map.hpp"

namespace adalio {

/// Continuous-time IMU noise densities and bias random walks (SI units).
struct NoiseParams {
  double gyro_noise = 1e-3;        // rad/s/sqrt(Hz)
  double accel_noise = 1e-2;       // m/s^2/sqrt(Hz)
  double gyro_bias_walk = 1e-5;    // rad/s^2/sqrt(Hz)
  double accel_bias_walk = 1e-4;   // m/s^3/sqrt(Hz)

  void validate() const {
    if (!(gyro_noise > 0.0) || !(accel_noise > 0.0) || !(gyro_bias_walk > 0.0) || !(accel_bias_walk > 0.0)) {
      throw Error(ErrorCode::kConfig, "IMU noise parameters must be strictly positive");
    }
  }
};

inline constexpr double kMaxPropagationStep = 0.1;

/// One Euler step of the nominal kinematics plus F P F^T + Q on the error state.
inline std::pair<NavState, ErrorCov> forward_propagate(const NavState& state, const ErrorCov& cov,
                                                       const ImuSample& imu, double dt,
                                                       const NoiseParams& noise) {
  if (!(dt > 0.0) || dt > kMaxPropagationStep) {
    throw Error(ErrorCode::kPropagationGap, "propagation step " + std::to_string(dt) + " s outside (0, 0.1]");
  }
  if (!imu.finite()) throw Error(ErrorCode::kInput, "non-finite IMU sample");

  const Vec3 omega = imu.gyro - state.bias_gyro;
  const Vec3 acc_body = imu.accel - state.bias_accel;
  const Mat3 R = state.rotation.matrix();
  const Vec3 acc_world = R * acc_body + state.gravity;

  NavState next = state;
  next.rotation = state.rotation * so3_exp(omega * dt);
  next.position = state.position + state.velocity * dt + 0.5 * acc_world * dt * dt;
  next.velocity = state.velocity + acc_world * dt;
  next.t = state.t + dt;

  const Mat3 I = Mat3::Identity();
  const Mat3 R_skew_a = R * skew(acc_body);
  ErrorCov F = ErrorCov::Identity();
  F.block<3, 3>(kRot, kRot) = so3_exp(-omega * dt).matrix();
  F.block<3, 3>(kRot, kBg) = -I * dt;
  F.block<3, 3>(kPos, kRot) = -0.5 * R_skew_a * dt * dt;
  F.block<3, 3>(kPos, kVel) = I * dt;
  F.block<3, 3>(kPos, kBa) = -0.5 * R * dt * dt;
  F.block<3, 3>(kPos, kGrav) = 0.5 * I * dt * dt;
  F.block<3, 3>(kVel, kRot) = -R_skew_a * dt;
  F.block<3, 3>(kVel, kBa) = -R * dt;
  F.block<3, 3>(kVel, kGrav) = I * dt;

  ErrorCov Q = ErrorCov::Zero();
  Q.block<3, 3>(kRot, kRot) = I * (noise.gyro_noise * noise.gyro_noise * dt);
  Q.block<3, 3>(kVel, kVel) = I * (noise.accel_noise * noise.accel_noise * dt);
  Q.block<3, 3>(kBg, kBg) = I * (noise.gyro_bias_walk * noise.gyro_bias_walk * dt);
  Q.block<3, 3>(kBa, kBa) = I * (noise.accel_bias_walk * noise.accel_bias_walk * dt);

  ErrorCov next_cov = F * cov * F.transpose() + Q;
  symmetrize(next_cov);
  return {next, next_cov};
}

struct PoseStamp {
  double t = 0.0;
  Pose pose;
};

struct Propagation {
  NavState state;
  ErrorCov cov;
  std::vector<PoseStamp> history;  // starts at the input state's time, ends at t_end
  ImuSample last_sample;           // most recent sample consumed, seeds the next call
};

/// Integrates from state.t to t_end. Each interval between consecutive samples
/// uses their average; the tail after the last sample holds that sample.
inline Propagation propagate_to(const NavState& state, const ErrorCov& cov, const ImuSample& previous,
                                std::span<const ImuSample> samples, double t_end, const NoiseParams& noise) {
  constexpr double kTimeEps = 1e-12;
  Propagation out{state, cov, {}, previous};
  out.history.push_back({state.t, state.pose()});
  ImuSample prev = previous;
  for (const auto& s : samples) {
    if (!s.finite()) throw Error(ErrorCode::kInput, "non-finite IMU sample");
    if (s.t > t_end + kTimeEps) break;
    const double dt = s.t - out.state.t;
    if (dt <= kTimeEps) {
      prev = s;
      continue;
    }
    ImuSample mid;
    mid.t = s.t;
    mid.gyro = 0.5 * (prev.gyro + s.gyro);
    // Express the mean specific force at the mid-step attitude so the
    // start-attitude Euler step below stays second-order accurate.
    const Vec3 half_turn = 0.5 * dt * (mid.gyro - out.state.bias_gyro);
    const Vec3 mean_accel = 0.5 * (prev.accel + s.accel) - out.state.bias_accel;
    mid.accel = so3_exp(half_turn) * mean_accel + out.state.bias_accel;
    std::tie(out.state, out.cov) = forward_propagate(out.state, out.cov, mid, dt, noise);
    out.state.t = s.t;
    out.history.push_back({out.state.t, out.state.pose()});
    prev = s;
  }
  const double tail = t_end - out.state.t;
  if (tail > kTimeEps) {
    std::tie(out.state, out.cov) = forward_propagate(out.state, out.cov, prev, tail, noise);
    out.history.push_back({t_end, out.state.pose()});
  }
  out.state.t = t_end;
  out.last_sample = prev;
  return out;
}

inline Pose interpolate_history(std::span<const PoseStamp> history, double t) {
  constexpr double kTol = 1e-9;
  if (history.empty() || t < history.front().t - kTol || t > history.back().t + kTol) {
    throw Error(ErrorCode::kUndistortCoverage, "time " + std::to_string(t) + " outside pose history");
  }
  auto it = std::upper_bound(history.begin(), history.end(), t,
                             [](double v, const PoseStamp& s) { return v < s.t; });
  if (it == history.begin()) return history.front().pose;
  if (it == history.end()) return history.back().pose;
  const PoseStamp& b = *it;
  const PoseStamp& a = *(it - 1);
  const double s = (t - a.t) / (b.t - a.t);
  return interpolate(a.pose, b.pose, s);
}

/// Re-expresses every point in the body frame at scan end using the
/// interpolated pose at its own timestamp.
inline LidarScan undistort_scan(const LidarScan& scan, const Pose& pose_at_end,
                                std::span<const PoseStamp> pose_history) {
  for (std::size_t i = 1; i < pose_history.size(); ++i) {
    if (!(pose_history[i].t > pose_history[i - 1].t)) {
      throw Error(ErrorCode::kNonMonotone, "pose history timestamps must strictly increase");
    }
  }
  const Pose end_inv = pose_at_end.inverse();
  const double dur = scan.duration();
  LidarScan out{{}, scan.t_start, scan.t_end};
  out.points.reserve(scan.points.size());
  for (const auto& p : scan.points) {
    const Pose T = interpolate_history(pose_history, scan.t_start + p.time_offset());
    out.points.emplace_back(end_inv * (T * p.position()), p.intensity(), dur);
  }
  return out;
}

struct UpdateConfig {
  double lidar_noise = 0.02;   // meters, per residual
  std::size_t max_iters = 4;
  double converge_eps = 1e-4;  // norm of the pose correction [dtheta, dp]
  std::size_t knn_k = 5;
  std::size_t min_correspondences = 10;
};

struct UpdateStats {
  bool bootstrap = false;
  bool degenerate_warning = false;
  bool converged = false;
  std::size_t iterations = 0;
  std::vector<std::size_t> correspondences;  // per iteration
  std::vector<double> correction_norms;      // per iteration
  double residual_rms = 0.0;

  std::size_t final_correspondences() const { return correspondences.empty() ? 0 : correspondences.back(); }
};

/// Scan points (body frame) matched to valid map planes at `state`.
inline std::vector<Correspondence> find_correspondences(const NavState& state, std::span<const Point3> scan_body,
                                                        const VoxelMap& map, const ParamProfile& profile,
                                                        std::size_t k) {
  std::vector<Correspondence> out;
  const Pose T = state.pose();
  std::vector<Vec3> nbr;
  nbr.reserve(k);
  for (const auto& p : scan_body) {
    const Vec3 w = T * p.position();
    const auto found = map.knn_search(w, k, profile.search_radius);
    if (found.size() < k || found.size() < 3) continue;
    nbr.clear();
    for (const auto& n : found) nbr.push_back(n.point.position());
    const PlaneFit plane = fit_plane(std::span<const Vec3>(nbr), profile.residual_margin);
    if (!plane.valid) continue;
    out.push_back({p, p.with_position(w), plane});
  }
  return out;
}

struct StackedMeasurement {
  Eigen::VectorXd residuals;
  Eigen::Matrix<double, Eigen::Dynamic, kStateDim> H;
};

inline StackedMeasurement stack_measurements(std::span<const Correspondence> corr, const NavState& state) {
  StackedMeasurement m;
  m.residuals.resize(static_cast<Eigen::Index>(corr.size()));
  m.H.resize(static_cast<Eigen::Index>(corr.size()), kStateDim);
  for (std::size_t i = 0; i < corr.size(); ++i) {
    const auto rj = residual_jacobian(corr[i], state);
    m.residuals(static_cast<Eigen::Index>(i)) = rj.residual;
    m.H.row(static_cast<Eigen::Index>(i)) = rj.jacobian;
  }
  return m;
}

struct UpdateResult {
  NavState state;
  ErrorCov cov;
  UpdateStats stats;
};

/// Iterated ESKF update against the map. Each iteration re-associates the
/// scan, then solves for the correction relative to the current iterate while
/// keeping the prior (state, cov) fixed:
///   delta = -K r - (I - K H)(x_i boxminus x_prior),  K = (P^-1 + H^T H / s^2)^-1 H^T / s^2
/// The gain is evaluated as P (I + S P)^-1 so a singular prior block (frozen
/// gravity) stays well defined.
inline UpdateResult iterated_update(const NavState& state, const ErrorCov& cov, std::span<const Point3> scan_body,
                                    const VoxelMap& map, const ParamProfile& profile, const UpdateConfig& cfg) {
  if (scan_body.empty()) throw Error(ErrorCode::kInput, "iterated_update requires a non-empty scan");
  UpdateResult out{state, cov, {}};
  if (map.empty()) {
    out.stats.bootstrap = true;
    return out;
  }

  const double inv_var = 1.0 / (cfg.lidar_noise * cfg.lidar_noise);
  const ErrorCov I = ErrorCov::Identity();
  NavState x = state;
  ErrorCov last_S = ErrorCov::Zero();
  std::vector<Correspondence> corr;

  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    corr = find_correspondences(x, scan_body, map, profile, cfg.knn_k);
    out.stats.correspondences.push_back(corr.size());
    out.stats.iterations = it + 1;
    if (corr.empty()) break;

    const StackedMeasurement m = stack_measurements(corr, x);
    const ErrorCov S = m.H.transpose() * m.H * inv_var;
    const ErrorVec g = m.H.transpose() * m.residuals * inv_var;
    const ErrorVec dx = x.boxminus(state);
    const ErrorCov M = (I + S * cov).partialPivLu().inverse();
    const ErrorCov PM = cov * M;
    const ErrorVec delta = -PM * g - (I - PM * S) * dx;
    if (!delta.allFinite()) throw Error(ErrorCode::kNumericalFailure, "non-finite Kalman gain");

    x = x.boxplus(delta);
    last_S = S;
    const double norm = std::hypot(delta.segment<3>(kRot).norm(), delta.segment<3>(kPos).norm());
    out.stats.correction_norms.push_back(norm);
    if (norm < cfg.converge_eps) {
      out.stats.converged = true;
      break;
    }
  }

  if (!corr.empty()) {
    const ErrorCov PM = cov * (I + last_S * cov).partialPivLu().inverse();
    ErrorCov updated = (I - PM * last_S) * cov;
    symmetrize(updated);
    if (!updated.allFinite() || !x.finite()) throw Error(ErrorCode::kNumericalFailure, "non-finite update");
    out.cov = updated;
    double ss = 0.0;
    for (const auto& c : corr) {
      const double r = residual_jacobian(c, x).residual;
      ss += r * r;
    }
    out.stats.residual_rms = std::sqrt(ss / static_cast<double>(corr.size()));
  }
  out.state = x;
  out.stats.degenerate_warning = out.stats.final_correspondences() < cfg.min_correspondences;
  return out;
}

struct InitConfig {
  std::size_t min_count = 100;
  double accel_variance_threshold = 0.05;  // (m/s^2)^2, max over axes
  double gravity_magnitude = 9.81;
  bool estimate_gravity = true;
  // Prior standard deviations.
  double sigma_rot = 1e-3;
  double sigma_pos = 1e-3;
  double sigma_vel = 1e-2;
  double sigma_bias_gyro = 1e-3;
  double sigma_bias_accel = 3e-2;
  double sigma_gravity = 1e-2;
};

/// Level, motionless start at the origin: the mean specific force fixes
/// gravity, the mean angular rate the gyro bias.
inline std::pair<NavState, ErrorCov> initialize_from_rest(std::span<const ImuSample> samples, const InitConfig& cfg) {
  if (samples.size() < cfg.min_count || samples.empty()) {
    throw Error(ErrorCode::kInput, "need at least " + std::to_string(cfg.min_count) + " rest samples, got " +
                                       std::to_string(samples.size()));
  }
  Vec3 mean_g = Vec3::Zero();
  Vec3 mean_a = Vec3::Zero();
  for (const auto& s : samples) {
    if (!s.finite()) throw Error(ErrorCode::kInput, "non-finite IMU sample");
    mean_g += s.gyro;
    mean_a += s.accel;
  }
  const double n = static_cast<double>(samples.size());
  mean_g /= n;
  mean_a /= n;
  Vec3 var_a = Vec3::Zero();
  for (const auto& s : samples) var_a += (s.accel - mean_a).cwiseAbs2();
  var_a /= n;
  if (var_a.maxCoeff() > cfg.accel_variance_threshold) {
    throw Error(ErrorCode::kNotAtRest, "accelerometer variance " + std::to_string(var_a.maxCoeff()) +
                                           " exceeds threshold");
  }
  if (!(mean_a.norm() > 0.0)) throw Error(ErrorCode::kNotAtRest, "zero mean specific force");

  NavState s;
  s.gravity = -mean_a.normalized() * cfg.gravity_magnitude;
  s.bias_gyro = mean_g;
  s.bias_accel = mean_a + s.gravity;
  s.t = samples.back().t;

  ErrorVec var;
  var << Vec3::Constant(cfg.sigma_rot * cfg.sigma_rot), Vec3::Constant(cfg.sigma_pos * cfg.sigma_pos),
      Vec3::Constant(cfg.sigma_vel * cfg.sigma_vel), Vec3::Constant(cfg.sigma_bias_gyro * cfg.sigma_bias_gyro),
      Vec3::Constant(cfg.sigma_bias_accel * cfg.sigma_bias_accel),
      Vec3::Constant(cfg.estimate_gravity ? cfg.sigma_gravity * cfg.sigma_gravity : 0.0);
  ErrorCov cov = var.asDiagonal();
  return {s, cov};
}

}  // namespace adalio

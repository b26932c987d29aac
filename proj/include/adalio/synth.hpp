#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "adalio/eskf.hpp"
#include "adalio/geometry.hpp"

namespace adalio::synth {

inline constexpr double kGravity = 9.81;

struct Room {
  double width = 10.0;   // x extent
  double length = 10.0;  // y extent
  double height = 3.0;
};

struct Corridor {
  double width = 1.5;  // y extent
  double height = 2.5;
  double length = 30.0;  // along +x
};

struct SpiralStair {
  double radius = 2.0;       // outer wall
  double pitch = 3.0;        // rise per turn
  double turns = 2.0;
  double wall_offset = 0.3;  // radius of the central column
};

/// Scene surfaces in the scene's local frame:
///  Room:        box x in [-w/2, w/2], y in [-l/2, l/2], z in [0, h]; six faces.
///  Corridor:    x in [0, L], walls at y = +-width/2, floor z = 0, ceiling z = h; open ends.
///  SpiralStair: outer cylinder r = radius and central column r = wall_offset about the z axis,
///               height pitch*turns + 2.5, plus the helicoid ramp z = pitch * phi / 2pi between them.
struct SceneSpec {
  std::variant<Room, Corridor, SpiralStair> kind = Room{};
  double density = 100.0;  // points per m^2
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    bool ok = density > 0.0 && noise_sigma >= 0.0;
    std::visit(
        [&](const auto& k) {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, Room>) ok = ok && k.width > 0 && k.length > 0 && k.height > 0;
          if constexpr (std::is_same_v<T, Corridor>) ok = ok && k.width > 0 && k.length > 0 && k.height > 0;
          if constexpr (std::is_same_v<T, SpiralStair>)
            ok = ok && k.radius > 0 && k.pitch > 0 && k.turns > 0 && k.wall_offset > 0 && k.wall_offset < k.radius;
        },
        kind);
    if (!ok) throw Error(ErrorCode::kInput, "invalid scene specification");
  }
};

inline constexpr double kStairHeadroom = 2.5;

namespace detail {

struct Rect {
  Vec3 origin;
  Vec3 u;  // edge vectors
  Vec3 v;
};

inline std::size_t sample_count(double density, double area) {
  return static_cast<std::size_t>(std::llround(density * area));
}

inline void sample_rect(const Rect& r, double density, std::mt19937_64& rng, std::vector<Vec3>& out) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const std::size_t n = sample_count(density, r.u.cross(r.v).norm());
  for (std::size_t i = 0; i < n; ++i) {
    const double a = U(rng);
    const double b = U(rng);
    out.push_back(r.origin + a * r.u + b * r.v);
  }
}

inline void sample_cylinder(double radius, double height, double density, std::mt19937_64& rng,
                            std::vector<Vec3>& out) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const std::size_t n = sample_count(density, 2.0 * std::numbers::pi * radius * height);
  for (std::size_t i = 0; i < n; ++i) {
    const double phi = 2.0 * std::numbers::pi * U(rng);
    out.emplace_back(radius * std::cos(phi), radius * std::sin(phi), height * U(rng));
  }
}

// Helicoid (r cos phi, r sin phi, c phi) with c = pitch / 2pi; area element sqrt(r^2 + c^2) dr dphi.
inline void sample_helicoid(double r0, double r1, double pitch, double turns, double density,
                            std::mt19937_64& rng, std::vector<Vec3>& out) {
  const double c = pitch / (2.0 * std::numbers::pi);
  const double phimax = 2.0 * std::numbers::pi * turns;
  auto prim = [c](double r) {
    const double s = std::sqrt(r * r + c * c);
    return 0.5 * (r * s + c * c * std::log(r + s));
  };
  const double area = phimax * (prim(r1) - prim(r0));
  const std::size_t n = sample_count(density, area);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const double wmax = std::sqrt(r1 * r1 + c * c);
  std::size_t made = 0;
  while (made < n) {
    const double r = r0 + (r1 - r0) * U(rng);
    if (U(rng) * wmax > std::sqrt(r * r + c * c)) continue;
    const double phi = phimax * U(rng);
    out.emplace_back(r * std::cos(phi), r * std::sin(phi), c * phi);
    ++made;
  }
}

}  // namespace detail

/// Seeded surface samples of the scene in its local frame.
inline std::vector<Point3> generate_scene(const SceneSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::vector<Vec3> pts;
  std::visit(
      [&](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        using detail::Rect;
        if constexpr (std::is_same_v<T, Room>) {
          const double x0 = -0.5 * k.width, y0 = -0.5 * k.length;
          const Vec3 ex(k.width, 0, 0), ey(0, k.length, 0), ez(0, 0, k.height);
          const std::array<Rect, 6> faces{Rect{Vec3(x0, y0, 0), ex, ey},
                                          Rect{Vec3(x0, y0, k.height), ex, ey},
                                          Rect{Vec3(x0, y0, 0), ex, ez},
                                          Rect{Vec3(x0, -y0, 0), ex, ez},
                                          Rect{Vec3(x0, y0, 0), ey, ez},
                                          Rect{Vec3(-x0, y0, 0), ey, ez}};
          for (const auto& f : faces) detail::sample_rect(f, spec.density, rng, pts);
        } else if constexpr (std::is_same_v<T, Corridor>) {
          const double hw = 0.5 * k.width;
          const Vec3 ex(k.length, 0, 0), ey(0, k.width, 0), ez(0, 0, k.height);
          const std::array<Rect, 4> faces{Rect{Vec3(0, -hw, 0), ex, ey}, Rect{Vec3(0, -hw, k.height), ex, ey},
                                          Rect{Vec3(0, -hw, 0), ex, ez}, Rect{Vec3(0, hw, 0), ex, ez}};
          for (const auto& f : faces) detail::sample_rect(f, spec.density, rng, pts);
        } else {
          const double h = k.pitch * k.turns + kStairHeadroom;
          detail::sample_cylinder(k.radius, h, spec.density, rng, pts);
          detail::sample_cylinder(k.wall_offset, h, spec.density, rng, pts);
          detail::sample_helicoid(k.wall_offset, k.radius, k.pitch, k.turns, spec.density, rng, pts);
        }
      },
      spec.kind);

  std::vector<Point3> out;
  out.reserve(pts.size());
  std::normal_distribution<double> N(0.0, 1.0);
  for (const auto& p : pts) {
    Vec3 q = p;
    if (spec.noise_sigma > 0.0) q += spec.noise_sigma * Vec3(N(rng), N(rng), N(rng));
    out.emplace_back(q);
  }
  return out;
}

/// Axis-aligned box in world coordinates; points inside are removed when
/// composing scenes (doorways between rooms and corridors).
struct Cutout {
  Vec3 lo;
  Vec3 hi;
  bool contains(const Vec3& p) const { return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all(); }
};

struct ScenePart {
  SceneSpec spec;
  Pose placement;  // scene-local to world
};

inline std::vector<Point3> compose_scene(std::span<const ScenePart> parts, std::span<const Cutout> cutouts) {
  std::vector<Point3> out;
  for (const auto& part : parts) {
    for (const auto& p : generate_scene(part.spec)) {
      const Vec3 w = part.placement * p.position();
      if (std::any_of(cutouts.begin(), cutouts.end(), [&](const Cutout& c) { return c.contains(w); })) continue;
      out.emplace_back(w);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trajectories

/// Clamped cubic spline (zero end slopes) through (t_i, y_i); constant outside.
class CubicSpline {
 public:
  CubicSpline() = default;
  CubicSpline(std::vector<double> t, std::vector<double> y) : t_(std::move(t)), y_(std::move(y)) {
    const std::size_t n = t_.size();
    m_.assign(n, 0.0);
    if (n < 3) return;
    // Second derivatives M_i from the clamped tridiagonal system.
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    auto h = [&](std::size_t i) { return t_[i + 1] - t_[i]; };
    A(0, 0) = 2.0 * h(0);
    A(0, 1) = h(0);
    b(0) = 6.0 * ((y_[1] - y_[0]) / h(0));
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      A(r, r - 1) = h(i - 1);
      A(r, r) = 2.0 * (h(i - 1) + h(i));
      A(r, r + 1) = h(i);
      b(r) = 6.0 * ((y_[i + 1] - y_[i]) / h(i) - (y_[i] - y_[i - 1]) / h(i - 1));
    }
    const auto l = static_cast<Eigen::Index>(n - 1);
    A(l, l - 1) = h(n - 2);
    A(l, l) = 2.0 * h(n - 2);
    b(l) = -6.0 * ((y_[n - 1] - y_[n - 2]) / h(n - 2));
    const Eigen::VectorXd M = A.partialPivLu().solve(b);
    for (std::size_t i = 0; i < n; ++i) m_[i] = M(static_cast<Eigen::Index>(i));
  }

  /// Value and first two derivatives.
  std::array<double, 3> eval(double t) const {
    const std::size_t n = t_.size();
    if (n == 0) return {0.0, 0.0, 0.0};
    if (n == 1 || t <= t_.front()) return {y_.front(), 0.0, 0.0};
    if (t >= t_.back()) return {y_.back(), 0.0, 0.0};
    if (n == 2) {
      // Clamped cubic Hermite with zero end slopes.
      const double hh = t_[1] - t_[0];
      const double s = (t - t_[0]) / hh;
      const double dy = y_[1] - y_[0];
      return {y_[0] + dy * (3 * s * s - 2 * s * s * s), dy * (6 * s - 6 * s * s) / hh, dy * (6 - 12 * s) / (hh * hh)};
    }
    const auto it = std::upper_bound(t_.begin(), t_.end(), t);
    const std::size_t i = static_cast<std::size_t>(it - t_.begin()) - 1;
    const double hh = t_[i + 1] - t_[i];
    const double a = t_[i + 1] - t;
    const double b = t - t_[i];
    const double Mi = m_[i], Mj = m_[i + 1];
    const double v = Mi * a * a * a / (6 * hh) + Mj * b * b * b / (6 * hh) + (y_[i] / hh - Mi * hh / 6) * a +
                     (y_[i + 1] / hh - Mj * hh / 6) * b;
    const double d1 = -Mi * a * a / (2 * hh) + Mj * b * b / (2 * hh) - (y_[i] / hh - Mi * hh / 6) +
                      (y_[i + 1] / hh - Mj * hh / 6);
    const double d2 = Mi * a / hh + Mj * b / hh;
    return {v, d1, d2};
  }

 private:
  std::vector<double> t_, y_, m_;
};

inline Mat3 rotation_zyx(double yaw, double pitch, double roll) {
  return (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
          Eigen::AngleAxisd(roll, Vec3::UnitX()))
      .toRotationMatrix();
}

/// Smooth trajectory through timed waypoints. Position and unwrapped ZYX
/// Euler angles are splined independently; derivatives are analytic.
class SplineTrajectory {
 public:
  explicit SplineTrajectory(std::span<const PoseStamp> waypoints) {
    if (waypoints.size() < 2) throw Error(ErrorCode::kInput, "trajectory needs at least 2 waypoints");
    std::vector<double> t;
    std::array<std::vector<double>, 6> ch;
    double prev_yaw = 0.0, prev_roll = 0.0;
    for (std::size_t i = 0; i < waypoints.size(); ++i) {
      if (i > 0 && !(waypoints[i].t > waypoints[i - 1].t)) {
        throw Error(ErrorCode::kNonMonotone, "waypoints must be time-ordered");
      }
      t.push_back(waypoints[i].t);
      const Mat3 R = waypoints[i].pose.rotation.matrix();
      double yaw = std::atan2(R(1, 0), R(0, 0));
      const double pitch = -std::asin(std::clamp(R(2, 0), -1.0, 1.0));
      double roll = std::atan2(R(2, 1), R(2, 2));
      if (i > 0) {
        yaw = prev_yaw + std::remainder(yaw - prev_yaw, 2.0 * std::numbers::pi);
        roll = prev_roll + std::remainder(roll - prev_roll, 2.0 * std::numbers::pi);
      }
      prev_yaw = yaw;
      prev_roll = roll;
      const Vec3& p = waypoints[i].pose.translation;
      ch[0].push_back(p.x());
      ch[1].push_back(p.y());
      ch[2].push_back(p.z());
      ch[3].push_back(yaw);
      ch[4].push_back(pitch);
      ch[5].push_back(roll);
    }
    for (std::size_t c = 0; c < 6; ++c) splines_[c] = CubicSpline(t, ch[c]);
    t0_ = t.front();
    t1_ = t.back();
  }

  double t_begin() const { return t0_; }
  double t_end() const { return t1_; }

  Pose pose(double t) const {
    const auto e = eval_all(t);
    return {Rotation(rotation_zyx(e[3][0], e[4][0], e[5][0])), Vec3(e[0][0], e[1][0], e[2][0])};
  }
  Vec3 velocity(double t) const {
    const auto e = eval_all(t);
    return {e[0][1], e[1][1], e[2][1]};
  }
  Vec3 acceleration(double t) const {
    const auto e = eval_all(t);
    return {e[0][2], e[1][2], e[2][2]};
  }
  Vec3 angular_velocity_body(double t) const {
    const auto e = eval_all(t);
    const double th = e[4][0], ph = e[5][0];
    const double dyaw = e[3][1], dth = e[4][1], dph = e[5][1];
    return {dph - dyaw * std::sin(th), dth * std::cos(ph) + dyaw * std::cos(th) * std::sin(ph),
            -dth * std::sin(ph) + dyaw * std::cos(th) * std::cos(ph)};
  }

 private:
  std::array<std::array<double, 3>, 6> eval_all(double t) const {
    std::array<std::array<double, 3>, 6> out{};
    for (std::size_t c = 0; c < 6; ++c) out[c] = splines_[c].eval(t);
    return out;
  }

  std::array<CubicSpline, 6> splines_;
  double t0_ = 0.0, t1_ = 0.0;
};

struct ImuNoiseSpec {
  double gyro_noise = 0.0;   // rad/s/sqrt(Hz)
  double accel_noise = 0.0;  // m/s^2/sqrt(Hz)
  Vec3 gyro_bias = Vec3::Zero();
  Vec3 accel_bias = Vec3::Zero();
  std::uint64_t seed = 0;
};

struct TrajectorySpec {
  std::vector<PoseStamp> waypoints;
  double imu_rate = 200.0;
  double scan_rate = 10.0;
  double scan_duration = 0.1;
  ImuNoiseSpec imu;
  double t_start = 0.0;  // first IMU sample; poses before the first waypoint are held

  void validate() const {
    if (waypoints.size() < 2) throw Error(ErrorCode::kInput, "trajectory needs at least 2 waypoints");
    if (!(imu_rate > 0.0) || !(scan_rate > 0.0) || !(scan_duration > 0.0)) {
      throw Error(ErrorCode::kInput, "rates and scan duration must be positive");
    }
  }
};

/// Body-frame angular rate and specific force sampled on [t_start, last waypoint].
inline std::vector<ImuSample> simulate_imu(const TrajectorySpec& spec) {
  spec.validate();
  const SplineTrajectory traj(spec.waypoints);
  const Vec3 g(0.0, 0.0, -kGravity);
  std::mt19937_64 rng(spec.imu.seed);
  std::normal_distribution<double> N(0.0, 1.0);
  const double sg = spec.imu.gyro_noise * std::sqrt(spec.imu_rate);
  const double sa = spec.imu.accel_noise * std::sqrt(spec.imu_rate);
  const auto count = static_cast<std::size_t>(std::floor((traj.t_end() - spec.t_start) * spec.imu_rate + 1e-9)) + 1;
  std::vector<ImuSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double t = spec.t_start + static_cast<double>(i) / spec.imu_rate;
    const Pose T = traj.pose(t);
    ImuSample s;
    s.t = t;
    s.gyro = traj.angular_velocity_body(t) + spec.imu.gyro_bias;
    s.accel = T.rotation.inverse() * (traj.acceleration(t) - g) + spec.imu.accel_bias;
    if (sg > 0.0) s.gyro += sg * Vec3(N(rng), N(rng), N(rng));
    if (sa > 0.0) s.accel += sa * Vec3(N(rng), N(rng), N(rng));
    out.push_back(s);
  }
  return out;
}

struct ScanSimConfig {
  double max_range = 8.0;
  double min_range = 0.1;
  double noise_sigma = 0.0;    // isotropic, per point, meters
  double falloff_range = 0.0;  // > 0: keep probability min(1, (falloff/r)^2), emulating angular resolution
  std::uint64_t seed = 0;
};

/// Range-gated point selection from a moving sensor. Each point's emission
/// time follows its azimuth over the scan window, and it is expressed in the
/// body frame at that time, so the result carries motion distortion.
inline LidarScan simulate_scan(std::span<const Point3> scene, const std::function<Pose(double)>& pose_fn,
                               double t_start, double duration, const ScanSimConfig& cfg) {
  LidarScan scan{{}, t_start, t_start + duration};
  if (!(cfg.max_range > 0.0)) return scan;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::normal_distribution<double> N(0.0, 1.0);
  const Pose inv0 = pose_fn(t_start).inverse();
  const double gate = cfg.max_range + 2.0;  // slack for motion within the window

  struct Hit {
    double offset;
    Vec3 body;
  };
  std::vector<Hit> hits;
  for (const auto& sp : scene) {
    const Vec3 b0 = inv0 * sp.position();
    if (b0.squaredNorm() > gate * gate) continue;
    const double az = std::atan2(b0.y(), b0.x());
    const double offset = duration * (az + std::numbers::pi) / (2.0 * std::numbers::pi);
    const Vec3 b = pose_fn(t_start + offset).inverse() * sp.position();
    const double r = b.norm();
    if (r > cfg.max_range || r < cfg.min_range) continue;
    if (cfg.falloff_range > 0.0 && r > cfg.falloff_range) {
      const double keep = (cfg.falloff_range / r) * (cfg.falloff_range / r);
      if (U(rng) > keep) continue;
    }
    Vec3 noisy = b;
    if (cfg.noise_sigma > 0.0) noisy += cfg.noise_sigma * Vec3(N(rng), N(rng), N(rng));
    hits.push_back({offset, noisy});
  }
  std::stable_sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.offset < b.offset; });
  scan.points.reserve(hits.size());
  for (const auto& h : hits) scan.points.emplace_back(h.body, 0.0, h.offset);
  return scan;
}

}  // namespace adalio::synth

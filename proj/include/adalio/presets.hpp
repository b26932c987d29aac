#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "adalio/degeneracy.hpp"
#include "adalio/io.hpp"
#include "adalio/pipeline.hpp"
#include "adalio/scoring.hpp"
#include "adalio/synth.hpp"
#include "adalio/tum.hpp"
#include "adalio/voxel_map.hpp"

namespace adalio::synth {

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"room", "corridor", "room-corridor-room", "spiral-stair"};
  return names;
}

struct PresetOptions {
  std::size_t frames = 200;
  double rest_duration = 1.0;  // stationary IMU before the first scan
  double scan_noise = 0.01;
  double corridor_width = 1.2;  // room-corridor-room only
  double density = 100.0;
  ScanSimConfig scan{6.0, 0.1, 0.0, 1.0, 0};
  ImuNoiseSpec imu{2e-4, 2e-3, Vec3(2e-3, -1e-3, 1.5e-3), Vec3(0.02, -0.01, 0.015), 0};
  std::size_t marker_stride = 20;  // one marker per this many frames
  std::uint64_t seed = 1;
};

/// A complete synthetic sequence. Everything is expressed in the odometry
/// frame: the sensor pose at the first scan start is the identity.
struct Dataset {
  std::string preset;
  std::vector<Point3> scene;
  TrajectorySpec trajectory;
  std::vector<ImuSample> imu;
  std::vector<LidarScan> scans;
  std::vector<PoseStamp> ground_truth;  // pose at every scan end
  std::vector<MarkerPose> markers;
  ScanSimConfig scan_config;
};

namespace detail {

// Smooth 0 -> 1 ramp with zero slope and curvature at both ends.
inline double smootherstep(double s) {
  s = std::clamp(s, 0.0, 1.0);
  return s * s * s * (s * (6.0 * s - 15.0) + 10.0);
}

struct PathSample {
  Vec3 position;
  double yaw, pitch, roll;
};

template <typename PathFn>
std::vector<PoseStamp> sample_waypoints(double t0, double duration, PathFn&& path, double step = 0.25) {
  std::vector<PoseStamp> w;
  const auto n = static_cast<std::size_t>(std::llround(duration / step));
  for (std::size_t i = 0; i <= n; ++i) {
    const double tau = static_cast<double>(i) / static_cast<double>(n);
    const PathSample s = path(smootherstep(tau));
    w.push_back({t0 + tau * duration, Pose{Rotation(rotation_zyx(s.yaw, s.pitch, s.roll)), s.position}});
  }
  return w;
}

inline ScenePart part(const SceneSpec& spec, const Vec3& at) {
  return {spec, Pose{Rotation(), at}};
}

}  // namespace detail

/// Builds the scene and waypoints of a preset in its own coordinates.
inline std::pair<std::vector<Point3>, std::vector<PoseStamp>> preset_geometry(const std::string& name,
                                                                              const PresetOptions& opt) {
  using detail::PathSample;
  const double t0 = opt.rest_duration;
  const double duration = static_cast<double>(opt.frames) / 10.0;
  const double two_pi = 2.0 * std::numbers::pi;

  if (name == "room") {
    SceneSpec spec{Room{10.0, 10.0, 3.0}, opt.density, 0.0, opt.seed};
    auto path = [&](double s) {
      return PathSample{Vec3(2.5 * std::sin(two_pi * s), 2.0 * std::sin(2.0 * two_pi * s), 1.5 + 0.3 * std::sin(two_pi * s)),
                        0.8 * std::sin(two_pi * s), 0.1 * std::sin(3.0 * two_pi * s), 0.1 * std::sin(2.0 * two_pi * s)};
    };
    return {generate_scene(spec), detail::sample_waypoints(t0, duration, path)};
  }
  if (name == "corridor") {
    SceneSpec spec{Corridor{1.5, 2.5, 30.0}, opt.density, 0.0, opt.seed};
    auto path = [&](double s) {
      return PathSample{Vec3(3.0 + 24.0 * s, 0.15 * std::sin(2.0 * two_pi * s), 1.2 + 0.05 * std::sin(3.0 * two_pi * s)),
                        0.1 * std::sin(2.0 * two_pi * s), 0.03 * std::sin(3.0 * two_pi * s),
                        0.03 * std::sin(two_pi * s)};
    };
    return {generate_scene(spec), detail::sample_waypoints(t0, duration, path)};
  }
  if (name == "room-corridor-room") {
    const double room = 8.0, height = 3.0, corridor_len = 16.0, door_h = 2.5;
    const double hw = 0.5 * opt.corridor_width;
    const double x_b = room + corridor_len;  // centre of the second room
    const std::vector<ScenePart> parts{
        detail::part({Room{room, room, height}, opt.density, 0.0, opt.seed}, Vec3(0, 0, 0)),
        detail::part({Corridor{opt.corridor_width, door_h, corridor_len}, opt.density, 0.0, opt.seed + 1},
                     Vec3(0.5 * room, 0, 0)),
        detail::part({Room{room, room, height}, opt.density, 0.0, opt.seed + 2}, Vec3(x_b, 0, 0))};
    const double eps = 0.01;
    const std::vector<Cutout> doors{{Vec3(0.5 * room - eps, -hw + eps, -eps), Vec3(0.5 * room + eps, hw - eps, door_h - eps)},
                                    {Vec3(x_b - 0.5 * room - eps, -hw + eps, -eps),
                                     Vec3(x_b - 0.5 * room + eps, hw - eps, door_h - eps)}};
    auto path = [&](double s) {
      const double x = -2.0 + (x_b + 2.0 + 2.0) * s;
      return PathSample{Vec3(x, 0.1 * std::sin(2.0 * two_pi * s), 1.3 + 0.05 * std::sin(two_pi * s)),
                        0.15 * std::sin(2.0 * two_pi * s), 0.03 * std::sin(3.0 * two_pi * s),
                        0.03 * std::sin(2.0 * two_pi * s)};
    };
    return {compose_scene(parts, doors), detail::sample_waypoints(t0, duration, path)};
  }
  if (name == "spiral-stair") {
    const SpiralStair k{2.0, 3.0, 2.0, 0.3};
    SceneSpec spec{k, opt.density, 0.0, opt.seed};
    const double rise = 1.4;  // sensor height above the ramp
    auto path = [&](double s) {
      const double phi = 0.3 + two_pi * s;
      const double r = 1.15;
      return PathSample{Vec3(r * std::cos(phi), r * std::sin(phi), k.pitch * phi / two_pi + rise),
                        phi + 0.5 * std::numbers::pi, 0.05 * std::sin(2.0 * two_pi * s), 0.05 * std::sin(two_pi * s)};
    };
    return {generate_scene(spec), detail::sample_waypoints(t0, duration, path)};
  }
  throw Error(ErrorCode::kInput, "unknown trajectory preset '" + name + "'");
}

/// Moves scene and waypoints so that the first waypoint becomes the identity.
inline void anchor_at_start(std::vector<Point3>& scene, std::vector<PoseStamp>& waypoints) {
  const Pose inv = waypoints.front().pose.inverse();
  for (auto& p : scene) p = transform_point(inv, p);
  for (auto& w : waypoints) w.pose = inv * w.pose;
}

inline Dataset make_dataset(const std::string& name, const PresetOptions& opt = {}) {
  if (opt.frames == 0) throw Error(ErrorCode::kInput, "preset needs at least one frame");
  Dataset ds;
  ds.preset = name;
  auto [scene, waypoints] = preset_geometry(name, opt);
  anchor_at_start(scene, waypoints);
  ds.scene = std::move(scene);

  ds.trajectory.waypoints = std::move(waypoints);
  ds.trajectory.imu = opt.imu;
  ds.trajectory.imu.seed = opt.seed * 7919 + 17;
  ds.trajectory.t_start = 0.0;
  ds.imu = simulate_imu(ds.trajectory);

  const SplineTrajectory traj(ds.trajectory.waypoints);
  ds.scan_config = opt.scan;
  ds.scan_config.noise_sigma = opt.scan_noise;
  const auto pose_fn = [&traj](double t) { return traj.pose(t); };
  const double t0 = traj.t_begin();
  const double period = 1.0 / ds.trajectory.scan_rate;
  for (std::size_t k = 0; k < opt.frames; ++k) {
    const double ts = t0 + static_cast<double>(k) * period;
    ScanSimConfig cfg = ds.scan_config;
    cfg.seed = opt.seed * 1000003 + k;
    ds.scans.push_back(simulate_scan(ds.scene, pose_fn, ts, ds.trajectory.scan_duration, cfg));
    ds.ground_truth.push_back({ds.scans.back().t_end, traj.pose(ds.scans.back().t_end)});
  }
  for (std::size_t k = 0; k < ds.ground_truth.size(); k += std::max<std::size_t>(opt.marker_stride, 1)) {
    ds.markers.push_back({static_cast<int>(ds.markers.size()), ds.ground_truth[k].pose.translation});
  }
  return ds;
}

/// Raw detector verdict per frame on the dataset's own scans, motion
/// compensated with the true trajectory: what an ideal front end would see.
inline std::vector<Mode> geometric_verdicts(const Dataset& ds, const DetectorConfig& det, double voxel_size) {
  const SplineTrajectory traj(ds.trajectory.waypoints);
  std::vector<Mode> out;
  out.reserve(ds.scans.size());
  std::vector<Point3> body;
  for (const auto& scan : ds.scans) {
    const Pose end_inv = traj.pose(scan.t_end).inverse();
    body.clear();
    for (const auto& p : scan.points) {
      body.push_back(p.with_position(end_inv * (traj.pose(scan.t_start + p.time_offset()) * p.position())));
    }
    const auto ds_pts = voxel_downsample(body, voxel_size);
    out.push_back(detect_degeneracy(ds_pts, det, DegeneracyReport{}).raw_decision);
  }
  return out;
}

/// Default odometry configuration for a synthetic dataset: registration
/// stays one meter inside the simulated sensor reach.
inline OdometryConfig dataset_config(const Dataset& ds) {
  OdometryConfig cfg;
  cfg.registration_range = std::max(ds.scan_config.max_range - 1.0, 0.5 * ds.scan_config.max_range);
  return cfg;
}

/// Writes scans/NNNNNN.bin, imu.csv, gt.tum, markers.csv and config.txt.
inline void write_dataset(const std::string& dir, const Dataset& ds, const OdometryConfig& config) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "scans");
  char name[32];
  for (std::size_t k = 0; k < ds.scans.size(); ++k) {
    std::snprintf(name, sizeof(name), "%06zu.bin", k);
    write_scan_file((fs::path(dir) / "scans" / name).string(), ds.scans[k]);
  }
  write_imu_file((fs::path(dir) / "imu.csv").string(), ds.imu);
  write_trajectory_tum((fs::path(dir) / "gt.tum").string(), ds.ground_truth);
  write_markers_file((fs::path(dir) / "markers.csv").string(), ds.markers);
  save_config((fs::path(dir) / "config.txt").string(), config);
}

}  // namespace adalio::synth

#pragma once

#include <algorithm>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "adalio/degeneracy.hpp"
#include "adalio/eskf.hpp"
#include "adalio/geometry.hpp"
#include "adalio/tum.hpp"
#include "adalio/voxel_map.hpp"

namespace adalio {

struct OdometryConfig {
  ProfilePair profiles;
  DetectorConfig detector;
  NoiseParams noise;
  UpdateConfig update;
  InitConfig init;
  Pose extrinsic;  // LiDAR frame to IMU body frame
  VoxelMapConfig map;
  // > 0: only points closer than this to the sensor are matched against the
  // map (all points are still inserted), keeping queries away from the
  // not-yet-mapped edge of the sensor's reach.
  double registration_range = 0.0;
  bool adaptive_enabled = true;

  void validate() const {
    validate_profiles(profiles);
    detector.validate();
    noise.validate();
    if (!(registration_range >= 0.0)) throw Error(ErrorCode::kConfig, "registration_range must be >= 0");
    if (!(update.lidar_noise > 0.0) || update.max_iters == 0 || !(update.converge_eps > 0.0) || update.knn_k < 3) {
      throw Error(ErrorCode::kConfig, "invalid update parameters");
    }
    if (init.min_count == 0 || !(init.accel_variance_threshold > 0.0) || !(init.gravity_magnitude > 0.0)) {
      throw Error(ErrorCode::kConfig, "invalid initialization parameters");
    }
    if (!(map.cell_size > 0.0) || map.capacity_per_cell == 0 || map.max_cells == 0) {
      throw Error(ErrorCode::kConfig, "invalid map parameters");
    }
  }
};

struct FrameFlags {
  bool bootstrap = false;
  bool degenerate_warning = false;
  bool numerical_failure = false;
  bool empty_scan = false;
};

struct FrameResult {
  std::size_t frame = 0;
  double t = 0.0;
  Pose pose;
  DegeneracyReport report;
  Mode mode = Mode::kGeneral;          // profile actually applied
  std::size_t registration_count = 0;  // points in the cloud used for the update
  UpdateStats stats;
  FrameFlags flags;
};

/// One odometry sequence. Frames must be fed in time order after
/// initialize(); the engine is not shareable across threads mid-sequence.
class OdometryEngine {
 public:
  explicit OdometryEngine(OdometryConfig cfg) : cfg_(std::move(cfg)), map_(cfg_.map) { cfg_.validate(); }

  void initialize(std::span<const ImuSample> rest) {
    std::tie(state_, cov_) = initialize_from_rest(rest, cfg_.init);
    last_imu_ = rest.back();
    history_.clear();
    initialized_ = true;
  }

  bool initialized() const { return initialized_; }
  const NavState& state() const { return state_; }
  const ErrorCov& covariance() const { return cov_; }
  const VoxelMap& map() const { return map_; }
  const OdometryConfig& config() const { return cfg_; }

  FrameResult process_frame(const LidarScan& scan, std::span<const ImuSample> imu_since_last) {
    if (!initialized_) throw Error(ErrorCode::kInput, "engine not initialized");
    scan.validate();
    if (!(scan.t_end > state_.t)) throw Error(ErrorCode::kNonMonotone, "scan ends before the filter time");

    // (1) forward propagation to the scan end
    Propagation prop = propagate_to(state_, cov_, last_imu_, imu_since_last, scan.t_end, cfg_.noise);
    append_history(prop.history);

    // (2) motion compensation into the body frame at t_end
    LidarScan body{{}, scan.t_start, scan.t_end};
    body.points.reserve(scan.points.size());
    for (const auto& p : scan.points) body.points.push_back(transform_point(cfg_.extrinsic, p));
    const LidarScan undistorted = undistort_scan(body, prop.state.pose(), history_);

    // (3) detection on the general-size cloud, (4) parameter selection
    FrameResult res;
    res.frame = frame_index_;
    res.t = scan.t_end;
    std::vector<Point3> general_cloud = voxel_downsample(undistorted.points, cfg_.profiles.general.voxel_size);
    res.report = detect_degeneracy(general_cloud, cfg_.detector, report_);
    const ParamProfile profile = cfg_.adaptive_enabled ? select_params(res.report, cfg_.profiles) : cfg_.profiles.general;
    res.mode = profile.mode;
    std::vector<Point3> cloud = profile.mode == Mode::kDegenerate
                                    ? voxel_downsample(undistorted.points, profile.voxel_size)
                                    : std::move(general_cloud);
    res.registration_count = cloud.size();
    std::vector<Point3> query;
    if (cfg_.registration_range > 0.0) {
      const double r2 = cfg_.registration_range * cfg_.registration_range;
      for (const auto& p : cloud)
        if (p.position().squaredNorm() < r2) query.push_back(p);
    } else {
      query = cloud;
    }

    // (5) registration
    NavState next = prop.state;
    ErrorCov next_cov = prop.cov;
    if (query.empty()) {
      res.flags.empty_scan = true;
    } else {
      try {
        UpdateResult up = iterated_update(prop.state, prop.cov, query, map_, profile, cfg_.update);
        next = up.state;
        next_cov = up.cov;
        res.stats = std::move(up.stats);
        res.flags.bootstrap = res.stats.bootstrap;
        res.flags.degenerate_warning = !res.stats.bootstrap && res.stats.degenerate_warning;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kNumericalFailure) throw;
        res.flags.numerical_failure = true;
      }
    }

    // (6) map update with the registered cloud
    if (!res.flags.numerical_failure && !cloud.empty()) {
      const Pose T = next.pose();
      for (auto& p : cloud) p = transform_point(T, p);
      map_.insert_scan(cloud);
    }

    state_ = next;
    state_.t = scan.t_end;
    cov_ = next_cov;
    last_imu_ = prop.last_sample;
    report_ = res.report;
    ++frame_index_;
    res.pose = state_.pose();
    return res;
  }

 private:
  void append_history(const std::vector<PoseStamp>& h) {
    for (const auto& s : h) {
      if (!history_.empty() && s.t <= history_.back().t) continue;
      history_.push_back(s);
    }
    // Keep about one second for scans that start before the previous scan end.
    const double keep_from = history_.back().t - 1.0;
    auto first = std::find_if(history_.begin(), history_.end(), [&](const PoseStamp& s) { return s.t >= keep_from; });
    if (first != history_.begin()) history_.erase(history_.begin(), first - 1);
  }

  OdometryConfig cfg_;
  VoxelMap map_;
  NavState state_;
  ErrorCov cov_ = ErrorCov::Zero();
  ImuSample last_imu_;
  std::vector<PoseStamp> history_;
  DegeneracyReport report_;
  std::size_t frame_index_ = 0;
  bool initialized_ = false;
};

struct Sinks {
  std::ostream* trajectory = nullptr;  // TUM lines
  std::ostream* frame_log = nullptr;   // per-frame CSV
  std::function<void(const FrameResult&)> on_frame;
};

inline void write_frame_log_header(std::ostream& os) {
  os << "frame,t,tx,ty,tz,qx,qy,qz,qw,mode,detector_count,near_origin_fraction,detector_decision,"
        "downsampled_count,correspondence_count,residual_rms,iterations,flags\n";
}

inline std::string frame_flags_string(const FrameFlags& f) {
  std::string s;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!s.empty()) s += '|';
    s += name;
  };
  add(f.bootstrap, "bootstrap");
  add(f.degenerate_warning, "degenerate_warning");
  add(f.numerical_failure, "numerical_failure");
  add(f.empty_scan, "empty_scan");
  return s.empty() ? "-" : s;
}

inline void write_frame_log_row(std::ostream& os, const FrameResult& r) {
  const auto& q = r.pose.rotation.quaternion();
  const Vec3& p = r.pose.translation;
  os << r.frame << ',' << format_fixed9(r.t) << ',' << format_value(p.x()) << ',' << format_value(p.y()) << ','
     << format_value(p.z()) << ',' << format_value(q.x()) << ',' << format_value(q.y()) << ','
     << format_value(q.z()) << ',' << format_value(q.w()) << ',' << to_string(r.mode) << ','
     << r.report.downsampled_count << ',' << format_value(r.report.near_origin_fraction) << ','
     << to_string(r.report.decision) << ',' << r.registration_count << ',' << r.stats.final_correspondences()
     << ',' << format_value(r.stats.residual_rms) << ',' << r.stats.iterations << ','
     << frame_flags_string(r.flags) << '\n';
}

/// Initializes from IMU samples up to the first scan start, then processes
/// every scan with the IMU samples in (previous scan end, scan end].
inline std::vector<FrameResult> run_sequence(const OdometryConfig& config, std::span<const LidarScan> scans,
                                             std::span<const ImuSample> imu, const Sinks& sinks = {}) {
  for (std::size_t i = 1; i < imu.size(); ++i) {
    if (!(imu[i].t > imu[i - 1].t)) throw Error(ErrorCode::kNonMonotone, "IMU stream not time-ordered");
  }
  for (std::size_t i = 1; i < scans.size(); ++i) {
    if (!(scans[i].t_end > scans[i - 1].t_end)) throw Error(ErrorCode::kNonMonotone, "scan stream not time-ordered");
  }
  if (sinks.frame_log) write_frame_log_header(*sinks.frame_log);
  std::vector<FrameResult> results;
  if (scans.empty()) return results;

  OdometryEngine engine(config);
  auto rest_end = std::upper_bound(imu.begin(), imu.end(), scans.front().t_start,
                                   [](double t, const ImuSample& s) { return t < s.t; });
  engine.initialize(std::span<const ImuSample>(imu.begin(), rest_end));

  auto cursor = rest_end;
  std::vector<ImuSample> window;
  for (const auto& scan : scans) {
    auto window_end = std::upper_bound(cursor, imu.end(), scan.t_end,
                                       [](double t, const ImuSample& s) { return t < s.t; });
    window.assign(cursor, window_end);
    // Close the window with a sample interpolated at the scan end when the
    // stream continues past it.
    if (window_end != imu.end() && window_end != imu.begin() && (window.empty() || window.back().t < scan.t_end)) {
      const ImuSample& a = *(window_end - 1);
      const ImuSample& b = *window_end;
      const double s = (scan.t_end - a.t) / (b.t - a.t);
      window.push_back({scan.t_end, a.gyro + s * (b.gyro - a.gyro), a.accel + s * (b.accel - a.accel)});
    }
    FrameResult r = engine.process_frame(scan, window);
    cursor = window_end;
    if (sinks.trajectory) write_tum_line(*sinks.trajectory, r.t, r.pose);
    if (sinks.frame_log) write_frame_log_row(*sinks.frame_log, r);
    if (sinks.on_frame) sinks.on_frame(r);
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace adalio

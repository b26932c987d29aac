#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>

#include "adalio/geometry.hpp"

namespace adalio {

enum class Mode { kGeneral, kDegenerate };

inline std::string_view to_string(Mode m) { return m == Mode::kGeneral ? "General" : "Degenerate"; }

/// Voxelization and correspondence parameters for one environment class.
struct ParamProfile {
  double voxel_size = 0.2;
  double search_radius = 3.0;
  double residual_margin = 0.05;
  Mode mode = Mode::kGeneral;

  static constexpr ParamProfile general() { return {0.2, 3.0, 0.05, Mode::kGeneral}; }
  static constexpr ParamProfile degenerate() { return {0.1, 2.0, 0.025, Mode::kDegenerate}; }

  bool operator==(const ParamProfile&) const = default;
};

struct ProfilePair {
  ParamProfile general = ParamProfile::general();
  ParamProfile degenerate = ParamProfile::degenerate();
};

/// Throws a config error unless the degenerate profile is strictly finer on
/// every parameter.
inline void validate_profiles(const ProfilePair& p) {
  auto positive = [](const ParamProfile& q) {
    return q.voxel_size > 0.0 && q.search_radius > 0.0 && q.residual_margin > 0.0;
  };
  if (!positive(p.general) || !positive(p.degenerate)) {
    throw Error(ErrorCode::kConfig, "profile parameters must be positive");
  }
  if (!(p.degenerate.voxel_size < p.general.voxel_size) ||
      !(p.degenerate.search_radius < p.general.search_radius) ||
      !(p.degenerate.residual_margin < p.general.residual_margin)) {
    throw Error(ErrorCode::kConfig, "degenerate profile must be strictly smaller than general");
  }
}

struct DetectorConfig {
  std::size_t count_threshold = 1200;
  double near_origin_radius = 5.0;
  double near_origin_fraction_threshold = 0.8;
  std::size_t hysteresis_frames = 3;

  void validate() const {
    if (count_threshold == 0 || !(near_origin_radius > 0.0) || !(near_origin_fraction_threshold > 0.0) ||
        near_origin_fraction_threshold > 1.0 || hysteresis_frames == 0) {
      throw Error(ErrorCode::kConfig, "invalid detector configuration");
    }
  }
};

struct DegeneracyReport {
  std::size_t downsampled_count = 0;
  double near_origin_fraction = 0.0;
  Mode raw_decision = Mode::kGeneral;
  Mode decision = Mode::kGeneral;
  std::size_t opposite_streak = 0;  // consecutive raw verdicts disagreeing with `decision`
  bool empty_scan = false;
};

/// Corridor test on a body-frame scan downsampled at the general voxel size:
/// few occupied voxels, most of them close to the sensor. The reported mode
/// only flips after `hysteresis_frames` consecutive opposite raw verdicts.
inline DegeneracyReport detect_degeneracy(std::span<const Point3> scan_body_downsampled,
                                          const DetectorConfig& cfg, const DegeneracyReport& prev) {
  DegeneracyReport r;
  r.decision = prev.decision;
  r.opposite_streak = prev.opposite_streak;
  if (scan_body_downsampled.empty()) {
    r.raw_decision = prev.decision;
    r.empty_scan = true;
    return r;
  }

  r.downsampled_count = scan_body_downsampled.size();
  const double r2 = cfg.near_origin_radius * cfg.near_origin_radius;
  std::size_t near = 0;
  for (const auto& p : scan_body_downsampled) {
    if (p.position().squaredNorm() < r2) ++near;
  }
  r.near_origin_fraction = static_cast<double>(near) / static_cast<double>(r.downsampled_count);
  const bool degenerate = r.downsampled_count < cfg.count_threshold &&
                          r.near_origin_fraction >= cfg.near_origin_fraction_threshold;
  r.raw_decision = degenerate ? Mode::kDegenerate : Mode::kGeneral;

  if (r.raw_decision == r.decision) {
    r.opposite_streak = 0;
  } else if (++r.opposite_streak >= cfg.hysteresis_frames) {
    r.decision = r.raw_decision;
    r.opposite_streak = 0;
  }
  return r;
}

inline ParamProfile select_params(const DegeneracyReport& report, const ProfilePair& profiles) {
  return report.decision == Mode::kDegenerate ? profiles.degenerate : profiles.general;
}

}  // namespace adalio

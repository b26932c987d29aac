#pragma once

#include <array>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "adalio/eskf.hpp"
#include "adalio/geometry.hpp"
#include "adalio/io.hpp"

namespace adalio {

struct MarkerPose {
  int id = 0;
  Vec3 position = Vec3::Zero();
};

enum class Alignment { kNone, kRigid };

struct MarkerScore {
  int id = 0;
  double distance = 0.0;
  int points = 0;
};

struct ScoreReport {
  std::vector<MarkerScore> markers;
  std::array<int, 4> bucket_counts{};  // <=1 cm, <=10 cm, <=100 cm, beyond
  int total = 0;
};

inline int marker_points(double distance) {
  if (distance <= 0.01) return 10;
  if (distance <= 0.10) return 6;
  if (distance <= 1.00) return 3;
  return 0;
}

namespace detail {

inline std::size_t closest_index(const std::vector<Vec3>& positions, const Vec3& target, double* dist) {
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const double d2 = (positions[i] - target).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  if (dist) *dist = std::sqrt(best_d2);
  return best;
}

// Rigid fit of trajectory positions onto markers, alternating closest-in-space
// association and Umeyama until the association stops changing. Returns the
// summed squared marker distance of the result.
inline double icp_to_markers(const std::vector<Vec3>& original, const std::vector<MarkerPose>& markers,
                             const Eigen::Matrix4d& start, std::vector<Vec3>& positions) {
  auto apply = [&](const Eigen::Matrix4d& T) {
    for (std::size_t i = 0; i < positions.size(); ++i) {
      positions[i] = T.topLeftCorner<3, 3>() * original[i] + T.topRightCorner<3, 1>();
    }
  };
  positions.resize(original.size());
  apply(start);
  std::vector<std::size_t> assoc(markers.size(), std::numeric_limits<std::size_t>::max());
  for (int iter = 0; iter < 100; ++iter) {
    std::vector<std::size_t> next(markers.size());
    for (std::size_t m = 0; m < markers.size(); ++m) next[m] = closest_index(positions, markers[m].position, nullptr);
    if (next == assoc) break;
    assoc = next;
    Eigen::Matrix3Xd src(3, markers.size()), dst(3, markers.size());
    for (std::size_t m = 0; m < markers.size(); ++m) {
      src.col(static_cast<Eigen::Index>(m)) = original[assoc[m]];
      dst.col(static_cast<Eigen::Index>(m)) = markers[m].position;
    }
    const Eigen::Matrix4d T = Eigen::umeyama(src, dst, false);
    if (!T.allFinite()) break;
    apply(T);
  }
  double cost = 0.0;
  for (const auto& m : markers) {
    double d = 0.0;
    closest_index(positions, m.position, &d);
    cost += d * d;
  }
  return cost;
}

// Closest-point association only converges locally, so the fit is seeded
// from the identity and from yaw turns about the trajectory centroid that
// move it onto the marker centroid; the lowest-cost result wins.
inline std::vector<Vec3> align_rigid(std::vector<Vec3> positions, const std::vector<MarkerPose>& markers) {
  if (markers.size() < 3) return positions;
  const std::vector<Vec3> original = positions;
  Vec3 traj_centroid = Vec3::Zero(), marker_centroid = Vec3::Zero();
  for (const auto& p : original) traj_centroid += p;
  for (const auto& m : markers) marker_centroid += m.position;
  traj_centroid /= static_cast<double>(original.size());
  marker_centroid /= static_cast<double>(markers.size());

  std::vector<Vec3> candidate;
  double best = icp_to_markers(original, markers, Eigen::Matrix4d::Identity(), positions);
  constexpr int kYawSeeds = 24;
  for (int k = 0; k < kYawSeeds; ++k) {
    const double yaw = 2.0 * std::numbers::pi * k / kYawSeeds;
    Eigen::Matrix4d start = Eigen::Matrix4d::Identity();
    start.topLeftCorner<3, 3>() = Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
    start.topRightCorner<3, 1>() = marker_centroid - start.topLeftCorner<3, 3>() * traj_centroid;
    const double cost = icp_to_markers(original, markers, start, candidate);
    if (cost < best) {
      best = cost;
      positions.swap(candidate);
    }
  }
  return positions;
}

}  // namespace detail

inline ScoreReport score_trajectory(const std::vector<PoseStamp>& traj, const std::vector<MarkerPose>& markers,
                                    Alignment alignment = Alignment::kNone) {
  ScoreReport report;
  if (markers.empty()) return report;
  if (traj.empty()) throw Error(ErrorCode::kInput, "cannot score an empty trajectory");
  std::vector<Vec3> positions;
  positions.reserve(traj.size());
  for (const auto& s : traj) positions.push_back(s.pose.translation);
  if (alignment == Alignment::kRigid) positions = detail::align_rigid(std::move(positions), markers);

  for (const auto& m : markers) {
    MarkerScore s;
    s.id = m.id;
    detail::closest_index(positions, m.position, &s.distance);
    s.points = marker_points(s.distance);
    const int bucket = s.points == 10 ? 0 : s.points == 6 ? 1 : s.points == 3 ? 2 : 3;
    ++report.bucket_counts[bucket];
    report.total += s.points;
    report.markers.push_back(s);
  }
  return report;
}

// Markers CSV: header "id,x,y,z".

inline void write_markers_csv(std::ostream& os, const std::vector<MarkerPose>& markers) {
  os << "id,x,y,z\n";
  char buf[160];
  for (const auto& m : markers) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", m.id, m.position.x(), m.position.y(), m.position.z());
    os << buf;
  }
}

inline std::vector<MarkerPose> parse_markers_csv(std::istream& is, const std::string& name = "<stream>") {
  std::vector<MarkerPose> out;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(is, line)) {
    ++lineno;
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::string where = name + ":" + std::to_string(lineno);
    if (!header_seen) {
      header_seen = true;
      if (line == "id,x,y,z") continue;
      throw Error(ErrorCode::kParse, where + ": expected header id,x,y,z");
    }
    const auto f = detail::split(line, ',');
    if (f.size() != 4) throw Error(ErrorCode::kParse, where + ": expected 4 fields");
    const double id = detail::parse_double(f[0], where);
    if (id != std::floor(id)) throw Error(ErrorCode::kParse, where + ": marker id must be an integer");
    MarkerPose m;
    m.id = static_cast<int>(id);
    m.position = Vec3(detail::parse_double(f[1], where), detail::parse_double(f[2], where),
                      detail::parse_double(f[3], where));
    if (!m.position.allFinite()) throw Error(ErrorCode::kInput, where + ": non-finite marker");
    out.push_back(m);
  }
  return out;
}

inline std::vector<MarkerPose> read_markers_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::kIo, "cannot open " + path);
  return parse_markers_csv(is, path);
}

inline void write_markers_file(const std::string& path, const std::vector<MarkerPose>& markers) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::kIo, "cannot write " + path);
  write_markers_csv(os, markers);
}

inline void write_score_csv(std::ostream& os, const ScoreReport& r) {
  os << "id,distance_m,points\n";
  for (const auto& m : r.markers) os << m.id << ',' << format_value(m.distance) << ',' << m.points << '\n';
  os << "total,," << r.total << '\n';
}

inline void print_score_table(std::ostream& os, const ScoreReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%8s %8s %8s %8s %8s\n", "<=1cm", "<=10cm", "<=100cm", ">100cm", "Score");
  os << buf;
  std::snprintf(buf, sizeof(buf), "%8d %8d %8d %8d %8d\n", r.bucket_counts[0], r.bucket_counts[1], r.bucket_counts[2],
                r.bucket_counts[3], r.total);
  os << buf;
}

}  // namespace adalio

#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "adalio/eskf.hpp"
#include "adalio/geometry.hpp"

namespace adalio {

/// Fixed nine fractional digits, e.g. "0.000000000".
inline std::string format_fixed9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9f", v);
  return buf;
}

/// Nine fractional digits with trailing zeros stripped; exact zero prints "0".
inline std::string format_value(double v) {
  std::string s = format_fixed9(v);
  const auto dot = s.find('.');
  if (dot != std::string::npos) {
    auto end = s.find_last_not_of('0');
    if (end == dot) --end;
    s.erase(end + 1);
  }
  if (s == "-0") s = "0";
  return s;
}

inline void write_tum_line(std::ostream& os, double t, const Pose& pose) {
  Eigen::Quaterniond q = pose.rotation.quaternion();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const Vec3& p = pose.translation;
  os << format_fixed9(t) << ' ' << format_value(p.x()) << ' ' << format_value(p.y()) << ' ' << format_value(p.z())
     << ' ' << format_value(q.x()) << ' ' << format_value(q.y()) << ' ' << format_value(q.z()) << ' '
     << format_value(q.w()) << '\n';
}

inline void write_trajectory_tum(const std::string& path, const std::vector<PoseStamp>& traj) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::kIo, "cannot write " + path);
  for (const auto& s : traj) write_tum_line(os, s.t, s.pose);
  if (!os) throw Error(ErrorCode::kIo, "write failed for " + path);
}

inline std::vector<PoseStamp> parse_trajectory_tum(std::istream& is, const std::string& name = "<stream>") {
  std::vector<PoseStamp> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::vector<double> v;
    std::string tok;
    while (ls >> tok) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw Error(ErrorCode::kParse, name + ":" + std::to_string(lineno) + ": bad number '" + tok + "'");
      }
    }
    if (v.size() != 8) {
      throw Error(ErrorCode::kParse, name + ":" + std::to_string(lineno) + ": expected 8 fields, got " +
                                         std::to_string(v.size()));
    }
    const Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
    if (!(q.norm() > 0.0)) throw Error(ErrorCode::kParse, name + ":" + std::to_string(lineno) + ": zero quaternion");
    if (!out.empty() && !(v[0] > out.back().t)) {
      throw Error(ErrorCode::kNonMonotone, name + ":" + std::to_string(lineno) + ": timestamps not increasing");
    }
    out.push_back({v[0], Pose{Rotation(q), Vec3(v[1], v[2], v[3])}});
  }
  return out;
}

inline std::vector<PoseStamp> read_trajectory_tum(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::kIo, "cannot open " + path);
  return parse_trajectory_tum(is, path);
}

}  // namespace adalio

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "adalio/geometry.hpp"
#include "adalio/pipeline.hpp"
#include "adalio/tum.hpp"

namespace adalio {

// ---------------------------------------------------------------------------
// Binary scan files. Little-endian throughout:
//   offset  0  char[4]   magic "ALSC"
//   offset  4  uint8     version (1)
//   offset  5  uint8[3]  reserved, zero
//   offset  8  float64   t_start
//   offset 16  float64   t_end
//   offset 24  uint64    point count N
//   offset 32  N records of float32 x, y, z, intensity, time_offset (20 bytes each)

inline constexpr std::array<char, 4> kScanMagic{'A', 'L', 'S', 'C'};
inline constexpr std::uint8_t kScanVersion = 1;
inline constexpr std::size_t kScanHeaderBytes = 32;
inline constexpr std::size_t kScanRecordBytes = 20;

namespace detail {

template <typename T>
void put_le(std::string& buf, T v) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  auto u = std::bit_cast<U>(v);
  for (std::size_t i = 0; i < sizeof(T); ++i) buf.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(const char* p) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<T>(u);
}

inline std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline double parse_double(const std::string& tok, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kParse, where + ": bad number '" + tok + "'");
  }
}

}  // namespace detail

inline std::string encode_scan(const LidarScan& scan) {
  std::string buf;
  buf.reserve(kScanHeaderBytes + scan.points.size() * kScanRecordBytes);
  buf.append(kScanMagic.data(), kScanMagic.size());
  buf.push_back(static_cast<char>(kScanVersion));
  buf.append(3, '\0');
  detail::put_le(buf, scan.t_start);
  detail::put_le(buf, scan.t_end);
  detail::put_le(buf, static_cast<std::uint64_t>(scan.points.size()));
  for (const auto& p : scan.points) {
    detail::put_le(buf, static_cast<float>(p.x()));
    detail::put_le(buf, static_cast<float>(p.y()));
    detail::put_le(buf, static_cast<float>(p.z()));
    detail::put_le(buf, static_cast<float>(p.intensity()));
    detail::put_le(buf, static_cast<float>(p.time_offset()));
  }
  return buf;
}

inline LidarScan decode_scan(const std::string& buf, const std::string& name = "<buffer>") {
  if (buf.size() < kScanHeaderBytes) throw Error(ErrorCode::kTruncated, name + ": header truncated");
  if (!std::equal(kScanMagic.begin(), kScanMagic.end(), buf.begin())) {
    throw Error(ErrorCode::kBadMagic, name + ": bad magic");
  }
  if (static_cast<std::uint8_t>(buf[4]) != kScanVersion) {
    throw Error(ErrorCode::kBadMagic, name + ": unsupported version " + std::to_string(static_cast<unsigned char>(buf[4])));
  }
  LidarScan scan;
  scan.t_start = detail::get_le<double>(buf.data() + 8);
  scan.t_end = detail::get_le<double>(buf.data() + 16);
  const auto n = detail::get_le<std::uint64_t>(buf.data() + 24);
  if (!(scan.t_end > scan.t_start)) throw Error(ErrorCode::kNonMonotone, name + ": t_end must exceed t_start");
  if (n > (buf.size() - kScanHeaderBytes) / kScanRecordBytes ||
      buf.size() - kScanHeaderBytes < n * kScanRecordBytes) {
    throw Error(ErrorCode::kTruncated, name + ": payload shorter than " + std::to_string(n) + " records");
  }
  scan.points.reserve(n);
  const char* p = buf.data() + kScanHeaderBytes;
  // float32 offsets may round just past the window edges; snap those back.
  const double dur = scan.duration();
  constexpr double kOffsetSlack = 1e-6;
  for (std::uint64_t i = 0; i < n; ++i, p += kScanRecordBytes) {
    double offset = detail::get_le<float>(p + 16);
    if (offset > dur && offset <= dur + kOffsetSlack) offset = dur;
    if (offset < 0.0 && offset >= -kOffsetSlack) offset = 0.0;
    scan.points.emplace_back(detail::get_le<float>(p), detail::get_le<float>(p + 4), detail::get_le<float>(p + 8),
                             detail::get_le<float>(p + 12), offset);
  }
  return scan;
}

inline void write_scan_file(const std::string& path, const LidarScan& scan) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::kIo, "cannot write " + path);
  const std::string buf = encode_scan(scan);
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!os) throw Error(ErrorCode::kIo, "write failed for " + path);
}

inline LidarScan read_scan_file(const std::string& path) { return decode_scan(detail::slurp(path), path); }

/// Every *.bin file of a directory, in file-name order.
inline std::vector<LidarScan> read_scan_directory(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error(ErrorCode::kIo, "scan directory not found: " + dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".bin") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<LidarScan> scans;
  scans.reserve(files.size());
  for (const auto& f : files) scans.push_back(read_scan_file(f.string()));
  return scans;
}

inline void write_map_dump(const std::string& path, const VoxelMap& map) {
  write_scan_file(path, LidarScan{map.points(), 0.0, 1.0});
}

// ---------------------------------------------------------------------------
// IMU CSV: header "t,gx,gy,gz,ax,ay,az", one sample per row.

inline void write_imu_csv(std::ostream& os, const std::vector<ImuSample>& imu) {
  os << "t,gx,gy,gz,ax,ay,az\n";
  char buf[256];
  for (const auto& s : imu) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", s.t, s.gyro.x(), s.gyro.y(),
                  s.gyro.z(), s.accel.x(), s.accel.y(), s.accel.z());
    os << buf;
  }
}

inline void write_imu_file(const std::string& path, const std::vector<ImuSample>& imu) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::kIo, "cannot write " + path);
  write_imu_csv(os, imu);
}

inline std::vector<ImuSample> parse_imu_csv(std::istream& is, const std::string& name = "<stream>") {
  std::vector<ImuSample> out;
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
      if (line == "t,gx,gy,gz,ax,ay,az") continue;
      throw Error(ErrorCode::kParse, where + ": expected header t,gx,gy,gz,ax,ay,az");
    }
    const auto f = detail::split(line, ',');
    if (f.size() != 7) throw Error(ErrorCode::kParse, where + ": expected 7 fields, got " + std::to_string(f.size()));
    ImuSample s;
    s.t = detail::parse_double(f[0], where);
    s.gyro = Vec3(detail::parse_double(f[1], where), detail::parse_double(f[2], where), detail::parse_double(f[3], where));
    s.accel = Vec3(detail::parse_double(f[4], where), detail::parse_double(f[5], where), detail::parse_double(f[6], where));
    if (!s.finite()) throw Error(ErrorCode::kInput, where + ": non-finite value");
    if (!out.empty() && !(s.t > out.back().t)) throw Error(ErrorCode::kNonMonotone, where + ": timestamps not increasing");
    out.push_back(s);
  }
  return out;
}

inline std::vector<ImuSample> read_imu_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::kIo, "cannot open " + path);
  return parse_imu_csv(is, path);
}

// ---------------------------------------------------------------------------
// Configuration: flat "key = value" lines, '#' comments. Every key below is
// required; unknown keys are rejected.

namespace detail {

struct ConfigField {
  const char* key;
  std::function<std::string(const OdometryConfig&)> get;
  std::function<void(OdometryConfig&, const std::string&, const std::string&)> set;
};

inline std::size_t parse_count(const std::string& v, const std::string& where) {
  const double d = parse_double(v, where);
  if (d < 0 || d != std::floor(d)) throw Error(ErrorCode::kConfig, where + ": expected a non-negative integer");
  return static_cast<std::size_t>(d);
}

inline bool parse_bool(const std::string& v, const std::string& where) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw Error(ErrorCode::kConfig, where + ": expected true/false");
}

inline std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

#define ADALIO_REAL(KEY, EXPR)                                                                          \
  ConfigField {                                                                                         \
    KEY, [](const OdometryConfig& c) { return fmt17(c.EXPR); },                                         \
        [](OdometryConfig& c, const std::string& v, const std::string& w) { c.EXPR = parse_double(v, w); } \
  }
#define ADALIO_COUNT(KEY, EXPR)                                                                         \
  ConfigField {                                                                                         \
    KEY, [](const OdometryConfig& c) { return std::to_string(c.EXPR); },                                \
        [](OdometryConfig& c, const std::string& v, const std::string& w) { c.EXPR = parse_count(v, w); } \
  }
#define ADALIO_BOOL(KEY, EXPR)                                                                          \
  ConfigField {                                                                                         \
    KEY, [](const OdometryConfig& c) { return std::string(c.EXPR ? "true" : "false"); },                \
        [](OdometryConfig& c, const std::string& v, const std::string& w) { c.EXPR = parse_bool(v, w); }  \
  }

inline const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = {
      ADALIO_REAL("general.voxel_size", profiles.general.voxel_size),
      ADALIO_REAL("general.search_radius", profiles.general.search_radius),
      ADALIO_REAL("general.residual_margin", profiles.general.residual_margin),
      ADALIO_REAL("degenerate.voxel_size", profiles.degenerate.voxel_size),
      ADALIO_REAL("degenerate.search_radius", profiles.degenerate.search_radius),
      ADALIO_REAL("degenerate.residual_margin", profiles.degenerate.residual_margin),
      ADALIO_COUNT("detector.count_threshold", detector.count_threshold),
      ADALIO_REAL("detector.near_origin_radius", detector.near_origin_radius),
      ADALIO_REAL("detector.near_origin_fraction_threshold", detector.near_origin_fraction_threshold),
      ADALIO_COUNT("detector.hysteresis_frames", detector.hysteresis_frames),
      ADALIO_REAL("noise.gyro_noise", noise.gyro_noise),
      ADALIO_REAL("noise.accel_noise", noise.accel_noise),
      ADALIO_REAL("noise.gyro_bias_walk", noise.gyro_bias_walk),
      ADALIO_REAL("noise.accel_bias_walk", noise.accel_bias_walk),
      ADALIO_REAL("update.lidar_noise", update.lidar_noise),
      ADALIO_COUNT("update.max_iters", update.max_iters),
      ADALIO_REAL("update.converge_eps", update.converge_eps),
      ADALIO_COUNT("update.knn_k", update.knn_k),
      ADALIO_COUNT("update.min_correspondences", update.min_correspondences),
      ADALIO_COUNT("init.min_count", init.min_count),
      ADALIO_REAL("init.accel_variance_threshold", init.accel_variance_threshold),
      ADALIO_REAL("init.gravity_magnitude", init.gravity_magnitude),
      ADALIO_BOOL("init.estimate_gravity", init.estimate_gravity),
      ADALIO_REAL("init.sigma_rot", init.sigma_rot),
      ADALIO_REAL("init.sigma_pos", init.sigma_pos),
      ADALIO_REAL("init.sigma_vel", init.sigma_vel),
      ADALIO_REAL("init.sigma_bias_gyro", init.sigma_bias_gyro),
      ADALIO_REAL("init.sigma_bias_accel", init.sigma_bias_accel),
      ADALIO_REAL("init.sigma_gravity", init.sigma_gravity),
      ConfigField{"extrinsic.translation",
                  [](const OdometryConfig& c) {
                    const Vec3& t = c.extrinsic.translation;
                    return fmt17(t.x()) + " " + fmt17(t.y()) + " " + fmt17(t.z());
                  },
                  [](OdometryConfig& c, const std::string& v, const std::string& w) {
                    std::istringstream is(v);
                    std::string a, b, d, extra;
                    if (!(is >> a >> b >> d) || (is >> extra)) throw Error(ErrorCode::kConfig, w + ": expected 3 numbers");
                    c.extrinsic.translation = Vec3(parse_double(a, w), parse_double(b, w), parse_double(d, w));
                  }},
      ConfigField{"extrinsic.rotation_wxyz",
                  [](const OdometryConfig& c) {
                    const auto& q = c.extrinsic.rotation.quaternion();
                    return fmt17(q.w()) + " " + fmt17(q.x()) + " " + fmt17(q.y()) + " " + fmt17(q.z());
                  },
                  [](OdometryConfig& c, const std::string& v, const std::string& w) {
                    std::istringstream is(v);
                    std::string qw, qx, qy, qz, extra;
                    if (!(is >> qw >> qx >> qy >> qz) || (is >> extra)) {
                      throw Error(ErrorCode::kConfig, w + ": expected 4 numbers");
                    }
                    const Eigen::Quaterniond q(parse_double(qw, w), parse_double(qx, w), parse_double(qy, w),
                                               parse_double(qz, w));
                    if (!(q.norm() > 0.0)) throw Error(ErrorCode::kConfig, w + ": zero quaternion");
                    c.extrinsic.rotation = Rotation(q);
                  }},
      ADALIO_REAL("map.cell_size", map.cell_size),
      ADALIO_COUNT("map.capacity_per_cell", map.capacity_per_cell),
      ADALIO_COUNT("map.max_cells", map.max_cells),
      ADALIO_REAL("registration_range", registration_range),
      ADALIO_BOOL("adaptive_enabled", adaptive_enabled),
  };
  return fields;
}

#undef ADALIO_REAL
#undef ADALIO_COUNT
#undef ADALIO_BOOL

}  // namespace detail

inline void write_config(std::ostream& os, const OdometryConfig& cfg) {
  os << "# adalio odometry configuration\n";
  for (const auto& f : detail::config_fields()) os << f.key << " = " << f.get(cfg) << '\n';
}

inline OdometryConfig parse_config(std::istream& is, const std::string& name = "<stream>") {
  OdometryConfig cfg;
  std::map<std::string, const detail::ConfigField*> by_key;
  for (const auto& f : detail::config_fields()) by_key.emplace(f.key, &f);
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  try {
    while (std::getline(is, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const std::string where = name + ":" + std::to_string(lineno);
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw Error(ErrorCode::kConfig, where + ": expected key = value");
      const std::string key = detail::trim(line.substr(0, eq));
      const std::string value = detail::trim(line.substr(eq + 1));
      auto it = by_key.find(key);
      if (it == by_key.end()) throw Error(ErrorCode::kConfig, where + ": unknown key '" + key + "'");
      if (!seen.insert(key).second) throw Error(ErrorCode::kConfig, where + ": duplicate key '" + key + "'");
      it->second->set(cfg, value, where + " (" + key + ")");
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfig) throw;
    throw Error(ErrorCode::kConfig, e.what());
  }
  for (const auto& f : detail::config_fields()) {
    if (!seen.count(f.key)) throw Error(ErrorCode::kConfig, name + ": missing required key '" + std::string(f.key) + "'");
  }
  cfg.validate();
  return cfg;
}

inline OdometryConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::kConfig, "cannot open configuration " + path);
  return parse_config(is, path);
}

inline void save_config(const std::string& path, const OdometryConfig& cfg) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::kIo, "cannot write " + path);
  write_config(os, cfg);
}

}  // namespace adalio

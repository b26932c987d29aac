#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <list>
#include <numeric>
#include <span>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "adalio/geometry.hpp"

namespace adalio {

struct VoxelIndex {
  std::int64_t ix = 0;
  std::int64_t iy = 0;
  std::int64_t iz = 0;

  auto operator<=>(const VoxelIndex&) const = default;
};

struct VoxelIndexHash {
  std::size_t operator()(const VoxelIndex& v) const noexcept {
    // Teschner et al. spatial hash primes.
    const auto h = static_cast<std::uint64_t>(v.ix) * 73856093ULL ^
                   static_cast<std::uint64_t>(v.iy) * 19349669ULL ^
                   static_cast<std::uint64_t>(v.iz) * 83492791ULL;
    return static_cast<std::size_t>(h);
  }
};

inline VoxelIndex voxel_index(const Vec3& p, double voxel_size) {
  return {static_cast<std::int64_t>(std::floor(p.x() / voxel_size)),
          static_cast<std::int64_t>(std::floor(p.y() / voxel_size)),
          static_cast<std::int64_t>(std::floor(p.z() / voxel_size))};
}

/// One centroid per occupied voxel, ordered by voxel index. Intensity and
/// time_offset of each output point are the member means.
inline std::vector<Point3> voxel_downsample(std::span<const Point3> cloud, double voxel_size) {
  if (!(voxel_size > 0.0)) throw Error(ErrorCode::kInput, "voxel_size must be positive");
  std::vector<std::pair<VoxelIndex, std::size_t>> keyed;
  keyed.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) keyed.emplace_back(voxel_index(cloud[i].position(), voxel_size), i);
  std::stable_sort(keyed.begin(), keyed.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<Point3> out;
  std::size_t i = 0;
  while (i < keyed.size()) {
    std::size_t j = i;
    Vec3 sum = Vec3::Zero();
    double intensity = 0.0;
    double offset = 0.0;
    while (j < keyed.size() && keyed[j].first == keyed[i].first) {
      const Point3& p = cloud[keyed[j].second];
      sum += p.position();
      intensity += p.intensity();
      offset += p.time_offset();
      ++j;
    }
    const double n = static_cast<double>(j - i);
    out.emplace_back(sum / n, intensity / n, offset / n);
    i = j;
  }
  return out;
}

struct Neighbor {
  Point3 point;
  double distance = 0.0;
};

struct VoxelMapConfig {
  double cell_size = 0.5;
  std::size_t capacity_per_cell = 32;
  std::size_t max_cells = 500'000;
};

/// Incremental spatial-hash map of world-frame points.
///
/// Cells hold at most `capacity_per_cell` points; points arriving at a full
/// cell are dropped. When a new cell would exceed `max_cells`, the cell that
/// was least recently touched by an insertion is evicted. kNN queries are
/// exact within the search radius: cells are visited in Chebyshev rings
/// around the query cell until no unvisited cell can hold a closer point.
class VoxelMap {
 public:
  explicit VoxelMap(VoxelMapConfig cfg = {}) : cfg_(cfg) {
    if (!(cfg_.cell_size > 0.0) || cfg_.capacity_per_cell == 0 || cfg_.max_cells == 0) {
      throw Error(ErrorCode::kConfig, "voxel map sizes must be positive");
    }
  }

  const VoxelMapConfig& config() const { return cfg_; }
  bool empty() const { return cells_.empty(); }
  std::size_t cell_count() const { return cells_.size(); }
  std::size_t point_count() const { return point_count_; }

  void insert_scan(std::span<const Point3> cloud) {
    for (const auto& p : cloud) insert_point(p);
  }

  std::vector<Neighbor> knn_search(const Vec3& query, std::size_t k, double max_radius) const {
    std::vector<Neighbor> result;
    if (k == 0 || !(max_radius > 0.0) || cells_.empty()) return result;

    const double s = cfg_.cell_size;
    const VoxelIndex c = voxel_index(query, s);
    const double r2max = max_radius * max_radius;

    struct Candidate {
      double d2;
      std::uint64_t seq;
      const Point3* p;
    };
    std::vector<Candidate> cand;

    auto better = [](const Candidate& a, const Candidate& b) {
      return a.d2 < b.d2 || (a.d2 == b.d2 && a.seq < b.seq);
    };

    const Vec3 lo(static_cast<double>(c.ix) * s, static_cast<double>(c.iy) * s, static_cast<double>(c.iz) * s);
    const Vec3 off_lo = query - lo;                     // distance to the lower faces of the home cell
    const Vec3 off_hi = Vec3::Constant(s) - off_lo;     // distance to the upper faces
    const auto max_ring = static_cast<std::int64_t>(std::ceil(max_radius / s)) + 1;

    for (std::int64_t ring = 0; ring <= max_ring; ++ring) {
      // Every cell in this ring or beyond lies outside the (2*ring-1)^3 block,
      // so its points are at least `bound` away from the query.
      const double bound =
          ring == 0 ? 0.0
                    : std::min(off_lo.minCoeff(), off_hi.minCoeff()) + static_cast<double>(ring - 1) * s;
      if (bound > max_radius) break;
      if (cand.size() >= k) {
        std::nth_element(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k - 1), cand.end(), better);
        cand.resize(k);
        if (std::sqrt(cand[k - 1].d2) < bound) break;
      }
      visit_ring(c, ring, [&](const Cell& cell, const VoxelIndex& idx) {
        if (cell_min_dist2(query, idx) > r2max) return;
        for (const auto& e : cell.points) {
          const double d2 = (e.point.position() - query).squaredNorm();
          if (d2 <= r2max) cand.push_back({d2, e.seq, &e.point});
        }
      });
    }
    std::sort(cand.begin(), cand.end(), better);
    if (cand.size() > k) cand.resize(k);
    result.reserve(cand.size());
    for (const auto& e : cand) result.push_back({*e.p, std::sqrt(e.d2)});
    return result;
  }

  /// All stored points, in cell-index order then insertion order.
  std::vector<Point3> points() const {
    std::vector<const std::pair<const VoxelIndex, Cell>*> entries;
    entries.reserve(cells_.size());
    for (const auto& kv : cells_) entries.push_back(&kv);
    std::sort(entries.begin(), entries.end(), [](auto* a, auto* b) { return a->first < b->first; });
    std::vector<Point3> out;
    out.reserve(point_count_);
    for (auto* kv : entries)
      for (const auto& e : kv->second.points) out.push_back(e.point);
    return out;
  }

  /// Cell key and points for invariant checks.
  template <typename Fn>
  void for_each_cell(Fn&& fn) const {
    for (const auto& [idx, cell] : cells_) {
      std::vector<Point3> pts;
      for (const auto& e : cell.points) pts.push_back(e.point);
      fn(idx, pts);
    }
  }

 private:
  struct Entry {
    Point3 point;
    std::uint64_t seq;
  };
  struct Cell {
    std::vector<Entry> points;
    std::list<VoxelIndex>::iterator lru;
  };

  void insert_point(const Point3& p) {
    const VoxelIndex idx = voxel_index(p.position(), cfg_.cell_size);
    auto it = cells_.find(idx);
    if (it == cells_.end()) {
      if (cells_.size() >= cfg_.max_cells) {
        cells_.erase(lru_.back());
        lru_.pop_back();
      }
      lru_.push_front(idx);
      it = cells_.emplace(idx, Cell{{}, lru_.begin()}).first;
    } else {
      lru_.splice(lru_.begin(), lru_, it->second.lru);
    }
    Cell& cell = it->second;
    if (cell.points.size() < cfg_.capacity_per_cell) {
      cell.points.push_back({p, next_seq_++});
      ++point_count_;
    }
  }

  double cell_min_dist2(const Vec3& q, const VoxelIndex& idx) const {
    const double s = cfg_.cell_size;
    double d2 = 0.0;
    const std::int64_t ids[3] = {idx.ix, idx.iy, idx.iz};
    for (int a = 0; a < 3; ++a) {
      const double lo = static_cast<double>(ids[a]) * s;
      const double hi = lo + s;
      const double d = q[a] < lo ? lo - q[a] : (q[a] > hi ? q[a] - hi : 0.0);
      d2 += d * d;
    }
    return d2;
  }

  template <typename Fn>
  void visit_ring(const VoxelIndex& c, std::int64_t ring, Fn&& fn) const {
    auto visit = [&](std::int64_t dx, std::int64_t dy, std::int64_t dz) {
      const VoxelIndex idx{c.ix + dx, c.iy + dy, c.iz + dz};
      auto it = cells_.find(idx);
      if (it != cells_.end()) fn(it->second, idx);
    };
    if (ring == 0) {
      visit(0, 0, 0);
      return;
    }
    for (std::int64_t dx = -ring; dx <= ring; ++dx) {
      for (std::int64_t dy = -ring; dy <= ring; ++dy) {
        const bool xy_shell = std::abs(dx) == ring || std::abs(dy) == ring;
        if (xy_shell) {
          for (std::int64_t dz = -ring; dz <= ring; ++dz) visit(dx, dy, dz);
        } else {
          visit(dx, dy, -ring);
          visit(dx, dy, ring);
        }
      }
    }
  }

  VoxelMapConfig cfg_;
  std::unordered_map<VoxelIndex, Cell, VoxelIndexHash> cells_;
  std::list<VoxelIndex> lru_;
  std::uint64_t next_seq_ = 0;
  std::size_t point_count_ = 0;
};

}  // namespace adalio

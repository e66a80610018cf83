#include "gsanim/spatial.hpp"

#include "gsanim/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gsanim {

namespace {

bool closer(const Neighbor& a, const Neighbor& b) {
  return a.squared_distance < b.squared_distance ||
         (a.squared_distance == b.squared_distance && a.index < b.index);
}

// Keeps the best k candidates in `best` (sorted).
void offer(std::vector<Neighbor>& best, std::size_t k, const Neighbor& n) {
  if (best.size() == k && !closer(n, best.back())) {
    return;
  }
  auto it = std::upper_bound(best.begin(), best.end(), n, closer);
  best.insert(it, n);
  if (best.size() > k) {
    best.pop_back();
  }
}

} // namespace

PointGrid::PointGrid(std::vector<Eigen::Vector3d> points) : points_(std::move(points)) {
  if (points_.empty()) {
    return;
  }
  Eigen::Vector3d lo = points_[0];
  Eigen::Vector3d hi = points_[0];
  for (const auto& p : points_) {
    if (!p.allFinite()) {
      throw InvariantError("point grid received a non-finite point");
    }
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Eigen::Vector3d extent = (hi - lo).cwiseMax(1e-9);
  const double target_cells = std::max(1.0, static_cast<double>(points_.size()) / 2.0);
  // cell size from the largest extent so flat clouds do not explode the grid
  double cell = std::cbrt(extent.prod() / target_cells);
  cell = std::max(cell, extent.maxCoeff() / std::cbrt(target_cells) / 8.0);
  cell_ = std::max(cell, 1e-9);
  origin_ = lo;
  for (int a = 0; a < 3; ++a) {
    dims_[a] = std::max(1L, static_cast<long>(std::floor(extent[a] / cell_)) + 1);
  }
  const long total = dims_[0] * dims_[1] * dims_[2];
  std::vector<int> counts(static_cast<std::size_t>(total) + 1, 0);
  std::vector<long> point_cell(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) {
    long c[3];
    for (int a = 0; a < 3; ++a) {
      c[a] = std::clamp(static_cast<long>(std::floor((points_[i][a] - origin_[a]) / cell_)), 0L,
                        dims_[a] - 1);
    }
    point_cell[i] = cell_index(c[0], c[1], c[2]);
    ++counts[static_cast<std::size_t>(point_cell[i]) + 1];
  }
  for (std::size_t c = 1; c < counts.size(); ++c) {
    counts[c] += counts[c - 1];
  }
  cell_start_ = counts;
  cell_points_.resize(points_.size());
  std::vector<int> fill(counts.begin(), counts.end() - 1);
  for (std::size_t i = 0; i < points_.size(); ++i) {
    cell_points_[static_cast<std::size_t>(fill[static_cast<std::size_t>(point_cell[i])]++)] =
        static_cast<int>(i);
  }
}

Neighbor PointGrid::nearest(const Eigen::Vector3d& query) const {
  auto out = knn(query, 1);
  if (out.empty()) {
    throw InvariantError("nearest-neighbor query on an empty point set");
  }
  return out[0];
}

std::vector<Neighbor> PointGrid::knn(const Eigen::Vector3d& query, int k) const {
  std::vector<Neighbor> best;
  if (points_.empty() || k <= 0) {
    return best;
  }
  const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), points_.size());
  best.reserve(kk + 1);
  // ring center clamped into the grid; far queries then start at the nearest cells
  long qc[3];
  long max_ring = 0;
  for (int a = 0; a < 3; ++a) {
    const double f = std::floor((query[a] - origin_[a]) / cell_);
    qc[a] = static_cast<long>(std::clamp(f, 0.0, static_cast<double>(dims_[a] - 1)));
    max_ring = std::max({max_ring, qc[a], dims_[a] - 1 - qc[a]});
  }
  for (long r = 0; r <= max_ring; ++r) {
    const long z0 = std::max(qc[2] - r, 0L), z1 = std::min(qc[2] + r, dims_[2] - 1);
    const long y0 = std::max(qc[1] - r, 0L), y1 = std::min(qc[1] + r, dims_[1] - 1);
    const long x0 = std::max(qc[0] - r, 0L), x1 = std::min(qc[0] + r, dims_[0] - 1);
    for (long z = z0; z <= z1; ++z) {
      for (long y = y0; y <= y1; ++y) {
        const bool shell_yz = (z == qc[2] - r || z == qc[2] + r || y == qc[1] - r || y == qc[1] + r);
        for (long x = x0; x <= x1; ++x) {
          if (!shell_yz && x != qc[0] - r && x != qc[0] + r) {
            x = std::max(x, qc[0] + r - 1);  // skip the interior already visited
            continue;
          }
          const long c = cell_index(x, y, z);
          for (int s = cell_start_[c]; s < cell_start_[c + 1]; ++s) {
            const int idx = cell_points_[static_cast<std::size_t>(s)];
            offer(best, kk, {idx, (points_[static_cast<std::size_t>(idx)] - query).squaredNorm()});
          }
        }
      }
    }
    if (best.size() == kk) {
      // unvisited cells lie beyond the cube [qc - r, qc + r] on sides where the grid continues
      double bound = std::numeric_limits<double>::infinity();
      for (int a = 0; a < 3; ++a) {
        if (qc[a] - r > 0) {
          bound = std::min(bound, query[a] - (origin_[a] + static_cast<double>(qc[a] - r) * cell_));
        }
        if (qc[a] + r < dims_[a] - 1) {
          bound = std::min(bound, origin_[a] + static_cast<double>(qc[a] + r + 1) * cell_ - query[a]);
        }
      }
      if (bound == std::numeric_limits<double>::infinity() ||
          (bound > 0.0 && best.back().squared_distance < bound * bound)) {
        break;
      }
    }
  }
  return best;
}

std::vector<Neighbor> brute_force_knn(std::span<const Eigen::Vector3d> points,
                                      const Eigen::Vector3d& query, int k) {
  std::vector<Neighbor> all;
  all.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    all.push_back({static_cast<int>(i), (points[i] - query).squaredNorm()});
  }
  std::sort(all.begin(), all.end(), closer);
  all.resize(std::min<std::size_t>(all.size(), static_cast<std::size_t>(std::max(k, 0))));
  return all;
}

} // namespace gsanim

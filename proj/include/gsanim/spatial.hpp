#pragma once

#include <Eigen/Dense>

#include <span>
#include <utility>
#include <vector>

namespace gsanim {

struct Neighbor {
  int index = -1;
  double squared_distance = 0.0;
};

/// Uniform-grid point index with exact k-nearest-neighbor queries. Results
/// are ordered by (distance, index), so they match a brute-force scan with the
/// same tie-break bit for bit.
class PointGrid {
 public:
  explicit PointGrid(std::vector<Eigen::Vector3d> points);

  std::size_t size() const {
    return points_.size();
  }
  const std::vector<Eigen::Vector3d>& points() const {
    return points_;
  }

  Neighbor nearest(const Eigen::Vector3d& query) const;
  std::vector<Neighbor> knn(const Eigen::Vector3d& query, int k) const;

 private:
  long cell_index(long x, long y, long z) const {
    return (z * dims_[1] + y) * dims_[0] + x;
  }

  std::vector<Eigen::Vector3d> points_;
  Eigen::Vector3d origin_ = Eigen::Vector3d::Zero();
  double cell_ = 1.0;
  long dims_[3] = {1, 1, 1};
  std::vector<int> cell_start_;
  std::vector<int> cell_points_;
};

/// O(n) scan with the same ordering contract as PointGrid::knn.
std::vector<Neighbor> brute_force_knn(std::span<const Eigen::Vector3d> points,
                                      const Eigen::Vector3d& query, int k);

} // namespace gsanim

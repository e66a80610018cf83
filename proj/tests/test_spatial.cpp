#include <gtest/gtest.h>

#include "gsanim/spatial.hpp"

#include <random>

using namespace gsanim;

namespace {

std::vector<Eigen::Vector3d> cloud(int n, std::mt19937_64& rng, double spread) {
  std::uniform_real_distribution<double> u(-spread, spread);
  std::vector<Eigen::Vector3d> pts(n);
  for (auto& p : pts) {
    p = Eigen::Vector3d(u(rng), u(rng), u(rng));
  }
  return pts;
}

} // namespace

TEST(PointGrid, NearestMatchesBruteForceOnRandomInstances) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 300);
    const double spread = (trial % 3 == 0) ? 0.01 : 1.0;
    auto pts = cloud(n, rng, spread);
    if (trial % 5 == 0) {
      for (auto& p : pts) {
        p.z() = 0.0;  // flat cloud
      }
    }
    const PointGrid grid(pts);
    const auto queries = cloud(50, rng, 1.5 * spread);
    for (const auto& q : queries) {
      const Neighbor a = grid.nearest(q);
      const Neighbor b = brute_force_knn(pts, q, 1).front();
      ASSERT_EQ(a.index, b.index);
      ASSERT_EQ(a.squared_distance, b.squared_distance);
    }
  }
}

TEST(PointGrid, KnnMatchesBruteForce) {
  std::mt19937_64 rng(7);
  const auto pts = cloud(500, rng, 1.0);
  const PointGrid grid(pts);
  for (const auto& q : cloud(100, rng, 1.2)) {
    for (int k : {1, 4, 8, 600}) {
      const auto a = grid.knn(q, k);
      const auto b = brute_force_knn(pts, q, k);
      ASSERT_EQ(a.size(), b.size());
      for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].index, b[i].index);
        EXPECT_EQ(a[i].squared_distance, b[i].squared_distance);
      }
    }
  }
}

TEST(PointGrid, DuplicatePointsTieBreakByIndex) {
  std::vector<Eigen::Vector3d> pts = {{1, 0, 0}, {0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
  const PointGrid grid(pts);
  const auto nb = grid.knn({0, 0, 0}, 3);
  ASSERT_EQ(nb.size(), 3u);
  EXPECT_EQ(nb[0].index, 1);
  EXPECT_EQ(nb[1].index, 2);
  EXPECT_EQ(nb[2].index, 3);
}

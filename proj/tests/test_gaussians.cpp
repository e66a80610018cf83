#include <gtest/gtest.h>

#include "gsanim/error.hpp"
#include "gsanim/gaussians.hpp"

#include <random>

using namespace gsanim;

namespace {

GaussianSet random_set(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> c(0.0, 1.0);
  GaussianSet g;
  for (int i = 0; i < n; ++i) {
    Eigen::Quaterniond q(u(rng), u(rng), u(rng), u(rng));
    q.normalize();
    g.push_back({u(rng), u(rng), u(rng)}, 3.0 * u(rng), Eigen::Vector3d(u(rng), u(rng), u(rng)) - Eigen::Vector3d::Constant(3.0),
                q, {c(rng), c(rng), c(rng)});
  }
  return g;
}

} // namespace

TEST(GaussianSet, CovarianceIdentityRotation) {
  GaussianSet g;
  g.push_back({0, 0, 0}, 0.0, {std::log(0.1), std::log(0.2), std::log(0.3)}, Eigen::Quaterniond::Identity(), {0.5, 0.5, 0.5});
  const Eigen::Matrix3d cov = g.covariance(0);
  const Eigen::Vector3d expect(0.01, 0.04, 0.09);
  EXPECT_LT((cov - Eigen::Matrix3d(expect.asDiagonal())).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(GaussianSet, CovarianceEigenvaluesRecoverScale) {
  const auto g = random_set(50, 3);
  for (std::size_t i = 0; i < g.size(); ++i) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(g.covariance(i));
    Eigen::Vector3d sv = es.eigenvalues().cwiseSqrt();
    Eigen::Vector3d s = g.scale(i);
    std::sort(sv.data(), sv.data() + 3);
    std::sort(s.data(), s.data() + 3);
    EXPECT_LT((sv - s).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
  }
}

TEST(GaussianSet, ValidateRejectsBadFields) {
  auto g = random_set(3, 1);
  EXPECT_NO_THROW(g.validate());
  auto bad = g;
  bad.rotation[1].coeffs() *= 1.1;
  EXPECT_THROW(bad.validate(), InvariantError);
  bad = g;
  bad.color[2].x() = 1.5;
  EXPECT_THROW(bad.validate(), InvariantError);
  bad = g;
  bad.centers[0].x() = std::nan("");
  EXPECT_THROW(bad.validate(), InvariantError);
}

TEST(Prune, ThresholdZeroIsIdentity) {
  const auto g = random_set(40, 2);
  const auto p = prune(g, 0.0);
  EXPECT_EQ(p.centers, g.centers);
  EXPECT_EQ(p.raw_opacity, g.raw_opacity);
}

TEST(Prune, HighOpacitySurvives) {
  auto g = random_set(10, 2);
  for (auto& o : g.raw_opacity) {
    o = logit(0.9);
  }
  EXPECT_EQ(prune(g, 0.5).size(), 10u);
}

TEST(Prune, MixedFixtureKeepsOrder) {
  GaussianSet g;
  for (double o : {0.001, 0.5, 0.9}) {
    g.push_back({o, 0, 0}, logit(o), {-3, -3, -3}, Eigen::Quaterniond::Identity(), {0, 0, 0});
  }
  const auto p = prune(g, kDefaultOpacityThreshold);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_DOUBLE_EQ(p.centers[0].x(), 0.5);
  EXPECT_DOUBLE_EQ(p.centers[1].x(), 0.9);
}

TEST(Prune, Idempotent) {
  const auto g = random_set(200, 5);
  const auto a = prune(g, 0.3);
  const auto b = prune(a, 0.3);
  EXPECT_EQ(a.centers, b.centers);
  EXPECT_LT(a.size(), g.size());
}

TEST(Prune, RejectsBadThreshold) {
  const auto g = random_set(2, 5);
  EXPECT_THROW(prune(g, 1.0), InvariantError);
  EXPECT_THROW(prune(g, -0.1), InvariantError);
}

TEST(Densify, TopKZeroIsIdentity) {
  const auto g = random_set(5, 6);
  const std::vector<double> s(5, 1.0);
  const auto d = densify(g, s, 0);
  EXPECT_EQ(d.centers, g.centers);
}

TEST(Densify, SplitIsSymmetric) {
  GaussianSet g;
  g.push_back({0.3, -0.2, 0.1}, 0.0, Eigen::Vector3d::Constant(std::log(0.05)), Eigen::Quaterniond::Identity(), {1, 0, 0});
  const std::vector<double> s{1.0};
  const auto d = densify(g, s, 1);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_LT((0.5 * (d.centers[0] + d.centers[1]) - g.centers[0]).norm(), 1e-12);
  EXPECT_NEAR((d.centers[0] - d.centers[1]).norm(), 0.05, 1e-12);
  EXPECT_NEAR(d.raw_scale[0].x(), std::log(0.05) - std::log(1.6), 1e-12);
}

TEST(Densify, ArgmaxFixture) {
  GaussianSet g;
  for (int i = 0; i < 3; ++i) {
    g.push_back({double(i), 0, 0}, 0.0, {std::log(0.2), std::log(0.1), std::log(0.1)}, Eigen::Quaterniond::Identity(), {0, 0, 0});
  }
  const std::vector<double> s{1, 5, 3};
  const auto d = densify(g, s, 1);
  ASSERT_EQ(d.size(), 4u);
  EXPECT_EQ(d.centers[0], g.centers[0]);
  EXPECT_EQ(d.centers.back(), g.centers[2]);
  // children straddle parent 1 along the major (x) axis
  EXPECT_NEAR(d.centers[1].x(), 1.1, 1e-12);
  EXPECT_NEAR(d.centers[2].x(), 0.9, 1e-12);
}

TEST(Densify, ErrorsAndCountWithPrune) {
  const auto g = random_set(4, 9);
  const std::vector<double> s{0.1, 0.4, 0.2, 0.3};
  EXPECT_THROW(densify(g, s, 5), InvariantError);
  const std::vector<double> short_scores{1.0};
  EXPECT_THROW(densify(g, short_scores, 1), InvariantError);
  EXPECT_EQ(prune(densify(g, s, 3), 0.0).size(), 7u);
}

TEST(Densify, CarriesWeights) {
  auto g = random_set(3, 9);
  g.weights = SkinningWeights::from_dense({{1, 0}, {0.5, 0.5}, {0, 1}});
  const std::vector<double> s{0, 1, 0};
  const auto d = densify(g, s, 1);
  ASSERT_TRUE(d.weights.has_value());
  EXPECT_EQ(d.weights->rows(), 4u);
  EXPECT_EQ(d.weights->dense_row(1, 2), (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(d.weights->dense_row(2, 2), (std::vector<double>{0.5, 0.5}));
}

#include "gsanim/avatar.hpp"
#include "gsanim/error.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace gsanim;
namespace sj = gsanim::synthetic_joint;

namespace {

SyntheticBody one_hot_body() {
  SyntheticConfig cfg;
  cfg.weight_mode = SyntheticWeightMode::one_hot;
  return make_synthetic_body(7, cfg);
}

Pose with_rotation(Pose p, int joint, const Eigen::Vector3d& axis, double angle) {
  p.joint_rotations[static_cast<std::size_t>(joint)] =
      Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis.normalized())) * p.joint_rotations[static_cast<std::size_t>(joint)];
  return p;
}

double max_distance(const std::vector<Eigen::Vector3d>& a, const std::vector<Eigen::Vector3d>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, (a[i] - b[i]).norm());
  }
  return worst;
}

Mesh unit_quad() {
  Mesh m;
  m.vertices = {{-0.5, -0.5, 0.0}, {0.5, -0.5, 0.0}, {0.5, 0.5, 0.0}, {-0.5, 0.5, 0.0}};
  m.uv = {{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}};
  m.faces = {{0, 1, 2}, {0, 2, 3}};
  m.recompute_normals();
  return m;
}

Image checker(int size) {
  Image img(size, size, 3);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const float v = ((x / 4 + y / 4) % 2) ? 0.9f : 0.1f;
      img.at(x, y, 0) = v;
      img.at(x, y, 1) = 1.0f - v;
      img.at(x, y, 2) = 0.5f;
    }
  }
  return img;
}

GaussianSet canonical_template(const SyntheticBody& body, std::uint64_t seed = 3, int resolution = 48) {
  const Shape shape = Shape::zero(body.model.shape_dim());
  const Mesh canon = pose_body(body.model, shape, body.model.skeleton.canonical_pose);
  TemplateConfig cfg;
  cfg.uv_resolution = resolution;
  return build_template(canon, checker(32), body.model, shape, nn::make_network_params<float>(seed), cfg);
}

} // namespace

TEST(AvatarState, StagesAdvanceInOrder) {
  AvatarState s;
  auto c = s.advance(AvatarStage::canonical, {}, {});
  auto t = c.advance(AvatarStage::coarse_target, {}, {});
  auto r = t.advance(AvatarStage::refined_target, {}, {});
  EXPECT_EQ(r.stage, AvatarStage::refined_target);
  EXPECT_THROW(s.advance(AvatarStage::coarse_target, {}, {}), InvariantError);
  EXPECT_THROW(r.advance(AvatarStage::source, {}, {}), InvariantError);
  EXPECT_THROW(c.advance(AvatarStage::canonical, {}, {}), InvariantError);
}

TEST(Canonicalize, CanonicalSourceIsIdentity) {
  const auto body = make_synthetic_body(5);
  const Shape shape = Shape::zero(body.model.shape_dim());
  const Mesh scan = pose_body(body.model, shape, body.model.skeleton.canonical_pose);
  const Mesh out = canonicalize_scan(scan, body.model, body.model.skeleton.canonical_pose, shape);
  EXPECT_LT(max_distance(out.vertices, scan.vertices), 1e-9);
}

TEST(Canonicalize, BentElbowRecoversAPose) {
  const auto body = one_hot_body();
  const Shape shape = Shape::zero(body.model.shape_dim());
  const Pose canon = body.model.skeleton.canonical_pose;
  const Pose bent = with_rotation(canon, sj::l_elbow, Eigen::Vector3d::UnitZ(), std::numbers::pi / 2.0);
  const Mesh scan = pose_body(body.model, shape, bent);
  const Mesh truth = pose_body(body.model, shape, canon);
  EXPECT_GT(max_distance(scan.vertices, truth.vertices), 0.05);

  const Mesh with_weights = canonicalize_scan(scan, body.model.weights, body.model, bent, shape);
  EXPECT_LT(max_distance(with_weights.vertices, truth.vertices), 1e-6);
  const Mesh bound = canonicalize_scan(scan, body.model, bent, shape);
  EXPECT_LT(max_distance(bound.vertices, truth.vertices), 1e-6);
}

TEST(Canonicalize, RoundTripToSourcePose) {
  const auto body = one_hot_body();
  const Shape shape = Shape::zero(body.model.shape_dim());
  Pose source = with_rotation(body.model.skeleton.canonical_pose, sj::r_knee, Eigen::Vector3d::UnitX(), 0.7);
  source = with_rotation(source, sj::neck, Eigen::Vector3d(1, 1, 0), 0.3);
  const Mesh scan = pose_body(body.model, shape, source);
  const Mesh canon = canonicalize_scan(scan, body.model.weights, body.model, source, shape);
  const auto back = compose_repose_transform(body.model.weights, pose_transforms(body.model, shape, source),
                                             pose_transforms(body.model, shape, body.model.skeleton.canonical_pose));
  EXPECT_LT(max_distance(apply_vertex_transforms(canon, back).vertices, scan.vertices), 1e-6);
}

TEST(UvRaster, FullCoverageQuadYieldsEveryTexel) {
  const auto samples = rasterize_uv(unit_quad(), 64);
  EXPECT_EQ(samples.texel.size(), 4096u);
  for (std::size_t i = 1; i < samples.texel.size(); ++i) {
    EXPECT_LT(samples.texel[i - 1], samples.texel[i]);
  }
  // texel (0, 0) is the top-left: u small, v large
  EXPECT_NEAR(samples.position[0].x(), -0.5 + 0.5 / 64, 1e-12);
  EXPECT_NEAR(samples.position[0].y(), 0.5 - 0.5 / 64, 1e-12);
}

TEST(UvRaster, RejectsMissingUv) {
  Mesh m = unit_quad();
  m.uv.clear();
  EXPECT_THROW(rasterize_uv(m, 8), InvariantError);
}

TEST(BuildTemplate, ZeroOffsetHeadAnchorsOnSurface) {
  const auto body = make_synthetic_body(5);
  const Mesh quad = unit_quad();
  const auto params = nn::make_network_params<float>(9);
  const auto g = build_template(quad, checker(16), body.model, Shape::zero(body.model.shape_dim()), params);
  ASSERT_EQ(g.size(), 4096u);
  const auto samples = rasterize_uv(quad, 64);
  for (std::size_t i = 0; i < g.size(); ++i) {
    ASSERT_EQ(g.centers[i], samples.position[i]);
  }
  ASSERT_TRUE(g.weights.has_value());
  EXPECT_EQ(g.weights->rows(), g.size());
  g.validate();
}

TEST(BuildTemplate, RandomHeadKeepsInvariants) {
  const auto body = make_synthetic_body(5);
  auto params = nn::make_network_params<float>(10);
  std::mt19937_64 rng(10);
  std::normal_distribution<double> n(0.0, 3.0);
  for (const char* name : {"template_unet.out.weight", "template_unet.out.bias"}) {
    for (auto& v : params.at(name).data()) {
      v = static_cast<float>(n(rng));
    }
  }
  TemplateConfig cfg;
  cfg.uv_resolution = 16;
  const auto g = build_template(unit_quad(), checker(16), body.model, Shape::zero(body.model.shape_dim()), params, cfg);
  EXPECT_EQ(g.size(), 256u);
  g.validate();
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_TRUE((g.color[i].array() >= 0.0).all() && (g.color[i].array() <= 1.0).all());
    EXPECT_LE(std::abs(g.centers[i].z()), cfg.max_offset + 1e-12);
  }
}

TEST(BuildTemplate, RejectsMissingInputs) {
  const auto body = make_synthetic_body(5);
  const auto params = nn::make_network_params<float>(9);
  Mesh m = unit_quad();
  m.uv.clear();
  EXPECT_THROW(build_template(m, checker(8), body.model, Shape::zero(body.model.shape_dim()), params), InvariantError);
  EXPECT_THROW(build_template(unit_quad(), Image{}, body.model, Shape::zero(body.model.shape_dim()), params),
               InvariantError);
}

TEST(Animate, CanonicalTargetIsIdentity) {
  const auto body = make_synthetic_body(5);
  const auto g = canonical_template(body);
  const auto out = animate(g, body.model, Shape::zero(body.model.shape_dim()), body.model.skeleton.canonical_pose);
  EXPECT_LT(max_distance(out.centers, g.centers), 1e-12);
  EXPECT_EQ(out.raw_scale, g.raw_scale);
  EXPECT_EQ(out.raw_opacity, g.raw_opacity);
  EXPECT_EQ(out.color, g.color);
  for (std::size_t i = 0; i < g.size(); ++i) {
    ASSERT_EQ(out.rotation[i].coeffs(), g.rotation[i].coeffs());
  }
}

TEST(Animate, RootRotationMovesCentersRigidly) {
  const auto body = make_synthetic_body(5);
  const Shape shape = Shape::zero(body.model.shape_dim());
  const auto g = canonical_template(body);
  const Eigen::Matrix3d r = Eigen::AngleAxisd(0.8, Eigen::Vector3d(0.2, 1.0, 0.1).normalized()).toRotationMatrix();
  const Pose target = with_rotation(body.model.skeleton.canonical_pose, 0, Eigen::Vector3d(0.2, 1.0, 0.1), 0.8);
  const auto out = animate(g, body.model, shape, target);
  const Eigen::Vector3d root = regress_joints(body.model, shape).positions[0];
  for (std::size_t i = 0; i < g.size(); ++i) {
    ASSERT_LT((out.centers[i] - (r * (g.centers[i] - root) + root)).norm(), 1e-9);
    ASSERT_EQ(out.covariance(i), g.covariance(i));
  }
}

TEST(Animate, RootTranslationShiftsCentersOnly) {
  const auto body = make_synthetic_body(5);
  const auto g = canonical_template(body);
  Pose target = body.model.skeleton.canonical_pose;
  target.root_translation = {0.1, -0.2, 0.3};
  const auto out = animate(g, body.model, Shape::zero(body.model.shape_dim()), target);
  for (std::size_t i = 0; i < g.size(); ++i) {
    ASSERT_LT((out.centers[i] - g.centers[i] - target.root_translation).norm(), 1e-12);
  }
  EXPECT_EQ(out.raw_scale, g.raw_scale);
  EXPECT_EQ(out.color, g.color);
}

TEST(Animate, EquivariantUnderRootMotion) {
  const auto body = make_synthetic_body(5);
  const Shape shape = Shape::zero(body.model.shape_dim());
  const auto g = canonical_template(body);
  Pose pose = with_rotation(body.model.skeleton.canonical_pose, sj::l_knee, Eigen::Vector3d::UnitX(), 0.9);
  pose = with_rotation(pose, sj::r_shoulder, Eigen::Vector3d::UnitY(), -0.4);
  const auto base = animate(g, body.model, shape, pose);
  const Eigen::Vector3d axis(0.0, 0.0, 1.0);
  const auto moved = animate(g, body.model, shape, with_rotation(pose, 0, axis, 1.1));
  const Eigen::Matrix3d r = Eigen::AngleAxisd(1.1, axis).toRotationMatrix();
  const Eigen::Vector3d root = regress_joints(body.model, shape).positions[0];
  for (std::size_t i = 0; i < g.size(); ++i) {
    ASSERT_LT((moved.centers[i] - (r * (base.centers[i] - root) + root)).norm(), 1e-9);
  }
}

TEST(Animate, PreservesCovarianceEigenvaluesByDefault) {
  const auto body = make_synthetic_body(5);
  const auto g = canonical_template(body);
  const Pose target = with_rotation(body.model.skeleton.canonical_pose, sj::spine2, Eigen::Vector3d::UnitX(), 0.5);
  const auto out = animate(g, body.model, Shape::zero(body.model.shape_dim()), target);
  EXPECT_EQ(out.size(), g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    ASSERT_EQ(out.covariance(i), g.covariance(i));
  }
}

TEST(Animate, RotateFramesFollowsRigidJoint) {
  const auto body = one_hot_body();
  const auto g = canonical_template(body);
  const Eigen::Quaterniond q(Eigen::AngleAxisd(0.6, Eigen::Vector3d::UnitY()));
  const Pose target = with_rotation(body.model.skeleton.canonical_pose, 0, Eigen::Vector3d::UnitY(), 0.6);
  const auto out = animate(g, body.model, Shape::zero(body.model.shape_dim()), target, true);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Eigen::Matrix3d expect = q.toRotationMatrix() * g.covariance(i) * q.toRotationMatrix().transpose();
    ASSERT_LT((out.covariance(i) - expect).norm(), 1e-9);
  }
}

TEST(Animate, RejectsUnboundGaussians) {
  const auto body = make_synthetic_body(5);
  GaussianSet g;
  g.push_back({0, 0, 0}, 0.0, {-3, -3, -3}, Eigen::Quaterniond::Identity(), {0.5, 0.5, 0.5});
  EXPECT_THROW(animate(g, body.model, Shape::zero(body.model.shape_dim()), body.model.skeleton.canonical_pose),
               InvariantError);
}

TEST(Polar, RecoversRotationFromStretch) {
  const Eigen::Matrix3d r = Eigen::AngleAxisd(1.2, Eigen::Vector3d(1, 2, 3).normalized()).toRotationMatrix();
  Eigen::Matrix3d s;
  s << 2.0, 0.3, 0.1, 0.3, 1.5, 0.2, 0.1, 0.2, 0.8;
  EXPECT_LT((polar_rotation(r * s) - r).norm(), 1e-12);
}

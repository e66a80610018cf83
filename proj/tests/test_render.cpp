#include <gtest/gtest.h>

#include "gsanim/error.hpp"
#include "gsanim/parallel.hpp"
#include "gsanim/render.hpp"
#include "support.hpp"

#include <algorithm>
#include <numbers>
#include <numeric>
#include <random>

using namespace gsanim;
using gsanim::testing::pinhole;
using gsanim::testing::random_scene;

namespace {

GaussianSet single(const Eigen::Vector3d& center, double opacity, double scale, const Eigen::Vector3d& color) {
  GaussianSet g;
  g.push_back(center, logit(opacity), Eigen::Vector3d::Constant(std::log(scale)), Eigen::Quaterniond::Identity(), color);
  return g;
}

template <typename T>
double linear_loss(const RenderOutput<T>& r, const ImageT<double>& wc, const ImageT<double>& wm) {
  double l = 0.0;
  for (std::size_t i = 0; i < r.color.size(); ++i) {
    l += wc.pixels[i] * r.color.pixels[i];
  }
  for (std::size_t i = 0; i < r.mask.size(); ++i) {
    l += wm.pixels[i] * r.mask.pixels[i];
  }
  return l;
}

ImageT<double> random_image(int w, int h, int c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ImageT<double> img(w, h, c);
  for (auto& v : img.pixels) {
    v = u(rng);
  }
  return img;
}

} // namespace

TEST(Projection, OnAxisSmallAngle) {
  const Camera cam = pinhole(256, 1000.0);
  const double d = 2.0, sigma = 0.02;
  const Projection p = project_gaussian({0, 0, d}, sigma * sigma * Eigen::Matrix3d::Identity(), cam);
  ASSERT_FALSE(p.culled);
  EXPECT_NEAR(p.mean.x(), cam.cx, 1e-12);
  EXPECT_NEAR(p.mean.y(), cam.cy, 1e-12);
  const double expect = std::pow(cam.fx * sigma / d, 2);
  EXPECT_NEAR(p.cov(0, 0), expect, 0.01 * expect);
  EXPECT_NEAR(p.cov(1, 1), expect, 0.01 * expect);
  EXPECT_NEAR(p.cov(0, 1), 0.0, 1e-12);
}

TEST(Projection, FocalLinearityAndCulling) {
  Camera cam = pinhole(64, 50.0);
  const Eigen::Vector3d c(0.3, -0.2, 2.0);
  const Eigen::Matrix3d cov = 0.01 * Eigen::Matrix3d::Identity();
  const auto a = project_gaussian(c, cov, cam);
  cam.fx *= 2.0;
  const auto b = project_gaussian(c, cov, cam);
  EXPECT_NEAR(b.mean.x() - cam.cx, 2.0 * (a.mean.x() - cam.cx), 1e-12);
  EXPECT_TRUE(project_gaussian({0, 0, -1}, cov, cam).culled);
}

TEST(Projection, RigidMotionEquivariance) {
  Camera cam = pinhole(64, 50.0);
  const Eigen::Vector3d c(0.3, -0.2, 2.0);
  Eigen::Matrix3d cov;
  cov << 0.02, 0.005, 0.0, 0.005, 0.01, 0.002, 0.0, 0.002, 0.03;
  const auto a = project_gaussian(c, cov, cam);
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  const Eigen::Matrix3d r = Eigen::AngleAxisd(0.8, Eigen::Vector3d(1, 1, 0).normalized()).toRotationMatrix();
  m.topLeftCorner<3, 3>() = r;
  m.topRightCorner<3, 1>() = Eigen::Vector3d(0.5, 1, -2);
  Camera moved = cam;
  moved.world_to_camera = cam.world_to_camera * m.inverse();
  const auto b = project_gaussian(r * c + m.topRightCorner<3, 1>(), r * cov * r.transpose(), moved);
  EXPECT_LT((a.mean - b.mean).norm(), 1e-10);
  EXPECT_LT((a.cov - b.cov).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Rasterize, EmptySetGivesBackground) {
  const Camera cam = pinhole(20, 20.0);
  const auto r = rasterize<float>(GaussianSet{}, cam, {0.2, 0.4, 0.6});
  for (int y = 0; y < 20; ++y) {
    for (int x = 0; x < 20; ++x) {
      EXPECT_FLOAT_EQ(r.color.at(x, y, 0), 0.2f);
      EXPECT_FLOAT_EQ(r.color.at(x, y, 2), 0.6f);
      EXPECT_EQ(r.mask.at(x, y), 0.0f);
    }
  }
}

TEST(Rasterize, SingleGaussianCenterPixel) {
  const Camera cam = pinhole(32, 32.0);
  const Eigen::Vector3d bg(0.1, 0.2, 0.3), c(0.9, 0.5, 0.2);
  for (double o : {0.1, 0.5, 0.83}) {
    const auto g = single({0, 0, 2}, o, 0.2, c);
    const auto r = rasterize<float>(g, cam, bg);
    EXPECT_NEAR(r.mask.at(16, 16), o, 1e-6);
    for (int k = 0; k < 3; ++k) {
      EXPECT_NEAR(r.color.at(16, 16, k), o * c[k] + (1 - o) * bg[k], 1e-6);
    }
  }
}

TEST(Rasterize, TwoCoincidentGaussians) {
  const Camera cam = pinhole(32, 32.0);
  const double o1 = 0.6, o2 = 0.7;
  const Eigen::Vector3d c1(1, 0, 0), c2(0, 1, 0), bg(0, 0, 1);
  GaussianSet g = single({0, 0, 2.0}, o1, 0.2, c1);
  g.push_back({0, 0, 2.0 + 1e-3}, logit(o2), Eigen::Vector3d::Constant(std::log(0.2 * (2.0 + 1e-3) / 2.0)),
              Eigen::Quaterniond::Identity(), c2);
  const auto r = rasterize<double>(g, cam, bg);
  EXPECT_NEAR(r.mask.at(16, 16), 1 - (1 - o1) * (1 - o2), 1e-6);
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(r.color.at(16, 16, k), o1 * c1[k] + (1 - o1) * o2 * c2[k] + (1 - o1) * (1 - o2) * bg[k], 1e-6);
  }
}

TEST(Rasterize, RangesAndMonotonicity) {
  std::mt19937_64 rng(5);
  const Camera cam = pinhole(48, 48.0);
  auto g = random_scene(40, rng);
  const auto r = rasterize<float>(g, cam, {0.5, 0.5, 0.5});
  for (float v : r.color.pixels) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
  for (float v : r.mask.pixels) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
  auto more = g;
  more.push_back({0.1, 0.1, 2.5}, 0.5, Eigen::Vector3d::Constant(std::log(0.2)), Eigen::Quaterniond::Identity(), {1, 1, 1});
  const auto r2 = rasterize<float>(more, cam, {0.5, 0.5, 0.5});
  for (std::size_t i = 0; i < r.mask.size(); ++i) {
    EXPECT_GE(r2.mask.pixels[i], r.mask.pixels[i] - 1e-6f);
  }
}

TEST(Rasterize, PermutationInvariantBitExact) {
  std::mt19937_64 rng(6);
  const Camera cam = pinhole(64, 64.0);
  auto g = random_scene(60, rng);
  // include exact depth ties
  g.centers[3].z() = g.centers[7].z();
  const auto ref = rasterize<float>(g, cam, {0.1, 0.1, 0.1});
  std::vector<std::size_t> idx(g.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(idx.begin(), idx.end(), rng);
    // shuffling changes the tie-break index too, so ties are restored by keeping 3 before 7
    auto p3 = std::find(idx.begin(), idx.end(), 3);
    auto p7 = std::find(idx.begin(), idx.end(), 7);
    if (p3 > p7) {
      std::iter_swap(p3, p7);
    }
    const auto r = rasterize<float>(g.select(idx), cam, {0.1, 0.1, 0.1});
    EXPECT_EQ(r.color.pixels, ref.color.pixels);
    EXPECT_EQ(r.mask.pixels, ref.mask.pixels);
  }
}

TEST(Rasterize, ThreadCountInvariantBitExact) {
  std::mt19937_64 rng(8);
  const Camera cam = pinhole(64, 64.0);
  const auto g = random_scene(80, rng);
  set_thread_count(1);
  const auto a = rasterize<float>(g, cam, {0, 0, 0});
  const auto ga = rasterize_backward(g, cam, a, image_cast<float>(random_image(64, 64, 3, rng)), ImageT<float>(64, 64, 1, 0.5f));
  set_thread_count(4);
  const auto b = rasterize<float>(g, cam, {0, 0, 0});
  std::mt19937_64 rng2(8);
  (void)random_scene(80, rng2);
  const auto gb = rasterize_backward(g, cam, b, image_cast<float>(random_image(64, 64, 3, rng2)), ImageT<float>(64, 64, 1, 0.5f));
  set_thread_count(0);
  EXPECT_EQ(a.color.pixels, b.color.pixels);
  EXPECT_EQ(a.mask.pixels, b.mask.pixels);
  EXPECT_EQ(ga.flatten(), gb.flatten());
}

TEST(RasterizeBackward, ZeroGradImagesGiveZero) {
  std::mt19937_64 rng(1);
  const Camera cam = pinhole(32, 32.0);
  const auto g = random_scene(10, rng);
  const auto r = rasterize<double>(g, cam, {0, 0, 0});
  const auto grads = rasterize_backward(g, cam, r, ImageT<double>(32, 32, 3), ImageT<double>(32, 32, 1));
  for (double v : grads.flatten()) {
    EXPECT_EQ(v, 0.0);
  }
}

TEST(RasterizeBackward, MissingWorkspaceThrows) {
  const Camera cam = pinhole(8, 8.0);
  RenderOutput<double> r;
  EXPECT_THROW(rasterize_backward(GaussianSet{}, cam, r, ImageT<double>(8, 8, 3), ImageT<double>(8, 8, 1)), InvariantError);
}

TEST(RasterizeBackward, SingleGaussianColorMatchesFiniteDifference) {
  const Camera cam = pinhole(32, 32.0);
  const auto g = single({0.05, -0.03, 2}, 0.7, 0.2, {0.3, 0.6, 0.9});
  const Eigen::Vector3d target(0.5, 0.5, 0.5), bg(0.1, 0.1, 0.1);
  auto loss = [&](const GaussianSet& s) {
    const auto r = rasterize<double>(s, cam, bg);
    double l = 0.0;
    for (int k = 0; k < 3; ++k) {
      l += std::pow(r.color.at(16, 16, k) - target[k], 2);
    }
    return l / 3.0;
  };
  const auto r = rasterize<double>(g, cam, bg);
  ImageT<double> gc(32, 32, 3);
  for (int k = 0; k < 3; ++k) {
    gc.at(16, 16, k) = 2.0 * (r.color.at(16, 16, k) - target[k]) / 3.0;
  }
  const auto grads = rasterize_backward(g, cam, r, gc, ImageT<double>(32, 32, 1));
  for (int k = 0; k < 3; ++k) {
    const double fd = gsanim::testing::central_difference(g, 11 + k, 1e-5, loss);
    EXPECT_NEAR(grads.color[0][k], fd, 1e-4 * std::abs(fd));
  }
}

TEST(RasterizeBackward, RandomScenesMatchFiniteDifferences) {
  std::mt19937_64 rng(77);
  RasterConfig cfg;
  cfg.extent_sigmas = 6.0;
  const Camera cam = pinhole(32, 32.0);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 5 + static_cast<int>(rng() % 46);
    const auto g = random_scene(n, rng);
    const Eigen::Vector3d bg(0.2, 0.3, 0.4);
    const auto wc = random_image(32, 32, 3, rng);
    const auto wm = random_image(32, 32, 1, rng);
    auto loss = [&](const GaussianSet& s) { return linear_loss(rasterize<double>(s, cam, bg, cfg), wc, wm); };
    const auto r = rasterize<double>(g, cam, bg, cfg);
    const auto analytic = rasterize_backward(g, cam, r, wc, wm).flatten();
    std::vector<double> fd(analytic.size());
    for (std::size_t i = 0; i < fd.size(); ++i) {
      fd[i] = gsanim::testing::central_difference(g, i, 1e-5, loss);
    }
    EXPECT_LT(gsanim::testing::relative_error(analytic, fd), 1e-3) << "trial " << trial << " n=" << n;
  }
}

TEST(FourViewRig, FrontCameraAndSharedIntrinsics) {
  const Eigen::Vector3d centroid(0.1, 0.9, -0.2);
  const auto rig = four_view_rig(0.8, 64, centroid);
  const Eigen::Vector3d p = rig[0].to_camera(centroid);
  EXPECT_NEAR(p.x(), 0.0, 1e-15);
  EXPECT_NEAR(p.y(), 0.0, 1e-15);
  EXPECT_NEAR(p.z(), 2.0, 1e-15);
  for (const auto& c : rig) {
    EXPECT_EQ(c.fx, rig[0].fx);
    EXPECT_EQ(c.fy, rig[0].fy);
    EXPECT_EQ(c.cx, rig[0].cx);
    EXPECT_EQ(c.cy, rig[0].cy);
    EXPECT_EQ(c.width, rig[0].width);
    EXPECT_NO_THROW(c.validate());
    const Eigen::Vector3d q = c.to_camera(centroid);
    EXPECT_NEAR(q.head<2>().norm(), 0.0, 1e-15);
    EXPECT_NEAR(q.z(), 2.0, 1e-15);
  }
  EXPECT_THROW(four_view_rig(0.0, 64), InvariantError);
}

TEST(FourViewRig, ClosedUnderQuarterTurn) {
  // rotating the scene by -90 degrees about y and viewing from camera k equals camera k+1 on the original
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  GaussianSet g;
  for (int i = 0; i < 30; ++i) {
    g.push_back({0.3 * u(rng), 0.3 * u(rng), 0.3 * u(rng)}, u(rng), Eigen::Vector3d::Constant(std::log(0.05) + 0.3 * u(rng)),
                Eigen::Quaterniond::Identity(), {0.5 + 0.4 * u(rng), 0.5, 0.5 - 0.4 * u(rng)});
  }
  GaussianSet rotated = g;
  for (auto& c : rotated.centers) {
    c = Eigen::Vector3d(-c.z(), c.y(), c.x());  // exact rotation by -90 degrees about y
  }
  const auto rig = four_view_rig(0.5, 64);
  for (int k = 0; k < 4; ++k) {
    const auto a = rasterize<float>(rotated, rig[k], {0, 0, 0});
    const auto b = rasterize<float>(g, rig[(k + 1) % 4], {0, 0, 0});
    EXPECT_EQ(a.color.pixels, b.color.pixels) << "view " << k;
    EXPECT_EQ(a.mask.pixels, b.mask.pixels) << "view " << k;
    EXPECT_GT(std::accumulate(a.mask.pixels.begin(), a.mask.pixels.end(), 0.0), 50.0);
  }
}

TEST(MeshGeometry, EmptyMesh) {
  const auto r = rasterize_mesh_geometry<float>(Mesh{}, pinhole(16, 16.0));
  for (float v : r.silhouette.pixels) {
    EXPECT_EQ(v, 0.0f);
  }
}

TEST(MeshGeometry, FullScreenQuad) {
  Mesh quad;
  quad.vertices = {{-5, -5, 1}, {5, -5, 1}, {5, 5, 1}, {-5, 5, 1}};
  quad.faces = {{0, 2, 1}, {0, 3, 2}};
  quad.normals.assign(4, Eigen::Vector3d(0, 0, -1));  // facing the camera
  const auto r = rasterize_mesh_geometry<float>(quad, pinhole(32, 32.0));
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      EXPECT_EQ(r.silhouette.at(x, y), 1.0f);
      EXPECT_FLOAT_EQ(r.normal_map.at(x, y, 0), 0.5f);
      EXPECT_FLOAT_EQ(r.normal_map.at(x, y, 1), 0.5f);
      EXPECT_FLOAT_EQ(r.normal_map.at(x, y, 2), 1.0f);
    }
  }
}

TEST(MeshGeometry, SphereSilhouetteArea) {
  Mesh sphere;
  const int rings = 128, segs = 256;
  sphere.vertices.emplace_back(0, 1, 0);
  for (int r = 1; r < rings; ++r) {
    const double th = std::numbers::pi * r / rings;
    for (int s = 0; s < segs; ++s) {
      const double ph = 2 * std::numbers::pi * s / segs;
      sphere.vertices.emplace_back(std::sin(th) * std::cos(ph), std::cos(th), std::sin(th) * std::sin(ph));
    }
  }
  sphere.vertices.emplace_back(0, -1, 0);
  const int last = static_cast<int>(sphere.vertices.size()) - 1;
  auto v = [&](int r, int s) { return 1 + (r - 1) * segs + (s % segs); };
  for (int s = 0; s < segs; ++s) {
    sphere.faces.push_back({0, v(1, s + 1), v(1, s)});
    for (int r = 1; r < rings - 1; ++r) {
      sphere.faces.push_back({v(r, s), v(r, s + 1), v(r + 1, s + 1)});
      sphere.faces.push_back({v(r, s), v(r + 1, s + 1), v(r + 1, s)});
    }
    sphere.faces.push_back({last, v(rings - 1, s), v(rings - 1, s + 1)});
  }
  sphere.recompute_normals();
  Camera cam = pinhole(256, 256.0);
  const double d = 4.0;
  cam.world_to_camera(2, 3) = d;
  const auto r = rasterize_mesh_geometry<double>(sphere, cam);
  double covered = 0.0;
  for (double s : r.silhouette.pixels) {
    covered += s;
  }
  // the silhouette of a sphere is a circle of angular radius asin(1/d)
  const double radius_px = cam.fx * std::tan(std::asin(1.0 / d));
  const double disc = std::numbers::pi * radius_px * radius_px;
  EXPECT_NEAR(covered / disc, 1.0, 0.02);
  // center normal faces the viewer
  EXPECT_NEAR(r.normal_map.at(128, 128, 2), 1.0, 1e-3);
}

TEST(NormalsFromDepth, FrontoParallelPlane) {
  GaussianSet g;
  for (int y = -8; y <= 8; ++y) {
    for (int x = -8; x <= 8; ++x) {
      g.push_back({0.05 * x, 0.05 * y, 2.0}, 4.0, {std::log(0.04), std::log(0.04), std::log(0.005)},
                  Eigen::Quaterniond::Identity(), {0.5, 0.5, 0.5});
    }
  }
  const Camera cam = pinhole(32, 32.0);
  const auto r = rasterize<double>(g, cam, {0, 0, 0});
  const auto n = normals_from_depth(r, cam);
  EXPECT_NEAR(n.at(16, 16, 0), 0.5, 1e-3);
  EXPECT_NEAR(n.at(16, 16, 1), 0.5, 1e-3);
  EXPECT_NEAR(n.at(16, 16, 2), 1.0, 1e-3);
}

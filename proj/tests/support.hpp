#pragma once

#include "gsanim/gaussians.hpp"
#include "gsanim/nnet/params.hpp"
#include "gsanim/refine.hpp"
#include "gsanim/render.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <vector>

namespace gsanim::testing {

// Camera at the origin looking down +z.
inline Camera pinhole(int size, double focal) {
  Camera c;
  c.fx = c.fy = focal;
  c.cx = c.cy = 0.5 * size;
  c.width = c.height = size;
  return c;
}

// Random Gaussians in front of `pinhole`, depths spread so that small perturbations keep the sort order.
inline GaussianSet random_scene(int n, std::mt19937_64& rng, double depth0 = 2.0, double depth_step = 0.05) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> c01(0.0, 1.0);
  GaussianSet g;
  for (int i = 0; i < n; ++i) {
    const double z = depth0 + depth_step * i + 0.01 * u(rng);
    Eigen::Quaterniond q(u(rng), u(rng), u(rng), u(rng));
    q.normalize();
    g.push_back({0.35 * z * u(rng), 0.35 * z * u(rng), z}, 1.5 * u(rng),
                Eigen::Vector3d(std::log(0.12) + 0.4 * u(rng), std::log(0.12) + 0.4 * u(rng), std::log(0.12) + 0.4 * u(rng)), q,
                {0.1 + 0.8 * c01(rng), 0.1 + 0.8 * c01(rng), 0.1 + 0.8 * c01(rng)});
  }
  return g;
}

// Flat parameter view (14 per Gaussian, same order as GaussianGrads::flatten).
inline double& param(GaussianSet& g, std::size_t index) {
  const std::size_t i = index / 14;
  const std::size_t k = index % 14;
  if (k < 3) return g.centers[i][k];
  if (k < 6) return g.raw_scale[i][k - 3];
  if (k == 6) return g.rotation[i].w();
  if (k < 10) return g.rotation[i].coeffs()[k - 7];
  if (k == 10) return g.raw_opacity[i];
  return g.color[i][k - 11];
}

// The rotation stays a unit quaternion under perturbation by renormalizing, which matches the
// normalization Jacobian of the backward pass.
template <typename Loss>
double central_difference(GaussianSet g, std::size_t index, double h, Loss&& loss) {
  const std::size_t k = index % 14;
  const std::size_t i = index / 14;
  auto eval = [&](double delta) {
    GaussianSet p = g;
    param(p, index) += delta;
    if (k >= 6 && k < 10) {
      p.rotation[i].normalize();
    }
    return loss(p);
  };
  return (eval(h) - eval(-h)) / (2.0 * h);
}

inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::max(std::sqrt(std::max(na, nb)), 1e-300);
  return std::sqrt(diff) / denom;
}

// Closed octahedron of the given radius centered at the origin.
inline Mesh octahedron(double r) {
  Mesh m;
  m.vertices = {{r, 0, 0}, {-r, 0, 0}, {0, r, 0}, {0, -r, 0}, {0, 0, r}, {0, 0, -r}};
  m.faces = {{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4}, {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}};
  m.recompute_normals();
  return m;
}

// n Gaussians inside a 0.4 m ball, seen by a 64-px conditioning rig. Truth views
// come from a perturbed copy rendered through `loss_resolution` cameras.
inline TrainSample<double> refine_scene(int n, std::mt19937_64& rng, int loss_resolution = 32) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> c01(0.1, 0.9);
  GaussianSet g;
  for (int i = 0; i < n; ++i) {
    Eigen::Quaterniond q(u(rng), u(rng), u(rng), u(rng));
    q.normalize();
    g.push_back(Eigen::Vector3d(u(rng), u(rng), u(rng)) * 0.25, 1.0 + u(rng),
                Eigen::Vector3d::Constant(std::log(0.06)) + 0.3 * Eigen::Vector3d(u(rng), u(rng), u(rng)), q,
                {c01(rng), c01(rng), c01(rng)});
  }
  TrainSample<double> s;
  s.input.coarse = g;
  s.input.target_body = octahedron(0.3);
  s.input.rig = four_view_rig(0.4, 64);
  const auto cams = four_view_rig(0.4, loss_resolution);
  s.loss_cameras.assign(cams.begin(), cams.end());
  GaussianSet truth = g;
  for (auto& c : truth.centers) {
    c += Eigen::Vector3d(u(rng), u(rng), u(rng)) * 0.01;
  }
  for (auto& c : truth.color) {
    c = (c + Eigen::Vector3d(u(rng), u(rng), u(rng)) * 0.05).cwiseMax(0.0).cwiseMin(1.0);
  }
  for (const auto& cam : s.loss_cameras) {
    s.truth.push_back(rasterize<double>(truth, cam, Eigen::Vector3d::Zero()));
  }
  return s;
}

// Network with every final layer randomized so gradients reach every parameter.
template <typename T>
nn::NetworkParams<T> live_params(std::uint64_t seed, double spread = 0.3) {
  auto p = nn::make_network_params<T>(seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> u(-spread, spread);
  for (const char* name : {"refine_heads.fc2.weight", "refine_heads.fc2.bias", "template_unet.out.weight"}) {
    for (auto& v : p.at(name).data()) {
      v = static_cast<T>(u(rng));
    }
  }
  return p;
}

} // namespace gsanim::testing

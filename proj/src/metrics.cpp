#include "gsanim/metrics.hpp"

#include "gsanim/error.hpp"
#include "gsanim/parallel.hpp"
#include "gsanim/spatial.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#ifndef GSANIM_BUILD_FLAGS
#define GSANIM_BUILD_FLAGS "unknown"
#endif

namespace gsanim {

namespace {

constexpr double kCm = 100.0;

void require_points(const std::vector<Eigen::Vector3d>& p, const char* what) {
  if (p.empty()) {
    throw InvariantError(std::string(what) + ": point set is empty");
  }
}

void require_oriented(const PointSet& s, const char* what) {
  require_points(s.points, what);
  if (s.normals.size() != s.points.size()) {
    throw InvariantError(std::string(what) + ": every point needs a normal");
  }
  for (const auto& n : s.normals) {
    if (!(std::abs(n.norm() - 1.0) <= 1e-6)) {
      throw InvariantError(std::string(what) + ": normals must be unit length");
    }
  }
}

// Nearest truth index and distance for every query point.
std::vector<Neighbor> nearest_all(const std::vector<Eigen::Vector3d>& queries, const PointGrid& grid) {
  std::vector<Neighbor> out(queries.size());
  const auto n = static_cast<long>(queries.size());
#pragma omp parallel for schedule(dynamic, 256)
  for (long i = 0; i < n; ++i) {
    out[i] = grid.nearest(queries[i]);
  }
  return out;
}

} // namespace

PointSet sample_surface(const Mesh& mesh, std::size_t count, std::uint64_t seed) {
  if (mesh.faces.empty()) {
    throw InvariantError("sample_surface: mesh has no faces");
  }
  std::vector<double> cumulative(mesh.faces.size());
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& t = mesh.faces[f];
    const Eigen::Vector3d e1 = mesh.vertices[t[1]] - mesh.vertices[t[0]];
    const Eigen::Vector3d e2 = mesh.vertices[t[2]] - mesh.vertices[t[0]];
    total += 0.5 * e1.cross(e2).norm();
    cumulative[f] = total;
  }
  if (!(total > 0.0)) {
    throw InvariantError("sample_surface: mesh has zero area");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PointSet out;
  out.points.reserve(count);
  out.normals.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double pick = u(rng) * total;
    const auto f = static_cast<std::size_t>(
        std::min<std::ptrdiff_t>(std::upper_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin(),
                                 static_cast<std::ptrdiff_t>(cumulative.size()) - 1));
    double a = u(rng), b = u(rng);
    if (a + b > 1.0) {
      a = 1.0 - a;
      b = 1.0 - b;
    }
    const auto& t = mesh.faces[f];
    out.points.push_back(mesh.vertices[t[0]] + a * (mesh.vertices[t[1]] - mesh.vertices[t[0]]) +
                         b * (mesh.vertices[t[2]] - mesh.vertices[t[0]]));
    const Eigen::Vector3d n = face_normal(mesh, f);
    out.normals.push_back(n.isZero(0.0) ? Eigen::Vector3d::UnitZ() : n);
  }
  return out;
}

PointSet gaussian_points(const GaussianSet& g) {
  PointSet out;
  out.points = g.centers;
  out.normals.reserve(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    int axis = 0;
    g.raw_scale[i].minCoeff(&axis);
    out.normals.push_back(g.rotation[i].normalized().toRotationMatrix().col(axis));
  }
  return out;
}

ChamferResult chamfer(const PointSet& pred, const PointSet& truth) {
  require_oriented(pred, "chamfer (pred)");
  require_oriented(truth, "chamfer (truth)");
  const PointGrid truth_grid(truth.points);
  const PointGrid pred_grid(pred.points);
  const auto p2s = nearest_all(pred.points, truth_grid);
  const auto s2p = nearest_all(truth.points, pred_grid);
  ChamferResult r;
  double nc_p = 0.0, nc_s = 0.0;
  for (std::size_t i = 0; i < p2s.size(); ++i) {
    r.cd_p2s += std::sqrt(p2s[i].squared_distance);
    nc_p += std::abs(pred.normals[i].dot(truth.normals[static_cast<std::size_t>(p2s[i].index)]));
  }
  for (std::size_t i = 0; i < s2p.size(); ++i) {
    r.cd_s2p += std::sqrt(s2p[i].squared_distance);
    nc_s += std::abs(truth.normals[i].dot(pred.normals[static_cast<std::size_t>(s2p[i].index)]));
  }
  r.cd_p2s = kCm * r.cd_p2s / static_cast<double>(p2s.size());
  r.cd_s2p = kCm * r.cd_s2p / static_cast<double>(s2p.size());
  r.nc = 0.5 * (nc_p / static_cast<double>(p2s.size()) + nc_s / static_cast<double>(s2p.size()));
  return r;
}

double fscore(const std::vector<Eigen::Vector3d>& pred, const std::vector<Eigen::Vector3d>& truth, double tau_cm) {
  require_points(pred, "fscore (pred)");
  require_points(truth, "fscore (truth)");
  if (!(tau_cm > 0.0)) {
    throw InvariantError("fscore: threshold must be positive");
  }
  const double tau2 = (tau_cm / kCm) * (tau_cm / kCm);
  auto fraction_within = [&](const std::vector<Eigen::Vector3d>& from, const std::vector<Eigen::Vector3d>& to) {
    const auto nn = nearest_all(from, PointGrid(to));
    const auto hits = std::count_if(nn.begin(), nn.end(), [&](const Neighbor& n) { return n.squared_distance <= tau2; });
    return static_cast<double>(hits) / static_cast<double>(from.size());
  };
  const double precision = fraction_within(pred, truth);
  const double recall = fraction_within(truth, pred);
  return precision + recall > 0.0 ? 200.0 * precision * recall / (precision + recall) : 0.0;
}

GeometryReport evaluate_geometry(const PointSet& pred, const PointSet& truth, double tau_cm) {
  const auto c = chamfer(pred, truth);
  GeometryReport r;
  r.cd_p2s = c.cd_p2s;
  r.cd_s2p = c.cd_s2p;
  r.nc = c.nc;
  r.fscore = fscore(pred.points, truth.points, tau_cm);
  r.tau_cm = tau_cm;
  r.pred_count = pred.points.size();
  r.truth_count = truth.points.size();
  return r;
}

template <typename T>
double psnr(const ImageT<T>& a, const ImageT<T>& b) {
  if (!a.same_shape(b) || a.pixels.empty()) {
    throw InvariantError("psnr: images must be nonempty and of the same shape");
  }
  double sse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.pixels[i]) - static_cast<double>(b.pixels[i]);
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(a.size());
  return mse < 1e-10 ? kPsnrCap : 10.0 * std::log10(1.0 / mse);
}

template <typename T>
double ssim(const ImageT<T>& a, const ImageT<T>& b) {
  if (!a.same_shape(b) || a.pixels.empty()) {
    throw InvariantError("ssim: images must be nonempty and of the same shape");
  }
  constexpr int kRadius = 5;
  constexpr double kSigma = 1.5;
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  std::array<double, 2 * kRadius + 1> kernel{};
  for (int i = -kRadius; i <= kRadius; ++i) {
    kernel[i + kRadius] = std::exp(-0.5 * i * i / (kSigma * kSigma));
  }
  const int w = a.width, h = a.height;
  const auto plane = static_cast<std::size_t>(w) * h;
  // separable truncated filter; each output is divided by the in-bounds weight
  auto blur = [&](const std::vector<double>& in) {
    std::vector<double> tmp(plane), out(plane);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double s = 0.0, ws = 0.0;
        for (int k = -kRadius; k <= kRadius; ++k) {
          const int xx = x + k;
          if (xx >= 0 && xx < w) {
            s += kernel[k + kRadius] * in[static_cast<std::size_t>(y) * w + xx];
            ws += kernel[k + kRadius];
          }
        }
        tmp[static_cast<std::size_t>(y) * w + x] = s / ws;
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double s = 0.0, ws = 0.0;
        for (int k = -kRadius; k <= kRadius; ++k) {
          const int yy = y + k;
          if (yy >= 0 && yy < h) {
            s += kernel[k + kRadius] * tmp[static_cast<std::size_t>(yy) * w + x];
            ws += kernel[k + kRadius];
          }
        }
        out[static_cast<std::size_t>(y) * w + x] = s / ws;
      }
    }
    return out;
  };
  double total = 0.0;
  for (int c = 0; c < a.channels; ++c) {
    std::vector<double> x(plane), y(plane), xx(plane), yy(plane), xy(plane);
    for (std::size_t i = 0; i < plane; ++i) {
      x[i] = static_cast<double>(a.pixels[i * a.channels + c]);
      y[i] = static_cast<double>(b.pixels[i * b.channels + c]);
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = blur(x), my = blur(y), sxx = blur(xx), syy = blur(yy), sxy = blur(xy);
    for (std::size_t i = 0; i < plane; ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cov = sxy[i] - mx[i] * my[i];
      total += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
               ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
  }
  return total / static_cast<double>(plane * static_cast<std::size_t>(a.channels));
}

template double psnr(const ImageT<float>&, const ImageT<float>&);
template double psnr(const ImageT<double>&, const ImageT<double>&);
template double ssim(const ImageT<float>&, const ImageT<float>&);
template double ssim(const ImageT<double>&, const ImageT<double>&);

Fingerprint machine_fingerprint() {
  Fingerprint f;
  std::ifstream cpuinfo("/proc/cpuinfo");
  std::string line;
  while (std::getline(cpuinfo, line)) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      f.cpu = colon == std::string::npos ? line : line.substr(colon + 2);
      break;
    }
  }
  if (f.cpu.empty()) {
    f.cpu = "unknown";
  }
  f.threads = thread_count();
#if defined(__clang__)
  f.compiler = "clang " __clang_version__;
#elif defined(__GNUC__)
  f.compiler = "gcc " __VERSION__;
#else
  f.compiler = "unknown";
#endif
  f.build_flags = GSANIM_BUILD_FLAGS;
  return f;
}

TimingReport bench(const std::string& stage, const std::function<void()>& fn, int warmup, int iters) {
  if (iters < 1 || warmup < 0) {
    throw InvariantError("bench: iterations must be >= 1 and warmup >= 0");
  }
  for (int i = 0; i < warmup; ++i) {
    fn();
  }
  std::vector<double> ms(static_cast<std::size_t>(iters));
  for (auto& t : ms) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    t = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  }
  TimingReport r;
  r.stage = stage;
  r.warmup = warmup;
  r.iterations = iters;
  r.mean_ms = std::accumulate(ms.begin(), ms.end(), 0.0) / iters;
  std::sort(ms.begin(), ms.end());
  auto rank = [&](double p) {
    const auto k = static_cast<std::size_t>(std::ceil(p * iters));
    return ms[std::clamp<std::size_t>(k, 1, ms.size()) - 1];
  };
  r.p50_ms = rank(0.50);
  r.p95_ms = rank(0.95);
  r.min_ms = ms.front();
  r.max_ms = ms.back();
  r.environment = machine_fingerprint();
  return r;
}

} // namespace gsanim

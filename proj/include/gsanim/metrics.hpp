#pragma once

#include "gsanim/gaussians.hpp"
#include "gsanim/image.hpp"
#include "gsanim/mesh.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace gsanim {

/// Oriented point sample in meters with unit normals.
struct PointSet {
  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector3d> normals;
};

/// Area-weighted surface samples with face normals, deterministic in seed.
PointSet sample_surface(const Mesh& mesh, std::size_t count, std::uint64_t seed);

/// Gaussian centers, each oriented along its shortest principal axis.
PointSet gaussian_points(const GaussianSet& g);

struct ChamferResult {
  double cd_p2s = 0.0;  // cm, mean over pred of the distance to truth
  double cd_s2p = 0.0;  // cm, mean over truth of the distance to pred
  double nc = 0.0;      // mean |cos| between matched normals, both directions averaged
};

ChamferResult chamfer(const PointSet& pred, const PointSet& truth);

inline constexpr double kDefaultFscoreTau = 1.0;  // cm

/// 200 P R / (P + R) with precision and recall at distance tau (cm).
double fscore(const std::vector<Eigen::Vector3d>& pred, const std::vector<Eigen::Vector3d>& truth,
              double tau_cm = kDefaultFscoreTau);

struct GeometryReport {
  double cd_p2s = 0.0;
  double cd_s2p = 0.0;
  double nc = 0.0;
  double fscore = 0.0;
  double tau_cm = kDefaultFscoreTau;
  std::size_t pred_count = 0;
  std::size_t truth_count = 0;
};

GeometryReport evaluate_geometry(const PointSet& pred, const PointSet& truth, double tau_cm = kDefaultFscoreTau);

inline constexpr double kPsnrCap = 99.0;

/// 10 log10(1 / MSE) over all entries, 99 dB when MSE < 1e-10.
template <typename T>
double psnr(const ImageT<T>& a, const ImageT<T>& b);

/// Gaussian-window SSIM (11x11, sigma 1.5, K1 0.01, K2 0.03, range 1). The
/// window is truncated at the border and renormalized; the result is the mean
/// over pixels and channels.
template <typename T>
double ssim(const ImageT<T>& a, const ImageT<T>& b);

struct ImageReport {
  double psnr = 0.0;
  double ssim = 0.0;
};

struct Fingerprint {
  std::string cpu;
  int threads = 1;
  std::string compiler;
  std::string build_flags;
};

Fingerprint machine_fingerprint();

struct TimingReport {
  std::string stage;
  int warmup = 0;
  int iterations = 0;
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double min_ms = 0.0;
  double max_ms = 0.0;
  Fingerprint environment;
};

/// Runs `fn` warmup times untimed, then iters times on the steady clock.
/// Percentiles use the nearest-rank rule.
TimingReport bench(const std::string& stage, const std::function<void()>& fn, int warmup, int iters);

} // namespace gsanim

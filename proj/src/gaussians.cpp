#include "gsanim/gaussians.hpp"

#include "gsanim/error.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace gsanim {

void GaussianSet::reserve(std::size_t n) {
  centers.reserve(n);
  raw_opacity.reserve(n);
  raw_scale.reserve(n);
  rotation.reserve(n);
  color.reserve(n);
}

void GaussianSet::push_back(const Eigen::Vector3d& c, double o, const Eigen::Vector3d& s,
                            const Eigen::Quaterniond& r, const Eigen::Vector3d& rgb) {
  centers.push_back(c);
  raw_opacity.push_back(o);
  raw_scale.push_back(s);
  rotation.push_back(r);
  color.push_back(rgb);
}

double GaussianSet::opacity(std::size_t i) const {
  return sigmoid(raw_opacity[i]);
}

Eigen::Matrix3d GaussianSet::covariance(std::size_t i) const {
  const Eigen::Matrix3d r = rotation[i].normalized().toRotationMatrix();
  const Eigen::Vector3d s2 = (2.0 * raw_scale[i].array()).exp();
  return r * s2.asDiagonal() * r.transpose();
}

GaussianSet GaussianSet::select(std::span<const std::size_t> indices) const {
  GaussianSet out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    out.push_back(centers[i], raw_opacity[i], raw_scale[i], rotation[i], color[i]);
  }
  if (weights) {
    out.weights = weights->select(indices);
  }
  return out;
}

void GaussianSet::validate() const {
  const std::size_t n = centers.size();
  if (raw_opacity.size() != n || raw_scale.size() != n || rotation.size() != n || color.size() != n) {
    throw InvariantError("gaussian set arrays differ in length");
  }
  if (weights && weights->rows() != n) {
    throw InvariantError("gaussian set weights do not match gaussian count");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!centers[i].allFinite() || !std::isfinite(raw_opacity[i]) || !raw_scale[i].allFinite() ||
        !rotation[i].coeffs().allFinite() || !color[i].allFinite()) {
      throw InvariantError("gaussian " + std::to_string(i) + " has a non-finite field");
    }
    if (!raw_scale[i].array().exp().allFinite()) {
      throw InvariantError("gaussian " + std::to_string(i) + " scale overflows");
    }
    if (std::abs(rotation[i].norm() - 1.0) > 1e-6) {
      throw InvariantError("gaussian " + std::to_string(i) + " rotation is not unit");
    }
    if ((color[i].array() < 0.0).any() || (color[i].array() > 1.0).any()) {
      throw InvariantError("gaussian " + std::to_string(i) + " color outside [0,1]");
    }
  }
}

GaussianSet prune(const GaussianSet& g, double opacity_threshold) {
  if (!(opacity_threshold >= 0.0 && opacity_threshold < 1.0)) {
    throw InvariantError("prune threshold must lie in [0,1)");
  }
  std::vector<std::size_t> keep;
  keep.reserve(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.opacity(i) >= opacity_threshold) {
      keep.push_back(i);
    }
  }
  return g.select(keep);
}

Eigen::Matrix3d rotation_from_wxyz(const Eigen::Vector4d& q) {
  const Eigen::Vector4d n = q / q.norm();
  return Eigen::Quaterniond(n[0], n[1], n[2], n[3]).toRotationMatrix();
}

GaussianSet densify(const GaussianSet& g, std::span<const double> scores, int top_k) {
  if (scores.size() != g.size()) {
    throw InvariantError("densify: score count does not match gaussian count");
  }
  if (top_k < 0 || static_cast<std::size_t>(top_k) > g.size()) {
    throw InvariantError("densify: top_k (" + std::to_string(top_k) + ") exceeds gaussian count (" +
                         std::to_string(g.size()) + ")");
  }
  for (double s : scores) {
    if (std::isnan(s)) {
      throw NumericError("densify: NaN score");
    }
  }
  std::vector<std::size_t> order(g.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<char> split(g.size(), 0);
  for (int k = 0; k < top_k; ++k) {
    split[order[static_cast<std::size_t>(k)]] = 1;
  }

  const double shrink = std::log(1.6);
  GaussianSet out;
  out.reserve(g.size() + static_cast<std::size_t>(top_k));
  std::vector<std::size_t> weight_rows;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!split[i]) {
      out.push_back(g.centers[i], g.raw_opacity[i], g.raw_scale[i], g.rotation[i], g.color[i]);
      weight_rows.push_back(i);
      continue;
    }
    Eigen::Index major = 0;
    g.raw_scale[i].maxCoeff(&major);
    const Eigen::Vector3d axis = g.rotation[i].normalized().toRotationMatrix().col(major);
    const Eigen::Vector3d offset = 0.5 * std::exp(g.raw_scale[i][major]) * axis;
    const Eigen::Vector3d child_scale = g.raw_scale[i].array() - shrink;
    out.push_back(g.centers[i] + offset, g.raw_opacity[i], child_scale, g.rotation[i], g.color[i]);
    out.push_back(g.centers[i] - offset, g.raw_opacity[i], child_scale, g.rotation[i], g.color[i]);
    weight_rows.push_back(i);
    weight_rows.push_back(i);
  }
  if (g.weights) {
    out.weights = g.weights->select(weight_rows);
  }
  return out;
}

} // namespace gsanim

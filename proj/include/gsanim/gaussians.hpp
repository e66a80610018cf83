#pragma once

#include "gsanim/skinning_weights.hpp"

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cmath>
#include <optional>
#include <span>
#include <vector>

namespace gsanim {

/// Structure-of-arrays set of 3D Gaussians. Opacity and scale are stored raw
/// (pre-sigmoid, log-meters); the covariance is derived as
/// R diag(exp(raw_scale))^2 R^T. Optional skinning weights bind each
/// Gaussian center to the body skeleton.
struct GaussianSet {
  std::vector<Eigen::Vector3d> centers;
  std::vector<double> raw_opacity;
  std::vector<Eigen::Vector3d> raw_scale;
  std::vector<Eigen::Quaterniond> rotation;
  std::vector<Eigen::Vector3d> color;
  std::optional<SkinningWeights> weights;

  std::size_t size() const {
    return centers.size();
  }
  bool empty() const {
    return centers.empty();
  }

  void reserve(std::size_t n);
  void push_back(const Eigen::Vector3d& center, double raw_opacity, const Eigen::Vector3d& raw_scale,
                 const Eigen::Quaterniond& rotation, const Eigen::Vector3d& color);

  double opacity(std::size_t i) const;
  Eigen::Vector3d scale(std::size_t i) const {
    return raw_scale[i].array().exp();
  }
  Eigen::Matrix3d covariance(std::size_t i) const;

  /// Copy of the listed Gaussians (weights follow when present).
  GaussianSet select(std::span<const std::size_t> indices) const;

  /// Throws InvariantError when array lengths disagree, a quaternion is not
  /// unit within 1e-6, a color leaves [0,1], or a value is non-finite.
  void validate() const;
};

inline double sigmoid(double x) {
  return 1.0 / (1.0 + std::exp(-x));
}
inline double logit(double p) {
  return std::log(p / (1.0 - p));
}

inline constexpr double kDefaultOpacityThreshold = 0.005;

/// Removes Gaussians with sigmoid(raw_opacity) < threshold, keeping order.
GaussianSet prune(const GaussianSet& g, double opacity_threshold = kDefaultOpacityThreshold);

/// Splits the top_k highest-scoring Gaussians (ties: lower index first) into
/// two children offset by +/- 0.5 * exp(raw_scale) along the rotated major
/// axis, with raw_scale reduced by log(1.6). Children take the parent's slot,
/// positive offset first.
GaussianSet densify(const GaussianSet& g, std::span<const double> scores, int top_k);

/// Rotation matrix of a possibly unnormalized quaternion (w, x, y, z).
Eigen::Matrix3d rotation_from_wxyz(const Eigen::Vector4d& q);

} // namespace gsanim

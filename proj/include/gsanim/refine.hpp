#pragma once

#include "gsanim/avatar.hpp"
#include "gsanim/nnet/loss.hpp"
#include "gsanim/nnet/params.hpp"
#include "gsanim/nnet/tensor.hpp"
#include "gsanim/render.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace gsanim {

inline constexpr int kMinRefineResolution = 64;

struct RefineConfig {
  double delta_max = 0.02;  // meters
  double opacity_threshold = kDefaultOpacityThreshold;
  int top_k = 0;
  RasterConfig raster;
};

struct RefineInput {
  GaussianSet coarse;
  Mesh target_body;
  std::array<Camera, 4> rig;
  AvatarStage stage = AvatarStage::coarse_target;
};

/// Per-Gaussian head outputs after bounding, one entry per coarse Gaussian.
struct Corrections {
  std::vector<Eigen::Vector3d> delta_center;  // applied displacement, |.| <= delta_max per axis
  std::vector<Eigen::Vector3d> delta_scale;   // clamped to +/- log 2
  std::vector<Eigen::Vector4d> delta_rotation;  // (w, x, y, z) increment on the identity
  std::vector<double> opacity;                  // raw opacity offset
  std::size_t size() const {
    return delta_center.size();
  }
};

struct RefineOutput {
  GaussianSet refined;
  Corrections corrections;
  std::vector<double> densify_scores;
  AvatarStage stage = AvatarStage::refined_target;
};

/// Step (a) of refinement: per-view geometry images of the coarse set and the
/// target body, plus the feature-map coordinates of every coarse center.
template <typename T>
struct RefineConditioning {
  std::array<ImageT<T>, 4> coarse_normals;
  std::array<ImageT<T>, 4> coarse_silhouette;
  std::array<ImageT<T>, 4> target_normals;
  std::array<ImageT<T>, 4> target_silhouette;
  std::array<std::vector<std::array<double, 2>>, 4> sample_coords;
};

template <typename T>
RefineConditioning<T> refine_conditioning(const RefineInput& input, const RefineConfig& config = {});

/// Steps (b)-(d): the [N, 12] head output tensor (graph attached to params).
template <typename T>
nn::Tensor<T> refine_head_outputs(const RefineConditioning<T>& cond, const nn::NetworkParams<T>& params,
                                  std::size_t count);

/// Step (e). Zero heads reproduce `coarse` exactly.
GaussianSet apply_corrections(const GaussianSet& coarse, const std::vector<double>& heads, double delta_max,
                              Corrections* corrections = nullptr, std::vector<double>* scores = nullptr);

/// Reverse of apply_corrections: gradient with respect to the head outputs.
std::vector<double> corrections_backward(const GaussianSet& coarse, const std::vector<double>& heads,
                                         double delta_max, const GaussianGrads& grads);

template <typename T>
RefineOutput refine(const RefineInput& input, const nn::NetworkParams<T>& params, const RefineConfig& config = {});

/// Model template deformed to `pose`, normals recomputed.
Mesh pose_target_body(const BodyModel& model, const Shape& shape, const Pose& pose);

// --- training ---------------------------------------------------------------

template <typename T>
struct TrainSample {
  RefineInput input;
  std::vector<RenderOutput<T>> truth;
  std::vector<Camera> loss_cameras;  // empty: the rig
  std::vector<Camera> cameras() const {
    return loss_cameras.empty() ? std::vector<Camera>(input.rig.begin(), input.rig.end()) : loss_cameras;
  }
};

struct TrainerConfig {
  double lr = 1e-3;
  int epochs = 200;
  std::uint64_t seed = 0;
  double delta_max = 0.02;
  double opacity_threshold = kDefaultOpacityThreshold;
  int top_k = 0;
  int resolution = 64;
  nn::ShareMode mode = nn::ShareMode::shared;
  Eigen::Vector3d background = Eigen::Vector3d::Zero();
  RasterConfig raster;
};

struct LossRecord {
  int step = 0;
  double mask_loss = 0.0;
  double color_loss = 0.0;
  double total = 0.0;
};

/// Multi-view loss of the corrected (pre-prune) set against the truth views.
/// With `backward`, parameter gradients are accumulated into params and the
/// per-Gaussian gradients of the corrected set are returned in `grads`.
template <typename T>
struct RefineLoss {
  nn::MultiviewLoss<T> loss;
  GaussianSet corrected;
  GaussianGrads grads;
};

template <typename T>
RefineLoss<T> refine_loss(const TrainSample<T>& sample, const RefineConditioning<T>& cond,
                          nn::NetworkParams<T>& params, const TrainerConfig& config, bool backward);

template <typename T>
struct TrainResult {
  nn::NetworkParams<T> params;
  std::vector<LossRecord> curve;  // loss before each update
  double final_loss = 0.0;       // loss of the first sample after training
};

/// Adam over the dataset for config.epochs passes in a seed-determined order.
/// Throws NumericError with a diagnostics summary when the loss is not finite.
template <typename T>
TrainResult<T> train_refiner(const std::vector<TrainSample<T>>& dataset, const nn::NetworkParams<T>& params,
                             const TrainerConfig& config);

} // namespace gsanim

#include "gsanim/refine.hpp"

#include "gsanim/error.hpp"
#include "gsanim/nnet/modules.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace gsanim {

namespace {

constexpr int kHeadWidth = 12;
const double kScaleClamp = std::log(2.0);

// Left-multiplication matrix: a (x) b = left_matrix(a) * b, quaternions as (w, x, y, z).
Eigen::Matrix4d left_matrix(const Eigen::Vector4d& a) {
  Eigen::Matrix4d m;
  m << a[0], -a[1], -a[2], -a[3],
       a[1], a[0], -a[3], a[2],
       a[2], a[3], a[0], -a[1],
       a[3], -a[2], a[1], a[0];
  return m;
}

Eigen::Vector4d wxyz(const Eigen::Quaterniond& q) {
  return {q.w(), q.x(), q.y(), q.z()};
}

void check_input(const RefineInput& input) {
  if (input.stage != AvatarStage::coarse_target) {
    throw InvariantError(std::string("refine: input set must be at stage coarse_target, got ") + to_string(input.stage));
  }
  if (input.target_body.vertices.empty() || input.target_body.faces.empty()) {
    throw InvariantError("refine: target body is not a posed mesh");
  }
  for (const auto& cam : input.rig) {
    cam.validate();
    if (cam.width < kMinRefineResolution || cam.height < kMinRefineResolution) {
      throw InvariantError("refine: rig resolution " + std::to_string(cam.width) + "x" + std::to_string(cam.height) +
                           " is below " + std::to_string(kMinRefineResolution));
    }
  }
}

} // namespace

template <typename T>
RefineConditioning<T> refine_conditioning(const RefineInput& input, const RefineConfig& config) {
  check_input(input);
  RefineConditioning<T> out;
  for (std::size_t v = 0; v < 4; ++v) {
    const Camera& cam = input.rig[v];
    const auto coarse = rasterize<T>(input.coarse, cam, Eigen::Vector3d::Zero(), config.raster);
    out.coarse_normals[v] = normals_from_depth(coarse, cam);
    out.coarse_silhouette[v] = coarse.mask;
    auto target = rasterize_mesh_geometry<T>(input.target_body, cam);
    out.target_normals[v] = std::move(target.normal_map);
    out.target_silhouette[v] = std::move(target.silhouette);
    auto& coords = out.sample_coords[v];
    coords.resize(input.coarse.size());
    for (std::size_t i = 0; i < input.coarse.size(); ++i) {
      const Eigen::Vector3d p = cam.to_camera(input.coarse.centers[i]);
      if (!(p.z() > cam.near)) {
        coords[i] = {-2.0, -2.0};  // outside every feature map
        continue;
      }
      const Eigen::Vector2d px = cam.project(p);
      // two stride-2 convolutions: feature cell j is centered on pixel 4j
      coords[i] = {px.x() / 4.0, px.y() / 4.0};
    }
  }
  return out;
}

template <typename T>
nn::Tensor<T> refine_head_outputs(const RefineConditioning<T>& cond, const nn::NetworkParams<T>& params,
                                  std::size_t count) {
  const int f = params.config.feature_channels;
  std::vector<nn::Tensor<T>> pairs;
  for (std::size_t v = 0; v < 4; ++v) {
    const auto c = nn::geo_encode(params, cond.coarse_normals[v], cond.coarse_silhouette[v],
                                  nn::FeatureTag::coarse_geometry);
    const auto t = nn::geo_encode(params, cond.target_normals[v], cond.target_silhouette[v],
                                  nn::FeatureTag::target_geometry);
    pairs.push_back(nn::concat<T>({c.tensor, t.tensor}));
  }
  const auto decoded = nn::unet_forward(params, "refine_unet", {nn::concat<T>(pairs), nn::FeatureTag::paired});
  nn::Tensor<T> acc;
  for (std::size_t v = 0; v < 4; ++v) {
    std::vector<std::array<double, 2>> coords(cond.sample_coords[v].begin(),
                                              cond.sample_coords[v].begin() + static_cast<long>(count));
    auto s = nn::bilinear_sample(nn::slice0(decoded.tensor, static_cast<int>(v) * f, f), coords);
    acc = acc.defined() ? nn::add(acc, s) : s;
  }
  return nn::refine_heads(params, nn::scale(acc, T(0.25)));
}

GaussianSet apply_corrections(const GaussianSet& coarse, const std::vector<double>& heads, double delta_max,
                              Corrections* corrections, std::vector<double>* scores) {
  const std::size_t n = coarse.size();
  if (heads.size() != n * kHeadWidth) {
    throw InvariantError("apply_corrections: expected " + std::to_string(n * kHeadWidth) + " head values");
  }
  GaussianSet out = coarse;
  if (corrections != nullptr) {
    *corrections = {};
    corrections->delta_center.resize(n);
    corrections->delta_scale.resize(n);
    corrections->delta_rotation.resize(n);
    corrections->opacity.resize(n);
  }
  if (scores != nullptr) {
    scores->resize(n);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double* h = heads.data() + i * kHeadWidth;
    Eigen::Vector3d dmu, ds;
    for (int k = 0; k < 3; ++k) {
      dmu[k] = delta_max * std::tanh(h[k]);
      ds[k] = std::clamp(h[3 + k], -kScaleClamp, kScaleClamp);
    }
    const Eigen::Vector4d dr(h[6], h[7], h[8], h[9]);
    out.centers[i] = coarse.centers[i] + dmu;
    out.raw_scale[i] = coarse.raw_scale[i] + ds;
    if (!dr.isZero(0.0)) {
      const Eigen::Vector4d p = left_matrix(wxyz(coarse.rotation[i])) * (Eigen::Vector4d(1.0, 0.0, 0.0, 0.0) + dr);
      const double len = p.norm();
      if (!(len > 1e-12)) {
        throw NumericError("apply_corrections: rotation increment cancels the rotation of Gaussian " +
                           std::to_string(i));
      }
      out.rotation[i] = Eigen::Quaterniond(p[0] / len, p[1] / len, p[2] / len, p[3] / len);
    }
    out.raw_opacity[i] = coarse.raw_opacity[i] + h[10];
    if (corrections != nullptr) {
      corrections->delta_center[i] = dmu;
      corrections->delta_scale[i] = ds;
      corrections->delta_rotation[i] = dr;
      corrections->opacity[i] = h[10];
    }
    if (scores != nullptr) {
      (*scores)[i] = h[11];
    }
  }
  return out;
}

std::vector<double> corrections_backward(const GaussianSet& coarse, const std::vector<double>& heads,
                                         double delta_max, const GaussianGrads& grads) {
  const std::size_t n = coarse.size();
  if (heads.size() != n * kHeadWidth || grads.size() != n) {
    throw InvariantError("corrections_backward: size mismatch");
  }
  std::vector<double> out(heads.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* h = heads.data() + i * kHeadWidth;
    double* g = out.data() + i * kHeadWidth;
    for (int k = 0; k < 3; ++k) {
      const double t = std::tanh(h[k]);
      g[k] = grads.center[i][k] * delta_max * (1.0 - t * t);
      g[3 + k] = std::abs(h[3 + k]) < kScaleClamp ? grads.raw_scale[i][k] : 0.0;
    }
    const Eigen::Matrix4d l = left_matrix(wxyz(coarse.rotation[i]));
    const Eigen::Vector4d p = l * Eigen::Vector4d(1.0 + h[6], h[7], h[8], h[9]);
    const double len = p.norm();
    const Eigen::Vector4d r = p / len;
    const Eigen::Vector4d& gr = grads.rotation[i];
    const Eigen::Vector4d gp = (gr - r * r.dot(gr)) / len;
    const Eigen::Vector4d gq = l.transpose() * gp;
    for (int k = 0; k < 4; ++k) {
      g[6 + k] = gq[k];
    }
    g[10] = grads.raw_opacity[i];
  }
  return out;
}

template <typename T>
RefineOutput refine(const RefineInput& input, const nn::NetworkParams<T>& params, const RefineConfig& config) {
  const auto cond = refine_conditioning<T>(input, config);
  RefineOutput out;
  std::vector<double> heads;
  if (!input.coarse.empty()) {
    const auto t = refine_head_outputs(cond, params, input.coarse.size());
    heads.assign(t.data().begin(), t.data().end());
  }
  std::vector<double> scores;
  const GaussianSet corrected = apply_corrections(input.coarse, heads, config.delta_max, &out.corrections, &scores);
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < corrected.size(); ++i) {
    if (corrected.opacity(i) >= config.opacity_threshold) {
      keep.push_back(i);
    }
  }
  const GaussianSet pruned = prune(corrected, config.opacity_threshold);
  for (std::size_t i : keep) {
    out.densify_scores.push_back(scores[i]);
  }
  out.refined = densify(pruned, out.densify_scores, config.top_k);
  out.densify_scores = std::move(scores);
  return out;
}

Mesh pose_target_body(const BodyModel& model, const Shape& shape, const Pose& pose) {
  Mesh m = pose_body(model, shape, pose);
  m.recompute_normals();
  return m;
}

template <typename T>
RefineLoss<T> refine_loss(const TrainSample<T>& sample, const RefineConditioning<T>& cond,
                          nn::NetworkParams<T>& params, const TrainerConfig& config, bool backward) {
  const GaussianSet& coarse = sample.input.coarse;
  const std::vector<Camera> cams = sample.cameras();
  if (sample.truth.size() != cams.size()) {
    throw InvariantError("refine_loss: " + std::to_string(sample.truth.size()) + " truth views for " +
                         std::to_string(cams.size()) + " cameras");
  }
  nn::Tensor<T> head_tensor;
  std::vector<double> heads;
  if (!coarse.empty()) {
    head_tensor = refine_head_outputs(cond, params, coarse.size());
    heads.assign(head_tensor.data().begin(), head_tensor.data().end());
  }
  RefineLoss<T> out;
  out.corrected = apply_corrections(coarse, heads, config.delta_max);
  std::vector<RenderOutput<T>> pred;
  for (const auto& cam : cams) {
    pred.push_back(rasterize<T>(out.corrected, cam, config.background, config.raster));
  }
  out.loss = nn::multiview_loss<T>(pred, sample.truth);
  out.grads = GaussianGrads(coarse.size());
  if (backward) {
    for (std::size_t v = 0; v < cams.size(); ++v) {
      out.grads += rasterize_backward(out.corrected, cams[v], pred[v], out.loss.grad_color[v], out.loss.grad_mask[v]);
    }
    if (head_tensor.defined()) {
      const auto seed = corrections_backward(coarse, heads, config.delta_max, out.grads);
      head_tensor.backward(std::vector<T>(seed.begin(), seed.end()));
    }
  }
  return out;
}

template <typename T>
TrainResult<T> train_refiner(const std::vector<TrainSample<T>>& dataset, const nn::NetworkParams<T>& params,
                             const TrainerConfig& config) {
  if (dataset.empty()) {
    throw InvariantError("train_refiner: dataset is empty");
  }
  if (config.epochs < 0 || !(config.lr > 0.0)) {
    throw InvariantError("train_refiner: epochs must be >= 0 and lr > 0");
  }
  RefineConfig rc;
  rc.delta_max = config.delta_max;
  rc.raster = config.raster;
  std::vector<RefineConditioning<T>> cond;
  for (const auto& s : dataset) {
    if (s.truth.size() != s.cameras().size()) {
      throw InvariantError("train_refiner: truth views do not match the cameras");
    }
    cond.push_back(refine_conditioning<T>(s.input, rc));
  }
  TrainResult<T> out{nn::transfer_weights(params, config.mode), {}, 0.0};
  nn::AdamState<T> adam;
  adam.lr = config.lr;
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(dataset.size());
  int step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t idx : order) {
      out.params.zero_grad();
      const auto r = refine_loss(dataset[idx], cond[idx], out.params, config, true);
      if (!std::isfinite(r.loss.total)) {
        std::ostringstream msg;
        msg << "train_refiner: non-finite loss at step " << step << " (sample " << idx << ", mask "
            << r.loss.mask << ", color " << r.loss.color << ", lr " << config.lr << ")";
        throw NumericError(msg.str());
      }
      out.curve.push_back({step, r.loss.mask, r.loss.color, r.loss.total});
      nn::optimizer_step(out.params, adam);
      ++step;
    }
  }
  out.final_loss = refine_loss(dataset.front(), cond.front(), out.params, config, false).loss.total;
  return out;
}

#define GSANIM_REFINE_INSTANTIATE(T)                                                                              \
  template RefineConditioning<T> refine_conditioning<T>(const RefineInput&, const RefineConfig&);                \
  template nn::Tensor<T> refine_head_outputs(const RefineConditioning<T>&, const nn::NetworkParams<T>&,          \
                                             std::size_t);                                                      \
  template RefineOutput refine(const RefineInput&, const nn::NetworkParams<T>&, const RefineConfig&);            \
  template RefineLoss<T> refine_loss(const TrainSample<T>&, const RefineConditioning<T>&, nn::NetworkParams<T>&, \
                                     const TrainerConfig&, bool);                                                \
  template TrainResult<T> train_refiner(const std::vector<TrainSample<T>>&, const nn::NetworkParams<T>&,         \
                                        const TrainerConfig&);

GSANIM_REFINE_INSTANTIATE(float)
GSANIM_REFINE_INSTANTIATE(double)

#undef GSANIM_REFINE_INSTANTIATE

} // namespace gsanim

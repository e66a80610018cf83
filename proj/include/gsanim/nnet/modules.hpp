#pragma once

#include "gsanim/image.hpp"
#include "gsanim/nnet/params.hpp"
#include "gsanim/nnet/tensor.hpp"

#include <string>

namespace gsanim::nn {

enum class FeatureTag { texture, pose, coarse_geometry, target_geometry, paired, decoded, raw };

const char* to_string(FeatureTag tag);

template <typename T>
struct FeatureMap {
  Tensor<T> tensor;  // [C, H, W]
  FeatureTag tag = FeatureTag::raw;

  int channels() const {
    return tensor.dim(0);
  }
  int height() const {
    return tensor.dim(1);
  }
  int width() const {
    return tensor.dim(2);
  }
};

// Image [H, W, C] (interleaved) -> tensor [C, H, W]
template <typename T, typename U>
Tensor<T> image_to_tensor(const ImageT<U>& image) {
  std::vector<T> data(image.pixels.size());
  const std::size_t plane = static_cast<std::size_t>(image.width) * image.height;
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < image.channels; ++c) {
        data[c * plane + static_cast<std::size_t>(y) * image.width + x] = static_cast<T>(image.at(x, y, c));
      }
    }
  }
  return Tensor<T>({image.channels, image.height, image.width}, std::move(data));
}

// 3-level encoder-decoder with skip connections. `which` is "template_unet" or "refine_unet".
// Inputs whose height or width is not a multiple of 4 are zero padded and the output cropped back.
template <typename T>
FeatureMap<T> unet_forward(const NetworkParams<T>& params, const std::string& which, const FeatureMap<T>& input);

// Shared geometry encoder: normals (3 channels) and silhouette (1 channel) -> features at 1/4 resolution.
template <typename T>
FeatureMap<T> geo_encode(const NetworkParams<T>& params, const Tensor<T>& normal_map, const Tensor<T>& silhouette,
                         FeatureTag tag);
template <typename T>
FeatureMap<T> geo_encode(const NetworkParams<T>& params, const ImageT<T>& normal_map, const ImageT<T>& silhouette,
                         FeatureTag tag);

// Texture features over the UV image [3, R, R].
template <typename T>
FeatureMap<T> uv_encode(const NetworkParams<T>& params, const Tensor<T>& texture);
// Pose features over the canonical position, normal and coverage maps [7, R, R].
template <typename T>
FeatureMap<T> pose_encode(const NetworkParams<T>& params, const Tensor<T>& geometry);

// Per-Gaussian correction MLP: [N, C_f] -> [N, 12].
template <typename T>
Tensor<T> refine_heads(const NetworkParams<T>& params, const Tensor<T>& features);

} // namespace gsanim::nn

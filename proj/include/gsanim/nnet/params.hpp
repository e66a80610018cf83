#pragma once

#include "gsanim/nnet/tensor.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace gsanim::nn {

inline constexpr const char* kParamsVersion = "gsanim-net-1";

struct NetworkConfig {
  int base_channels = 16;      // U-Net width at full resolution
  int feature_channels = 16;   // GeoEnc, uv/pose encoder and per-view decoder width
  int template_outputs = 14;   // offset(3), raw scale(3), rotation(4), opacity(1), color(3)
  int head_hidden = 32;
  int head_outputs = 12;       // d_mu(3), d_scale(3), d_rot(4), opacity(1), score(1)
  int views = 4;

  int template_inputs() const {
    return 2 * feature_channels;
  }
  int refine_inputs() const {
    return views * 2 * feature_channels;
  }
  int refine_outputs() const {
    return views * feature_channels;
  }
};

enum class ShareMode { shared, finetune_backward };

const char* to_string(ShareMode mode);

// Named parameter store. Tensors under the forward transform (uv_encoder, pose_encoder,
// template_unet) and the backward transform (geo_encoder, refine_unet, refine_heads) are
// linked by `share_map` (backward name -> forward name) for the layers the two U-Nets share.
template <typename T>
struct NetworkParams {
  NetworkConfig config;
  std::map<std::string, Tensor<T>> tensors;
  std::map<std::string, std::string> share_map;
  std::string version = kParamsVersion;
  ShareMode mode = ShareMode::shared;

  const Tensor<T>& at(const std::string& name) const;
  Tensor<T>& at(const std::string& name);
  bool contains(const std::string& name) const {
    return tensors.count(name) != 0;
  }
  void zero_grad();
  // Trainable tensors with distinct storage, in name order (aliases appear once, under their first name).
  std::vector<std::pair<std::string, Tensor<T>>> unique_trainable() const;
  // Number of trainable scalars counting shared storage once.
  std::size_t trainable_count() const;
  // Number of scalars with distinct storage, trainable or not.
  std::size_t parameter_count() const;
  void validate() const;
};

// Kaiming-uniform weights (bound sqrt(6 / fan_in)), zero biases, zero final layers for the
// template generator and the refine heads. Starts in shared mode.
template <typename T>
NetworkParams<T> make_network_params(std::uint64_t seed, const NetworkConfig& config = {});

// shared: backward names alias their forward tensors.
// finetune_backward: backward tensors become copies of the forward ones, and only the
// backward transform stays trainable.
template <typename T>
NetworkParams<T> transfer_weights(const NetworkParams<T>& params, ShareMode mode);

// Deep copy with precision conversion; aliasing and trainability are preserved.
template <typename To, typename From>
NetworkParams<To> cast_params(const NetworkParams<From>& params);

bool is_forward_name(const std::string& name);

template <typename T>
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::map<std::string, std::vector<double>> m;
  std::map<std::string, std::vector<double>> v;
};

// One Adam update over the unique trainable tensors using their accumulated gradients.
// Throws NumericError naming the tensor when a gradient is not finite.
template <typename T>
void optimizer_step(NetworkParams<T>& params, AdamState<T>& state);

} // namespace gsanim::nn

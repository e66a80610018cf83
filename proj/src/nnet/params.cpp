#include "gsanim/nnet/params.hpp"

#include "gsanim/error.hpp"

#include <cmath>
#include <random>
#include <set>

namespace gsanim::nn {

namespace {

struct LayerSpec {
  std::string name;
  enum Kind { conv, conv_s2, tconv, dense } kind;
  int in = 0;
  int out = 0;
  bool zero_init = false;
};

std::vector<LayerSpec> unet_layers(int in, int out, int base, bool zero_out) {
  return {
      {"enc1a", LayerSpec::conv, in, base},
      {"enc1b", LayerSpec::conv, base, base},
      {"down1", LayerSpec::conv_s2, base, 2 * base},
      {"enc2", LayerSpec::conv, 2 * base, 2 * base},
      {"down2", LayerSpec::conv_s2, 2 * base, 4 * base},
      {"bottleneck", LayerSpec::conv, 4 * base, 4 * base},
      {"up2", LayerSpec::tconv, 4 * base, 2 * base},
      {"dec2", LayerSpec::conv, 4 * base, 2 * base},
      {"up1", LayerSpec::tconv, 2 * base, base},
      {"dec1", LayerSpec::conv, 2 * base, base},
      {"out", LayerSpec::conv, base, out, zero_out},
  };
}

// U-Net layers whose shapes do not depend on the input or output width
const std::set<std::string>& shared_unet_layers() {
  static const std::set<std::string> s = {"enc1b", "down1", "enc2", "down2", "bottleneck", "up2", "dec2", "up1", "dec1"};
  return s;
}

template <typename T>
void add_layer(NetworkParams<T>& p, const std::string& prefix, const LayerSpec& l, std::mt19937_64& rng) {
  Dims wshape;
  int fan_in = 0;
  switch (l.kind) {
    case LayerSpec::conv:
    case LayerSpec::conv_s2:
      wshape = {l.out, l.in, 3, 3};
      fan_in = l.in * 9;
      break;
    case LayerSpec::tconv:
      wshape = {l.in, l.out, 2, 2};
      fan_in = l.in;
      break;
    case LayerSpec::dense:
      wshape = {l.out, l.in};
      fan_in = l.in;
      break;
  }
  Tensor<T> w(wshape, T(0), true);
  if (!l.zero_init) {
    const double bound = std::sqrt(6.0 / fan_in);
    std::uniform_real_distribution<double> u(-bound, bound);
    for (auto& v : w.data()) {
      v = static_cast<T>(u(rng));
    }
  }
  p.tensors.emplace(prefix + "." + l.name + ".weight", w);
  p.tensors.emplace(prefix + "." + l.name + ".bias", Tensor<T>({l.out}, T(0), true));
}

} // namespace

const char* to_string(ShareMode mode) {
  return mode == ShareMode::shared ? "shared" : "finetune_backward";
}

bool is_forward_name(const std::string& name) {
  return name.rfind("uv_encoder.", 0) == 0 || name.rfind("pose_encoder.", 0) == 0 ||
         name.rfind("template_unet.", 0) == 0;
}

template <typename T>
const Tensor<T>& NetworkParams<T>::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) {
    throw InvariantError("unknown network parameter '" + name + "'");
  }
  return it->second;
}

template <typename T>
Tensor<T>& NetworkParams<T>::at(const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) {
    throw InvariantError("unknown network parameter '" + name + "'");
  }
  return it->second;
}

template <typename T>
void NetworkParams<T>::zero_grad() {
  for (auto& [name, t] : tensors) {
    t.zero_grad();
  }
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> NetworkParams<T>::unique_trainable() const {
  std::vector<std::pair<std::string, Tensor<T>>> out;
  std::set<const Node<T>*> seen;
  for (const auto& [name, t] : tensors) {
    if (t.requires_grad() && seen.insert(t.id()).second) {
      out.emplace_back(name, t);
    }
  }
  return out;
}

template <typename T>
std::size_t NetworkParams<T>::trainable_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : unique_trainable()) {
    n += t.numel();
  }
  return n;
}

template <typename T>
std::size_t NetworkParams<T>::parameter_count() const {
  std::set<const Node<T>*> seen;
  std::size_t n = 0;
  for (const auto& [name, t] : tensors) {
    if (seen.insert(t.id()).second) {
      n += t.numel();
    }
  }
  return n;
}

template <typename T>
void NetworkParams<T>::validate() const {
  for (const auto& [bwd, fwd] : share_map) {
    const auto& b = at(bwd);
    const auto& f = at(fwd);
    if (b.shape() != f.shape()) {
      throw InvariantError("shared parameters '" + bwd + "' and '" + fwd + "' differ in shape");
    }
    if (mode == ShareMode::shared && b.id() != f.id()) {
      throw InvariantError("shared mode requires '" + bwd + "' to alias '" + fwd + "'");
    }
  }
  for (const auto& [name, t] : tensors) {
    for (T v : t.data()) {
      if (!std::isfinite(static_cast<double>(v))) {
        throw NumericError("network parameter '" + name + "' is not finite");
      }
    }
  }
}

template <typename T>
NetworkParams<T> make_network_params(std::uint64_t seed, const NetworkConfig& config) {
  NetworkParams<T> p;
  p.config = config;
  std::mt19937_64 rng(seed);
  const int f = config.feature_channels;
  for (const auto& l : {LayerSpec{"conv1", LayerSpec::conv, 3, f}, LayerSpec{"conv2", LayerSpec::conv, f, f}}) {
    add_layer(p, "uv_encoder", l, rng);
  }
  for (const auto& l : {LayerSpec{"conv1", LayerSpec::conv, 7, f}, LayerSpec{"conv2", LayerSpec::conv, f, f}}) {
    add_layer(p, "pose_encoder", l, rng);
  }
  for (const auto& l : unet_layers(config.template_inputs(), config.template_outputs, config.base_channels, true)) {
    add_layer(p, "template_unet", l, rng);
  }
  for (const auto& l : {LayerSpec{"conv1", LayerSpec::conv_s2, 4, f}, LayerSpec{"conv2", LayerSpec::conv_s2, f, f}}) {
    add_layer(p, "geo_encoder", l, rng);
  }
  for (const auto& l : unet_layers(config.refine_inputs(), config.refine_outputs(), config.base_channels, false)) {
    add_layer(p, "refine_unet", l, rng);
  }
  for (const auto& l : {LayerSpec{"fc1", LayerSpec::dense, f, config.head_hidden},
                        LayerSpec{"fc2", LayerSpec::dense, config.head_hidden, config.head_outputs, true}}) {
    add_layer(p, "refine_heads", l, rng);
  }
  for (const auto& layer : shared_unet_layers()) {
    for (const char* kind : {".weight", ".bias"}) {
      p.share_map["refine_unet." + layer + kind] = "template_unet." + layer + kind;
    }
  }
  return transfer_weights(p, ShareMode::shared);
}

template <typename T>
NetworkParams<T> transfer_weights(const NetworkParams<T>& params, ShareMode mode) {
  for (const auto& [bwd, fwd] : params.share_map) {
    if (!params.contains(bwd) || !params.contains(fwd)) {
      throw InvariantError("transfer_weights: missing counterpart for '" + bwd + "' -> '" + fwd + "'");
    }
  }
  // fresh storage so later updates never leak into the source params
  NetworkParams<T> out = cast_params<T, T>(params);
  if (mode == ShareMode::shared) {
    for (auto& [name, t] : out.tensors) {
      if (!t.requires_grad()) {
        t.set_requires_grad(true);
      }
    }
    for (const auto& [bwd, fwd] : params.share_map) {
      out.tensors[bwd] = out.tensors.at(fwd);
    }
  } else {
    for (const auto& [bwd, fwd] : params.share_map) {
      out.tensors[bwd] = out.tensors.at(fwd).clone();
    }
    for (auto& [name, t] : out.tensors) {
      t.set_requires_grad(!is_forward_name(name));
    }
  }
  out.mode = mode;
  out.validate();
  return out;
}

template <typename To, typename From>
NetworkParams<To> cast_params(const NetworkParams<From>& params) {
  NetworkParams<To> out;
  out.config = params.config;
  out.share_map = params.share_map;
  out.version = params.version;
  out.mode = params.mode;
  std::map<const Node<From>*, Tensor<To>> copies;
  for (const auto& [name, t] : params.tensors) {
    auto it = copies.find(t.id());
    if (it == copies.end()) {
      std::vector<To> data(t.data().begin(), t.data().end());
      it = copies.emplace(t.id(), Tensor<To>(t.shape(), std::move(data), t.requires_grad())).first;
    }
    out.tensors.emplace(name, it->second);
  }
  return out;
}

template <typename T>
void optimizer_step(NetworkParams<T>& params, AdamState<T>& state) {
  const auto trainable = params.unique_trainable();
  for (const auto& [name, t] : trainable) {
    for (T g : t.grad()) {
      if (!std::isfinite(static_cast<double>(g))) {
        throw NumericError("optimizer_step: non-finite gradient in '" + name + "'");
      }
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (auto [name, t] : trainable) {
    auto& m = state.m[name];
    auto& v = state.v[name];
    m.resize(t.numel(), 0.0);
    v.resize(t.numel(), 0.0);
    auto& data = t.data();
    const auto& grad = t.grad();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double g = static_cast<double>(grad[i]);
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double update = state.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + state.eps);
      data[i] = static_cast<T>(static_cast<double>(data[i]) - update);
    }
  }
}

template struct NetworkParams<float>;
template struct NetworkParams<double>;
template NetworkParams<float> make_network_params<float>(std::uint64_t, const NetworkConfig&);
template NetworkParams<double> make_network_params<double>(std::uint64_t, const NetworkConfig&);
template NetworkParams<float> transfer_weights(const NetworkParams<float>&, ShareMode);
template NetworkParams<double> transfer_weights(const NetworkParams<double>&, ShareMode);
template NetworkParams<float> cast_params<float, double>(const NetworkParams<double>&);
template NetworkParams<double> cast_params<double, float>(const NetworkParams<float>&);
template NetworkParams<float> cast_params<float, float>(const NetworkParams<float>&);
template NetworkParams<double> cast_params<double, double>(const NetworkParams<double>&);
template void optimizer_step(NetworkParams<float>&, AdamState<float>&);
template void optimizer_step(NetworkParams<double>&, AdamState<double>&);

} // namespace gsanim::nn

#include "gsanim/nnet/modules.hpp"

#include "gsanim/error.hpp"

namespace gsanim::nn {

const char* to_string(FeatureTag tag) {
  switch (tag) {
    case FeatureTag::texture:
      return "texture";
    case FeatureTag::pose:
      return "pose";
    case FeatureTag::coarse_geometry:
      return "coarse_geometry";
    case FeatureTag::target_geometry:
      return "target_geometry";
    case FeatureTag::paired:
      return "paired";
    case FeatureTag::decoded:
      return "decoded";
    case FeatureTag::raw:
      return "raw";
  }
  return "unknown";
}

namespace {

template <typename T>
Tensor<T> conv(const NetworkParams<T>& p, const std::string& name, const Tensor<T>& x, int stride = 1) {
  return conv2d(x, p.at(name + ".weight"), p.at(name + ".bias"), stride);
}

template <typename T>
Tensor<T> upconv(const NetworkParams<T>& p, const std::string& name, const Tensor<T>& x) {
  return conv_transpose2x(x, p.at(name + ".weight"), p.at(name + ".bias"));
}

} // namespace

template <typename T>
FeatureMap<T> unet_forward(const NetworkParams<T>& params, const std::string& which, const FeatureMap<T>& input) {
  if (which != "template_unet" && which != "refine_unet") {
    throw InvariantError("unet_forward: unknown network '" + which + "'");
  }
  const auto& x = input.tensor;
  if (x.rank() != 3) {
    throw InvariantError("unet_forward: input must be [C, H, W]");
  }
  const int expected = params.at(which + ".enc1a.weight").dim(1);
  if (x.dim(0) != expected) {
    throw InvariantError("unet_forward: " + which + " expects " + std::to_string(expected) + " channels, got " +
                         std::to_string(x.dim(0)));
  }
  const int h = x.dim(1), w = x.dim(2);
  const int hp = (h + 3) / 4 * 4, wp = (w + 3) / 4 * 4;
  const Tensor<T> in = (hp == h && wp == w) ? x : pad2d(x, hp, wp);
  const std::string n = which + ".";
  auto e1 = relu(conv(params, n + "enc1b", relu(conv(params, n + "enc1a", in))));
  auto e2 = relu(conv(params, n + "enc2", relu(conv(params, n + "down1", e1, 2))));
  auto bott = relu(conv(params, n + "bottleneck", relu(conv(params, n + "down2", e2, 2))));
  auto d2 = relu(conv(params, n + "dec2", concat<T>({relu(upconv(params, n + "up2", bott)), e2})));
  auto d1 = relu(conv(params, n + "dec1", concat<T>({relu(upconv(params, n + "up1", d2)), e1})));
  auto out = conv(params, n + "out", d1);
  if (hp != h || wp != w) {
    out = crop2d(out, h, w);
  }
  return {out, which == "refine_unet" ? FeatureTag::decoded : FeatureTag::raw};
}

template <typename T>
FeatureMap<T> geo_encode(const NetworkParams<T>& params, const Tensor<T>& normal_map, const Tensor<T>& silhouette,
                         FeatureTag tag) {
  if (normal_map.rank() != 3 || silhouette.rank() != 3 || normal_map.dim(0) != 3 || silhouette.dim(0) != 1) {
    throw InvariantError("geo_encode: expected [3, H, W] normals and [1, H, W] silhouette");
  }
  if (normal_map.dim(1) != silhouette.dim(1) || normal_map.dim(2) != silhouette.dim(2)) {
    throw InvariantError("geo_encode: normal map and silhouette resolutions differ");
  }
  auto x = concat<T>({normal_map, silhouette});
  auto f = conv(params, "geo_encoder.conv2", relu(conv(params, "geo_encoder.conv1", x, 2)), 2);
  return {f, tag};
}

template <typename T>
FeatureMap<T> geo_encode(const NetworkParams<T>& params, const ImageT<T>& normal_map, const ImageT<T>& silhouette,
                         FeatureTag tag) {
  return geo_encode(params, image_to_tensor<T>(normal_map), image_to_tensor<T>(silhouette), tag);
}

template <typename T>
FeatureMap<T> uv_encode(const NetworkParams<T>& params, const Tensor<T>& texture) {
  auto f = conv(params, "uv_encoder.conv2", relu(conv(params, "uv_encoder.conv1", texture)));
  return {f, FeatureTag::texture};
}

template <typename T>
FeatureMap<T> pose_encode(const NetworkParams<T>& params, const Tensor<T>& geometry) {
  auto f = conv(params, "pose_encoder.conv2", relu(conv(params, "pose_encoder.conv1", geometry)));
  return {f, FeatureTag::pose};
}

template <typename T>
Tensor<T> refine_heads(const NetworkParams<T>& params, const Tensor<T>& features) {
  auto h = tanh(linear(features, params.at("refine_heads.fc1.weight"), params.at("refine_heads.fc1.bias")));
  return linear(h, params.at("refine_heads.fc2.weight"), params.at("refine_heads.fc2.bias"));
}

#define GSANIM_MODULES_INSTANTIATE(T)                                                                            \
  template FeatureMap<T> unet_forward(const NetworkParams<T>&, const std::string&, const FeatureMap<T>&);        \
  template FeatureMap<T> geo_encode(const NetworkParams<T>&, const Tensor<T>&, const Tensor<T>&, FeatureTag);    \
  template FeatureMap<T> geo_encode(const NetworkParams<T>&, const ImageT<T>&, const ImageT<T>&, FeatureTag);    \
  template FeatureMap<T> uv_encode(const NetworkParams<T>&, const Tensor<T>&);                                   \
  template FeatureMap<T> pose_encode(const NetworkParams<T>&, const Tensor<T>&);                                 \
  template Tensor<T> refine_heads(const NetworkParams<T>&, const Tensor<T>&);

GSANIM_MODULES_INSTANTIATE(float)
GSANIM_MODULES_INSTANTIATE(double)

#undef GSANIM_MODULES_INSTANTIATE

} // namespace gsanim::nn

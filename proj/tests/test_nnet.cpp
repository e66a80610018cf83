#include "gsanim/error.hpp"
#include "gsanim/nnet/loss.hpp"
#include "gsanim/nnet/modules.hpp"
#include "gsanim/nnet/params.hpp"
#include "gsanim/nnet/tensor.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

using namespace gsanim;
using namespace gsanim::nn;

namespace {

template <typename T>
Tensor<T> random_tensor(Dims shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<T> d(numel(shape));
  for (auto& v : d) {
    v = static_cast<T>(u(rng));
  }
  return Tensor<T>(std::move(shape), std::move(d), true);
}

// Compares autograd against central differences for every input entry.
template <typename T>
double max_grad_error(std::vector<Tensor<T>> inputs, const std::function<Tensor<T>(std::vector<Tensor<T>>&)>& f,
                      double h) {
  for (auto& x : inputs) {
    x.zero_grad();
  }
  auto out = f(inputs);
  out.backward();
  double worst = 0.0;
  for (auto& x : inputs) {
    for (std::size_t i = 0; i < x.numel(); ++i) {
      const T saved = x.data()[i];
      x.data()[i] = static_cast<T>(saved + h);
      const double fp = static_cast<double>(f(inputs).data()[0]);
      x.data()[i] = static_cast<T>(saved - h);
      const double fm = static_cast<double>(f(inputs).data()[0]);
      x.data()[i] = saved;
      const double fd = (fp - fm) / (2.0 * h);
      const double an = static_cast<double>(x.grad()[i]);
      worst = std::max(worst, std::abs(fd - an) / std::max(1.0, std::abs(fd)));
    }
  }
  return worst;
}

using Fn = std::function<Tensor<double>(std::vector<Tensor<double>>&)>;

// Weighted sum so every output entry gets a distinct upstream gradient.
Tensor<double> probe(const Tensor<double>& y) {
  std::vector<double> w(y.numel());
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::sin(0.7 * static_cast<double>(i) + 0.3);
  }
  return sum(mul(y, Tensor<double>(y.shape(), w)));
}

} // namespace

TEST(Tensor, ConvGradientMatchesFiniteDifference) {
  std::mt19937_64 rng(1);
  for (int stride : {1, 2}) {
    Fn f = [stride](std::vector<Tensor<double>>& in) { return probe(conv2d(in[0], in[1], in[2], stride)); };
    const double err = max_grad_error<double>(
        {random_tensor<double>({2, 5, 6}, rng), random_tensor<double>({3, 2, 3, 3}, rng), random_tensor<double>({3}, rng)}, f,
        1e-6);
    EXPECT_LT(err, 1e-7) << "stride " << stride;
  }
}

TEST(Tensor, ConvOutputShapeRoundsUp) {
  std::mt19937_64 rng(2);
  auto x = random_tensor<double>({1, 7, 5}, rng);
  auto y = conv2d(x, random_tensor<double>({2, 1, 3, 3}, rng), random_tensor<double>({2}, rng), 2);
  EXPECT_EQ(y.shape(), (Dims{2, 4, 3}));
}

TEST(Tensor, TransposedConvGradientMatchesFiniteDifference) {
  std::mt19937_64 rng(3);
  Fn f = [](std::vector<Tensor<double>>& in) { return probe(conv_transpose2x(in[0], in[1], in[2])); };
  const double err = max_grad_error<double>(
      {random_tensor<double>({2, 3, 4}, rng), random_tensor<double>({2, 3, 2, 2}, rng), random_tensor<double>({3}, rng)}, f, 1e-6);
  EXPECT_LT(err, 1e-7);
}

TEST(Tensor, LinearAndActivationGradients) {
  std::mt19937_64 rng(4);
  Fn f = [](std::vector<Tensor<double>>& in) {
    auto h = linear(in[0], in[1], in[2]);
    return probe(add(tanh(h), sub(sigmoid(h), scale(relu(h), 0.5))));
  };
  const double err = max_grad_error<double>(
      {random_tensor<double>({4, 3}, rng), random_tensor<double>({5, 3}, rng), random_tensor<double>({5}, rng)}, f, 1e-6);
  EXPECT_LT(err, 1e-6);
}

TEST(Tensor, ShapeOpGradients) {
  std::mt19937_64 rng(5);
  Fn f = [](std::vector<Tensor<double>>& in) {
    auto c = concat<double>({in[0], in[1]});
    auto p = pad2d(c, 6, 7);
    auto s = slice0(p, 1, 2);
    auto r = reshape(crop2d(s, 4, 3), Dims{2, 12});
    return probe(r);
  };
  const double err =
      max_grad_error<double>({random_tensor<double>({1, 5, 5}, rng), random_tensor<double>({2, 5, 5}, rng)}, f, 1e-6);
  EXPECT_LT(err, 1e-8);
}

TEST(Tensor, BilinearSampleGradientAndValues) {
  std::mt19937_64 rng(6);
  const std::vector<std::array<double, 2>> coords = {{0.0, 0.0}, {1.25, 2.5}, {3.7, 0.2}, {-0.5, 1.0}, {4.5, 3.5}};
  Fn f = [&](std::vector<Tensor<double>>& in) { return probe(bilinear_sample(in[0], coords)); };
  const double err = max_grad_error<double>({random_tensor<double>({2, 4, 5}, rng)}, f, 1e-6);
  EXPECT_LT(err, 1e-8);

  Tensor<double> feat({1, 2, 2}, std::vector<double>{1.0, 2.0, 3.0, 4.0});
  auto s = bilinear_sample(feat, {{0.0, 0.0}, {1.0, 0.0}, {0.5, 0.5}, {-1.0, 0.0}});
  EXPECT_EQ(s.shape(), (Dims{4, 1}));
  EXPECT_DOUBLE_EQ(s.data()[0], 1.0);
  EXPECT_DOUBLE_EQ(s.data()[1], 2.0);
  EXPECT_DOUBLE_EQ(s.data()[2], 2.5);
  EXPECT_DOUBLE_EQ(s.data()[3], 0.0);
}

TEST(Tensor, FloatGradientsAgreeWithDouble) {
  std::mt19937_64 rng(7);
  auto xd = random_tensor<double>({2, 6, 6}, rng);
  auto wd = random_tensor<double>({3, 2, 3, 3}, rng);
  auto bd = random_tensor<double>({3}, rng);
  auto cast = [](const Tensor<double>& t) {
    std::vector<float> d(t.data().begin(), t.data().end());
    return Tensor<float>(t.shape(), d, true);
  };
  auto xf = cast(xd), wf = cast(wd), bf = cast(bd);
  sum(relu(conv2d(xd, wd, bd, 2))).backward();
  sum(relu(conv2d(xf, wf, bf, 2))).backward();
  for (std::size_t i = 0; i < wd.numel(); ++i) {
    EXPECT_NEAR(wf.grad()[i], wd.grad()[i], 1e-4 * std::max(1.0, std::abs(wd.grad()[i])));
  }
}

TEST(Tensor, MseOfIdenticalInputsHasZeroGradient) {
  std::mt19937_64 rng(8);
  auto x = random_tensor<double>({3, 4}, rng);
  auto y = mse(x, x);
  y.backward();
  EXPECT_EQ(y.data()[0], 0.0);
  for (double g : x.grad()) {
    EXPECT_EQ(g, 0.0);
  }
}

TEST(Tensor, ReluOnNegativeInputsHasZeroGradient) {
  Tensor<double> x({5}, std::vector<double>{-1.0, -0.5, -3.0, -1e-9, -7.0}, true);
  sum(relu(x)).backward();
  for (double g : x.grad()) {
    EXPECT_EQ(g, 0.0);
  }
}

TEST(Tensor, ShapeMismatchThrows) {
  Tensor<double> a({2, 3});
  Tensor<double> b({3, 2});
  EXPECT_THROW(add(a, b), InvariantError);
  EXPECT_THROW(mse(a, b), InvariantError);
  EXPECT_THROW(reshape(a, Dims{4}), InvariantError);
}

TEST(Modules, UnetPreservesSpatialSizeForAnyResolution) {
  const auto params = make_network_params<float>(11);
  for (int h = 30; h <= 34; ++h) {
    FeatureMap<float> in{Tensor<float>({params.config.template_inputs(), h, h + 1}, 0.25f), FeatureTag::paired};
    auto out = unet_forward(params, "template_unet", in);
    EXPECT_EQ(out.tensor.shape(), (Dims{params.config.template_outputs, h, h + 1}));
  }
}

TEST(Modules, TemplateGeneratorStartsAtZero) {
  const auto params = make_network_params<float>(12);
  std::mt19937_64 rng(12);
  FeatureMap<float> in{random_tensor<float>({params.config.template_inputs(), 16, 16}, rng), FeatureTag::paired};
  auto out = unet_forward(params, "template_unet", in);
  for (float v : out.tensor.data()) {
    EXPECT_EQ(v, 0.0f);
  }
  auto heads = refine_heads(params, random_tensor<float>({7, params.config.feature_channels}, rng));
  EXPECT_EQ(heads.shape(), (Dims{7, params.config.head_outputs}));
  for (float v : heads.data()) {
    EXPECT_EQ(v, 0.0f);
  }
}

TEST(Modules, UnetRejectsWrongChannels) {
  const auto params = make_network_params<float>(13);
  FeatureMap<float> in{Tensor<float>({3, 8, 8}), FeatureTag::raw};
  EXPECT_THROW(unet_forward(params, "template_unet", in), InvariantError);
  EXPECT_THROW(unet_forward(params, "nope", in), InvariantError);
}

TEST(Modules, GeoEncoderQuarterResolutionAndPure) {
  const auto params = make_network_params<double>(14);
  std::mt19937_64 rng(14);
  ImageT<double> normals(30, 22, 3), sil(30, 22, 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& v : normals.pixels) v = u(rng);
  for (auto& v : sil.pixels) v = u(rng);
  auto a = geo_encode(params, normals, sil, FeatureTag::coarse_geometry);
  auto b = geo_encode(params, normals, sil, FeatureTag::target_geometry);
  EXPECT_EQ(a.tensor.shape(), (Dims{params.config.feature_channels, 6, 8}));
  EXPECT_EQ(a.tensor.data(), b.tensor.data());
  EXPECT_EQ(a.tag, FeatureTag::coarse_geometry);
  EXPECT_EQ(b.tag, FeatureTag::target_geometry);
  EXPECT_THROW(geo_encode(params, normals, ImageT<double>(10, 10, 1), FeatureTag::raw), InvariantError);
}

TEST(Params, SharedModeAliasesForwardTensors) {
  auto params = make_network_params<float>(21);
  ASSERT_FALSE(params.share_map.empty());
  for (const auto& [bwd, fwd] : params.share_map) {
    EXPECT_EQ(params.at(bwd).id(), params.at(fwd).id()) << bwd;
  }
  const auto& [bwd, fwd] = *params.share_map.begin();
  params.at(fwd).data()[0] = 42.0f;
  EXPECT_EQ(params.at(bwd).data()[0], 42.0f);
}

TEST(Params, FinetuneCopiesValuesAndFreezesForward) {
  const auto shared = make_network_params<float>(22);
  auto ft = transfer_weights(shared, ShareMode::finetune_backward);
  for (const auto& [bwd, fwd] : ft.share_map) {
    EXPECT_NE(ft.at(bwd).id(), ft.at(fwd).id());
    EXPECT_EQ(ft.at(bwd).data(), ft.at(fwd).data());
  }
  std::map<std::string, std::vector<float>> before;
  for (const auto& [name, t] : ft.tensors) {
    before[name] = t.data();
  }
  // a loss touching both transforms; only the backward side may move
  std::mt19937_64 rng(22);
  FeatureMap<float> tin{random_tensor<float>({ft.config.template_inputs(), 8, 8}, rng), FeatureTag::paired};
  FeatureMap<float> rin{random_tensor<float>({ft.config.refine_inputs(), 8, 8}, rng), FeatureTag::paired};
  auto loss = add(sum(unet_forward(ft, "template_unet", tin).tensor), sum(unet_forward(ft, "refine_unet", rin).tensor));
  ft.zero_grad();
  loss.backward();
  AdamState<float> adam;
  adam.lr = 1e-2;
  optimizer_step(ft, adam);
  bool backward_moved = false;
  for (const auto& [name, t] : ft.tensors) {
    if (is_forward_name(name)) {
      EXPECT_EQ(t.data(), before[name]) << name;
    } else if (t.data() != before[name]) {
      backward_moved = true;
    }
  }
  EXPECT_TRUE(backward_moved);
  EXPECT_EQ(shared.at("template_unet.dec1.weight").data(), before.at("template_unet.dec1.weight"));
}

TEST(Params, SharingReducesParameterCount) {
  const auto shared = make_network_params<float>(23);
  const auto ft = transfer_weights(shared, ShareMode::finetune_backward);
  EXPECT_LT(shared.parameter_count(), ft.parameter_count());
}

TEST(Params, CastPreservesAliasing) {
  const auto f = make_network_params<float>(24);
  const auto d = cast_params<double>(f);
  for (const auto& [bwd, fwd] : d.share_map) {
    EXPECT_EQ(d.at(bwd).id(), d.at(fwd).id());
  }
  EXPECT_EQ(d.parameter_count(), f.parameter_count());
}

TEST(Params, InitializationIsDeterministic) {
  const auto a = make_network_params<float>(25);
  const auto b = make_network_params<float>(25);
  const auto c = make_network_params<float>(26);
  EXPECT_EQ(a.at("geo_encoder.conv1.weight").data(), b.at("geo_encoder.conv1.weight").data());
  EXPECT_NE(a.at("geo_encoder.conv1.weight").data(), c.at("geo_encoder.conv1.weight").data());
}

TEST(Adam, MinimizesQuadratic) {
  NetworkParams<double> p;
  p.tensors["x"] = Tensor<double>({1}, std::vector<double>{3.0}, true);
  AdamState<double> adam;
  adam.lr = 0.1;
  for (int i = 0; i < 200; ++i) {
    p.zero_grad();
    auto x = p.at("x");
    sum(mul(x, x)).backward();
    optimizer_step(p, adam);
  }
  EXPECT_LT(std::abs(p.at("x").data()[0]), 1e-2);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  auto p = make_network_params<float>(31);
  std::map<std::string, std::vector<float>> before;
  for (const auto& [name, t] : p.tensors) before[name] = t.data();
  p.zero_grad();
  AdamState<float> adam;
  optimizer_step(p, adam);
  for (const auto& [name, t] : p.tensors) {
    EXPECT_EQ(t.data(), before[name]) << name;
  }
}

TEST(Adam, NonFiniteGradientIsRejected) {
  NetworkParams<double> p;
  p.tensors["x"] = Tensor<double>({2}, std::vector<double>{1.0, 2.0}, true);
  p.zero_grad();
  p.at("x").grad()[1] = std::nan("");
  AdamState<double> adam;
  try {
    optimizer_step(p, adam);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("x"), std::string::npos);
  }
  EXPECT_EQ(p.at("x").data(), (std::vector<double>{1.0, 2.0}));
}

TEST(Loss, ClosedFormValuesAndGradients) {
  RenderOutput<double> pred, truth;
  pred.color = ImageT<double>(2, 2, 3, 0.5);
  pred.mask = ImageT<double>(2, 2, 1, 1.0);
  truth.color = ImageT<double>(2, 2, 3, 0.25);
  truth.mask = ImageT<double>(2, 2, 1, 0.0);
  std::vector<RenderOutput<double>> p{pred, pred}, t{truth, pred};
  auto l = multiview_loss<double>(p, t);
  EXPECT_DOUBLE_EQ(l.mask, 1.0);
  EXPECT_DOUBLE_EQ(l.color, 0.0625);
  EXPECT_DOUBLE_EQ(l.total, 1.0625);
  EXPECT_DOUBLE_EQ(l.per_view[1], 0.0);
  EXPECT_DOUBLE_EQ(l.grad_mask[0].pixels[0], 2.0 / 4.0);
  EXPECT_DOUBLE_EQ(l.grad_color[0].pixels[0], 2.0 * 0.25 / 12.0);
  EXPECT_DOUBLE_EQ(l.grad_color[1].pixels[0], 0.0);
}

TEST(Loss, RejectsMismatchedViews) {
  RenderOutput<double> a, b;
  a.color = ImageT<double>(2, 2, 3);
  a.mask = ImageT<double>(2, 2, 1);
  b.color = ImageT<double>(3, 2, 3);
  b.mask = ImageT<double>(3, 2, 1);
  std::vector<RenderOutput<double>> p{a}, t{b}, none;
  EXPECT_THROW(multiview_loss<double>(p, t), InvariantError);
  EXPECT_THROW(multiview_loss<double>(none, none), InvariantError);
}

#include "gsanim/nnet/loss.hpp"

#include "gsanim/error.hpp"

namespace gsanim::nn {

template <typename T>
MultiviewLoss<T> multiview_loss(std::span<const RenderOutput<T>> pred, std::span<const RenderOutput<T>> truth) {
  if (pred.empty()) {
    throw InvariantError("multiview_loss: no views");
  }
  if (pred.size() != truth.size()) {
    throw InvariantError("multiview_loss: prediction and truth view counts differ");
  }
  MultiviewLoss<T> out;
  for (std::size_t v = 0; v < pred.size(); ++v) {
    const auto& p = pred[v];
    const auto& t = truth[v];
    if (!p.color.same_shape(t.color) || !p.mask.same_shape(t.mask) || p.color.channels != 3 || p.mask.channels != 1) {
      throw InvariantError("multiview_loss: view " + std::to_string(v) + " resolution mismatch");
    }
    ImageT<T> gm(p.mask.width, p.mask.height, 1);
    ImageT<T> gc(p.color.width, p.color.height, 3);
    double lm = 0.0, lc = 0.0;
    const double nm = static_cast<double>(p.mask.size());
    const double nc = static_cast<double>(p.color.size());
    for (std::size_t i = 0; i < p.mask.size(); ++i) {
      const double d = static_cast<double>(p.mask.pixels[i]) - static_cast<double>(t.mask.pixels[i]);
      lm += d * d;
      gm.pixels[i] = static_cast<T>(2.0 * d / nm);
    }
    for (std::size_t i = 0; i < p.color.size(); ++i) {
      const double d = static_cast<double>(p.color.pixels[i]) - static_cast<double>(t.color.pixels[i]);
      lc += d * d;
      gc.pixels[i] = static_cast<T>(2.0 * d / nc);
    }
    lm /= nm;
    lc /= nc;
    out.mask += lm;
    out.color += lc;
    out.per_view.push_back(lm + lc);
    out.grad_mask.push_back(std::move(gm));
    out.grad_color.push_back(std::move(gc));
  }
  out.total = out.mask + out.color;
  return out;
}

template MultiviewLoss<float> multiview_loss(std::span<const RenderOutput<float>>, std::span<const RenderOutput<float>>);
template MultiviewLoss<double> multiview_loss(std::span<const RenderOutput<double>>, std::span<const RenderOutput<double>>);

} // namespace gsanim::nn

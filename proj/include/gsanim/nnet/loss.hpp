#pragma once

#include "gsanim/image.hpp"
#include "gsanim/render.hpp"

#include <span>
#include <vector>

namespace gsanim::nn {

// Sum over views of the mask MSE plus the color MSE. Each MSE is a mean over the view's
// pixels (and channels for color). Gradients are with respect to the predicted images.
template <typename T>
struct MultiviewLoss {
  double total = 0.0;
  double mask = 0.0;
  double color = 0.0;
  std::vector<double> per_view;
  std::vector<ImageT<T>> grad_color;
  std::vector<ImageT<T>> grad_mask;
};

template <typename T>
MultiviewLoss<T> multiview_loss(std::span<const RenderOutput<T>> pred, std::span<const RenderOutput<T>> truth);

} // namespace gsanim::nn

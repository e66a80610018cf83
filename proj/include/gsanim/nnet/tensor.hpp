#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace gsanim::nn {

using Dims = std::vector<int>;

std::size_t numel(const Dims& dims);
std::string to_string(const Dims& dims);

template <typename T>
struct Node {
  Dims shape;
  std::vector<T> data;
  std::vector<T> grad;  // allocated iff requires_grad
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node<T>>> parents;
  std::function<void(Node<T>&)> backward_fn;
};

// Handle to a node of a reverse-mode tape. Copies share storage.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Dims shape, T fill = T(0), bool requires_grad = false);
  Tensor(Dims shape, std::vector<T> data, bool requires_grad = false);

  bool defined() const {
    return node_ != nullptr;
  }
  const Dims& shape() const {
    return node_->shape;
  }
  int rank() const {
    return static_cast<int>(node_->shape.size());
  }
  int dim(int i) const {
    return node_->shape[static_cast<std::size_t>(i)];
  }
  std::size_t numel() const {
    return node_->data.size();
  }
  std::vector<T>& data() {
    return node_->data;
  }
  const std::vector<T>& data() const {
    return node_->data;
  }
  std::vector<T>& grad() {
    return node_->grad;
  }
  const std::vector<T>& grad() const {
    return node_->grad;
  }
  bool requires_grad() const {
    return node_->requires_grad;
  }
  void set_requires_grad(bool on);
  void zero_grad();

  // Seeds d(self)/d(self) = 1 (self must hold one element) and propagates.
  void backward();
  // Seeds the gradient of self with `seed` and propagates.
  void backward(const std::vector<T>& seed);

  Tensor detach() const;
  Tensor clone() const;  // detached deep copy
  const Node<T>* id() const {
    return node_.get();
  }
  const std::shared_ptr<Node<T>>& node() const {
    return node_;
  }

  // Builds a result node; the backward function receives the result node and adds into parents.
  static Tensor make(Dims shape, std::vector<T> data, std::vector<Tensor> parents,
                     std::function<void(Node<T>&)> backward_fn);

 private:
  std::shared_ptr<Node<T>> node_;
};

// 3x3 convolution, padding 1. x: [C, H, W]; w: [O, C, 3, 3]; b: [O]. Output [O, ceil(H/s), ceil(W/s)].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride = 1);
// 2x upsampling transposed convolution (kernel 2, stride 2). x: [C, H, W]; w: [C, O, 2, 2]; b: [O].
template <typename T>
Tensor<T> conv_transpose2x(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);
// x: [N, I]; w: [O, I]; b: [O] -> [N, O]
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T>
Tensor<T> tanh(const Tensor<T>& x);
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& x, T s);

// Concatenation along the leading dimension; trailing dimensions must agree.
template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& xs);
template <typename T>
Tensor<T> slice0(const Tensor<T>& x, int start, int count);
template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Dims shape);
// Zero pad [C, H, W] at the bottom/right to [C, h, w]; crop2d takes the top-left [C, h, w].
template <typename T>
Tensor<T> pad2d(const Tensor<T>& x, int h, int w);
template <typename T>
Tensor<T> crop2d(const Tensor<T>& x, int h, int w);

// Samples [C, H, W] at continuous (x, y) coordinates where integer values are cell centers.
// Taps outside the map contribute zero. Returns [N, C]. Coordinates are constants.
template <typename T>
Tensor<T> bilinear_sample(const Tensor<T>& feature, const std::vector<std::array<double, 2>>& coords);

template <typename T>
Tensor<T> mse(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sum(const Tensor<T>& x);

} // namespace gsanim::nn

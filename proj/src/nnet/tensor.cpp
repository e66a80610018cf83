#include "gsanim/nnet/tensor.hpp"

#include "gsanim/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

namespace gsanim::nn {

std::size_t numel(const Dims& dims) {
  std::size_t n = 1;
  for (int d : dims) {
    if (d < 0) {
      throw InvariantError("tensor dimension must be non-negative");
    }
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string to_string(const Dims& dims) {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    s += (i ? "," : "") + std::to_string(dims[i]);
  }
  return s + "]";
}

template <typename T>
Tensor<T>::Tensor(Dims shape, T fill, bool requires_grad) : node_(std::make_shared<Node<T>>()) {
  node_->data.assign(nn::numel(shape), fill);
  node_->shape = std::move(shape);
  set_requires_grad(requires_grad);
}

template <typename T>
Tensor<T>::Tensor(Dims shape, std::vector<T> data, bool requires_grad) : node_(std::make_shared<Node<T>>()) {
  if (nn::numel(shape) != data.size()) {
    throw InvariantError("tensor data length " + std::to_string(data.size()) + " does not match shape " +
                         to_string(shape));
  }
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  set_requires_grad(requires_grad);
}

template <typename T>
void Tensor<T>::set_requires_grad(bool on) {
  node_->requires_grad = on;
  if (on) {
    node_->grad.assign(node_->data.size(), T(0));
  } else {
    node_->grad.clear();
    node_->grad.shrink_to_fit();
  }
}

template <typename T>
void Tensor<T>::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), T(0));
}

template <typename T>
void Tensor<T>::backward() {
  if (numel() != 1) {
    throw InvariantError("backward() without a seed requires a single-element tensor, got " + to_string(shape()));
  }
  backward(std::vector<T>{T(1)});
}

template <typename T>
void Tensor<T>::backward(const std::vector<T>& seed) {
  if (seed.size() != numel()) {
    throw InvariantError("backward seed size mismatch");
  }
  if (!node_->requires_grad) {
    return;
  }
  // iterative post-order gives a topological order of the tape
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node<T>* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) {
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  for (std::size_t i = 0; i < seed.size(); ++i) {
    node_->grad[i] += seed[i];
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) {
      (*it)->backward_fn(**it);
    }
  }
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor(node_->shape, node_->data, false);
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  return Tensor(node_->shape, node_->data, false);
}

template <typename T>
Tensor<T> Tensor<T>::make(Dims shape, std::vector<T> data, std::vector<Tensor> parents,
                          std::function<void(Node<T>&)> backward_fn) {
  Tensor out(std::move(shape), std::move(data), false);
  bool any = false;
  for (const auto& p : parents) {
    any = any || p.requires_grad();
  }
  if (any) {
    out.set_requires_grad(true);
    for (auto& p : parents) {
      out.node_->parents.push_back(p.node_);
    }
    out.node_->backward_fn = std::move(backward_fn);
  }
  return out;
}

namespace {

template <typename T>
void require_rank(const Tensor<T>& x, int rank, const char* op) {
  if (!x.defined() || x.rank() != rank) {
    throw InvariantError(std::string(op) + ": expected rank " + std::to_string(rank) + " input, got " +
                         (x.defined() ? to_string(x.shape()) : std::string("undefined")));
  }
}

template <typename T>
void require_same(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw InvariantError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

template <typename T>
bool needs(const std::shared_ptr<Node<T>>& n) {
  return n->requires_grad;
}

template <typename T, typename F, typename G>
Tensor<T> unary(const Tensor<T>& x, F f, G df) {
  std::vector<T> out(x.numel());
  const auto& in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = f(in[i]);
  }
  auto px = x.node();
  return Tensor<T>::make(x.shape(), std::move(out), {x}, [px, df](Node<T>& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      px->grad[i] += self.grad[i] * df(px->data[i], self.data[i]);
    }
  });
}

} // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride) {
  require_rank(x, 3, "conv2d");
  require_rank(w, 4, "conv2d weight");
  require_rank(b, 1, "conv2d bias");
  const int c = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const int o = w.dim(0);
  if (w.dim(1) != c || w.dim(2) != 3 || w.dim(3) != 3 || b.dim(0) != o) {
    throw InvariantError("conv2d: weight " + to_string(w.shape()) + " incompatible with input " + to_string(x.shape()));
  }
  if (stride != 1 && stride != 2) {
    throw InvariantError("conv2d: stride must be 1 or 2");
  }
  const int ho = (h - 1) / stride + 1;
  const int wo = (wd - 1) / stride + 1;
  std::vector<T> out(static_cast<std::size_t>(o) * ho * wo);
  const T* in = x.data().data();
  const T* wt = w.data().data();
  const T* bs = b.data().data();
  const long plane = static_cast<long>(h) * wd;

#pragma omp parallel for schedule(static)
  for (int oc = 0; oc < o; ++oc) {
    T* dst = out.data() + static_cast<std::size_t>(oc) * ho * wo;
    std::fill(dst, dst + static_cast<std::size_t>(ho) * wo, bs[oc]);
    for (int ic = 0; ic < c; ++ic) {
      const T* src = in + ic * plane;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const T k = wt[((static_cast<std::size_t>(oc) * c + ic) * 3 + ky) * 3 + kx];
          for (int y = 0; y < ho; ++y) {
            const int iy = y * stride + ky - 1;
            if (iy < 0 || iy >= h) {
              continue;
            }
            const T* row = src + static_cast<long>(iy) * wd;
            T* drow = dst + static_cast<long>(y) * wo;
            const int x0 = (kx == 0) ? 1 : 0;
            int x1 = wo;
            while (x1 > 0 && (x1 - 1) * stride + kx - 1 >= wd) {
              --x1;
            }
            if (stride == 1) {
              const T* r = row + kx - 1;
              for (int xx = x0; xx < x1; ++xx) {
                drow[xx] += k * r[xx];
              }
            } else {
              for (int xx = x0; xx < x1; ++xx) {
                drow[xx] += k * row[xx * 2 + kx - 1];
              }
            }
          }
        }
      }
    }
  }

  auto px = x.node(), pw = w.node(), pb = b.node();
  return Tensor<T>::make({o, ho, wo}, std::move(out), {x, w, b}, [=](Node<T>& self) {
    const T* g = self.grad.data();
    if (needs(pb)) {
      for (int oc = 0; oc < o; ++oc) {
        T s = T(0);
        for (long i = 0; i < static_cast<long>(ho) * wo; ++i) {
          s += g[oc * ho * wo + i];
        }
        pb->grad[oc] += s;
      }
    }
    if (needs(pw)) {
#pragma omp parallel for schedule(static)
      for (int oc = 0; oc < o; ++oc) {
        const T* go = g + static_cast<std::size_t>(oc) * ho * wo;
        for (int ic = 0; ic < c; ++ic) {
          const T* src = px->data.data() + ic * plane;
          for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
              T s = T(0);
              for (int y = 0; y < ho; ++y) {
                const int iy = y * stride + ky - 1;
                if (iy < 0 || iy >= h) {
                  continue;
                }
                for (int xx = 0; xx < wo; ++xx) {
                  const int ix = xx * stride + kx - 1;
                  if (ix < 0 || ix >= wd) {
                    continue;
                  }
                  s += go[y * wo + xx] * src[static_cast<long>(iy) * wd + ix];
                }
              }
              pw->grad[((static_cast<std::size_t>(oc) * c + ic) * 3 + ky) * 3 + kx] += s;
            }
          }
        }
      }
    }
    if (needs(px)) {
#pragma omp parallel for schedule(static)
      for (int ic = 0; ic < c; ++ic) {
        T* gi = px->grad.data() + ic * plane;
        for (int oc = 0; oc < o; ++oc) {
          const T* go = g + static_cast<std::size_t>(oc) * ho * wo;
          for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
              const T k = pw->data[((static_cast<std::size_t>(oc) * c + ic) * 3 + ky) * 3 + kx];
              for (int y = 0; y < ho; ++y) {
                const int iy = y * stride + ky - 1;
                if (iy < 0 || iy >= h) {
                  continue;
                }
                for (int xx = 0; xx < wo; ++xx) {
                  const int ix = xx * stride + kx - 1;
                  if (ix < 0 || ix >= wd) {
                    continue;
                  }
                  gi[static_cast<long>(iy) * wd + ix] += k * go[y * wo + xx];
                }
              }
            }
          }
        }
      }
    }
  });
}

template <typename T>
Tensor<T> conv_transpose2x(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  require_rank(x, 3, "conv_transpose2x");
  require_rank(w, 4, "conv_transpose2x weight");
  require_rank(b, 1, "conv_transpose2x bias");
  const int c = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const int o = w.dim(1);
  if (w.dim(0) != c || w.dim(2) != 2 || w.dim(3) != 2 || b.dim(0) != o) {
    throw InvariantError("conv_transpose2x: weight " + to_string(w.shape()) + " incompatible with input " +
                         to_string(x.shape()));
  }
  const int ho = 2 * h, wo = 2 * wd;
  std::vector<T> out(static_cast<std::size_t>(o) * ho * wo);
  const auto& in = x.data();
  const auto& wt = w.data();
#pragma omp parallel for schedule(static)
  for (int oc = 0; oc < o; ++oc) {
    for (int y = 0; y < ho; ++y) {
      for (int xx = 0; xx < wo; ++xx) {
        T s = b.data()[oc];
        const int iy = y / 2, ix = xx / 2, ky = y % 2, kx = xx % 2;
        for (int ic = 0; ic < c; ++ic) {
          s += in[(static_cast<std::size_t>(ic) * h + iy) * wd + ix] *
               wt[((static_cast<std::size_t>(ic) * o + oc) * 2 + ky) * 2 + kx];
        }
        out[(static_cast<std::size_t>(oc) * ho + y) * wo + xx] = s;
      }
    }
  }
  auto px = x.node(), pw = w.node(), pb = b.node();
  return Tensor<T>::make({o, ho, wo}, std::move(out), {x, w, b}, [=](Node<T>& self) {
    const auto& g = self.grad;
    if (needs(pb)) {
      for (int oc = 0; oc < o; ++oc) {
        T s = T(0);
        for (long i = 0; i < static_cast<long>(ho) * wo; ++i) {
          s += g[static_cast<std::size_t>(oc) * ho * wo + i];
        }
        pb->grad[oc] += s;
      }
    }
    if (needs(pw)) {
#pragma omp parallel for schedule(static)
      for (int ic = 0; ic < c; ++ic) {
        for (int oc = 0; oc < o; ++oc) {
          for (int ky = 0; ky < 2; ++ky) {
            for (int kx = 0; kx < 2; ++kx) {
              T s = T(0);
              for (int iy = 0; iy < h; ++iy) {
                for (int ix = 0; ix < wd; ++ix) {
                  s += g[(static_cast<std::size_t>(oc) * ho + 2 * iy + ky) * wo + 2 * ix + kx] *
                       px->data[(static_cast<std::size_t>(ic) * h + iy) * wd + ix];
                }
              }
              pw->grad[((static_cast<std::size_t>(ic) * o + oc) * 2 + ky) * 2 + kx] += s;
            }
          }
        }
      }
    }
    if (needs(px)) {
#pragma omp parallel for schedule(static)
      for (int ic = 0; ic < c; ++ic) {
        for (int iy = 0; iy < h; ++iy) {
          for (int ix = 0; ix < wd; ++ix) {
            T s = T(0);
            for (int oc = 0; oc < o; ++oc) {
              for (int ky = 0; ky < 2; ++ky) {
                for (int kx = 0; kx < 2; ++kx) {
                  s += g[(static_cast<std::size_t>(oc) * ho + 2 * iy + ky) * wo + 2 * ix + kx] *
                       pw->data[((static_cast<std::size_t>(ic) * o + oc) * 2 + ky) * 2 + kx];
                }
              }
            }
            px->grad[(static_cast<std::size_t>(ic) * h + iy) * wd + ix] += s;
          }
        }
      }
    }
  });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  require_rank(x, 2, "linear");
  require_rank(w, 2, "linear weight");
  require_rank(b, 1, "linear bias");
  const int n = x.dim(0), in = x.dim(1), o = w.dim(0);
  if (w.dim(1) != in || b.dim(0) != o) {
    throw InvariantError("linear: weight " + to_string(w.shape()) + " incompatible with input " + to_string(x.shape()));
  }
  std::vector<T> out(static_cast<std::size_t>(n) * o);
  const auto& xd = x.data();
  const auto& wt = w.data();
#pragma omp parallel for schedule(static)
  for (int r = 0; r < n; ++r) {
    for (int k = 0; k < o; ++k) {
      T s = b.data()[k];
      for (int i = 0; i < in; ++i) {
        s += wt[static_cast<std::size_t>(k) * in + i] * xd[static_cast<std::size_t>(r) * in + i];
      }
      out[static_cast<std::size_t>(r) * o + k] = s;
    }
  }
  auto px = x.node(), pw = w.node(), pb = b.node();
  return Tensor<T>::make({n, o}, std::move(out), {x, w, b}, [=](Node<T>& self) {
    const auto& g = self.grad;
    if (needs(pb)) {
      for (int r = 0; r < n; ++r) {
        for (int k = 0; k < o; ++k) {
          pb->grad[k] += g[static_cast<std::size_t>(r) * o + k];
        }
      }
    }
    if (needs(pw)) {
#pragma omp parallel for schedule(static)
      for (int k = 0; k < o; ++k) {
        for (int i = 0; i < in; ++i) {
          T s = T(0);
          for (int r = 0; r < n; ++r) {
            s += g[static_cast<std::size_t>(r) * o + k] * px->data[static_cast<std::size_t>(r) * in + i];
          }
          pw->grad[static_cast<std::size_t>(k) * in + i] += s;
        }
      }
    }
    if (needs(px)) {
#pragma omp parallel for schedule(static)
      for (int r = 0; r < n; ++r) {
        for (int i = 0; i < in; ++i) {
          T s = T(0);
          for (int k = 0; k < o; ++k) {
            s += g[static_cast<std::size_t>(r) * o + k] * pw->data[static_cast<std::size_t>(k) * in + i];
          }
          px->grad[static_cast<std::size_t>(r) * in + i] += s;
        }
      }
    }
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary(x, [](T v) { return v > T(0) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary(x, [](T v) { return T(1) / (T(1) + std::exp(-v)); }, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  return unary(x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T s) {
  return unary(x, [s](T v) { return s * v; }, [s](T, T) { return s; });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same(a, b, "add");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = a.data()[i] + b.data()[i];
  }
  auto pa = a.node(), pb = b.node();
  return Tensor<T>::make(a.shape(), std::move(out), {a, b}, [=](Node<T>& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (needs(pa)) pa->grad[i] += self.grad[i];
      if (needs(pb)) pb->grad[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same(a, b, "sub");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = a.data()[i] - b.data()[i];
  }
  auto pa = a.node(), pb = b.node();
  return Tensor<T>::make(a.shape(), std::move(out), {a, b}, [=](Node<T>& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (needs(pa)) pa->grad[i] += self.grad[i];
      if (needs(pb)) pb->grad[i] -= self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same(a, b, "mul");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = a.data()[i] * b.data()[i];
  }
  auto pa = a.node(), pb = b.node();
  return Tensor<T>::make(a.shape(), std::move(out), {a, b}, [=](Node<T>& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (needs(pa)) pa->grad[i] += self.grad[i] * pb->data[i];
      if (needs(pb)) pb->grad[i] += self.grad[i] * pa->data[i];
    }
  });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& xs) {
  if (xs.empty()) {
    throw InvariantError("concat: no inputs");
  }
  Dims tail(xs[0].shape().begin() + 1, xs[0].shape().end());
  int lead = 0;
  std::vector<T> out;
  for (const auto& x : xs) {
    if (x.rank() < 1 || Dims(x.shape().begin() + 1, x.shape().end()) != tail) {
      throw InvariantError("concat: trailing shape mismatch " + to_string(x.shape()) + " vs " + to_string(xs[0].shape()));
    }
    lead += x.dim(0);
    out.insert(out.end(), x.data().begin(), x.data().end());
  }
  Dims shape{lead};
  shape.insert(shape.end(), tail.begin(), tail.end());
  std::vector<std::shared_ptr<Node<T>>> nodes;
  for (const auto& x : xs) {
    nodes.push_back(x.node());
  }
  return Tensor<T>::make(shape, std::move(out), xs, [nodes](Node<T>& self) {
    std::size_t off = 0;
    for (const auto& p : nodes) {
      if (needs(p)) {
        for (std::size_t i = 0; i < p->data.size(); ++i) {
          p->grad[i] += self.grad[off + i];
        }
      }
      off += p->data.size();
    }
  });
}

template <typename T>
Tensor<T> slice0(const Tensor<T>& x, int start, int count) {
  if (x.rank() < 1 || start < 0 || count < 0 || start + count > x.dim(0)) {
    throw InvariantError("slice0: range out of bounds for " + to_string(x.shape()));
  }
  const std::size_t inner = x.numel() / static_cast<std::size_t>(std::max(1, x.dim(0)));
  Dims shape = x.shape();
  shape[0] = count;
  std::vector<T> out(x.data().begin() + static_cast<long>(start * inner),
                     x.data().begin() + static_cast<long>((start + count) * inner));
  auto px = x.node();
  const std::size_t off = start * inner;
  return Tensor<T>::make(shape, std::move(out), {x}, [px, off](Node<T>& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      px->grad[off + i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Dims shape) {
  if (numel(shape) != x.numel()) {
    throw InvariantError("reshape: " + to_string(x.shape()) + " cannot become " + to_string(shape));
  }
  auto px = x.node();
  return Tensor<T>::make(std::move(shape), x.data(), {x}, [px](Node<T>& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      px->grad[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> pad2d(const Tensor<T>& x, int h, int w) {
  require_rank(x, 3, "pad2d");
  const int c = x.dim(0), h0 = x.dim(1), w0 = x.dim(2);
  if (h < h0 || w < w0) {
    throw InvariantError("pad2d: target smaller than input");
  }
  std::vector<T> out(static_cast<std::size_t>(c) * h * w, T(0));
  for (int k = 0; k < c; ++k) {
    for (int y = 0; y < h0; ++y) {
      std::copy_n(x.data().begin() + (static_cast<long>(k) * h0 + y) * w0, w0,
                  out.begin() + (static_cast<long>(k) * h + y) * w);
    }
  }
  auto px = x.node();
  return Tensor<T>::make({c, h, w}, std::move(out), {x}, [=](Node<T>& self) {
    for (int k = 0; k < c; ++k) {
      for (int y = 0; y < h0; ++y) {
        for (int xx = 0; xx < w0; ++xx) {
          px->grad[(static_cast<std::size_t>(k) * h0 + y) * w0 + xx] += self.grad[(static_cast<std::size_t>(k) * h + y) * w + xx];
        }
      }
    }
  });
}

template <typename T>
Tensor<T> crop2d(const Tensor<T>& x, int h, int w) {
  require_rank(x, 3, "crop2d");
  const int c = x.dim(0), h0 = x.dim(1), w0 = x.dim(2);
  if (h > h0 || w > w0) {
    throw InvariantError("crop2d: target larger than input");
  }
  std::vector<T> out(static_cast<std::size_t>(c) * h * w);
  for (int k = 0; k < c; ++k) {
    for (int y = 0; y < h; ++y) {
      std::copy_n(x.data().begin() + (static_cast<long>(k) * h0 + y) * w0, w, out.begin() + (static_cast<long>(k) * h + y) * w);
    }
  }
  auto px = x.node();
  return Tensor<T>::make({c, h, w}, std::move(out), {x}, [=](Node<T>& self) {
    for (int k = 0; k < c; ++k) {
      for (int y = 0; y < h; ++y) {
        for (int xx = 0; xx < w; ++xx) {
          px->grad[(static_cast<std::size_t>(k) * h0 + y) * w0 + xx] += self.grad[(static_cast<std::size_t>(k) * h + y) * w + xx];
        }
      }
    }
  });
}

template <typename T>
Tensor<T> bilinear_sample(const Tensor<T>& feature, const std::vector<std::array<double, 2>>& coords) {
  require_rank(feature, 3, "bilinear_sample");
  const int c = feature.dim(0), h = feature.dim(1), w = feature.dim(2);
  const int n = static_cast<int>(coords.size());
  struct Tap {
    long offset;  // -1 when outside
    T weight;
  };
  std::vector<std::array<Tap, 4>> taps(coords.size());
  for (int i = 0; i < n; ++i) {
    const double x = coords[static_cast<std::size_t>(i)][0];
    const double y = coords[static_cast<std::size_t>(i)][1];
    if (!std::isfinite(x) || !std::isfinite(y) || x <= -1.0 || y <= -1.0 || x >= w || y >= h) {
      taps[i] = {Tap{-1, T(0)}, Tap{-1, T(0)}, Tap{-1, T(0)}, Tap{-1, T(0)}};
      continue;
    }
    const long x0 = static_cast<long>(std::floor(x));
    const long y0 = static_cast<long>(std::floor(y));
    const double fx = x - static_cast<double>(x0);
    const double fy = y - static_cast<double>(y0);
    const long xs[4] = {x0, x0 + 1, x0, x0 + 1};
    const long ys[4] = {y0, y0, y0 + 1, y0 + 1};
    const double ws[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
    for (int t = 0; t < 4; ++t) {
      const bool inside = xs[t] >= 0 && xs[t] < w && ys[t] >= 0 && ys[t] < h;
      taps[i][t] = inside ? Tap{ys[t] * w + xs[t], static_cast<T>(ws[t])} : Tap{-1, T(0)};
    }
  }
  const long plane = static_cast<long>(h) * w;
  std::vector<T> out(static_cast<std::size_t>(n) * c, T(0));
  const auto& f = feature.data();
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    for (const auto& t : taps[i]) {
      if (t.offset < 0) {
        continue;
      }
      for (int k = 0; k < c; ++k) {
        out[static_cast<std::size_t>(i) * c + k] += t.weight * f[k * plane + t.offset];
      }
    }
  }
  auto pf = feature.node();
  return Tensor<T>::make({n, c}, std::move(out), {feature}, [pf, taps, n, c, plane](Node<T>& self) {
    for (int i = 0; i < n; ++i) {
      for (const auto& t : taps[i]) {
        if (t.offset < 0) {
          continue;
        }
        for (int k = 0; k < c; ++k) {
          pf->grad[k * plane + t.offset] += t.weight * self.grad[static_cast<std::size_t>(i) * c + k];
        }
      }
    }
  });
}

template <typename T>
Tensor<T> mse(const Tensor<T>& a, const Tensor<T>& b) {
  require_same(a, b, "mse");
  if (a.numel() == 0) {
    throw InvariantError("mse: empty tensors");
  }
  T s = T(0);
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const T d = a.data()[i] - b.data()[i];
    s += d * d;
  }
  const T inv = T(1) / static_cast<T>(a.numel());
  auto pa = a.node(), pb = b.node();
  return Tensor<T>::make({1}, {s * inv}, {a, b}, [=](Node<T>& self) {
    const T g = self.grad[0] * T(2) * inv;
    for (std::size_t i = 0; i < pa->data.size(); ++i) {
      const T d = pa->data[i] - pb->data[i];
      if (needs(pa)) pa->grad[i] += g * d;
      if (needs(pb)) pb->grad[i] -= g * d;
    }
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  const T s = std::accumulate(x.data().begin(), x.data().end(), T(0));
  auto px = x.node();
  return Tensor<T>::make({1}, {s}, {x}, [px](Node<T>& self) {
    for (auto& g : px->grad) {
      g += self.grad[0];
    }
  });
}

#define GSANIM_NN_INSTANTIATE(T)                                                                  \
  template class Tensor<T>;                                                                       \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int);           \
  template Tensor<T> conv_transpose2x(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);      \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                \
  template Tensor<T> relu(const Tensor<T>&);                                                      \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                   \
  template Tensor<T> tanh(const Tensor<T>&);                                                      \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> scale(const Tensor<T>&, T);                                                  \
  template Tensor<T> concat(const std::vector<Tensor<T>>&);                                       \
  template Tensor<T> slice0(const Tensor<T>&, int, int);                                          \
  template Tensor<T> reshape(const Tensor<T>&, Dims);                                             \
  template Tensor<T> pad2d(const Tensor<T>&, int, int);                                           \
  template Tensor<T> crop2d(const Tensor<T>&, int, int);                                          \
  template Tensor<T> bilinear_sample(const Tensor<T>&, const std::vector<std::array<double, 2>>&); \
  template Tensor<T> mse(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> sum(const Tensor<T>&);

GSANIM_NN_INSTANTIATE(float)
GSANIM_NN_INSTANTIATE(double)

#undef GSANIM_NN_INSTANTIATE

} // namespace gsanim::nn

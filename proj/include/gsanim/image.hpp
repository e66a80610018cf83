#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace gsanim {

/// Row-major, channel-interleaved image. Values are nominally in [0,1].
template <typename T>
struct ImageT {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<T> pixels;

  ImageT() = default;
  ImageT(int w, int h, int c, T fill = T(0))
      : width(w), height(h), channels(c), pixels(static_cast<std::size_t>(w) * h * c, fill) {}

  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  T& at(int x, int y, int c = 0) {
    return pixels[index(x, y, c)];
  }
  const T& at(int x, int y, int c = 0) const {
    return pixels[index(x, y, c)];
  }
  std::size_t size() const {
    return pixels.size();
  }
  bool same_shape(const ImageT& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }

  friend bool operator==(const ImageT&, const ImageT&) = default;
};

using Image = ImageT<float>;

template <typename To, typename From>
ImageT<To> image_cast(const ImageT<From>& in) {
  ImageT<To> out;
  out.width = in.width;
  out.height = in.height;
  out.channels = in.channels;
  out.pixels.resize(in.pixels.size());
  std::transform(in.pixels.begin(), in.pixels.end(), out.pixels.begin(),
                 [](From v) { return static_cast<To>(v); });
  return out;
}

} // namespace gsanim

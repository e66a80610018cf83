#pragma once

#include "gsanim/error.hpp"
#include "gsanim/io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>

namespace gsanim::io::detail {

class Reader {
 public:
  explicit Reader(ByteView bytes, std::size_t pos = 0) : bytes_(bytes), pos_(pos) {}

  std::size_t pos() const {
    return pos_;
  }
  std::size_t remaining() const {
    return bytes_.size() - pos_;
  }
  void require(std::size_t n, const char* what) const {
    if (n > remaining()) {
      throw AssetError(AssetErrorKind::bounds, pos_,
                       std::string("unexpected end of data reading ") + what);
    }
  }
  template <typename U>
  U read_le(const char* what) {
    static_assert(std::is_integral_v<U>);
    require(sizeof(U), what);
    std::make_unsigned_t<U> v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<std::make_unsigned_t<U>>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += sizeof(U);
    return static_cast<U>(v);
  }
  float read_f32(const char* what) {
    return std::bit_cast<float>(read_le<std::uint32_t>(what));
  }
  double read_f64(const char* what) {
    return std::bit_cast<double>(read_le<std::uint64_t>(what));
  }
  std::string read_string(std::size_t n, const char* what) {
    require(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void skip(std::size_t n, const char* what) {
    require(n, what);
    pos_ += n;
  }

 private:
  ByteView bytes_;
  std::size_t pos_;
};

template <typename U>
void put_le(Bytes& out, U value) {
  auto v = static_cast<std::make_unsigned_t<U>>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

inline void put_f32(Bytes& out, float v) {
  put_le(out, std::bit_cast<std::uint32_t>(v));
}

inline void put_text(Bytes& out, std::string_view s) {
  out.insert(out.end(), s.begin(), s.end());
}

} // namespace gsanim::io::detail

#include "bytes.hpp"

#include "json.hpp"

#include <png.h>

#include <cmath>

namespace gsanim::io {

namespace {

std::uint32_t png_format(int channels) {
  switch (channels) {
    case 1:
      return PNG_FORMAT_GRAY;
    case 3:
      return PNG_FORMAT_RGB;
    case 4:
      return PNG_FORMAT_RGBA;
    default:
      throw InvariantError("png supports 1, 3 or 4 channels, got " + std::to_string(channels));
  }
}

} // namespace

Image parse_png(ByteView bytes) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()) == 0) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw AssetError(AssetErrorKind::syntax, 0, "png: " + msg);
  }
  int channels = 1;
  if (img.format & PNG_FORMAT_FLAG_COLOR) channels = 3;
  if (img.format & PNG_FORMAT_FLAG_ALPHA) channels = 4;  // gray+alpha expands to RGBA
  img.format = png_format(channels);
  if (img.width > 16384 || img.height > 16384) {
    png_image_free(&img);
    throw AssetError(AssetErrorKind::bounds, 0, "png dimensions exceed 16384");
  }
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr) == 0) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw AssetError(AssetErrorKind::syntax, 0, "png: " + msg);
  }
  Image out(static_cast<int>(img.width), static_cast<int>(img.height), channels);
  for (std::size_t i = 0; i < buf.size(); ++i) out.pixels[i] = static_cast<float>(buf[i]) / 255.0f;
  return out;
}

Bytes format_png(const Image& image) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = png_format(image.channels);
  if (image.width < 1 || image.height < 1 || image.size() != PNG_IMAGE_SIZE(img)) {
    throw InvariantError("format_png: image buffer does not match its dimensions");
  }
  std::vector<std::uint8_t> buf(image.size());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    const float v = image.pixels[i];
    const float c = std::isfinite(v) ? std::clamp(v, 0.0f, 1.0f) : 0.0f;
    buf[i] = static_cast<std::uint8_t>(std::lround(c * 255.0f));
  }
  png_alloc_size_t size = 0;
  if (png_image_write_to_memory(&img, nullptr, &size, 0, buf.data(), 0, nullptr) == 0) {
    throw AssetError(AssetErrorKind::io, 0, std::string("png: ") + img.message);
  }
  Bytes out(size);
  if (png_image_write_to_memory(&img, out.data(), &size, 0, buf.data(), 0, nullptr) == 0) {
    throw AssetError(AssetErrorKind::io, 0, std::string("png: ") + img.message);
  }
  out.resize(size);
  return out;
}

Image load_png(const std::filesystem::path& path) {
  return parse_png(read_file(path));
}

void save_png(const std::filesystem::path& path, const Image& image) {
  write_file_atomic(path, format_png(image));
}

Image parse_raw_image(ByteView bytes) {
  using nlohmann::json;
  std::size_t eol = 0;
  while (eol < bytes.size() && eol < 4096 && bytes[eol] != '\n') ++eol;
  if (eol >= bytes.size() || bytes[eol] != '\n') {
    throw AssetError(AssetErrorKind::syntax, eol, "raw image header line is not terminated");
  }
  json h;
  try {
    h = json::parse(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(eol));
  } catch (const json::parse_error& e) {
    throw AssetError(AssetErrorKind::syntax, e.byte, std::string("raw image header: ") + e.what());
  }
  auto dim = [&](const char* key, long long hi) {
    if (!h.is_object() || !h.contains(key) || !h.at(key).is_number_integer()) {
      throw AssetError(AssetErrorKind::syntax, 0, std::string("raw image header lacks integer '") + key + "'");
    }
    const long long v = h.at(key).get<long long>();
    if (v < 1 || v > hi) throw AssetError(AssetErrorKind::bounds, 0, std::string("raw image '") + key + "' out of range");
    return static_cast<int>(v);
  };
  const int w = dim("width", 16384), ht = dim("height", 16384), c = dim("channels", 16);
  if (!h.contains("dtype") || h.at("dtype") != "f32le") {
    throw AssetError(AssetErrorKind::syntax, 0, "raw image dtype must be \"f32le\"");
  }
  const std::size_t n = static_cast<std::size_t>(w) * ht * c;
  detail::Reader r(bytes, eol + 1);
  if (r.remaining() != n * 4) {
    throw AssetError(AssetErrorKind::bounds, eol + 1 + std::min(r.remaining(), n * 4),
                     "raw image payload size does not match its header");
  }
  Image out(w, ht, c);
  for (auto& v : out.pixels) {
    v = r.read_f32("pixel");
    if (!std::isfinite(v)) throw AssetError(AssetErrorKind::invariant, r.pos() - 4, "non-finite pixel");
  }
  return out;
}

Bytes format_raw_image(const Image& image) {
  if (image.size() != static_cast<std::size_t>(image.width) * image.height * image.channels || image.size() == 0) {
    throw InvariantError("format_raw_image: image buffer does not match its dimensions");
  }
  const nlohmann::json h = {
      {"width", image.width}, {"height", image.height}, {"channels", image.channels}, {"dtype", "f32le"}};
  Bytes out;
  detail::put_text(out, h.dump() + "\n");
  for (float v : image.pixels) detail::put_f32(out, v);
  return out;
}

} // namespace gsanim::io

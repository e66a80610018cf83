#include "gsanim/error.hpp"
#include "gsanim/io.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>

namespace gsanim::io {

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw AssetError(AssetErrorKind::io, 0, "cannot open '" + path.string() + "' for reading");
  }
  Bytes out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) {
    throw AssetError(AssetErrorKind::io, out.size(), "read failed for '" + path.string() + "'");
  }
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  const Bytes b = read_file(path);
  return {b.begin(), b.end()};
}

void write_file_atomic(const std::filesystem::path& path, ByteView bytes) {
  const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  std::random_device rd;
  const auto tmp = dir / ("." + path.filename().string() + ".tmp" + std::to_string(rd()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw AssetError(AssetErrorKind::io, 0, "cannot open '" + tmp.string() + "' for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw AssetError(AssetErrorKind::io, 0, "write failed for '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw AssetError(AssetErrorKind::io, 0, "cannot move output into place at '" + path.string() + "'");
  }
}

void write_text_atomic(const std::filesystem::path& path, std::string_view text) {
  write_file_atomic(path, ByteView(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string content_hash(ByteView bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw AssetError(AssetErrorKind::io, 0, "sha256 digest failed");
  }
  std::string out = "sha256:";
  char hex[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(hex, sizeof hex, "%02x", digest[i]);
    out += hex;
  }
  return out;
}

std::string format_loss_curve_csv(std::span<const LossRecord> curve) {
  std::ostringstream out;
  out.precision(17);
  out << "step,mask_loss,color_loss,total\n";
  for (const auto& r : curve) {
    out << r.step << ',' << r.mask_loss << ',' << r.color_loss << ',' << r.total << '\n';
  }
  return out.str();
}

} // namespace gsanim::io

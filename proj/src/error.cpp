#include "gsanim/error.hpp"

namespace gsanim {

const char* to_string(AssetErrorKind kind) {
  switch (kind) {
    case AssetErrorKind::syntax:
      return "syntax";
    case AssetErrorKind::bounds:
      return "bounds";
    case AssetErrorKind::invariant:
      return "invariant";
    case AssetErrorKind::io:
      return "io";
  }
  return "unknown";
}

AssetError::AssetError(AssetErrorKind kind, std::uint64_t location, const std::string& message)
    : Error(std::string("asset error [") + to_string(kind) + " @" + std::to_string(location) +
            "]: " + message),
      kind_(kind),
      location_(location) {}

} // namespace gsanim

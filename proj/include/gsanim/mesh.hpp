#pragma once

#include <Eigen/Dense>

#include <array>
#include <vector>

namespace gsanim {

/// Triangle surface. Normals and UVs are optional per-vertex attributes; an
/// empty vector means "absent".
struct Mesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<int, 3>> faces;
  std::vector<Eigen::Vector3d> normals;
  std::vector<Eigen::Vector2d> uv;

  std::size_t vertex_count() const {
    return vertices.size();
  }
  bool has_normals() const {
    return !vertices.empty() && normals.size() == vertices.size();
  }
  bool has_uv() const {
    return !vertices.empty() && uv.size() == vertices.size();
  }

  /// Area-weighted vertex normals. Vertices touched by no face get +z.
  void recompute_normals();

  /// Throws InvariantError when face indices are out of range, an attribute
  /// array has the wrong length, or a normal is not unit length.
  void validate() const;
};

/// Total surface area.
double surface_area(const Mesh& mesh);

/// Unit normal of a face (zero vector for degenerate faces).
Eigen::Vector3d face_normal(const Mesh& mesh, std::size_t face);

} // namespace gsanim

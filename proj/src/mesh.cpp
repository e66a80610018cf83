#include "gsanim/mesh.hpp"

#include "gsanim/error.hpp"

#include <cmath>
#include <string>

namespace gsanim {

void Mesh::recompute_normals() {
  normals.assign(vertices.size(), Eigen::Vector3d::Zero());
  for (const auto& f : faces) {
    const Eigen::Vector3d& a = vertices[f[0]];
    const Eigen::Vector3d& b = vertices[f[1]];
    const Eigen::Vector3d& c = vertices[f[2]];
    // cross product magnitude is twice the area, so this is area weighting
    const Eigen::Vector3d n = (b - a).cross(c - a);
    for (int k = 0; k < 3; ++k) {
      normals[f[k]] += n;
    }
  }
  for (auto& n : normals) {
    const double len = n.norm();
    if (len > 0.0 && std::isfinite(len)) {
      n /= len;
    } else {
      n = Eigen::Vector3d::UnitZ();
    }
  }
}

void Mesh::validate() const {
  const auto v = static_cast<long long>(vertices.size());
  for (std::size_t i = 0; i < faces.size(); ++i) {
    for (int idx : faces[i]) {
      if (idx < 0 || idx >= v) {
        throw InvariantError("mesh face " + std::to_string(i) + " references vertex " +
                             std::to_string(idx) + " of " + std::to_string(v));
      }
    }
  }
  if (!normals.empty()) {
    if (normals.size() != vertices.size()) {
      throw InvariantError("mesh normal count does not match vertex count");
    }
    for (std::size_t i = 0; i < normals.size(); ++i) {
      if (std::abs(normals[i].norm() - 1.0) > 1e-6) {
        throw InvariantError("mesh normal " + std::to_string(i) + " is not unit length");
      }
    }
  }
  if (!uv.empty() && uv.size() != vertices.size()) {
    throw InvariantError("mesh uv count does not match vertex count");
  }
  for (const auto& p : vertices) {
    if (!p.allFinite()) {
      throw InvariantError("mesh has non-finite vertex");
    }
  }
}

double surface_area(const Mesh& mesh) {
  double area = 0.0;
  for (const auto& f : mesh.faces) {
    const Eigen::Vector3d& a = mesh.vertices[f[0]];
    area += 0.5 * (mesh.vertices[f[1]] - a).cross(mesh.vertices[f[2]] - a).norm();
  }
  return area;
}

Eigen::Vector3d face_normal(const Mesh& mesh, std::size_t face) {
  const auto& f = mesh.faces[face];
  const Eigen::Vector3d& a = mesh.vertices[f[0]];
  const Eigen::Vector3d n = (mesh.vertices[f[1]] - a).cross(mesh.vertices[f[2]] - a);
  const double len = n.norm();
  return len > 0.0 ? Eigen::Vector3d(n / len) : Eigen::Vector3d::Zero();
}

} // namespace gsanim

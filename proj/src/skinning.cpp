#include "gsanim/skinning.hpp"

#include "gsanim/error.hpp"
#include "gsanim/spatial.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <map>

namespace gsanim {

namespace {

using Affine34 = Eigen::Matrix<double, 3, 4>;

void check_rows(const SkinningWeights& weights, std::size_t expected, const char* what) {
  if (weights.rows() != expected) {
    throw InvariantError(std::string(what) + ": weight rows (" + std::to_string(weights.rows()) +
                         ") do not match point count (" + std::to_string(expected) + ")");
  }
}

void check_joint_range(const SkinningWeights& weights, std::size_t joints) {
  if (static_cast<std::size_t>(weights.joint_span()) > joints) {
    throw InvariantError("skinning weights reference more joints than transforms provided");
  }
}

// Blends offsets from the identity so that identity transforms reproduce inputs bit-exactly
// even when a row sums to one only up to rounding.
Affine34 blend_offset(const SkinningWeights& weights, std::size_t i, const std::vector<Affine34>& offsets) {
  Affine34 m = Affine34::Zero();
  for (const auto& e : weights.row(i)) {
    m.noalias() += e.weight * offsets[static_cast<std::size_t>(e.joint)];
  }
  return m;
}

Affine34 identity34() {
  return Eigen::Matrix4d::Identity().topRows<3>();
}

std::vector<Affine34> offsets_from_identity(const std::vector<Eigen::Matrix4d>& g) {
  std::vector<Affine34> out(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    out[j] = g[j].topRows<3>() - identity34();
  }
  return out;
}

void finish_normals(const Mesh& in, Mesh& out, const std::vector<Eigen::Matrix3d>* linear) {
  if (!out.faces.empty()) {
    out.recompute_normals();
  } else if (in.has_normals() && linear != nullptr) {
    for (std::size_t i = 0; i < out.normals.size(); ++i) {
      const Eigen::Vector3d n = (*linear)[i] * in.normals[i];
      const double len = n.norm();
      out.normals[i] = len > 0.0 ? Eigen::Vector3d(n / len) : in.normals[i];
    }
  }
}

} // namespace

Mesh lbs_deform(const Mesh& mesh, const SkinningWeights& weights, const JointTransforms& g) {
  check_rows(weights, mesh.vertex_count(), "lbs_deform");
  check_joint_range(weights, g.globals.size());
  const auto offsets = offsets_from_identity(g.globals);
  Mesh out = mesh;
  const auto n = static_cast<long>(mesh.vertex_count());
  std::vector<Eigen::Matrix3d> linear(mesh.has_normals() && mesh.faces.empty() ? mesh.vertex_count() : 0);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    const Affine34 d = blend_offset(weights, static_cast<std::size_t>(i), offsets);
    out.vertices[i] = mesh.vertices[i] + (d.leftCols<3>() * mesh.vertices[i] + d.col(3));
    if (!linear.empty()) {
      linear[i] = Eigen::Matrix3d::Identity() + d.leftCols<3>();
    }
  }
  finish_normals(mesh, out, &linear);
  return out;
}

VertexTransforms compose_repose_transform(const SkinningWeights& weights,
                                          const JointTransforms& g_target,
                                          const JointTransforms& g_source) {
  if (g_target.globals.size() != g_source.globals.size()) {
    throw InvariantError("compose_repose_transform: transform sets differ in joint count");
  }
  check_joint_range(weights, g_source.globals.size());
  std::vector<Affine34> per_joint(g_source.globals.size());
  for (std::size_t j = 0; j < per_joint.size(); ++j) {
    const Eigen::Matrix4d inv = rigid_inverse(g_source.globals[j]);
    // equal transforms compose to an exact identity rather than G * G^-1 up to rounding
    if (g_target.globals[j] == g_source.globals[j]) {
      per_joint[j].setZero();
    } else {
      per_joint[j] = (g_target.globals[j] * inv).topRows<3>() - identity34();
    }
  }
  VertexTransforms out;
  out.transforms.resize(weights.rows());
  const auto n = static_cast<long>(weights.rows());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topRows<3>() += blend_offset(weights, static_cast<std::size_t>(i), per_joint);
    out.transforms[i] = m;
  }
  return out;
}

std::vector<Eigen::Vector3d> apply_point_transforms(const std::vector<Eigen::Vector3d>& points,
                                                    const VertexTransforms& t) {
  if (t.transforms.size() != points.size()) {
    throw InvariantError("apply_vertex_transforms: transform count does not match point count");
  }
  std::vector<Eigen::Vector3d> out(points.size());
  const auto n = static_cast<long>(points.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    const Eigen::Matrix4d& m = t.transforms[i];
    out[i] = m.topLeftCorner<3, 3>() * points[i] + m.topRightCorner<3, 1>();
  }
  return out;
}

Mesh apply_vertex_transforms(const Mesh& mesh, const VertexTransforms& t) {
  Mesh out = mesh;
  out.vertices = apply_point_transforms(mesh.vertices, t);
  std::vector<Eigen::Matrix3d> linear;
  if (mesh.has_normals() && mesh.faces.empty()) {
    for (const auto& m : t.transforms) {
      linear.push_back(m.topLeftCorner<3, 3>());
    }
  }
  finish_normals(mesh, out, &linear);
  return out;
}

SkinningWeights bind_points(const std::vector<Eigen::Vector3d>& points,
                            const SkinningWeights& template_weights, const Mesh& posed_template,
                            int k, BindDiagnostics* diagnostics) {
  if (k < 1) {
    throw InvariantError("bind: k must be >= 1");
  }
  if (posed_template.vertices.empty()) {
    throw InvariantError("bind: template mesh is empty");
  }
  check_rows(template_weights, posed_template.vertex_count(), "bind");
  const PointGrid grid(posed_template.vertices);
  std::vector<std::vector<WeightEntry>> rows(points.size());
  std::vector<double> nearest(points.size(), 0.0);
  const auto n = static_cast<long>(points.size());
#pragma omp parallel for schedule(dynamic, 256)
  for (long i = 0; i < n; ++i) {
    const auto nb = grid.knn(points[i], k);
    nearest[i] = std::sqrt(nb.front().squared_distance);
    std::map<int, double> acc;
    if (nb.front().squared_distance == 0.0) {
      for (const auto& neighbor : nb) {
        if (neighbor.squared_distance != 0.0) {
          break;
        }
        for (const auto& e : template_weights.row(static_cast<std::size_t>(neighbor.index))) {
          acc[e.joint] += e.weight;
        }
      }
    } else {
      for (const auto& neighbor : nb) {
        const double w = 1.0 / (std::sqrt(neighbor.squared_distance) + kBindEpsilon);
        for (const auto& e : template_weights.row(static_cast<std::size_t>(neighbor.index))) {
          acc[e.joint] += w * e.weight;
        }
      }
    }
    auto& row = rows[static_cast<std::size_t>(i)];
    for (const auto& [joint, w] : acc) {
      row.push_back({joint, w});
    }
  }
  SkinningWeights out;
  for (auto& row : rows) {
    out.push_row(std::move(row));
  }
  if (diagnostics != nullptr) {
    diagnostics->far_vertices.clear();
    diagnostics->max_distance = 0.0;
    for (std::size_t i = 0; i < nearest.size(); ++i) {
      diagnostics->max_distance = std::max(diagnostics->max_distance, nearest[i]);
      if (nearest[i] > diagnostics->far_threshold) {
        diagnostics->far_vertices.push_back(static_cast<int>(i));
      }
    }
  }
  return out;
}

SkinningWeights bind_scan_to_model(const Mesh& scan, const BodyModel& model,
                                   const Mesh& posed_template, int k,
                                   BindDiagnostics* diagnostics) {
  return bind_points(scan.vertices, model.weights, posed_template, k, diagnostics);
}

namespace {

struct DualQuat {
  Eigen::Vector4d real;  // (w, x, y, z)
  Eigen::Vector4d dual;
};

Eigen::Vector4d qmul(const Eigen::Vector4d& a, const Eigen::Vector4d& b) {
  return {a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
          a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
          a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
          a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]};
}

DualQuat to_dual_quat(const Eigen::Matrix4d& m) {
  if (!is_rigid(m, 1e-6)) {
    throw InvariantError("dqs_deform: joint transform is not rigid");
  }
  const Eigen::Quaterniond q(Eigen::Matrix3d(m.topLeftCorner<3, 3>()));
  const Eigen::Vector4d real(q.w(), q.x(), q.y(), q.z());
  const Eigen::Vector3d t = m.topRightCorner<3, 1>();
  const Eigen::Vector4d dual = 0.5 * qmul(Eigen::Vector4d(0.0, t.x(), t.y(), t.z()), real);
  return {real, dual};
}

} // namespace

Mesh dqs_deform(const Mesh& mesh, const SkinningWeights& weights, const JointTransforms& g) {
  check_rows(weights, mesh.vertex_count(), "dqs_deform");
  check_joint_range(weights, g.globals.size());
  std::vector<DualQuat> dq;
  dq.reserve(g.globals.size());
  for (const auto& m : g.globals) {
    dq.push_back(to_dual_quat(m));
  }
  Mesh out = mesh;
  std::vector<Eigen::Matrix3d> linear(mesh.has_normals() && mesh.faces.empty() ? mesh.vertex_count() : 0);
  for (std::size_t i = 0; i < mesh.vertex_count(); ++i) {
    const auto row = weights.row(i);
    const auto pivot = std::max_element(row.begin(), row.end(), [](const WeightEntry& a, const WeightEntry& b) {
      return a.weight < b.weight;
    });
    const Eigen::Vector4d ref = dq[static_cast<std::size_t>(pivot->joint)].real;
    Eigen::Vector4d real = Eigen::Vector4d::Zero();
    Eigen::Vector4d dual = Eigen::Vector4d::Zero();
    for (const auto& e : row) {
      const DualQuat& d = dq[static_cast<std::size_t>(e.joint)];
      const double sign = d.real.dot(ref) < 0.0 ? -1.0 : 1.0;
      real += sign * e.weight * d.real;
      dual += sign * e.weight * d.dual;
    }
    const double len = real.norm();
    if (!(len > 1e-12)) {
      throw NumericError("dqs_deform: blended quaternion has zero norm at vertex " + std::to_string(i));
    }
    real /= len;
    dual /= len;
    const Eigen::Quaterniond q(real[0], real[1], real[2], real[3]);
    const Eigen::Vector4d conj(real[0], -real[1], -real[2], -real[3]);
    const Eigen::Vector4d t = 2.0 * qmul(dual, conj);
    const Eigen::Matrix3d r = q.toRotationMatrix();
    out.vertices[i] = r * mesh.vertices[i] + t.tail<3>();
    if (!linear.empty()) {
      linear[i] = r;
    }
  }
  finish_normals(mesh, out, &linear);
  return out;
}

} // namespace gsanim

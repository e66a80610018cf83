#pragma once

#include "gsanim/body_model.hpp"
#include "gsanim/mesh.hpp"
#include "gsanim/skinning_weights.hpp"

#include <Eigen/Dense>

#include <vector>

namespace gsanim {

/// Per-point homogeneous transforms (last row 0 0 0 1).
struct VertexTransforms {
  std::vector<Eigen::Matrix4d> transforms;
};

/// v'_i = sum_j w_ij G_j v_i. Faces and UVs are kept; normals are recomputed
/// when the input had faces.
Mesh lbs_deform(const Mesh& mesh, const SkinningWeights& weights, const JointTransforms& g);

/// Per-vertex sum_j w_ij G_target_j G_source_j^{-1}. Throws InvariantError if
/// a source transform is not rigid.
VertexTransforms compose_repose_transform(const SkinningWeights& weights,
                                          const JointTransforms& g_target,
                                          const JointTransforms& g_source);

Mesh apply_vertex_transforms(const Mesh& mesh, const VertexTransforms& t);

/// Maps points through per-point transforms (same contract as
/// apply_vertex_transforms, for bare point sets).
std::vector<Eigen::Vector3d> apply_point_transforms(const std::vector<Eigen::Vector3d>& points,
                                                    const VertexTransforms& t);

struct BindDiagnostics {
  /// Scan vertices whose nearest template vertex lies farther than
  /// far_threshold; they are still bound.
  std::vector<int> far_vertices;
  double far_threshold = 0.10;
  double max_distance = 0.0;
};

inline constexpr int kDefaultBindNeighbors = 4;
inline constexpr double kBindEpsilon = 1e-8;

/// For each point, averages the weight rows of its k nearest template vertices
/// with weights 1 / (d + 1e-8) and renormalizes. A neighbor at distance exactly
/// zero takes the whole weight (rows of several coincident vertices average).
SkinningWeights bind_points(const std::vector<Eigen::Vector3d>& points,
                            const SkinningWeights& template_weights, const Mesh& posed_template,
                            int k = kDefaultBindNeighbors, BindDiagnostics* diagnostics = nullptr);

/// bind_points applied to the scan's vertices with the model's template
/// weights. `posed_template` is the model template deformed to the scan pose.
SkinningWeights bind_scan_to_model(const Mesh& scan, const BodyModel& model,
                                   const Mesh& posed_template, int k = kDefaultBindNeighbors,
                                   BindDiagnostics* diagnostics = nullptr);

/// Dual-quaternion skinning with hemisphere alignment against the most
/// heavily weighted joint of each vertex.
Mesh dqs_deform(const Mesh& mesh, const SkinningWeights& weights, const JointTransforms& g);

} // namespace gsanim

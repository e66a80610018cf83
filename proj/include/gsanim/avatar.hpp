#pragma once

#include "gsanim/body_model.hpp"
#include "gsanim/gaussians.hpp"
#include "gsanim/image.hpp"
#include "gsanim/mesh.hpp"
#include "gsanim/nnet/params.hpp"
#include "gsanim/skinning.hpp"

#include <string>

namespace gsanim {

enum class AvatarStage { source, canonical, coarse_target, refined_target };

const char* to_string(AvatarStage stage);

/// A Gaussian set tagged with the pose it is expressed in and its place in the
/// source -> canonical -> coarse_target -> refined_target life cycle.
struct AvatarState {
  GaussianSet gaussians;
  Pose pose;
  Shape shape;
  AvatarStage stage = AvatarStage::source;

  /// Moves to the next stage; throws InvariantError when `next` does not
  /// immediately follow the current stage.
  AvatarState advance(AvatarStage next, GaussianSet gaussians, Pose pose) const;
};

/// Model template deformed to `pose` with the joints of `shape`.
Mesh pose_body(const BodyModel& model, const Shape& shape, const Pose& pose);

/// Joint transforms of `pose` for `shape`.
JointTransforms pose_transforms(const BodyModel& model, const Shape& shape, const Pose& pose);

/// Maps a scan in `source_pose` to the model's canonical pose. The scan is
/// bound to the template posed at `source_pose` unless weights are supplied.
Mesh canonicalize_scan(const Mesh& scan, const BodyModel& model, const Pose& source_pose, const Shape& shape,
                       BindDiagnostics* diagnostics = nullptr);
Mesh canonicalize_scan(const Mesh& scan, const SkinningWeights& scan_weights, const BodyModel& model,
                       const Pose& source_pose, const Shape& shape);

struct TemplateConfig {
  int uv_resolution = 64;
  double base_opacity = 0.9;
  double max_offset = 0.02;  // meters
  int bind_neighbors = kDefaultBindNeighbors;
};

/// Per-texel surface samples of a mesh rasterized into its UV layout. Texel
/// (x, y) covers uv = ((x + 0.5) / R, 1 - (y + 0.5) / R); covered texels are
/// listed in row-major order.
struct UvSamples {
  int resolution = 0;
  std::vector<int> texel;  // y * R + x
  std::vector<Eigen::Vector3d> position;
  std::vector<Eigen::Vector3d> normal;
};

UvSamples rasterize_uv(const Mesh& mesh, int resolution);

/// Bilinear texture lookup at uv (v up), clamped at the border.
Eigen::Vector3d sample_texture(const Image& texture, const Eigen::Vector2d& uv);

/// One Gaussian per covered texel anchored at the surface point plus the
/// generator's bounded offset. Skinning weights come from binding the anchors
/// to the model template in the canonical pose.
GaussianSet build_template(const Mesh& canonical_mesh, const Image& uv_texture, const BodyModel& model,
                           const Shape& shape, const nn::NetworkParams<float>& params,
                           const TemplateConfig& config = {});

/// Moves bound canonical Gaussians to `target_pose`. With rotate_frames the
/// rotation is pre-multiplied by the polar rotation of each blended transform;
/// otherwise only centers change.
GaussianSet animate(const GaussianSet& canonical, const BodyModel& model, const Shape& shape, const Pose& target_pose,
                    bool rotate_frames = false);

/// Rotation factor of the polar decomposition A = R S (det R = +1).
Eigen::Matrix3d polar_rotation(const Eigen::Matrix3d& a);

} // namespace gsanim

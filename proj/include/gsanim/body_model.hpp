#pragma once

#include "gsanim/mesh.hpp"
#include "gsanim/skinning_weights.hpp"

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cstdint>
#include <string>
#include <vector>

namespace gsanim {

/// Per-joint rotations (joint 0 carries the global orientation), root
/// translation, and expression / hand-pose slots. The latter two are carried
/// through files but drive no deformation.
struct Pose {
  std::vector<Eigen::Quaterniond> joint_rotations;
  Eigen::Vector3d root_translation = Eigen::Vector3d::Zero();
  Eigen::VectorXd expression;
  Eigen::VectorXd hand_pose;

  static Pose identity(int joints, int expression_dim = 0, int hand_pose_dim = 0);

  /// Builds from axis-angle vectors (one per joint).
  static Pose from_axis_angle(const std::vector<Eigen::Vector3d>& axis_angles,
                              const Eigen::Vector3d& root_translation = Eigen::Vector3d::Zero());

  int joint_count() const {
    return static_cast<int>(joint_rotations.size());
  }
  std::vector<Eigen::Vector3d> axis_angles() const;

  /// Throws InvariantError unless there are `joints` unit quaternions.
  void validate(int joints) const;
};

struct Shape {
  Eigen::VectorXd coefficients;

  static Shape zero(int dim) {
    return {Eigen::VectorXd::Zero(dim)};
  }
};

struct Skeleton {
  std::vector<int> parent;  // parent[0] == -1
  std::vector<Eigen::Vector3d> rest_joint_offsets;
  std::vector<std::string> names;
  Pose canonical_pose;  // the A-pose

  int joint_count() const {
    return static_cast<int>(parent.size());
  }

  /// Rest joint positions obtained by accumulating offsets down the tree.
  std::vector<Eigen::Vector3d> rest_positions() const;

  void validate() const;
};

struct Joints {
  std::vector<Eigen::Vector3d> positions;
};

/// Global joint transforms relative to the rest configuration: the identity
/// pose yields identity matrices.
struct JointTransforms {
  std::vector<Eigen::Matrix4d> globals;
};

struct BodyModel {
  Skeleton skeleton;
  /// (3J x B): column b is the joint displacement for shape coefficient b.
  Eigen::MatrixXd regressor;
  Mesh template_mesh;  // rest configuration for the zero shape
  SkinningWeights weights;
  int expression_dim = 0;
  int hand_pose_dim = 0;

  int joint_count() const {
    return skeleton.joint_count();
  }
  int shape_dim() const {
    return static_cast<int>(regressor.cols());
  }

  void validate() const;
};

/// rest positions + regressor * coefficients.
Joints regress_joints(const BodyModel& model, const Shape& shape);

JointTransforms forward_kinematics(const Skeleton& skeleton, const Joints& joints, const Pose& pose);

/// Rigid inverse; throws InvariantError if the upper-left block is not a
/// rotation within `tolerance`.
Eigen::Matrix4d rigid_inverse(const Eigen::Matrix4d& m, double tolerance = 1e-6);

bool is_rigid(const Eigen::Matrix4d& m, double tolerance);

// --- synthetic body -------------------------------------------------------

enum class SyntheticWeightMode { proximity, one_hot };

struct SyntheticConfig {
  int resolution = 4;  // rings per capsule hemisphere; segments = 4 * resolution
  int shape_dim = 4;
  int expression_dim = 0;
  int hand_pose_dim = 0;
  SyntheticWeightMode weight_mode = SyntheticWeightMode::proximity;
  double proximity_power = 4.0;
  double proximity_epsilon = 1e-8;
};

/// Inverse-distance joint weights used by the synthetic generator:
/// w_j proportional to 1 / (|p - J_j|^power + epsilon), restricted to the
/// kMaxInfluences nearest joints and normalized.
std::vector<WeightEntry> proximity_weights(const Eigen::Vector3d& point,
                                           const std::vector<Eigen::Vector3d>& joints,
                                           double power, double epsilon);

/// Capsule-limb humanoid with 24 joints. Deterministic in `seed`. Returns the
/// model (whose template_mesh is also returned for convenience) with UVs laid
/// out as one atlas cell per capsule.
struct SyntheticBody {
  BodyModel model;
  Mesh mesh;
  /// Capsule each vertex belongs to (index into capsule_owner).
  std::vector<int> vertex_capsule;
  std::vector<int> capsule_owner;  // joint driving each capsule
};

SyntheticBody make_synthetic_body(std::uint64_t seed, const SyntheticConfig& config = {});

/// Standard A-pose for the synthetic skeleton: shoulders rotated 45 degrees down.
Pose synthetic_a_pose(int joints, int expression_dim = 0, int hand_pose_dim = 0);

/// Joint indices of the synthetic skeleton.
namespace synthetic_joint {
inline constexpr int pelvis = 0;
inline constexpr int l_hip = 1;
inline constexpr int r_hip = 2;
inline constexpr int spine1 = 3;
inline constexpr int l_knee = 4;
inline constexpr int r_knee = 5;
inline constexpr int spine2 = 6;
inline constexpr int l_ankle = 7;
inline constexpr int r_ankle = 8;
inline constexpr int spine3 = 9;
inline constexpr int l_foot = 10;
inline constexpr int r_foot = 11;
inline constexpr int neck = 12;
inline constexpr int l_collar = 13;
inline constexpr int r_collar = 14;
inline constexpr int head = 15;
inline constexpr int l_shoulder = 16;
inline constexpr int r_shoulder = 17;
inline constexpr int l_elbow = 18;
inline constexpr int r_elbow = 19;
inline constexpr int l_wrist = 20;
inline constexpr int r_wrist = 21;
inline constexpr int l_hand = 22;
inline constexpr int r_hand = 23;
inline constexpr int count = 24;
} // namespace synthetic_joint

} // namespace gsanim

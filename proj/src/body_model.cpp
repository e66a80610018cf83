#include "gsanim/body_model.hpp"

#include "gsanim/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace gsanim {

Pose Pose::identity(int joints, int expression_dim, int hand_pose_dim) {
  Pose pose;
  pose.joint_rotations.assign(static_cast<std::size_t>(joints), Eigen::Quaterniond::Identity());
  pose.expression = Eigen::VectorXd::Zero(expression_dim);
  pose.hand_pose = Eigen::VectorXd::Zero(hand_pose_dim);
  return pose;
}

namespace {

Eigen::Quaterniond quat_from_axis_angle(const Eigen::Vector3d& aa) {
  const double angle = aa.norm();
  if (angle == 0.0) {
    return Eigen::Quaterniond::Identity();
  }
  return Eigen::Quaterniond(Eigen::AngleAxisd(angle, aa / angle));
}

} // namespace

Pose Pose::from_axis_angle(const std::vector<Eigen::Vector3d>& axis_angles,
                           const Eigen::Vector3d& root_translation) {
  Pose pose;
  pose.joint_rotations.reserve(axis_angles.size());
  for (const auto& aa : axis_angles) {
    pose.joint_rotations.push_back(quat_from_axis_angle(aa));
  }
  pose.root_translation = root_translation;
  return pose;
}

std::vector<Eigen::Vector3d> Pose::axis_angles() const {
  std::vector<Eigen::Vector3d> out;
  out.reserve(joint_rotations.size());
  for (const auto& q : joint_rotations) {
    Eigen::AngleAxisd aa(q);
    out.emplace_back(aa.axis() * aa.angle());
  }
  return out;
}

void Pose::validate(int joints) const {
  if (joint_count() != joints) {
    throw InvariantError("pose has " + std::to_string(joint_count()) + " rotations, model has " +
                         std::to_string(joints) + " joints");
  }
  for (std::size_t j = 0; j < joint_rotations.size(); ++j) {
    const double n = joint_rotations[j].coeffs().norm();
    if (!(std::abs(n - 1.0) <= 1e-9)) {
      throw InvariantError("pose rotation " + std::to_string(j) + " is not a unit quaternion");
    }
  }
  if (!root_translation.allFinite()) {
    throw InvariantError("pose root translation is not finite");
  }
}

std::vector<Eigen::Vector3d> Skeleton::rest_positions() const {
  std::vector<Eigen::Vector3d> out(parent.size());
  for (std::size_t j = 0; j < parent.size(); ++j) {
    out[j] = rest_joint_offsets[j];
    if (parent[j] >= 0) {
      out[j] += out[static_cast<std::size_t>(parent[j])];
    }
  }
  return out;
}

void Skeleton::validate() const {
  if (parent.empty()) {
    throw InvariantError("skeleton has no joints");
  }
  if (rest_joint_offsets.size() != parent.size()) {
    throw InvariantError("skeleton offsets do not match joint count");
  }
  if (parent[0] != -1) {
    throw InvariantError("skeleton root must have parent -1");
  }
  for (std::size_t j = 1; j < parent.size(); ++j) {
    if (parent[j] < 0 || parent[j] >= static_cast<int>(j)) {
      throw InvariantError("skeleton parent of joint " + std::to_string(j) +
                           " must precede it");
    }
  }
  if (!names.empty() && names.size() != parent.size()) {
    throw InvariantError("skeleton names do not match joint count");
  }
  canonical_pose.validate(joint_count());
}

void BodyModel::validate() const {
  skeleton.validate();
  if (regressor.rows() != 3 * joint_count()) {
    throw InvariantError("regressor rows must be 3 * joint count");
  }
  template_mesh.validate();
  if (weights.rows() != template_mesh.vertex_count()) {
    throw InvariantError("skinning weight rows do not match template vertex count");
  }
  weights.validate();
  if (weights.joint_span() > joint_count()) {
    throw InvariantError("skinning weights reference a joint outside the skeleton");
  }
  if (skeleton.canonical_pose.expression.size() != expression_dim ||
      skeleton.canonical_pose.hand_pose.size() != hand_pose_dim) {
    throw InvariantError("canonical pose expression/hand dimensions do not match the model");
  }
}

Joints regress_joints(const BodyModel& model, const Shape& shape) {
  if (shape.coefficients.size() != model.shape_dim()) {
    throw InvariantError("shape has " + std::to_string(shape.coefficients.size()) +
                         " coefficients, model regressor expects " +
                         std::to_string(model.shape_dim()));
  }
  Joints joints{model.skeleton.rest_positions()};
  if (model.shape_dim() == 0) {
    return joints;
  }
  const Eigen::VectorXd delta = model.regressor * shape.coefficients;
  for (std::size_t j = 0; j < joints.positions.size(); ++j) {
    joints.positions[j] += delta.segment<3>(static_cast<Eigen::Index>(3 * j));
  }
  return joints;
}

JointTransforms forward_kinematics(const Skeleton& skeleton, const Joints& joints,
                                   const Pose& pose) {
  const int count = skeleton.joint_count();
  pose.validate(count);
  if (static_cast<int>(joints.positions.size()) != count) {
    throw InvariantError("joint positions do not match skeleton");
  }
  JointTransforms out;
  out.globals.resize(static_cast<std::size_t>(count));
  for (int j = 0; j < count; ++j) {
    // rotation about the rest joint position: [R | J - R J]
    const Eigen::Matrix3d rot = pose.joint_rotations[j].toRotationMatrix();
    const Eigen::Vector3d& center = joints.positions[j];
    Eigen::Matrix4d local = Eigen::Matrix4d::Identity();
    local.topLeftCorner<3, 3>() = rot;
    local.topRightCorner<3, 1>() = center - rot * center;
    if (j == 0) {
      local.topRightCorner<3, 1>() += pose.root_translation;
      out.globals[0] = local;
    } else {
      out.globals[j] = out.globals[skeleton.parent[j]] * local;
    }
  }
  return out;
}

bool is_rigid(const Eigen::Matrix4d& m, double tolerance) {
  if (!m.allFinite()) {
    return false;
  }
  const Eigen::Matrix3d r = m.topLeftCorner<3, 3>();
  if ((r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > tolerance) {
    return false;
  }
  if (std::abs(r.determinant() - 1.0) > tolerance) {
    return false;
  }
  return m.row(3).isApprox(Eigen::RowVector4d(0, 0, 0, 1), 0.0) ||
         (m.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() <= tolerance;
}

Eigen::Matrix4d rigid_inverse(const Eigen::Matrix4d& m, double tolerance) {
  if (!is_rigid(m, tolerance)) {
    throw InvariantError("transform is not rigid (singular or scaled)");
  }
  Eigen::Matrix4d inv = Eigen::Matrix4d::Identity();
  const Eigen::Matrix3d rt = m.topLeftCorner<3, 3>().transpose();
  inv.topLeftCorner<3, 3>() = rt;
  inv.topRightCorner<3, 1>() = -(rt * m.topRightCorner<3, 1>());
  return inv;
}

// --- synthetic body -------------------------------------------------------

std::vector<WeightEntry> proximity_weights(const Eigen::Vector3d& point,
                                           const std::vector<Eigen::Vector3d>& joints,
                                           double power, double epsilon) {
  std::vector<std::pair<double, int>> dist;
  dist.reserve(joints.size());
  for (std::size_t j = 0; j < joints.size(); ++j) {
    dist.emplace_back((point - joints[j]).norm(), static_cast<int>(j));
  }
  const std::size_t keep = std::min<std::size_t>(kMaxInfluences, dist.size());
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(keep), dist.end());
  std::vector<WeightEntry> out;
  double sum = 0.0;
  for (std::size_t k = 0; k < keep; ++k) {
    const double w = 1.0 / (std::pow(dist[k].first, power) + epsilon);
    out.push_back({dist[k].second, w});
    sum += w;
  }
  for (auto& e : out) {
    e.weight /= sum;
  }
  return out;
}

Pose synthetic_a_pose(int joints, int expression_dim, int hand_pose_dim) {
  Pose pose = Pose::identity(joints, expression_dim, hand_pose_dim);
  const double a = std::numbers::pi / 4.0;
  if (joints > synthetic_joint::r_shoulder) {
    pose.joint_rotations[synthetic_joint::l_shoulder] =
        Eigen::Quaterniond(Eigen::AngleAxisd(-a, Eigen::Vector3d::UnitZ()));
    pose.joint_rotations[synthetic_joint::r_shoulder] =
        Eigen::Quaterniond(Eigen::AngleAxisd(a, Eigen::Vector3d::UnitZ()));
  }
  return pose;
}

namespace {

struct JointSpec {
  const char* name;
  int parent;
  double x, y, z;
  double radius;  // radius of capsules owned by this joint
  double leaf_length;
};

// clang-format off
constexpr JointSpec kJoints[synthetic_joint::count] = {
    {"pelvis",      -1,  0.00,  0.95, 0.00, 0.090, 0.0},
    {"l_hip",        0,  0.09, -0.07, 0.00, 0.070, 0.0},
    {"r_hip",        0, -0.09, -0.07, 0.00, 0.070, 0.0},
    {"spine1",       0,  0.00,  0.11, 0.00, 0.100, 0.0},
    {"l_knee",       1,  0.00, -0.40, 0.00, 0.055, 0.0},
    {"r_knee",       2,  0.00, -0.40, 0.00, 0.055, 0.0},
    {"spine2",       3,  0.00,  0.13, 0.00, 0.100, 0.0},
    {"l_ankle",      4,  0.00, -0.40, 0.00, 0.045, 0.0},
    {"r_ankle",      5,  0.00, -0.40, 0.00, 0.045, 0.0},
    {"spine3",       6,  0.00,  0.10, 0.00, 0.060, 0.0},
    {"l_foot",       7,  0.00, -0.05, 0.12, 0.040, 0.08},
    {"r_foot",       8,  0.00, -0.05, 0.12, 0.040, 0.08},
    {"neck",         9,  0.00,  0.20, 0.00, 0.045, 0.0},
    {"l_collar",     9,  0.08,  0.12, 0.00, 0.050, 0.0},
    {"r_collar",     9, -0.08,  0.12, 0.00, 0.050, 0.0},
    {"head",        12,  0.00,  0.10, 0.00, 0.090, 0.12},
    {"l_shoulder",  13,  0.10,  0.02, 0.00, 0.045, 0.0},
    {"r_shoulder",  14, -0.10,  0.02, 0.00, 0.045, 0.0},
    {"l_elbow",     16,  0.26,  0.00, 0.00, 0.040, 0.0},
    {"r_elbow",     17, -0.26,  0.00, 0.00, 0.040, 0.0},
    {"l_wrist",     18,  0.25,  0.00, 0.00, 0.035, 0.0},
    {"r_wrist",     19, -0.25,  0.00, 0.00, 0.035, 0.0},
    {"l_hand",      20,  0.08,  0.00, 0.00, 0.030, 0.06},
    {"r_hand",      21, -0.08,  0.00, 0.00, 0.030, 0.06},
};
// clang-format on

struct CapsuleBuilder {
  Mesh& mesh;
  int rings;     // per hemisphere
  int segments;  // around the axis

  // Appends a capsule from a to b and returns its vertex range.
  void add(const Eigen::Vector3d& a, const Eigen::Vector3d& b, double radius,
           const Eigen::Vector2d& uv_origin, double uv_size) {
    const Eigen::Vector3d axis = (b - a).normalized();
    const double length = (b - a).norm();
    Eigen::Vector3d ref = std::abs(axis.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
    const Eigen::Vector3d ex = axis.cross(ref).normalized();
    const Eigen::Vector3d ey = axis.cross(ex);

    const int first = static_cast<int>(mesh.vertices.size());
    const int lat_count = 2 * rings;  // rings excluding poles
    const double margin = 0.05 * uv_size;
    const double inner = uv_size - 2.0 * margin;
    auto uv_at = [&](double u, double v) {
      return Eigen::Vector2d(uv_origin.x() + margin + u * inner, uv_origin.y() + margin + v * inner);
    };

    // south pole
    mesh.vertices.push_back(a - radius * axis);
    mesh.uv.push_back(uv_at(0.5, 0.0));
    for (int i = 1; i <= lat_count; ++i) {
      double phi = 0.0;
      Eigen::Vector3d center = a;
      if (i <= rings) {
        phi = -std::numbers::pi / 2.0 + i * (std::numbers::pi / 2.0) / rings;
      } else {
        phi = (i - rings - 1) * (std::numbers::pi / 2.0) / rings;
        center = b;
      }
      const double ring_r = radius * std::cos(phi);
      const double ring_z = radius * std::sin(phi);
      for (int s = 0; s <= segments; ++s) {
        const int sm = s % segments;  // seam column shares the position of column 0
        const double theta = 2.0 * std::numbers::pi * sm / segments;
        mesh.vertices.push_back(center + ring_z * axis +
                                ring_r * (std::cos(theta) * ex + std::sin(theta) * ey));
        mesh.uv.push_back(uv_at(static_cast<double>(s) / segments,
                                static_cast<double>(i) / (lat_count + 1)));
      }
    }
    // north pole
    mesh.vertices.push_back(b + radius * axis);
    mesh.uv.push_back(uv_at(0.5, 1.0));

    const std::size_t face_start = mesh.faces.size();
    const int stride = segments + 1;
    auto ring_vertex = [&](int i, int s) { return first + 1 + (i - 1) * stride + s; };
    const int north = first + 1 + lat_count * stride;
    for (int s = 0; s < segments; ++s) {
      mesh.faces.push_back({first, ring_vertex(1, s + 1), ring_vertex(1, s)});
    }
    for (int i = 1; i < lat_count; ++i) {
      for (int s = 0; s < segments; ++s) {
        const int v00 = ring_vertex(i, s);
        const int v01 = ring_vertex(i, s + 1);
        const int v10 = ring_vertex(i + 1, s);
        const int v11 = ring_vertex(i + 1, s + 1);
        mesh.faces.push_back({v00, v01, v11});
        mesh.faces.push_back({v00, v11, v10});
      }
    }
    for (int s = 0; s < segments; ++s) {
      mesh.faces.push_back({north, ring_vertex(lat_count, s), ring_vertex(lat_count, s + 1)});
    }
    // orient outward: away from the nearest point on the segment
    for (std::size_t f = face_start; f < mesh.faces.size(); ++f) {
      auto& face = mesh.faces[f];
      const Eigen::Vector3d p0 = mesh.vertices[face[0]];
      const Eigen::Vector3d centroid = (p0 + mesh.vertices[face[1]] + mesh.vertices[face[2]]) / 3.0;
      const double t = std::clamp((centroid - a).dot(axis), 0.0, length);
      const Eigen::Vector3d n = (mesh.vertices[face[1]] - p0).cross(mesh.vertices[face[2]] - p0);
      if (n.dot(centroid - (a + t * axis)) < 0.0) {
        std::swap(face[1], face[2]);
      }
    }
  }
};

} // namespace

SyntheticBody make_synthetic_body(std::uint64_t seed, const SyntheticConfig& config) {
  if (config.resolution < 1) {
    throw InvariantError("synthetic body resolution must be >= 1");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.02, 0.02);

  SyntheticBody body;
  BodyModel& model = body.model;
  Skeleton& sk = model.skeleton;
  for (const auto& spec : kJoints) {
    sk.parent.push_back(spec.parent);
    sk.names.emplace_back(spec.name);
    Eigen::Vector3d offset(spec.x, spec.y, spec.z);
    if (spec.parent >= 0) {
      offset *= 1.0 + jitter(rng);
    }
    sk.rest_joint_offsets.push_back(offset);
  }
  model.expression_dim = config.expression_dim;
  model.hand_pose_dim = config.hand_pose_dim;
  sk.canonical_pose = synthetic_a_pose(synthetic_joint::count, config.expression_dim,
                                       config.hand_pose_dim);

  model.regressor.resize(3 * synthetic_joint::count, config.shape_dim);
  for (Eigen::Index c = 0; c < model.regressor.cols(); ++c) {
    for (Eigen::Index r = 0; r < model.regressor.rows(); ++r) {
      model.regressor(r, c) = jitter(rng);
    }
  }

  const auto rest = sk.rest_positions();
  std::vector<std::vector<int>> children(synthetic_joint::count);
  for (int j = 1; j < synthetic_joint::count; ++j) {
    children[sk.parent[j]].push_back(j);
  }
  struct Segment {
    Eigen::Vector3d a, b;
    double radius;
    int owner;
  };
  std::vector<Segment> segments;
  for (int j = 0; j < synthetic_joint::count; ++j) {
    for (int c : children[j]) {
      segments.push_back({rest[j], rest[c], kJoints[j].radius, j});
    }
    if (children[j].empty()) {
      const Eigen::Vector3d dir = (rest[j] - rest[sk.parent[j]]).normalized();
      segments.push_back({rest[j], rest[j] + kJoints[j].leaf_length * dir, kJoints[j].radius, j});
    }
  }

  Mesh& mesh = model.template_mesh;
  CapsuleBuilder builder{mesh, config.resolution, 4 * config.resolution};
  const int grid = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(segments.size()))));
  const double cell = 1.0 / grid;
  for (std::size_t k = 0; k < segments.size(); ++k) {
    const std::size_t before = mesh.vertices.size();
    const Eigen::Vector2d origin(static_cast<double>(k % grid) * cell,
                                 static_cast<double>(k / grid) * cell);
    builder.add(segments[k].a, segments[k].b, segments[k].radius, origin, cell);
    body.vertex_capsule.insert(body.vertex_capsule.end(), mesh.vertices.size() - before,
                               static_cast<int>(k));
    body.capsule_owner.push_back(segments[k].owner);
  }
  mesh.recompute_normals();

  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    if (config.weight_mode == SyntheticWeightMode::one_hot) {
      model.weights.push_row({{body.capsule_owner[body.vertex_capsule[v]], 1.0}});
    } else {
      model.weights.push_row(proximity_weights(mesh.vertices[v], rest, config.proximity_power,
                                               config.proximity_epsilon));
    }
  }
  body.mesh = mesh;
  model.validate();
  return body;
}

} // namespace gsanim

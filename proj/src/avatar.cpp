#include "gsanim/avatar.hpp"

#include "gsanim/error.hpp"
#include "gsanim/nnet/modules.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>

namespace gsanim {

const char* to_string(AvatarStage stage) {
  switch (stage) {
    case AvatarStage::source:
      return "source";
    case AvatarStage::canonical:
      return "canonical";
    case AvatarStage::coarse_target:
      return "coarse_target";
    case AvatarStage::refined_target:
      return "refined_target";
  }
  return "unknown";
}

AvatarState AvatarState::advance(AvatarStage next, GaussianSet g, Pose p) const {
  if (static_cast<int>(next) != static_cast<int>(stage) + 1) {
    throw InvariantError(std::string("avatar stage cannot move from ") + to_string(stage) + " to " + to_string(next));
  }
  return {std::move(g), std::move(p), shape, next};
}

JointTransforms pose_transforms(const BodyModel& model, const Shape& shape, const Pose& pose) {
  return forward_kinematics(model.skeleton, regress_joints(model, shape), pose);
}

Mesh pose_body(const BodyModel& model, const Shape& shape, const Pose& pose) {
  return lbs_deform(model.template_mesh, model.weights, pose_transforms(model, shape, pose));
}

Mesh canonicalize_scan(const Mesh& scan, const SkinningWeights& scan_weights, const BodyModel& model,
                       const Pose& source_pose, const Shape& shape) {
  const auto g_source = pose_transforms(model, shape, source_pose);
  const auto g_canon = pose_transforms(model, shape, model.skeleton.canonical_pose);
  return apply_vertex_transforms(scan, compose_repose_transform(scan_weights, g_canon, g_source));
}

Mesh canonicalize_scan(const Mesh& scan, const BodyModel& model, const Pose& source_pose, const Shape& shape,
                       BindDiagnostics* diagnostics) {
  const Mesh posed = pose_body(model, shape, source_pose);
  const auto weights = bind_scan_to_model(scan, model, posed, kDefaultBindNeighbors, diagnostics);
  return canonicalize_scan(scan, weights, model, source_pose, shape);
}

UvSamples rasterize_uv(const Mesh& mesh, int resolution) {
  if (resolution < 1) {
    throw InvariantError("rasterize_uv: resolution must be positive");
  }
  if (!mesh.has_uv()) {
    throw InvariantError("rasterize_uv: mesh has no uv coordinates");
  }
  Mesh m = mesh;
  if (!m.has_normals()) {
    m.recompute_normals();
  }
  const int r = resolution;
  const auto texels = static_cast<std::size_t>(r) * r;
  std::vector<int> owner(texels, -1);
  std::vector<Eigen::Vector3d> bary(texels);
  constexpr double kEdge = 1e-12;
  for (std::size_t f = 0; f < m.faces.size(); ++f) {
    const auto& face = m.faces[f];
    // texel-space corners, y down
    Eigen::Vector2d p[3];
    for (int k = 0; k < 3; ++k) {
      const auto& uv = m.uv[static_cast<std::size_t>(face[k])];
      p[k] = {uv.x() * r - 0.5, (1.0 - uv.y()) * r - 0.5};
    }
    const double area = (p[1] - p[0]).x() * (p[2] - p[0]).y() - (p[1] - p[0]).y() * (p[2] - p[0]).x();
    if (std::abs(area) < 1e-18) {
      continue;
    }
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min({p[0].x(), p[1].x(), p[2].x()}))));
    const int x1 = std::min(r - 1, static_cast<int>(std::ceil(std::max({p[0].x(), p[1].x(), p[2].x()}))));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min({p[0].y(), p[1].y(), p[2].y()}))));
    const int y1 = std::min(r - 1, static_cast<int>(std::ceil(std::max({p[0].y(), p[1].y(), p[2].y()}))));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const auto t = static_cast<std::size_t>(y) * r + x;
        if (owner[t] >= 0) {
          continue;
        }
        const Eigen::Vector2d q(x, y);
        auto edge = [&](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
          return ((b - a).x() * (q - a).y() - (b - a).y() * (q - a).x()) / area;
        };
        const double b0 = edge(p[1], p[2]);
        const double b1 = edge(p[2], p[0]);
        const double b2 = edge(p[0], p[1]);
        if (b0 >= -kEdge && b1 >= -kEdge && b2 >= -kEdge) {
          owner[t] = static_cast<int>(f);
          bary[t] = Eigen::Vector3d(b0, b1, b2) / (b0 + b1 + b2);
        }
      }
    }
  }
  UvSamples out;
  out.resolution = r;
  for (std::size_t t = 0; t < texels; ++t) {
    if (owner[t] < 0) {
      continue;
    }
    const auto& face = m.faces[static_cast<std::size_t>(owner[t])];
    Eigen::Vector3d pos = Eigen::Vector3d::Zero();
    Eigen::Vector3d nrm = Eigen::Vector3d::Zero();
    for (int k = 0; k < 3; ++k) {
      pos += bary[t][k] * m.vertices[static_cast<std::size_t>(face[k])];
      nrm += bary[t][k] * m.normals[static_cast<std::size_t>(face[k])];
    }
    const double len = nrm.norm();
    out.texel.push_back(static_cast<int>(t));
    out.position.push_back(pos);
    out.normal.push_back(len > 0.0 ? Eigen::Vector3d(nrm / len) : face_normal(m, static_cast<std::size_t>(owner[t])));
  }
  return out;
}

Eigen::Vector3d sample_texture(const Image& texture, const Eigen::Vector2d& uv) {
  if (texture.width < 1 || texture.height < 1 || texture.channels < 3) {
    throw InvariantError("sample_texture: texture must be a nonempty RGB image");
  }
  const double fx = std::clamp(uv.x() * texture.width - 0.5, 0.0, texture.width - 1.0);
  const double fy = std::clamp((1.0 - uv.y()) * texture.height - 0.5, 0.0, texture.height - 1.0);
  const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
  const int x1 = std::min(x0 + 1, texture.width - 1), y1 = std::min(y0 + 1, texture.height - 1);
  const double ax = fx - x0, ay = fy - y0;
  Eigen::Vector3d out;
  for (int c = 0; c < 3; ++c) {
    const double top = (1.0 - ax) * texture.at(x0, y0, c) + ax * texture.at(x1, y0, c);
    const double bottom = (1.0 - ax) * texture.at(x0, y1, c) + ax * texture.at(x1, y1, c);
    out[c] = (1.0 - ay) * top + ay * bottom;
  }
  return out;
}

GaussianSet build_template(const Mesh& canonical_mesh, const Image& uv_texture, const BodyModel& model,
                           const Shape& shape, const nn::NetworkParams<float>& params, const TemplateConfig& config) {
  if (!canonical_mesh.has_uv()) {
    throw InvariantError("build_template: canonical mesh has no uv coordinates");
  }
  if (uv_texture.pixels.empty()) {
    throw InvariantError("build_template: texture is empty");
  }
  const int r = config.uv_resolution;
  const UvSamples samples = rasterize_uv(canonical_mesh, r);
  const auto plane = static_cast<std::size_t>(r) * r;

  std::vector<float> tex(3 * plane);
  std::vector<Eigen::Vector3d> texel_color(plane);
  for (int y = 0; y < r; ++y) {
    for (int x = 0; x < r; ++x) {
      const auto t = static_cast<std::size_t>(y) * r + x;
      texel_color[t] = sample_texture(uv_texture, {(x + 0.5) / r, 1.0 - (y + 0.5) / r}).cwiseMax(0.0).cwiseMin(1.0);
      for (int c = 0; c < 3; ++c) {
        tex[c * plane + t] = static_cast<float>(texel_color[t][c]);
      }
    }
  }
  std::vector<float> geo(7 * plane, 0.0f);
  for (std::size_t i = 0; i < samples.texel.size(); ++i) {
    const auto t = static_cast<std::size_t>(samples.texel[i]);
    for (int c = 0; c < 3; ++c) {
      geo[c * plane + t] = static_cast<float>(samples.position[i][c]);
      geo[(3 + c) * plane + t] = static_cast<float>(samples.normal[i][c]);
    }
    geo[6 * plane + t] = 1.0f;
  }
  const auto f_tex = nn::uv_encode(params, nn::Tensor<float>({3, r, r}, std::move(tex)));
  const auto f_pose = nn::pose_encode(params, nn::Tensor<float>({7, r, r}, std::move(geo)));
  const nn::FeatureMap<float> features{nn::concat<float>({f_tex.tensor, f_pose.tensor}), nn::FeatureTag::paired};
  const auto out = nn::unet_forward(params, "template_unet", features);
  const auto& o = out.tensor.data();

  const std::size_t n = samples.texel.size();
  const double spacing = n > 0 ? std::sqrt(surface_area(canonical_mesh) / static_cast<double>(n)) : 1.0;
  const double base_scale = std::log(0.5 * spacing);
  const double base_opacity = logit(config.base_opacity);
  auto at = [&](int channel, std::size_t t) { return static_cast<double>(o[channel * plane + t]); };
  constexpr double kColorClamp = 1e-4;

  GaussianSet g;
  g.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto t = static_cast<std::size_t>(samples.texel[i]);
    const Eigen::Vector3d offset(at(0, t), at(1, t), at(2, t));
    const Eigen::Vector3d center = samples.position[i] + config.max_offset * offset.array().tanh().matrix();
    const Eigen::Vector3d raw_scale = Eigen::Vector3d::Constant(base_scale) + Eigen::Vector3d(at(3, t), at(4, t), at(5, t));
    Eigen::Quaterniond q(1.0 + at(6, t), at(7, t), at(8, t), at(9, t));
    if (!(q.norm() > 1e-12)) {
      q = Eigen::Quaterniond::Identity();
    }
    q.normalize();
    Eigen::Vector3d color;
    for (int c = 0; c < 3; ++c) {
      const double base = std::clamp(texel_color[t][c], kColorClamp, 1.0 - kColorClamp);
      color[c] = sigmoid(logit(base) + at(11 + c, t));
    }
    g.push_back(center, base_opacity + at(10, t), raw_scale, q, color);
  }
  const Mesh canonical_template = pose_body(model, shape, model.skeleton.canonical_pose);
  g.weights = bind_points(samples.position, model.weights, canonical_template, config.bind_neighbors);
  g.validate();
  return g;
}

Eigen::Matrix3d polar_rotation(const Eigen::Matrix3d& a) {
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) {
    u.col(2) *= -1.0;
  }
  return u * v.transpose();
}

GaussianSet animate(const GaussianSet& canonical, const BodyModel& model, const Shape& shape, const Pose& target_pose,
                    bool rotate_frames) {
  if (!canonical.weights.has_value() || canonical.weights->rows() != canonical.size()) {
    throw InvariantError("animate: Gaussians are not bound to the skeleton");
  }
  const auto g_canon = pose_transforms(model, shape, model.skeleton.canonical_pose);
  const auto g_target = pose_transforms(model, shape, target_pose);
  const auto t = compose_repose_transform(*canonical.weights, g_target, g_canon);
  GaussianSet out = canonical;
  out.centers = apply_point_transforms(canonical.centers, t);
  if (rotate_frames) {
    const auto n = static_cast<long>(out.size());
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) {
      const Eigen::Quaterniond r(polar_rotation(t.transforms[i].topLeftCorner<3, 3>()));
      out.rotation[i] = (r * canonical.rotation[i]).normalized();
    }
  }
  return out;
}

} // namespace gsanim

#include "gsanim/fixtures.hpp"

#include "gsanim/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace gsanim {

Image synthetic_texture(int size) {
  Image img(size, size, 3);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double u = (x + 0.5) / size, v = (y + 0.5) / size;
      const double check = ((x * 8 / size + y * 8 / size) % 2) ? 0.15 : 0.0;
      img.at(x, y, 0) = static_cast<float>(0.2 + 0.6 * u + check);
      img.at(x, y, 1) = static_cast<float>(0.8 - 0.6 * v + check * 0.5);
      img.at(x, y, 2) = static_cast<float>(0.3 + 0.4 * std::sin(6.0 * u) * std::sin(6.0 * v) + 0.3);
    }
  }
  for (auto& p : img.pixels) {
    p = std::clamp(p, 0.0f, 1.0f);
  }
  return img;
}

template <typename T>
DisplacedLimbFixture<T> make_displaced_limb_fixture(const DisplacedLimbConfig& config) {
  namespace sj = synthetic_joint;
  DisplacedLimbFixture<T> out;
  const SyntheticBody body = make_synthetic_body(config.seed);
  out.model = body.model;
  const Shape shape = Shape::zero(out.model.shape_dim());
  const Mesh canon = pose_body(out.model, shape, out.model.skeleton.canonical_pose);
  TemplateConfig tc;
  tc.uv_resolution = config.uv_resolution;
  const GaussianSet tpl = build_template(canon, synthetic_texture(64), out.model, shape,
                                         nn::make_network_params<float>(config.seed), tc);

  out.target_pose = out.model.skeleton.canonical_pose;
  auto bend = [&](int joint, const Eigen::Vector3d& axis, double angle) {
    auto& q = out.target_pose.joint_rotations[static_cast<std::size_t>(joint)];
    q = Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis.normalized())) * q;
  };
  bend(sj::l_elbow, Eigen::Vector3d::UnitY(), 0.6);
  bend(sj::r_knee, Eigen::Vector3d::UnitX(), 0.4);
  out.truth = animate(tpl, out.model, shape, out.target_pose);

  GaussianSet coarse = out.truth;
  const Eigen::Vector3d shift = config.offset * Eigen::Vector3d(1.0, 1.0, 1.0).normalized();
  for (std::size_t i = 0; i < coarse.size(); ++i) {
    const auto row = coarse.weights->row(i);
    const auto top = std::max_element(row.begin(), row.end(),
                                      [](const WeightEntry& a, const WeightEntry& b) { return a.weight < b.weight; });
    if (top != row.end() && (top->joint == sj::l_elbow || top->joint == sj::l_wrist || top->joint == sj::l_hand)) {
      coarse.centers[i] += shift;
      out.limb.push_back(i);
    }
  }

  const auto rig = framing_rig(out.truth.centers, config.resolution);

  out.sample.input.coarse = std::move(coarse);
  out.sample.input.target_body = pose_target_body(out.model, shape, out.target_pose);
  out.sample.input.rig = rig;
  for (const auto& cam : rig) {
    out.sample.truth.push_back(rasterize<T>(out.truth, cam, Eigen::Vector3d::Zero()));
  }
  return out;
}

GaussianSet surface_gaussians(const BodyModel& model, std::size_t count, std::uint64_t seed) {
  const Shape shape = Shape::zero(model.shape_dim());
  const Mesh canon = pose_body(model, shape, model.skeleton.canonical_pose);
  const PointSet samples = sample_surface(canon, count, seed);
  const double radius = std::log(0.5 * std::sqrt(surface_area(canon) / static_cast<double>(count)));
  GaussianSet g;
  g.reserve(count);
  for (std::size_t i = 0; i < samples.points.size(); ++i) {
    const Eigen::Quaterniond q = Eigen::Quaterniond::FromTwoVectors(Eigen::Vector3d::UnitZ(), samples.normals[i]);
    g.push_back(samples.points[i], logit(0.9), Eigen::Vector3d(radius, radius, radius - 1.0), q.normalized(),
                Eigen::Vector3d(0.5 + 0.4 * samples.normals[i].x(), 0.5 + 0.4 * samples.normals[i].y(),
                                0.5 + 0.4 * samples.normals[i].z()));
  }
  g.weights = bind_points(g.centers, model.weights, canon, kDefaultBindNeighbors);
  return g;
}

template DisplacedLimbFixture<float> make_displaced_limb_fixture<float>(const DisplacedLimbConfig&);
template DisplacedLimbFixture<double> make_displaced_limb_fixture<double>(const DisplacedLimbConfig&);

} // namespace gsanim

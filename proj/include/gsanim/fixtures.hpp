#pragma once

#include "gsanim/refine.hpp"

#include <cstdint>
#include <vector>

namespace gsanim {

struct DisplacedLimbConfig {
  std::uint64_t seed = 0;
  int resolution = 64;     // rig image size
  int uv_resolution = 32;  // template texels per side
  double offset = 0.01;    // limb displacement, meters
};

/// Synthetic training pair: the truth is the animated template of a synthetic
/// body, the coarse set is the same with the left forearm and hand shifted by
/// `offset`. Truth views are renders of the truth set through the rig.
template <typename T>
struct DisplacedLimbFixture {
  BodyModel model;
  Pose target_pose;
  GaussianSet truth;
  std::vector<std::size_t> limb;  // displaced Gaussians
  TrainSample<T> sample;
};

template <typename T>
DisplacedLimbFixture<T> make_displaced_limb_fixture(const DisplacedLimbConfig& config = {});

/// `count` surface-sampled Gaussians on the canonical-pose body of `model`
/// (zero shape), oriented along the surface and bound to the skeleton.
GaussianSet surface_gaussians(const BodyModel& model, std::size_t count, std::uint64_t seed);

/// Procedural RGB texture with smooth gradients and a checker overlay.
Image synthetic_texture(int size);

} // namespace gsanim

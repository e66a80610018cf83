#pragma once

#include "gsanim/gaussians.hpp"
#include "gsanim/image.hpp"
#include "gsanim/mesh.hpp"

#include <Eigen/Dense>

#include <array>
#include <memory>
#include <vector>

namespace gsanim {

/// Pinhole camera. Camera space follows the computer-vision convention: +x
/// right, +y down, +z forward. Pixel (i, j) is centered at coordinates (i, j).
struct Camera {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  Eigen::Matrix4d world_to_camera = Eigen::Matrix4d::Identity();
  int width = 1;
  int height = 1;
  double near = 0.01;
  double far = 100.0;

  void validate() const;
  Eigen::Vector3d to_camera(const Eigen::Vector3d& world) const {
    return world_to_camera.topLeftCorner<3, 3>() * world + world_to_camera.topRightCorner<3, 1>();
  }
  Eigen::Vector2d project(const Eigen::Vector3d& cam) const {
    return {fx * cam.x() / cam.z() + cx, fy * cam.y() / cam.z() + cy};
  }
};

struct RasterConfig {
  int tile_size = 16;
  double extent_sigmas = 3.0;        // screen-space box half-size in standard deviations
  double antialias = 0.3;            // px^2 added to the projected covariance
  double min_transmittance = 1e-4;   // early termination
  double min_eigenvalue = 1e-8;      // SPD floor on the projected covariance
};

struct Projection {
  Eigen::Vector2d mean;  // pixels
  Eigen::Matrix2d cov;   // pixels^2, SPD
  double depth = 0.0;    // camera-space z, meters
  bool culled = true;
};

/// EWA projection: cov2d = J W Sigma W^T J^T + antialias * I with J the
/// Jacobian of the perspective map at the center. Culled outside [near, far].
Projection project_gaussian(const Eigen::Vector3d& center, const Eigen::Matrix3d& covariance,
                            const Camera& camera, const RasterConfig& config = {});

template <typename T>
struct RasterWorkspace;

template <typename T>
struct RenderOutput {
  ImageT<T> color;  // 3 channels
  ImageT<T> mask;   // accumulated alpha
  ImageT<T> depth;  // alpha-weighted camera z (divide by mask for the expected depth)
  std::shared_ptr<const RasterWorkspace<T>> workspace;
};

/// Front-to-back alpha compositing of depth-sorted splats over a 16x16 tile
/// grid. `T` selects the per-pixel arithmetic; float is the production path
/// and double the reference path used by gradient checks.
template <typename T>
RenderOutput<T> rasterize(const GaussianSet& gaussians, const Camera& camera,
                          const Eigen::Vector3d& background, const RasterConfig& config = {});

struct GaussianGrads {
  std::vector<Eigen::Vector3d> center;
  std::vector<Eigen::Vector3d> raw_scale;
  std::vector<Eigen::Vector4d> rotation;  // (w, x, y, z)
  std::vector<double> raw_opacity;
  std::vector<Eigen::Vector3d> color;

  explicit GaussianGrads(std::size_t n = 0);
  std::size_t size() const {
    return center.size();
  }
  GaussianGrads& operator+=(const GaussianGrads& other);
  /// Flattened as 14 values per Gaussian: center, raw_scale, rotation, opacity, color.
  std::vector<double> flatten() const;
};

/// Exact reverse of `rasterize` for the workspace held in `forward`. The
/// projected-covariance eigenvalue floor is treated as inactive.
template <typename T>
GaussianGrads rasterize_backward(const GaussianSet& gaussians, const Camera& camera,
                                 const RenderOutput<T>& forward, const ImageT<T>& grad_color,
                                 const ImageT<T>& grad_mask);

/// Cameras at azimuths 0, 90, 180, 270 degrees around the vertical axis, at
/// 2.5 * subject_radius from the centroid, looking at it, sharing intrinsics.
std::array<Camera, 4> four_view_rig(double subject_radius, int resolution,
                                    const Eigen::Vector3d& centroid = Eigen::Vector3d::Zero());

/// four_view_rig around the bounding box of `points`: centered on the box
/// center with radius half the box diagonal.
std::array<Camera, 4> framing_rig(const std::vector<Eigen::Vector3d>& points, int resolution);

template <typename T>
struct GeometryRender {
  ImageT<T> normal_map;  // RGB, (n + 1) / 2 with n in a view frame where +z faces the viewer
  ImageT<T> silhouette;  // 1 channel coverage
};

/// Z-buffered triangle rasterization with perspective-correct normal
/// interpolation. Triangles crossing the near plane are skipped.
template <typename T>
GeometryRender<T> rasterize_mesh_geometry(const Mesh& mesh, const Camera& camera);

/// Normal map estimated from a splat render's depth buffer, encoded like
/// rasterize_mesh_geometry. Pixels with mask < 0.5 stay zero.
template <typename T>
ImageT<T> normals_from_depth(const RenderOutput<T>& render, const Camera& camera);

} // namespace gsanim

#include "gsanim/render.hpp"

#include "gsanim/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace gsanim {

void Camera::validate() const {
  if (!(fx > 0.0 && fy > 0.0)) {
    throw InvariantError("camera focal lengths must be positive");
  }
  if (width < 1 || height < 1) {
    throw InvariantError("camera resolution must be positive");
  }
  if (!(near > 0.0 && near < far)) {
    throw InvariantError("camera requires 0 < near < far");
  }
  const Eigen::Matrix3d r = world_to_camera.topLeftCorner<3, 3>();
  if ((r * r.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-6 ||
      std::abs(r.determinant() - 1.0) > 1e-6) {
    throw InvariantError("camera extrinsic rotation is not orthonormal");
  }
  if (!world_to_camera.allFinite()) {
    throw InvariantError("camera extrinsic is not finite");
  }
}

namespace {

Eigen::Matrix<double, 2, 3> perspective_jacobian(const Eigen::Vector3d& p, const Camera& cam) {
  const double iz = 1.0 / p.z();
  Eigen::Matrix<double, 2, 3> j;
  j << cam.fx * iz, 0.0, -cam.fx * p.x() * iz * iz, 0.0, cam.fy * iz, -cam.fy * p.y() * iz * iz;
  return j;
}

Eigen::Matrix2d clamp_spd(const Eigen::Matrix2d& c, double floor) {
  const double tr = 0.5 * (c(0, 0) + c(1, 1));
  const double diff = 0.5 * (c(0, 0) - c(1, 1));
  const double rad = std::sqrt(diff * diff + c(0, 1) * c(0, 1));
  if (tr - rad >= floor) {
    return c;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(c);
  const Eigen::Vector2d ev = es.eigenvalues().cwiseMax(floor);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

} // namespace

Projection project_gaussian(const Eigen::Vector3d& center, const Eigen::Matrix3d& covariance,
                            const Camera& camera, const RasterConfig& config) {
  Projection out;
  const Eigen::Vector3d p = camera.to_camera(center);
  out.depth = p.z();
  if (!(p.z() >= camera.near && p.z() <= camera.far)) {
    return out;
  }
  const Eigen::Matrix3d rw = camera.world_to_camera.topLeftCorner<3, 3>();
  const Eigen::Matrix<double, 2, 3> j = perspective_jacobian(p, camera);
  Eigen::Matrix2d cov = j * (rw * covariance * rw.transpose()) * j.transpose();
  cov(0, 0) += config.antialias;
  cov(1, 1) += config.antialias;
  cov(0, 1) = cov(1, 0) = 0.5 * (cov(0, 1) + cov(1, 0));
  out.cov = clamp_spd(cov, config.min_eigenvalue);
  out.mean = camera.project(p);
  out.culled = false;
  return out;
}

GaussianGrads::GaussianGrads(std::size_t n)
    : center(n, Eigen::Vector3d::Zero()),
      raw_scale(n, Eigen::Vector3d::Zero()),
      rotation(n, Eigen::Vector4d::Zero()),
      raw_opacity(n, 0.0),
      color(n, Eigen::Vector3d::Zero()) {}

GaussianGrads& GaussianGrads::operator+=(const GaussianGrads& o) {
  if (o.size() != size()) {
    throw InvariantError("gradient accumulation size mismatch");
  }
  for (std::size_t i = 0; i < size(); ++i) {
    center[i] += o.center[i];
    raw_scale[i] += o.raw_scale[i];
    rotation[i] += o.rotation[i];
    raw_opacity[i] += o.raw_opacity[i];
    color[i] += o.color[i];
  }
  return *this;
}

std::vector<double> GaussianGrads::flatten() const {
  std::vector<double> out;
  out.reserve(size() * 14);
  for (std::size_t i = 0; i < size(); ++i) {
    out.insert(out.end(), center[i].data(), center[i].data() + 3);
    out.insert(out.end(), raw_scale[i].data(), raw_scale[i].data() + 3);
    out.insert(out.end(), rotation[i].data(), rotation[i].data() + 4);
    out.push_back(raw_opacity[i]);
    out.insert(out.end(), color[i].data(), color[i].data() + 3);
  }
  return out;
}

template <typename T>
struct RasterWorkspace {
  struct Splat {
    bool visible = false;
    Eigen::Vector3d p_cam;
    Eigen::Matrix3d view_cov;  // W Sigma W^T
    Eigen::Matrix2d cov2d;
    Eigen::Vector2d mean;
    double alpha = 0.0;
    int x0 = 0, x1 = -1, y0 = 0, y1 = -1;
    // per-pixel arithmetic copies
    T mx{}, my{}, ca{}, cb{}, cc{}, a{}, depth{};
    T rgb[3] = {};
  };

  RasterConfig config;
  T background[3] = {};
  int width = 0;
  int height = 0;
  int tiles_x = 0;
  int tiles_y = 0;
  std::vector<Splat> splats;
  std::vector<std::vector<int>> tiles;
};

namespace {

template <typename T>
std::shared_ptr<RasterWorkspace<T>> preprocess(const GaussianSet& g, const Camera& cam,
                                               const Eigen::Vector3d& background,
                                               const RasterConfig& config) {
  cam.validate();
  g.validate();
  if (config.tile_size < 1) {
    throw InvariantError("raster tile size must be >= 1");
  }
  auto ws = std::make_shared<RasterWorkspace<T>>();
  ws->config = config;
  for (int c = 0; c < 3; ++c) {
    ws->background[c] = static_cast<T>(background[c]);
  }
  ws->width = cam.width;
  ws->height = cam.height;
  ws->tiles_x = (cam.width + config.tile_size - 1) / config.tile_size;
  ws->tiles_y = (cam.height + config.tile_size - 1) / config.tile_size;
  ws->splats.resize(g.size());
  const Eigen::Matrix3d rw = cam.world_to_camera.topLeftCorner<3, 3>();

  const auto n = static_cast<long>(g.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    auto& s = ws->splats[i];
    const Eigen::Vector3d p = cam.to_camera(g.centers[i]);
    s.p_cam = p;
    if (!(p.z() >= cam.near && p.z() <= cam.far)) {
      continue;
    }
    s.view_cov = rw * g.covariance(i) * rw.transpose();
    const Eigen::Matrix<double, 2, 3> j = perspective_jacobian(p, cam);
    Eigen::Matrix2d cov = j * s.view_cov * j.transpose();
    cov(0, 0) += config.antialias;
    cov(1, 1) += config.antialias;
    cov(0, 1) = cov(1, 0) = 0.5 * (cov(0, 1) + cov(1, 0));
    cov = clamp_spd(cov, config.min_eigenvalue);
    s.cov2d = cov;
    s.mean = cam.project(p);
    const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(0, 1);
    const double lmax = 0.5 * (cov(0, 0) + cov(1, 1)) +
                        std::sqrt(0.25 * (cov(0, 0) - cov(1, 1)) * (cov(0, 0) - cov(1, 1)) +
                                  cov(0, 1) * cov(0, 1));
    const double radius = config.extent_sigmas * std::sqrt(lmax);
    const double fx0 = std::ceil(s.mean.x() - radius);
    const double fx1 = std::floor(s.mean.x() + radius);
    const double fy0 = std::ceil(s.mean.y() - radius);
    const double fy1 = std::floor(s.mean.y() + radius);
    if (!(fx1 >= 0.0 && fy1 >= 0.0 && fx0 <= cam.width - 1 && fy0 <= cam.height - 1)) {
      continue;
    }
    s.x0 = static_cast<int>(std::max(fx0, 0.0));
    s.x1 = static_cast<int>(std::min(fx1, static_cast<double>(cam.width - 1)));
    s.y0 = static_cast<int>(std::max(fy0, 0.0));
    s.y1 = static_cast<int>(std::min(fy1, static_cast<double>(cam.height - 1)));
    s.alpha = g.opacity(i);
    s.visible = true;
    s.mx = static_cast<T>(s.mean.x());
    s.my = static_cast<T>(s.mean.y());
    s.ca = static_cast<T>(cov(1, 1) / det);
    s.cb = static_cast<T>(-cov(0, 1) / det);
    s.cc = static_cast<T>(cov(0, 0) / det);
    s.a = static_cast<T>(s.alpha);
    s.depth = static_cast<T>(p.z());
    for (int c = 0; c < 3; ++c) {
      s.rgb[c] = static_cast<T>(g.color[i][c]);
    }
  }

  std::vector<int> order;
  order.reserve(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (ws->splats[i].visible) {
      order.push_back(static_cast<int>(i));
    }
  }
  // ties on depth resolve by index, so the order is a function of the set
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double za = ws->splats[a].p_cam.z();
    const double zb = ws->splats[b].p_cam.z();
    return za < zb || (za == zb && a < b);
  });
  ws->tiles.assign(static_cast<std::size_t>(ws->tiles_x) * ws->tiles_y, {});
  const int ts = config.tile_size;
  for (int id : order) {
    const auto& s = ws->splats[id];
    for (int ty = s.y0 / ts; ty <= s.y1 / ts; ++ty) {
      for (int tx = s.x0 / ts; tx <= s.x1 / ts; ++tx) {
        ws->tiles[static_cast<std::size_t>(ty) * ws->tiles_x + tx].push_back(id);
      }
    }
  }
  return ws;
}

// Runs the compositing loop for one pixel. `visit(list_pos, id, w, trans_before, gauss)`
// is called for each contributing splat. Returns the final transmittance.
template <typename T, typename Visit>
T composite_pixel(const RasterWorkspace<T>& ws, const std::vector<int>& list, int px, int py,
                  Visit&& visit) {
  T trans = T(1);
  const T min_t = static_cast<T>(ws.config.min_transmittance);
  const T tx = static_cast<T>(px);
  const T ty = static_cast<T>(py);
  for (std::size_t k = 0; k < list.size(); ++k) {
    const auto& s = ws.splats[static_cast<std::size_t>(list[k])];
    if (px < s.x0 || px > s.x1 || py < s.y0 || py > s.y1) {
      continue;
    }
    const T dx = tx - s.mx;
    const T dy = ty - s.my;
    const T power = T(-0.5) * (s.ca * dx * dx + s.cc * dy * dy) - s.cb * dx * dy;
    const T gauss = std::exp(power);
    const T w = s.a * gauss;
    visit(k, list[k], w, trans, gauss, dx, dy);
    trans *= (T(1) - w);
    if (trans < min_t) {
      break;
    }
  }
  return trans;
}

} // namespace

template <typename T>
RenderOutput<T> rasterize(const GaussianSet& g, const Camera& cam, const Eigen::Vector3d& background,
                          const RasterConfig& config) {
  auto ws = preprocess<T>(g, cam, background, config);
  RenderOutput<T> out;
  out.color = ImageT<T>(cam.width, cam.height, 3);
  out.mask = ImageT<T>(cam.width, cam.height, 1);
  out.depth = ImageT<T>(cam.width, cam.height, 1);
  const int ts = config.tile_size;
  const long tile_count = static_cast<long>(ws->tiles.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (long t = 0; t < tile_count; ++t) {
    const auto& list = ws->tiles[static_cast<std::size_t>(t)];
    const int tx0 = static_cast<int>(t % ws->tiles_x) * ts;
    const int ty0 = static_cast<int>(t / ws->tiles_x) * ts;
    for (int py = ty0; py < std::min(ty0 + ts, cam.height); ++py) {
      for (int px = tx0; px < std::min(tx0 + ts, cam.width); ++px) {
        T acc[3] = {T(0), T(0), T(0)};
        T depth = T(0);
        const T trans = composite_pixel(*ws, list, px, py,
                                        [&](std::size_t, int id, T w, T tb, T, T, T) {
                                          const auto& s = ws->splats[static_cast<std::size_t>(id)];
                                          const T wt = w * tb;
                                          for (int c = 0; c < 3; ++c) {
                                            acc[c] += s.rgb[c] * wt;
                                          }
                                          depth += s.depth * wt;
                                        });
        for (int c = 0; c < 3; ++c) {
          out.color.at(px, py, c) = acc[c] + trans * ws->background[c];
        }
        out.mask.at(px, py) = T(1) - trans;
        out.depth.at(px, py) = depth;
      }
    }
  }
  out.workspace = std::move(ws);
  return out;
}

template <typename T>
GaussianGrads rasterize_backward(const GaussianSet& g, const Camera& cam,
                                 const RenderOutput<T>& forward, const ImageT<T>& grad_color,
                                 const ImageT<T>& grad_mask) {
  if (!forward.workspace) {
    throw InvariantError("rasterize_backward: forward workspace missing");
  }
  const auto& ws = *forward.workspace;
  if (ws.splats.size() != g.size() || ws.width != cam.width || ws.height != cam.height) {
    throw InvariantError("rasterize_backward: workspace does not match inputs");
  }
  if (grad_color.width != cam.width || grad_color.height != cam.height || grad_color.channels != 3 ||
      grad_mask.width != cam.width || grad_mask.height != cam.height || grad_mask.channels != 1) {
    throw InvariantError("rasterize_backward: gradient image shape mismatch");
  }

  // per splat: d mean (2), d conic (a, b, c), d alpha, d rgb (3)
  constexpr int kSlots = 9;
  const int ts = ws.config.tile_size;
  const std::size_t tile_count = ws.tiles.size();
  std::vector<std::vector<double>> tile_acc(tile_count);

  const long tc = static_cast<long>(tile_count);
#pragma omp parallel for schedule(dynamic, 1)
  for (long t = 0; t < tc; ++t) {
    const auto& list = ws.tiles[static_cast<std::size_t>(t)];
    auto& acc = tile_acc[static_cast<std::size_t>(t)];
    acc.assign(list.size() * kSlots, 0.0);
    if (list.empty()) {
      continue;
    }
    struct Hit {
      std::size_t pos;
      int id;
      T w, tb, gauss, dx, dy;
    };
    std::vector<Hit> hits;
    const int tx0 = static_cast<int>(t % ws.tiles_x) * ts;
    const int ty0 = static_cast<int>(t / ws.tiles_x) * ts;
    for (int py = ty0; py < std::min(ty0 + ts, cam.height); ++py) {
      for (int px = tx0; px < std::min(tx0 + ts, cam.width); ++px) {
        const T gm = grad_mask.at(px, py);
        const T gc[3] = {grad_color.at(px, py, 0), grad_color.at(px, py, 1), grad_color.at(px, py, 2)};
        if (gm == T(0) && gc[0] == T(0) && gc[1] == T(0) && gc[2] == T(0)) {
          continue;
        }
        hits.clear();
        composite_pixel(ws, list, px, py, [&](std::size_t pos, int id, T w, T tb, T gauss, T dx, T dy) {
          hits.push_back({pos, id, w, tb, gauss, dx, dy});
        });
        T tail[3] = {ws.background[0], ws.background[1], ws.background[2]};
        T after = T(1);
        for (auto it = hits.rbegin(); it != hits.rend(); ++it) {
          const auto& s = ws.splats[static_cast<std::size_t>(it->id)];
          double* a = acc.data() + it->pos * kSlots;
          T dldw = gm * after;
          for (int c = 0; c < 3; ++c) {
            dldw += gc[c] * (s.rgb[c] - tail[c]);
            a[6 + c] += static_cast<double>(gc[c] * it->w * it->tb);
          }
          dldw *= it->tb;
          a[5] += static_cast<double>(dldw * it->gauss);
          const T dlp = dldw * it->w;
          a[0] += static_cast<double>(dlp * (s.ca * it->dx + s.cb * it->dy));
          a[1] += static_cast<double>(dlp * (s.cb * it->dx + s.cc * it->dy));
          a[2] += static_cast<double>(dlp * T(-0.5) * it->dx * it->dx);
          a[3] += static_cast<double>(dlp * -(it->dx * it->dy));
          a[4] += static_cast<double>(dlp * T(-0.5) * it->dy * it->dy);
          for (int c = 0; c < 3; ++c) {
            tail[c] = s.rgb[c] * it->w + (T(1) - it->w) * tail[c];
          }
          after *= (T(1) - it->w);
        }
      }
    }
  }

  // merge in fixed tile order
  std::vector<double> per_splat(g.size() * kSlots, 0.0);
  for (std::size_t t = 0; t < tile_count; ++t) {
    const auto& list = ws.tiles[t];
    for (std::size_t k = 0; k < list.size(); ++k) {
      for (int q = 0; q < kSlots; ++q) {
        per_splat[static_cast<std::size_t>(list[k]) * kSlots + q] += tile_acc[t][k * kSlots + q];
      }
    }
  }

  GaussianGrads out(g.size());
  const Eigen::Matrix3d rw = cam.world_to_camera.topLeftCorner<3, 3>();
  const auto n = static_cast<long>(g.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    const auto& s = ws.splats[i];
    if (!s.visible) {
      continue;
    }
    const double* a = per_splat.data() + i * kSlots;
    out.color[i] = Eigen::Vector3d(a[6], a[7], a[8]);
    const double alpha = s.alpha;
    out.raw_opacity[i] = a[5] * alpha * (1.0 - alpha);

    // conic -> 2D covariance
    const Eigen::Matrix2d conic = s.cov2d.inverse();
    Eigen::Matrix2d g_conic;
    g_conic << a[2], 0.5 * a[3], 0.5 * a[3], a[4];
    const Eigen::Matrix2d g_cov2d = -conic * g_conic * conic;

    const Eigen::Vector3d& p = s.p_cam;
    const Eigen::Matrix<double, 2, 3> j = perspective_jacobian(p, cam);
    const Eigen::Matrix3d g_view = j.transpose() * g_cov2d * j;
    const Eigen::Matrix<double, 2, 3> g_j = 2.0 * g_cov2d * j * s.view_cov;

    // camera-space position: through the mean and through the Jacobian
    const Eigen::Vector2d g_mean(a[0], a[1]);
    Eigen::Vector3d g_p = j.transpose() * g_mean;
    const double iz = 1.0 / p.z();
    const double iz2 = iz * iz;
    const double iz3 = iz2 * iz;
    g_p.x() += g_j(0, 2) * (-cam.fx * iz2);
    g_p.y() += g_j(1, 2) * (-cam.fy * iz2);
    g_p.z() += g_j(0, 0) * (-cam.fx * iz2) + g_j(0, 2) * (2.0 * cam.fx * p.x() * iz3) +
               g_j(1, 1) * (-cam.fy * iz2) + g_j(1, 2) * (2.0 * cam.fy * p.y() * iz3);
    out.center[i] = rw.transpose() * g_p;

    // world covariance -> scale and rotation
    const Eigen::Matrix3d g_sigma = rw.transpose() * g_view * rw;
    const Eigen::Vector4d q(g.rotation[i].w(), g.rotation[i].x(), g.rotation[i].y(), g.rotation[i].z());
    const double qn = q.norm();
    const Eigen::Vector4d u = q / qn;
    const Eigen::Matrix3d r = rotation_from_wxyz(u);
    const Eigen::Vector3d sc = g.raw_scale[i].array().exp();
    const Eigen::Matrix3d m = r * sc.asDiagonal();
    const Eigen::Matrix3d g_m = 2.0 * g_sigma * m;
    for (int k = 0; k < 3; ++k) {
      out.raw_scale[i][k] = r.col(k).dot(g_m.col(k)) * sc[k];
    }
    const Eigen::Matrix3d gr = g_m * sc.asDiagonal();
    const double w = u[0], x = u[1], y = u[2], z = u[3];
    Eigen::Vector4d g_u;
    g_u[0] = 2.0 * (-z * gr(0, 1) + y * gr(0, 2) + z * gr(1, 0) - x * gr(1, 2) - y * gr(2, 0) + x * gr(2, 1));
    g_u[1] = 2.0 * (y * gr(0, 1) + z * gr(0, 2) + y * gr(1, 0) - 2.0 * x * gr(1, 1) - w * gr(1, 2) +
                    z * gr(2, 0) + w * gr(2, 1) - 2.0 * x * gr(2, 2));
    g_u[2] = 2.0 * (-2.0 * y * gr(0, 0) + x * gr(0, 1) + w * gr(0, 2) + x * gr(1, 0) + z * gr(1, 2) -
                    w * gr(2, 0) + z * gr(2, 1) - 2.0 * y * gr(2, 2));
    g_u[3] = 2.0 * (-2.0 * z * gr(0, 0) - w * gr(0, 1) + x * gr(0, 2) + w * gr(1, 0) - 2.0 * z * gr(1, 1) +
                    y * gr(1, 2) + x * gr(2, 0) + y * gr(2, 1));
    out.rotation[i] = (g_u - u * u.dot(g_u)) / qn;
  }
  return out;
}

namespace {

// exact sin/cos for multiples of 90 degrees
constexpr double kSin90[4] = {0.0, 1.0, 0.0, -1.0};
constexpr double kCos90[4] = {1.0, 0.0, -1.0, 0.0};

} // namespace

std::array<Camera, 4> four_view_rig(double subject_radius, int resolution,
                                    const Eigen::Vector3d& centroid) {
  if (!(subject_radius > 0.0)) {
    throw InvariantError("four_view_rig: subject radius must be positive");
  }
  if (resolution < 1) {
    throw InvariantError("four_view_rig: resolution must be positive");
  }
  const double distance = 2.5 * subject_radius;
  std::array<Camera, 4> rig;
  for (int k = 0; k < 4; ++k) {
    const Eigen::Vector3d dir(kSin90[k], 0.0, kCos90[k]);
    const Eigen::Vector3d position = centroid + distance * dir;
    const Eigen::Vector3d z_axis = -dir;
    const Eigen::Vector3d y_axis(0.0, -1.0, 0.0);
    const Eigen::Vector3d x_axis = y_axis.cross(z_axis);
    Eigen::Matrix3d r;
    r.row(0) = x_axis.transpose();
    r.row(1) = y_axis.transpose();
    r.row(2) = z_axis.transpose();
    Camera& cam = rig[static_cast<std::size_t>(k)];
    cam.world_to_camera.setIdentity();
    cam.world_to_camera.topLeftCorner<3, 3>() = r;
    cam.world_to_camera.topRightCorner<3, 1>() = -(r * position);
    cam.fx = cam.fy = static_cast<double>(resolution);
    cam.cx = cam.cy = 0.5 * resolution;
    cam.width = cam.height = resolution;
    cam.near = 0.01;
    cam.far = 100.0 * std::max(1.0, distance);
  }
  return rig;
}

std::array<Camera, 4> framing_rig(const std::vector<Eigen::Vector3d>& points, int resolution) {
  if (points.empty()) {
    throw InvariantError("framing_rig: no points to frame");
  }
  Eigen::Vector3d lo = points.front(), hi = lo;
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return four_view_rig(std::max(0.5 * (hi - lo).norm(), 1e-3), resolution, 0.5 * (lo + hi));
}

template <typename T>
GeometryRender<T> rasterize_mesh_geometry(const Mesh& mesh, const Camera& cam) {
  cam.validate();
  GeometryRender<T> out;
  out.normal_map = ImageT<T>(cam.width, cam.height, 3);
  out.silhouette = ImageT<T>(cam.width, cam.height, 1);
  if (mesh.faces.empty()) {
    return out;
  }
  if (!mesh.has_normals()) {
    throw InvariantError("rasterize_mesh_geometry: mesh has no normals");
  }
  mesh.validate();
  const Eigen::Matrix3d rw = cam.world_to_camera.topLeftCorner<3, 3>();
  std::vector<Eigen::Vector3d> pc(mesh.vertex_count());
  std::vector<Eigen::Vector2d> px(mesh.vertex_count());
  std::vector<Eigen::Vector3d> nc(mesh.vertex_count());
  for (std::size_t v = 0; v < mesh.vertex_count(); ++v) {
    pc[v] = cam.to_camera(mesh.vertices[v]);
    px[v] = Eigen::Vector2d(cam.fx * pc[v].x() / pc[v].z() + cam.cx, cam.fy * pc[v].y() / pc[v].z() + cam.cy);
    // vision camera frame -> view frame with +z toward the viewer
    const Eigen::Vector3d n = rw * mesh.normals[v];
    nc[v] = Eigen::Vector3d(n.x(), -n.y(), -n.z());
  }
  std::vector<double> zbuf(static_cast<std::size_t>(cam.width) * cam.height,
                           std::numeric_limits<double>::infinity());
  for (const auto& f : mesh.faces) {
    if (pc[f[0]].z() < cam.near || pc[f[1]].z() < cam.near || pc[f[2]].z() < cam.near) {
      continue;
    }
    const Eigen::Vector2d& a = px[f[0]];
    const Eigen::Vector2d& b = px[f[1]];
    const Eigen::Vector2d& c = px[f[2]];
    const double area = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
    if (area == 0.0 || !std::isfinite(area)) {
      continue;
    }
    const int x0 = std::max(0, static_cast<int>(std::ceil(std::min({a.x(), b.x(), c.x()}))));
    const int x1 = std::min(cam.width - 1, static_cast<int>(std::floor(std::max({a.x(), b.x(), c.x()}))));
    const int y0 = std::max(0, static_cast<int>(std::ceil(std::min({a.y(), b.y(), c.y()}))));
    const int y1 = std::min(cam.height - 1, static_cast<int>(std::floor(std::max({a.y(), b.y(), c.y()}))));
    const double inv_area = 1.0 / area;
    const double iz[3] = {1.0 / pc[f[0]].z(), 1.0 / pc[f[1]].z(), 1.0 / pc[f[2]].z()};
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const Eigen::Vector2d p(x, y);
        const double w0 = ((b - p).x() * (c - p).y() - (b - p).y() * (c - p).x()) * inv_area;
        const double w1 = ((c - p).x() * (a - p).y() - (c - p).y() * (a - p).x()) * inv_area;
        const double w2 = 1.0 - w0 - w1;
        if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) {
          continue;
        }
        const double inv_z = w0 * iz[0] + w1 * iz[1] + w2 * iz[2];
        const double z = 1.0 / inv_z;
        const std::size_t idx = static_cast<std::size_t>(y) * cam.width + x;
        if (!(z < zbuf[idx])) {
          continue;
        }
        zbuf[idx] = z;
        Eigen::Vector3d n = (w0 * iz[0] * nc[f[0]] + w1 * iz[1] * nc[f[1]] + w2 * iz[2] * nc[f[2]]) * z;
        const double len = n.norm();
        n = len > 0.0 ? Eigen::Vector3d(n / len) : Eigen::Vector3d::UnitZ();
        for (int ch = 0; ch < 3; ++ch) {
          out.normal_map.at(x, y, ch) = static_cast<T>(0.5 * (n[ch] + 1.0));
        }
        out.silhouette.at(x, y) = T(1);
      }
    }
  }
  return out;
}

template <typename T>
ImageT<T> normals_from_depth(const RenderOutput<T>& render, const Camera& cam) {
  const int w = render.mask.width;
  const int h = render.mask.height;
  ImageT<T> out(w, h, 3);
  auto valid = [&](int x, int y) {
    return x >= 0 && y >= 0 && x < w && y < h && render.mask.at(x, y) >= T(0.5);
  };
  auto point = [&](int x, int y) {
    const double d = static_cast<double>(render.depth.at(x, y)) / static_cast<double>(render.mask.at(x, y));
    return Eigen::Vector3d(d * (x - cam.cx) / cam.fx, d * (y - cam.cy) / cam.fy, d);
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!valid(x, y)) {
        continue;
      }
      const Eigen::Vector3d p = point(x, y);
      Eigen::Vector3d dx = Eigen::Vector3d::Zero();
      Eigen::Vector3d dy = Eigen::Vector3d::Zero();
      if (valid(x + 1, y) && valid(x - 1, y)) {
        dx = point(x + 1, y) - point(x - 1, y);
      } else if (valid(x + 1, y)) {
        dx = point(x + 1, y) - p;
      } else if (valid(x - 1, y)) {
        dx = p - point(x - 1, y);
      }
      if (valid(x, y + 1) && valid(x, y - 1)) {
        dy = point(x, y + 1) - point(x, y - 1);
      } else if (valid(x, y + 1)) {
        dy = point(x, y + 1) - p;
      } else if (valid(x, y - 1)) {
        dy = p - point(x, y - 1);
      }
      Eigen::Vector3d n = dx.cross(dy);
      if (n.norm() == 0.0 || !n.allFinite()) {
        n = -p;  // no neighbors: face the camera
      }
      n.normalize();
      if (n.dot(p) > 0.0) {
        n = -n;
      }
      const Eigen::Vector3d view(n.x(), -n.y(), -n.z());
      for (int c = 0; c < 3; ++c) {
        out.at(x, y, c) = static_cast<T>(0.5 * (view[c] + 1.0));
      }
    }
  }
  return out;
}

template RenderOutput<float> rasterize<float>(const GaussianSet&, const Camera&, const Eigen::Vector3d&,
                                              const RasterConfig&);
template RenderOutput<double> rasterize<double>(const GaussianSet&, const Camera&, const Eigen::Vector3d&,
                                                const RasterConfig&);
template GaussianGrads rasterize_backward<float>(const GaussianSet&, const Camera&,
                                                 const RenderOutput<float>&, const ImageT<float>&,
                                                 const ImageT<float>&);
template GaussianGrads rasterize_backward<double>(const GaussianSet&, const Camera&,
                                                  const RenderOutput<double>&, const ImageT<double>&,
                                                  const ImageT<double>&);
template GeometryRender<float> rasterize_mesh_geometry<float>(const Mesh&, const Camera&);
template GeometryRender<double> rasterize_mesh_geometry<double>(const Mesh&, const Camera&);
template ImageT<float> normals_from_depth<float>(const RenderOutput<float>&, const Camera&);
template ImageT<double> normals_from_depth<double>(const RenderOutput<double>&, const Camera&);

} // namespace gsanim

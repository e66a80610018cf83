#pragma once

#include "gsanim/body_model.hpp"
#include "gsanim/gaussians.hpp"
#include "gsanim/image.hpp"
#include "gsanim/mesh.hpp"
#include "gsanim/nnet/params.hpp"
#include "gsanim/refine.hpp"
#include "gsanim/render.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

/// Every parser takes an in-memory buffer and either returns a value that
/// satisfies its type invariants or throws AssetError. Binary formats are
/// little-endian with f32 payloads.
namespace gsanim::io {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

Bytes read_file(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);
/// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, ByteView bytes);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

// --- OBJ: v / vt / vn / f, polygons fan-triangulated --------------------------
// A vertex referenced with two different vt/vn indices is split; otherwise
// vertex indices are preserved.
Mesh parse_obj(std::string_view text);
std::string format_obj(const Mesh& mesh);
Mesh load_obj(const std::filesystem::path& path);
void save_obj(const std::filesystem::path& path, const Mesh& mesh);

// --- binary PLY mesh ------------------------------------------------------------
// vertex: x y z [nx ny nz] [u v]; face: list uchar int vertex_indices.
Mesh parse_mesh_ply(ByteView bytes);
Bytes format_mesh_ply(const Mesh& mesh);

// --- splat PLY -------------------------------------------------------------------
// One vertex element with float properties, in this order:
// x y z opacity scale_0 scale_1 scale_2 rot_0 rot_1 rot_2 rot_3 f_dc_0 f_dc_1 f_dc_2
// opacity and scale are raw, rot_0 is the quaternion w, f_dc holds RGB in [0,1].
GaussianSet parse_splat_ply(ByteView bytes);
Bytes format_splat_ply(const GaussianSet& gaussians);
GaussianSet load_splat_ply(const std::filesystem::path& path);
void save_splat_ply(const std::filesystem::path& path, const GaussianSet& gaussians);

// --- JSON ------------------------------------------------------------------------
/// {"joints": [[ax, ay, az], ...], "root_translation": [x, y, z],
///  "expression": [...], "hand_pose": [...]} with axis-angle rotations.
Pose parse_pose_json(std::string_view text);
std::string format_pose_json(const Pose& pose);
Pose load_pose(const std::filesystem::path& path);

/// {"fx", "fy", "cx", "cy", "width", "height", "near", "far",
///  "world_to_camera": 16 numbers, row-major}
Camera parse_camera_json(std::string_view text);
std::string format_camera_json(const Camera& camera);
/// {"cameras": [camera, ...]}
std::vector<Camera> parse_rig_json(std::string_view text);
std::string format_rig_json(std::span<const Camera> cameras);

/// {"lr", "epochs", "seed", "delta_max", "opacity_threshold", "top_k",
///  "resolution"} plus optional "mode", "uv_resolution", "limb_offset".
struct TrainerFile {
  TrainerConfig trainer;
  int uv_resolution = 32;
  double limb_offset = 0.01;
};
TrainerFile parse_trainer_config(std::string_view text);
std::string format_trainer_config(const TrainerFile& config);

// --- skinning weights --------------------------------------------------------------
/// Dense V x J f32 row-major payload; sidecar JSON {"V", "J", "K_max"}.
SkinningWeights parse_weights(ByteView payload, std::string_view sidecar);
Bytes format_weights(const SkinningWeights& weights, int joints);
std::string format_weights_sidecar(const SkinningWeights& weights, int joints);

// --- body model ------------------------------------------------------------------
/// JSON with "joints" {"parents", "rest_offsets", "names"}, "regressor"
/// (B x J x 3 row-major), "template_mesh" (OBJ path), "weights" (binary path,
/// sidecar at path + ".json"), "canonical_pose", "expression_dim",
/// "hand_pose_dim". Relative paths resolve against the JSON's directory.
BodyModel load_model(const std::filesystem::path& path);
/// Writes path, its OBJ template and weight files next to it.
void save_model(const std::filesystem::path& path, const BodyModel& model);

// --- images ------------------------------------------------------------------------
/// 8-bit PNG with 1, 3 or 4 channels; values map to [0,1].
Image parse_png(ByteView bytes);
Bytes format_png(const Image& image);
Image load_png(const std::filesystem::path& path);
void save_png(const std::filesystem::path& path, const Image& image);
/// One JSON header line {"width", "height", "channels", "dtype": "f32le"}
/// followed by the interleaved f32 payload.
Image parse_raw_image(ByteView bytes);
Bytes format_raw_image(const Image& image);

// --- network checkpoints -----------------------------------------------------------
/// "GSANCKPT", u32 version, u32 metadata length, metadata JSON (config, mode,
/// share map, params version), u32 tensor count, per tensor (u32 name length,
/// name, u32 rank, u32 dims..., u64 payload offset), then f32 payloads. Names
/// that alias one tensor share an offset.
inline constexpr std::uint32_t kCheckpointVersion = 1;
nn::NetworkParams<float> parse_checkpoint(ByteView bytes);
Bytes format_checkpoint(const nn::NetworkParams<float>& params);
nn::NetworkParams<float> load_checkpoint(const std::filesystem::path& path);
void save_checkpoint(const std::filesystem::path& path, const nn::NetworkParams<float>& params);

// --- CSV ---------------------------------------------------------------------------
/// step,mask_loss,color_loss,total
std::string format_loss_curve_csv(std::span<const LossRecord> curve);

/// "sha256:<hex>" digest used in run manifests.
std::string content_hash(ByteView bytes);

} // namespace gsanim::io

#include "bytes.hpp"

#include "json.hpp"

#include <cmath>
#include <set>

namespace gsanim::io {

namespace {

using nlohmann::json;

json parse_json(std::string_view text, const char* what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw AssetError(AssetErrorKind::syntax, e.byte, std::string(what) + ": " + e.what());
  }
}

[[noreturn]] void schema_error(const std::string& msg) {
  throw AssetError(AssetErrorKind::syntax, 0, msg);
}

const json& field(const json& j, const char* key) {
  if (!j.is_object()) schema_error("expected a JSON object");
  const auto it = j.find(key);
  if (it == j.end()) schema_error(std::string("missing field '") + key + "'");
  return *it;
}

double number(const json& j, const char* what) {
  if (!j.is_number()) schema_error(std::string("'") + what + "' must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw AssetError(AssetErrorKind::invariant, 0, std::string("'") + what + "' is not finite");
  return v;
}

long long integer(const json& j, const char* what, long long lo, long long hi) {
  if (!j.is_number_integer()) schema_error(std::string("'") + what + "' must be an integer");
  const long long v = j.get<long long>();
  if (v < lo || v > hi) {
    throw AssetError(AssetErrorKind::bounds, 0,
                     std::string("'") + what + "' = " + std::to_string(v) + " outside [" + std::to_string(lo) + ", " +
                         std::to_string(hi) + "]");
  }
  return v;
}

std::vector<double> numbers(const json& j, const char* what, long long expected = -1) {
  if (!j.is_array()) schema_error(std::string("'") + what + "' must be an array");
  if (expected >= 0 && static_cast<long long>(j.size()) != expected) {
    schema_error(std::string("'") + what + "' must hold " + std::to_string(expected) + " numbers");
  }
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) out.push_back(number(v, what));
  return out;
}

Eigen::Vector3d vec3(const json& j, const char* what) {
  const auto v = numbers(j, what, 3);
  return {v[0], v[1], v[2]};
}

Eigen::VectorXd vecx(const json& j, const char* what) {
  const auto v = numbers(j, what);
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void reject_unknown(const json& j, std::initializer_list<const char*> allowed) {
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items()) {
    if (ok.count(k) == 0) schema_error("unknown field '" + k + "'");
  }
}

json vector_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

template <typename F>
auto wrap_invariant(F&& f) {
  try {
    return f();
  } catch (const InvariantError& e) {
    throw AssetError(AssetErrorKind::invariant, 0, e.what());
  } catch (const NumericError& e) {
    throw AssetError(AssetErrorKind::invariant, 0, e.what());
  }
}

Pose pose_from_json(const json& j) {
  if (!j.is_object()) schema_error("pose must be a JSON object");
  reject_unknown(j, {"joints", "quaternions", "root_translation", "expression", "hand_pose"});
  Pose pose;
  const bool has_aa = j.contains("joints");
  const bool has_q = j.contains("quaternions");
  if (has_aa == has_q) schema_error("pose needs exactly one of 'joints' (axis-angle) or 'quaternions'");
  if (has_aa) {
    const json& joints = j.at("joints");
    if (!joints.is_array()) schema_error("'joints' must be an array");
    std::vector<Eigen::Vector3d> aa;
    for (const auto& r : joints) aa.push_back(vec3(r, "joints"));
    pose = Pose::from_axis_angle(aa);
  } else {
    const json& qs = j.at("quaternions");
    if (!qs.is_array()) schema_error("'quaternions' must be an array");
    for (const auto& r : qs) {
      const auto q = numbers(r, "quaternions", 4);
      pose.joint_rotations.emplace_back(q[0], q[1], q[2], q[3]);
    }
  }
  pose.root_translation = j.contains("root_translation") ? vec3(j.at("root_translation"), "root_translation")
                                                         : Eigen::Vector3d::Zero();
  pose.expression = j.contains("expression") ? vecx(j.at("expression"), "expression") : Eigen::VectorXd();
  pose.hand_pose = j.contains("hand_pose") ? vecx(j.at("hand_pose"), "hand_pose") : Eigen::VectorXd();
  wrap_invariant([&] {
    pose.validate(pose.joint_count());
    return 0;
  });
  return pose;
}

json pose_to_json(const Pose& pose) {
  json joints = json::array();
  for (const auto& aa : pose.axis_angles()) joints.push_back({aa.x(), aa.y(), aa.z()});
  const auto& t = pose.root_translation;
  return {{"joints", joints},
          {"root_translation", {t.x(), t.y(), t.z()}},
          {"expression", vector_json(pose.expression)},
          {"hand_pose", vector_json(pose.hand_pose)}};
}

Camera camera_from_json(const json& j) {
  if (!j.is_object()) schema_error("camera must be a JSON object");
  reject_unknown(j, {"fx", "fy", "cx", "cy", "width", "height", "near", "far", "world_to_camera"});
  Camera c;
  c.fx = number(field(j, "fx"), "fx");
  c.fy = number(field(j, "fy"), "fy");
  c.cx = number(field(j, "cx"), "cx");
  c.cy = number(field(j, "cy"), "cy");
  c.width = static_cast<int>(integer(field(j, "width"), "width", 1, 16384));
  c.height = static_cast<int>(integer(field(j, "height"), "height", 1, 16384));
  if (j.contains("near")) c.near = number(j.at("near"), "near");
  if (j.contains("far")) c.far = number(j.at("far"), "far");
  const auto m = numbers(field(j, "world_to_camera"), "world_to_camera", 16);
  for (int r = 0; r < 4; ++r) {
    for (int k = 0; k < 4; ++k) c.world_to_camera(r, k) = m[static_cast<std::size_t>(4 * r + k)];
  }
  wrap_invariant([&] {
    c.validate();
    return 0;
  });
  return c;
}

json camera_to_json(const Camera& c) {
  std::vector<double> m;
  for (int r = 0; r < 4; ++r) {
    for (int k = 0; k < 4; ++k) m.push_back(c.world_to_camera(r, k));
  }
  return {{"fx", c.fx},       {"fy", c.fy},         {"cx", c.cx},     {"cy", c.cy},  {"width", c.width},
          {"height", c.height}, {"near", c.near}, {"far", c.far}, {"world_to_camera", m}};
}

} // namespace

Pose parse_pose_json(std::string_view text) {
  return pose_from_json(parse_json(text, "pose"));
}

std::string format_pose_json(const Pose& pose) {
  return pose_to_json(pose).dump(2) + "\n";
}

Pose load_pose(const std::filesystem::path& path) {
  return parse_pose_json(read_text(path));
}

Camera parse_camera_json(std::string_view text) {
  return camera_from_json(parse_json(text, "camera"));
}

std::string format_camera_json(const Camera& camera) {
  return camera_to_json(camera).dump(2) + "\n";
}

std::vector<Camera> parse_rig_json(std::string_view text) {
  const json j = parse_json(text, "rig");
  if (!j.is_object()) schema_error("rig must be a JSON object");
  reject_unknown(j, {"cameras"});
  const json& cams = field(j, "cameras");
  if (!cams.is_array() || cams.empty()) schema_error("'cameras' must be a non-empty array");
  std::vector<Camera> out;
  for (const auto& c : cams) out.push_back(camera_from_json(c));
  return out;
}

std::string format_rig_json(std::span<const Camera> cameras) {
  json cams = json::array();
  for (const auto& c : cameras) cams.push_back(camera_to_json(c));
  return json{{"cameras", cams}}.dump(2) + "\n";
}

TrainerFile parse_trainer_config(std::string_view text) {
  const json j = parse_json(text, "trainer config");
  if (!j.is_object()) schema_error("trainer config must be a JSON object");
  reject_unknown(j, {"lr", "epochs", "seed", "delta_max", "opacity_threshold", "top_k", "resolution", "mode",
                     "uv_resolution", "limb_offset"});
  TrainerFile f;
  auto& t = f.trainer;
  if (j.contains("lr")) t.lr = number(j.at("lr"), "lr");
  if (j.contains("epochs")) t.epochs = static_cast<int>(integer(j.at("epochs"), "epochs", 0, 1000000));
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) schema_error("'seed' must be a non-negative integer");
    t.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("delta_max")) t.delta_max = number(j.at("delta_max"), "delta_max");
  if (j.contains("opacity_threshold")) t.opacity_threshold = number(j.at("opacity_threshold"), "opacity_threshold");
  if (j.contains("top_k")) t.top_k = static_cast<int>(integer(j.at("top_k"), "top_k", 0, 1 << 24));
  if (j.contains("resolution")) t.resolution = static_cast<int>(integer(j.at("resolution"), "resolution", 8, 4096));
  if (j.contains("mode")) {
    const json& m = j.at("mode");
    if (m == "shared") {
      t.mode = nn::ShareMode::shared;
    } else if (m == "finetune_backward") {
      t.mode = nn::ShareMode::finetune_backward;
    } else {
      schema_error("'mode' must be \"shared\" or \"finetune_backward\"");
    }
  }
  if (j.contains("uv_resolution")) {
    f.uv_resolution = static_cast<int>(integer(j.at("uv_resolution"), "uv_resolution", 4, 4096));
  }
  if (j.contains("limb_offset")) f.limb_offset = number(j.at("limb_offset"), "limb_offset");
  if (!(t.lr > 0.0)) throw AssetError(AssetErrorKind::invariant, 0, "'lr' must be positive");
  if (!(t.delta_max > 0.0)) throw AssetError(AssetErrorKind::invariant, 0, "'delta_max' must be positive");
  if (!(t.opacity_threshold >= 0.0 && t.opacity_threshold < 1.0)) {
    throw AssetError(AssetErrorKind::invariant, 0, "'opacity_threshold' must lie in [0, 1)");
  }
  return f;
}

std::string format_trainer_config(const TrainerFile& f) {
  const auto& t = f.trainer;
  const json j = {{"lr", t.lr},
                  {"epochs", t.epochs},
                  {"seed", t.seed},
                  {"delta_max", t.delta_max},
                  {"opacity_threshold", t.opacity_threshold},
                  {"top_k", t.top_k},
                  {"resolution", t.resolution},
                  {"mode", nn::to_string(t.mode)},
                  {"uv_resolution", f.uv_resolution},
                  {"limb_offset", f.limb_offset}};
  return j.dump(2) + "\n";
}

// --- weights -----------------------------------------------------------------------

SkinningWeights parse_weights(ByteView payload, std::string_view sidecar) {
  const json meta = parse_json(sidecar, "weights sidecar");
  if (!meta.is_object()) schema_error("weights sidecar must be a JSON object");
  reject_unknown(meta, {"V", "J", "K_max", "dtype"});
  const auto v = static_cast<std::size_t>(integer(field(meta, "V"), "V", 0, 1LL << 26));
  const auto joints = static_cast<std::size_t>(integer(field(meta, "J"), "J", 1, 4096));
  const auto k_max = integer(field(meta, "K_max"), "K_max", 1, kMaxInfluences);
  if (meta.contains("dtype") && meta.at("dtype") != "f32le") schema_error("weights dtype must be \"f32le\"");
  const std::size_t expected = v * joints * 4;
  if (payload.size() != expected) {
    throw AssetError(AssetErrorKind::bounds, std::min(payload.size(), expected),
                     "weights payload holds " + std::to_string(payload.size()) + " bytes, expected " +
                         std::to_string(expected));
  }
  detail::Reader r(payload);
  std::vector<std::vector<double>> rows(v, std::vector<double>(joints));
  for (std::size_t i = 0; i < v; ++i) {
    const std::size_t row_offset = r.pos();
    double sum = 0.0;
    long long nonzero = 0;
    for (auto& w : rows[i]) {
      w = r.read_f32("weight");
      if (!std::isfinite(w) || w < 0.0 || w > 1.0 + 1e-6) {
        throw AssetError(AssetErrorKind::invariant, r.pos() - 4, "weight outside [0, 1] in row " + std::to_string(i));
      }
      sum += w;
      nonzero += w > 0.0;
    }
    if (nonzero > k_max) {
      throw AssetError(AssetErrorKind::invariant, row_offset,
                       "row " + std::to_string(i) + " has more than K_max nonzero weights");
    }
    if (std::abs(sum - 1.0) > 1e-4) {
      throw AssetError(AssetErrorKind::invariant, row_offset, "row " + std::to_string(i) + " does not sum to one");
    }
  }
  // f32 rows already within the weight tolerance are kept verbatim for byte-stable re-saves
  return SkinningWeights::from_dense(rows, 1e-6);
}

Bytes format_weights(const SkinningWeights& weights, int joints) {
  if (weights.joint_span() > joints) throw InvariantError("format_weights: joint count too small");
  Bytes out;
  out.reserve(weights.rows() * static_cast<std::size_t>(joints) * 4);
  for (std::size_t i = 0; i < weights.rows(); ++i) {
    for (double w : weights.dense_row(i, joints)) detail::put_f32(out, static_cast<float>(w));
  }
  return out;
}

std::string format_weights_sidecar(const SkinningWeights& weights, int joints) {
  std::size_t k = 1;
  for (std::size_t i = 0; i < weights.rows(); ++i) k = std::max(k, weights.row(i).size());
  return json{{"V", weights.rows()}, {"J", joints}, {"K_max", k}, {"dtype", "f32le"}}.dump(2) + "\n";
}

// --- body model ----------------------------------------------------------------------

BodyModel load_model(const std::filesystem::path& path) {
  const json j = parse_json(read_text(path), "model");
  if (!j.is_object()) schema_error("model must be a JSON object");
  reject_unknown(j, {"joints", "regressor", "template_mesh", "weights", "canonical_pose", "expression_dim",
                     "hand_pose_dim"});
  const auto dir = path.parent_path();
  BodyModel m;
  const json& joints = field(j, "joints");
  const json& parents = field(joints, "parents");
  if (!parents.is_array() || parents.empty()) schema_error("'parents' must be a non-empty array");
  const auto count = static_cast<long long>(parents.size());
  if (count > 4096) throw AssetError(AssetErrorKind::bounds, 0, "too many joints");
  for (const auto& p : parents) m.skeleton.parent.push_back(static_cast<int>(integer(p, "parents", -1, count - 1)));
  const json& offsets = field(joints, "rest_offsets");
  if (!offsets.is_array() || static_cast<long long>(offsets.size()) != count) {
    schema_error("'rest_offsets' must hold one 3-vector per joint");
  }
  for (const auto& o : offsets) m.skeleton.rest_joint_offsets.push_back(vec3(o, "rest_offsets"));
  if (joints.contains("names")) {
    const json& names = joints.at("names");
    if (!names.is_array() || static_cast<long long>(names.size()) != count) schema_error("'names' size mismatch");
    for (const auto& n : names) {
      if (!n.is_string()) schema_error("joint names must be strings");
      m.skeleton.names.push_back(n.get<std::string>());
    }
  }
  m.expression_dim = j.contains("expression_dim")
                         ? static_cast<int>(integer(j.at("expression_dim"), "expression_dim", 0, 1024))
                         : 0;
  m.hand_pose_dim = j.contains("hand_pose_dim")
                        ? static_cast<int>(integer(j.at("hand_pose_dim"), "hand_pose_dim", 0, 1024))
                        : 0;

  const auto reg = numbers(field(j, "regressor"), "regressor");
  if (reg.size() % static_cast<std::size_t>(3 * count) != 0) {
    schema_error("'regressor' length must be a multiple of 3 * joint count");
  }
  const auto b_dim = static_cast<Eigen::Index>(reg.size() / static_cast<std::size_t>(3 * count));
  m.regressor.resize(3 * count, b_dim);
  for (Eigen::Index b = 0; b < b_dim; ++b) {
    for (long long jj = 0; jj < count; ++jj) {
      for (int k = 0; k < 3; ++k) {
        m.regressor(3 * jj + k, b) = reg[static_cast<std::size_t>((b * count + jj) * 3 + k)];
      }
    }
  }
  const json& mesh_path = field(j, "template_mesh");
  const json& weights_path = field(j, "weights");
  if (!mesh_path.is_string() || !weights_path.is_string()) schema_error("asset paths must be strings");
  m.template_mesh = load_obj(dir / mesh_path.get<std::string>());
  const auto wpath = dir / weights_path.get<std::string>();
  m.weights = parse_weights(read_file(wpath), read_text(wpath.string() + ".json"));
  m.skeleton.canonical_pose = pose_from_json(field(j, "canonical_pose"));
  wrap_invariant([&] {
    m.validate();
    return 0;
  });
  return m;
}

void save_model(const std::filesystem::path& path, const BodyModel& m) {
  m.validate();
  const auto stem = path.stem().string();
  const std::string mesh_name = stem + "_template.obj";
  const std::string weights_name = stem + "_weights.bin";
  const auto dir = path.parent_path();
  json offsets = json::array();
  for (const auto& o : m.skeleton.rest_joint_offsets) offsets.push_back({o.x(), o.y(), o.z()});
  std::vector<double> reg;
  const long long count = m.joint_count();
  for (Eigen::Index b = 0; b < m.regressor.cols(); ++b) {
    for (long long jj = 0; jj < count; ++jj) {
      for (int k = 0; k < 3; ++k) reg.push_back(m.regressor(3 * jj + k, b));
    }
  }
  json joints = {{"parents", m.skeleton.parent}, {"rest_offsets", offsets}};
  if (!m.skeleton.names.empty()) joints["names"] = m.skeleton.names;
  const json j = {{"joints", joints},
                  {"regressor", reg},
                  {"template_mesh", mesh_name},
                  {"weights", weights_name},
                  {"canonical_pose", pose_to_json(m.skeleton.canonical_pose)},
                  {"expression_dim", m.expression_dim},
                  {"hand_pose_dim", m.hand_pose_dim}};
  save_obj(dir / mesh_name, m.template_mesh);
  write_file_atomic(dir / weights_name, format_weights(m.weights, m.joint_count()));
  write_text_atomic(dir / (weights_name + ".json"), format_weights_sidecar(m.weights, m.joint_count()));
  write_text_atomic(path, j.dump(2) + "\n");
}

} // namespace gsanim::io

#include "gsanim/io.hpp"

#include "gsanim/body_model.hpp"
#include "gsanim/error.hpp"
#include "gsanim/fixtures.hpp"

#include "fuzz_support.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <random>

using namespace gsanim;
using gsanim::testing::random_scene;

namespace {

io::ByteView view(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("gsanim_io_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

template <typename F>
AssetError expect_asset_error(F&& f) {
  try {
    f();
  } catch (const AssetError& e) {
    return e;
  }
  ADD_FAILURE() << "expected AssetError";
  return AssetError(AssetErrorKind::io, 0, "none");
}

} // namespace

TEST(Obj, MinimalTriangle) {
  const Mesh m = io::parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
  EXPECT_EQ(m.vertices.size(), 3u);
  ASSERT_EQ(m.faces.size(), 1u);
  EXPECT_EQ(m.faces[0], (std::array<int, 3>{0, 1, 2}));
  EXPECT_FALSE(m.has_uv());
  EXPECT_FALSE(m.has_normals());
}

TEST(Obj, PolygonFanAndNegativeIndices) {
  const Mesh m = io::parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf -4 -3 -2 -1\n");
  ASSERT_EQ(m.faces.size(), 2u);
  EXPECT_EQ(m.faces[0], (std::array<int, 3>{0, 1, 2}));
  EXPECT_EQ(m.faces[1], (std::array<int, 3>{0, 2, 3}));
}

TEST(Obj, ConflictingUvSplitsVertex) {
  const Mesh m = io::parse_obj(
      "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nvt 0 0\nvt 1 0\nvt 0 1\nvt 0.5 0.5\n"
      "f 1/1 2/2 3/3\nf 2/4 4/2 3/3\n");
  EXPECT_EQ(m.vertices.size(), 5u);
  EXPECT_EQ(m.faces[1][0], 4);
  EXPECT_EQ(m.uv[4], Eigen::Vector2d(0.5, 0.5));
  EXPECT_EQ(m.vertices[4], m.vertices[1]);
}

TEST(Obj, RoundTripIsExact) {
  const auto body = make_synthetic_body(3);
  const Mesh& mesh = body.mesh;
  const std::string text = io::format_obj(mesh);
  const Mesh back = io::parse_obj(text);
  EXPECT_EQ(back.vertices, mesh.vertices);
  EXPECT_EQ(back.faces, mesh.faces);
  EXPECT_EQ(back.uv, mesh.uv);
  EXPECT_EQ(io::format_obj(back), text);
}

TEST(Obj, ErrorsCarryLineNumbers) {
  auto e = expect_asset_error([] { io::parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 x\n"); });
  EXPECT_EQ(e.kind(), AssetErrorKind::syntax);
  EXPECT_EQ(e.location(), 3u);
  e = expect_asset_error([] { io::parse_obj("v 0 0 0\nv 1 0 0\nf 1 2 3\n"); });
  EXPECT_EQ(e.kind(), AssetErrorKind::bounds);
  EXPECT_EQ(e.location(), 3u);
  e = expect_asset_error([] { io::parse_obj("v 0 0 0\nv 1 0 nan\n"); });
  EXPECT_EQ(e.kind(), AssetErrorKind::invariant);
}

TEST(MeshPly, RoundTripBytes) {
  const auto body = make_synthetic_body(3);
  const io::Bytes a = io::format_mesh_ply(body.mesh);
  const Mesh back = io::parse_mesh_ply(a);
  EXPECT_EQ(back.vertices.size(), body.mesh.vertices.size());
  EXPECT_EQ(back.faces, body.mesh.faces);
  EXPECT_TRUE(back.has_normals());
  EXPECT_TRUE(back.has_uv());
  EXPECT_EQ(io::format_mesh_ply(back), a);
}

TEST(SplatPly, ThousandGaussianRoundTripIsByteIdentical) {
  std::mt19937_64 rng(11);
  const GaussianSet g = random_scene(1000, rng);
  const io::Bytes first = io::format_splat_ply(g);
  const GaussianSet loaded = io::parse_splat_ply(first);
  ASSERT_EQ(loaded.size(), 1000u);
  const io::Bytes second = io::format_splat_ply(loaded);
  EXPECT_EQ(first, second);
  EXPECT_EQ(io::format_splat_ply(io::parse_splat_ply(second)), second);
}

TEST(SplatPly, PropertyOrderAndFieldMapping) {
  GaussianSet g;
  g.push_back({1, 2, 3}, 0.25, {-1, -2, -3}, Eigen::Quaterniond(0.5, 0.5, 0.5, 0.5), {0.1, 0.2, 0.3});
  const io::Bytes b = io::format_splat_ply(g);
  const std::string text(b.begin(), b.end());
  const std::string expected_header =
      "ply\nformat binary_little_endian 1.0\ncomment gsanim splat\nelement vertex 1\n"
      "property float x\nproperty float y\nproperty float z\nproperty float opacity\n"
      "property float scale_0\nproperty float scale_1\nproperty float scale_2\n"
      "property float rot_0\nproperty float rot_1\nproperty float rot_2\nproperty float rot_3\n"
      "property float f_dc_0\nproperty float f_dc_1\nproperty float f_dc_2\nend_header\n";
  ASSERT_EQ(text.substr(0, expected_header.size()), expected_header);
  ASSERT_EQ(b.size(), expected_header.size() + 14 * 4);
  const float expected[14] = {1, 2, 3, 0.25f, -1, -2, -3, 0.5f, 0.5f, 0.5f, 0.5f, 0.1f, 0.2f, 0.3f};
  float got[14];
  std::memcpy(got, b.data() + expected_header.size(), sizeof got);
  for (int k = 0; k < 14; ++k) EXPECT_EQ(got[k], expected[k]) << k;
}

TEST(SplatPly, TruncatedVertexDataReportsBoundsOffset) {
  const std::string header =
      "ply\nformat binary_little_endian 1.0\nelement vertex 5\n"
      "property float x\nproperty float y\nproperty float z\nend_header\n";
  io::Bytes b(header.begin(), header.end());
  b.resize(b.size() + 4 * 12, 0);
  auto e = expect_asset_error([&] { io::parse_mesh_ply(b); });
  EXPECT_EQ(e.kind(), AssetErrorKind::bounds);
  EXPECT_EQ(e.location(), header.size() + 4 * 12);
  e = expect_asset_error([&] { io::parse_splat_ply(b); });
  EXPECT_EQ(e.kind(), AssetErrorKind::syntax);  // lacks the splat properties

  std::mt19937_64 rng(2);
  io::Bytes splat = io::format_splat_ply(random_scene(5, rng));
  splat.resize(splat.size() - 14 * 4);
  e = expect_asset_error([&] { io::parse_splat_ply(splat); });
  EXPECT_EQ(e.kind(), AssetErrorKind::bounds);
  EXPECT_EQ(e.location(), splat.size());
}

TEST(SplatPly, RejectsInvariantViolations) {
  GaussianSet g;
  g.push_back({0, 0, 0}, 0.0, {0, 0, 0}, Eigen::Quaterniond::Identity(), {0.5, 0.5, 0.5});
  io::Bytes b = io::format_splat_ply(g);
  const float bad_w = 2.0f;
  std::memcpy(b.data() + b.size() - 7 * 4, &bad_w, 4);  // rot_0
  auto e = expect_asset_error([&] { io::parse_splat_ply(b); });
  EXPECT_EQ(e.kind(), AssetErrorKind::invariant);
  b = io::format_splat_ply(g);
  b.push_back(0);
  e = expect_asset_error([&] { io::parse_splat_ply(b); });
  EXPECT_EQ(e.kind(), AssetErrorKind::bounds);
}

TEST(Json, PoseRoundTrip) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 0.5);
  std::vector<Eigen::Vector3d> aa(24);
  for (auto& v : aa) v = {n(rng), n(rng), n(rng)};
  Pose p = Pose::from_axis_angle(aa, {0.1, 0.2, 0.3});
  p.expression = Eigen::VectorXd::Constant(2, 0.5);
  p.hand_pose = Eigen::VectorXd();
  const std::string text = io::format_pose_json(p);
  const Pose back = io::parse_pose_json(text);
  ASSERT_EQ(back.joint_count(), 24);
  for (int j = 0; j < 24; ++j) {
    EXPECT_LT(back.joint_rotations[j].angularDistance(p.joint_rotations[j]), 1e-12);
  }
  EXPECT_EQ(back.root_translation, p.root_translation);
  EXPECT_EQ(back.expression, p.expression);
  // identical text parses to identical quaternions
  const Pose again = io::parse_pose_json(text);
  for (int j = 0; j < 24; ++j) EXPECT_EQ(again.joint_rotations[j].coeffs(), back.joint_rotations[j].coeffs());
}

TEST(Json, PoseAcceptsQuaternionsAndRejectsNonUnit) {
  const Pose p = io::parse_pose_json(R"({"quaternions": [[1, 0, 0, 0], [0, 1, 0, 0]]})");
  EXPECT_EQ(p.joint_count(), 2);
  auto e = expect_asset_error([] { io::parse_pose_json(R"({"quaternions": [[2, 0, 0, 0]]})"); });
  EXPECT_EQ(e.kind(), AssetErrorKind::invariant);
  e = expect_asset_error([] { io::parse_pose_json(R"({"joints": [[0, 0, 0]], "bogus": 1})"); });
  EXPECT_EQ(e.kind(), AssetErrorKind::syntax);
  e = expect_asset_error([] { io::parse_pose_json("{\"joints\": [[0, 0"); });
  EXPECT_EQ(e.kind(), AssetErrorKind::syntax);
  EXPECT_GT(e.location(), 0u);
}

TEST(Json, CameraAndRigRoundTrip) {
  const auto rig = four_view_rig(1.0, 64);
  const std::string text = io::format_rig_json(rig);
  const auto back = io::parse_rig_json(text);
  ASSERT_EQ(back.size(), 4u);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(back[k].world_to_camera, rig[k].world_to_camera);
    EXPECT_EQ(back[k].fx, rig[k].fx);
    EXPECT_EQ(back[k].width, rig[k].width);
  }
  EXPECT_EQ(io::format_rig_json(back), text);
  const Camera c = io::parse_camera_json(io::format_camera_json(rig[1]));
  EXPECT_EQ(c.world_to_camera, rig[1].world_to_camera);
  Camera bad = rig[0];
  bad.fx = -1;
  EXPECT_EQ(expect_asset_error([&] { io::parse_camera_json(io::format_camera_json(bad)); }).kind(),
            AssetErrorKind::invariant);
}

TEST(Json, TrainerConfigRejectsUnknownKeys) {
  io::TrainerFile f;
  f.trainer.epochs = 17;
  f.trainer.seed = 9;
  f.trainer.mode = nn::ShareMode::finetune_backward;
  const auto back = io::parse_trainer_config(io::format_trainer_config(f));
  EXPECT_EQ(back.trainer.epochs, 17);
  EXPECT_EQ(back.trainer.seed, 9u);
  EXPECT_EQ(back.trainer.mode, nn::ShareMode::finetune_backward);
  EXPECT_EQ(expect_asset_error([] { io::parse_trainer_config(R"({"epoch": 3})"); }).kind(), AssetErrorKind::syntax);
  EXPECT_EQ(expect_asset_error([] { io::parse_trainer_config(R"({"lr": -1})"); }).kind(), AssetErrorKind::invariant);
}

TEST(Weights, RoundTripAndValidation) {
  const auto body = make_synthetic_body(3);
  const int joints = body.model.joint_count();
  const io::Bytes payload = io::format_weights(body.model.weights, joints);
  const std::string sidecar = io::format_weights_sidecar(body.model.weights, joints);
  const SkinningWeights back = io::parse_weights(payload, sidecar);
  ASSERT_EQ(back.rows(), body.model.weights.rows());
  for (std::size_t i = 0; i < back.rows(); ++i) {
    const auto a = back.dense_row(i, joints);
    const auto b = body.model.weights.dense_row(i, joints);
    for (int j = 0; j < joints; ++j) EXPECT_NEAR(a[j], b[j], 1e-6);
  }
  EXPECT_EQ(io::format_weights(back, joints), payload);
  EXPECT_NO_THROW(back.validate());

  io::Bytes bad = payload;
  const float neg = -0.5f;
  std::memcpy(bad.data() + 8, &neg, 4);
  const auto e = expect_asset_error([&] { io::parse_weights(bad, sidecar); });
  EXPECT_EQ(e.kind(), AssetErrorKind::invariant);
  EXPECT_EQ(e.location(), 8u);
  bad = payload;
  bad.pop_back();
  EXPECT_EQ(expect_asset_error([&] { io::parse_weights(bad, sidecar); }).kind(), AssetErrorKind::bounds);
}

TEST(Model, SaveLoadPreservesStructure) {
  const auto dir = temp_dir("model");
  const auto body = make_synthetic_body(3);
  io::save_model(dir / "body.json", body.model);
  const BodyModel m = io::load_model(dir / "body.json");
  EXPECT_EQ(m.skeleton.parent, body.model.skeleton.parent);
  EXPECT_EQ(m.skeleton.names, body.model.skeleton.names);
  EXPECT_EQ(m.skeleton.rest_joint_offsets, body.model.skeleton.rest_joint_offsets);
  EXPECT_EQ(m.regressor, body.model.regressor);
  EXPECT_EQ(m.template_mesh.vertices, body.model.template_mesh.vertices);
  EXPECT_EQ(m.template_mesh.faces, body.model.template_mesh.faces);
  for (std::size_t j = 0; j < m.skeleton.canonical_pose.joint_rotations.size(); ++j) {
    EXPECT_LT(m.skeleton.canonical_pose.joint_rotations[j].angularDistance(
                  body.model.skeleton.canonical_pose.joint_rotations[j]),
              1e-12);
  }
  // saving the loaded model reproduces every file
  const auto dir2 = temp_dir("model2");
  io::save_model(dir2 / "body.json", m);
  for (const char* f : {"body.json", "body_template.obj", "body_weights.bin", "body_weights.bin.json"}) {
    EXPECT_EQ(io::read_file(dir / f), io::read_file(dir2 / f)) << f;
  }
}

TEST(Images, PngRoundTripIsQuantizationExact) {
  Image img(7, 5, 3);
  for (std::size_t i = 0; i < img.size(); ++i) img.pixels[i] = static_cast<float>(i % 256) / 255.0f;
  const Image back = io::parse_png(io::format_png(img));
  ASSERT_TRUE(back.same_shape(img));
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_EQ(back.pixels[i], img.pixels[i]);
  Image gray(4, 4, 1, 0.5f);
  EXPECT_EQ(io::parse_png(io::format_png(gray)).channels, 1);
  EXPECT_EQ(expect_asset_error([] { io::parse_png(view("not a png")); }).kind(), AssetErrorKind::syntax);
}

TEST(Images, RawRoundTripIsBitExact) {
  Image img(6, 3, 2);
  for (std::size_t i = 0; i < img.size(); ++i) img.pixels[i] = 0.1f * static_cast<float>(i) - 0.7f;
  const io::Bytes b = io::format_raw_image(img);
  EXPECT_EQ(io::parse_raw_image(b), img);
  io::Bytes cut = b;
  cut.pop_back();
  EXPECT_EQ(expect_asset_error([&] { io::parse_raw_image(cut); }).kind(), AssetErrorKind::bounds);
}

TEST(Checkpoint, RoundTripPreservesValuesAndAliasing) {
  const auto shared = nn::make_network_params<float>(4);
  const io::Bytes a = io::format_checkpoint(shared);
  const auto back = io::parse_checkpoint(a);
  EXPECT_EQ(io::format_checkpoint(back), a);
  EXPECT_EQ(back.mode, nn::ShareMode::shared);
  EXPECT_EQ(back.parameter_count(), shared.parameter_count());
  EXPECT_EQ(back.trainable_count(), shared.trainable_count());
  for (const auto& [bwd, fwd] : back.share_map) {
    EXPECT_EQ(back.at(bwd).id(), back.at(fwd).id()) << bwd;
  }
  for (const auto& [name, t] : shared.tensors) {
    EXPECT_EQ(back.at(name).data(), t.data()) << name;
  }

  const auto tuned = nn::transfer_weights(shared, nn::ShareMode::finetune_backward);
  const io::Bytes b = io::format_checkpoint(tuned);
  EXPECT_GT(b.size(), a.size());
  const auto tuned_back = io::parse_checkpoint(b);
  EXPECT_EQ(io::format_checkpoint(tuned_back), b);
  EXPECT_EQ(tuned_back.trainable_count(), tuned.trainable_count());
  for (const auto& [bwd, fwd] : tuned_back.share_map) {
    EXPECT_NE(tuned_back.at(bwd).id(), tuned_back.at(fwd).id()) << bwd;
  }
}

TEST(Checkpoint, RejectsCorruption) {
  const io::Bytes a = io::format_checkpoint(nn::make_network_params<float>(4));
  io::Bytes bad = a;
  bad[0] = 'X';
  EXPECT_EQ(expect_asset_error([&] { io::parse_checkpoint(bad); }).kind(), AssetErrorKind::syntax);
  bad = a;
  bad.resize(bad.size() - 3);
  EXPECT_EQ(expect_asset_error([&] { io::parse_checkpoint(bad); }).kind(), AssetErrorKind::bounds);
  bad = a;
  const float nan = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(bad.data() + bad.size() - 4, &nan, 4);
  EXPECT_EQ(expect_asset_error([&] { io::parse_checkpoint(bad); }).kind(), AssetErrorKind::invariant);
}

TEST(Files, AtomicWriteAndHash) {
  const auto dir = temp_dir("files");
  io::write_text_atomic(dir / "a.txt", "hello");
  EXPECT_EQ(io::read_text(dir / "a.txt"), "hello");
  EXPECT_EQ(io::content_hash(view("abc")),
            "sha256:ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(expect_asset_error([&] { io::read_file(dir / "missing"); }).kind(), AssetErrorKind::io);
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir)) ++entries;
  EXPECT_EQ(entries, 1u);
}

TEST(Fuzz, ParsersOnlyThrowAssetErrors) {
  std::mt19937_64 rng(1);
  gsanim::testing::FuzzSeeds seeds;
  seeds.binary.push_back(io::format_splat_ply(random_scene(3, rng)));
  seeds.binary.push_back(io::format_mesh_ply(gsanim::testing::octahedron(1.0)));
  seeds.binary.push_back(io::format_raw_image(Image(2, 2, 1, 0.5f)));
  seeds.binary.push_back(io::format_png(Image(2, 2, 3, 0.5f)));
  seeds.binary.push_back(io::format_checkpoint(nn::make_network_params<float>(1)));
  seeds.text.push_back(io::format_obj(gsanim::testing::octahedron(1.0)));
  seeds.text.push_back(io::format_pose_json(Pose::identity(3, 1, 1)));
  seeds.text.push_back(io::format_rig_json(four_view_rig(1.0, 16)));
  seeds.text.push_back(io::format_trainer_config({}));
  seeds.text.push_back(R"({"V": 2, "J": 3, "K_max": 3})");
  for (int i = 0; i < 2000; ++i) {
    const io::Bytes input = gsanim::testing::fuzz_input(seeds, rng);
    const std::string failure = gsanim::testing::run_all_parsers(input);
    ASSERT_TRUE(failure.empty()) << "input " << i << ": " << failure;
  }
}

#include "cli.hpp"

#include "gsanim/avatar.hpp"
#include "gsanim/error.hpp"
#include "gsanim/fixtures.hpp"
#include "gsanim/io.hpp"
#include "gsanim/metrics.hpp"
#include "gsanim/refine.hpp"
#include "gsanim/render.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <memory>

namespace gsanim::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::uint8_t> RunContext::input(const fs::path& path) {
  auto bytes = io::read_file(path);
  inputs[path.string()] = io::content_hash(bytes);
  return bytes;
}

std::string RunContext::input_text(const fs::path& path) {
  const auto bytes = input(path);
  return {bytes.begin(), bytes.end()};
}

void RunContext::output(const fs::path& path) {
  outputs.push_back(path.string());
}

namespace {

bool has_extension(const fs::path& p, const char* ext) {
  std::string e = p.extension().string();
  for (auto& c : e) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return e == ext;
}

Mesh read_mesh(RunContext& ctx, const fs::path& path) {
  if (has_extension(path, ".ply")) return io::parse_mesh_ply(ctx.input(path));
  return io::parse_obj(ctx.input_text(path));
}

void write_mesh(RunContext& ctx, const fs::path& path, const Mesh& mesh) {
  if (has_extension(path, ".ply")) {
    io::write_file_atomic(path, io::format_mesh_ply(mesh));
  } else {
    io::save_obj(path, mesh);
  }
  ctx.output(path);
}

void write_image(RunContext& ctx, const fs::path& path, const Image& img) {
  if (has_extension(path, ".raw")) {
    io::write_file_atomic(path, io::format_raw_image(img));
  } else {
    io::save_png(path, img);
  }
  ctx.output(path);
}

BodyModel read_model(RunContext& ctx, const fs::path& path) {
  ctx.input(path);
  return io::load_model(path);
}

Pose read_pose(RunContext& ctx, const fs::path& path, const BodyModel& model) {
  Pose p = io::parse_pose_json(ctx.input_text(path));
  p.validate(model.joint_count());
  if (p.expression.size() == 0 && model.expression_dim > 0) p.expression = Eigen::VectorXd::Zero(model.expression_dim);
  if (p.hand_pose.size() == 0 && model.hand_pose_dim > 0) p.hand_pose = Eigen::VectorXd::Zero(model.hand_pose_dim);
  if (p.expression.size() != model.expression_dim || p.hand_pose.size() != model.hand_pose_dim) {
    throw InvariantError("pose expression/hand dimensions do not match the model");
  }
  return p;
}

Shape read_shape(RunContext& ctx, const std::string& path, const BodyModel& model) {
  if (path.empty()) return Shape::zero(model.shape_dim());
  const std::string text = ctx.input_text(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw AssetError(AssetErrorKind::syntax, e.byte, std::string("shape: ") + e.what());
  }
  if (!j.is_object() || !j.contains("coefficients") || !j.at("coefficients").is_array()) {
    throw AssetError(AssetErrorKind::syntax, 0, "shape file needs a 'coefficients' array");
  }
  Shape s{Eigen::VectorXd(static_cast<Eigen::Index>(j.at("coefficients").size()))};
  for (std::size_t i = 0; i < j.at("coefficients").size(); ++i) {
    const auto& v = j.at("coefficients")[i];
    if (!v.is_number()) throw AssetError(AssetErrorKind::syntax, 0, "shape coefficients must be numbers");
    s.coefficients[static_cast<Eigen::Index>(i)] = v.get<double>();
  }
  if (s.coefficients.size() != model.shape_dim()) {
    throw InvariantError("shape has " + std::to_string(s.coefficients.size()) + " coefficients, model expects " +
                         std::to_string(model.shape_dim()));
  }
  return s;
}

// Binds splat centers to the skeleton against the canonical-pose template.
void bind_to_model(GaussianSet& g, const BodyModel& model, const Shape& shape, int neighbors) {
  const Mesh canon = pose_body(model, shape, model.skeleton.canonical_pose);
  g.weights = bind_points(g.centers, model.weights, canon, neighbors);
}

json geometry_json(const GeometryReport& r) {
  return {{"cd_p2s_cm", r.cd_p2s},       {"cd_s2p_cm", r.cd_s2p},         {"cd_cm", 0.5 * (r.cd_p2s + r.cd_s2p)},
          {"nc", r.nc},                  {"fscore", r.fscore},            {"tau_cm", r.tau_cm},
          {"pred_count", r.pred_count}, {"truth_count", r.truth_count}};
}

json timing_json(const TimingReport& t) {
  return {{"stage", t.stage},
          {"warmup", t.warmup},
          {"iterations", t.iterations},
          {"mean_ms", t.mean_ms},
          {"p50_ms", t.p50_ms},
          {"p95_ms", t.p95_ms},
          {"min_ms", t.min_ms},
          {"max_ms", t.max_ms},
          {"environment",
           {{"cpu", t.environment.cpu},
            {"threads", t.environment.threads},
            {"compiler", t.environment.compiler},
            {"build_flags", t.environment.build_flags}}}};
}

} // namespace

Runner add_canonicalize(CLI::App& app) {
  struct Opts {
    std::string scan, model, pose, shape, out;
    int neighbors = kDefaultBindNeighbors;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("canonicalize", "Re-pose a posed scan into the canonical pose");
  sub->add_option("--scan", o->scan, "Posed scan mesh (.obj or .ply)")->required();
  sub->add_option("--model", o->model, "Body model JSON")->required();
  sub->add_option("--pose", o->pose, "Pose of the scan (JSON)")->required();
  sub->add_option("--shape", o->shape, "Shape coefficients JSON (default: zero shape)");
  sub->add_option("--neighbors", o->neighbors, "Template vertices blended per scan vertex")->capture_default_str();
  sub->add_option("--out", o->out, "Canonical mesh output (.obj or .ply)")->required();
  return [o](RunContext& ctx) {
    const BodyModel model = read_model(ctx, o->model);
    const Pose pose = read_pose(ctx, o->pose, model);
    const Shape shape = read_shape(ctx, o->shape, model);
    const Mesh scan = read_mesh(ctx, o->scan);
    const Mesh posed_template = pose_body(model, shape, pose);
    BindDiagnostics diag;
    const SkinningWeights w = bind_points(scan.vertices, model.weights, posed_template, o->neighbors, &diag);
    const Mesh canon = canonicalize_scan(scan, w, model, pose, shape);
    write_mesh(ctx, o->out, canon);
    ctx.config = {{"neighbors", o->neighbors}};
    ctx.results = {{"vertices", canon.vertex_count()},
                   {"bind_max_distance_m", diag.max_distance},
                   {"bind_far_vertices", diag.far_vertices.size()}};
  };
}

Runner add_template(CLI::App& app) {
  struct Opts {
    std::string canon, texture, model, ckpt, shape, out;
    TemplateConfig cfg;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("template", "Build the canonical Gaussian template from a canonical mesh");
  sub->add_option("--canon", o->canon, "Canonical mesh with UVs (.obj or .ply)")->required();
  sub->add_option("--texture", o->texture, "UV texture (PNG)")->required();
  sub->add_option("--model", o->model, "Body model JSON")->required();
  sub->add_option("--ckpt", o->ckpt, "Network checkpoint")->required();
  sub->add_option("--shape", o->shape, "Shape coefficients JSON (default: zero shape)");
  sub->add_option("--uv-resolution", o->cfg.uv_resolution, "Texels per UV side")
      ->check(CLI::Range(4, 2048))
      ->capture_default_str();
  sub->add_option("--out", o->out, "Splat PLY output")->required();
  return [o](RunContext& ctx) {
    const BodyModel model = read_model(ctx, o->model);
    const Shape shape = read_shape(ctx, o->shape, model);
    const Mesh canon = read_mesh(ctx, o->canon);
    const Image texture = io::parse_png(ctx.input(o->texture));
    const auto params = io::parse_checkpoint(ctx.input(o->ckpt));
    const GaussianSet g = build_template(canon, texture, model, shape, params, o->cfg);
    io::save_splat_ply(o->out, g);
    ctx.output(o->out);
    ctx.config = {{"uv_resolution", o->cfg.uv_resolution},
                  {"base_opacity", o->cfg.base_opacity},
                  {"max_offset_m", o->cfg.max_offset}};
    ctx.results = {{"gaussians", g.size()}};
  };
}

Runner add_animate(CLI::App& app) {
  struct Opts {
    std::string tpl, model, pose, shape, ckpt, out;
    bool refine = false, rotate_frames = false;
    int neighbors = kDefaultBindNeighbors;
    int resolution = 64;
    RefineConfig refine_cfg;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("animate", "Re-pose a canonical template to a target pose");
  sub->add_option("--template", o->tpl, "Canonical splat PLY")->required();
  sub->add_option("--model", o->model, "Body model JSON")->required();
  sub->add_option("--pose", o->pose, "Target pose JSON")->required();
  sub->add_option("--shape", o->shape, "Shape coefficients JSON (default: zero shape)");
  sub->add_flag("--refine", o->refine, "Apply the learned refinement after skinning");
  sub->add_option("--ckpt", o->ckpt, "Network checkpoint (required with --refine)");
  sub->add_flag("--rotate-frames", o->rotate_frames, "Rotate Gaussian frames by the polar part of the skinning");
  sub->add_option("--neighbors", o->neighbors, "Template vertices blended per Gaussian")->capture_default_str();
  sub->add_option("--resolution", o->resolution, "Refinement rig resolution")
      ->check(CLI::Range(8, 1024))
      ->capture_default_str();
  sub->add_option("--delta-max", o->refine_cfg.delta_max, "Per-axis bound on center corrections (m)")
      ->capture_default_str();
  sub->add_option("--opacity-threshold", o->refine_cfg.opacity_threshold, "Pruning threshold")->capture_default_str();
  sub->add_option("--top-k", o->refine_cfg.top_k, "Gaussians densified after refinement")->capture_default_str();
  sub->add_option("--out", o->out, "Splat PLY output")->required();
  return [o](RunContext& ctx) {
    if (o->refine && o->ckpt.empty()) throw CLI::RequiredError("--ckpt (required with --refine)");
    const BodyModel model = read_model(ctx, o->model);
    const Pose pose = read_pose(ctx, o->pose, model);
    const Shape shape = read_shape(ctx, o->shape, model);
    GaussianSet g = io::parse_splat_ply(ctx.input(o->tpl));
    bind_to_model(g, model, shape, o->neighbors);
    GaussianSet out = animate(g, model, shape, pose, o->rotate_frames);
    ctx.config = {{"refine", o->refine}, {"rotate_frames", o->rotate_frames}, {"neighbors", o->neighbors}};
    if (o->refine) {
      const auto params = io::parse_checkpoint(ctx.input(o->ckpt));
      RefineInput in;
      in.target_body = pose_target_body(model, shape, pose);
      in.rig = framing_rig(out.centers, o->resolution);
      in.coarse = std::move(out);
      const RefineOutput r = refine<float>(in, params, o->refine_cfg);
      out = r.refined;
      ctx.config["resolution"] = o->resolution;
      ctx.config["delta_max_m"] = o->refine_cfg.delta_max;
      ctx.config["opacity_threshold"] = o->refine_cfg.opacity_threshold;
      ctx.config["top_k"] = o->refine_cfg.top_k;
    }
    io::save_splat_ply(o->out, out);
    ctx.output(o->out);
    ctx.results = {{"gaussians", out.size()}};
  };
}

Runner add_render(CLI::App& app) {
  struct Opts {
    std::string gaussians, camera, out, mask;
    std::vector<double> background{0.0, 0.0, 0.0};
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("render", "Rasterize a splat PLY through one camera");
  sub->add_option("--gaussians", o->gaussians, "Splat PLY")->required();
  sub->add_option("--camera", o->camera, "Camera JSON")->required();
  sub->add_option("--out", o->out, "Color image (.png, or .raw for f32)")->required();
  sub->add_option("--mask", o->mask, "Alpha mask image (.png or .raw)");
  sub->add_option("--background", o->background, "Background RGB")->expected(3)->capture_default_str();
  return [o](RunContext& ctx) {
    const GaussianSet g = io::parse_splat_ply(ctx.input(o->gaussians));
    const Camera cam = io::parse_camera_json(ctx.input_text(o->camera));
    const Eigen::Vector3d bg(o->background[0], o->background[1], o->background[2]);
    const auto r = rasterize<float>(g, cam, bg);
    write_image(ctx, o->out, r.color);
    if (!o->mask.empty()) write_image(ctx, o->mask, r.mask);
    ctx.config = {{"background", o->background}};
    ctx.results = {{"width", cam.width}, {"height", cam.height}, {"gaussians", g.size()}};
  };
}

Runner add_train_refiner(CLI::App& app) {
  struct Opts {
    std::string config, out, curve, init;
    int epochs = -1;
    double lr = -1.0;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("train-refiner", "Train the refinement network on the displaced-limb fixture");
  sub->add_option("--config", o->config, "Trainer config JSON")->required();
  sub->add_option("--out", o->out, "Checkpoint output")->required();
  sub->add_option("--curve", o->curve, "Loss curve CSV output");
  sub->add_option("--init", o->init, "Initial checkpoint (default: fresh weights from the seed)");
  sub->add_option("--epochs", o->epochs, "Overrides the config's epochs");
  sub->add_option("--lr", o->lr, "Overrides the config's learning rate");
  return [o](RunContext& ctx) {
    io::TrainerFile f = io::parse_trainer_config(ctx.input_text(o->config));
    auto& t = f.trainer;
    if (o->epochs >= 0) t.epochs = o->epochs;
    if (o->lr > 0.0) t.lr = o->lr;
    if (ctx.seed_given) t.seed = ctx.seed;
    ctx.seed = t.seed;
    DisplacedLimbConfig fc;
    fc.seed = t.seed;
    fc.resolution = t.resolution;
    fc.uv_resolution = f.uv_resolution;
    fc.offset = f.limb_offset;
    const auto fixture = make_displaced_limb_fixture<float>(fc);
    const auto init = o->init.empty() ? nn::make_network_params<float>(t.seed) : io::parse_checkpoint(ctx.input(o->init));
    const auto result = train_refiner<float>({fixture.sample}, init, t);
    io::save_checkpoint(o->out, result.params);
    ctx.output(o->out);
    if (!o->curve.empty()) {
      io::write_text_atomic(o->curve, io::format_loss_curve_csv(result.curve));
      ctx.output(o->curve);
    }
    ctx.config = json::parse(io::format_trainer_config(f));
    const double initial = result.curve.empty() ? result.final_loss : result.curve.front().total;
    ctx.results = {{"initial_loss", initial},
                   {"final_loss", result.final_loss},
                   {"ratio", initial > 0.0 ? result.final_loss / initial : 1.0},
                   {"steps", result.curve.size()},
                   {"gaussians", fixture.sample.input.coarse.size()}};
  };
}

Runner add_evaluate(CLI::App& app) {
  struct Opts {
    std::string pred, truth, views, report, truth_gaussians;
    std::size_t samples = 10000;
    double tau_cm = kDefaultFscoreTau;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("evaluate", "Geometry and image metrics of a splat PLY against a truth mesh");
  sub->add_option("--pred", o->pred, "Predicted splat PLY")->required();
  sub->add_option("--truth", o->truth, "Truth mesh (.obj or .ply)")->required();
  sub->add_option("--views", o->views, "Rig JSON for image metrics")->required();
  sub->add_option("--report", o->report, "Report JSON output")->required();
  sub->add_option("--truth-gaussians", o->truth_gaussians, "Truth splat PLY for color PSNR/SSIM");
  sub->add_option("--samples", o->samples, "Surface samples drawn from the truth mesh")
      ->check(CLI::Range(1, 10000000))
      ->capture_default_str();
  sub->add_option("--tau", o->tau_cm, "F-score threshold (cm)")->capture_default_str();
  return [o](RunContext& ctx) {
    const GaussianSet pred = io::parse_splat_ply(ctx.input(o->pred));
    const Mesh truth = read_mesh(ctx, o->truth);
    const auto views = io::parse_rig_json(ctx.input_text(o->views));
    const PointSet truth_points = sample_surface(truth, o->samples, ctx.seed);
    const GeometryReport geo = evaluate_geometry(gaussian_points(pred), truth_points, o->tau_cm);
    std::optional<GaussianSet> truth_g;
    if (!o->truth_gaussians.empty()) truth_g = io::parse_splat_ply(ctx.input(o->truth_gaussians));
    json per_view = json::array();
    double mask_psnr = 0.0, mask_ssim = 0.0, color_psnr = 0.0, color_ssim = 0.0;
    for (const auto& cam : views) {
      const auto r = rasterize<double>(pred, cam, Eigen::Vector3d::Zero());
      const auto silhouette = rasterize_mesh_geometry<double>(truth, cam).silhouette;
      json v = {{"mask_psnr", psnr(r.mask, silhouette)}, {"mask_ssim", ssim(r.mask, silhouette)}};
      mask_psnr += v["mask_psnr"].get<double>();
      mask_ssim += v["mask_ssim"].get<double>();
      if (truth_g) {
        const auto t = rasterize<double>(*truth_g, cam, Eigen::Vector3d::Zero());
        v["psnr"] = psnr(r.color, t.color);
        v["ssim"] = ssim(r.color, t.color);
        color_psnr += v["psnr"].get<double>();
        color_ssim += v["ssim"].get<double>();
      }
      per_view.push_back(v);
    }
    const double n = static_cast<double>(views.size());
    json images = {{"mask_psnr", mask_psnr / n}, {"mask_ssim", mask_ssim / n}, {"per_view", per_view}};
    if (truth_g) {
      images["psnr"] = color_psnr / n;
      images["ssim"] = color_ssim / n;
    }
    const json report = {{"geometry", geometry_json(geo)}, {"images", images}, {"seed", ctx.seed}};
    io::write_text_atomic(o->report, report.dump(2) + "\n");
    ctx.output(o->report);
    ctx.config = {{"samples", o->samples}, {"tau_cm", o->tau_cm}};
    ctx.results = report;
  };
}

Runner add_bench(CLI::App& app) {
  struct Opts {
    std::string stage = "skin", report;
    std::size_t gaussians = 100000;
    int iters = 20, warmup = 3, resolution = 256, refine_resolution = 64;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("bench", "Time a pipeline stage on a synthetic body");
  sub->add_option("--stage", o->stage, "skin | animate | render | pipeline")
      ->check(CLI::IsMember({"skin", "animate", "render", "pipeline"}))
      ->capture_default_str();
  sub->add_option("--gaussians", o->gaussians, "Gaussian count")->check(CLI::Range(1, 50000000))->capture_default_str();
  sub->add_option("--iters", o->iters, "Timed iterations")->check(CLI::Range(1, 100000))->capture_default_str();
  sub->add_option("--warmup", o->warmup, "Untimed iterations")->check(CLI::Range(0, 100000))->capture_default_str();
  sub->add_option("--resolution", o->resolution, "Render resolution (render, pipeline)")
      ->check(CLI::Range(8, 4096))
      ->capture_default_str();
  sub->add_option("--refine-resolution", o->refine_resolution, "Refinement rig resolution (pipeline)")
      ->check(CLI::Range(8, 1024))
      ->capture_default_str();
  sub->add_option("--report", o->report, "Timing report JSON output");
  return [o](RunContext& ctx) {
    const auto body = make_synthetic_body(ctx.seed);
    const BodyModel& model = body.model;
    const Shape shape = Shape::zero(model.shape_dim());
    const GaussianSet g = surface_gaussians(model, o->gaussians, ctx.seed);
    Pose target = model.skeleton.canonical_pose;
    target.joint_rotations[synthetic_joint::l_elbow] =
        Eigen::Quaterniond(Eigen::AngleAxisd(0.6, Eigen::Vector3d::UnitY())) *
        target.joint_rotations[synthetic_joint::l_elbow];
    target.joint_rotations[synthetic_joint::r_knee] =
        Eigen::Quaterniond(Eigen::AngleAxisd(0.4, Eigen::Vector3d::UnitX())) *
        target.joint_rotations[synthetic_joint::r_knee];
    const auto rig = framing_rig(g.centers, o->resolution);
    std::function<void()> fn;
    GaussianSet sink;
    if (o->stage == "skin") {
      fn = [&] { sink = animate(g, model, shape, target); };
    } else if (o->stage == "animate") {
      GaussianSet unbound = g;
      unbound.weights.reset();
      fn = [&, unbound] {
        GaussianSet b = unbound;
        bind_to_model(b, model, shape, kDefaultBindNeighbors);
        sink = animate(b, model, shape, target);
      };
    } else if (o->stage == "render") {
      fn = [&] {
        for (const auto& cam : rig) rasterize<float>(g, cam, Eigen::Vector3d::Zero());
      };
    } else {
      const auto params = nn::make_network_params<float>(ctx.seed);
      const Mesh body_mesh = pose_target_body(model, shape, target);
      fn = [&, params, body_mesh] {
        RefineInput in;
        in.coarse = animate(g, model, shape, target);
        in.target_body = body_mesh;
        in.rig = framing_rig(in.coarse.centers, o->refine_resolution);
        const RefineOutput r = refine<float>(in, params);
        for (const auto& cam : rig) rasterize<float>(r.refined, cam, Eigen::Vector3d::Zero());
      };
    }
    const TimingReport t = bench(o->stage, fn, o->warmup, o->iters);
    const json report = timing_json(t);
    std::cout << report.dump(2) << "\n";
    if (!o->report.empty()) {
      io::write_text_atomic(o->report, report.dump(2) + "\n");
      ctx.output(o->report);
    }
    ctx.config = {{"stage", o->stage},
                  {"gaussians", o->gaussians},
                  {"iters", o->iters},
                  {"warmup", o->warmup},
                  {"resolution", o->resolution},
                  {"refine_resolution", o->refine_resolution}};
    ctx.results = report;
  };
}

Runner add_synth(CLI::App& app) {
  struct Opts {
    std::string out;
    int resolution = 128;
    int epochs = 40;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("synth", "Write the synthetic fixture: model, poses, scan, texture, rig, config");
  sub->add_option("--out", o->out, "Output directory")->required();
  sub->add_option("--resolution", o->resolution, "Evaluation rig resolution")
      ->check(CLI::Range(8, 4096))
      ->capture_default_str();
  sub->add_option("--epochs", o->epochs, "Epochs written to train.json")->check(CLI::Range(0, 1000000))->capture_default_str();
  return [o](RunContext& ctx) {
    namespace sj = synthetic_joint;
    const fs::path dir = o->out;
    fs::create_directories(dir);
    auto put = [&](const fs::path& name, const std::string& text) {
      io::write_text_atomic(dir / name, text);
      ctx.output(dir / name);
    };
    io::save_model(dir / "model.json", make_synthetic_body(ctx.seed).model);
    for (const char* f : {"model.json", "model_template.obj", "model_weights.bin", "model_weights.bin.json"}) {
      ctx.output(dir / f);
    }
    // everything below derives from the files as written so that consumers see the same values
    const BodyModel model = io::load_model(dir / "model.json");
    const Shape shape = Shape::zero(model.shape_dim());
    put("canonical_pose.json", io::format_pose_json(model.skeleton.canonical_pose));
    auto bent = [&](std::initializer_list<std::tuple<int, Eigen::Vector3d, double>> bends) {
      Pose p = model.skeleton.canonical_pose;
      for (const auto& [joint, axis, angle] : bends) {
        auto& q = p.joint_rotations[static_cast<std::size_t>(joint)];
        q = Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis)) * q;
      }
      return io::parse_pose_json(io::format_pose_json(p));
    };
    const Pose source = bent({{sj::l_shoulder, Eigen::Vector3d::UnitZ(), 0.5},
                              {sj::r_shoulder, Eigen::Vector3d::UnitZ(), -0.5},
                              {sj::l_knee, Eigen::Vector3d::UnitX(), 0.3}});
    const Pose target = bent({{sj::l_elbow, Eigen::Vector3d::UnitY(), 0.6}, {sj::r_knee, Eigen::Vector3d::UnitX(), 0.4}});
    put("source_pose.json", io::format_pose_json(source));
    put("target_pose.json", io::format_pose_json(target));
    const Mesh scan = pose_body(model, shape, source);
    const Mesh truth = pose_body(model, shape, target);
    put("scan.obj", io::format_obj(scan));
    put("truth.obj", io::format_obj(truth));
    io::save_png(dir / "texture.png", synthetic_texture(64));
    ctx.output(dir / "texture.png");
    const auto rig = framing_rig(truth.vertices, o->resolution);
    put("rig.json", io::format_rig_json(rig));
    put("camera.json", io::format_camera_json(rig[0]));
    io::TrainerFile train;
    train.trainer.seed = ctx.seed;
    train.trainer.epochs = o->epochs;
    put("train.json", io::format_trainer_config(train));
    ctx.config = {{"resolution", o->resolution}, {"epochs", o->epochs}};
  };
}

} // namespace gsanim::cli

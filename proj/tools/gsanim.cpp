#include "cli.hpp"

#include "gsanim/error.hpp"
#include "gsanim/io.hpp"
#include "gsanim/parallel.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <map>

namespace {

using gsanim::cli::RunContext;
using gsanim::cli::Runner;

enum ExitCode { ok = 0, usage = 2, asset = 3, numeric = 4, invariant = 5 };

// One machine-readable line, then the human-readable detail.
int report_error(const std::string& command, const char* kind, const std::string& detail, int code,
                 const std::string& extra = {}) {
  std::cerr << "gsanim-error command=" << (command.empty() ? "-" : command) << " kind=" << kind << extra
            << " exit=" << code << "\n"
            << detail << "\n";
  return code;
}

void write_manifest(const RunContext& ctx, double elapsed_ms) {
  std::filesystem::path path = ctx.manifest;
  if (path.empty()) {
    if (ctx.outputs.empty()) return;
    path = ctx.outputs.front() + ".manifest.json";
  }
  const nlohmann::json m = {{"tool", "gsanim"},
                            {"version", GSANIM_VERSION},
                            {"command", ctx.command},
                            {"config", ctx.config},
                            {"seed", ctx.seed},
                            {"threads", ctx.threads},
                            {"inputs", ctx.inputs},
                            {"outputs", ctx.outputs},
                            {"results", ctx.results},
                            {"timing", {{"total_ms", elapsed_ms}}}};
  gsanim::io::write_text_atomic(path, m.dump(2) + "\n");
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian avatar animation engine"};
  app.set_version_flag("--version", GSANIM_VERSION);
  app.require_subcommand(1, 1);
  app.fallthrough();
  RunContext ctx;
  int threads = 0;
  std::string manifest;
  app.add_option("--threads", threads, "Worker threads (default: GSANIM_THREADS, else all logical cores)")
      ->check(CLI::Range(1, 4096));
  auto* seed_opt = app.add_option("--seed", ctx.seed, "Seed for every random choice")->capture_default_str();
  app.add_option("--manifest", manifest, "Run manifest path (default: <first output>.manifest.json)");

  std::map<const CLI::App*, Runner> runners;
  auto reg = [&](Runner r) { runners[app.get_subcommands({}).back()] = std::move(r); };
  reg(gsanim::cli::add_canonicalize(app));
  reg(gsanim::cli::add_template(app));
  reg(gsanim::cli::add_animate(app));
  reg(gsanim::cli::add_render(app));
  reg(gsanim::cli::add_train_refiner(app));
  reg(gsanim::cli::add_evaluate(app));
  reg(gsanim::cli::add_bench(app));
  reg(gsanim::cli::add_synth(app));

  app.set_help_all_flag("--help-all", "Print help for every subcommand and exit");
  for (auto* sub : app.get_subcommands({})) {
    sub->footer("Global options (accepted before or after the subcommand):\n"
                "  --threads INT   worker threads (default: GSANIM_THREADS, else all logical cores)\n"
                "  --seed UINT     seed for every random choice (default 0)\n"
                "  --manifest TEXT run manifest path (default: <first output>.manifest.json)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("", "usage", e.what(), usage);
  }

  const CLI::App* sub = app.get_subcommands().front();
  ctx.command = sub->get_name();
  ctx.manifest = manifest;
  ctx.seed_given = seed_opt->count() > 0;
  if (threads < 1) {
    if (const char* env = std::getenv("GSANIM_THREADS")) {
      char* end = nullptr;
      const long v = std::strtol(env, &end, 10);
      if (end == env || *end != '\0' || v < 1 || v > 4096) {
        return report_error(ctx.command, "usage", "GSANIM_THREADS must be an integer in [1, 4096]", usage);
      }
      threads = static_cast<int>(v);
    }
  }
  gsanim::set_thread_count(threads);
  ctx.threads = gsanim::thread_count();

  try {
    const auto start = std::chrono::steady_clock::now();
    runners.at(sub)(ctx);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    write_manifest(ctx, ms);
  } catch (const CLI::ParseError& e) {
    return report_error(ctx.command, "usage", e.what(), usage);
  } catch (const gsanim::AssetError& e) {
    return report_error(ctx.command, "asset", e.what(), asset,
                        std::string(" asset_kind=") + gsanim::to_string(e.kind()) +
                            " location=" + std::to_string(e.location()));
  } catch (const gsanim::NumericError& e) {
    return report_error(ctx.command, "numeric", e.what(), numeric);
  } catch (const gsanim::InvariantError& e) {
    return report_error(ctx.command, "invariant", e.what(), invariant);
  } catch (const std::filesystem::filesystem_error& e) {
    return report_error(ctx.command, "asset", e.what(), asset, " asset_kind=io location=0");
  }
  return ok;
}

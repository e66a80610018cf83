#pragma once

#include "json.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace CLI {
class App;
}

namespace gsanim::cli {

/// Collected while a command runs and written as the run manifest at the end.
struct RunContext {
  std::string command;
  std::uint64_t seed = 0;
  bool seed_given = false;  // --seed on the command line overrides config files
  int threads = 1;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json inputs = nlohmann::json::object();  // path -> content hash
  std::vector<std::string> outputs;
  nlohmann::json results = nlohmann::json::object();
  std::filesystem::path manifest;  // empty: next to the first output

  /// Reads and hashes an input file.
  std::vector<std::uint8_t> input(const std::filesystem::path& path);
  std::string input_text(const std::filesystem::path& path);
  void output(const std::filesystem::path& path);
};

using Runner = std::function<void(RunContext&)>;

/// Each registers its subcommand on `app` and returns the runner bound to its options.
Runner add_canonicalize(CLI::App& app);
Runner add_template(CLI::App& app);
Runner add_animate(CLI::App& app);
Runner add_render(CLI::App& app);
Runner add_train_refiner(CLI::App& app);
Runner add_evaluate(CLI::App& app);
Runner add_bench(CLI::App& app);
Runner add_synth(CLI::App& app);

} // namespace gsanim::cli

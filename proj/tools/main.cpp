// n2i: simulate | reconstruct | train | denoise | eval | baseline
#include <cstdlib>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "config.hpp"
#include "n2i/errors.hpp"
#include "n2i/parallel.hpp"
#include "pipeline.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

}  // namespace

int main(int argc, char** argv) {
  using namespace n2i::cli;
  CLI::App app{"Neighbor2Inverse phase-contrast CT denoising pipeline"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> overrides;
  bool quiet = false;
  app.add_option("-c,--config", config_path, "INI configuration file");
  app.add_option("--set", overrides, "Override a config key, section.key=value")->take_all();
  app.add_flag("-q,--quiet", quiet, "Only log warnings and errors");

  const std::map<std::string, void (*)(const PipelineConfig&)> commands = {
      {"simulate", cmd_simulate}, {"reconstruct", cmd_reconstruct}, {"train", cmd_train},
      {"denoise", cmd_denoise},   {"eval", cmd_eval},               {"baseline", cmd_baseline},
  };
  const std::map<std::string, std::string> help = {
      {"simulate", "Phantom, clean and noisy projection stacks"},
      {"reconstruct", "Thickness retrieval and FBP of every detector row"},
      {"train", "Train the denoiser on the noisy stack"},
      {"denoise", "Apply the trained denoiser to the noisy reconstruction"},
      {"eval", "CNR, SR, Q, PSNR and SSIM table with previews"},
      {"baseline", "SSIM-tuned Gaussian and TV filtering"},
  };
  for (const auto& [name, fn] : commands) app.add_subcommand(name, help.at(name));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  spdlog::set_level(quiet ? spdlog::level::warn : spdlog::level::info);
  spdlog::set_pattern("[%l] %v");

  try {
    const PipelineConfig cfg =
        config_path.empty() ? default_config(overrides) : load_config(config_path, overrides);
    spdlog::info("threads: {} (N2I_THREADS overrides)", n2i::thread_count());
    for (const auto& [name, fn] : commands) {
      if (app.got_subcommand(name)) fn(cfg);
    }
  } catch (const n2i::ConfigError& e) {
    spdlog::error("config error: {}", e.what());
    return kExitConfig;
  } catch (const n2i::NumericError& e) {
    spdlog::error("numeric failure: {}", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return EXIT_FAILURE;
  }
  return EXIT_SUCCESS;
}

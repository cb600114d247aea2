#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <boost/property_tree/ptree.hpp>

#include "n2i/learn.hpp"
#include "n2i/types.hpp"

namespace n2i::cli {

/// Half-open detector-row range [begin, end).
struct RowRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

enum class TrainMethod { neighbor2inverse, noise2inverse };
std::string to_string(TrainMethod m);

struct PipelineConfig {
  std::filesystem::path source;
  std::filesystem::path output_dir;
  std::uint64_t seed = 0;

  std::filesystem::path phantom_spec;  // empty: built-in lung phantom
  std::size_t size = 256;
  std::size_t texture_count = 250;
  std::size_t rows = 96;

  PhysicsParams physics;

  double alpha = 1e4;
  double sigma_g = 5e-4;
  bool exposure_sweep = false;

  std::size_t angles = 720;
  std::size_t stride = 1;
  EdgePadding retrieval_pad;

  TrainMethod method = TrainMethod::neighbor2inverse;
  TrainConfig train;
  std::size_t n2inv_x = 3;

  RowRange train_rows, val_rows, test_rows;

  std::filesystem::path roi_file;  // empty: built-in ROIs of the lung phantom
  std::vector<std::size_t> preview_rows;

  std::vector<std::string> baseline_methods;
  std::vector<double> gaussian_sigmas;
  std::vector<double> tv_weights;
  std::size_t tv_iters = 200;

  RngSeed phantom_seed() const { return {seed, 1}; }
  RngSeed noise_seed() const { return {seed, 2}; }
  RngSeed train_seed() const { return {seed, 3}; }

  /// Every resolved key, defaults included, as INI text.
  std::string effective_ini() const;
};

/// Reads an INI file and applies "section.key=value" overrides. Unknown sections or
/// keys, malformed values and failed invariants raise ConfigError with the file line.
PipelineConfig load_config(const std::filesystem::path& path,
                           const std::vector<std::string>& overrides = {});

/// Built-in configuration when no file is given.
PipelineConfig default_config(const std::vector<std::string>& overrides = {});

}  // namespace n2i::cli

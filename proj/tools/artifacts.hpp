#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "n2i/array.hpp"
#include "n2i/volume_io.hpp"

namespace n2i::cli {

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// Display window of an exported preview.
struct PngWindow {
  double lo = 0.0;
  double hi = 0.0;
};

/// 8-bit grayscale PNG with min/max windowing; returns the window used.
PngWindow write_png(const Image& image, const std::filesystem::path& path);

/// Collects the outputs of one subcommand. Files are written under a temporary name and
/// only renamed into place by commit(); if the stage is destroyed before that, every
/// temporary is removed so an aborted command leaves no partial outputs behind.
class ArtifactStage {
 public:
  explicit ArtifactStage(std::filesystem::path dir);
  ~ArtifactStage();
  ArtifactStage(const ArtifactStage&) = delete;
  ArtifactStage& operator=(const ArtifactStage&) = delete;

  const std::filesystem::path& dir() const { return dir_; }

  void volume(const std::string& name, const Volume& vol);
  void text(const std::string& name, const std::string& content);
  void json(const std::string& name, const nlohmann::json& value);
  void png(const std::string& name, const Image& image);
  /// Temporary path for writers that need a file name (checkpoints); registers `name`.
  std::filesystem::path reserve(const std::string& name);

  /// Renames every staged file into place, then merges their hashes and the preview
  /// windows into manifest.json.
  void commit();

 private:
  std::filesystem::path dir_;
  std::vector<std::pair<std::string, std::filesystem::path>> staged_;
  std::map<std::string, PngWindow> windows_;
  bool committed_ = false;
};

/// Path of an existing artifact; ConfigError naming the file and the producing
/// subcommand when it is missing.
std::filesystem::path require_artifact(const std::filesystem::path& dir, const std::string& name,
                                       const std::string& producer);

}  // namespace n2i::cli

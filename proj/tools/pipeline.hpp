#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "config.hpp"
#include "n2i/metrics.hpp"
#include "n2i/types.hpp"
#include "n2i/volume_io.hpp"

namespace n2i::cli {

struct NamedPair {
  std::string name;
  RoiPair pair;
};

/// Tissue/air pairs and edge regions evaluated on every test slice.
struct RoiSet {
  std::vector<NamedPair> pairs;
  std::vector<EdgeRoi> edges;
};

/// {"pairs": [{"name", "tissue": [row, col, rows, cols], "air": [...]}],
///  "edges": [{"rect": [...], "normal": [x, y], "profiles": 16}]}
RoiSet load_rois(const std::filesystem::path& path);
/// Regions of the built-in lung phantom at grid size n.
RoiSet default_rois(std::size_t n);

/// Projection stack volume with angles and pitches from its header.
Volume stack_volume(const ProjectionStack& stack, nlohmann::json meta = nlohmann::json::object());
ProjectionStack load_stack(const std::filesystem::path& path);
/// Slices as a (b, y, x) volume and back.
Volume slices_volume(const std::vector<ReconSlice>& slices, nlohmann::json meta = nlohmann::json::object());
std::vector<ReconSlice> load_slices(const std::filesystem::path& path);

/// Rows [begin, begin + count) of every projection.
ProjectionStack row_window(const ProjectionStack& stack, std::size_t begin, std::size_t count);

void cmd_simulate(const PipelineConfig& cfg);
void cmd_reconstruct(const PipelineConfig& cfg);
void cmd_train(const PipelineConfig& cfg);
void cmd_denoise(const PipelineConfig& cfg);
void cmd_baseline(const PipelineConfig& cfg);
void cmd_eval(const PipelineConfig& cfg);

}  // namespace n2i::cli

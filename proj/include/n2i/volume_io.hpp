#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "n2i/array.hpp"

namespace n2i {

/// Shape-tagged array for the on-disk volume container (1 to 3 dimensions).
struct Volume {
  std::vector<std::size_t> shape;
  std::vector<double> values;
  std::string axes;          // "phi,b,a", "phi,a", "y,x", ...
  double pixel_pitch = 1.0;
  nlohmann::json meta = nlohmann::json::object();

  std::size_t element_count() const;
};

Volume to_volume(const Image& img, std::string axes, double pixel_pitch);
Volume to_volume(const Stack& stack, std::string axes, double pixel_pitch);
Image image_from_volume(const Volume& vol);
Stack stack_from_volume(const Volume& vol);

/// Layout: 8-byte magic "N2IVOL1\n", u64 little-endian header length, JSON header,
/// then little-endian float32 payload in row-major order.
void write_volume(const Volume& vol, const std::filesystem::path& path);
Volume read_volume(const std::filesystem::path& path);

/// Values as they will be stored (rounded through float32).
std::vector<double> round_to_float32(const std::vector<double>& v);

}  // namespace n2i

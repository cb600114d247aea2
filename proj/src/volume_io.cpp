#include "n2i/volume_io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>

#include "n2i/errors.hpp"

namespace n2i {
namespace {

constexpr char kMagic[8] = {'N', '2', 'I', 'V', 'O', 'L', '1', '\n'};

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
  return v;
}

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r = (r << 8) | ((v >> (8 * i)) & 0xFFu);
    return r;
  }
  return v;
}

void check_shape(const std::vector<std::size_t>& shape) {
  if (shape.empty() || shape.size() > 3) throw Error("degenerate shape");
  for (auto d : shape) {
    if (d == 0) throw Error("degenerate shape");
  }
}

}  // namespace

std::size_t Volume::element_count() const {
  if (shape.empty()) return 0;
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Volume to_volume(const Image& img, std::string axes, double pixel_pitch) {
  return Volume{{img.rows(), img.cols()}, img.values(), std::move(axes), pixel_pitch, {}};
}

Volume to_volume(const Stack& stack, std::string axes, double pixel_pitch) {
  return Volume{{stack.dim0(), stack.dim1(), stack.dim2()},
                stack.values(),
                std::move(axes),
                pixel_pitch,
                {}};
}

Image image_from_volume(const Volume& vol) {
  if (vol.shape.size() == 1) return Image(1, vol.shape[0], vol.values);
  if (vol.shape.size() != 2) throw Error("expected a 2D volume");
  return Image(vol.shape[0], vol.shape[1], vol.values);
}

Stack stack_from_volume(const Volume& vol) {
  if (vol.shape.size() != 3) throw Error("expected a 3D volume");
  Stack s(vol.shape[0], vol.shape[1], vol.shape[2]);
  s.values() = vol.values;
  return s;
}

std::vector<double> round_to_float32(const std::vector<double>& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
  return out;
}

void write_volume(const Volume& vol, const std::filesystem::path& path) {
  check_shape(vol.shape);
  if (vol.values.size() != vol.element_count()) {
    throw Error("write_volume: value count does not match shape");
  }
  for (double v : vol.values) {
    if (!std::isfinite(v) || !std::isfinite(static_cast<float>(v))) {
      throw NumericError("write_volume: non-finite value");
    }
  }
  nlohmann::json header = {
      {"format", "n2i-volume"}, {"version", 1},      {"shape", vol.shape},
      {"dtype", "float32"},     {"byte_order", "little"}, {"axes", vol.axes},
      {"pixel_pitch", vol.pixel_pitch}, {"meta", vol.meta},
  };
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t len = to_little(static_cast<std::uint64_t>(text.size()));
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));

  std::vector<std::uint32_t> payload(vol.values.size());
  for (std::size_t i = 0; i < vol.values.size(); ++i) {
    const auto f = static_cast<float>(vol.values[i]);
    payload[i] = to_little(std::bit_cast<std::uint32_t>(f));
  }
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(std::uint32_t)));
  if (!out) throw IoError("write failed: " + path.string());
}

Volume read_volume(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open volume: " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError("malformed header: bad magic in " + path.string());
  }
  std::uint64_t len = 0;
  if (!in.read(reinterpret_cast<char*>(&len), sizeof(len))) {
    throw IoError("malformed header: missing length in " + path.string());
  }
  len = to_little(len);
  if (len > (1u << 26)) throw IoError("malformed header: implausible length");
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) {
    throw IoError("malformed header: truncated header in " + path.string());
  }

  Volume vol;
  try {
    const auto header = nlohmann::json::parse(text);
    if (header.at("format") != "n2i-volume" || header.at("dtype") != "float32") {
      throw IoError("malformed header: unsupported format");
    }
    vol.shape = header.at("shape").get<std::vector<std::size_t>>();
    vol.axes = header.value("axes", "");
    vol.pixel_pitch = header.value("pixel_pitch", 1.0);
    vol.meta = header.value("meta", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed header: ") + e.what());
  }
  try {
    check_shape(vol.shape);
  } catch (const Error&) {
    throw IoError("malformed header: degenerate shape");
  }

  const std::size_t n = vol.element_count();
  const auto payload_start = in.tellg();
  in.seekg(0, std::ios::end);
  const auto payload_bytes = static_cast<std::size_t>(in.tellg() - payload_start);
  if (payload_bytes != n * sizeof(std::uint32_t)) {
    throw IoError(payload_bytes < n * sizeof(std::uint32_t)
                      ? "truncated payload: " + path.string()
                      : "payload size mismatch: " + path.string());
  }
  in.seekg(payload_start);
  std::vector<std::uint32_t> payload(n);
  in.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(n * sizeof(std::uint32_t)));
  vol.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    vol.values[i] = std::bit_cast<float>(to_little(payload[i]));
  }
  return vol;
}

}  // namespace n2i

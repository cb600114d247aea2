#include "artifacts.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include <openssl/evp.h>
#include <png.h>

#include "n2i/errors.hpp"

namespace n2i::cli {

namespace fs = std::filesystem;

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for hashing: " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error("sha256: digest init failed");
  }
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof(byte), "%02x", md[i]);
    hex += byte;
  }
  return hex;
}

PngWindow write_png(const Image& image, const fs::path& path) {
  if (image.size() == 0) throw Error("write_png: empty image");
  const auto [mn, mx] = std::minmax_element(image.values().begin(), image.values().end());
  const PngWindow win{*mn, *mx};
  const double span = win.hi > win.lo ? win.hi - win.lo : 1.0;
  std::vector<png_byte> pixels(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double t = std::clamp((image.values()[i] - win.lo) / span, 0.0, 1.0);
    pixels[i] = static_cast<png_byte>(std::lround(255.0 * t));
  }
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.cols());
  img.height = static_cast<png_uint_32>(image.rows());
  img.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.c_str(), 0, pixels.data(), 0, nullptr)) {
    throw IoError("png write failed: " + path.string() + ": " + img.message);
  }
  return win;
}

ArtifactStage::ArtifactStage(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create output directory " + dir_.string() + ": " + ec.message());
}

ArtifactStage::~ArtifactStage() {
  if (committed_) return;
  for (const auto& [name, tmp] : staged_) {
    std::error_code ec;
    fs::remove(tmp, ec);
  }
}

fs::path ArtifactStage::reserve(const std::string& name) {
  const fs::path final_path = dir_ / name;
  fs::create_directories(final_path.parent_path());
  fs::path tmp = final_path;
  tmp += ".partial";
  staged_.emplace_back(name, tmp);
  return tmp;
}

void ArtifactStage::volume(const std::string& name, const Volume& vol) {
  write_volume(vol, reserve(name));
}

void ArtifactStage::text(const std::string& name, const std::string& content) {
  const fs::path tmp = reserve(name);
  std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) throw IoError("write failed: " + tmp.string());
}

void ArtifactStage::json(const std::string& name, const nlohmann::json& value) {
  text(name, value.dump(2) + "\n");
}

void ArtifactStage::png(const std::string& name, const Image& image) {
  windows_[name] = write_png(image, reserve(name));
}

void ArtifactStage::commit() {
  nlohmann::json manifest = nlohmann::json::object();
  const fs::path manifest_path = dir_ / "manifest.json";
  if (fs::exists(manifest_path)) {
    std::ifstream in(manifest_path);
    try {
      manifest = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw IoError("corrupt manifest " + manifest_path.string() + ": " + e.what());
    }
  }
  for (const auto& [name, tmp] : staged_) {
    fs::rename(tmp, dir_ / name);
    manifest["files"][name] = sha256_file(dir_ / name);
  }
  for (const auto& [name, win] : windows_) {
    manifest["preview_windows"][name] = {{"min", win.lo}, {"max", win.hi}};
  }
  committed_ = true;
  const fs::path tmp = dir_ / "manifest.json.partial";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << manifest.dump(2) << "\n";
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  fs::rename(tmp, manifest_path);
}

fs::path require_artifact(const fs::path& dir, const std::string& name, const std::string& producer) {
  const fs::path p = dir / name;
  if (!fs::exists(p)) {
    throw ConfigError("missing input " + p.string() + " (run '" + producer + "' first)");
  }
  return p;
}

}  // namespace n2i::cli

#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "n2i/errors.hpp"
#include "n2i/nn.hpp"

using namespace n2i;

namespace {

Image pattern(std::size_t r, std::size_t c, double f) {
  Image img(r, c);
  for (std::size_t i = 0; i < img.size(); ++i) img.values()[i] = std::sin(f * i + 0.3);
  return img;
}

double weighted(const Denoiser& m, const Image& x, const Image& w) {
  const Image y = m.forward(x);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y.values()[i] * w.values()[i];
  return s;
}

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("backward matches finite differences") {
  ModelConfig cfg;
  cfg.depth = 2;
  cfg.base_channels = 4;
  Denoiser m(cfg);
  m.initialize({7, 0});
  const Image x = pattern(8, 12, 0.7), w = pattern(8, 12, 1.3);
  Denoiser::Cache cache;
  m.forward(x, cache);
  std::vector<double> g(m.parameter_count(), 0.0);
  const Image dx = m.backward(cache, w, g);

  const double h = 1e-6;
  double worst = 0.0, scale = 0.0;
  for (std::size_t k = 0; k < m.parameter_count(); ++k) {
    Denoiser a = m, b = m;
    a.parameters()[k] += h;
    b.parameters()[k] -= h;
    const double fd = (weighted(a, x, w) - weighted(b, x, w)) / (2 * h);
    worst = std::max(worst, std::abs(fd - g[k]));
    scale = std::max(scale, std::abs(fd));
  }
  CHECK(worst / scale < 1e-6);

  worst = scale = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    Image a = x, b = x;
    a.values()[k] += h;
    b.values()[k] -= h;
    const double fd = (weighted(m, a, w) - weighted(m, b, w)) / (2 * h);
    worst = std::max(worst, std::abs(fd - dx.values()[k]));
    scale = std::max(scale, std::abs(fd));
  }
  CHECK(worst / scale < 1e-6);
}

TEST_CASE("residual model with zero parameters is the identity") {
  Denoiser m(ModelConfig{});
  m.zero_parameters();
  const Image x = pattern(16, 24, 0.9);
  CHECK(m.forward(x) == x);
  CHECK(denoise_slice(m, pattern(13, 19, 0.4)) == pattern(13, 19, 0.4));
}

TEST_CASE("input sizes") {
  Denoiser m(ModelConfig{});
  m.initialize({1, 0});
  CHECK_THROWS_AS(m.forward(Image(12, 16)), Error);
  const Image y = denoise_slice(m, pattern(21, 30, 0.2));
  CHECK(y.rows() == 21);
  CHECK(y.cols() == 30);
}

TEST_CASE("initialization is deterministic in the seed") {
  ModelConfig cfg;
  cfg.base_channels = 4;
  Denoiser a(cfg), b(cfg), c(cfg);
  a.initialize({3, 1});
  b.initialize({3, 1});
  c.initialize({3, 2});
  CHECK(std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin()));
  CHECK_FALSE(std::equal(a.parameters().begin(), a.parameters().end(), c.parameters().begin()));
}

TEST_CASE("checkpoint round trip") {
  ModelConfig cfg;
  cfg.depth = 2;
  cfg.base_channels = 6;
  cfg.leaky_slope = 0.2;
  Denoiser m(cfg);
  m.initialize({11, 0});
  for (double& p : m.parameters()) p = static_cast<float>(p);
  const auto path = temp_file("n2i_test_checkpoint.n2i");
  save_checkpoint(m, path);
  const Denoiser back = load_checkpoint(path);
  CHECK(back.config() == cfg);
  CHECK(std::equal(m.parameters().begin(), m.parameters().end(), back.parameters().begin(),
                   back.parameters().end()));
  const Image x = pattern(16, 16, 0.5);
  CHECK(back.forward(x) == m.forward(x));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_checkpoint(temp_file("n2i_missing_checkpoint.n2i")), IoError);
}

TEST_CASE("adam minimizes a quadratic") {
  std::vector<double> x = {3.0, -2.0};
  Adam opt(2, 0.1);
  for (int it = 0; it < 500; ++it) {
    const std::vector<double> g = {2.0 * x[0], 20.0 * x[1]};
    opt.step(x, g);
  }
  CHECK(std::abs(x[0]) < 1e-2);
  CHECK(std::abs(x[1]) < 1e-2);
}

TEST_CASE("plateau scheduler") {
  PlateauScheduler s(2, 0.5);
  double lr = 1.0;
  lr = s.observe(1.0, lr);
  CHECK(lr == 1.0);
  lr = s.observe(1.0, lr);
  lr = s.observe(1.0, lr);
  CHECK(lr == 1.0);
  lr = s.observe(1.0, lr);
  CHECK(lr == 0.5);
  lr = s.observe(0.5, lr);
  CHECK(lr == 0.5);
}

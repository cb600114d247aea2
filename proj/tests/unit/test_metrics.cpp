#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "n2i/errors.hpp"
#include "n2i/metrics.hpp"

using namespace n2i;

namespace {

// Step of height `amp` across the line normal . (x, y) = d0, blurred by a Gaussian of
// width sigma (pixels), plus white noise of standard deviation amp / snr.
Image blurred_edge(std::size_t n, double sigma, double nx, double ny, double snr,
                   std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  const double amp = 2.0, base = 0.5, c = 0.5 * static_cast<double>(n - 1);
  const double d0 = 0.37;
  Image img(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double d = nx * (static_cast<double>(j) - c) + ny * (static_cast<double>(i) - c) - d0;
      const double step = sigma > 0 ? 0.5 * (1.0 + std::erf(d / (std::sqrt(2.0) * sigma)))
                                    : (d > 0 ? 1.0 : 0.0);
      img(i, j) = base + amp * step + (snr > 0 ? amp / snr * nd(gen) : 0.0);
    }
  }
  return img;
}

Image two_regions() {
  // Tissue: alternating 6 and 14 (mean 10, population std 4); air: constant 2.
  Image img(20, 20, 0.0);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j) img(i, j) = (i + j) % 2 ? 14.0 : 6.0;
  for (std::size_t i = 10; i < 18; ++i)
    for (std::size_t j = 10; j < 18; ++j) img(i, j) = 2.0;
  return img;
}

const RoiPair kPair{{0, 0, 8, 8}, {10, 10, 8, 8}};

}  // namespace

TEST_CASE("cnr arithmetic") {
  const Image img = two_regions();
  CHECK(cnr(img, kPair) == 2.0);
  Image shifted = img;
  for (double& v : shifted.values()) v = 3.0 * v + 11.0;
  CHECK(cnr(shifted, kPair) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(cnr(img, RoiPair{{0, 0, 8, 8}, {0, 8, 8, 8}}) != 0.0);

  Image same = img;
  for (std::size_t i = 10; i < 18; ++i)
    for (std::size_t j = 10; j < 18; ++j) same(i, j) = img(i - 10, j - 10);
  CHECK(cnr(same, kPair) == 0.0);

  CHECK_THROWS_AS(cnr(Image(20, 20, 1.0), kPair), NumericError);
  CHECK_THROWS_AS(cnr(img, RoiPair{{0, 0, 8, 8}, {4, 4, 8, 8}}), ConfigError);
  CHECK_THROWS_AS(cnr(img, RoiPair{{0, 0, 3, 3}, {10, 10, 8, 8}}), ConfigError);
  CHECK_THROWS_AS(cnr(img, RoiPair{{0, 0, 8, 8}, {15, 15, 8, 8}}), ConfigError);
}

TEST_CASE("edge resolution recovers known blur") {
  for (double sigma : {1.0, 2.0, 4.0}) {
    CAPTURE(sigma);
    const Image img = blurred_edge(96, sigma, 1.0, 0.0, 20.0, 5);
    const EdgeRoi roi{{24, 24, 48, 48}, 1.0, 0.0, 16};
    CHECK(edge_resolution(img, roi) == doctest::Approx(2.3548 * sigma).epsilon(0.05));
  }
  const double t = 10.0 * std::acos(-1.0) / 180.0;
  const Image tilted = blurred_edge(96, 2.0, std::cos(t), std::sin(t), 20.0, 6);
  const EdgeRoi roi{{24, 24, 48, 48}, std::cos(t), std::sin(t), 16};
  CHECK(edge_resolution(tilted, roi) == doctest::Approx(2.3548 * 2.0).epsilon(0.05));

  const Image step = blurred_edge(64, 0.0, 1.0, 0.0, 0.0, 0);
  CHECK(edge_resolution(step, {{16, 16, 32, 32}, 1.0, 0.0, 16}) <= 1.2);
}

TEST_CASE("edge fit rejects non-edges") {
  std::mt19937_64 gen(9);
  std::normal_distribution<double> nd;
  Image noise(64, 64);
  for (double& v : noise.values()) v = nd(gen);
  CHECK_THROWS_AS(edge_resolution(noise, {{16, 16, 32, 32}, 1.0, 0.0, 16}), Error);
  CHECK_THROWS_AS(edge_resolution(Image(64, 64, 1.0), {{16, 16, 32, 32}, 1.0, 0.0, 16}), Error);
}

TEST_CASE("quality index") {
  CHECK(quality_index(2.0, 2.0) == 1.0);
  CHECK(quality_index(4.0, 2.0) == 2.0);
  CHECK(quality_index(2.0, 4.0) == 0.5);
}

TEST_CASE("psnr and ssim") {
  Image a(40, 40);
  for (std::size_t i = 0; i < a.size(); ++i) a.values()[i] = std::sin(0.05 * i) + 0.01 * (i % 7);
  CHECK(psnr(a, a) == std::numeric_limits<double>::infinity());
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));

  Image b = a;
  for (double& v : b.values()) v += 0.1;
  CHECK(psnr(b, a, 1.0) == doctest::Approx(20.0).epsilon(1e-12));

  Image c = a;
  for (double& v : c.values()) v = 3.0 - v;
  CHECK(ssim(a, c) < ssim(a, a));

  std::mt19937_64 gen(4);
  std::normal_distribution<double> nd(0.0, 0.2);
  Image noisy = a;
  for (double& v : noisy.values()) v += nd(gen);
  CHECK(ssim(a, noisy) == ssim(noisy, a));
  CHECK(ssim(a, noisy) < 1.0);
  CHECK_THROWS_AS(psnr(a, Image(40, 41)), Error);
  CHECK_THROWS_AS(ssim(a, Image(41, 40)), Error);
}

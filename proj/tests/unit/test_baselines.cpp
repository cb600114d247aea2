#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "n2i/baselines.hpp"
#include "n2i/metrics.hpp"

using namespace n2i;

namespace {

Image noise_image(std::size_t n, double sd, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd(0.0, sd);
  Image img(n, n);
  for (double& v : img.values()) v = nd(gen);
  return img;
}

Image phantom(std::size_t n) {
  Image img(n, n, 0.2);
  const double c = 0.5 * static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (std::hypot(i - c, j - c) < 0.3 * n) img(i, j) = 1.0;
  return img;
}

Image add(const Image& a, const Image& b) {
  Image out = a;
  for (std::size_t i = 0; i < a.size(); ++i) out.values()[i] += b.values()[i];
  return out;
}

}  // namespace

TEST_CASE("gaussian filter") {
  const Image flat(16, 16, 3.5);
  for (double v : gaussian_filter(flat, 2.0).values()) CHECK(v == doctest::Approx(3.5).epsilon(1e-14));

  Image impulse(41, 41);
  impulse(20, 20) = 1.0;
  const Image k = gaussian_filter(impulse, 1.5);
  double sum = 0.0;
  for (double v : k.values()) sum += v;
  CHECK(std::abs(sum - 1.0) < 1e-6);
  CHECK(k(20, 21) == doctest::Approx(k(21, 20)).epsilon(1e-14));

  for (double sigma : {1.5, 3.0}) {
    const Image n = noise_image(512, 1.0, 7);
    const double ratio = variance(gaussian_filter(n, sigma).values()) / variance(n.values());
    CHECK(ratio == doctest::Approx(1.0 / (4.0 * std::numbers::pi * sigma * sigma)).epsilon(0.1));
  }

  const Image p = add(phantom(32), noise_image(32, 0.1, 8));
  Image shifted = p;
  for (double& v : shifted.values()) v += 5.0;
  const Image a = gaussian_filter(p, 1.3), b = gaussian_filter(shifted, 1.3);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(b.values()[i] - 5.0 == doctest::Approx(a.values()[i]).epsilon(1e-12));
}

TEST_CASE("tv denoising") {
  const Image clean = phantom(48);
  const Image noisy = add(clean, noise_image(48, 0.15, 3));

  const TvResult none = tv_denoise(noisy, 1e-9, 50);
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    CHECK(std::abs(none.image.values()[i] - noisy.values()[i]) < 1e-6);
  }
  const TvResult flat = tv_denoise(Image(16, 16, 0.7), 0.5, 50);
  for (double v : flat.image.values()) CHECK(v == doctest::Approx(0.7).epsilon(1e-12));

  const TvResult r = tv_denoise(noisy, 0.1, 300);
  REQUIRE(r.objective.size() == r.iterations);
  for (std::size_t i = 1; i < r.objective.size(); ++i) CHECK(r.objective[i] <= r.objective[i - 1]);
  CHECK(tv_objective(r.image, noisy, 0.1) < tv_objective(noisy, noisy, 0.1));
  CHECK(ssim(r.image, clean) > ssim(noisy, clean));

  Image shifted = noisy;
  for (double& v : shifted.values()) v += 2.0;
  const TvResult s = tv_denoise(shifted, 0.1, 300);
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    CHECK(s.image.values()[i] - 2.0 == doctest::Approx(r.image.values()[i]).epsilon(1e-9));
  }
  CHECK_FALSE(tv_denoise(noisy, 0.1, 2).converged);
}

TEST_CASE("ssim-tuned parameters") {
  std::vector<Image> noisy, clean;
  for (std::uint64_t k = 0; k < 2; ++k) {
    clean.push_back(phantom(48));
    noisy.push_back(add(clean.back(), noise_image(48, 0.2, 20 + k)));
  }
  const std::vector<double> sigmas = {0.25, 1.0, 1.5, 2.0, 8.0};
  const TunedParam g = tune_gaussian(noisy, clean, sigmas);
  CHECK(g.value > 0.25);
  CHECK(g.value < 8.0);
  double best = 0.0;
  for (double s : sigmas) {
    double m = 0.0;
    for (std::size_t i = 0; i < 2; ++i) m += ssim(gaussian_filter(noisy[i], s), clean[i]) / 2.0;
    best = std::max(best, m);
  }
  CHECK(g.mean_ssim == best);
  const TunedParam t = tune_tv(noisy, clean, std::vector<double>{1e-3, 0.1, 10.0}, 100);
  CHECK(t.value == 0.1);
}

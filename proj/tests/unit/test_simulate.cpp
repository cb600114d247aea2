#include <doctest.h>

#include <cmath>

#include "n2i/errors.hpp"
#include "n2i/phase.hpp"
#include "n2i/simulate.hpp"
#include "n2i/transforms.hpp"
#include "oracles.hpp"

using namespace n2i;

namespace {

PhantomSpec ball(double r, std::size_t size) {
  PhantomSpec s;
  s.size = size;
  s.ellipsoids = {{0.0, 0.0, 0.0, r, r, r, 0.0, 1.0}};
  return s;
}

}  // namespace

TEST_CASE("centred ball voxelizes to 1 inside, 0 outside") {
  PhantomSpec s = ball(0.5, 32);
  const Stack vol = make_phantom(s, 1);
  const double c = 15.5;
  for (std::size_t i = 0; i < 32; ++i) {
    for (std::size_t j = 0; j < 32; ++j) {
      const double r = std::hypot(i - c, j - c) / 16.0;
      if (r < 0.45) CHECK(vol(0, i, j) == doctest::Approx(1.0));
      if (r > 0.55) CHECK(vol(0, i, j) == 0.0);
    }
  }
  PhantomSpec empty;
  empty.size = 16;
  const Stack blank = make_phantom(empty, 3);
  for (double v : blank.values()) CHECK(v == 0.0);
}

TEST_CASE("phantoms are deterministic in the seed") {
  const PhantomSpec a = lung_phantom(64, 9), b = lung_phantom(64, 9), c = lung_phantom(64, 10);
  CHECK(make_phantom(a, 4) == make_phantom(b, 4));
  CHECK_FALSE(make_phantom(a, 4) == make_phantom(c, 4));
}

TEST_CASE("out-of-bounds primitives are rejected unless truncation is allowed") {
  PhantomSpec s = ball(0.5, 32);
  s.ellipsoids[0].cx = 0.7;
  CHECK_THROWS_WITH_AS(s.validate(), doctest::Contains("out-of-bounds primitive"), ConfigError);
  s.allow_truncation = true;
  CHECK_NOTHROW(s.validate());
}

TEST_CASE("central ray through a ball has length 2r") {
  const double r = 0.5, pitch = 1e-4;
  const std::size_t n = 65;
  const auto angles = uniform_angles(7);
  const ProjectionStack t = project_thickness(ball(r, n), angles, 1, pitch);
  for (std::size_t p = 0; p < angles.size(); ++p) {
    CHECK(t.data(p, 0, 32) == doctest::Approx(2.0 * r * (n / 2.0) * pitch).epsilon(1e-12));
  }
  PhantomSpec empty;
  empty.size = 16;
  const ProjectionStack none = project_thickness(empty, angles, 2, pitch);
  for (double v : none.data.values()) CHECK(v == 0.0);
}

TEST_CASE("analytic and voxel projections agree on a smooth phantom") {
  PhantomSpec s;
  s.size = 128;
  s.supersample = 4;
  s.ellipsoids = {{0.0, 0.0, 0.0, 0.6, 0.45, 50.0, 0.3, 1.0},
                  {0.15, -0.1, 0.0, 0.2, 0.25, 50.0, 0.0, 0.5}};
  const auto angles = uniform_angles(9);
  const double pitch = 1e-4;
  const ProjectionStack analytic = project_thickness(s, angles, 1, pitch);
  const Sinogram numeric = radon_forward({make_phantom(s, 1).plane(0), pitch}, angles);
  double se = 0.0, ss = 0.0;
  for (std::size_t p = 0; p < angles.size(); ++p) {
    for (std::size_t a = 0; a < s.size; ++a) {
      const double d = numeric.data(p, a) - analytic.data(p, 0, a);
      se += d * d;
      ss += analytic.data(p, 0, a) * analytic.data(p, 0, a);
    }
  }
  CHECK(std::sqrt(se / ss) < 0.01);
}

TEST_CASE("noise model") {
  NoiseParams np;
  CHECK(np.alpha == 100000.0);
  CHECK(np.sigma_g == 5e-4);

  const double c = std::exp(-0.5);
  const Image clean(1000, 1000, c);
  np.sigma_g = 0.0;
  np.seed = {17, 0};
  const Image poisson = apply_noise(clean, np, 0);
  CHECK(variance(poisson.values()) == doctest::Approx(c / np.alpha).epsilon(0.02));

  np.sigma_g = 5e-4;
  const Image mixed = apply_noise(clean, np, 1);
  CHECK(variance(mixed.values()) ==
        doctest::Approx(c / np.alpha + np.sigma_g * np.sigma_g).epsilon(0.05));

  NoiseParams faint = np;
  faint.alpha = np.alpha / 10.0;
  faint.sigma_g = 0.0;
  CHECK(variance(apply_noise(clean, faint, 2).values()) ==
        doctest::Approx(10.0 * variance(poisson.values())).epsilon(0.05));

  NoiseParams none;
  none.alpha = 1e12;
  none.sigma_g = 0.0;
  const Image quiet = apply_noise(Image(20, 20, c), none, 0);
  for (double v : quiet.values()) CHECK(v == doctest::Approx(c).epsilon(1e-4));
}

TEST_CASE("noise is spatially independent") {
  NoiseParams np;
  np.seed = {3, 0};
  const Image clean(1000, 1001, std::exp(-0.3));
  const Image noisy = apply_noise(clean, np, 0);
  std::vector<double> a, b;
  for (std::size_t i = 0; i < noisy.size() - 1; ++i) {
    a.push_back(noisy.values()[i] - clean.values()[i]);
    b.push_back(noisy.values()[i + 1] - clean.values()[i + 1]);
  }
  CHECK(std::abs(correlation(a, b)) < 0.01);
}

TEST_CASE("simulated acquisitions") {
  const PhantomSpec spec = lung_phantom(64, 4, 40);
  PhysicsParams ph;
  NoiseParams np;
  np.seed = {8, 0};
  const auto angles = uniform_angles(24);
  const EdgePadding pad{14, 4};
  const Acquisition a = simulate_acquisition(spec, ph, np, angles, 6, pad);
  const Acquisition b = simulate_acquisition(spec, ph, np, angles, 6, pad);
  CHECK(a.noisy.data == b.noisy.data);
  CHECK(a.clean.data == b.clean.data);

  // Retrieval of the clean stack on the propagation grid recovers the thickness.
  const ProjectionStack extended = project_thickness(spec, angles, 6 + 2 * pad.b, ph.pixel_pitch);
  const ProjectionStack propagated = propagate_stack(extended, ph);
  const ProjectionStack back = retrieve_stack(propagated, ph);
  double worst = 0.0, peak = 0.0;
  for (std::size_t i = 0; i < back.data.size(); ++i) {
    worst = std::max(worst, std::abs(back.data.values()[i] - extended.data.values()[i]));
    peak = std::max(peak, std::abs(extended.data.values()[i]));
  }
  CHECK(worst / peak < 1e-6);

  NoiseParams none;
  none.alpha = 1e12;
  none.sigma_g = 0.0;
  const Acquisition q = simulate_acquisition(spec, ph, none, angles, 6, pad);
  for (std::size_t i = 0; i < q.clean.data.size(); ++i) {
    CHECK(q.noisy.data.values()[i] == doctest::Approx(q.clean.data.values()[i]).epsilon(1e-4));
  }
}

TEST_CASE("exposure sweep scales") {
  const auto s = exposure_alpha_scales();
  REQUIRE(s.size() == 7);
  CHECK(s.front() == 1.0);
  CHECK(s.back() == doctest::Approx(200.0 / 15.0));
}

TEST_CASE("phantom spec parsing") {
  const PhantomSpec s = parse_phantom_spec(R"({
    "size": 48, "seed": 5,
    "ellipsoids": [{"center": [0, 0, 0], "axes": [0.5, 0.4, 50], "rotation_deg": 10, "density": 1}],
    "textures": [{"count": 4, "radius": [0.02, 0.04], "density": 0.3,
                  "host": {"center": [0, 0, 0], "axes": [0.3, 0.3, 50], "rotation_deg": 0, "density": 0}}]
  })");
  CHECK(s.size == 48);
  CHECK(s.ellipsoids.size() == 1);
  CHECK(s.textures.size() == 1);
  CHECK(expand_primitives(s).size() == 5);
  CHECK_THROWS_AS(parse_phantom_spec("{\"size\": 4, \"ellipsoids\": [{]}"), ConfigError);
}

#include <doctest.h>

#include <cmath>
#include <random>

#include "n2i/baselines.hpp"
#include "n2i/errors.hpp"
#include "n2i/phase.hpp"

using namespace n2i;

namespace {

PhysicsParams physics(double z) {
  PhysicsParams p;
  p.z = z;
  return p;
}

// Smooth random thickness: blurred noise plus an offset, in metres.
Image smooth_thickness(std::size_t r, std::size_t c, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  Image img(r, c);
  for (double& v : img.values()) v = nd(gen);
  img = gaussian_filter(img, 3.0);
  for (double& v : img.values()) v = 0.01 + 0.02 * v;
  return img;
}

double total_variation(const Image& u) {
  double tv = 0.0;
  for (std::size_t i = 0; i < u.rows(); ++i) {
    for (std::size_t j = 0; j < u.cols(); ++j) {
      const double gx = j + 1 < u.cols() ? u(i, j + 1) - u(i, j) : 0.0;
      const double gy = i + 1 < u.rows() ? u(i + 1, j) - u(i, j) : 0.0;
      tv += std::hypot(gx, gy);
    }
  }
  return tv;
}

double max_rel(const Image& a, const Image& b) {
  double m = 0.0, s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
    s = std::max(s, std::abs(b.values()[i]));
  }
  return m / s;
}

}  // namespace

TEST_CASE("z = 0 reduces to Beer-Lambert") {
  const Image t = smooth_thickness(16, 24, 1);
  const Image p = phase_propagate_forward(t, physics(0.0));
  for (std::size_t i = 0; i < t.size(); ++i) {
    CHECK(p.values()[i] == doctest::Approx(std::exp(-20.0 * t.values()[i])).epsilon(1e-12));
  }
  const Image back = paganin_retrieve(p, physics(0.0));
  for (std::size_t i = 0; i < t.size(); ++i) {
    CHECK(back.values()[i] == doctest::Approx(-std::log(p.values()[i]) / 20.0).epsilon(1e-12));
  }
}

TEST_CASE("constant intensity retrieves constant thickness") {
  for (double z : {0.0, 0.5, 5.0, 50.0}) {
    const Image p(12, 20, std::exp(-20.0 * 5.0));
    const Image t = paganin_retrieve(p, physics(z), {4, 3});
    for (double v : t.values()) CHECK(v == doctest::Approx(5.0).epsilon(1e-10));
  }
}

TEST_CASE("retrieval inverts propagation both ways") {
  for (double z : {0.0, 0.5, 5.0}) {
    const Image t = smooth_thickness(64, 48, 2);
    CHECK(max_rel(paganin_retrieve(phase_propagate_forward(t, physics(z)), physics(z)), t) < 1e-8);
    const Image p = phase_propagate_forward(t, physics(z));
    CHECK(max_rel(phase_propagate_forward(paganin_retrieve(p, physics(z)), physics(z)), p) < 1e-8);
  }
}

TEST_CASE("edge fringes are bright on the thin side and grow with z") {
  Image t(8, 64, 0.0);
  for (std::size_t i = 0; i < 8; ++i) {
    for (std::size_t j = 32; j < 64; ++j) t(i, j) = 0.01;
  }
  const double base_low = 1.0;
  double prev_over = 0.0, prev_under = 0.0;
  for (double z : {0.5, 2.0, 5.0}) {
    const Image p = phase_propagate_forward(t, physics(z), {16, 0});
    const double over = p(4, 31) - base_low;                    // thin side, next to the edge
    const double under = std::exp(-20.0 * 0.01) - p(4, 32);    // thick side
    CHECK(over > 0.0);
    CHECK(under > 0.0);
    CHECK(over > prev_over);
    CHECK(under > prev_under);
    prev_over = over;
    prev_under = under;
  }
}

TEST_CASE("row_to_band shapes") {
  const Image row(1, 40, 0.3);
  const Image band = row_to_band(row, 50);
  CHECK(band.rows() == 101);
  CHECK(band.cols() == 2040);
  for (double v : band.values()) CHECK(v == 0.3);
  Image r2(2, 5);
  for (std::size_t i = 0; i < r2.size(); ++i) r2.values()[i] = static_cast<double>(i);
  CHECK(row_to_band(r2, 0, 0) == r2);
  CHECK(band_to_rows(row_to_band(r2, 3, 7), 2, 3, 7) == r2);
}

TEST_CASE("retrieval is low-pass and monotone in z") {
  std::mt19937_64 gen(4);
  std::normal_distribution<double> nd(0.0, 0.02);
  Image p(64, 64);
  for (double& v : p.values()) v = std::exp(-0.2) * (1.0 + nd(gen));
  Image beer = p;
  for (double& v : beer.values()) v = -std::log(v) / 20.0;
  const double tv0 = total_variation(beer);
  double prev_var = variance(beer.values());
  for (double z : {0.5, 2.0, 5.0, 20.0}) {
    const Image t = paganin_retrieve(p, physics(z));
    CHECK(total_variation(t) <= tv0);
    const double v = variance(t.values());
    CHECK(v <= prev_var);
    prev_var = v;
  }
}

TEST_CASE("retrieval is consistent across grid refinement") {
  // Same physical intensity sampled at pitch h and h/2 over the same extent.
  const double h = 1e-4;
  auto sample = [](std::size_t n, double pitch) {
    Image p(n, n);
    const double c = 0.5 * static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double x = (static_cast<double>(j) - c) * pitch, y = (static_cast<double>(i) - c) * pitch;
        const double t = 0.01 * std::exp(-(x * x + y * y) / (2.0 * 1.2e-3 * 1.2e-3));
        p(i, j) = std::exp(-20.0 * t);
      }
    }
    return p;
  };
  PhysicsParams coarse = physics(5.0), fine = physics(5.0);
  fine.pixel_pitch = h / 2.0;
  coarse.pixel_pitch = h;
  const Image tc = paganin_retrieve(sample(64, h), coarse);
  const Image tf = paganin_retrieve(sample(128, h / 2.0), fine);
  // Coarse centre (31.5) lies between fine samples 63 and 64; compare centre profiles.
  double worst = 0.0, peak = 0.0;
  for (std::size_t j = 0; j < 64; ++j) {
    const double f = 0.25 * (tf(63, 2 * j) + tf(63, 2 * j + 1) + tf(64, 2 * j) + tf(64, 2 * j + 1));
    const double c = 0.5 * (tc(31, j) + tc(32, j));
    worst = std::max(worst, std::abs(f - c));
    peak = std::max(peak, std::abs(c));
  }
  CHECK(worst / peak < 0.01);
}

TEST_CASE("propagation vjp matches finite differences") {
  const Image t = smooth_thickness(16, 20, 5);
  std::mt19937_64 gen(6);
  std::normal_distribution<double> nd;
  Image w(16, 20), v(16, 20);
  for (double& x : w.values()) x = nd(gen);
  for (double& x : v.values()) x = 1e-3 * nd(gen);
  const EdgePadding pad{3, 2};
  const Image g = phase_propagate_forward_vjp(t, w, physics(5.0), pad);
  const double eps = 1e-4;
  Image tp = t, tm = t;
  for (std::size_t i = 0; i < t.size(); ++i) {
    tp.values()[i] += eps * v.values()[i];
    tm.values()[i] -= eps * v.values()[i];
  }
  const Image pp = phase_propagate_forward(tp, physics(5.0), pad);
  const Image pm = phase_propagate_forward(tm, physics(5.0), pad);
  double fd = 0.0, an = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    fd += w.values()[i] * (pp.values()[i] - pm.values()[i]) / (2.0 * eps);
    an += g.values()[i] * v.values()[i];
  }
  CHECK(std::abs(fd - an) <= 1e-6 * std::abs(an));
}

TEST_CASE("non-positive intensity is a numeric error") {
  Image p(4, 4, 0.5);
  p(1, 2) = 0.0;
  CHECK_THROWS_AS(paganin_retrieve(p, physics(5.0)), NumericError);
}

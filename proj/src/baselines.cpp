#include "n2i/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "n2i/errors.hpp"
#include "n2i/metrics.hpp"
#include "n2i/parallel.hpp"

namespace n2i {

Image gaussian_filter(const Image& image, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("gaussian_filter: sigma must be > 0");
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(4.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
    const double x = static_cast<double>(i);
    k[static_cast<std::size_t>(i + radius)] = std::exp(-x * x / (2.0 * sigma * sigma));
    sum += k[static_cast<std::size_t>(i + radius)];
  }
  for (double& v : k) v /= sum;

  const auto rows = static_cast<std::ptrdiff_t>(image.rows());
  const auto cols = static_cast<std::ptrdiff_t>(image.cols());
  auto clamp = [](std::ptrdiff_t i, std::ptrdiff_t n) { return std::clamp<std::ptrdiff_t>(i, 0, n - 1); };
  Image tmp(image.rows(), image.cols());
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    for (std::ptrdiff_t j = 0; j < cols; ++j) {
      double s = 0.0;
      for (std::ptrdiff_t t = -radius; t <= radius; ++t) {
        s += k[static_cast<std::size_t>(t + radius)] *
             image(static_cast<std::size_t>(i), static_cast<std::size_t>(clamp(j + t, cols)));
      }
      tmp(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = s;
    }
  }
  Image out(image.rows(), image.cols());
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    for (std::ptrdiff_t j = 0; j < cols; ++j) {
      double s = 0.0;
      for (std::ptrdiff_t t = -radius; t <= radius; ++t) {
        s += k[static_cast<std::size_t>(t + radius)] *
             tmp(static_cast<std::size_t>(clamp(i + t, rows)), static_cast<std::size_t>(j));
      }
      out(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = s;
    }
  }
  return out;
}

namespace {

struct Field {
  Image x, y;
};

Field gradient(const Image& u) {
  const std::size_t r = u.rows(), c = u.cols();
  Field g{Image(r, c), Image(r, c)};
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      if (j + 1 < c) g.x(i, j) = u(i, j + 1) - u(i, j);
      if (i + 1 < r) g.y(i, j) = u(i + 1, j) - u(i, j);
    }
  }
  return g;
}

// Negative adjoint of gradient().
Image divergence(const Field& p) {
  const std::size_t r = p.x.rows(), c = p.x.cols();
  Image d(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      double v = 0.0;
      if (j + 1 < c) v += p.x(i, j);
      if (j > 0) v -= p.x(i, j - 1);
      if (i + 1 < r) v += p.y(i, j);
      if (i > 0) v -= p.y(i - 1, j);
      d(i, j) = v;
    }
  }
  return d;
}

}  // namespace

double tv_objective(const Image& u, const Image& f, double weight) {
  if (!u.same_shape(f)) throw Error("tv_objective: shape mismatch");
  const Field g = gradient(u);
  double fid = 0.0, tv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double d = u.values()[i] - f.values()[i];
    fid += d * d;
    tv += std::hypot(g.x.values()[i], g.y.values()[i]);
  }
  return 0.5 * fid + weight * tv;
}

TvResult tv_denoise(const Image& image, double weight, std::size_t iters, double tol) {
  if (!(weight > 0.0)) throw ConfigError("tv_denoise: weight must be > 0");
  if (iters < 1) throw ConfigError("tv_denoise: iters must be >= 1");
  constexpr double tau = 0.125;
  const std::size_t r = image.rows(), c = image.cols();
  Field p{Image(r, c), Image(r, c)};
  TvResult res;
  res.image = image;
  double best = tv_objective(image, image, weight);
  Image prev = image;
  // Change is measured against the spread of the input so adding a constant to the
  // image changes nothing.
  const double m = mean(image.values());
  double spread = 0.0;
  for (double v : image.values()) spread += (v - m) * (v - m);
  for (std::size_t it = 0; it < iters; ++it) {
    Image w = divergence(p);
    for (std::size_t i = 0; i < w.size(); ++i) w.values()[i] -= image.values()[i] / weight;
    const Field g = gradient(w);
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gx = g.x.values()[i], gy = g.y.values()[i];
      const double den = 1.0 + tau * std::hypot(gx, gy);
      p.x.values()[i] = (p.x.values()[i] + tau * gx) / den;
      p.y.values()[i] = (p.y.values()[i] + tau * gy) / den;
    }
    const Image d = divergence(p);
    Image u(r, c);
    double change = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      u.values()[i] = image.values()[i] - weight * d.values()[i];
      const double du = u.values()[i] - prev.values()[i];
      change += du * du;
    }
    const double obj = tv_objective(u, image, weight);
    if (obj <= best) {
      best = obj;
      res.image = u;
    }
    res.objective.push_back(best);
    res.iterations = it + 1;
    prev = std::move(u);
    const double rel = spread > 0.0 ? std::sqrt(change / spread) : std::sqrt(change);
    res.converged = rel <= tol;
    if (res.converged) break;
  }
  return res;
}

namespace {

template <class Filter>
TunedParam tune(std::span<const Image> noisy, std::span<const Image> reference,
                std::span<const double> grid, Filter filter) {
  if (noisy.size() != reference.size() || noisy.empty()) {
    throw ConfigError("tuning needs matching, non-empty noisy and reference sets");
  }
  if (grid.empty()) throw ConfigError("tuning grid is empty");
  TunedParam best{grid[0], -std::numeric_limits<double>::infinity()};
  for (double v : grid) {
    std::vector<double> scores(noisy.size());
    parallel_for(noisy.size(), [&](std::size_t i) {
      scores[i] = ssim(filter(noisy[i], v), reference[i]);
    });
    const double m = mean(scores);
    if (m > best.mean_ssim) best = {v, m};
  }
  return best;
}

}  // namespace

TunedParam tune_gaussian(std::span<const Image> noisy, std::span<const Image> reference,
                         std::span<const double> sigmas) {
  return tune(noisy, reference, sigmas,
              [](const Image& img, double s) { return gaussian_filter(img, s); });
}

TunedParam tune_tv(std::span<const Image> noisy, std::span<const Image> reference,
                   std::span<const double> weights, std::size_t iters) {
  return tune(noisy, reference, weights, [iters](const Image& img, double w) {
    return tv_denoise(img, w, iters).image;
  });
}

}  // namespace n2i

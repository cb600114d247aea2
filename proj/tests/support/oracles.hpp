#pragma once

// Independent analytic references used by the unit and acceptance tests.

#include <cmath>
#include <numbers>
#include <vector>

#include "n2i/array.hpp"
#include "n2i/types.hpp"

namespace oracle {

/// Isotropic Gaussian density blob; positions and width in pixels relative to the
/// grid centre (x = column, y = row, z = detector row).
struct Blob {
  double x, y, z, sigma, rho;
};

/// Widths and offsets scale with `scale` (1 suits a 64-128 pixel grid).
inline std::vector<Blob> smooth_blobs(double scale = 1.0) {
  std::vector<Blob> b = {{0.0, 0.0, 0.0, 18.0, 0.8},
                         {-14.0, 10.0, 1.0, 10.0, 0.6},
                         {12.0, -11.0, -2.0, 9.0, 0.5},
                         {5.0, 16.0, 3.0, 9.0, -0.3}};
  for (Blob& g : b) {
    g.x *= scale;
    g.y *= scale;
    g.sigma *= scale;
  }
  return b;
}

/// Exact line integrals (metres of unit density) of the blobs in parallel-beam geometry.
inline n2i::ProjectionStack blob_thickness(std::size_t n_a, std::size_t n_b,
                                           const std::vector<double>& angles, double pitch,
                                           const std::vector<Blob>& blobs) {
  n2i::ProjectionStack st{n2i::Stack(angles.size(), n_b, n_a), angles, pitch, 0.0};
  const double ca = 0.5 * static_cast<double>(n_a - 1);
  const double cb = 0.5 * static_cast<double>(n_b - 1);
  for (std::size_t p = 0; p < angles.size(); ++p) {
    const double c = std::cos(angles[p]), s = std::sin(angles[p]);
    for (std::size_t b = 0; b < n_b; ++b) {
      for (std::size_t a = 0; a < n_a; ++a) {
        double t = 0.0;
        for (const Blob& g : blobs) {
          const double ds = (static_cast<double>(a) - ca) - (g.x * c + g.y * s);
          const double dz = (static_cast<double>(b) - cb) - g.z;
          t += g.rho * g.sigma * pitch * std::sqrt(2.0 * std::numbers::pi) *
               std::exp(-(ds * ds + dz * dz) / (2.0 * g.sigma * g.sigma));
        }
        st.data(p, b, a) = t;
      }
    }
  }
  return st;
}

/// Density of the blobs sampled on an n x n slice at detector row offset z.
inline n2i::Image blob_slice(std::size_t n, double z, const std::vector<Blob>& blobs) {
  n2i::Image img(n, n);
  const double c = 0.5 * static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double v = 0.0;
      for (const Blob& g : blobs) {
        const double dx = static_cast<double>(j) - c - g.x;
        const double dy = static_cast<double>(i) - c - g.y;
        const double dz = z - g.z;
        v += g.rho * std::exp(-(dx * dx + dy * dy + dz * dz) / (2.0 * g.sigma * g.sigma));
      }
      img(i, j) = v;
    }
  }
  return img;
}

/// Chord lengths through a centred disk of radius r (pixels), in metres.
inline n2i::Sinogram disk_sinogram(std::size_t n_a, const std::vector<double>& angles,
                                   double radius_px, double pitch) {
  n2i::Sinogram s{n2i::Image(angles.size(), n_a), angles, pitch};
  const double c = 0.5 * static_cast<double>(n_a - 1);
  for (std::size_t p = 0; p < angles.size(); ++p) {
    for (std::size_t a = 0; a < n_a; ++a) {
      const double d = static_cast<double>(a) - c;
      s.data(p, a) = d * d < radius_px * radius_px
                         ? 2.0 * std::sqrt(radius_px * radius_px - d * d) * pitch
                         : 0.0;
    }
  }
  return s;
}

}  // namespace oracle

#include "n2i/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "n2i/errors.hpp"
#include "n2i/fft.hpp"
#include "n2i/pad.hpp"
#include "n2i/parallel.hpp"

namespace n2i {
namespace {

// Detector coordinate (fractional bin index) of pixel (i, j) is base + j * cos.
// A unit pixel square casts a trapezoidal shadow on the detector: the convolution of
// boxes of width |cos| and |sin|. Bin weights are its integrals over each bin.
struct RayGeometry {
  double cos_phi;
  double sin_phi;
  double pixel_center;
  double detector_center;
  double half_outer;  // (|cos| + |sin|) / 2
  double half_inner;  // ||cos| - |sin|| / 2
  double box_width;   // > 0 when the shadow is a single box
  double inv_area;

  double base(std::size_t i) const {
    return (static_cast<double>(i) - pixel_center) * sin_phi + detector_center -
           pixel_center * cos_phi;
  }

  static double ramp2(double x) { return x > 0.0 ? 0.5 * x * x : 0.0; }

  // Fraction of the shadow left of offset t from its centre.
  double cdf(double t) const {
    if (box_width > 0.0) return std::clamp(t / box_width + 0.5, 0.0, 1.0);
    if (t <= -half_outer) return 0.0;
    if (t >= half_outer) return 1.0;
    return (ramp2(t + half_outer) - ramp2(t + half_inner) - ramp2(t - half_inner) +
            ramp2(t - half_outer)) *
           inv_area;
  }

  // Calls fn(bin, weight) for every detector bin the pixel centred at t overlaps.
  template <class Fn>
  void weights(double t, std::ptrdiff_t det_max, Fn&& fn) const {
    auto k = static_cast<std::ptrdiff_t>(std::floor(t - half_outer + 0.5));
    const auto k1 = static_cast<std::ptrdiff_t>(std::floor(t + half_outer + 0.5));
    double prev = cdf(static_cast<double>(k) - 0.5 - t);
    for (; k <= k1; ++k) {
      const double cur = cdf(static_cast<double>(k) + 0.5 - t);
      if (k >= 0 && k < det_max) fn(static_cast<std::size_t>(k), cur - prev);
      prev = cur;
    }
  }
};

RayGeometry geometry(double angle, std::size_t n, std::size_t n_det) {
  RayGeometry g{};
  g.cos_phi = std::cos(angle);
  g.sin_phi = std::sin(angle);
  g.pixel_center = (static_cast<double>(n) - 1.0) / 2.0;
  g.detector_center = (static_cast<double>(n_det) - 1.0) / 2.0;
  const double a = std::max(std::abs(g.cos_phi), std::abs(g.sin_phi));
  const double b = std::min(std::abs(g.cos_phi), std::abs(g.sin_phi));
  g.half_outer = 0.5 * (a + b);
  g.half_inner = 0.5 * (a - b);
  // Below this the trapezoid formula loses precision; the shadow is a box to ~1e-6.
  g.box_width = b < 1e-6 ? a : 0.0;
  g.inv_area = b < 1e-6 ? 0.0 : 1.0 / (a * b);
  return g;
}

}  // namespace

Sinogram pad_sinogram_symmetric(const Sinogram& sino) {
  if (sino.n_a() < 2) throw Error("pad_sinogram_symmetric: width must be >= 2");
  const std::size_t left = symmetric_pad_left(sino.n_a());
  const std::size_t right = sino.n_a() - left;
  return {pad_replicate(sino.data, left, right, 0, 0), sino.angles, sino.pixel_pitch};
}

Sinogram radon_forward(const ReconSlice& slice, std::span<const double> angles,
                       std::size_t n_det) {
  if (angles.empty()) throw Error("radon_forward: empty angle list");
  const std::size_t n = slice.data.rows();
  if (n == 0 || slice.data.cols() != n) throw Error("radon_forward: slice must be square");
  if (n_det == 0) n_det = n;
  Sinogram out{Image(angles.size(), n_det), {angles.begin(), angles.end()},
               slice.pixel_pitch};
  const double pitch = slice.pixel_pitch;
  const auto det_max = static_cast<std::ptrdiff_t>(n_det);
  parallel_for(angles.size(), [&](std::size_t p) {
    const RayGeometry g = geometry(angles[p], n, n_det);
    auto row = out.data.row(p);
    for (std::size_t i = 0; i < n; ++i) {
      const double base = g.base(i);
      const double* src = slice.data.row(i).data();
      for (std::size_t j = 0; j < n; ++j) {
        if (src[j] == 0.0) continue;
        const double v = src[j] * pitch;
        g.weights(base + static_cast<double>(j) * g.cos_phi, det_max,
                  [&](std::size_t k, double w) { row[k] += v * w; });
      }
    }
  });
  return out;
}

ReconSlice backproject(const Sinogram& sino, std::size_t n) {
  if (sino.angles.size() != sino.n_phi()) throw Error("backproject: angle count mismatch");
  const std::size_t n_det = sino.n_a();
  const auto det_max = static_cast<std::ptrdiff_t>(n_det);
  ReconSlice out{Image(n, n), sino.pixel_pitch};
  std::vector<RayGeometry> geo;
  geo.reserve(sino.n_phi());
  for (double a : sino.angles) geo.push_back(geometry(a, n, n_det));
  const double pitch = sino.pixel_pitch;
  parallel_for(n, [&](std::size_t i) {
    auto dst = out.data.row(i);
    for (std::size_t p = 0; p < geo.size(); ++p) {
      const RayGeometry& g = geo[p];
      const double base = g.base(i);
      const double* src = sino.data.row(p).data();
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        g.weights(base + static_cast<double>(j) * g.cos_phi, det_max,
                  [&](std::size_t k, double w) { acc += src[k] * w; });
        dst[j] += acc * pitch;
      }
    }
  });
  return out;
}

std::size_t ramp_fft_length(std::size_t width) { return next_power_of_two(8 * width); }

Image ramp_filter(const Image& rows, double pixel_pitch, std::size_t fft_len) {
  const std::size_t w = rows.cols();
  if (fft_len < w) throw Error("ramp_filter: fft length shorter than row");
  std::vector<double> kernel(fft_len / 2 + 1);
  for (std::size_t k = 0; k < kernel.size(); ++k) {
    kernel[k] = std::abs(fft_frequency(k, fft_len, pixel_pitch));
  }
  Image work = embed(rows, 0, 0, rows.rows(), fft_len);
  filter_rows(work, kernel);
  return crop(work, 0, 0, rows.rows(), w);
}

ReconSlice fbp_reconstruct(const Sinogram& sino, const FbpConfig& cfg) {
  if (sino.n_phi() < 1) throw Error("fbp_reconstruct: need at least one angle");
  if (sino.n_a() < 2) throw Error("fbp_reconstruct: width must be >= 2");
  if (sino.angles.size() != sino.n_phi()) throw Error("fbp_reconstruct: angle count mismatch");
  const std::size_t n = sino.n_a();
  const Sinogram padded =
      cfg.pad_mode == SinogramPadding::symmetric_replicate_2x ? pad_sinogram_symmetric(sino)
                                                               : sino;
  Sinogram filtered{ramp_filter(padded.data, sino.pixel_pitch,
                                ramp_fft_length(padded.n_a())),
                    sino.angles, sino.pixel_pitch};
  ReconSlice out = backproject(filtered, n);
  // backproject carries one factor of pitch from the line-integral weights.
  const double scale =
      std::numbers::pi / (static_cast<double>(sino.n_phi()) * sino.pixel_pitch);
  for (double& v : out.data.values()) v *= scale;
  return out;
}

Sinogram fbp_adjoint(const ReconSlice& grad, std::span<const double> angles,
                     const FbpConfig& cfg) {
  const std::size_t n = grad.n();
  const bool padded = cfg.pad_mode == SinogramPadding::symmetric_replicate_2x;
  const std::size_t width = padded ? 2 * n : n;
  Sinogram projected = radon_forward(grad, angles, width);
  projected.data = ramp_filter(projected.data, grad.pixel_pitch, ramp_fft_length(width));
  const double scale =
      std::numbers::pi / (static_cast<double>(angles.size()) * grad.pixel_pitch);
  for (double& v : projected.data.values()) v *= scale;
  if (padded) {
    const std::size_t left = symmetric_pad_left(n);
    projected.data = pad_replicate_adjoint(projected.data, left, n - left, 0, 0);
  }
  return projected;
}

Sinogram angular_subset(const Sinogram& sino, std::size_t stride, std::size_t offset) {
  if (stride == 0) throw Error("angular_subset: stride must be positive");
  if (offset >= stride) throw Error("angular_subset: offset must be < stride");
  std::vector<std::size_t> keep;
  for (std::size_t p = offset; p < sino.n_phi(); p += stride) keep.push_back(p);
  Sinogram out{Image(keep.size(), sino.n_a()), {}, sino.pixel_pitch};
  for (std::size_t i = 0; i < keep.size(); ++i) {
    auto src = sino.data.row(keep[i]);
    std::copy(src.begin(), src.end(), out.data.row(i).begin());
    out.angles.push_back(sino.angles[keep[i]]);
  }
  return out;
}

ProjectionStack angular_subset(const ProjectionStack& stack, std::size_t stride,
                               std::size_t offset) {
  if (stride == 0) throw Error("angular_subset: stride must be positive");
  if (offset >= stride) throw Error("angular_subset: offset must be < stride");
  std::vector<std::size_t> keep;
  for (std::size_t p = offset; p < stack.n_phi(); p += stride) keep.push_back(p);
  ProjectionStack out{Stack(keep.size(), stack.n_b(), stack.n_a()), {}, stack.pixel_pitch,
                      stack.row_pitch};
  for (std::size_t i = 0; i < keep.size(); ++i) {
    out.data.set_plane(i, stack.data.plane(keep[i]));
    out.angles.push_back(stack.angles[keep[i]]);
  }
  return out;
}

Sinogram extract_sinogram(const ProjectionStack& thickness, std::size_t row) {
  if (row >= thickness.n_b()) throw Error("extract_sinogram: row out of range");
  return {thickness.data.middle_slice(row), thickness.angles, thickness.pixel_pitch};
}

std::vector<double> uniform_angles(std::size_t n_phi) {
  std::vector<double> a(n_phi);
  for (std::size_t i = 0; i < n_phi; ++i) {
    a[i] = std::numbers::pi * static_cast<double>(i) / static_cast<double>(n_phi);
  }
  return a;
}

}  // namespace n2i

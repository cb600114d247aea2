#pragma once

#include <cstddef>
#include <limits>

#include "n2i/array.hpp"

namespace n2i {

/// Axis-aligned pixel rectangle.
struct Rect {
  std::size_t row = 0, col = 0, rows = 0, cols = 0;
  std::size_t area() const { return rows * cols; }
  bool overlaps(const Rect& o) const;
};

struct RoiPair {
  Rect tissue;  // homogeneous soft tissue
  Rect air;
  void validate(std::size_t image_rows, std::size_t image_cols) const;
};

/// Rectangle crossed by one straight edge. The normal is a unit vector (x = column,
/// y = row) perpendicular to the edge; profiles run along it.
struct EdgeRoi {
  Rect rect;
  double normal_x = 1.0;
  double normal_y = 0.0;
  std::size_t n_profiles = 16;
};

/// (mean tissue - mean air) / std tissue. Throws on a zero-variance tissue ROI.
double cnr(const Image& slice, const RoiPair& pair);

/// Fitted A * erf((x - x0) / (sqrt(2) sigma)) + B of the aligned edge profiles.
struct EdgeFit {
  double amplitude = 0.0;
  double offset = 0.0;
  double x0 = 0.0;
  double sigma = 0.0;
  double r_squared = 0.0;
  double fwhm() const;
};

/// Fits each profile strip for its edge position, shifts every sample by it and fits
/// one error function to the pooled samples. Throws NumericError when the fit does not
/// converge and Error when the profile is not a monotone edge.
EdgeFit fit_edge(const Image& slice, const EdgeRoi& roi);
/// FWHM in pixels of the fitted edge spread.
double edge_resolution(const Image& slice, const EdgeRoi& roi);

/// Q = CNR / SR.
double quality_index(double cnr_value, double fwhm);

/// 10 log10(range^2 / MSE). range defaults to max - min of the reference; identical
/// images give +infinity.
double psnr(const Image& test, const Image& reference, double data_range = 0.0);

/// Mean SSIM over the valid region of an 11-tap Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03. range defaults to the combined max - min of both images.
double ssim(const Image& a, const Image& b, double data_range = 0.0);

}  // namespace n2i

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "n2i/array.hpp"

namespace n2i {

/// Separable Gaussian blur, replicate boundary, kernel truncated at 4 sigma.
Image gaussian_filter(const Image& image, double sigma);

struct TvResult {
  Image image;
  bool converged = false;  // last change <= tol relative to the input's spread about its mean
  std::size_t iterations = 0;
  std::vector<double> objective;  // per iteration, of the returned iterate sequence
};

/// Isotropic TV denoising, min_u |u - f|^2 / 2 + weight * TV(u), by Chambolle's dual
/// projection iterations (tau = 1/8). The objective sequence is kept non-increasing
/// by only accepting iterates that lower it.
TvResult tv_denoise(const Image& image, double weight, std::size_t iters, double tol = 1e-4);

/// |u - f|^2 / 2 + weight * TV(u) with forward differences and Neumann boundary.
double tv_objective(const Image& u, const Image& f, double weight);

/// Grid search maximizing mean SSIM of the filtered inputs against the references.
struct TunedParam {
  double value = 0.0;
  double mean_ssim = 0.0;
};
TunedParam tune_gaussian(std::span<const Image> noisy, std::span<const Image> reference,
                         std::span<const double> sigmas);
TunedParam tune_tv(std::span<const Image> noisy, std::span<const Image> reference,
                   std::span<const double> weights, std::size_t iters);

}  // namespace n2i

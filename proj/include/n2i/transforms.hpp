#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "n2i/types.hpp"

namespace n2i {

enum class SinogramPadding { none, symmetric_replicate_2x };

/// Parallel-beam FBP settings. The filter is the pure |q| ramp and detector
/// interpolation is linear; only the padding is selectable.
struct FbpConfig {
  SinogramPadding pad_mode = SinogramPadding::symmetric_replicate_2x;
};

/// Doubles the detector width: floor(n_a/2) copies of column 0 on the left, the rest
/// copies of the last column on the right.
Sinogram pad_sinogram_symmetric(const Sinogram& sino);
/// Left padding used by pad_sinogram_symmetric for width n_a.
inline std::size_t symmetric_pad_left(std::size_t n_a) { return n_a / 2; }

/// Line integrals of a square slice along parallel rays, averaged over each detector
/// bin: every pixel square is spread over the bins its shadow covers. This is the
/// exact transpose of backproject(). The detector has
/// n_det bins (default: slice width) on the slice's pixel grid, centred on the slice.
Sinogram radon_forward(const ReconSlice& slice, std::span<const double> angles,
                       std::size_t n_det = 0);

/// Unfiltered backprojection onto an n x n grid, the exact adjoint of radon_forward.
ReconSlice backproject(const Sinogram& sino, std::size_t n);

/// |q| filtering of each row with zero padding to fft_len (>= width). With
/// fft_len == width the filtering is circular.
Image ramp_filter(const Image& rows, double pixel_pitch, std::size_t fft_len);
/// FFT length used by fbp_reconstruct for a (padded) width: the sampled ramp has no
/// DC weight, which biases reconstructions low by roughly 1/length, so this is long.
std::size_t ramp_fft_length(std::size_t width);

/// Filtered backprojection onto an n_a x n_a slice, normalized so that a unit-density
/// disk reconstructs to 1. With padding, the result equals reconstructing the padded
/// sinogram and cropping to the original extent.
ReconSlice fbp_reconstruct(const Sinogram& sino, const FbpConfig& cfg = {});

/// Adjoint of fbp_reconstruct viewed as a linear map from sinogram values to slice values.
Sinogram fbp_adjoint(const ReconSlice& grad, std::span<const double> angles,
                     const FbpConfig& cfg = {});

/// Keeps angles whose index is congruent to offset modulo stride.
Sinogram angular_subset(const Sinogram& sino, std::size_t stride, std::size_t offset);
ProjectionStack angular_subset(const ProjectionStack& stack, std::size_t stride,
                               std::size_t offset);

/// Sinogram (phi x a) of detector row b.
Sinogram extract_sinogram(const ProjectionStack& thickness, std::size_t row);

/// Evenly spaced angles over [0, pi).
std::vector<double> uniform_angles(std::size_t n_phi);

}  // namespace n2i

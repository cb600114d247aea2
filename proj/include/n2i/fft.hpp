#pragma once

#include <cstddef>
#include <span>

#include "n2i/array.hpp"

namespace n2i {

/// Signed DFT frequency of bin k for length n with sample spacing d (cycles per unit).
double fft_frequency(std::size_t k, std::size_t n, double spacing);

std::size_t next_power_of_two(std::size_t n);

/// Circular filtering of each row: out = IFFT(FFT(row) * kernel), where the kernel is
/// real and given on the n_cols/2+1 non-negative frequency bins.
void filter_rows(Image& rows, std::span<const double> half_kernel);

/// Circular 2D filtering with a real kernel of shape rows x (cols/2+1).
void filter_2d(Image& img, const Image& half_kernel);

}  // namespace n2i

#pragma once

#include <cstddef>

#include "n2i/array.hpp"
#include "n2i/types.hpp"

namespace n2i {

/// Single-material Fourier kernel 1 / (1 + z*delta/mu * (u^2 + v^2)) on the r2c half
/// spectrum of a rows x cols grid, u and v in cycles per metre from the pixel pitches.
struct PaganinFilter {
  Image half_kernel;  // rows x (cols/2 + 1)
  PhysicsParams params;

  static PaganinFilter build(std::size_t rows, std::size_t cols, const PhysicsParams& params);
  /// Value at signed frequency bin (k_row, k_col) of the full spectrum.
  double at(std::size_t k_row, std::size_t k_col) const;
  std::size_t rows() const { return half_kernel.rows(); }
  std::size_t cols() const { return cols_; }

 private:
  std::size_t cols_ = 0;
};

/// Thickness t = -log(IFFT(FFT(p) * kernel)) / mu. Replicate padding is applied before
/// the FFT and cropped afterwards.
Image paganin_retrieve(const Image& projection, const PhysicsParams& params,
                       EdgePadding pad = {});

/// Exact Fourier inverse of paganin_retrieve on the same grid:
/// p = IFFT(FFT(exp(-mu t)) * (1 + z*delta/mu * (u^2 + v^2))).
Image phase_propagate_forward(const Image& thickness, const PhysicsParams& params,
                              EdgePadding pad = {});

/// Vector-Jacobian product of phase_propagate_forward at `thickness`.
Image phase_propagate_forward_vjp(const Image& thickness, const Image& grad_output,
                                  const PhysicsParams& params, EdgePadding pad = {});

/// Replicates a thin strip of rows into a band with pad_b extra rows on each side and
/// pad_a replicated columns on each side.
Image row_to_band(const Image& rows, std::size_t pad_b, std::size_t pad_a = 1000);
/// Inverse of row_to_band: the original rows from the centre of the band.
Image band_to_rows(const Image& band, std::size_t n_rows, std::size_t pad_b, std::size_t pad_a);

/// Per-projection retrieval / propagation over a whole stack (parallel over angles).
/// The stack's own pixel and row pitch override those in `params`.
ProjectionStack retrieve_stack(const ProjectionStack& intensities, const PhysicsParams& params,
                               EdgePadding pad = {});
ProjectionStack propagate_stack(const ProjectionStack& thickness, const PhysicsParams& params,
                                EdgePadding pad = {});

}  // namespace n2i

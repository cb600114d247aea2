#include "n2i/phase.hpp"

#include <cmath>

#include "n2i/errors.hpp"
#include "n2i/fft.hpp"
#include "n2i/pad.hpp"
#include "n2i/parallel.hpp"

namespace n2i {
namespace {

enum class KernelKind { retrieve, propagate };

Image kernel_for(std::size_t rows, std::size_t cols, const PhysicsParams& params,
                 KernelKind kind) {
  params.validate();
  const double c = params.kernel_scale();
  const std::size_t half = cols / 2 + 1;
  Image k(rows, half);
  for (std::size_t r = 0; r < rows; ++r) {
    const double v = fft_frequency(r, rows, params.effective_row_pitch());
    for (std::size_t q = 0; q < half; ++q) {
      const double u = fft_frequency(q, cols, params.pixel_pitch);
      const double arg = 1.0 + c * (u * u + v * v);
      if (!std::isfinite(arg)) throw NumericError("Paganin kernel argument overflow");
      k(r, q) = kind == KernelKind::retrieve ? 1.0 / arg : arg;
    }
  }
  return k;
}

Image filter_padded(const Image& img, const PhysicsParams& params, EdgePadding pad,
                    KernelKind kind) {
  Image work = pad_replicate(img, pad.a, pad.a, pad.b, pad.b);
  filter_2d(work, kernel_for(work.rows(), work.cols(), params, kind));
  return crop(work, pad.b, pad.a, img.rows(), img.cols());
}

}  // namespace

PaganinFilter PaganinFilter::build(std::size_t rows, std::size_t cols,
                                   const PhysicsParams& params) {
  PaganinFilter f;
  f.half_kernel = kernel_for(rows, cols, params, KernelKind::retrieve);
  f.params = params;
  f.cols_ = cols;
  return f;
}

double PaganinFilter::at(std::size_t k_row, std::size_t k_col) const {
  // Real, even kernel: negative column frequencies mirror the stored half.
  const std::size_t q = k_col <= cols_ / 2 ? k_col : cols_ - k_col;
  return half_kernel(k_row, q);
}

Image paganin_retrieve(const Image& projection, const PhysicsParams& params, EdgePadding pad) {
  for (double v : projection.values()) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw NumericError("paganin_retrieve: intensities must be finite and positive");
    }
  }
  Image filtered = filter_padded(projection, params, pad, KernelKind::retrieve);
  for (double& v : filtered.values()) {
    if (!(v > 0.0)) throw NumericError("paganin_retrieve: filtered intensity not positive");
    v = -std::log(v) / params.mu;
  }
  return filtered;
}

Image phase_propagate_forward(const Image& thickness, const PhysicsParams& params,
                              EdgePadding pad) {
  Image att(thickness.rows(), thickness.cols());
  for (std::size_t i = 0; i < att.size(); ++i) {
    att.values()[i] = std::exp(-params.mu * thickness.values()[i]);
  }
  return filter_padded(att, params, pad, KernelKind::propagate);
}

Image phase_propagate_forward_vjp(const Image& thickness, const Image& grad_output,
                                  const PhysicsParams& params, EdgePadding pad) {
  if (!thickness.same_shape(grad_output)) {
    throw Error("phase_propagate_forward_vjp: shape mismatch");
  }
  const std::size_t rows = thickness.rows() + 2 * pad.b;
  const std::size_t cols = thickness.cols() + 2 * pad.a;
  Image work = embed(grad_output, pad.b, pad.a, rows, cols);
  // The propagation kernel is real and even, so the filter is self-adjoint.
  filter_2d(work, kernel_for(rows, cols, params, KernelKind::propagate));
  const Image t_pad = pad_replicate(thickness, pad.a, pad.a, pad.b, pad.b);
  for (std::size_t i = 0; i < work.size(); ++i) {
    work.values()[i] *= -params.mu * std::exp(-params.mu * t_pad.values()[i]);
  }
  return pad_replicate_adjoint(work, pad.a, pad.a, pad.b, pad.b);
}

Image row_to_band(const Image& rows, std::size_t pad_b, std::size_t pad_a) {
  return pad_replicate(rows, pad_a, pad_a, pad_b, pad_b);
}

Image band_to_rows(const Image& band, std::size_t n_rows, std::size_t pad_b,
                   std::size_t pad_a) {
  if (band.rows() != n_rows + 2 * pad_b || band.cols() < 2 * pad_a) {
    throw Error("band_to_rows: band does not match padding");
  }
  return crop(band, pad_b, pad_a, n_rows, band.cols() - 2 * pad_a);
}

namespace {
PhysicsParams on_grid_of(const ProjectionStack& stack, PhysicsParams params) {
  params.pixel_pitch = stack.pixel_pitch;
  params.row_pitch = stack.effective_row_pitch();
  return params;
}
}  // namespace

ProjectionStack retrieve_stack(const ProjectionStack& intensities, const PhysicsParams& physics,
                               EdgePadding pad) {
  const PhysicsParams params = on_grid_of(intensities, physics);
  ProjectionStack out{Stack(intensities.n_phi(), intensities.n_b(), intensities.n_a()),
                      intensities.angles, intensities.pixel_pitch, intensities.row_pitch};
  parallel_for(intensities.n_phi(), [&](std::size_t p) {
    out.data.set_plane(p, paganin_retrieve(intensities.data.plane(p), params, pad));
  });
  return out;
}

ProjectionStack propagate_stack(const ProjectionStack& thickness, const PhysicsParams& physics,
                                EdgePadding pad) {
  const PhysicsParams params = on_grid_of(thickness, physics);
  ProjectionStack out{Stack(thickness.n_phi(), thickness.n_b(), thickness.n_a()),
                      thickness.angles, thickness.pixel_pitch, thickness.row_pitch};
  parallel_for(thickness.n_phi(), [&](std::size_t p) {
    out.data.set_plane(p, phase_propagate_forward(thickness.data.plane(p), params, pad));
  });
  return out;
}

}  // namespace n2i

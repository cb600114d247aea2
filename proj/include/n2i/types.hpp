#pragma once

#include <cstddef>
#include <vector>

#include "n2i/array.hpp"

namespace n2i {

/// Flat-field-normalized intensities indexed (angle, detector row b, detector column a).
struct ProjectionStack {
  Stack data;
  std::vector<double> angles;  // radians, strictly increasing
  double pixel_pitch = 1.0;    // detector column spacing
  double row_pitch = 0.0;      // detector row spacing; 0 means equal to pixel_pitch

  std::size_t n_phi() const { return data.dim0(); }
  std::size_t n_b() const { return data.dim1(); }
  std::size_t n_a() const { return data.dim2(); }
  double effective_row_pitch() const { return row_pitch > 0.0 ? row_pitch : pixel_pitch; }

  /// Throws if shape, angle list or intensity positivity are violated.
  void validate_intensities() const;
};

/// One detector row across all angles: rows are angles, columns detector bins.
struct Sinogram {
  Image data;
  std::vector<double> angles;
  double pixel_pitch = 1.0;

  std::size_t n_phi() const { return data.rows(); }
  std::size_t n_a() const { return data.cols(); }
};

/// Square reconstructed slice; row index is y, column index is x.
struct ReconSlice {
  Image data;
  double pixel_pitch = 1.0;

  std::size_t n() const { return data.rows(); }
};

/// Propagation geometry and material constants for single-material phase retrieval.
struct PhysicsParams {
  double z = 5.0;             // propagation distance [m]
  double delta = 1.6e-7;      // refractive index decrement (implementer-chosen default)
  double mu = 20.0;           // linear attenuation coefficient [1/m] (implementer-chosen default)
  double pixel_pitch = 1e-4;  // detector column pitch [m]
  double row_pitch = 0.0;     // detector row pitch [m]; 0 means equal to pixel_pitch

  double effective_row_pitch() const { return row_pitch > 0.0 ? row_pitch : pixel_pitch; }
  /// The only combination of z, delta and mu entering the Fourier kernel.
  double kernel_scale() const { return z * delta / mu; }
  void validate() const;
};

/// Replicate-padding amounts (pixels per side) used around Fourier-domain filters.
struct EdgePadding {
  std::size_t a = 0;
  std::size_t b = 0;
};

}  // namespace n2i

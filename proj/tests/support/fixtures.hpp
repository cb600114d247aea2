#pragma once

// Small synthetic acquisitions shared by the learning tests and the acceptance run.

#include "n2i/nn.hpp"
#include "n2i/phase.hpp"
#include "n2i/transforms.hpp"
#include "oracles.hpp"

namespace fixture {

/// Noiseless propagated intensities of smooth_blobs(scale): n_phi x 14 x n.
inline n2i::ProjectionStack blob_window(std::size_t n, std::size_t n_phi, double scale,
                                        const n2i::PhysicsParams& physics = {}) {
  const auto angles = n2i::uniform_angles(n_phi);
  const auto thickness = oracle::blob_thickness(n, 14, angles, physics.pixel_pitch,
                                                oracle::smooth_blobs(scale));
  return n2i::propagate_stack(thickness, physics);
}

/// Model with at most a few hundred parameters for gradient checks.
inline n2i::ModelConfig tiny_model() {
  n2i::ModelConfig cfg;
  cfg.depth = 1;
  cfg.base_channels = 2;
  return cfg;
}

}  // namespace fixture

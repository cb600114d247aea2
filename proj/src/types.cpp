#include "n2i/types.hpp"

#include <cmath>
#include <string>

#include "n2i/errors.hpp"

namespace n2i {

void ProjectionStack::validate_intensities() const {
  if (n_phi() < 1 || n_b() < 1 || n_a() < 2) {
    throw Error("ProjectionStack: need n_phi >= 1, n_b >= 1, n_a >= 2");
  }
  if (angles.size() != n_phi()) {
    throw Error("ProjectionStack: angle count does not match data");
  }
  for (std::size_t i = 1; i < angles.size(); ++i) {
    if (!(angles[i] > angles[i - 1])) {
      throw Error("ProjectionStack: angles must be strictly increasing");
    }
  }
  for (double v : data.values()) {
    if (!std::isfinite(v) || v <= 0.0) {
      throw NumericError("ProjectionStack: intensities must be finite and positive");
    }
  }
}

void PhysicsParams::validate() const {
  if (!(z >= 0.0)) throw ConfigError("physics: z must be >= 0");
  if (!(mu > 0.0)) throw ConfigError("physics: mu must be > 0");
  if (!(delta >= 0.0)) throw ConfigError("physics: delta must be >= 0");
  if (!(pixel_pitch > 0.0)) throw ConfigError("physics: pixel_pitch must be > 0");
  if (row_pitch < 0.0) throw ConfigError("physics: row_pitch must be >= 0");
}

}  // namespace n2i

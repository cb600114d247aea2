#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "n2i/array.hpp"
#include "n2i/rng.hpp"
#include "n2i/types.hpp"

namespace n2i {

/// Ellipsoid in unit field-of-view coordinates ([-1, 1] spans the slice width),
/// rotated by `rotation` radians about the detector-row (z) axis.
struct Ellipsoid {
  double cx = 0.0, cy = 0.0, cz = 0.0;
  double ax = 0.0, ay = 0.0, az = 0.0;
  double rotation = 0.0;
  double density = 0.0;
};

/// Randomly placed spheres inside a host ellipsoid.
struct TextureSpec {
  std::size_t count = 0;
  double r_min = 0.01;
  double r_max = 0.03;
  double density = 0.5;
  Ellipsoid host;
};

struct PhantomSpec {
  std::vector<Ellipsoid> ellipsoids;
  std::vector<TextureSpec> textures;
  std::size_t size = 256;        // slice grid n
  std::size_t supersample = 4;   // in-plane sub-samples per voxel axis when voxelizing
  bool allow_truncation = false; // permit primitives outside the field of view (ROI CT)
  RngSeed seed{};

  void validate() const;
};

/// Noise model parameters: s_noisy = -log(P(alpha e^-s)/alpha + N(0, sigma_g^2)).
struct NoiseParams {
  double alpha = 100000.0;
  double sigma_g = 5e-4;
  RngSeed seed{};
};

/// Lower clamp on the noisy normalized intensity (the argument of the logarithm).
inline constexpr double kIntensityFloor = 1e-6;

PhantomSpec load_phantom_spec(const std::filesystem::path& path);
PhantomSpec parse_phantom_spec(const std::string& json_text);
/// Default lung-like phantom: tissue body, two textured lungs, a homogeneous insert
/// and an air pocket, all as cylinders along z apart from the texture spheres.
PhantomSpec lung_phantom(std::size_t size, std::uint64_t seed, std::size_t texture_count = 250);

/// All primitives after expanding textures deterministically from the spec seed.
std::vector<Ellipsoid> expand_primitives(const PhantomSpec& spec);

/// Unit-FOV z coordinate of detector row b in a stack of n_b rows.
double row_z(std::size_t row, std::size_t n_b, std::size_t size);

/// Density slice at detector row `row` of an n_b-row acquisition.
Image phantom_slice(const PhantomSpec& spec, std::size_t row, std::size_t n_b);
/// Voxelized density volume indexed (b, y, x).
Stack make_phantom(const PhantomSpec& spec, std::size_t n_b);

/// Exact ellipsoid chord integrals: thickness stack (phi, b, a) in metres.
ProjectionStack project_thickness(const PhantomSpec& spec, std::span<const double> angles,
                                  std::size_t n_b, double pixel_pitch);

/// Applies the mixed Poisson-Gaussian model to one normalized-intensity image.
/// Returns the noisy intensity exp(-s_noisy), clamped below at kIntensityFloor.
Image apply_noise(const Image& clean, const NoiseParams& params, std::uint64_t stream);
/// Stack version; projection phi uses stream phi so generation order does not matter.
ProjectionStack apply_noise(const ProjectionStack& clean, const NoiseParams& params);

struct Acquisition {
  ProjectionStack thickness;  // ground-truth projected thickness
  ProjectionStack clean;      // propagated intensities
  ProjectionStack noisy;
};

/// Projects, forward-propagates and adds noise. Thickness is computed on pad.b extra
/// rows above and below so propagation near the stack edge sees real neighbours.
Acquisition simulate_acquisition(const PhantomSpec& spec, const PhysicsParams& physics,
                                 const NoiseParams& noise, std::span<const double> angles,
                                 std::size_t n_b, EdgePadding pad);

/// Photon-count scale factors for exposure times 15, 25, 33, 50, 67, 100, 200 ms
/// relative to 15 ms.
std::vector<double> exposure_alpha_scales();

}  // namespace n2i

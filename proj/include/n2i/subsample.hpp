#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "n2i/array.hpp"
#include "n2i/rng.hpp"
#include "n2i/types.hpp"

namespace n2i {

enum class SubsampleDomain { projection_ab, sinogram_aphi };

/// In-cell offset (dy, dx) with each coordinate in {0, 1}.
struct CellOffset {
  std::uint8_t dy = 0;
  std::uint8_t dx = 0;
  friend bool operator==(const CellOffset&, const CellOffset&) = default;
};

/// The eight ordered pairs of distinct 4-adjacent positions in a 2x2 cell; a cell's
/// code 0-7 indexes this table.
const std::array<std::pair<CellOffset, CellOffset>, 8>& admissible_pairs();

/// Neighbour subsampling operator G: per 2x2 cell one code selecting the pixel read by
/// g1 and a 4-adjacent pixel read by g2.
struct SubsampleMask {
  std::size_t cell_rows = 0;
  std::size_t cell_cols = 0;
  std::vector<std::uint8_t> codes;  // row-major, one per cell
  SubsampleDomain domain = SubsampleDomain::projection_ab;
  RngSeed seed{};

  std::uint8_t code(std::size_t i, std::size_t j) const { return codes[i * cell_cols + j]; }
  std::pair<CellOffset, CellOffset> offsets(std::size_t i, std::size_t j) const {
    return admissible_pairs()[code(i, j)];
  }
  friend bool operator==(const SubsampleMask&, const SubsampleMask&) = default;
};

/// Uniform over the 8 admissible pairs, independently per cell. Height and width must
/// be even.
SubsampleMask make_mask(std::size_t height, std::size_t width, SubsampleDomain domain,
                        RngSeed seed);

struct SubsampledPair {
  Image g1;
  Image g2;
};

/// g1[i, j] = image[2i + dy1, 2j + dx1] and likewise for g2.
SubsampledPair apply_mask(const Image& image, const SubsampleMask& mask);

/// Adjoint of apply_mask: scatters the half-size gradients back to full resolution.
Image apply_mask_adjoint(const Image& grad_g1, const Image& grad_g2, const SubsampleMask& mask);

struct SubsampledStacks {
  ProjectionStack first;
  ProjectionStack second;
  std::vector<SubsampleMask> masks;  // one per angle (projection_ab) or per row (sinogram_aphi)
  SubsampleDomain domain = SubsampleDomain::projection_ab;
};

/// projection_ab: one mask per angle over (b, a). sinogram_aphi: one mask per detector
/// row over (phi, a); each output angle is the mean of its cell's two source angles.
/// Subsampled axes are halved and the detector pitch doubles along them.
SubsampledStacks subsample_stack(const ProjectionStack& stack, SubsampleDomain domain,
                                 RngSeed seed);

/// Drops one trailing element from odd-sized axes (logged); never pads.
ProjectionStack trim_to_even(const ProjectionStack& stack, SubsampleDomain domain);

/// Masks of a projection_ab subsampling restricted to the cell row holding full-res
/// rows (first_row, first_row + 1), 1-based. first_row must be odd (cell aligned).
/// The result has one single-cell-row mask per angle.
std::vector<SubsampleMask> restrict_mask(const std::vector<SubsampleMask>& masks,
                                         std::size_t first_row);

/// 1-based cell row of full-resolution 1-based row b.
inline std::size_t cell_row_of(std::size_t row_1based) { return (row_1based + 1) / 2; }

}  // namespace n2i

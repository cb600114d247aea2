#include "n2i/subsample.hpp"

#include <spdlog/spdlog.h>

#include "n2i/errors.hpp"
#include "n2i/parallel.hpp"

namespace n2i {

const std::array<std::pair<CellOffset, CellOffset>, 8>& admissible_pairs() {
  // Cell positions: (0,0) (0,1) (1,0) (1,1); each first pixel with both 4-neighbours.
  static const std::array<std::pair<CellOffset, CellOffset>, 8> pairs = {{
      {{0, 0}, {0, 1}},
      {{0, 0}, {1, 0}},
      {{0, 1}, {0, 0}},
      {{0, 1}, {1, 1}},
      {{1, 0}, {0, 0}},
      {{1, 0}, {1, 1}},
      {{1, 1}, {0, 1}},
      {{1, 1}, {1, 0}},
  }};
  return pairs;
}

SubsampleMask make_mask(std::size_t height, std::size_t width, SubsampleDomain domain,
                        RngSeed seed) {
  if (height == 0 || width == 0 || height % 2 != 0 || width % 2 != 0) {
    throw Error("make_mask: dimensions must be even and non-zero");
  }
  SubsampleMask m;
  m.cell_rows = height / 2;
  m.cell_cols = width / 2;
  m.domain = domain;
  m.seed = seed;
  m.codes.resize(m.cell_rows * m.cell_cols);
  const CounterRng rng(seed);
  for (std::size_t c = 0; c < m.codes.size(); ++c) {
    // Top three bits: first pixel uniform over 4, neighbour uniform over its 2.
    m.codes[c] = static_cast<std::uint8_t>(rng.at(c) >> 61);
  }
  return m;
}

SubsampledPair apply_mask(const Image& image, const SubsampleMask& mask) {
  if (image.rows() != 2 * mask.cell_rows || image.cols() != 2 * mask.cell_cols) {
    throw Error("apply_mask: image shape does not match mask");
  }
  SubsampledPair out{Image(mask.cell_rows, mask.cell_cols),
                     Image(mask.cell_rows, mask.cell_cols)};
  for (std::size_t i = 0; i < mask.cell_rows; ++i) {
    for (std::size_t j = 0; j < mask.cell_cols; ++j) {
      const auto [a, b] = mask.offsets(i, j);
      out.g1(i, j) = image(2 * i + a.dy, 2 * j + a.dx);
      out.g2(i, j) = image(2 * i + b.dy, 2 * j + b.dx);
    }
  }
  return out;
}

Image apply_mask_adjoint(const Image& grad_g1, const Image& grad_g2, const SubsampleMask& mask) {
  if (grad_g1.rows() != mask.cell_rows || grad_g1.cols() != mask.cell_cols ||
      !grad_g1.same_shape(grad_g2)) {
    throw Error("apply_mask_adjoint: shape mismatch");
  }
  Image out(2 * mask.cell_rows, 2 * mask.cell_cols);
  for (std::size_t i = 0; i < mask.cell_rows; ++i) {
    for (std::size_t j = 0; j < mask.cell_cols; ++j) {
      const auto [a, b] = mask.offsets(i, j);
      out(2 * i + a.dy, 2 * j + a.dx) += grad_g1(i, j);
      out(2 * i + b.dy, 2 * j + b.dx) += grad_g2(i, j);
    }
  }
  return out;
}

SubsampledStacks subsample_stack(const ProjectionStack& stack, SubsampleDomain domain,
                                 RngSeed seed) {
  const std::size_t n_phi = stack.n_phi(), n_b = stack.n_b(), n_a = stack.n_a();
  if (n_a % 2 != 0) throw Error("subsample_stack: odd detector width");
  SubsampledStacks out;
  out.domain = domain;
  if (domain == SubsampleDomain::projection_ab) {
    if (n_b % 2 != 0) throw Error("subsample_stack: odd number of detector rows");
    const std::size_t hb = n_b / 2, ha = n_a / 2;
    out.first = {Stack(n_phi, hb, ha), stack.angles, 2 * stack.pixel_pitch,
                 2 * stack.effective_row_pitch()};
    out.second = out.first;
    out.masks.resize(n_phi);
    parallel_for(n_phi, [&](std::size_t p) {
      out.masks[p] = make_mask(n_b, n_a, domain, seed.derive(p));
      const auto pair = apply_mask(stack.data.plane(p), out.masks[p]);
      out.first.data.set_plane(p, pair.g1);
      out.second.data.set_plane(p, pair.g2);
    });
  } else {
    if (n_phi % 2 != 0) throw Error("subsample_stack: odd number of angles");
    const std::size_t hp = n_phi / 2, ha = n_a / 2;
    std::vector<double> angles(hp);
    for (std::size_t i = 0; i < hp; ++i) {
      angles[i] = 0.5 * (stack.angles[2 * i] + stack.angles[2 * i + 1]);
    }
    out.first = {Stack(hp, n_b, ha), angles, 2 * stack.pixel_pitch,
                 stack.effective_row_pitch()};
    out.second = out.first;
    out.masks.resize(n_b);
    parallel_for(n_b, [&](std::size_t b) {
      out.masks[b] = make_mask(n_phi, n_a, domain, seed.derive(b));
      const auto pair = apply_mask(stack.data.middle_slice(b), out.masks[b]);
      out.first.data.set_middle_slice(b, pair.g1);
      out.second.data.set_middle_slice(b, pair.g2);
    });
  }
  return out;
}

ProjectionStack trim_to_even(const ProjectionStack& stack, SubsampleDomain domain) {
  const std::size_t n_a = stack.n_a() - stack.n_a() % 2;
  std::size_t n_b = stack.n_b();
  std::size_t n_phi = stack.n_phi();
  if (domain == SubsampleDomain::projection_ab) n_b -= n_b % 2;
  else n_phi -= n_phi % 2;
  if (n_a == stack.n_a() && n_b == stack.n_b() && n_phi == stack.n_phi()) return stack;
  spdlog::info("trim_to_even: {}x{}x{} -> {}x{}x{}", stack.n_phi(), stack.n_b(), stack.n_a(),
               n_phi, n_b, n_a);
  ProjectionStack out{Stack(n_phi, n_b, n_a),
                      {stack.angles.begin(), stack.angles.begin() + n_phi},
                      stack.pixel_pitch, stack.row_pitch};
  for (std::size_t p = 0; p < n_phi; ++p) {
    for (std::size_t b = 0; b < n_b; ++b) {
      for (std::size_t a = 0; a < n_a; ++a) out.data(p, b, a) = stack.data(p, b, a);
    }
  }
  return out;
}

std::vector<SubsampleMask> restrict_mask(const std::vector<SubsampleMask>& masks,
                                         std::size_t first_row) {
  if (first_row == 0 || first_row % 2 == 0) {
    throw Error("restrict_mask: rows are not cell-aligned");
  }
  const std::size_t cell = cell_row_of(first_row) - 1;
  std::vector<SubsampleMask> out;
  out.reserve(masks.size());
  for (const auto& m : masks) {
    if (m.domain != SubsampleDomain::projection_ab) {
      throw Error("restrict_mask: only projection-domain masks have detector rows");
    }
    if (cell >= m.cell_rows) throw Error("restrict_mask: rows outside mask");
    SubsampleMask r;
    r.cell_rows = 1;
    r.cell_cols = m.cell_cols;
    r.domain = m.domain;
    r.seed = m.seed;
    r.codes.assign(m.codes.begin() + cell * m.cell_cols,
                   m.codes.begin() + (cell + 1) * m.cell_cols);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace n2i

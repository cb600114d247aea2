#pragma once

#include <cstddef>

#include "n2i/array.hpp"

namespace n2i {

/// Pads by repeating the outermost row/column on each side.
Image pad_replicate(const Image& img, std::size_t left, std::size_t right, std::size_t top,
                    std::size_t bottom);

/// Adjoint of pad_replicate: padded entries are summed back onto the edge they copy.
Image pad_replicate_adjoint(const Image& padded, std::size_t left, std::size_t right,
                            std::size_t top, std::size_t bottom);

Image crop(const Image& img, std::size_t row0, std::size_t col0, std::size_t rows,
           std::size_t cols);

/// Adjoint of crop: embeds into a zero image of the given size.
Image embed(const Image& img, std::size_t row0, std::size_t col0, std::size_t rows,
            std::size_t cols);

/// Mirror padding without edge repetition (numpy "reflect").
Image pad_reflect(const Image& img, std::size_t bottom, std::size_t right);

}  // namespace n2i

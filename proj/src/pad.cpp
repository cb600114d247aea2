#include "n2i/pad.hpp"

#include <algorithm>

#include "n2i/errors.hpp"

namespace n2i {

Image pad_replicate(const Image& img, std::size_t left, std::size_t right, std::size_t top,
                    std::size_t bottom) {
  if (img.empty()) throw Error("pad_replicate: empty image");
  const std::size_t rows = img.rows() + top + bottom;
  const std::size_t cols = img.cols() + left + right;
  Image out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t sr = std::clamp<std::ptrdiff_t>(
        static_cast<std::ptrdiff_t>(r) - static_cast<std::ptrdiff_t>(top), 0,
        static_cast<std::ptrdiff_t>(img.rows()) - 1);
    auto src = img.row(sr);
    auto dst = out.row(r);
    std::fill(dst.begin(), dst.begin() + left, src.front());
    std::copy(src.begin(), src.end(), dst.begin() + left);
    std::fill(dst.begin() + left + img.cols(), dst.end(), src.back());
  }
  return out;
}

Image pad_replicate_adjoint(const Image& padded, std::size_t left, std::size_t right,
                            std::size_t top, std::size_t bottom) {
  if (padded.rows() <= top + bottom || padded.cols() <= left + right) {
    throw Error("pad_replicate_adjoint: padding exceeds image");
  }
  const std::size_t rows = padded.rows() - top - bottom;
  const std::size_t cols = padded.cols() - left - right;
  Image out(rows, cols);
  for (std::size_t r = 0; r < padded.rows(); ++r) {
    const std::size_t dr = std::clamp<std::ptrdiff_t>(
        static_cast<std::ptrdiff_t>(r) - static_cast<std::ptrdiff_t>(top), 0,
        static_cast<std::ptrdiff_t>(rows) - 1);
    for (std::size_t c = 0; c < padded.cols(); ++c) {
      const std::size_t dc = std::clamp<std::ptrdiff_t>(
          static_cast<std::ptrdiff_t>(c) - static_cast<std::ptrdiff_t>(left), 0,
          static_cast<std::ptrdiff_t>(cols) - 1);
      out(dr, dc) += padded(r, c);
    }
  }
  return out;
}

Image crop(const Image& img, std::size_t row0, std::size_t col0, std::size_t rows,
           std::size_t cols) {
  if (row0 + rows > img.rows() || col0 + cols > img.cols()) {
    throw Error("crop: window exceeds image");
  }
  Image out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    auto src = img.row(row0 + r).subspan(col0, cols);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

Image embed(const Image& img, std::size_t row0, std::size_t col0, std::size_t rows,
            std::size_t cols) {
  if (row0 + img.rows() > rows || col0 + img.cols() > cols) {
    throw Error("embed: image exceeds target");
  }
  Image out(rows, cols);
  for (std::size_t r = 0; r < img.rows(); ++r) {
    auto src = img.row(r);
    std::copy(src.begin(), src.end(), out.row(row0 + r).begin() + col0);
  }
  return out;
}

namespace {
std::size_t reflect_index(std::size_t i, std::size_t n) {
  if (n == 1) return 0;
  const std::size_t period = 2 * (n - 1);
  i %= period;
  return i < n ? i : period - i;
}
}  // namespace

Image pad_reflect(const Image& img, std::size_t bottom, std::size_t right) {
  Image out(img.rows() + bottom, img.cols() + right);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    const std::size_t sr = reflect_index(r, img.rows());
    for (std::size_t c = 0; c < out.cols(); ++c) {
      out(r, c) = img(sr, reflect_index(c, img.cols()));
    }
  }
  return out;
}

}  // namespace n2i

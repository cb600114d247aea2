#include "n2i/array.hpp"

#include <cmath>
#include <stdexcept>

#include "n2i/errors.hpp"

namespace n2i {

Image::Image(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw Error("Image: value count does not match shape");
  }
}

Image Stack::plane(std::size_t i) const {
  Image out(n1_, n2_);
  const auto* src = values_.data() + i * n1_ * n2_;
  std::copy(src, src + n1_ * n2_, out.data());
  return out;
}

void Stack::set_plane(std::size_t i, const Image& img) {
  if (img.rows() != n1_ || img.cols() != n2_) {
    throw Error("Stack::set_plane: shape mismatch");
  }
  std::copy(img.data(), img.data() + img.size(), values_.data() + i * n1_ * n2_);
}

Image Stack::middle_slice(std::size_t j) const {
  Image out(n0_, n2_);
  for (std::size_t i = 0; i < n0_; ++i) {
    const auto* src = values_.data() + (i * n1_ + j) * n2_;
    std::copy(src, src + n2_, out.row(i).begin());
  }
  return out;
}

void Stack::set_middle_slice(std::size_t j, const Image& img) {
  if (img.rows() != n0_ || img.cols() != n2_) {
    throw Error("Stack::set_middle_slice: shape mismatch");
  }
  for (std::size_t i = 0; i < n0_; ++i) {
    auto src = img.row(i);
    std::copy(src.begin(), src.end(), values_.data() + (i * n1_ + j) * n2_);
  }
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double variance(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

double correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) {
    throw Error("correlation: size mismatch");
  }
  const double ma = mean(a);
  const double mb = mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

double mean_squared_difference(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error("mean_squared_difference: size mismatch");
  }
  if (a.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

double mean_square(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x * x;
  return s / static_cast<double>(v.size());
}

}  // namespace n2i

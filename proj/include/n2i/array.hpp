#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace n2i {

/// Dense row-major 2D array of doubles.
class Image {
 public:
  Image() = default;
  Image(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  Image(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  bool same_shape(const Image& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// Dense row-major 3D array of doubles, indexed (i, j, k).
class Stack {
 public:
  Stack() = default;
  Stack(std::size_t n0, std::size_t n1, std::size_t n2, double fill = 0.0)
      : n0_(n0), n1_(n1), n2_(n2), values_(n0 * n1 * n2, fill) {}

  std::size_t dim0() const { return n0_; }
  std::size_t dim1() const { return n1_; }
  std::size_t dim2() const { return n2_; }
  std::size_t size() const { return values_.size(); }

  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return values_[(i * n1_ + j) * n2_ + k];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return values_[(i * n1_ + j) * n2_ + k];
  }

  /// Copy of the 2D plane at fixed first index.
  Image plane(std::size_t i) const;
  void set_plane(std::size_t i, const Image& img);
  /// Copy of the (dim0 x dim2) slab at fixed middle index.
  Image middle_slice(std::size_t j) const;
  void set_middle_slice(std::size_t j, const Image& img);

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  friend bool operator==(const Stack&, const Stack&) = default;

 private:
  std::size_t n0_ = 0;
  std::size_t n1_ = 0;
  std::size_t n2_ = 0;
  std::vector<double> values_;
};

double mean(std::span<const double> v);
double variance(std::span<const double> v);
/// Pearson correlation of two equally sized sequences.
double correlation(std::span<const double> a, std::span<const double> b);
double mean_squared_difference(std::span<const double> a, std::span<const double> b);
double mean_square(std::span<const double> v);
inline double mean_squared_difference(const Image& a, const Image& b) {
  return mean_squared_difference(a.values(), b.values());
}
inline double mean_square(const Image& v) { return mean_square(v.values()); }

}  // namespace n2i

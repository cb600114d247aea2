#include "n2i/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>

#include "n2i/errors.hpp"

namespace n2i {
namespace {

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <typename T>
FftwBuffer<T> fftw_buffer(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * std::max<std::size_t>(n, 1)));
  if (!p) throw std::bad_alloc();
  return FftwBuffer<T>(p);
}

struct PlanPair {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
};

// FFTW's planner is not thread-safe; execution through the new-array interface is.
// Plans are created once per shape and intentionally never destroyed.
class PlanCache {
 public:
  PlanPair get(std::size_t rows, std::size_t cols) {
    std::lock_guard lock(mutex_);
    const auto key = std::make_tuple(rows, cols);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    const std::size_t half = cols / 2 + 1;
    auto real = fftw_buffer<double>(rows * cols);
    auto spec = fftw_buffer<fftw_complex>(rows * half);
    PlanPair p;
    if (rows == 1) {
      p.forward = fftw_plan_dft_r2c_1d(static_cast<int>(cols), real.get(), spec.get(),
                                       FFTW_ESTIMATE);
      p.backward = fftw_plan_dft_c2r_1d(static_cast<int>(cols), spec.get(), real.get(),
                                        FFTW_ESTIMATE);
    } else {
      p.forward = fftw_plan_dft_r2c_2d(static_cast<int>(rows), static_cast<int>(cols),
                                       real.get(), spec.get(), FFTW_ESTIMATE);
      p.backward = fftw_plan_dft_c2r_2d(static_cast<int>(rows), static_cast<int>(cols),
                                        spec.get(), real.get(), FFTW_ESTIMATE);
    }
    if (!p.forward || !p.backward) throw Error("FFTW planning failed");
    plans_.emplace(key, p);
    return p;
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<std::size_t, std::size_t>, PlanPair> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

}  // namespace

double fft_frequency(std::size_t k, std::size_t n, double spacing) {
  const auto sk = static_cast<double>(k);
  const auto sn = static_cast<double>(n);
  const double idx = (2 * k < n || (2 * k == n)) ? sk : sk - sn;
  return idx / (sn * spacing);
}

std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

void filter_rows(Image& rows, std::span<const double> half_kernel) {
  const std::size_t n = rows.cols();
  const std::size_t half = n / 2 + 1;
  if (half_kernel.size() != half) throw Error("filter_rows: kernel size mismatch");
  const PlanPair plan = plan_cache().get(1, n);
  auto real = fftw_buffer<double>(n);
  auto spec = fftw_buffer<fftw_complex>(half);
  const double norm = 1.0 / static_cast<double>(n);
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    auto row = rows.row(r);
    std::copy(row.begin(), row.end(), real.get());
    fftw_execute_dft_r2c(plan.forward, real.get(), spec.get());
    for (std::size_t k = 0; k < half; ++k) {
      const double g = half_kernel[k] * norm;
      spec[k][0] *= g;
      spec[k][1] *= g;
    }
    fftw_execute_dft_c2r(plan.backward, spec.get(), real.get());
    std::copy(real.get(), real.get() + n, row.begin());
  }
}

void filter_2d(Image& img, const Image& half_kernel) {
  const std::size_t h = img.rows();
  const std::size_t w = img.cols();
  const std::size_t half = w / 2 + 1;
  if (half_kernel.rows() != h || half_kernel.cols() != half) {
    throw Error("filter_2d: kernel shape mismatch");
  }
  if (h == 1) {
    filter_rows(img, half_kernel.row(0));
    return;
  }
  const PlanPair plan = plan_cache().get(h, w);
  auto real = fftw_buffer<double>(h * w);
  auto spec = fftw_buffer<fftw_complex>(h * half);
  std::copy(img.data(), img.data() + img.size(), real.get());
  fftw_execute_dft_r2c(plan.forward, real.get(), spec.get());
  const double norm = 1.0 / static_cast<double>(h * w);
  const double* k = half_kernel.data();
  for (std::size_t i = 0; i < h * half; ++i) {
    const double g = k[i] * norm;
    spec[i][0] *= g;
    spec[i][1] *= g;
  }
  fftw_execute_dft_c2r(plan.backward, spec.get(), real.get());
  std::copy(real.get(), real.get() + h * w, img.data());
}

}  // namespace n2i

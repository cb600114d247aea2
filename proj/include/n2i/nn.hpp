#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <new>
#include <span>
#include <vector>

#include "n2i/array.hpp"
#include "n2i/rng.hpp"

namespace n2i {

/// Encoder-decoder denoiser hyperparameters.
struct ModelConfig {
  std::size_t depth = 3;           // number of 2x max-pool stages
  std::size_t base_channels = 16;  // feature channels at every level
  double leaky_slope = 0.1;
  bool residual = true;            // output = input + network(input)

  std::size_t divisor() const { return std::size_t{1} << depth; }
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// 64-byte aligned storage. Eigen picks kernels by pointer alignment, so fixed alignment
/// keeps results bit-identical from run to run.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }
  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};
using AlignedVector = std::vector<double, AlignedAllocator<double>>;

/// Channels x height x width activations, channel planes contiguous.
struct Tensor {
  std::size_t c = 0, h = 0, w = 0;
  AlignedVector v;

  Tensor() = default;
  Tensor(std::size_t c_, std::size_t h_, std::size_t w_)
      : c(c_), h(h_), w(w_), v(c_ * h_ * w_, 0.0) {}
  std::size_t plane() const { return h * w; }
  double* channel(std::size_t k) { return v.data() + k * h * w; }
  const double* channel(std::size_t k) const { return v.data() + k * h * w; }
};

/// U-Net style denoiser: 3x3 convolutions with leaky ReLU, 2x2 max pooling, learned
/// 2x2 transposed-convolution upsampling with skip concatenation, 1x1 output head.
/// Parameters live in one flat vector so optimizers and checkpoints treat them uniformly.
/// Inputs must have sides divisible by 2^depth; see denoise_slice for arbitrary sizes.
class Denoiser {
 public:
  struct Cache;

  explicit Denoiser(ModelConfig cfg);
  Denoiser(const Denoiser&);
  Denoiser& operator=(const Denoiser&);
  Denoiser(Denoiser&&) noexcept;
  Denoiser& operator=(Denoiser&&) noexcept;
  ~Denoiser();

  /// Kaiming-uniform weights, zero biases.
  void initialize(RngSeed seed);
  /// All parameters zero: with residual on, the model is the identity map.
  void zero_parameters();

  const ModelConfig& config() const { return cfg_; }
  std::size_t parameter_count() const { return params_.size(); }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  Image forward(const Image& input) const;
  /// Forward pass recording what backward() needs.
  Image forward(const Image& input, Cache& cache) const;
  /// Accumulates dLoss/dparams into grad (size parameter_count()) and returns
  /// dLoss/dinput.
  Image backward(const Cache& cache, const Image& grad_output, std::span<double> grad) const;

 private:
  struct Layout;
  ModelConfig cfg_;
  std::unique_ptr<Layout> layout_;
  AlignedVector params_;
};

struct Denoiser::Cache {
  std::vector<Tensor> conv_inputs;    // input to each 3x3/1x1 convolution, layer order
  std::vector<Tensor> act_outputs;    // post-activation output of each activated conv
  std::vector<Tensor> up_inputs;      // input to each transposed convolution
  std::vector<std::vector<std::uint8_t>> pool_argmax;
  std::vector<std::size_t> pool_in_h, pool_in_w;
  std::size_t h = 0, w = 0;
};

/// Reflect-pads to a multiple of 2^depth, runs the model and crops back.
Image denoise_slice(const Denoiser& model, const Image& slice);

/// Adam with default moments; step() applies one update from a gradient.
class Adam {
 public:
  explicit Adam(std::size_t n, double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void step(std::span<double> params, std::span<const double> grad);
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<double> m_, v_;
};

/// Reduce-on-plateau in "min" mode with relative threshold: after more than `patience`
/// epochs without improvement the learning rate is multiplied by `factor`.
class PlateauScheduler {
 public:
  PlateauScheduler(std::size_t patience = 5, double factor = 0.5, double threshold = 1e-4);
  /// Returns the learning rate to use after observing this epoch's metric.
  double observe(double metric, double lr);

 private:
  std::size_t patience_;
  double factor_, threshold_;
  double best_;
  std::size_t bad_epochs_ = 0;
};

/// Architecture in the header metadata, parameters as a float32 payload.
void save_checkpoint(const Denoiser& model, const std::filesystem::path& path);
Denoiser load_checkpoint(const std::filesystem::path& path);

}  // namespace n2i

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "n2i/nn.hpp"
#include "n2i/rng.hpp"
#include "n2i/subsample.hpp"
#include "n2i/types.hpp"

namespace n2i {

enum class LossVariant { nei_only, nei_plus_reg, orig_sino, virt_sino };
enum class GammaMode { ramp, fixed, balanced };

LossVariant parse_loss_variant(const std::string& name);
std::string to_string(LossVariant v);
GammaMode parse_gamma_mode(const std::string& name);
SubsampleDomain parse_subsample_domain(const std::string& name);
std::string to_string(SubsampleDomain d);

/// Rows of the training window and the rows used by the loss terms.
inline constexpr std::size_t kWindowRows = 14;
inline constexpr std::size_t kCentralSubRow = 3;   // b = 4 of the 7 subsampled rows
inline constexpr std::size_t kFullresRow = 6;      // b = 7 (0-based 6); b = 8 follows

/// Everything the four objectives need for one 14-row window.
struct TrainingSample {
  ReconSlice input;   // R[T g1(p)]
  ReconSlice target;  // R[T g2(p)]
  std::vector<ReconSlice> fullres_rows;  // b = {7, 8} (projection) or b = 7 (sinogram)
  Image raw_row_g2;                      // measured g2 intensities of the central row
  std::vector<SubsampleMask> masks;      // restricted to the full-res rows
  SubsampleDomain domain = SubsampleDomain::projection_ab;
  std::vector<double> angles;      // angles of the full-res sinograms
  std::vector<double> sub_angles;  // angles of the subsampled sinograms
  PhysicsParams physics;           // on the subsampled grid
  EdgePadding forward_pad;         // slice (a) and band (b) padding for forward propagation
};

struct SampleOptions {
  SubsampleDomain domain = SubsampleDomain::projection_ab;
  EdgePadding retrieval_pad;  // at full resolution; halved on the subsampled grid
  EdgePadding forward_pad;    // on the subsampled grid
  bool with_fullres = true;   // skip the b = {7, 8} reconstructions when no loss uses them
};

/// Builds input/target slices from one 14-row intensity window.
TrainingSample make_training_sample(const ProjectionStack& window, const PhysicsParams& physics,
                                    const SampleOptions& options, RngSeed seed);

/// Mean squared difference; throws on shape mismatch.
double loss_nei(const ReconSlice& pred, const ReconSlice& target);

/// A loss value with its gradient with respect to the slice it was evaluated at.
struct LossGrad {
  double value = 0.0;
  Image grad;
};

/// Correction path of the regularizer: reconstructions of the g1 and g2 subsamplings of
/// the forward projected full-res rows.
struct CorrectionRecon {
  ReconSlice g1, g2;
};
CorrectionRecon correction_recon(const std::vector<ReconSlice>& denoised_rows,
                                 const TrainingSample& sample);

/// Mean of (pred - target - recon_g1 + recon_g2)^2 for already denoised full-res rows.
double reg_term(const ReconSlice& pred, const TrainingSample& sample,
                const std::vector<ReconSlice>& denoised_rows);
/// Same with gradients: first with respect to pred, then one per denoised full-res row.
struct RegGrad {
  double value = 0.0;
  Image d_pred;
  std::vector<Image> d_rows;
};
RegGrad reg_term_grad(const ReconSlice& pred, const TrainingSample& sample,
                      const std::vector<ReconSlice>& denoised_rows);

/// The regularizer with the model applied to the full-res rows.
double loss_reg_term(const Denoiser& model, const ReconSlice& pred, const TrainingSample& sample);

/// T^-1 R^-1 of a slice: replicate-pad by pad.a, forward project, replicate each detector
/// row into a band of 2*pad.b + 1 rows, propagate and keep the central row, cropped to the
/// slice width. Rows follow `angles`.
Image virtual_sinogram(const ReconSlice& slice, std::span<const double> angles,
                       const PhysicsParams& physics, EdgePadding pad);
/// Adjoint of the linearization of virtual_sinogram at `slice`.
Image virtual_sinogram_vjp(const ReconSlice& slice, const Image& grad, std::span<const double> angles,
                           const PhysicsParams& physics, EdgePadding pad);

/// Mean squared error between the virtual sinogram of pred and the measured g2 row.
double loss_orig_sino(const ReconSlice& pred, const Image& raw_row_g2,
                      std::span<const double> angles, const PhysicsParams& physics,
                      EdgePadding pad);
LossGrad loss_orig_sino_grad(const ReconSlice& pred, const Image& raw_row_g2,
                             std::span<const double> angles, const PhysicsParams& physics,
                             EdgePadding pad);
/// Mean squared error between the virtual sinograms of pred and target.
double loss_virt_sino(const ReconSlice& pred, const ReconSlice& target,
                      std::span<const double> angles, const PhysicsParams& physics,
                      EdgePadding pad);
LossGrad loss_virt_sino_grad(const ReconSlice& pred, const ReconSlice& target,
                             std::span<const double> angles, const PhysicsParams& physics,
                             EdgePadding pad);

/// Angles of the sinograms compared by the fidelity terms.
const std::vector<double>& fidelity_angles(const TrainingSample& sample);

/// Neighbor2Neighbor objective on a single projection (no T or R):
/// |f(g1 p) - g2 p|^2 + gamma |f(g1 p) - g2 p - g1 f(p) + g2 f(p)|^2, means over pixels.
struct N2nLoss {
  double nei = 0.0;
  double reg = 0.0;
  double total = 0.0;
};
N2nLoss loss_n2n_projection(const Denoiser& model, const Image& projection,
                            const SubsampleMask& mask, double gamma,
                            std::span<double> grad = {});

struct LossParts {
  double nei = 0.0;
  double term = 0.0;   // the variant's second term, 0 for nei_only
  double total = 0.0;  // nei + gamma * term
};
/// Full objective of one sample; accumulates dLoss/dtheta into grad when it is non-empty.
LossParts sample_loss(const Denoiser& model, const TrainingSample& sample, LossVariant variant,
                      double gamma, std::span<double> grad = {});

/// 2 * min(epoch, 100) / 100 in ramp mode, the constant otherwise.
double gamma_schedule(std::size_t epoch, GammaMode mode, double fixed_gamma = 0.0);
/// Paper defaults for the fidelity variants.
double default_fixed_gamma(LossVariant variant);

/// Noise2Inverse X:1 split of a thickness stack: per detector row, the input uses angle
/// indices not congruent to x modulo x + 1 and the target the rest.
struct SplitRecon {
  std::vector<ReconSlice> input;
  std::vector<ReconSlice> target;
  std::vector<std::size_t> input_angles;
  std::vector<std::size_t> target_angles;
};
SplitRecon noise2inverse_split(const ProjectionStack& thickness, std::size_t x);

struct TrainConfig {
  ModelConfig model;
  double initial_lr = 1e-3;
  std::size_t patience = 5;
  double lr_factor = 0.5;
  GammaMode gamma_mode = GammaMode::ramp;
  double gamma = 0.0;  // fixed mode value
  LossVariant variant = LossVariant::nei_only;
  SampleOptions sample;
  std::size_t batch = 1;
  std::size_t accumulation = 4;
  std::size_t max_epochs = 100;
  std::size_t samples_per_epoch = 0;  // 0: every training window each epoch
  RngSeed seed{};
  void validate() const;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  double gamma = 0.0;
  std::string to_json() const;
};

/// Training data: 14-row intensity windows for Neighbor2Inverse, or fixed input/target
/// slice pairs (Noise2Inverse baseline) trained with the nei loss.
struct Dataset {
  std::vector<ProjectionStack> train_windows;
  std::vector<ProjectionStack> val_windows;
  std::vector<std::pair<ReconSlice, ReconSlice>> train_pairs;
  std::vector<std::pair<ReconSlice, ReconSlice>> val_pairs;
  PhysicsParams physics;
};

struct TrainResult {
  Denoiser model;  // lowest validation loss
  std::size_t best_epoch = 0;
  std::vector<EpochLog> log;
};

/// Adam with plateau LR reduction on the validation loss (nei term), fresh subsampling
/// masks every epoch, best-validation checkpoint selection. Throws NumericError on a
/// non-finite loss.
TrainResult train(const Dataset& data, const TrainConfig& config,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

/// Per-slice inference with reflective padding to the model's divisibility.
std::vector<ReconSlice> denoise_volume(const Denoiser& model, const std::vector<ReconSlice>& slices);

/// Reconstructs every detector row of a thickness stack.
std::vector<ReconSlice> reconstruct_rows(const ProjectionStack& thickness);

}  // namespace n2i

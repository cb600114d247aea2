#include "n2i/learn.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>

#include "n2i/errors.hpp"
#include "n2i/pad.hpp"
#include "n2i/parallel.hpp"
#include "n2i/phase.hpp"
#include "n2i/transforms.hpp"

namespace n2i {

LossVariant parse_loss_variant(const std::string& name) {
  if (name == "nei_only") return LossVariant::nei_only;
  if (name == "nei_plus_reg") return LossVariant::nei_plus_reg;
  if (name == "orig_sino") return LossVariant::orig_sino;
  if (name == "virt_sino") return LossVariant::virt_sino;
  throw ConfigError("unknown loss variant '" + name + "'");
}

std::string to_string(LossVariant v) {
  switch (v) {
    case LossVariant::nei_only: return "nei_only";
    case LossVariant::nei_plus_reg: return "nei_plus_reg";
    case LossVariant::orig_sino: return "orig_sino";
    case LossVariant::virt_sino: return "virt_sino";
  }
  return "?";
}

GammaMode parse_gamma_mode(const std::string& name) {
  if (name == "ramp") return GammaMode::ramp;
  if (name == "fixed") return GammaMode::fixed;
  if (name == "balanced") return GammaMode::balanced;
  throw ConfigError("unknown gamma mode '" + name + "'");
}

SubsampleDomain parse_subsample_domain(const std::string& name) {
  if (name == "projection") return SubsampleDomain::projection_ab;
  if (name == "sinogram") return SubsampleDomain::sinogram_aphi;
  throw ConfigError("unknown subsample domain '" + name + "'");
}

std::string to_string(SubsampleDomain d) {
  return d == SubsampleDomain::projection_ab ? "projection" : "sinogram";
}

namespace {

Image difference(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw Error("shape mismatch");
  Image out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.values()[i] = a.values()[i] - b.values()[i];
  return out;
}

void add_scaled(Image& dst, const Image& src, double s) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst.values()[i] += s * src.values()[i];
}

Image scaled(const Image& src, double s) {
  Image out = src;
  for (double& v : out.values()) v *= s;
  return out;
}

}  // namespace

TrainingSample make_training_sample(const ProjectionStack& window, const PhysicsParams& physics,
                                    const SampleOptions& options, RngSeed seed) {
  if (window.n_b() != kWindowRows) {
    throw Error("make_training_sample: expected " + std::to_string(kWindowRows) +
                " detector rows, got " + std::to_string(window.n_b()));
  }
  if (window.n_a() % 2 != 0) throw Error("make_training_sample: odd detector width");
  if (options.domain == SubsampleDomain::sinogram_aphi && window.n_phi() % 2 != 0) {
    throw Error("make_training_sample: odd number of angles");
  }
  window.validate_intensities();

  const bool proj = options.domain == SubsampleDomain::projection_ab;
  const SubsampledStacks sub = subsample_stack(window, options.domain, seed);
  const EdgePadding half_pad{options.retrieval_pad.a / 2,
                             proj ? options.retrieval_pad.b / 2 : options.retrieval_pad.b};
  const ProjectionStack t1 = retrieve_stack(sub.first, physics, half_pad);
  const ProjectionStack t2 = retrieve_stack(sub.second, physics, half_pad);
  const std::size_t row = proj ? kCentralSubRow : kFullresRow;

  TrainingSample s;
  s.domain = options.domain;
  s.input = fbp_reconstruct(extract_sinogram(t1, row));
  s.target = fbp_reconstruct(extract_sinogram(t2, row));
  s.raw_row_g2 = sub.second.data.middle_slice(row);
  s.angles = window.angles;
  s.sub_angles = sub.first.angles;
  s.physics = physics;
  s.physics.row_pitch = sub.first.effective_row_pitch();
  s.physics.pixel_pitch = sub.first.pixel_pitch;
  s.forward_pad = options.forward_pad;
  if (proj) {
    s.masks = restrict_mask(sub.masks, kFullresRow + 1);
  } else {
    s.masks = {sub.masks[kFullresRow]};
  }
  if (options.with_fullres) {
    const ProjectionStack tf = retrieve_stack(window, physics, options.retrieval_pad);
    s.fullres_rows.push_back(fbp_reconstruct(extract_sinogram(tf, kFullresRow)));
    if (proj) s.fullres_rows.push_back(fbp_reconstruct(extract_sinogram(tf, kFullresRow + 1)));
  }
  return s;
}

double loss_nei(const ReconSlice& pred, const ReconSlice& target) {
  if (!pred.data.same_shape(target.data)) throw Error("loss_nei: shape mismatch");
  return mean_squared_difference(pred.data, target.data);
}

CorrectionRecon correction_recon(const std::vector<ReconSlice>& rows,
                                 const TrainingSample& sample) {
  const bool proj = sample.domain == SubsampleDomain::projection_ab;
  if (rows.size() != (proj ? 2u : 1u)) throw Error("correction_recon: wrong number of rows");
  if (sample.masks.empty()) throw Error("correction_recon: no masks");
  const std::size_t n = rows[0].n();
  const double pitch = rows[0].pixel_pitch;
  CorrectionRecon out;
  if (proj) {
    if (sample.masks.size() != sample.angles.size() || sample.masks[0].cell_cols * 2 != n) {
      throw Error("correction_recon: mask misalignment");
    }
    const Sinogram s7 = radon_forward(rows[0], sample.angles);
    const Sinogram s8 = radon_forward(rows[1], sample.angles);
    Sinogram g1{Image(sample.angles.size(), n / 2), sample.angles, 2 * pitch};
    Sinogram g2 = g1;
    Image band(2, n);
    for (std::size_t p = 0; p < sample.angles.size(); ++p) {
      std::copy(s7.data.row(p).begin(), s7.data.row(p).end(), band.row(0).begin());
      std::copy(s8.data.row(p).begin(), s8.data.row(p).end(), band.row(1).begin());
      const SubsampledPair pair = apply_mask(band, sample.masks[p]);
      std::copy(pair.g1.row(0).begin(), pair.g1.row(0).end(), g1.data.row(p).begin());
      std::copy(pair.g2.row(0).begin(), pair.g2.row(0).end(), g2.data.row(p).begin());
    }
    out.g1 = fbp_reconstruct(g1);
    out.g2 = fbp_reconstruct(g2);
  } else {
    const SubsampleMask& m = sample.masks[0];
    if (m.cell_rows * 2 != sample.angles.size() || m.cell_cols * 2 != n) {
      throw Error("correction_recon: mask misalignment");
    }
    const Sinogram s = radon_forward(rows[0], sample.angles);
    const SubsampledPair pair = apply_mask(s.data, m);
    out.g1 = fbp_reconstruct(Sinogram{pair.g1, sample.sub_angles, 2 * pitch});
    out.g2 = fbp_reconstruct(Sinogram{pair.g2, sample.sub_angles, 2 * pitch});
  }
  return out;
}

namespace {

Image reg_residual(const ReconSlice& pred, const TrainingSample& sample,
                   const CorrectionRecon& c) {
  if (!pred.data.same_shape(sample.target.data) || !pred.data.same_shape(c.g1.data)) {
    throw Error("reg_term: shape mismatch");
  }
  Image r(pred.data.rows(), pred.data.cols());
  for (std::size_t i = 0; i < r.size(); ++i) {
    r.values()[i] = (pred.data.values()[i] - sample.target.data.values()[i]) -
                    (c.g1.data.values()[i] - c.g2.data.values()[i]);
  }
  return r;
}

}  // namespace

double reg_term(const ReconSlice& pred, const TrainingSample& sample,
                const std::vector<ReconSlice>& denoised_rows) {
  return mean_square(reg_residual(pred, sample, correction_recon(denoised_rows, sample)));
}

RegGrad reg_term_grad(const ReconSlice& pred, const TrainingSample& sample,
                      const std::vector<ReconSlice>& rows) {
  const Image r = reg_residual(pred, sample, correction_recon(rows, sample));
  RegGrad out;
  out.value = mean_square(r);
  const Image dr = scaled(r, 2.0 / static_cast<double>(r.size()));
  out.d_pred = dr;

  const double sub_pitch = pred.pixel_pitch;
  const bool proj = sample.domain == SubsampleDomain::projection_ab;
  const std::vector<double>& sino_angles = proj ? sample.angles : sample.sub_angles;
  const Sinogram dg1 = fbp_adjoint(ReconSlice{scaled(dr, -1.0), sub_pitch}, sino_angles);
  const Sinogram dg2 = fbp_adjoint(ReconSlice{dr, sub_pitch}, sino_angles);
  const std::size_t n = rows[0].n();
  const double pitch = rows[0].pixel_pitch;
  if (proj) {
    Sinogram d7{Image(sample.angles.size(), n), sample.angles, pitch};
    Sinogram d8 = d7;
    Image a(1, n / 2), b(1, n / 2);
    for (std::size_t p = 0; p < sample.angles.size(); ++p) {
      std::copy(dg1.data.row(p).begin(), dg1.data.row(p).end(), a.row(0).begin());
      std::copy(dg2.data.row(p).begin(), dg2.data.row(p).end(), b.row(0).begin());
      const Image band = apply_mask_adjoint(a, b, sample.masks[p]);
      std::copy(band.row(0).begin(), band.row(0).end(), d7.data.row(p).begin());
      std::copy(band.row(1).begin(), band.row(1).end(), d8.data.row(p).begin());
    }
    out.d_rows.push_back(backproject(d7, n).data);
    out.d_rows.push_back(backproject(d8, n).data);
  } else {
    const Sinogram ds{apply_mask_adjoint(dg1.data, dg2.data, sample.masks[0]), sample.angles,
                      pitch};
    out.d_rows.push_back(backproject(ds, n).data);
  }
  return out;
}

double loss_reg_term(const Denoiser& model, const ReconSlice& pred,
                     const TrainingSample& sample) {
  std::vector<ReconSlice> rows;
  for (const auto& r : sample.fullres_rows) {
    rows.push_back({model.forward(r.data), r.pixel_pitch});
  }
  return reg_term(pred, sample, rows);
}

namespace {

PhysicsParams slice_grid(const ReconSlice& slice, const PhysicsParams& physics) {
  PhysicsParams p = physics;
  p.row_pitch = physics.effective_row_pitch();
  p.pixel_pitch = slice.pixel_pitch;
  return p;
}

Sinogram padded_projection(const ReconSlice& slice, std::span<const double> angles,
                           std::size_t pad_a) {
  const ReconSlice padded{pad_replicate(slice.data, pad_a, pad_a, pad_a, pad_a),
                          slice.pixel_pitch};
  return radon_forward(padded, angles, padded.n());
}

}  // namespace

Image virtual_sinogram(const ReconSlice& slice, std::span<const double> angles,
                       const PhysicsParams& physics, EdgePadding pad) {
  const PhysicsParams params = slice_grid(slice, physics);
  const Sinogram sino = padded_projection(slice, angles, pad.a);
  const std::size_t n = slice.n();
  Image out(angles.size(), n);
  parallel_for(angles.size(), [&](std::size_t p) {
    const Image band = row_to_band(crop(sino.data, p, 0, 1, sino.n_a()), pad.b, 0);
    const Image intensity = phase_propagate_forward(band, params);
    const auto src = intensity.row(pad.b);
    std::copy(src.begin() + static_cast<std::ptrdiff_t>(pad.a),
              src.begin() + static_cast<std::ptrdiff_t>(pad.a + n), out.row(p).begin());
  });
  return out;
}

Image virtual_sinogram_vjp(const ReconSlice& slice, const Image& grad,
                           std::span<const double> angles, const PhysicsParams& physics,
                           EdgePadding pad) {
  const PhysicsParams params = slice_grid(slice, physics);
  const Sinogram sino = padded_projection(slice, angles, pad.a);
  const std::size_t n = slice.n();
  if (grad.rows() != angles.size() || grad.cols() != n) {
    throw Error("virtual_sinogram_vjp: gradient shape mismatch");
  }
  Sinogram dsino{Image(angles.size(), sino.n_a()), {angles.begin(), angles.end()},
                 slice.pixel_pitch};
  parallel_for(angles.size(), [&](std::size_t p) {
    const Image band = row_to_band(crop(sino.data, p, 0, 1, sino.n_a()), pad.b, 0);
    Image g(band.rows(), band.cols());
    for (std::size_t j = 0; j < n; ++j) g(pad.b, pad.a + j) = grad(p, j);
    const Image dband = phase_propagate_forward_vjp(band, g, params);
    const Image drow = pad_replicate_adjoint(dband, 0, 0, pad.b, pad.b);
    std::copy(drow.row(0).begin(), drow.row(0).end(), dsino.data.row(p).begin());
  });
  const Image dpadded = backproject(dsino, sino.n_a()).data;
  return pad_replicate_adjoint(dpadded, pad.a, pad.a, pad.a, pad.a);
}

double loss_orig_sino(const ReconSlice& pred, const Image& raw_row_g2,
                      std::span<const double> angles, const PhysicsParams& physics,
                      EdgePadding pad) {
  return mean_squared_difference(virtual_sinogram(pred, angles, physics, pad), raw_row_g2);
}

LossGrad loss_orig_sino_grad(const ReconSlice& pred, const Image& raw_row_g2,
                             std::span<const double> angles, const PhysicsParams& physics,
                             EdgePadding pad) {
  const Image r = difference(virtual_sinogram(pred, angles, physics, pad), raw_row_g2);
  return {mean_square(r), virtual_sinogram_vjp(pred, scaled(r, 2.0 / static_cast<double>(r.size())),
                                               angles, physics, pad)};
}

double loss_virt_sino(const ReconSlice& pred, const ReconSlice& target,
                      std::span<const double> angles, const PhysicsParams& physics,
                      EdgePadding pad) {
  if (!pred.data.same_shape(target.data)) throw Error("loss_virt_sino: shape mismatch");
  return mean_squared_difference(virtual_sinogram(pred, angles, physics, pad),
                                 virtual_sinogram(target, angles, physics, pad));
}

LossGrad loss_virt_sino_grad(const ReconSlice& pred, const ReconSlice& target,
                             std::span<const double> angles, const PhysicsParams& physics,
                             EdgePadding pad) {
  if (!pred.data.same_shape(target.data)) throw Error("loss_virt_sino: shape mismatch");
  const Image r = difference(virtual_sinogram(pred, angles, physics, pad),
                             virtual_sinogram(target, angles, physics, pad));
  return {mean_square(r), virtual_sinogram_vjp(pred, scaled(r, 2.0 / static_cast<double>(r.size())),
                                               angles, physics, pad)};
}

const std::vector<double>& fidelity_angles(const TrainingSample& sample) {
  return sample.domain == SubsampleDomain::projection_ab ? sample.angles : sample.sub_angles;
}

N2nLoss loss_n2n_projection(const Denoiser& model, const Image& projection,
                            const SubsampleMask& mask, double gamma, std::span<double> grad) {
  const SubsampledPair pair = apply_mask(projection, mask);
  Denoiser::Cache c1, cp;
  const Image y1 = model.forward(pair.g1, c1);
  const Image fp = model.forward(projection, cp);
  const SubsampledPair fpm = apply_mask(fp, mask);
  const std::size_t n = y1.size();
  Image d1(y1.rows(), y1.cols()), r(y1.rows(), y1.cols());
  for (std::size_t i = 0; i < n; ++i) {
    d1.values()[i] = y1.values()[i] - pair.g2.values()[i];
    // Grouped so that f = identity cancels exactly.
    r.values()[i] = (y1.values()[i] - fpm.g1.values()[i]) -
                    (pair.g2.values()[i] - fpm.g2.values()[i]);
  }
  N2nLoss out;
  out.nei = mean_square(d1);
  out.reg = mean_square(r);
  out.total = out.nei + gamma * out.reg;
  if (!grad.empty()) {
    const double s = 2.0 / static_cast<double>(n);
    Image dy1(y1.rows(), y1.cols()), dfg1(y1.rows(), y1.cols()), dfg2(y1.rows(), y1.cols());
    for (std::size_t i = 0; i < n; ++i) {
      dy1.values()[i] = s * d1.values()[i] + gamma * s * r.values()[i];
      dfg1.values()[i] = -gamma * s * r.values()[i];
      dfg2.values()[i] = gamma * s * r.values()[i];
    }
    model.backward(c1, dy1, grad);
    model.backward(cp, apply_mask_adjoint(dfg1, dfg2, mask), grad);
  }
  return out;
}

LossParts sample_loss(const Denoiser& model, const TrainingSample& sample, LossVariant variant,
                      double gamma, std::span<double> grad) {
  const bool want_grad = !grad.empty();
  Denoiser::Cache cache;
  const ReconSlice pred{model.forward(sample.input.data, cache), sample.input.pixel_pitch};
  LossParts parts;
  parts.nei = loss_nei(pred, sample.target);
  Image d_pred = scaled(difference(pred.data, sample.target.data),
                        2.0 / static_cast<double>(pred.data.size()));
  switch (variant) {
    case LossVariant::nei_only:
      break;
    case LossVariant::nei_plus_reg: {
      if (sample.fullres_rows.empty()) throw Error("sample_loss: sample lacks full-res rows");
      std::vector<Denoiser::Cache> caches(sample.fullres_rows.size());
      std::vector<ReconSlice> rows;
      for (std::size_t k = 0; k < sample.fullres_rows.size(); ++k) {
        const auto& r = sample.fullres_rows[k];
        rows.push_back({model.forward(r.data, caches[k]), r.pixel_pitch});
      }
      if (want_grad) {
        const RegGrad rg = reg_term_grad(pred, sample, rows);
        parts.term = rg.value;
        add_scaled(d_pred, rg.d_pred, gamma);
        for (std::size_t k = 0; k < rows.size(); ++k) {
          model.backward(caches[k], scaled(rg.d_rows[k], gamma), grad);
        }
      } else {
        parts.term = reg_term(pred, sample, rows);
      }
      break;
    }
    case LossVariant::orig_sino:
    case LossVariant::virt_sino: {
      const auto& angles = fidelity_angles(sample);
      const bool orig = variant == LossVariant::orig_sino;
      if (want_grad) {
        const LossGrad lg =
            orig ? loss_orig_sino_grad(pred, sample.raw_row_g2, angles, sample.physics,
                                       sample.forward_pad)
                 : loss_virt_sino_grad(pred, sample.target, angles, sample.physics,
                                       sample.forward_pad);
        parts.term = lg.value;
        add_scaled(d_pred, lg.grad, gamma);
      } else {
        parts.term = orig ? loss_orig_sino(pred, sample.raw_row_g2, angles, sample.physics,
                                           sample.forward_pad)
                          : loss_virt_sino(pred, sample.target, angles, sample.physics,
                                           sample.forward_pad);
      }
      break;
    }
  }
  parts.total = parts.nei + gamma * parts.term;
  if (want_grad) model.backward(cache, d_pred, grad);
  return parts;
}

double gamma_schedule(std::size_t epoch, GammaMode mode, double fixed_gamma) {
  if (mode == GammaMode::ramp) {
    return 2.0 * static_cast<double>(std::min<std::size_t>(epoch, 100)) / 100.0;
  }
  return fixed_gamma;
}

double default_fixed_gamma(LossVariant variant) {
  switch (variant) {
    case LossVariant::orig_sino: return 0.1;
    case LossVariant::virt_sino: return 50.0;
    case LossVariant::nei_plus_reg: return 1.0;
    case LossVariant::nei_only: return 0.0;
  }
  return 0.0;
}

SplitRecon noise2inverse_split(const ProjectionStack& thickness, std::size_t x) {
  if (x < 1) throw Error("noise2inverse_split: x must be >= 1");
  if (thickness.n_phi() % (x + 1) != 0) {
    throw Error("noise2inverse_split: " + std::to_string(thickness.n_phi()) +
                " angles not divisible by " + std::to_string(x + 1));
  }
  SplitRecon out;
  for (std::size_t p = 0; p < thickness.n_phi(); ++p) {
    (p % (x + 1) == x ? out.target_angles : out.input_angles).push_back(p);
  }
  auto subset = [&](const Sinogram& s, const std::vector<std::size_t>& idx) {
    Sinogram o{Image(idx.size(), s.n_a()), {}, s.pixel_pitch};
    for (std::size_t i = 0; i < idx.size(); ++i) {
      std::copy(s.data.row(idx[i]).begin(), s.data.row(idx[i]).end(), o.data.row(i).begin());
      o.angles.push_back(s.angles[idx[i]]);
    }
    return o;
  };
  out.input.resize(thickness.n_b());
  out.target.resize(thickness.n_b());
  parallel_for(thickness.n_b(), [&](std::size_t b) {
    const Sinogram s = extract_sinogram(thickness, b);
    out.input[b] = fbp_reconstruct(subset(s, out.input_angles));
    out.target[b] = fbp_reconstruct(subset(s, out.target_angles));
  });
  return out;
}

void TrainConfig::validate() const {
  if (initial_lr <= 0.0 || !std::isfinite(initial_lr)) throw ConfigError("train: lr must be > 0");
  if (patience < 1) throw ConfigError("train: patience must be >= 1");
  if (!(lr_factor > 0.0 && lr_factor < 1.0)) throw ConfigError("train: lr_factor must be in (0, 1)");
  if (gamma < 0.0) throw ConfigError("train: gamma must be >= 0");
  if (batch < 1 || accumulation < 1) throw ConfigError("train: batch and accumulation must be >= 1");
  if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
}

std::string EpochLog::to_json() const {
  const nlohmann::json j = {{"epoch", epoch}, {"train_loss", train_loss}, {"val_loss", val_loss},
                            {"lr", lr},       {"gamma", gamma}};
  return j.dump();
}

namespace {

constexpr std::uint64_t kModelStream = 0x6d6f64656cULL;
constexpr std::uint64_t kValStream = 0x76616cULL;
constexpr std::uint64_t kEpochStream = 0x65706f6368ULL;

struct Pair {
  ReconSlice input, target;
};

}  // namespace

TrainResult train(const Dataset& data, const TrainConfig& config,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  config.validate();
  const bool pairs = !data.train_pairs.empty();
  if (pairs ? data.val_pairs.empty() : (data.train_windows.empty() || data.val_windows.empty())) {
    throw ConfigError("train: need non-empty training and validation sets");
  }
  if (pairs && config.variant != LossVariant::nei_only) {
    throw ConfigError("train: slice pairs only support the nei_only loss");
  }

  Denoiser model(config.model);
  model.initialize(config.seed.derive(kModelStream));
  Adam opt(model.parameter_count(), config.initial_lr);
  PlateauScheduler sched(config.patience, config.lr_factor);
  double lr = config.initial_lr;

  SampleOptions train_opts = config.sample;
  train_opts.with_fullres = config.variant == LossVariant::nei_plus_reg;
  SampleOptions val_opts = config.sample;
  val_opts.with_fullres = false;

  std::vector<Pair> val;
  if (pairs) {
    for (const auto& [in, tg] : data.val_pairs) val.push_back({in, tg});
  } else {
    for (std::size_t i = 0; i < data.val_windows.size(); ++i) {
      const TrainingSample s = make_training_sample(data.val_windows[i], data.physics, val_opts,
                                                    config.seed.derive(kValStream).derive(i));
      val.push_back({s.input, s.target});
    }
  }
  auto validation_loss = [&](const Denoiser& m) {
    double sum = 0.0;
    for (const auto& v : val) sum += loss_nei({m.forward(v.input.data), v.input.pixel_pitch}, v.target);
    return sum / static_cast<double>(val.size());
  };

  const std::size_t n_train = pairs ? data.train_pairs.size() : data.train_windows.size();
  const std::size_t per_epoch =
      config.samples_per_epoch == 0 ? n_train : std::min(config.samples_per_epoch, n_train);
  const std::size_t group = config.batch * config.accumulation;

  TrainResult result{model, 0, {}};
  double best = std::numeric_limits<double>::infinity();
  double balanced_gamma = -1.0;
  std::vector<double> grad(model.parameter_count(), 0.0);

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    const RngSeed epoch_seed = config.seed.derive(kEpochStream).derive(epoch);
    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), 0);
    CounterRng shuffle_rng(epoch_seed);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    order.resize(per_epoch);

    auto build = [&](std::size_t k) {
      if (pairs) {
        TrainingSample s;
        s.input = data.train_pairs[order[k]].first;
        s.target = data.train_pairs[order[k]].second;
        return s;
      }
      return make_training_sample(data.train_windows[order[k]], data.physics, train_opts,
                                  epoch_seed.derive(order[k]));
    };

    double gamma = gamma_schedule(epoch, config.gamma_mode, config.gamma);
    std::vector<TrainingSample> samples;
    if (config.gamma_mode == GammaMode::balanced) {
      if (balanced_gamma < 0.0) {
        // Weight so that both terms contribute equally under the initial model.
        double nei = 0.0, term = 0.0;
        for (std::size_t k = 0; k < per_epoch; ++k) {
          samples.push_back(build(k));
          const LossParts p = sample_loss(model, samples.back(), config.variant, 1.0);
          nei += p.nei;
          term += p.term;
        }
        balanced_gamma = term > 0.0 ? nei / term : 0.0;
        spdlog::info("balanced gamma = {:.6g}", balanced_gamma);
      }
      gamma = balanced_gamma;
    }

    double total = 0.0;
    std::size_t in_group = 0;
    auto apply_update = [&]() {
      if (in_group == 0) return;
      const double inv = 1.0 / static_cast<double>(in_group);
      for (double& g : grad) g *= inv;
      opt.step(model.parameters(), grad);
      std::fill(grad.begin(), grad.end(), 0.0);
      in_group = 0;
    };
    for (std::size_t k = 0; k < per_epoch; ++k) {
      const TrainingSample s = samples.empty() ? build(k) : std::move(samples[k]);
      const LossParts p = sample_loss(model, s, config.variant, gamma, grad);
      if (!std::isfinite(p.total)) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) +
                           ": non-finite loss (nei " + std::to_string(p.nei) + ", term " +
                           std::to_string(p.term) + ")");
      }
      total += p.total;
      if (++in_group == group) apply_update();
    }
    apply_update();

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = total / static_cast<double>(per_epoch);
    entry.val_loss = validation_loss(model);
    entry.lr = lr;
    entry.gamma = gamma;
    if (!std::isfinite(entry.val_loss)) {
      throw NumericError("training diverged at epoch " + std::to_string(epoch) +
                         ": non-finite validation loss");
    }
    if (entry.val_loss < best) {
      best = entry.val_loss;
      result.model = model;
      result.best_epoch = epoch;
    }
    lr = sched.observe(entry.val_loss, lr);
    opt.set_learning_rate(lr);
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  return result;
}

std::vector<ReconSlice> denoise_volume(const Denoiser& model,
                                       const std::vector<ReconSlice>& slices) {
  std::vector<ReconSlice> out(slices.size());
  parallel_for(slices.size(), [&](std::size_t i) {
    out[i] = {denoise_slice(model, slices[i].data), slices[i].pixel_pitch};
  });
  return out;
}

std::vector<ReconSlice> reconstruct_rows(const ProjectionStack& thickness) {
  std::vector<ReconSlice> out(thickness.n_b());
  parallel_for(thickness.n_b(), [&](std::size_t b) {
    out[b] = fbp_reconstruct(extract_sinogram(thickness, b));
  });
  return out;
}

}  // namespace n2i

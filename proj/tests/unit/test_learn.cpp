#include <doctest.h>

#include <cmath>
#include <functional>

#include "fixtures.hpp"
#include "n2i/errors.hpp"
#include "n2i/learn.hpp"
#include "n2i/simulate.hpp"

using namespace n2i;

namespace {

ReconSlice slice_of(const Image& img, double pitch = 2e-4) { return {img, pitch}; }

Image ramp_image(std::size_t r, std::size_t c, double f) {
  Image img(r, c);
  for (std::size_t i = 0; i < img.size(); ++i) img.values()[i] = std::sin(f * i + 0.1);
  return img;
}

SampleOptions small_options(SubsampleDomain domain) {
  SampleOptions o;
  o.domain = domain;
  o.retrieval_pad = {16, 6};
  o.forward_pad = {8, 3};
  return o;
}

// Largest deviation between the analytic gradient and central differences over all
// parameters, relative to the largest gradient component.
double gradient_error(Denoiser model, const std::function<double(const Denoiser&)>& loss,
                      std::span<const double> grad) {
  const double h = 1e-6;
  double worst = 0.0, scale = 0.0;
  for (std::size_t k = 0; k < model.parameter_count(); ++k) {
    const double p = model.parameters()[k];
    model.parameters()[k] = p + h;
    const double up = loss(model);
    model.parameters()[k] = p - h;
    const double down = loss(model);
    model.parameters()[k] = p;
    const double fd = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(fd - grad[k]));
    scale = std::max(scale, std::abs(grad[k]));
  }
  return worst / scale;
}

}  // namespace

TEST_CASE("nei loss arithmetic") {
  const ReconSlice a = slice_of(ramp_image(8, 8, 0.3)), b = slice_of(ramp_image(8, 8, 0.7));
  CHECK(loss_nei(a, a) == 0.0);
  ReconSlice shifted = a;
  for (double& v : shifted.data.values()) v += 1.0;
  CHECK(loss_nei(shifted, a) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(loss_nei(a, b) == loss_nei(b, a));
  CHECK_THROWS_AS(loss_nei(a, slice_of(Image(8, 6))), Error);
}

TEST_CASE("gamma schedule") {
  CHECK(gamma_schedule(0, GammaMode::ramp) == 0.0);
  CHECK(gamma_schedule(50, GammaMode::ramp) == 1.0);
  CHECK(gamma_schedule(100, GammaMode::ramp) == 2.0);
  CHECK(gamma_schedule(250, GammaMode::ramp) == 2.0);
  CHECK(gamma_schedule(7, GammaMode::fixed, 0.1) == 0.1);
  CHECK(default_fixed_gamma(LossVariant::orig_sino) == 0.1);
  CHECK(default_fixed_gamma(LossVariant::virt_sino) == 50.0);
  CHECK(parse_loss_variant("virt_sino") == LossVariant::virt_sino);
  CHECK_THROWS_AS(parse_loss_variant("l1"), ConfigError);
  CHECK_THROWS_AS(parse_gamma_mode("cosine"), ConfigError);
}

TEST_CASE("training samples") {
  const ProjectionStack w = fixture::blob_window(64, 32, 1.0);
  const SampleOptions o = small_options(SubsampleDomain::projection_ab);
  const TrainingSample s = make_training_sample(w, {}, o, {4, 0});
  CHECK(s.input.n() == 32);
  CHECK(s.target.n() == 32);
  CHECK(s.input.pixel_pitch == 2e-4);
  CHECK(s.raw_row_g2.rows() == 32);
  CHECK(s.raw_row_g2.cols() == 32);
  REQUIRE(s.fullres_rows.size() == 2);
  CHECK(s.fullres_rows[0].n() == 64);
  CHECK(s.masks.size() == 32);

  const TrainingSample again = make_training_sample(w, {}, o, {4, 0});
  CHECK(again.input.data == s.input.data);
  CHECK(again.target.data == s.target.data);
  CHECK_FALSE(make_training_sample(w, {}, o, {5, 0}).input.data == s.input.data);

  const TrainingSample sino =
      make_training_sample(w, {}, small_options(SubsampleDomain::sinogram_aphi), {4, 0});
  CHECK(sino.input.n() == 32);
  CHECK(sino.sub_angles.size() == 16);
  CHECK(sino.fullres_rows.size() == 1);

  ProjectionStack short_window{Stack(32, 12, 64, 0.9), uniform_angles(32), 1e-4, 0.0};
  CHECK_THROWS_AS(make_training_sample(short_window, {}, o, {}), Error);
  ProjectionStack dark = w;
  dark.data(3, 2, 1) = 0.0;
  CHECK_THROWS_AS(make_training_sample(dark, {}, o, {}), NumericError);
}

TEST_CASE("noiseless samples preserve the signal") {
  // Smooth enough that the half-pixel jitter between the two paths stays below 2%.
  const ProjectionStack w = fixture::blob_window(256, 1440, 2.5);
  SampleOptions o;
  o.retrieval_pad = {54, 8};
  o.with_fullres = false;
  const TrainingSample s = make_training_sample(w, {}, o, {2, 0});
  CHECK(std::sqrt(mean_squared_difference(s.input.data, s.target.data) /
                  mean_square(s.input.data)) < 0.02);
}

TEST_CASE("noise of the two paths is nearly uncorrelated") {
  const ProjectionStack clean = fixture::blob_window(128, 360, 2.0);
  NoiseParams np;
  np.alpha = 1e4;
  np.seed = {31, 0};
  const ProjectionStack noisy = apply_noise(clean, np);
  SampleOptions o;
  o.retrieval_pad = {27, 8};
  o.with_fullres = false;
  std::vector<double> a, b;
  for (std::uint64_t k = 0; k < 4; ++k) {
    const TrainingSample c = make_training_sample(clean, {}, o, {k, 0});
    const TrainingSample n = make_training_sample(noisy, {}, o, {k, 0});
    for (std::size_t i = 0; i < c.input.data.size(); ++i) {
      a.push_back(n.input.data.values()[i] - c.input.data.values()[i]);
      b.push_back(n.target.data.values()[i] - c.target.data.values()[i]);
    }
  }
  CHECK(std::abs(correlation(a, b)) < 0.05);
}

TEST_CASE("regularizer vanishes for the identity on noiseless data") {
  const ProjectionStack w = fixture::blob_window(256, 720, 2.0);
  Denoiser identity(fixture::tiny_model());
  identity.zero_parameters();
  for (auto domain : {SubsampleDomain::projection_ab, SubsampleDomain::sinogram_aphi}) {
    SampleOptions o;
    o.domain = domain;
    o.retrieval_pad = {54, 8};
    const TrainingSample s = make_training_sample(w, {}, o, {9, 0});
    const double term = loss_reg_term(identity, s.input, s);
    CHECK(term / mean_square(s.target.data) < 1e-3);
  }
}

TEST_CASE("regularizer of the zero map") {
  const TrainingSample s = make_training_sample(fixture::blob_window(64, 32, 1.0), {},
                                                small_options(SubsampleDomain::projection_ab),
                                                {6, 0});
  ModelConfig cfg = fixture::tiny_model();
  cfg.residual = false;
  Denoiser zero(cfg);
  zero.zero_parameters();
  const ReconSlice pred{zero.forward(s.input.data), s.input.pixel_pitch};
  CHECK(loss_reg_term(zero, pred, s) == mean_square(s.target.data));
}

TEST_CASE("neighbor2neighbor regularizer cancels exactly for the identity") {
  Denoiser identity(fixture::tiny_model());
  identity.zero_parameters();
  const Image p = ramp_image(32, 48, 0.37);
  const SubsampleMask m = make_mask(32, 48, SubsampleDomain::projection_ab, {3, 0});
  const N2nLoss l = loss_n2n_projection(identity, p, m, 2.0);
  CHECK(l.reg == 0.0);
  CHECK(l.nei > 0.0);
  CHECK(l.total == l.nei);
}

TEST_CASE("fidelity terms") {
  const PhysicsParams physics;
  const ProjectionStack w = fixture::blob_window(64, 32, 1.0, physics);
  const TrainingSample s =
      make_training_sample(w, physics, small_options(SubsampleDomain::projection_ab), {8, 0});
  const auto& angles = fidelity_angles(s);
  CHECK(loss_virt_sino(s.target, s.target, angles, s.physics, s.forward_pad) == 0.0);
  CHECK(loss_virt_sino(s.input, s.target, angles, s.physics, s.forward_pad) > 0.0);

  // The ground-truth slice at the central cell row explains the measured row.
  auto half_res = [](const Image& full) {
    Image half(full.rows() / 2, full.cols() / 2);
    for (std::size_t i = 0; i < half.rows(); ++i)
      for (std::size_t j = 0; j < half.cols(); ++j)
        half(i, j) = 0.25 * (full(2 * i, 2 * j) + full(2 * i + 1, 2 * j) +
                             full(2 * i, 2 * j + 1) + full(2 * i + 1, 2 * j + 1));
    return half;
  };
  const ReconSlice gt{half_res(oracle::blob_slice(64, 0.0, oracle::smooth_blobs(1.0))),
                      s.input.pixel_pitch};
  const double fit = loss_orig_sino(gt, s.raw_row_g2, angles, s.physics, s.forward_pad);
  CHECK(fit / mean_square(s.raw_row_g2) < 1e-4);

  // Mass outside the field of view never reaches the slice, so even the exact in-field
  // density leaves a residual well above the subsampling jitter floor measured above.
  auto blobs = oracle::smooth_blobs(1.0);
  blobs.push_back({40.0, 0.0, 0.0, 10.0, 3.0});
  const ProjectionStack roi = propagate_stack(
      oracle::blob_thickness(64, 14, w.angles, physics.pixel_pitch, blobs), physics);
  const TrainingSample t =
      make_training_sample(roi, physics, small_options(SubsampleDomain::projection_ab), {8, 0});
  const ReconSlice gt_roi{half_res(oracle::blob_slice(64, 0.0, blobs)), t.input.pixel_pitch};
  const double truncated =
      loss_orig_sino(gt_roi, t.raw_row_g2, angles, t.physics, t.forward_pad);
  CHECK(truncated > 3.0 * fit);
}

TEST_CASE("loss gradients match finite differences") {
  const ProjectionStack w = fixture::blob_window(64, 24, 1.0);
  for (auto domain : {SubsampleDomain::projection_ab, SubsampleDomain::sinogram_aphi}) {
    const TrainingSample s = make_training_sample(w, {}, small_options(domain), {10, 0});
    REQUIRE(s.input.n() == 32);
    for (auto variant : {LossVariant::nei_only, LossVariant::nei_plus_reg,
                         LossVariant::orig_sino, LossVariant::virt_sino}) {
      CAPTURE(to_string(domain));
      CAPTURE(to_string(variant));
      Denoiser model(fixture::tiny_model());
      model.initialize({12, 0});
      REQUIRE(model.parameter_count() <= 1000);
      const double gamma = variant == LossVariant::virt_sino ? 50.0 : 0.7;
      std::vector<double> grad(model.parameter_count(), 0.0);
      sample_loss(model, s, variant, gamma, grad);
      const double err = gradient_error(
          model, [&](const Denoiser& m) { return sample_loss(m, s, variant, gamma).total; },
          grad);
      CHECK(err < 1e-4);
    }
  }
}

TEST_CASE("neighbor2neighbor gradient") {
  Denoiser model(fixture::tiny_model());
  model.initialize({14, 0});
  const Image p = ramp_image(32, 32, 0.21);
  const SubsampleMask m = make_mask(32, 32, SubsampleDomain::projection_ab, {15, 0});
  std::vector<double> grad(model.parameter_count(), 0.0);
  loss_n2n_projection(model, p, m, 1.5, grad);
  const double err = gradient_error(
      model, [&](const Denoiser& d) { return loss_n2n_projection(d, p, m, 1.5).total; }, grad);
  CHECK(err < 1e-4);
}

TEST_CASE("noise2inverse split") {
  const auto angles = uniform_angles(720);
  const ProjectionStack t = oracle::blob_thickness(32, 2, angles, 1e-4, oracle::smooth_blobs(0.4));
  const SplitRecon s = noise2inverse_split(t, 3);
  CHECK(s.input_angles.size() == 540);
  CHECK(s.target_angles.size() == 180);
  std::vector<int> seen(720, 0);
  for (auto i : s.input_angles) ++seen[i];
  for (auto i : s.target_angles) ++seen[i];
  for (int c : seen) CHECK(c == 1);
  CHECK(s.input.size() == 2);
  CHECK(s.target[1].n() == 32);

  const SplitRecon halves = noise2inverse_split(t, 1);
  for (auto i : halves.input_angles) CHECK(i % 2 == 0);
  for (auto i : halves.target_angles) CHECK(i % 2 == 1);
  CHECK_THROWS_AS(noise2inverse_split(t, 6), Error);
}

TEST_CASE("training is deterministic and learns") {
  NoiseParams np;
  np.alpha = 2e3;
  np.seed = {40, 0};
  Dataset data;
  for (std::size_t k = 0; k < 4; ++k) {
    auto blobs = oracle::smooth_blobs(0.5);
    blobs[0].x += 2.0 * k;
    const auto angles = uniform_angles(48);
    np.seed.stream_id = k;
    const ProjectionStack clean = propagate_stack(
        oracle::blob_thickness(32, 14, angles, 1e-4, blobs), data.physics);
    (k < 3 ? data.train_windows : data.val_windows).push_back(apply_noise(clean, np));
  }
  TrainConfig cfg;
  cfg.model = fixture::tiny_model();
  cfg.model.base_channels = 4;
  cfg.accumulation = 1;
  cfg.max_epochs = 12;
  cfg.initial_lr = 3e-3;
  cfg.sample.retrieval_pad = {8, 4};
  cfg.seed = {41, 0};
  const TrainResult a = train(data, cfg);
  const TrainResult b = train(data, cfg);
  REQUIRE(a.log.size() == 12);
  for (std::size_t e = 0; e < a.log.size(); ++e) {
    CHECK(a.log[e].train_loss == b.log[e].train_loss);
    CHECK(a.log[e].val_loss == b.log[e].val_loss);
  }
  double first = 0.0, last = 0.0;
  for (std::size_t e = 0; e < 5; ++e) {
    first += a.log[e].train_loss;
    last += a.log[a.log.size() - 1 - e].train_loss;
  }
  CHECK(last < first);
  double best = a.log[a.best_epoch].val_loss;
  for (const auto& e : a.log) CHECK(best <= e.val_loss);

  TrainConfig bad = cfg;
  bad.initial_lr = 1e250;
  bad.max_epochs = 3;
  CHECK_THROWS_AS(train(data, bad), NumericError);
  bad = cfg;
  bad.patience = 0;
  CHECK_THROWS_AS(train(data, bad), ConfigError);
  Dataset empty = data;
  empty.val_windows.clear();
  CHECK_THROWS_AS(train(empty, cfg), ConfigError);
}

TEST_CASE("volume inference") {
  Denoiser model(ModelConfig{});
  model.initialize({50, 0});
  std::vector<ReconSlice> slices = {slice_of(ramp_image(20, 20, 0.3)),
                                    slice_of(ramp_image(20, 20, 0.8)),
                                    slice_of(ramp_image(20, 20, 1.1))};
  const auto out = denoise_volume(model, slices);
  REQUIRE(out.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(out[i].data == denoise_slice(model, slices[i].data));
    for (double v : out[i].data.values()) CHECK(std::isfinite(v));
  }
  model.zero_parameters();
  CHECK(denoise_volume(model, slices)[1].data == slices[1].data);
}

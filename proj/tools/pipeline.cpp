#include "pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <spdlog/spdlog.h>

#include "artifacts.hpp"
#include "n2i/baselines.hpp"
#include "n2i/errors.hpp"
#include "n2i/learn.hpp"
#include "n2i/nn.hpp"
#include "n2i/parallel.hpp"
#include "n2i/phase.hpp"
#include "n2i/simulate.hpp"
#include "n2i/transforms.hpp"

namespace n2i::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Rect parse_rect(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 4) {
    throw ConfigError(what + ": expected [row, col, rows, cols]");
  }
  return {j[0].get<std::size_t>(), j[1].get<std::size_t>(), j[2].get<std::size_t>(),
          j[3].get<std::size_t>()};
}

ProjectionStack with_stride(ProjectionStack stack, std::size_t stride) {
  return stride > 1 ? angular_subset(stack, stride, 0) : stack;
}

PhysicsParams physics_for(const PipelineConfig& cfg, const ProjectionStack& stack) {
  PhysicsParams p = cfg.physics;
  p.pixel_pitch = stack.pixel_pitch;
  p.row_pitch = stack.row_pitch;
  return p;
}

std::string checkpoint_name(TrainMethod m) { return "model_" + to_string(m) + ".ckpt"; }
std::string denoised_name(TrainMethod m) { return "denoised_" + to_string(m) + ".n2ivol"; }

void echo_config(ArtifactStage& stage, const PipelineConfig& cfg, const std::string& command) {
  stage.text("config." + command + ".ini", cfg.effective_ini());
}

std::vector<Image> images_of(const std::vector<ReconSlice>& slices, RowRange rows) {
  std::vector<Image> out;
  for (std::size_t b = rows.begin; b < rows.end; ++b) out.push_back(slices.at(b).data);
  return out;
}

void check_rows(const std::vector<ReconSlice>& slices, RowRange rows, const std::string& key) {
  if (rows.end > slices.size()) {
    throw ConfigError(key + " ends at row " + std::to_string(rows.end) + " but the volume has " +
                      std::to_string(slices.size()) + " rows");
  }
}

// Horizontal strip of equally sized panels separated by a 4-pixel gap at the
// reference's minimum.
Image side_by_side(const std::vector<Image>& panels) {
  constexpr std::size_t kGap = 4;
  const std::size_t h = panels.front().rows(), w = panels.front().cols();
  const auto [mn, mx] = std::minmax_element(panels.front().values().begin(), panels.front().values().end());
  Image out(h, panels.size() * w + (panels.size() - 1) * kGap, *mn);
  for (std::size_t p = 0; p < panels.size(); ++p) {
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        out(r, p * (w + kGap) + c) = std::clamp(panels[p](r, c), *mn, *mx);
      }
    }
  }
  return out;
}

double quality_index_or_nan(double c, double sr) {
  if (!std::isfinite(c) || !std::isfinite(sr) || !(sr > 0)) return std::numeric_limits<double>::quiet_NaN();
  return quality_index(c, sr);
}

}  // namespace

RoiSet load_rois(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open ROI file " + path.string());
  RoiSet set;
  try {
    const json j = json::parse(in);
    for (const auto& p : j.at("pairs")) {
      set.pairs.push_back({p.value("name", "roi" + std::to_string(set.pairs.size())),
                           {parse_rect(p.at("tissue"), path.string() + " tissue"),
                            parse_rect(p.at("air"), path.string() + " air")}});
    }
    for (const auto& e : j.value("edges", json::array())) {
      EdgeRoi roi;
      roi.rect = parse_rect(e.at("rect"), path.string() + " edge");
      const auto normal = e.value("normal", std::vector<double>{1.0, 0.0});
      if (normal.size() != 2) throw ConfigError(path.string() + ": edge normal needs 2 values");
      const double len = std::hypot(normal[0], normal[1]);
      if (!(len > 0)) throw ConfigError(path.string() + ": zero edge normal");
      roi.normal_x = normal[0] / len;
      roi.normal_y = normal[1] / len;
      roi.n_profiles = e.value("profiles", std::size_t{16});
      set.edges.push_back(roi);
    }
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (set.pairs.empty()) throw ConfigError(path.string() + ": no ROI pairs");
  return set;
}

RoiSet default_rois(std::size_t n) {
  // Centres and sides on the 256 grid.
  auto scaled = [n](double row_c, double col_c, double rows, double cols) {
    const double s = static_cast<double>(n) / 256.0;
    const auto h = static_cast<std::size_t>(std::max(4.0, std::round(rows * s)));
    const auto w = static_cast<std::size_t>(std::max(4.0, std::round(cols * s)));
    return Rect{static_cast<std::size_t>(std::lround(row_c * s - h / 2.0)),
                static_cast<std::size_t>(std::lround(col_c * s - w / 2.0)), h, w};
  };
  RoiSet set;
  set.pairs.push_back({"body", {scaled(192, 128, 12, 12), scaled(83, 128, 6, 6)}});
  EdgeRoi edge;
  edge.rect = scaled(128, 236, 16, 28);
  set.edges.push_back(edge);
  return set;
}

Volume stack_volume(const ProjectionStack& stack, json meta) {
  Volume v = to_volume(stack.data, "phi,b,a", stack.pixel_pitch);
  meta["angles"] = stack.angles;
  meta["row_pitch"] = stack.row_pitch;
  v.meta = std::move(meta);
  return v;
}

ProjectionStack load_stack(const fs::path& path) {
  const Volume v = read_volume(path);
  if (v.shape.size() != 3 || v.axes != "phi,b,a") {
    throw ConfigError(path.string() + ": not a projection stack");
  }
  ProjectionStack s;
  s.data = stack_from_volume(v);
  s.angles = v.meta.value("angles", std::vector<double>{});
  s.pixel_pitch = v.pixel_pitch;
  s.row_pitch = v.meta.value("row_pitch", 0.0);
  if (s.angles.size() != s.n_phi()) throw ConfigError(path.string() + ": angle list mismatch");
  return s;
}

Volume slices_volume(const std::vector<ReconSlice>& slices, json meta) {
  if (slices.empty()) throw Error("slices_volume: no slices");
  const std::size_t n = slices.front().n();
  Stack s(slices.size(), n, n);
  for (std::size_t b = 0; b < slices.size(); ++b) s.set_plane(b, slices[b].data);
  Volume v = to_volume(s, "b,y,x", slices.front().pixel_pitch);
  v.meta = std::move(meta);
  return v;
}

std::vector<ReconSlice> load_slices(const fs::path& path) {
  const Volume v = read_volume(path);
  if (v.shape.size() != 3 || v.axes != "b,y,x") {
    throw ConfigError(path.string() + ": not a slice volume");
  }
  const Stack s = stack_from_volume(v);
  std::vector<ReconSlice> out;
  for (std::size_t b = 0; b < s.dim0(); ++b) out.push_back({s.plane(b), v.pixel_pitch});
  return out;
}

ProjectionStack row_window(const ProjectionStack& stack, std::size_t begin, std::size_t count) {
  if (begin + count > stack.n_b()) throw Error("row_window: rows out of range");
  ProjectionStack w{Stack(stack.n_phi(), count, stack.n_a()), stack.angles, stack.pixel_pitch,
                    stack.row_pitch};
  for (std::size_t p = 0; p < stack.n_phi(); ++p) {
    for (std::size_t b = 0; b < count; ++b) {
      for (std::size_t a = 0; a < stack.n_a(); ++a) w.data(p, b, a) = stack.data(p, begin + b, a);
    }
  }
  return w;
}

void cmd_simulate(const PipelineConfig& cfg) {
  PhantomSpec spec = cfg.phantom_spec.empty()
                         ? lung_phantom(cfg.size, cfg.phantom_seed().seed, cfg.texture_count)
                         : load_phantom_spec(cfg.phantom_spec);
  spec.size = cfg.size;
  spec.seed = cfg.phantom_seed();
  spec.validate();

  NoiseParams noise{cfg.alpha, cfg.sigma_g, cfg.noise_seed()};
  const auto angles = uniform_angles(cfg.angles);
  spdlog::info("simulate: n={} rows={} angles={} alpha={}", cfg.size, cfg.rows, cfg.angles, cfg.alpha);
  const Acquisition acq =
      simulate_acquisition(spec, cfg.physics, noise, angles, cfg.rows, cfg.retrieval_pad);
  const Stack truth = make_phantom(spec, cfg.rows);

  ArtifactStage stage(cfg.output_dir);
  echo_config(stage, cfg, "simulate");
  Volume gt = to_volume(truth, "b,y,x", cfg.physics.pixel_pitch);
  gt.meta = {{"primitives", expand_primitives(spec).size()}};
  stage.volume("ground_truth.n2ivol", gt);
  stage.volume("thickness.n2ivol", stack_volume(acq.thickness, {{"unit", "m"}}));
  stage.volume("clean.n2ivol", stack_volume(acq.clean));
  stage.volume("noisy.n2ivol", stack_volume(acq.noisy, {{"alpha", cfg.alpha}, {"sigma_g", cfg.sigma_g}}));

  if (cfg.exposure_sweep) {
    const auto scales = exposure_alpha_scales();
    for (std::size_t i = 0; i < scales.size(); ++i) {
      NoiseParams level = noise;
      level.alpha = cfg.alpha * scales[i];
      level.seed = cfg.noise_seed().derive(100 + i);
      const ProjectionStack noisy = apply_noise(acq.clean, level);
      stage.volume("noisy_exposure" + std::to_string(i) + ".n2ivol",
                   stack_volume(noisy, {{"alpha", level.alpha}, {"alpha_scale", scales[i]},
                                        {"sigma_g", cfg.sigma_g}}));
    }
  }
  stage.png("previews/ground_truth_row" + std::to_string(cfg.rows / 2) + ".png",
            truth.plane(cfg.rows / 2));
  stage.png("previews/noisy_projection0.png", acq.noisy.data.plane(0));
  stage.commit();
}

void cmd_reconstruct(const PipelineConfig& cfg) {
  const fs::path& dir = cfg.output_dir;
  const ProjectionStack noisy = with_stride(load_stack(require_artifact(dir, "noisy.n2ivol", "simulate")), cfg.stride);
  const ProjectionStack clean = with_stride(load_stack(require_artifact(dir, "clean.n2ivol", "simulate")), cfg.stride);
  const json meta = {{"stride", cfg.stride}, {"angles", noisy.n_phi()}};

  ArtifactStage stage(dir);
  echo_config(stage, cfg, "reconstruct");
  for (const auto& [name, stack] : {std::pair{"noisy", &noisy}, std::pair{"clean", &clean}}) {
    spdlog::info("reconstruct: {} ({} angles, {} rows)", name, stack->n_phi(), stack->n_b());
    const ProjectionStack thickness =
        retrieve_stack(*stack, physics_for(cfg, *stack), cfg.retrieval_pad);
    const auto slices = reconstruct_rows(thickness);
    stage.volume(std::string("recon_") + name + ".n2ivol", slices_volume(slices, meta));
    if (std::string(name) == "noisy") {
      const std::size_t mid = slices.size() / 2;
      stage.png("previews/recon_noisy_row" + std::to_string(mid) + ".png", slices[mid].data);
    }
  }
  stage.commit();
}

void cmd_train(const PipelineConfig& cfg) {
  const fs::path& dir = cfg.output_dir;
  const ProjectionStack noisy =
      with_stride(load_stack(require_artifact(dir, "noisy.n2ivol", "simulate")), cfg.stride);
  if (cfg.val_rows.end > noisy.n_b() || cfg.train_rows.end > noisy.n_b()) {
    throw ConfigError("split rows exceed the " + std::to_string(noisy.n_b()) + " rows of noisy.n2ivol");
  }
  Dataset data;
  data.physics = physics_for(cfg, noisy);
  TrainConfig tc = cfg.train;

  if (cfg.method == TrainMethod::neighbor2inverse) {
    auto windows = [&](RowRange r) {
      std::vector<ProjectionStack> out;
      for (std::size_t b0 = r.begin; b0 + kWindowRows <= r.end; b0 += 2) {
        out.push_back(row_window(noisy, b0, kWindowRows));
      }
      return out;
    };
    data.train_windows = windows(cfg.train_rows);
    data.val_windows = windows(cfg.val_rows);
  } else {
    tc.variant = LossVariant::nei_only;
    auto pairs = [&](RowRange r) {
      const ProjectionStack rows = row_window(
          retrieve_stack(noisy, data.physics, cfg.retrieval_pad), r.begin, r.size());
      const SplitRecon split = noise2inverse_split(rows, cfg.n2inv_x);
      std::vector<std::pair<ReconSlice, ReconSlice>> out;
      for (std::size_t i = 0; i < split.input.size(); ++i) out.emplace_back(split.input[i], split.target[i]);
      return out;
    };
    data.train_pairs = pairs(cfg.train_rows);
    data.val_pairs = pairs(cfg.val_rows);
  }
  spdlog::info("train: {} {} on {} samples, {} epochs", to_string(cfg.method), to_string(tc.variant),
               cfg.method == TrainMethod::neighbor2inverse ? data.train_windows.size() : data.train_pairs.size(),
               tc.max_epochs);

  std::string log;
  const TrainResult result = train(data, tc, [&](const EpochLog& e) {
    log += e.to_json() + "\n";
    spdlog::info("epoch {:3d} train {:.6g} val {:.6g} lr {:.3g}", e.epoch, e.train_loss, e.val_loss, e.lr);
  });

  ArtifactStage stage(dir);
  echo_config(stage, cfg, "train");
  save_checkpoint(result.model, stage.reserve(checkpoint_name(cfg.method)));
  stage.text("train_log_" + to_string(cfg.method) + ".jsonl", log);
  stage.json("train_summary_" + to_string(cfg.method) + ".json",
             {{"method", to_string(cfg.method)},
              {"variant", to_string(tc.variant)},
              {"best_epoch", result.best_epoch},
              {"best_val_loss", result.log.at(result.best_epoch).val_loss},
              {"epochs", result.log.size()},
              {"parameters", result.model.parameter_count()}});
  stage.commit();
}

void cmd_denoise(const PipelineConfig& cfg) {
  const fs::path& dir = cfg.output_dir;
  const Denoiser model = load_checkpoint(require_artifact(dir, checkpoint_name(cfg.method), "train"));
  const auto slices = load_slices(require_artifact(dir, "recon_noisy.n2ivol", "reconstruct"));
  spdlog::info("denoise: {} slices with {}", slices.size(), to_string(cfg.method));
  const auto out = denoise_volume(model, slices);

  ArtifactStage stage(dir);
  echo_config(stage, cfg, "denoise");
  stage.volume(denoised_name(cfg.method), slices_volume(out, {{"method", to_string(cfg.method)}}));
  stage.commit();
}

void cmd_baseline(const PipelineConfig& cfg) {
  const fs::path& dir = cfg.output_dir;
  const auto noisy = load_slices(require_artifact(dir, "recon_noisy.n2ivol", "reconstruct"));
  const auto clean = load_slices(require_artifact(dir, "recon_clean.n2ivol", "reconstruct"));
  check_rows(noisy, cfg.val_rows, "split.val_rows");
  const auto val_noisy = images_of(noisy, cfg.val_rows);
  const auto val_clean = images_of(clean, cfg.val_rows);

  ArtifactStage stage(dir);
  echo_config(stage, cfg, "baseline");
  json params = json::object();
  for (const auto& method : cfg.baseline_methods) {
    std::vector<ReconSlice> out(noisy.size());
    if (method == "gaussian") {
      const TunedParam t = tune_gaussian(val_noisy, val_clean, cfg.gaussian_sigmas);
      spdlog::info("baseline: gaussian sigma {} (validation SSIM {:.4f})", t.value, t.mean_ssim);
      params["gaussian"] = {{"sigma", t.value}, {"val_ssim", t.mean_ssim}};
      parallel_for(noisy.size(), [&](std::size_t b) {
        out[b] = {gaussian_filter(noisy[b].data, t.value), noisy[b].pixel_pitch};
      });
    } else {
      const TunedParam t = tune_tv(val_noisy, val_clean, cfg.tv_weights, cfg.tv_iters);
      spdlog::info("baseline: tv weight {} (validation SSIM {:.4f})", t.value, t.mean_ssim);
      params["tv"] = {{"weight", t.value}, {"iterations", cfg.tv_iters}, {"val_ssim", t.mean_ssim}};
      parallel_for(noisy.size(), [&](std::size_t b) {
        out[b] = {tv_denoise(noisy[b].data, t.value, cfg.tv_iters).image, noisy[b].pixel_pitch};
      });
    }
    stage.volume("baseline_" + method + ".n2ivol", slices_volume(out, params[method]));
  }
  stage.json("baseline_params.json", params);
  stage.commit();
}

void cmd_eval(const PipelineConfig& cfg) {
  const fs::path& dir = cfg.output_dir;
  const auto reference = load_slices(require_artifact(dir, "recon_clean.n2ivol", "reconstruct"));
  check_rows(reference, cfg.test_rows, "split.test_rows");
  const RoiSet rois = cfg.roi_file.empty() ? default_rois(reference.front().n()) : load_rois(cfg.roi_file);
  for (const auto& p : rois.pairs) p.pair.validate(reference.front().n(), reference.front().n());

  std::vector<std::pair<std::string, std::string>> methods = {{"fbp", "recon_noisy.n2ivol"}};
  for (TrainMethod m : {TrainMethod::neighbor2inverse, TrainMethod::noise2inverse}) {
    methods.emplace_back(to_string(m), denoised_name(m));
  }
  methods.emplace_back("gaussian", "baseline_gaussian.n2ivol");
  methods.emplace_back("tv", "baseline_tv.n2ivol");
  require_artifact(dir, "recon_noisy.n2ivol", "reconstruct");

  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::ostringstream csv;
  csv.precision(8);
  csv << "method,slice,roi,cnr,sr,q,psnr,ssim\n";
  json summary = json::object();
  std::vector<std::string> present;
  std::vector<std::vector<ReconSlice>> volumes;

  for (const auto& [name, file] : methods) {
    if (!fs::exists(dir / file)) continue;
    const auto slices = load_slices(dir / file);
    if (slices.size() != reference.size()) throw ConfigError(file + ": row count differs from recon_clean");
    struct Row { double psnr, ssim, sr; std::vector<double> cnr; };
    std::vector<Row> rows(cfg.test_rows.size());
    parallel_for(rows.size(), [&](std::size_t i) {
      const std::size_t b = cfg.test_rows.begin + i;
      const Image& img = slices[b].data;
      Row& row = rows[i];
      row.psnr = psnr(img, reference[b].data);
      row.ssim = ssim(img, reference[b].data);
      double sr = 0.0;
      for (const auto& e : rois.edges) {
        try {
          sr += edge_resolution(img, e) / static_cast<double>(rois.edges.size());
        } catch (const Error&) {
          sr = nan;
        }
      }
      row.sr = rois.edges.empty() ? nan : sr;
      for (const auto& p : rois.pairs) {
        try {
          row.cnr.push_back(cnr(img, p.pair));
        } catch (const NumericError&) {
          row.cnr.push_back(nan);
        }
      }
    });
    double sum_cnr = 0, sum_sr = 0, sum_psnr = 0, sum_ssim = 0;
    std::size_t n_cnr = 0, n_sr = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const Row& row = rows[i];
      for (std::size_t p = 0; p < rois.pairs.size(); ++p) {
        csv << name << "," << cfg.test_rows.begin + i << "," << rois.pairs[p].name << "," << row.cnr[p]
            << "," << row.sr << "," << quality_index_or_nan(row.cnr[p], row.sr) << "," << row.psnr
            << "," << row.ssim << "\n";
        if (std::isfinite(row.cnr[p])) sum_cnr += row.cnr[p], ++n_cnr;
      }
      if (std::isfinite(row.sr)) sum_sr += row.sr, ++n_sr;
      sum_psnr += row.psnr;
      sum_ssim += row.ssim;
    }
    const double k = static_cast<double>(rows.size());
    const double mean_cnr = n_cnr ? sum_cnr / n_cnr : nan;
    const double mean_sr = n_sr ? sum_sr / n_sr : nan;
    summary[name] = {{"cnr", mean_cnr}, {"sr", mean_sr}, {"q", quality_index_or_nan(mean_cnr, mean_sr)},
                     {"psnr", sum_psnr / k}, {"ssim", sum_ssim / k}};
    spdlog::info("eval: {:16s} PSNR {:.2f} SSIM {:.4f} CNR {:.2f} SR {:.2f}", name, sum_psnr / k,
                 sum_ssim / k, mean_cnr, mean_sr);
    present.push_back(name);
    volumes.push_back(slices);
  }

  ArtifactStage stage(dir);
  echo_config(stage, cfg, "eval");
  stage.text("metrics.csv", csv.str());
  stage.json("metrics_summary.json", summary);
  std::vector<std::size_t> preview_rows = cfg.preview_rows;
  if (preview_rows.empty()) preview_rows.push_back((cfg.test_rows.begin + cfg.test_rows.end) / 2);
  for (std::size_t b : preview_rows) {
    if (b >= reference.size()) throw ConfigError("eval.preview_rows: row " + std::to_string(b) + " out of range");
    std::vector<Image> panels = {reference[b].data};
    for (const auto& v : volumes) panels.push_back(v[b].data);
    stage.png("previews/eval_row" + std::to_string(b) + ".png", side_by_side(panels));
  }
  std::string order = "reference";
  for (const auto& n : present) order += "," + n;
  stage.text("previews/eval_panels.txt", order + "\n");
  stage.commit();
}

}  // namespace n2i::cli

#include "n2i/nn.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

#include "n2i/errors.hpp"
#include "n2i/pad.hpp"
#include "n2i/volume_io.hpp"

namespace n2i {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

struct ConvSpec {
  std::size_t cin, cout, k, w_off, b_off;
  bool activated;
};

struct UpSpec {
  std::size_t cin, cout, w_off, b_off;
};

// Columns are pixels, rows (channel, ky, kx); zero padding keeps the spatial size.
RowMat im2col(const Tensor& in, std::size_t k) {
  const std::size_t hw = in.plane();
  if (k == 1) return ConstMapMat(in.v.data(), in.c, hw);
  const auto r = static_cast<std::ptrdiff_t>(k / 2);
  RowMat col = RowMat::Zero(in.c * k * k, hw);
  const auto h = static_cast<std::ptrdiff_t>(in.h), w = static_cast<std::ptrdiff_t>(in.w);
  for (std::size_t ci = 0; ci < in.c; ++ci) {
    const double* src = in.channel(ci);
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        double* dst = col.row((ci * k + ky) * k + kx).data();
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - r;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - r;
        const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
        const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(w, w - dx);
        for (std::ptrdiff_t y = 0; y < h; ++y) {
          const std::ptrdiff_t sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          std::copy(src + sy * w + x0 + dx, src + sy * w + x1 + dx, dst + y * w + x0);
        }
      }
    }
  }
  return col;
}

void col2im(const RowMat& col, std::size_t k, Tensor& out) {
  if (k == 1) {
    MapMat(out.v.data(), out.c, out.plane()) += col;
    return;
  }
  const auto r = static_cast<std::ptrdiff_t>(k / 2);
  const auto h = static_cast<std::ptrdiff_t>(out.h), w = static_cast<std::ptrdiff_t>(out.w);
  for (std::size_t ci = 0; ci < out.c; ++ci) {
    double* dst = out.channel(ci);
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const double* src = col.row((ci * k + ky) * k + kx).data();
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - r;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - r;
        const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
        const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(w, w - dx);
        for (std::ptrdiff_t y = 0; y < h; ++y) {
          const std::ptrdiff_t sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          double* d = dst + sy * w + dx;
          for (std::ptrdiff_t x = x0; x < x1; ++x) d[x] += src[y * w + x];
        }
      }
    }
  }
}

Tensor conv_forward(const ConvSpec& s, const AlignedVector& p, const Tensor& in) {
  Tensor out(s.cout, in.h, in.w);
  const RowMat col = im2col(in, s.k);
  ConstMapMat weight(p.data() + s.w_off, s.cout, s.cin * s.k * s.k);
  MapMat o(out.v.data(), s.cout, in.plane());
  o.noalias() = weight * col;
  for (std::size_t co = 0; co < s.cout; ++co) o.row(co).array() += p[s.b_off + co];
  return out;
}

Tensor conv_backward(const ConvSpec& s, const AlignedVector& p, const Tensor& in,
                     const Tensor& dout, std::span<double> grad) {
  const RowMat col = im2col(in, s.k);
  ConstMapMat g(dout.v.data(), s.cout, dout.plane());
  MapMat dw(grad.data() + s.w_off, s.cout, s.cin * s.k * s.k);
  dw.noalias() += g * col.transpose();
  for (std::size_t co = 0; co < s.cout; ++co) grad[s.b_off + co] += g.row(co).sum();
  ConstMapMat weight(p.data() + s.w_off, s.cout, s.cin * s.k * s.k);
  const RowMat dcol = weight.transpose() * g;
  Tensor din(in.c, in.h, in.w);
  col2im(dcol, s.k, din);
  return din;
}

void leaky_relu(Tensor& t, double slope) {
  for (double& x : t.v) x = x > 0.0 ? x : slope * x;
}

void leaky_relu_backward(Tensor& g, const Tensor& activated, double slope) {
  for (std::size_t i = 0; i < g.v.size(); ++i) {
    if (!(activated.v[i] > 0.0)) g.v[i] *= slope;
  }
}

Tensor max_pool(const Tensor& in, std::vector<std::uint8_t>& argmax) {
  Tensor out(in.c, in.h / 2, in.w / 2);
  argmax.assign(out.v.size(), 0);
  for (std::size_t c = 0; c < in.c; ++c) {
    const double* src = in.channel(c);
    for (std::size_t i = 0; i < out.h; ++i) {
      for (std::size_t j = 0; j < out.w; ++j) {
        std::uint8_t best = 0;
        double bv = src[(2 * i) * in.w + 2 * j];
        for (std::uint8_t q = 1; q < 4; ++q) {
          const double v = src[(2 * i + q / 2) * in.w + 2 * j + q % 2];
          if (v > bv) {
            bv = v;
            best = q;
          }
        }
        const std::size_t o = (c * out.h + i) * out.w + j;
        out.v[o] = bv;
        argmax[o] = best;
      }
    }
  }
  return out;
}

Tensor max_pool_backward(const Tensor& g, const std::vector<std::uint8_t>& argmax,
                         std::size_t in_h, std::size_t in_w) {
  Tensor din(g.c, in_h, in_w);
  for (std::size_t c = 0; c < g.c; ++c) {
    double* dst = din.channel(c);
    for (std::size_t i = 0; i < g.h; ++i) {
      for (std::size_t j = 0; j < g.w; ++j) {
        const std::size_t o = (c * g.h + i) * g.w + j;
        const std::uint8_t q = argmax[o];
        dst[(2 * i + q / 2) * in_w + 2 * j + q % 2] += g.v[o];
      }
    }
  }
  return din;
}

Tensor up_forward(const UpSpec& s, const AlignedVector& p, const Tensor& in) {
  ConstMapMat weight(p.data() + s.w_off, s.cout * 4, s.cin);
  ConstMapMat x(in.v.data(), s.cin, in.plane());
  const RowMat y = weight * x;
  Tensor out(s.cout, 2 * in.h, 2 * in.w);
  for (std::size_t co = 0; co < s.cout; ++co) {
    double* dst = out.channel(co);
    const double b = p[s.b_off + co];
    for (std::size_t q = 0; q < 4; ++q) {
      const double* src = y.row(co * 4 + q).data();
      const std::size_t di = q / 2, dj = q % 2;
      for (std::size_t i = 0; i < in.h; ++i) {
        for (std::size_t j = 0; j < in.w; ++j) {
          dst[(2 * i + di) * out.w + 2 * j + dj] = src[i * in.w + j] + b;
        }
      }
    }
  }
  return out;
}

Tensor up_backward(const UpSpec& s, const AlignedVector& p, const Tensor& in,
                   const Tensor& dout, std::span<double> grad) {
  RowMat gy(s.cout * 4, in.plane());
  for (std::size_t co = 0; co < s.cout; ++co) {
    const double* src = dout.channel(co);
    double bsum = 0.0;
    for (std::size_t q = 0; q < 4; ++q) {
      double* dst = gy.row(co * 4 + q).data();
      const std::size_t di = q / 2, dj = q % 2;
      for (std::size_t i = 0; i < in.h; ++i) {
        for (std::size_t j = 0; j < in.w; ++j) {
          dst[i * in.w + j] = src[(2 * i + di) * dout.w + 2 * j + dj];
        }
      }
      bsum += gy.row(co * 4 + q).sum();
    }
    grad[s.b_off + co] += bsum;
  }
  ConstMapMat x(in.v.data(), s.cin, in.plane());
  MapMat dw(grad.data() + s.w_off, s.cout * 4, s.cin);
  dw.noalias() += gy * x.transpose();
  ConstMapMat weight(p.data() + s.w_off, s.cout * 4, s.cin);
  Tensor din(s.cin, in.h, in.w);
  MapMat(din.v.data(), s.cin, in.plane()).noalias() = weight.transpose() * gy;
  return din;
}

Tensor concat(const Tensor& a, const Tensor& b) {
  Tensor out(a.c + b.c, a.h, a.w);
  std::copy(a.v.begin(), a.v.end(), out.v.begin());
  std::copy(b.v.begin(), b.v.end(), out.v.begin() + static_cast<std::ptrdiff_t>(a.v.size()));
  return out;
}

}  // namespace

struct Denoiser::Layout {
  std::vector<ConvSpec> convs;
  std::vector<UpSpec> ups;
  std::size_t total = 0;

  explicit Layout(const ModelConfig& cfg) {
    const std::size_t c = cfg.base_channels;
    auto conv = [&](std::size_t cin, std::size_t cout, std::size_t k, bool act) {
      convs.push_back({cin, cout, k, total, total + cout * cin * k * k, act});
      total += cout * cin * k * k + cout;
    };
    conv(1, c, 3, true);
    conv(c, c, 3, true);
    for (std::size_t l = 1; l <= cfg.depth; ++l) conv(c, c, 3, true);
    for (std::size_t l = 0; l < cfg.depth; ++l) {
      ups.push_back({c, c, total, total + 4 * c * c});
      total += 4 * c * c + c;
      conv(2 * c, c, 3, true);
      conv(c, c, 3, true);
    }
    conv(c, 1, 1, false);
  }
};

Denoiser::Denoiser(ModelConfig cfg) : cfg_(cfg) {
  if (cfg_.depth < 1 || cfg_.base_channels < 1) {
    throw ConfigError("model: depth and base_channels must be >= 1");
  }
  layout_ = std::make_unique<Layout>(cfg_);
  params_.assign(layout_->total, 0.0);
}

Denoiser::Denoiser(const Denoiser& o)
    : cfg_(o.cfg_), layout_(std::make_unique<Layout>(*o.layout_)), params_(o.params_) {}

Denoiser& Denoiser::operator=(const Denoiser& o) {
  if (this != &o) {
    cfg_ = o.cfg_;
    layout_ = std::make_unique<Layout>(*o.layout_);
    params_ = o.params_;
  }
  return *this;
}

Denoiser::Denoiser(Denoiser&&) noexcept = default;
Denoiser& Denoiser::operator=(Denoiser&&) noexcept = default;
Denoiser::~Denoiser() = default;

void Denoiser::initialize(RngSeed seed) {
  const CounterRng rng(seed);
  std::uint64_t draw = 0;
  const double gain2 = 2.0 / (1.0 + cfg_.leaky_slope * cfg_.leaky_slope);
  std::fill(params_.begin(), params_.end(), 0.0);
  for (const auto& s : layout_->convs) {
    const double fan_in = static_cast<double>(s.cin * s.k * s.k);
    const double bound = std::sqrt(3.0 * (s.activated ? gain2 : 1.0) / fan_in);
    for (std::size_t i = 0; i < s.cout * s.cin * s.k * s.k; ++i) {
      params_[s.w_off + i] = bound * (2.0 * rng.uniform_at(draw++) - 1.0);
    }
  }
  for (const auto& s : layout_->ups) {
    const double bound = std::sqrt(3.0 / static_cast<double>(s.cin));
    for (std::size_t i = 0; i < 4 * s.cout * s.cin; ++i) {
      params_[s.w_off + i] = bound * (2.0 * rng.uniform_at(draw++) - 1.0);
    }
  }
}

void Denoiser::zero_parameters() { std::fill(params_.begin(), params_.end(), 0.0); }

Image Denoiser::forward(const Image& input) const {
  Cache cache;
  return forward(input, cache);
}

Image Denoiser::forward(const Image& input, Cache& cache) const {
  const std::size_t div = cfg_.divisor();
  if (input.rows() % div != 0 || input.cols() % div != 0 || input.empty()) {
    throw Error("Denoiser: input sides must be divisible by 2^depth");
  }
  cache = Cache{};
  cache.h = input.rows();
  cache.w = input.cols();
  Tensor x(1, input.rows(), input.cols());
  x.v.assign(input.values().begin(), input.values().end());

  std::size_t ci = 0;
  auto run_conv = [&](const Tensor& in) {
    const ConvSpec& s = layout_->convs[ci++];
    cache.conv_inputs.push_back(in);
    Tensor out = conv_forward(s, params_, in);
    if (s.activated) {
      leaky_relu(out, cfg_.leaky_slope);
      cache.act_outputs.push_back(out);
    }
    return out;
  };

  std::vector<Tensor> skips;
  Tensor cur = run_conv(x);
  cur = run_conv(cur);
  skips.push_back(cur);
  for (std::size_t l = 1; l <= cfg_.depth; ++l) {
    cache.pool_in_h.push_back(cur.h);
    cache.pool_in_w.push_back(cur.w);
    cache.pool_argmax.emplace_back();
    const Tensor pooled = max_pool(cur, cache.pool_argmax.back());
    cur = run_conv(pooled);
    if (l < cfg_.depth) skips.push_back(cur);
  }
  for (std::size_t k = 0; k < cfg_.depth; ++k) {
    const std::size_t level = cfg_.depth - 1 - k;
    cache.up_inputs.push_back(cur);
    const Tensor up = up_forward(layout_->ups[k], params_, cur);
    cur = run_conv(concat(up, skips[level]));
    cur = run_conv(cur);
  }
  Tensor out = run_conv(cur);
  Image result(input.rows(), input.cols(), std::vector<double>(out.v.begin(), out.v.end()));
  if (cfg_.residual) {
    for (std::size_t i = 0; i < result.size(); ++i) result.values()[i] += input.values()[i];
  }
  return result;
}

Image Denoiser::backward(const Cache& cache, const Image& grad_output,
                         std::span<double> grad) const {
  if (grad.size() != params_.size()) throw Error("Denoiser::backward: gradient size mismatch");
  if (grad_output.rows() != cache.h || grad_output.cols() != cache.w) {
    throw Error("Denoiser::backward: gradient shape mismatch");
  }
  AlignedVector local(params_.size(), 0.0);
  const std::span<double> lg(local);
  std::size_t ci = layout_->convs.size();
  std::size_t ai = cache.act_outputs.size();
  auto back_conv = [&](Tensor g) {
    const ConvSpec& s = layout_->convs[--ci];
    if (s.activated) leaky_relu_backward(g, cache.act_outputs[--ai], cfg_.leaky_slope);
    return conv_backward(s, params_, cache.conv_inputs[ci], g, lg);
  };

  Tensor g(1, cache.h, cache.w);
  g.v.assign(grad_output.values().begin(), grad_output.values().end());
  g = back_conv(std::move(g));
  const std::size_t c = cfg_.base_channels;
  std::vector<Tensor> skip_grads(cfg_.depth);
  for (std::size_t level = 0; level < cfg_.depth; ++level) {
    const std::size_t k = cfg_.depth - 1 - level;
    g = back_conv(std::move(g));
    g = back_conv(std::move(g));
    Tensor gu(c, g.h, g.w), gs(c, g.h, g.w);
    std::copy(g.v.begin(), g.v.begin() + static_cast<std::ptrdiff_t>(gu.v.size()), gu.v.begin());
    std::copy(g.v.begin() + static_cast<std::ptrdiff_t>(gu.v.size()), g.v.end(), gs.v.begin());
    skip_grads[level] = std::move(gs);
    g = up_backward(layout_->ups[k], params_, cache.up_inputs[k], gu, lg);
  }
  for (std::size_t l = cfg_.depth; l >= 1; --l) {
    if (l < cfg_.depth) {
      for (std::size_t i = 0; i < g.v.size(); ++i) g.v[i] += skip_grads[l].v[i];
    }
    g = back_conv(std::move(g));
    g = max_pool_backward(g, cache.pool_argmax[l - 1], cache.pool_in_h[l - 1],
                          cache.pool_in_w[l - 1]);
  }
  for (std::size_t i = 0; i < g.v.size(); ++i) g.v[i] += skip_grads[0].v[i];
  g = back_conv(std::move(g));
  g = back_conv(std::move(g));

  for (std::size_t i = 0; i < local.size(); ++i) grad[i] += local[i];
  Image dx(cache.h, cache.w, std::vector<double>(g.v.begin(), g.v.end()));
  if (cfg_.residual) {
    for (std::size_t i = 0; i < dx.size(); ++i) dx.values()[i] += grad_output.values()[i];
  }
  return dx;
}

Image denoise_slice(const Denoiser& model, const Image& slice) {
  const std::size_t div = model.config().divisor();
  const std::size_t pr = (div - slice.rows() % div) % div;
  const std::size_t pc = (div - slice.cols() % div) % div;
  if (pr == 0 && pc == 0) return model.forward(slice);
  const Image out = model.forward(pad_reflect(slice, pr, pc));
  return crop(out, 0, 0, slice.rows(), slice.cols());
}

Adam::Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw Error("Adam: size mismatch");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    const double mhat = m_[i] / bc1;
    const double vhat = v_[i] / bc2;
    params[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
  }
}

PlateauScheduler::PlateauScheduler(std::size_t patience, double factor, double threshold)
    : patience_(patience),
      factor_(factor),
      threshold_(threshold),
      best_(std::numeric_limits<double>::infinity()) {
  if (patience_ < 1) throw ConfigError("scheduler: patience must be >= 1");
}

double PlateauScheduler::observe(double metric, double lr) {
  if (metric < best_ * (1.0 - threshold_)) {
    best_ = metric;
    bad_epochs_ = 0;
    return lr;
  }
  if (++bad_epochs_ > patience_) {
    bad_epochs_ = 0;
    return lr * factor_;
  }
  return lr;
}

void save_checkpoint(const Denoiser& model, const std::filesystem::path& path) {
  Volume vol;
  vol.shape = {model.parameter_count()};
  vol.values.assign(model.parameters().begin(), model.parameters().end());
  vol.axes = "param";
  const auto& c = model.config();
  vol.meta = {{"kind", "n2i-denoiser"},
              {"depth", c.depth},
              {"base_channels", c.base_channels},
              {"leaky_slope", c.leaky_slope},
              {"residual", c.residual}};
  write_volume(vol, path);
}

Denoiser load_checkpoint(const std::filesystem::path& path) {
  const Volume vol = read_volume(path);
  if (vol.meta.value("kind", "") != "n2i-denoiser") {
    throw ConfigError("not a denoiser checkpoint: " + path.string());
  }
  ModelConfig cfg;
  cfg.depth = vol.meta.at("depth").get<std::size_t>();
  cfg.base_channels = vol.meta.at("base_channels").get<std::size_t>();
  cfg.leaky_slope = vol.meta.at("leaky_slope").get<double>();
  cfg.residual = vol.meta.at("residual").get<bool>();
  Denoiser model(cfg);
  if (vol.values.size() != model.parameter_count()) {
    throw ConfigError("checkpoint parameter count does not match architecture");
  }
  std::copy(vol.values.begin(), vol.values.end(), model.parameters().begin());
  return model;
}

}  // namespace n2i

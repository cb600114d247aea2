#include "n2i/metrics.hpp"

#include <Eigen/Core>
#include <unsupported/Eigen/LevenbergMarquardt>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "n2i/errors.hpp"

namespace n2i {

bool Rect::overlaps(const Rect& o) const {
  return row < o.row + o.rows && o.row < row + rows && col < o.col + o.cols &&
         o.col < col + cols;
}

namespace {

void check_inside(const Rect& r, std::size_t rows, std::size_t cols, const char* what) {
  if (r.rows == 0 || r.cols == 0 || r.row + r.rows > rows || r.col + r.cols > cols) {
    throw ConfigError(std::string(what) + " ROI outside the image or empty");
  }
}

std::vector<double> roi_values(const Image& img, const Rect& r) {
  std::vector<double> v;
  v.reserve(r.area());
  for (std::size_t i = r.row; i < r.row + r.rows; ++i) {
    for (std::size_t j = r.col; j < r.col + r.cols; ++j) v.push_back(img(i, j));
  }
  return v;
}

}  // namespace

void RoiPair::validate(std::size_t image_rows, std::size_t image_cols) const {
  check_inside(tissue, image_rows, image_cols, "tissue");
  check_inside(air, image_rows, image_cols, "air");
  if (tissue.area() < 16 || air.area() < 16) throw ConfigError("ROI area must be >= 16 pixels");
  if (tissue.overlaps(air)) throw ConfigError("tissue and air ROIs overlap");
}

double cnr(const Image& slice, const RoiPair& pair) {
  pair.validate(slice.rows(), slice.cols());
  const auto st = roi_values(slice, pair.tissue);
  const auto air = roi_values(slice, pair.air);
  const double sd = std::sqrt(variance(st));
  if (!(sd > 0.0)) throw NumericError("cnr: zero-variance tissue ROI");
  return (mean(st) - mean(air)) / sd;
}

double EdgeFit::fwhm() const { return 2.0 * std::sqrt(2.0 * std::numbers::ln2) * sigma; }

namespace {

struct ErfModel : Eigen::DenseFunctor<double> {
  const std::vector<double>& u;
  const std::vector<double>& y;
  ErfModel(const std::vector<double>& u_, const std::vector<double>& y_)
      : Eigen::DenseFunctor<double>(4, static_cast<int>(u_.size())), u(u_), y(y_) {}

  static double width(double s) { return std::max(std::abs(s), 1e-6); }

  int operator()(const InputType& p, ValueType& f) const {
    const double s = width(p[3]);
    for (std::size_t i = 0; i < u.size(); ++i) {
      f[static_cast<Eigen::Index>(i)] =
          p[0] * std::erf((u[i] - p[2]) / (std::numbers::sqrt2 * s)) + p[1] - y[i];
    }
    return 0;
  }
  int df(const InputType& p, JacobianType& j) const {
    const double s = width(p[3]);
    const double sign = p[3] < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double z = (u[i] - p[2]) / (std::numbers::sqrt2 * s);
      const double g = p[0] * 2.0 / std::sqrt(std::numbers::pi) * std::exp(-z * z);
      const auto r = static_cast<Eigen::Index>(i);
      j(r, 0) = std::erf(z);
      j(r, 1) = 1.0;
      j(r, 2) = -g / (std::numbers::sqrt2 * s);
      j(r, 3) = -g * z / s * sign;
    }
    return 0;
  }
};

struct FitOut {
  Eigen::Vector4d p;
  double sse = 0.0;
  bool ok = false;
};

FitOut fit_erf(const std::vector<double>& u, const std::vector<double>& y, double max_sigma) {
  std::vector<double> sorted = y;
  std::sort(sorted.begin(), sorted.end());
  const double lo = sorted[sorted.size() / 10];
  const double hi = sorted[(sorted.size() * 9) / 10];
  const double mid = 0.5 * (lo + hi);
  const double mu_u = mean(u), mu_y = mean(y);
  double cov = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) cov += (u[i] - mu_u) * (y[i] - mu_y);
  const double amp = (cov >= 0.0 ? 0.5 : -0.5) * (hi - lo);
  double x0 = 0.0, wsum = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (std::abs(y[i] - mid) <= 0.25 * (hi - lo)) {
      x0 += u[i];
      wsum += 1.0;
    }
  }
  x0 = wsum > 0.0 ? x0 / wsum : mu_u;

  FitOut best;
  best.sse = std::numeric_limits<double>::infinity();
  for (double s0 : {0.5, 2.0, 6.0}) {
    if (s0 >= max_sigma) continue;
    ErfModel model(u, y);
    Eigen::LevenbergMarquardt<ErfModel> lm(model);
    lm.setMaxfev(2000);
    Eigen::VectorXd p(4);
    p << amp, mid, x0, s0;
    const auto status = lm.minimize(p);
    if (status == Eigen::LevenbergMarquardtSpace::ImproperInputParameters) continue;
    Eigen::VectorXd f(static_cast<Eigen::Index>(u.size()));
    model(p, f);
    const double sse = f.squaredNorm();
    const bool converged = status != Eigen::LevenbergMarquardtSpace::TooManyFunctionEvaluation;
    if (std::isfinite(sse) && converged && sse < best.sse) {
      best.p = p;
      best.sse = sse;
      best.ok = true;
    }
  }
  if (best.ok) best.p[3] = std::clamp(std::abs(best.p[3]), 1e-3, max_sigma);
  return best;
}

}  // namespace

EdgeFit fit_edge(const Image& slice, const EdgeRoi& roi) {
  check_inside(roi.rect, slice.rows(), slice.cols(), "edge");
  const double norm = std::hypot(roi.normal_x, roi.normal_y);
  if (std::abs(norm - 1.0) > 1e-6) throw ConfigError("edge ROI normal must be a unit vector");
  if (roi.n_profiles < 8) throw ConfigError("edge ROI needs at least 8 profiles");

  const double nx = roi.normal_x, ny = roi.normal_y;
  const double xc = static_cast<double>(roi.rect.col) + 0.5 * static_cast<double>(roi.rect.cols - 1);
  const double yc = static_cast<double>(roi.rect.row) + 0.5 * static_cast<double>(roi.rect.rows - 1);
  std::vector<double> us, vs, ys;
  for (std::size_t i = roi.rect.row; i < roi.rect.row + roi.rect.rows; ++i) {
    for (std::size_t j = roi.rect.col; j < roi.rect.col + roi.rect.cols; ++j) {
      const double dx = static_cast<double>(j) - xc, dy = static_cast<double>(i) - yc;
      us.push_back(dx * nx + dy * ny);
      vs.push_back(-dx * ny + dy * nx);
      ys.push_back(slice(i, j));
    }
  }
  const auto [vmin_it, vmax_it] = std::minmax_element(vs.begin(), vs.end());
  const double vmin = *vmin_it, vspan = *vmax_it - *vmin_it + 1e-9;
  const auto [umin_it, umax_it] = std::minmax_element(us.begin(), us.end());
  const double length = *umax_it - *umin_it;

  std::vector<std::vector<std::size_t>> strips(roi.n_profiles);
  for (std::size_t k = 0; k < vs.size(); ++k) {
    const auto s = static_cast<std::size_t>((vs[k] - vmin) / vspan *
                                            static_cast<double>(roi.n_profiles));
    strips[std::min(s, roi.n_profiles - 1)].push_back(k);
  }

  std::vector<double> shift(us.size(), 0.0);
  std::vector<double> centres;
  for (const auto& strip : strips) {
    if (strip.size() < 6) continue;
    std::vector<double> su, sy;
    for (std::size_t k : strip) {
      su.push_back(us[k]);
      sy.push_back(ys[k]);
    }
    const FitOut f = fit_erf(su, sy, length);
    if (!f.ok) continue;
    for (std::size_t k : strip) shift[k] = f.p[2];
    centres.push_back(f.p[2]);
  }
  if (centres.size() < roi.n_profiles / 2) {
    throw NumericError("edge_resolution: profile fits did not converge");
  }
  std::vector<double> aligned(us.size());
  for (std::size_t k = 0; k < us.size(); ++k) aligned[k] = us[k] - shift[k];

  const FitOut f = fit_erf(aligned, ys, length);
  if (!f.ok) throw NumericError("edge_resolution: error-function fit did not converge");
  const double mu_y = mean(ys);
  double sst = 0.0;
  for (double y : ys) sst += (y - mu_y) * (y - mu_y);
  EdgeFit out;
  out.amplitude = f.p[0];
  out.offset = f.p[1];
  out.x0 = f.p[2] + mean(centres);
  out.sigma = f.p[3];
  out.r_squared = sst > 0.0 ? 1.0 - f.sse / sst : 0.0;
  if (out.r_squared < 0.8) {
    throw Error("edge_resolution: profile is not a monotone edge (R^2 = " +
                std::to_string(out.r_squared) + ")");
  }
  return out;
}

double edge_resolution(const Image& slice, const EdgeRoi& roi) {
  return fit_edge(slice, roi).fwhm();
}

double quality_index(double cnr_value, double fwhm) {
  if (!(fwhm > 0.0)) throw Error("quality_index: fwhm must be positive");
  return cnr_value / fwhm;
}

double psnr(const Image& test, const Image& reference, double data_range) {
  if (!test.same_shape(reference)) throw Error("psnr: shape mismatch");
  if (data_range == 0.0) {
    const auto [lo, hi] = std::minmax_element(reference.values().begin(), reference.values().end());
    data_range = *hi - *lo;
  }
  if (!(data_range > 0.0)) throw Error("psnr: data_range must be positive");
  const double mse = mean_squared_difference(test, reference);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(data_range * data_range / mse);
}

namespace {

constexpr std::size_t kWin = 11;

std::array<double, kWin> ssim_window() {
  std::array<double, kWin> w{};
  double sum = 0.0;
  for (std::size_t i = 0; i < kWin; ++i) {
    const double x = static_cast<double>(i) - 5.0;
    w[i] = std::exp(-x * x / (2.0 * 1.5 * 1.5));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

// Valid-region separable filtering.
Image filter_valid(const Image& img, const std::array<double, kWin>& w) {
  const std::size_t r = img.rows(), c = img.cols();
  Image tmp(r, c - kWin + 1);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j + kWin <= c; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < kWin; ++k) s += w[k] * img(i, j + k);
      tmp(i, j) = s;
    }
  }
  Image out(r - kWin + 1, tmp.cols());
  for (std::size_t i = 0; i + kWin <= r; ++i) {
    for (std::size_t j = 0; j < tmp.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < kWin; ++k) s += w[k] * tmp(i + k, j);
      out(i, j) = s;
    }
  }
  return out;
}

Image product(const Image& a, const Image& b) {
  Image out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.values()[i] = a.values()[i] * b.values()[i];
  return out;
}

}  // namespace

double ssim(const Image& a, const Image& b, double data_range) {
  if (!a.same_shape(b)) throw Error("ssim: shape mismatch");
  if (a.rows() < kWin || a.cols() < kWin) throw Error("ssim: images smaller than the window");
  if (data_range == 0.0) {
    const auto [alo, ahi] = std::minmax_element(a.values().begin(), a.values().end());
    const auto [blo, bhi] = std::minmax_element(b.values().begin(), b.values().end());
    data_range = std::max(*ahi, *bhi) - std::min(*alo, *blo);
    if (data_range == 0.0) return 1.0;
  }
  if (!(data_range > 0.0)) throw Error("ssim: data_range must be positive");
  const auto w = ssim_window();
  const Image ma = filter_valid(a, w), mb = filter_valid(b, w);
  const Image saa = filter_valid(product(a, a), w);
  const Image sbb = filter_valid(product(b, b), w);
  const Image sab = filter_valid(product(a, b), w);
  const double c1 = (0.01 * data_range) * (0.01 * data_range);
  const double c2 = (0.03 * data_range) * (0.03 * data_range);
  double total = 0.0;
  for (std::size_t i = 0; i < ma.size(); ++i) {
    const double mua = ma.values()[i], mub = mb.values()[i];
    const double va = saa.values()[i] - mua * mua;
    const double vb = sbb.values()[i] - mub * mub;
    const double cov = sab.values()[i] - mua * mub;
    total += ((2.0 * mua * mub + c1) * (2.0 * cov + c2)) /
             ((mua * mua + mub * mub + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(ma.size());
}

}  // namespace n2i

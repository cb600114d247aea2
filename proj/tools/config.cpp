#include "config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>

#include "n2i/errors.hpp"

namespace n2i::cli {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

std::string to_string(TrainMethod m) {
  return m == TrainMethod::neighbor2inverse ? "neighbor2inverse" : "noise2inverse";
}

namespace {

// Line of each "section.key" in the source file, for error messages.
std::map<std::string, std::size_t> index_lines(const fs::path& path) {
  std::map<std::string, std::size_t> lines;
  std::ifstream in(path);
  std::string line, section;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    boost::algorithm::trim(line);
    if (line.empty() || line[0] == ';' || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = line.substr(1, line.size() - 2);
      boost::algorithm::trim(section);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    boost::algorithm::trim(key);
    lines[section + "." + key] = no;
  }
  return lines;
}

class Reader {
 public:
  Reader(pt::ptree tree, fs::path source, std::map<std::string, std::size_t> lines)
      : tree_(std::move(tree)), source_(std::move(source)), lines_(std::move(lines)) {}

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    std::string where = source_.empty() ? std::string("config") : source_.string();
    if (overridden_.count(key)) {
      where = "--set " + key;
    } else if (auto it = lines_.find(key); it != lines_.end()) {
      where += ":" + std::to_string(it->second);
    }
    throw ConfigError(where + ": " + key + ": " + msg);
  }

  void mark_override(const std::string& key) { overridden_.insert(key); }

  std::optional<std::string> raw(const std::string& key) {
    used_.insert(key);
    const auto v = tree_.get_optional<std::string>(pt::ptree::path_type(key, '.'));
    if (!v) return std::nullopt;
    std::string s = *v;
    boost::algorithm::trim(s);
    return s;
  }

  std::string str(const std::string& key, const std::string& def) {
    return raw(key).value_or(def);
  }

  double real(const std::string& key, double def) {
    const auto s = raw(key);
    if (!s) return def;
    try {
      std::size_t pos = 0;
      const double v = std::stod(*s, &pos);
      if (pos != s->size() || !std::isfinite(v)) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      fail(key, "expected a number, got '" + *s + "'");
    }
  }

  std::uint64_t count(const std::string& key, std::uint64_t def) {
    const auto s = raw(key);
    if (!s) return def;
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s->data(), s->data() + s->size(), v);
    if (ec != std::errc() || p != s->data() + s->size()) {
      fail(key, "expected a non-negative integer, got '" + *s + "'");
    }
    return v;
  }

  bool flag(const std::string& key, bool def) {
    const auto s = raw(key);
    if (!s) return def;
    const std::string l = boost::algorithm::to_lower_copy(*s);
    if (l == "true" || l == "yes" || l == "on" || l == "1") return true;
    if (l == "false" || l == "no" || l == "off" || l == "0") return false;
    fail(key, "expected true or false, got '" + *s + "'");
  }

  std::vector<std::string> list(const std::string& key, const std::string& def) {
    const std::string s = str(key, def);
    std::vector<std::string> parts;
    if (s.empty()) return parts;
    boost::algorithm::split(parts, s, boost::algorithm::is_any_of(","));
    for (auto& p : parts) boost::algorithm::trim(p);
    return parts;
  }

  std::vector<double> reals(const std::string& key, const std::string& def) {
    std::vector<double> out;
    for (const auto& p : list(key, def)) {
      try {
        std::size_t pos = 0;
        out.push_back(std::stod(p, &pos));
        if (pos != p.size()) throw std::invalid_argument("");
      } catch (const std::exception&) {
        fail(key, "expected a comma-separated list of numbers, got '" + p + "'");
      }
    }
    return out;
  }

  RowRange range(const std::string& key, RowRange def) {
    const auto s = raw(key);
    if (!s) return def;
    std::vector<std::string> parts;
    boost::algorithm::split(parts, *s, boost::algorithm::is_any_of(":"));
    RowRange r;
    if (parts.size() != 2 ||
        std::from_chars(parts[0].data(), parts[0].data() + parts[0].size(), r.begin).ec != std::errc() ||
        std::from_chars(parts[1].data(), parts[1].data() + parts[1].size(), r.end).ec != std::errc() ||
        r.end <= r.begin) {
      fail(key, "expected a row range begin:end with begin < end, got '" + *s + "'");
    }
    return r;
  }

  template <class F>
  auto parse(const std::string& key, const std::string& def, F&& fn) {
    const std::string s = str(key, def);
    try {
      return fn(s);
    } catch (const Error& e) {
      fail(key, e.what());
    }
  }

  /// Every key present in the tree that was never read.
  void reject_unknown() const {
    for (const auto& [section, body] : tree_) {
      if (body.empty() && !body.data().empty()) {
        throw ConfigError(where_of(section) + ": key outside any section: " + section);
      }
      for (const auto& [key, value] : body) {
        const std::string full = section + "." + key;
        if (!used_.count(full)) fail(full, "unknown key");
      }
    }
  }

 private:
  std::string where_of(const std::string& key) const {
    auto it = lines_.find("." + key);
    return source_.string() + (it != lines_.end() ? ":" + std::to_string(it->second) : "");
  }

  pt::ptree tree_;
  fs::path source_;
  std::map<std::string, std::size_t> lines_;
  std::set<std::string> used_;
  std::set<std::string> overridden_;
};

void apply_overrides(pt::ptree& tree, const std::vector<std::string>& overrides,
                     std::vector<std::string>& keys) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    const std::string key = boost::algorithm::trim_copy(o.substr(0, eq));
    if (eq == std::string::npos || key.find('.') == std::string::npos) {
      throw ConfigError("--set " + o + ": expected section.key=value");
    }
    tree.put(pt::ptree::path_type(key, '.'), boost::algorithm::trim_copy(o.substr(eq + 1)));
    keys.push_back(key);
  }
}

PipelineConfig build(pt::ptree tree, const fs::path& source,
                     std::map<std::string, std::size_t> lines,
                     const std::vector<std::string>& overrides) {
  std::vector<std::string> override_keys;
  apply_overrides(tree, overrides, override_keys);
  Reader r(std::move(tree), source, std::move(lines));
  for (const auto& k : override_keys) r.mark_override(k);

  PipelineConfig c;
  c.source = source;
  const fs::path base = source.empty() ? fs::current_path() : source.parent_path();
  auto resolve = [&](const std::string& p) -> fs::path {
    if (p.empty()) return {};
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
  };

  c.output_dir = resolve(r.str("run.output_dir", "n2i_out"));
  c.seed = r.count("run.seed", 0);

  c.phantom_spec = resolve(r.str("phantom.spec", ""));
  c.size = r.count("phantom.size", 256);
  c.texture_count = r.count("phantom.texture_count", 250);
  c.rows = r.count("phantom.rows", 96);

  PhysicsParams def;
  c.physics.z = r.real("physics.z", def.z);
  c.physics.delta = r.real("physics.delta", def.delta);
  c.physics.mu = r.real("physics.mu", def.mu);
  c.physics.pixel_pitch = r.real("physics.pixel_pitch", def.pixel_pitch);
  c.physics.row_pitch = r.real("physics.row_pitch", 0.0);

  c.alpha = r.real("noise.alpha", 1e4);
  c.sigma_g = r.real("noise.sigma_g", 5e-4);
  c.exposure_sweep = r.flag("noise.exposure_sweep", false);

  c.angles = r.count("acquisition.angles", 720);
  c.stride = r.count("acquisition.stride", 1);
  c.retrieval_pad.a = r.count("acquisition.pad_a", static_cast<std::uint64_t>(std::lround(0.214 * c.size)));
  c.retrieval_pad.b = r.count("acquisition.pad_b", 8);

  TrainConfig& t = c.train;
  t.sample.domain = r.parse("subsample.domain", "projection",
                            [](const std::string& s) { return parse_subsample_domain(s); });
  c.method = r.parse("train.method", "neighbor2inverse", [](const std::string& s) {
    if (s == "neighbor2inverse") return TrainMethod::neighbor2inverse;
    if (s == "noise2inverse") return TrainMethod::noise2inverse;
    throw ConfigError("expected neighbor2inverse or noise2inverse, got '" + s + "'");
  });
  t.variant = r.parse("train.variant", "nei_only",
                      [](const std::string& s) { return parse_loss_variant(s); });
  t.gamma_mode = r.parse("train.gamma_mode", "ramp",
                         [](const std::string& s) { return parse_gamma_mode(s); });
  t.gamma = r.real("train.gamma", default_fixed_gamma(t.variant));
  t.initial_lr = r.real("train.lr", 1e-3);
  t.patience = r.count("train.patience", 5);
  t.lr_factor = r.real("train.lr_factor", 0.5);
  t.accumulation = r.count("train.accumulation", 4);
  t.max_epochs = r.count("train.epochs", 100);
  t.samples_per_epoch = r.count("train.samples_per_epoch", 0);
  t.model.depth = r.count("train.depth", t.model.depth);
  t.model.base_channels = r.count("train.base_channels", t.model.base_channels);
  t.model.leaky_slope = r.real("train.leaky_slope", t.model.leaky_slope);
  t.model.residual = r.flag("train.residual", t.model.residual);
  t.sample.forward_pad.a = r.count("train.forward_pad_a", c.retrieval_pad.a / 2);
  t.sample.forward_pad.b = r.count("train.forward_pad_b", c.retrieval_pad.b / 2);
  t.sample.retrieval_pad = c.retrieval_pad;
  t.seed = c.train_seed();
  c.n2inv_x = r.count("train.n2inv_x", 3);

  const std::size_t n_b = c.rows;
  c.train_rows = r.range("split.train_rows", {0, n_b * 2 / 3});
  c.val_rows = r.range("split.val_rows", {n_b * 2 / 3, n_b * 5 / 6});
  c.test_rows = r.range("split.test_rows", {n_b * 5 / 6, n_b});

  c.roi_file = resolve(r.str("eval.roi", ""));
  for (double v : r.reals("eval.preview_rows", "")) {
    if (v < 0 || v != std::floor(v)) r.fail("eval.preview_rows", "expected row indices");
    c.preview_rows.push_back(static_cast<std::size_t>(v));
  }

  c.baseline_methods = r.list("baseline.methods", "gaussian,tv");
  c.gaussian_sigmas = r.reals("baseline.gaussian_sigmas", "0.5,0.75,1,1.25,1.5,2,2.5,3");
  c.tv_weights = r.reals("baseline.tv_weights", "0.005,0.01,0.02,0.04,0.08,0.16");
  c.tv_iters = r.count("baseline.tv_iters", 200);

  r.reject_unknown();

  // Invariants.
  if (c.size < 16 || c.size % 2) r.fail("phantom.size", "must be even and at least 16");
  if (c.rows < 14) r.fail("phantom.rows", "must be at least 14 (one training window)");
  if (!c.phantom_spec.empty() && !fs::exists(c.phantom_spec)) {
    r.fail("phantom.spec", "file not found: " + c.phantom_spec.string());
  }
  if (!c.roi_file.empty() && !fs::exists(c.roi_file)) {
    r.fail("eval.roi", "file not found: " + c.roi_file.string());
  }
  try {
    c.physics.validate();
  } catch (const Error& e) {
    r.fail("physics", e.what());
  }
  if (!(c.alpha > 0)) r.fail("noise.alpha", "must be positive");
  if (!(c.sigma_g >= 0)) r.fail("noise.sigma_g", "must be non-negative");
  if (c.angles < 2 || c.angles % 2) r.fail("acquisition.angles", "must be even and at least 2");
  if (c.stride < 1 || c.angles % c.stride) {
    r.fail("acquisition.stride", "must be at least 1 and divide the angle count");
  }
  for (const auto& [key, range] : {std::pair{"split.train_rows", c.train_rows},
                                   std::pair{"split.val_rows", c.val_rows},
                                   std::pair{"split.test_rows", c.test_rows}}) {
    if (range.end > c.rows) r.fail(key, "exceeds phantom.rows = " + std::to_string(c.rows));
  }
  if (c.method == TrainMethod::neighbor2inverse) {
    if (c.train_rows.size() < kWindowRows) r.fail("split.train_rows", "needs at least 14 rows");
    if (c.val_rows.size() < kWindowRows) r.fail("split.val_rows", "needs at least 14 rows");
  }
  if (c.n2inv_x < 1 || c.n2inv_x + 1 > c.angles) r.fail("train.n2inv_x", "out of range");
  try {
    t.validate();
  } catch (const Error& e) {
    r.fail("train", e.what());
  }
  for (const auto& m : c.baseline_methods) {
    if (m != "gaussian" && m != "tv") r.fail("baseline.methods", "unknown method '" + m + "'");
  }
  for (double s : c.gaussian_sigmas) {
    if (!(s > 0)) r.fail("baseline.gaussian_sigmas", "values must be positive");
  }
  for (double w : c.tv_weights) {
    if (!(w > 0)) r.fail("baseline.tv_weights", "values must be positive");
  }
  if (c.tv_iters < 1) r.fail("baseline.tv_iters", "must be at least 1");
  return c;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
  return s;
}

}  // namespace

PipelineConfig load_config(const fs::path& path, const std::vector<std::string>& overrides) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(path.string() + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  return build(std::move(tree), fs::absolute(path), index_lines(path), overrides);
}

PipelineConfig default_config(const std::vector<std::string>& overrides) {
  return build({}, {}, {}, overrides);
}

std::string PipelineConfig::effective_ini() const {
  const TrainConfig& t = train;
  std::ostringstream os;
  auto range = [](RowRange r) { return std::to_string(r.begin) + ":" + std::to_string(r.end); };
  std::string previews;
  for (std::size_t i = 0; i < preview_rows.size(); ++i) {
    previews += (i ? "," : "") + std::to_string(preview_rows[i]);
  }
  std::string methods;
  for (std::size_t i = 0; i < baseline_methods.size(); ++i) {
    methods += (i ? "," : "") + baseline_methods[i];
  }
  os << "[run]\noutput_dir = " << output_dir.string() << "\nseed = " << seed << "\n\n"
     << "[phantom]\nspec = " << phantom_spec.string() << "\nsize = " << size
     << "\ntexture_count = " << texture_count << "\nrows = " << rows << "\n\n"
     << "[physics]\nz = " << fmt(physics.z) << "\ndelta = " << fmt(physics.delta)
     << "\nmu = " << fmt(physics.mu) << "\npixel_pitch = " << fmt(physics.pixel_pitch)
     << "\nrow_pitch = " << fmt(physics.row_pitch) << "\n\n"
     << "[noise]\nalpha = " << fmt(alpha) << "\nsigma_g = " << fmt(sigma_g)
     << "\nexposure_sweep = " << (exposure_sweep ? "true" : "false") << "\n\n"
     << "[acquisition]\nangles = " << angles << "\nstride = " << stride
     << "\npad_a = " << retrieval_pad.a << "\npad_b = " << retrieval_pad.b << "\n\n"
     << "[subsample]\ndomain = " << to_string(t.sample.domain) << "\n\n"
     << "[train]\nmethod = " << to_string(method) << "\nvariant = " << to_string(t.variant)
     << "\ngamma_mode = "
     << (t.gamma_mode == GammaMode::ramp ? "ramp" : t.gamma_mode == GammaMode::fixed ? "fixed" : "balanced")
     << "\ngamma = " << fmt(t.gamma) << "\nlr = " << fmt(t.initial_lr)
     << "\npatience = " << t.patience << "\nlr_factor = " << fmt(t.lr_factor)
     << "\naccumulation = " << t.accumulation << "\nepochs = " << t.max_epochs
     << "\nsamples_per_epoch = " << t.samples_per_epoch << "\ndepth = " << t.model.depth
     << "\nbase_channels = " << t.model.base_channels
     << "\nleaky_slope = " << fmt(t.model.leaky_slope)
     << "\nresidual = " << (t.model.residual ? "true" : "false")
     << "\nforward_pad_a = " << t.sample.forward_pad.a
     << "\nforward_pad_b = " << t.sample.forward_pad.b << "\nn2inv_x = " << n2inv_x << "\n\n"
     << "[split]\ntrain_rows = " << range(train_rows) << "\nval_rows = " << range(val_rows)
     << "\ntest_rows = " << range(test_rows) << "\n\n"
     << "[eval]\nroi = " << roi_file.string() << "\npreview_rows = " << previews << "\n\n"
     << "[baseline]\nmethods = " << methods << "\ngaussian_sigmas = " << join(gaussian_sigmas)
     << "\ntv_weights = " << join(tv_weights) << "\ntv_iters = " << tv_iters << "\n";
  return os.str();
}

}  // namespace n2i::cli

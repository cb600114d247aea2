#include "n2i/simulate.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "n2i/errors.hpp"
#include "n2i/pad.hpp"
#include "n2i/parallel.hpp"
#include "n2i/phase.hpp"

namespace n2i {
namespace {

// Half-extent of the ellipsoid's in-plane cross-section along direction (nx, ny),
// at the given local z offset; negative when the plane misses the ellipsoid.
double support_half_width(const Ellipsoid& e, double nx, double ny, double dz) {
  const double zz = 1.0 - (e.az > 0 ? dz * dz / (e.az * e.az) : 1.0);
  if (zz <= 0.0) return -1.0;
  const double c = std::cos(e.rotation), s = std::sin(e.rotation);
  const double p1 = nx * c + ny * s;   // component along the rotated x axis
  const double p2 = -nx * s + ny * c;  // along the rotated y axis
  return std::sqrt(zz) * std::sqrt(e.ax * e.ax * p1 * p1 + e.ay * e.ay * p2 * p2);
}

bool inside(const Ellipsoid& e, double x, double y, double z) {
  const double c = std::cos(e.rotation), s = std::sin(e.rotation);
  const double dx = x - e.cx, dy = y - e.cy, dz = z - e.cz;
  const double u = dx * c + dy * s;
  const double v = -dx * s + dy * c;
  return u * u / (e.ax * e.ax) + v * v / (e.ay * e.ay) + dz * dz / (e.az * e.az) <= 1.0;
}

// Chord length (unit coordinates) of the line {s*n + t*d} at height z.
double chord(const Ellipsoid& e, double s, double cos_phi, double sin_phi, double z) {
  const double c = std::cos(e.rotation), sn = std::sin(e.rotation);
  const double px = s * cos_phi - e.cx, py = s * sin_phi - e.cy;
  const double dx = -sin_phi, dy = cos_phi;
  const double pu = px * c + py * sn, pv = -px * sn + py * c;
  const double du = dx * c + dy * sn, dv = -dx * sn + dy * c;
  const double iax2 = 1.0 / (e.ax * e.ax), iay2 = 1.0 / (e.ay * e.ay);
  const double dz = z - e.cz;
  const double a = du * du * iax2 + dv * dv * iay2;
  const double b = 2.0 * (pu * du * iax2 + pv * dv * iay2);
  const double cc = pu * pu * iax2 + pv * pv * iay2 + dz * dz / (e.az * e.az) - 1.0;
  const double disc = b * b - 4.0 * a * cc;
  return disc > 0.0 ? std::sqrt(disc) / a : 0.0;
}

Ellipsoid ellipsoid_from_json(const nlohmann::json& j) {
  Ellipsoid e;
  const auto c = j.at("center").get<std::vector<double>>();
  const auto a = j.at("axes").get<std::vector<double>>();
  if (c.size() != 3 || a.size() != 3) {
    throw ConfigError("phantom: center and axes need three components");
  }
  e.cx = c[0];
  e.cy = c[1];
  e.cz = c[2];
  e.ax = a[0];
  e.ay = a[1];
  e.az = a[2];
  e.rotation = j.value("rotation_deg", 0.0) * std::numbers::pi / 180.0;
  e.density = j.at("density").get<double>();
  return e;
}

}  // namespace

void PhantomSpec::validate() const {
  if (size < 2) throw ConfigError("phantom: size must be >= 2");
  if (supersample < 1) throw ConfigError("phantom: supersample must be >= 1");
  auto check = [&](const Ellipsoid& e, const char* what) {
    if (!(e.ax > 0 && e.ay > 0 && e.az > 0)) {
      throw ConfigError(std::string("phantom: ") + what + " semi-axes must be positive");
    }
    if (allow_truncation) return;
    const double hx = support_half_width(e, 1.0, 0.0, 0.0);
    const double hy = support_half_width(e, 0.0, 1.0, 0.0);
    if (std::abs(e.cx) + hx > 1.0 + 1e-12 || std::abs(e.cy) + hy > 1.0 + 1e-12) {
      throw ConfigError(std::string("phantom: out-of-bounds primitive (") + what + ")");
    }
  };
  for (const auto& e : ellipsoids) check(e, "ellipsoid");
  for (const auto& t : textures) {
    check(t.host, "texture host");
    if (!(t.r_min > 0 && t.r_max >= t.r_min)) {
      throw ConfigError("phantom: texture radius range invalid");
    }
    if (t.density < 0) throw ConfigError("phantom: texture density must be >= 0");
  }
}

PhantomSpec parse_phantom_spec(const std::string& json_text) {
  PhantomSpec spec;
  try {
    const auto j = nlohmann::json::parse(json_text);
    spec.size = j.value("size", spec.size);
    spec.supersample = j.value("supersample", spec.supersample);
    spec.allow_truncation = j.value("allow_truncation", false);
    spec.seed.seed = j.value("seed", std::uint64_t{0});
    for (const auto& e : j.value("ellipsoids", nlohmann::json::array())) {
      spec.ellipsoids.push_back(ellipsoid_from_json(e));
    }
    for (const auto& t : j.value("textures", nlohmann::json::array())) {
      TextureSpec ts;
      ts.count = t.at("count").get<std::size_t>();
      const auto r = t.at("radius").get<std::vector<double>>();
      if (r.size() != 2) throw ConfigError("phantom: texture radius needs [min, max]");
      ts.r_min = r[0];
      ts.r_max = r[1];
      ts.density = t.at("density").get<double>();
      ts.host = ellipsoid_from_json(t.at("host"));
      spec.textures.push_back(ts);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("phantom spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

PhantomSpec load_phantom_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("phantom spec not found: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_phantom_spec(ss.str());
}

PhantomSpec lung_phantom(std::size_t size, std::uint64_t seed, std::size_t texture_count) {
  PhantomSpec spec;
  spec.size = size;
  spec.seed = {seed, 0};
  constexpr double kLong = 50.0;  // cylinders along z
  spec.ellipsoids = {
      {0.0, 0.0, 0.0, 0.85, 0.7, kLong, 0.0, 1.0},       // tissue body
      {-0.4, 0.0, 0.0, 0.3, 0.48, kLong, 0.15, -0.75},   // lungs
      {0.4, 0.0, 0.0, 0.3, 0.48, kLong, -0.15, -0.75},
      {0.42, 0.18, 0.0, 0.1, 0.12, kLong, 0.0, 0.65},    // homogeneous insert
      {0.0, -0.35, 0.0, 0.08, 0.08, kLong, 0.0, -1.0},   // air pocket
  };
  if (texture_count > 0) {
    for (int side : {-1, 1}) {
      TextureSpec t;
      t.count = texture_count / 2;
      t.r_min = 0.012;
      t.r_max = 0.035;
      t.density = 0.45;
      t.host = {0.4 * side, 0.0, 0.0, 0.27, 0.45, kLong, -0.15 * side, 0.0};
      spec.textures.push_back(t);
    }
  }
  spec.validate();
  return spec;
}

std::vector<Ellipsoid> expand_primitives(const PhantomSpec& spec) {
  std::vector<Ellipsoid> out = spec.ellipsoids;
  for (std::size_t t = 0; t < spec.textures.size(); ++t) {
    const TextureSpec& ts = spec.textures[t];
    const CounterRng rng(spec.seed.derive(1000 + t));
    std::uint64_t draw = 0;
    std::size_t placed = 0;
    // Rejection sampling of centres inside the host shrunk by the sphere radius.
    while (placed < ts.count && draw < 1000 * (ts.count + 1)) {
      const double r = ts.r_min + (ts.r_max - ts.r_min) * rng.uniform_at(draw++);
      const double x = ts.host.cx + (2 * rng.uniform_at(draw++) - 1) * ts.host.ax;
      const double y = ts.host.cy + (2 * rng.uniform_at(draw++) - 1) * ts.host.ay;
      const double zspan = std::min(ts.host.az, 1.0);
      const double z = ts.host.cz + (2 * rng.uniform_at(draw++) - 1) * zspan;
      Ellipsoid shrunk = ts.host;
      shrunk.ax = std::max(ts.host.ax - r, 1e-9);
      shrunk.ay = std::max(ts.host.ay - r, 1e-9);
      if (!inside(shrunk, x, y, ts.host.cz)) continue;
      out.push_back({x, y, z, r, r, r, 0.0, ts.density});
      ++placed;
    }
  }
  return out;
}

double row_z(std::size_t row, std::size_t n_b, std::size_t size) {
  return (static_cast<double>(row) - (static_cast<double>(n_b) - 1.0) / 2.0) /
         (static_cast<double>(size) / 2.0);
}

namespace {

Image voxelize_slice(const std::vector<Ellipsoid>& prims, std::size_t n, std::size_t ss,
                     double z) {
  Image img(n, n);
  const double half = static_cast<double>(n) / 2.0;
  const double center = (static_cast<double>(n) - 1.0) / 2.0;
  const double w = 1.0 / static_cast<double>(ss * ss);
  for (const auto& e : prims) {
    const double hx = support_half_width(e, 1.0, 0.0, z - e.cz);
    if (hx < 0) continue;
    const double hy = support_half_width(e, 0.0, 1.0, z - e.cz);
    const auto lo = [&](double c, double h) {
      return static_cast<std::ptrdiff_t>(std::floor((c - h) * half + center - 1));
    };
    const auto hi = [&](double c, double h) {
      return static_cast<std::ptrdiff_t>(std::ceil((c + h) * half + center + 1));
    };
    const auto i0 = std::max<std::ptrdiff_t>(0, lo(e.cy, hy));
    const auto i1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(n) - 1, hi(e.cy, hy));
    const auto j0 = std::max<std::ptrdiff_t>(0, lo(e.cx, hx));
    const auto j1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(n) - 1, hi(e.cx, hx));
    for (auto i = i0; i <= i1; ++i) {
      for (auto j = j0; j <= j1; ++j) {
        std::size_t hits = 0;
        for (std::size_t si = 0; si < ss; ++si) {
          const double y =
              (static_cast<double>(i) - center + (si + 0.5) / ss - 0.5) / half;
          for (std::size_t sj = 0; sj < ss; ++sj) {
            const double x =
                (static_cast<double>(j) - center + (sj + 0.5) / ss - 0.5) / half;
            hits += inside(e, x, y, z) ? 1 : 0;
          }
        }
        if (hits) img(i, j) += e.density * static_cast<double>(hits) * w;
      }
    }
  }
  return img;
}

}  // namespace

Image phantom_slice(const PhantomSpec& spec, std::size_t row, std::size_t n_b) {
  spec.validate();
  const Image img = voxelize_slice(expand_primitives(spec), spec.size, spec.supersample,
                                   row_z(row, n_b, spec.size));
  for (double v : img.values()) {
    if (v < -1e-9) throw ConfigError("phantom: negative density after summation");
  }
  return img;
}

Stack make_phantom(const PhantomSpec& spec, std::size_t n_b) {
  spec.validate();
  const auto prims = expand_primitives(spec);
  Stack vol(n_b, spec.size, spec.size);
  parallel_for(n_b, [&](std::size_t b) {
    vol.set_plane(b, voxelize_slice(prims, spec.size, spec.supersample,
                                    row_z(b, n_b, spec.size)));
  });
  for (double v : vol.values()) {
    if (v < -1e-9) throw ConfigError("phantom: negative density after summation");
  }
  return vol;
}

ProjectionStack project_thickness(const PhantomSpec& spec, std::span<const double> angles,
                                  std::size_t n_b, double pixel_pitch) {
  spec.validate();
  const auto prims = expand_primitives(spec);
  const std::size_t n = spec.size;
  const double half = static_cast<double>(n) / 2.0;
  const double center = (static_cast<double>(n) - 1.0) / 2.0;
  const double unit_to_metres = half * pixel_pitch;
  ProjectionStack out{Stack(angles.size(), n_b, n), {angles.begin(), angles.end()},
                      pixel_pitch, 0.0};
  parallel_for(angles.size(), [&](std::size_t p) {
    const double cphi = std::cos(angles[p]), sphi = std::sin(angles[p]);
    for (std::size_t b = 0; b < n_b; ++b) {
      const double z = row_z(b, n_b, n);
      for (const auto& e : prims) {
        const double h = support_half_width(e, cphi, sphi, z - e.cz);
        if (h < 0) continue;
        const double sc = e.cx * cphi + e.cy * sphi;
        const auto a0 = std::max<std::ptrdiff_t>(
            0, static_cast<std::ptrdiff_t>(std::floor((sc - h) * half + center)));
        const auto a1 = std::min<std::ptrdiff_t>(
            static_cast<std::ptrdiff_t>(n) - 1,
            static_cast<std::ptrdiff_t>(std::ceil((sc + h) * half + center)));
        for (auto a = a0; a <= a1; ++a) {
          const double s = (static_cast<double>(a) - center) / half;
          const double len = chord(e, s, cphi, sphi, z);
          if (len > 0) out.data(p, b, static_cast<std::size_t>(a)) += e.density * len * unit_to_metres;
        }
      }
    }
  });
  return out;
}

Image apply_noise(const Image& clean, const NoiseParams& params, std::uint64_t stream) {
  if (!(params.alpha > 0)) throw ConfigError("noise: alpha must be > 0");
  if (params.sigma_g < 0) throw ConfigError("noise: sigma_g must be >= 0");
  CounterRng rng(params.seed.derive(stream));
  std::normal_distribution<double> gauss(0.0, 1.0);
  Image out(clean.rows(), clean.cols());
  std::size_t clamped = 0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const double expected = params.alpha * std::max(clean.values()[i], 0.0);
    std::poisson_distribution<long long> poisson(expected > 0 ? expected : 1e-300);
    const double counts = expected > 0 ? static_cast<double>(poisson(rng)) : 0.0;
    double v = counts / params.alpha;
    if (params.sigma_g > 0) v += params.sigma_g * gauss(rng);
    if (v < kIntensityFloor) {
      v = kIntensityFloor;
      ++clamped;
    }
    out.values()[i] = v;
  }
  if (clamped > 0) {
    spdlog::warn("apply_noise: clamped {} of {} intensities at {}", clamped, clean.size(),
                 kIntensityFloor);
  }
  return out;
}

ProjectionStack apply_noise(const ProjectionStack& clean, const NoiseParams& params) {
  ProjectionStack out{Stack(clean.n_phi(), clean.n_b(), clean.n_a()), clean.angles,
                      clean.pixel_pitch, clean.row_pitch};
  parallel_for(clean.n_phi(), [&](std::size_t p) {
    out.data.set_plane(p, apply_noise(clean.data.plane(p), params, p));
  });
  return out;
}

Acquisition simulate_acquisition(const PhantomSpec& spec, const PhysicsParams& physics,
                                 const NoiseParams& noise, std::span<const double> angles,
                                 std::size_t n_b, EdgePadding pad) {
  PhysicsParams grid = physics;
  grid.row_pitch = 0.0;
  const std::size_t margin = pad.b;
  ProjectionStack extended = project_thickness(spec, angles, n_b + 2 * margin,
                                               physics.pixel_pitch);
  ProjectionStack propagated = propagate_stack(extended, grid, {pad.a, margin});

  Acquisition acq;
  auto crop_rows = [&](const ProjectionStack& s) {
    ProjectionStack out{Stack(s.n_phi(), n_b, s.n_a()), s.angles, s.pixel_pitch, 0.0};
    for (std::size_t p = 0; p < s.n_phi(); ++p) {
      out.data.set_plane(p, crop(s.data.plane(p), margin, 0, n_b, s.n_a()));
    }
    return out;
  };
  acq.thickness = crop_rows(extended);
  acq.clean = crop_rows(propagated);
  acq.noisy = apply_noise(acq.clean, noise);
  return acq;
}

std::vector<double> exposure_alpha_scales() {
  const std::vector<double> ms = {15, 25, 33, 50, 67, 100, 200};
  std::vector<double> out;
  for (double t : ms) out.push_back(t / 15.0);
  return out;
}

}  // namespace n2i

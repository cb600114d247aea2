#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "n2i/baselines.hpp"
#include "n2i/errors.hpp"
#include "n2i/learn.hpp"
#include "n2i/metrics.hpp"
#include "n2i/nn.hpp"
#include "n2i/phase.hpp"
#include "n2i/simulate.hpp"
#include "n2i/subsample.hpp"
#include "n2i/transforms.hpp"
#include "n2i/volume_io.hpp"

namespace py = pybind11;
using namespace n2i;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Image to_image(const Array& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2D array");
  Image img(a.shape(0), a.shape(1));
  std::memcpy(img.data(), a.data(), img.size() * sizeof(double));
  return img;
}

Array from_image(const Image& img) {
  Array a({img.rows(), img.cols()});
  std::memcpy(a.mutable_data(), img.data(), img.size() * sizeof(double));
  return a;
}

Array from_stack(const Stack& s) {
  Array a({s.dim0(), s.dim1(), s.dim2()});
  std::memcpy(a.mutable_data(), s.values().data(), s.size() * sizeof(double));
  return a;
}

PhysicsParams physics(double z, double delta, double mu, double pixel_pitch) {
  PhysicsParams p;
  p.z = z;
  p.delta = delta;
  p.mu = mu;
  p.pixel_pitch = pixel_pitch;
  p.validate();
  return p;
}

Rect rect(const std::array<std::size_t, 4>& r) { return {r[0], r[1], r[2], r[3]}; }

SubsampleDomain domain(const std::string& d) { return parse_subsample_domain(d); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Phase-contrast CT simulation, reconstruction and self-supervised denoising";

  // Translators run newest first, so the base class goes first.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  // phase
  m.def("paganin_retrieve",
        [](const Array& p, double z, double delta, double mu, double pitch, std::size_t pad_a,
           std::size_t pad_b) {
          return from_image(paganin_retrieve(to_image(p), physics(z, delta, mu, pitch), {pad_a, pad_b}));
        },
        py::arg("projection"), py::arg("z") = 5.0, py::arg("delta") = 1.6e-7, py::arg("mu") = 20.0,
        py::arg("pixel_pitch") = 1e-4, py::arg("pad_a") = 0, py::arg("pad_b") = 0,
        "Thickness from a propagated intensity image.");
  m.def("phase_propagate_forward",
        [](const Array& t, double z, double delta, double mu, double pitch, std::size_t pad_a,
           std::size_t pad_b) {
          return from_image(
              phase_propagate_forward(to_image(t), physics(z, delta, mu, pitch), {pad_a, pad_b}));
        },
        py::arg("thickness"), py::arg("z") = 5.0, py::arg("delta") = 1.6e-7, py::arg("mu") = 20.0,
        py::arg("pixel_pitch") = 1e-4, py::arg("pad_a") = 0, py::arg("pad_b") = 0,
        "Propagated intensity of a thickness map; inverse of paganin_retrieve.");

  // transforms
  m.def("uniform_angles", &uniform_angles, py::arg("n_phi"));
  m.def("radon_forward",
        [](const Array& slice, const std::vector<double>& angles, double pitch, std::size_t n_det) {
          return from_image(radon_forward({to_image(slice), pitch}, angles, n_det).data);
        },
        py::arg("slice"), py::arg("angles"), py::arg("pixel_pitch") = 1.0, py::arg("n_det") = 0);
  m.def("backproject",
        [](const Array& sino, const std::vector<double>& angles, std::size_t n, double pitch) {
          return from_image(backproject({to_image(sino), angles, pitch}, n).data);
        },
        py::arg("sinogram"), py::arg("angles"), py::arg("n"), py::arg("pixel_pitch") = 1.0);
  m.def("fbp_reconstruct",
        [](const Array& sino, const std::vector<double>& angles, double pitch, bool pad) {
          FbpConfig cfg;
          cfg.pad_mode = pad ? SinogramPadding::symmetric_replicate_2x : SinogramPadding::none;
          return from_image(fbp_reconstruct({to_image(sino), angles, pitch}, cfg).data);
        },
        py::arg("sinogram"), py::arg("angles"), py::arg("pixel_pitch") = 1.0, py::arg("pad") = true);

  // simulate
  m.def("simulate",
        [](std::size_t size, std::size_t rows, std::size_t n_phi, double alpha, double sigma_g,
           std::uint64_t seed, std::size_t texture_count) {
          const PhantomSpec spec = lung_phantom(size, seed, texture_count);
          const PhysicsParams ph;
          const NoiseParams noise{alpha, sigma_g, {seed, 2}};
          const auto angles = uniform_angles(n_phi);
          const EdgePadding pad{static_cast<std::size_t>(0.214 * size), 8};
          const Acquisition acq = simulate_acquisition(spec, ph, noise, angles, rows, pad);
          py::dict out;
          out["angles"] = angles;
          out["thickness"] = from_stack(acq.thickness.data);
          out["clean"] = from_stack(acq.clean.data);
          out["noisy"] = from_stack(acq.noisy.data);
          out["phantom"] = from_stack(make_phantom(spec, rows));
          return out;
        },
        py::arg("size") = 64, py::arg("rows") = 16, py::arg("n_phi") = 90, py::arg("alpha") = 1e4,
        py::arg("sigma_g") = 5e-4, py::arg("seed") = 0, py::arg("texture_count") = 40,
        "Built-in lung phantom: (phi, b, a) thickness, clean and noisy stacks and the "
        "(b, y, x) density.");
  m.def("apply_noise",
        [](const Array& clean, double alpha, double sigma_g, std::uint64_t seed, std::uint64_t stream) {
          return from_image(apply_noise(to_image(clean), {alpha, sigma_g, {seed, 0}}, stream));
        },
        py::arg("clean"), py::arg("alpha") = 1e5, py::arg("sigma_g") = 5e-4, py::arg("seed") = 0,
        py::arg("stream") = 0);
  m.def("exposure_alpha_scales", &exposure_alpha_scales);

  // subsample
  m.def("subsample",
        [](const Array& image, std::uint64_t seed, const std::string& dom) {
          const Image img = to_image(image);
          const SubsampleMask mask = make_mask(img.rows(), img.cols(), domain(dom), {seed, 0});
          const SubsampledPair p = apply_mask(img, mask);
          py::array_t<std::uint8_t> codes({mask.cell_rows, mask.cell_cols});
          std::memcpy(codes.mutable_data(), mask.codes.data(), mask.codes.size());
          return py::make_tuple(from_image(p.g1), from_image(p.g2), codes);
        },
        py::arg("image"), py::arg("seed") = 0, py::arg("domain") = "projection",
        "Neighbour subsampling: (g1, g2, per-cell codes 0-7).");

  // learn
  m.def("gamma_schedule",
        [](std::size_t epoch, const std::string& mode, double fixed) {
          return gamma_schedule(epoch, parse_gamma_mode(mode), fixed);
        },
        py::arg("epoch"), py::arg("mode") = "ramp", py::arg("fixed_gamma") = 0.0);

  py::class_<Denoiser>(m, "Denoiser")
      .def(py::init([](std::size_t depth, std::size_t channels, bool residual, std::uint64_t seed) {
             ModelConfig cfg;
             cfg.depth = depth;
             cfg.base_channels = channels;
             cfg.residual = residual;
             Denoiser d(cfg);
             d.initialize({seed, 0});
             return d;
           }),
           py::arg("depth") = 3, py::arg("base_channels") = 16, py::arg("residual") = true,
           py::arg("seed") = 0)
      .def_static("load", &load_checkpoint, py::arg("path"))
      .def("save", [](const Denoiser& d, const std::filesystem::path& p) { save_checkpoint(d, p); })
      .def_property_readonly("parameter_count", &Denoiser::parameter_count)
      .def("denoise", [](const Denoiser& d, const Array& img) {
        return from_image(denoise_slice(d, to_image(img)));
      });

  // metrics
  m.def("psnr",
        [](const Array& a, const Array& ref, double range) { return psnr(to_image(a), to_image(ref), range); },
        py::arg("image"), py::arg("reference"), py::arg("data_range") = 0.0);
  m.def("ssim",
        [](const Array& a, const Array& b, double range) { return ssim(to_image(a), to_image(b), range); },
        py::arg("a"), py::arg("b"), py::arg("data_range") = 0.0);
  m.def("cnr",
        [](const Array& img, const std::array<std::size_t, 4>& tissue, const std::array<std::size_t, 4>& air) {
          return cnr(to_image(img), {rect(tissue), rect(air)});
        },
        py::arg("image"), py::arg("tissue"), py::arg("air"), "Rectangles are (row, col, rows, cols).");
  m.def("edge_resolution",
        [](const Array& img, const std::array<std::size_t, 4>& r, double nx, double ny, std::size_t profiles) {
          return edge_resolution(to_image(img), {rect(r), nx, ny, profiles});
        },
        py::arg("image"), py::arg("rect"), py::arg("normal_x") = 1.0, py::arg("normal_y") = 0.0,
        py::arg("profiles") = 16, "FWHM in pixels of an erf fit across a straight edge.");

  // baselines
  m.def("gaussian_filter", [](const Array& img, double sigma) {
    return from_image(gaussian_filter(to_image(img), sigma));
  }, py::arg("image"), py::arg("sigma"));
  m.def("tv_denoise",
        [](const Array& img, double weight, std::size_t iters) {
          const TvResult r = tv_denoise(to_image(img), weight, iters);
          return py::make_tuple(from_image(r.image), r.converged, r.iterations);
        },
        py::arg("image"), py::arg("weight"), py::arg("iters") = 200);

  // volumes
  m.def("read_volume", [](const std::filesystem::path& p) {
    const Volume v = read_volume(p);
    Array a(std::vector<py::ssize_t>(v.shape.begin(), v.shape.end()));
    std::memcpy(a.mutable_data(), v.values.data(), v.values.size() * sizeof(double));
    return py::make_tuple(a, v.axes, v.pixel_pitch, v.meta.dump());
  }, py::arg("path"), "(array, axes, pixel_pitch, meta JSON text)");
  m.def("write_volume",
        [](const std::filesystem::path& p, const Array& a, const std::string& axes, double pitch) {
          Volume v;
          v.shape.assign(a.shape(), a.shape() + a.ndim());
          v.values.assign(a.data(), a.data() + a.size());
          v.axes = axes;
          v.pixel_pitch = pitch;
          write_volume(v, p);
        },
        py::arg("path"), py::arg("array"), py::arg("axes") = "", py::arg("pixel_pitch") = 1.0);
}

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "thz/config.hpp"
#include "thz/deconv.hpp"
#include "thz/fitting.hpp"
#include "thz/io.hpp"
#include "thz/metrics.hpp"
#include "thz/phantom.hpp"
#include "thz/pipeline.hpp"

namespace py = pybind11;
using namespace thz;

namespace {

using RealArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using ComplexArray = py::array_t<cdouble, py::array::c_style | py::array::forcecast>;

// Images are (ny, nx) arrays; volumes are (ny, nx, nz).
py::array_t<double> to_numpy(const Image& img) {
  py::array_t<double> a({img.ny(), img.nx()});
  std::memcpy(a.mutable_data(), img.values().data(), img.size() * sizeof(double));
  return a;
}

Image to_image(const RealArray& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-D array");
  const auto ny = static_cast<std::size_t>(a.shape(0)), nx = static_cast<std::size_t>(a.shape(1));
  return Image(nx, ny, std::vector<double>(a.data(), a.data() + nx * ny));
}

py::array_t<cdouble> to_numpy(const ComplexVolume& v) {
  py::array_t<cdouble> a({v.ny(), v.nx(), v.nz()});
  std::memcpy(a.mutable_data(), v.pixel(0).data(), v.pixel_count() * v.nz() * sizeof(cdouble));
  return a;
}

ComplexVolume to_volume(const ComplexArray& a, Domain domain) {
  if (a.ndim() != 3) throw std::invalid_argument("expected a 3-D array (ny, nx, nz)");
  const auto ny = static_cast<std::size_t>(a.shape(0)), nx = static_cast<std::size_t>(a.shape(1)),
             nz = static_cast<std::size_t>(a.shape(2));
  return ComplexVolume(nx, ny, nz, domain, std::vector<cdouble>(a.data(), a.data() + nx * ny * nz));
}

Kernel to_kernel(const RealArray& a) {
  if (a.ndim() != 2 || a.shape(0) != a.shape(1)) throw std::invalid_argument("kernel must be a square 2-D array");
  const auto n = static_cast<std::size_t>(a.shape(0));
  return Kernel(n, std::vector<double>(a.data(), a.data() + n * n));
}

py::array_t<double> kernel_numpy(const Kernel& k) {
  py::array_t<double> a({k.size(), k.size()});
  std::memcpy(a.mutable_data(), k.values().data(), k.values().size() * sizeof(double));
  return a;
}

AcquisitionConfig acquisition(std::size_t n_freq, std::size_t pad_factor) {
  AcquisitionConfig cfg;
  cfg.n_freq = n_freq;
  cfg.pad_factor = pad_factor;
  cfg.validate();
  return cfg;
}

py::dict scene_dict(const SceneSpec& s) {
  py::dict d;
  d["kind"] = s.kind;
  d["reflectivity"] = to_numpy(s.reflectivity);
  d["depth_um"] = to_numpy(s.depth_um);
  py::list groups;
  for (const auto& g : s.groups) {
    py::dict gd;
    gd["period_um"] = g.period_um;
    gd["vertical_bars"] = g.orientation == BarOrientation::Vertical;
    groups.append(gd);
  }
  d["groups"] = groups;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Terahertz FMCW volume synthesis, sinc-model fitting and lateral deconvolution";

  py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);

  m.def(
      "synthesize",
      [](const std::string& scene, std::size_t nx, std::size_t ny, std::optional<double> snr_db, std::uint64_t seed,
         std::size_t n_freq, double psf_fwhm_um, std::size_t threads) {
        const AcquisitionConfig cfg = acquisition(n_freq, 9);
        SceneRequest req;
        req.kind = scene;
        req.nx = nx;
        req.ny = ny;
        req.snr_db = snr_db;
        req.seed = seed;
        req.psf_fwhm_um = psf_fwhm_um;
        const SceneSpec s = make_scene(req, cfg);
        ComplexVolume v;
        {
          py::gil_scoped_release release;
          v = synthesize(s, cfg, threads);
        }
        return py::make_tuple(to_numpy(v), scene_dict(s));
      },
      py::arg("scene") = "usaf", py::arg("nx") = 64, py::arg("ny") = 64, py::arg("snr_db") = py::none(),
      py::arg("seed") = 1, py::arg("n_freq") = 1400, py::arg("psf_fwhm_um") = 793.7, py::arg("threads") = 0,
      "Frequency-domain volume (ny, nx, n_freq) and a dict describing the scene.");

  m.def(
      "fit_spectra",
      [](const ComplexArray& volume, std::size_t tau_f, std::size_t pad_factor, std::size_t threads) {
        const ComplexVolume v = to_volume(volume, Domain::Frequency);
        const AcquisitionConfig cfg = acquisition(v.nz(), pad_factor);
        FitOptions o;
        o.tau_f = tau_f;
        o.threads = threads;
        SpectraFitResult r;
        {
          py::gil_scoped_release release;
          r = fit_spectra(v, cfg, o);
        }
        const std::size_t nx = v.nx(), ny = v.ny();
        Image A(nx, ny), mu(nx, ny), sg(nx, ny), phi(nx, ny), rmse(nx, ny), zmax(nx, ny);
        py::array_t<bool> valid({ny, nx});
        auto vv = valid.mutable_unchecked<2>();
        for (std::size_t y = 0; y < ny; ++y)
          for (std::size_t x = 0; x < nx; ++x) {
            const auto& p = r.params(x, y);
            A(x, y) = p.amplitude;
            mu(x, y) = p.mu;
            sg(x, y) = p.sigma;
            phi(x, y) = p.phi;
            rmse(x, y) = p.rmse;
            zmax(x, y) = static_cast<double>(p.z_max);
            vv(y, x) = p.valid;
          }
        py::dict d;
        d["amplitude"] = to_numpy(A);
        d["mu"] = to_numpy(mu);
        d["sigma"] = to_numpy(sg);
        d["phi"] = to_numpy(phi);
        d["rmse"] = to_numpy(rmse);
        d["z_max"] = to_numpy(zmax);
        d["valid"] = valid;
        d["iu"] = to_numpy(r.reference.image);
        d["iv"] = to_numpy(reconstruct_intensity(r.params));
        return d;
      },
      py::arg("volume"), py::arg("tau_f") = 45, py::arg("pad_factor") = 9, py::arg("threads") = 0,
      "Per-pixel modulated-sinc fit. Returns parameter maps plus the intensities iu and iv.");

  m.def("gaussian_kernel", [](std::size_t size, double sigma) { return kernel_numpy(gaussian_kernel(size, sigma)); },
        py::arg("size"), py::arg("sigma_px"));

  m.def(
      "lucy_richardson",
      [](const RealArray& image, const RealArray& kernel, std::size_t iters) {
        return to_numpy(lucy_richardson(IntensityImage(to_image(image)), to_kernel(kernel), iters));
      },
      py::arg("image"), py::arg("kernel"), py::arg("iters") = 50);

  m.def(
      "blind_tv_deconvolve",
      [](const RealArray& image, std::size_t kernel_size, std::optional<double> lam, std::size_t scales,
         std::size_t inner_iters) {
        BlindTvOptions o;
        o.kernel_size = kernel_size;
        o.lambda = lam;
        o.scales = scales;
        o.inner_iters = inner_iters;
        const IntensityImage in(to_image(image));
        BlindTvResult r;
        {
          py::gil_scoped_release release;
          r = blind_tv_deconvolve(in, o);
        }
        return py::make_tuple(to_numpy(r.image), kernel_numpy(r.kernel), r.objective);
      },
      py::arg("image"), py::arg("kernel_size") = 15, py::arg("lam") = py::none(), py::arg("scales") = 4,
      py::arg("inner_iters") = 30, "Returns (image, kernel, objective history).");

  m.def("intensity_psf_sigma_px", &intensity_psf_sigma_px, py::arg("psf_fwhm_um") = 793.7,
        py::arg("lateral_step_um") = 262.5);

  m.def("write_volume", [](const ComplexArray& volume, const std::string& path) {
    write_volume(to_volume(volume, Domain::Frequency), path);
  });
  m.def("read_volume", [](const std::string& path) { return to_numpy(read_volume(path)); });

  m.def(
      "run_pipeline",
      [](const std::string& config_path, const std::map<std::string, std::string>& overrides) {
        Config c = Config::load(config_path);
        for (const auto& [k, v] : overrides) c.set(k, v);
        PipelineReport rep;
        {
          py::gil_scoped_release release;
          rep = run_pipeline(c);
        }
        return py::make_tuple(rep.lines, rep.files);
      },
      py::arg("config_path"), py::arg("overrides") = std::map<std::string, std::string>{},
      "Runs a preset; returns (summary lines, written files).");
}

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "thz/config.hpp"
#include "thz/deconv.hpp"
#include "thz/fitting.hpp"
#include "thz/metrics.hpp"
#include "thz/phantom.hpp"

namespace thz {

struct SceneRequest {
  std::string kind = "usaf";  // step, usaf, metalpcb, textured
  std::size_t nx = 64, ny = 64;
  std::optional<double> snr_db;
  std::uint64_t seed = 1;
  double psf_fwhm_um = 793.7;
};

SceneSpec make_scene(const SceneRequest& req, const AcquisitionConfig& cfg);

/// Reads f_start_hz, f_end_hz, n_freq, pad_factor, lateral_step_um and depth_per_sample_um
/// (auto or a value). Missing keys keep the defaults.
AcquisitionConfig acquisition_from(const Config& c);

/// "model" gives pi (Nz-1)/D, "auto" estimates from the data, anything else is a number.
double resolve_omega(const std::string& spec, const ComplexVolume& frequency, const AcquisitionConfig& cfg);

struct FitStage {
  SpectraFitResult fit;
  double omega = 0.0;
  double z0 = 0.0;
  DepthMaps depth;
  IntensityImage iv;
};

/// Fits a frequency-domain volume. z0 unset means the median mu over the scene's reference
/// region if one is given, else over all valid pixels.
FitStage run_fit(const ComplexVolume& frequency, const AcquisitionConfig& cfg, std::size_t tau_f,
                 const std::string& omega_spec, std::optional<double> z0, const SceneSpec* scene,
                 std::size_t threads);

/// Gaussian intensity PSF width in pixels for a field PSF of the given FWHM: the intensity
/// is |field|^2, so sigma shrinks by sqrt(2).
double intensity_psf_sigma_px(double psf_fwhm_um, double lateral_step_um);

struct DeconvRequest {
  std::string method = "tv-blind";  // tv-blind, lr-gauss, lr-kernel
  BlindTvOptions blind;             // lambda, kernel_size, scales, ... for tv-blind
  std::size_t kernel_size = 15;     // lr-gauss
  double sigma_px = 0.908;          // lr-gauss
  std::size_t lr_iters = 50;
  std::optional<Kernel> kernel;     // lr-kernel
};

struct DeconvOutput {
  IntensityImage image;
  Kernel kernel;
  std::optional<BlindTvResult> blind;
};

DeconvOutput run_deconv(const IntensityImage& observed, const DeconvRequest& req);

/// Keys a pipeline config must define.
const std::vector<std::string>& pipeline_required_keys();
/// Keys it may define in addition.
const std::vector<std::string>& pipeline_optional_keys();

struct PipelineReport {
  std::vector<std::string> lines;  // human-readable summary
  std::vector<std::string> files;  // outputs written, in order
};

/// synth -> fit -> deconv -> eval, writing every product under out_dir. threads overrides
/// the config's thread count when nonzero; numeric outputs do not depend on it.
PipelineReport run_pipeline(const Config& c, std::optional<std::size_t> threads = std::nullopt);

}  // namespace thz

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "thz/core.hpp"
#include "thz/preprocess.hpp"
#include "thz/sinc_model.hpp"
#include "thz/solver.hpp"

namespace thz {

/// Fitting window [first, last] (inclusive) around the magnitude peak.
struct FitWindow {
  std::size_t z_max = 0;
  std::size_t tau_f = 45;
  std::size_t first = 0;
  std::size_t last = 0;
  bool valid = false;

  std::size_t length() const { return valid ? last - first + 1 : 0; }
};

struct FitOptions {
  std::size_t tau_f = 45;
  /// Windows cut short by the volume boundary must keep at least this many
  /// samples (or 2*tau_f+1 if smaller); shorter ones mark the pixel invalid.
  std::size_t min_window = 16;
  SolverOptions solver{};
  std::size_t threads = 0;
};

struct MagnitudeFit {
  double amplitude = 0.0;
  double mu = 0.0;
  double sigma = 0.0;
  bool ok = false;
  int iterations = 0;
};

struct PhaseInit {
  double phi = 0.0;
  bool low_confidence = false;
};

/// Peak search (lowest index on ties) and window clamped to the profile.
/// An all-zero profile yields an invalid window.
FitWindow locate_window(std::span<const cdouble> profile, std::size_t tau_f,
                        std::size_t min_window = 16);

/// Fits A |sinc(sigma (z - mu))| to |u| over the window, starting from
/// A = |u[z_max]|, mu = z_max, sigma = 1/pad_factor.
MagnitudeFit fit_magnitude(std::span<const cdouble> profile, const FitWindow& window,
                           std::size_t pad_factor, const SolverOptions& opts = {});

/// Closed-form phase that best aligns exp(j(phi - omega z)) with the data
/// angles over the window: phi = atan2(sum sin(omega z + arg u), sum cos(...)).
PhaseInit init_phase(std::span<const cdouble> profile, const FitWindow& window, double omega);

/// Complex fit of the modulated sinc over the window, omega fixed.
SincFitParams fit_complex(std::span<const cdouble> profile, const FitWindow& window,
                          const sinc::ComplexParams& init, double omega,
                          const SolverOptions& opts = {});

/// Root-mean-square model error over the window, normalized by 2*tau_f+1.
double window_rmse(std::span<const cdouble> profile, const FitWindow& window,
                   const sinc::ComplexParams& p, double omega);

/// locate -> magnitude -> phase -> complex for one spatial-domain profile.
SincFitParams fit_pixel(std::span<const cdouble> profile, double omega, std::size_t pad_factor,
                        const FitOptions& opts = {});

class ParamGrid {
 public:
  ParamGrid() = default;
  ParamGrid(std::size_t nx, std::size_t ny) : nx_(nx), ny_(ny), params_(nx * ny) {}

  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  SincFitParams& operator()(std::size_t x, std::size_t y) { return params_[y * nx_ + x]; }
  const SincFitParams& operator()(std::size_t x, std::size_t y) const { return params_[y * nx_ + x]; }
  std::span<SincFitParams> params() { return params_; }
  std::span<const SincFitParams> params() const { return params_; }

  std::size_t converged_count() const;

 private:
  std::size_t nx_ = 0, ny_ = 0;
  std::vector<SincFitParams> params_;
};

/// Per-pixel fit of an already transformed (spatial-domain) volume.
ParamGrid fit_volume(const ComplexVolume& spatial, const AcquisitionConfig& cfg,
                     const FitOptions& opts = {});

struct SpectraFitResult {
  ParamGrid params;
  ReferenceIntensity reference;        // I_u and z_mean
  std::vector<double> mean_magnitude;  // mean |u_hat| per padded bin
};

/// Zero-pad, transform and fit each pixel of a frequency-domain volume without
/// materializing the padded spatial volume. I_u comes from a second pass that
/// evaluates the chosen bin directly.
SpectraFitResult fit_spectra(const ComplexVolume& frequency, const AcquisitionConfig& cfg,
                             const FitOptions& opts = {});

/// I_v = A^2; invalid pixels are 0.
IntensityImage reconstruct_intensity(const ParamGrid& grid);

struct DepthMaps {
  DepthMap from_mu;   // (mu - z0) / N * dd
  DepthMap from_max;  // (z_max - z0) / N * dd
};

DepthMaps reconstruct_depth(const ParamGrid& grid, double z0, const AcquisitionConfig& cfg);

struct PixelRegion {
  std::size_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open
};

/// Median fitted mu over the valid pixels in the region.
double estimate_reference_zero(const ParamGrid& grid, const PixelRegion& region);

/// Median of -slope of the unwrapped phase across each profile's half-max main lobe.
/// Needs at least 10 profiles.
double estimate_carrier_omega(std::span<const std::vector<cdouble>> profiles);

/// Same, using the pixels of a spatial volume.
double estimate_carrier_omega(const ComplexVolume& spatial,
                              std::span<const std::size_t> sample_pixels);

/// Picks the `count` pixels with the largest spectral energy (ties: lower index),
/// transforms them and estimates omega.
double estimate_carrier_omega_from_spectra(const ComplexVolume& frequency,
                                           const AcquisitionConfig& cfg, std::size_t count = 32);

}  // namespace thz

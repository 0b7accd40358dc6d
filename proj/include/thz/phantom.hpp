#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "thz/core.hpp"
#include "thz/fitting.hpp"

namespace thz {

/// Full-height band [x0, x1) at a constant depth.
struct StepBand {
  std::size_t x0 = 0, x1 = 0;
  double height_um = 0.0;
};

/// Vertical bars vary along x (they measure horizontal resolution); horizontal bars vary along y.
enum class BarOrientation { Vertical, Horizontal };

/// Three-bar group. Bars have width period/2; the group spans 2.5 periods across
/// the bars and length_px along them, starting at pixel (x0, y0).
struct BarGroup {
  BarOrientation orientation = BarOrientation::Vertical;
  double period_um = 0.0;
  std::size_t x0 = 0, y0 = 0;
  std::size_t length_px = 0;

  double period_px(double lateral_step_um) const { return period_um / lateral_step_um; }
};

struct SceneSpec {
  std::string kind;  // "step", "usaf", "metalpcb", "textured" or "custom"
  std::size_t nx = 0, ny = 0;
  Image reflectivity;  // [0, 1]
  Image depth_um;      // relative to the reference plane
  double psf_fwhm_um = 793.7;
  /// Optional second return per pixel (e.g. the back face of a dielectric board) at
  /// depth + back_offset_um, amplitude back_reflectivity; empty means none.
  Image back_reflectivity;
  double back_offset_um = 0.0;
  std::optional<double> snr_db;  // nullopt: noiseless
  std::uint64_t rng_seed = 1;

  std::vector<StepBand> bands;                     // step scenes, reference band first
  std::vector<BarGroup> groups;                    // USAF scenes
  std::optional<PixelRegion> homogeneous_region;   // rows used for the variance test
  std::optional<PixelRegion> reference_region;     // zero-depth reference
  std::optional<PixelRegion> texture_region;

  void validate() const;
};

inline constexpr double kSubstrateReflectivity = 0.2;
inline constexpr double kMaxTiltUm = 200.0;

/// Adjacent-step depth differences of the metallic step chart, largest first.
std::vector<double> step_chart_differences();
/// Cumulative heights realizing step_chart_differences() from a zero reference.
std::vector<double> step_chart_heights();
/// Bar periods in um, coarse to fine.
std::vector<double> default_usaf_periods();

/// Reference band at depth 0 followed by one full-height band per height, left to right.
SceneSpec make_step_scene(const AcquisitionConfig& cfg, std::span<const double> heights,
                          std::size_t nx, std::size_t ny);

/// Binary chart (metal 1, substrate 0.2) of vertical and horizontal three-bar groups at
/// constant depth, plus a homogeneous band tilted by up to 200 um along x.
SceneSpec make_usaf_scene(const AcquisitionConfig& cfg, std::span<const double> periods,
                          std::size_t nx, std::size_t ny);

/// USAF chart on a thin dielectric board: substrate pixels also return a weaker echo from
/// the board's back face, back_offset_um (optical path) behind the front surface. Metal
/// pixels shadow the back face in proportion to their coverage.
SceneSpec make_metalpcb_scene(const AcquisitionConfig& cfg, std::span<const double> periods,
                              std::size_t nx, std::size_t ny, double back_offset_um = 600.0,
                              double back_amplitude = 0.15);

/// Flat plate with a weak periodic reflectivity ripple (relative amplitude `ripple`).
SceneSpec make_textured_scene(const AcquisitionConfig& cfg, std::size_t nx, std::size_t ny,
                              double ripple = 0.1, double period_px = 3.0);

/// Reflectivity image of `count` random overlapping disks (radius 2 to 9 px, levels 1, 0.5 or
/// the 0.04 background) painted in order. Edges at every orientation make the blur kernel
/// identifiable, which bar charts alone do not.
Image make_disk_image(std::size_t nx, std::size_t ny, std::size_t count, std::uint64_t seed);

/// Distance of the zero-depth plane, one third of the unambiguous range, in metres.
double reference_plane_m(const AcquisitionConfig& cfg);

/// Padded bin where a reflector at depth_um peaks: D * dF * tau mod D.
double predicted_bin(const AcquisitionConfig& cfg, double depth_um);

/// Gaussian lateral PSF taps (unit sum, radius ceil(4 sigma)); a single tap for tiny widths.
std::vector<double> psf_taps(double fwhm_um, double lateral_step_um);

/// Beat-signal volume u[k] = h * (r exp(+j 2 pi f_k tau)) + noise.
ComplexVolume synthesize(const SceneSpec& scene, const AcquisitionConfig& cfg, std::size_t threads = 0);

}  // namespace thz

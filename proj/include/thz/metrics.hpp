#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "thz/core.hpp"
#include "thz/fitting.hpp"
#include "thz/phantom.hpp"

namespace thz {

struct RmseStats {
  Image map;             // per-pixel window RMSE, NaN for invalid pixels
  double mean = 0.0;     // over valid pixels
  double max = 0.0;
  std::size_t valid = 0;
};

/// Aggregates the RMSE stored with each fitted pixel.
RmseStats summarize_rmse(const ParamGrid& grid);

/// Recomputes the window RMSE of every valid pixel against a spatial volume,
/// window [z_max - tau_f, z_max + tau_f] clamped to the profile.
RmseStats fit_rmse_map(const ComplexVolume& spatial, const ParamGrid& grid, double omega,
                       std::size_t tau_f);

struct SweepRow {
  std::size_t tau_f = 0;
  double mean_rmse = 0.0;
  double max_rmse = 0.0;
  std::size_t valid = 0;
  double seconds = 0.0;  // wall time, informational
};

/// Fits the whole frequency-domain volume once per window half-width.
std::vector<SweepRow> window_sweep(const ComplexVolume& frequency, const AcquisitionConfig& cfg,
                                   std::span<const std::size_t> tau_values, const FitOptions& base = {});

struct DepthStepRow {
  double gt_um = 0.0;
  double mu_um = 0.0;
  double max_um = 0.0;
  double error_mu = 0.0;   // (measured - gt) / gt
  double error_max = 0.0;
  bool resolvable_mu = false;   // |error| < 10%
  bool resolvable_max = false;
};

inline constexpr double kResolvableRelativeError = 0.10;

/// Central region of a band: `size` columns wide (at most the band width less one column on
/// each side) and `size` rows tall (at most ny), centred.
PixelRegion band_center_region(const StepBand& band, std::size_t ny, std::size_t size = 10);

/// Mean of the valid depths in a region; NaN if none.
double region_mean_depth(const DepthMap& map, const PixelRegion& region);

/// One row per adjacent band pair, differences taken as band[i+1] - band[i].
std::vector<DepthStepRow> depth_step_table(const DepthMaps& maps, const SceneSpec& scene,
                                           std::size_t region = 10);

struct GroupContrast {
  BarOrientation orientation = BarOrientation::Vertical;
  double period_um = 0.0;
  double lp_per_mm = 0.0;
  double contrast_db = 0.0;  // mean over cross sections of 10 log10(max / min)
  double mtf = 0.0;          // mean over cross sections of (max - min) / (max + min)
  std::size_t cross_sections = 0;
};

struct LinePatternReport {
  std::vector<GroupContrast> groups;
  double horizontal_resolution_um = std::numeric_limits<double>::infinity();  // vertical bars
  double vertical_resolution_um = std::numeric_limits<double>::infinity();    // horizontal bars
};

inline constexpr double kResolutionThresholdDb = 3.0;
/// Ratio floor: min is taken as at least max * 1e-6, capping contrast at 60 dB.
inline constexpr double kContrastFloor = 1e-6;

/// Contrast of one cross section: max over bar pixels against min over gap pixels.
double contrast_db(double bar_max, double gap_min);
double modulation(double bar_max, double gap_min);

/// Per-group contrast. Each cross section runs across the bars; pixels whose centres fall
/// between the first and last bar centres are classed as bar or gap by the phase of the
/// centre. 5% of the cross sections at each end of the group (at least one) are dropped.
LinePatternReport line_pattern_contrast(const Image& intensity, std::span<const BarGroup> groups,
                                        double lateral_step_um);

/// Period where the contrast first falls below 3 dB, scanning the given orientation coarse
/// to fine and interpolating linearly in period. Infinity if the coarsest group is already
/// below; the finest period if none is.
double resolution_3db(std::span<const GroupContrast> groups, BarOrientation orientation);

/// Population variance of each row of the region.
std::vector<double> region_variance(const Image& intensity, const PixelRegion& region);

/// 10 log10(I / max I), clamped below at floor_db.
Image db_image(const Image& intensity, double floor_db = -60.0);

/// Mean over the rows of a region of 10 log10(max / min), same floor as the bar contrast.
double region_contrast_db(const Image& intensity, const PixelRegion& region);

}  // namespace thz

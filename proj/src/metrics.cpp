#include "thz/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace thz {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_region(const Image& img, const PixelRegion& r) {
  if (r.x0 >= r.x1 || r.y0 >= r.y1 || r.x1 > img.nx() || r.y1 > img.ny())
    throw std::invalid_argument("region is empty or outside the image");
}

RmseStats aggregate(Image map) {
  RmseStats s;
  double sum = 0.0;
  for (double v : map.values()) {
    if (std::isnan(v)) continue;
    sum += v;
    s.max = std::max(s.max, v);
    ++s.valid;
  }
  s.mean = s.valid ? sum / static_cast<double>(s.valid) : kNaN;
  if (!s.valid) s.max = kNaN;
  s.map = std::move(map);
  return s;
}

// Pixel offsets across the bars that fall between the first and last bar centres.
void classify_pixels(double period_px, std::vector<std::size_t>& bars, std::vector<std::size_t>& gaps) {
  const auto n = static_cast<std::size_t>(std::ceil(2.5 * period_px - 1e-9));
  for (std::size_t i = 0; i < n; ++i) {
    const double c = static_cast<double>(i) + 0.5;
    if (c < 0.25 * period_px || c > 2.25 * period_px) continue;
    const double phase = std::fmod(c, period_px) / period_px;
    (phase < 0.5 ? bars : gaps).push_back(i);
  }
}

}  // namespace

RmseStats summarize_rmse(const ParamGrid& grid) {
  Image map(grid.nx(), grid.ny(), kNaN);
  for (std::size_t y = 0; y < grid.ny(); ++y)
    for (std::size_t x = 0; x < grid.nx(); ++x)
      if (grid(x, y).valid) map(x, y) = grid(x, y).rmse;
  return aggregate(std::move(map));
}

RmseStats fit_rmse_map(const ComplexVolume& spatial, const ParamGrid& grid, double omega,
                       std::size_t tau_f) {
  if (spatial.nx() != grid.nx() || spatial.ny() != grid.ny())
    throw DataError("parameter grid does not match the volume");
  Image map(grid.nx(), grid.ny(), kNaN);
  for (std::size_t y = 0; y < grid.ny(); ++y)
    for (std::size_t x = 0; x < grid.nx(); ++x) {
      const SincFitParams& p = grid(x, y);
      if (!p.valid) continue;
      const auto profile = spatial.pixel(x, y);
      FitWindow w;
      w.tau_f = tau_f;
      w.z_max = p.z_max;
      w.first = p.z_max >= tau_f ? p.z_max - tau_f : 0;
      w.last = std::min(profile.size() - 1, p.z_max + tau_f);
      w.valid = true;
      map(x, y) = window_rmse(profile, w, {p.amplitude, p.mu, p.sigma, p.phi}, omega);
    }
  return aggregate(std::move(map));
}

std::vector<SweepRow> window_sweep(const ComplexVolume& frequency, const AcquisitionConfig& cfg,
                                   std::span<const std::size_t> tau_values, const FitOptions& base) {
  std::vector<SweepRow> rows;
  for (std::size_t tau : tau_values) {
    FitOptions o = base;
    o.tau_f = tau;
    const auto t0 = std::chrono::steady_clock::now();
    const SpectraFitResult fit = fit_spectra(frequency, cfg, o);
    const auto t1 = std::chrono::steady_clock::now();
    const RmseStats s = summarize_rmse(fit.params);
    rows.push_back({tau, s.mean, s.max, s.valid, std::chrono::duration<double>(t1 - t0).count()});
  }
  return rows;
}

PixelRegion band_center_region(const StepBand& band, std::size_t ny, std::size_t size) {
  if (band.x1 <= band.x0 || ny == 0 || size == 0) throw std::invalid_argument("empty band");
  const std::size_t width = band.x1 - band.x0;
  const std::size_t w = std::min(size, width > 2 ? width - 2 : width);
  const std::size_t h = std::min(size, ny);
  const std::size_t x0 = band.x0 + (width - w) / 2;
  const std::size_t y0 = (ny - h) / 2;
  return {x0, y0, x0 + w, y0 + h};
}

double region_mean_depth(const DepthMap& map, const PixelRegion& region) {
  check_region(map.depth_um, region);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t y = region.y0; y < region.y1; ++y)
    for (std::size_t x = region.x0; x < region.x1; ++x)
      if (map.is_valid(x, y)) {
        sum += map.depth_um(x, y);
        ++n;
      }
  return n ? sum / static_cast<double>(n) : kNaN;
}

std::vector<DepthStepRow> depth_step_table(const DepthMaps& maps, const SceneSpec& scene,
                                           std::size_t region) {
  if (scene.bands.size() < 2) throw std::invalid_argument("depth table needs a step scene with bands");
  if (maps.from_mu.nx() != scene.nx || maps.from_mu.ny() != scene.ny || maps.from_max.nx() != scene.nx ||
      maps.from_max.ny() != scene.ny)
    throw DataError("depth maps do not match the scene size");
  std::vector<double> mu, mx;
  for (const auto& b : scene.bands) {
    const PixelRegion r = band_center_region(b, scene.ny, region);
    mu.push_back(region_mean_depth(maps.from_mu, r));
    mx.push_back(region_mean_depth(maps.from_max, r));
  }
  std::vector<DepthStepRow> rows;
  for (std::size_t i = 0; i + 1 < scene.bands.size(); ++i) {
    DepthStepRow row;
    row.gt_um = scene.bands[i + 1].height_um - scene.bands[i].height_um;
    row.mu_um = mu[i + 1] - mu[i];
    row.max_um = mx[i + 1] - mx[i];
    row.error_mu = (row.mu_um - row.gt_um) / row.gt_um;
    row.error_max = (row.max_um - row.gt_um) / row.gt_um;
    row.resolvable_mu = std::abs(row.error_mu) < kResolvableRelativeError;
    row.resolvable_max = std::abs(row.error_max) < kResolvableRelativeError;
    rows.push_back(row);
  }
  return rows;
}

double contrast_db(double bar_max, double gap_min) {
  if (!(bar_max > 0.0)) return 0.0;
  return 10.0 * std::log10(bar_max / std::max(gap_min, bar_max * kContrastFloor));
}

double modulation(double bar_max, double gap_min) {
  const double s = bar_max + gap_min;
  return s > 0.0 ? (bar_max - gap_min) / s : 0.0;
}

LinePatternReport line_pattern_contrast(const Image& intensity, std::span<const BarGroup> groups,
                                        double lateral_step_um) {
  if (!(lateral_step_um > 0.0)) throw std::invalid_argument("lateral step must be positive");
  LinePatternReport rep;
  for (const BarGroup& g : groups) {
    const double period = g.period_px(lateral_step_um);
    std::vector<std::size_t> bars, gaps;
    classify_pixels(period, bars, gaps);
    if (bars.empty() || gaps.empty() || g.length_px == 0) throw std::invalid_argument("bar group too fine to measure");
    const auto across = static_cast<std::size_t>(std::ceil(2.5 * period - 1e-9));
    const bool vertical = g.orientation == BarOrientation::Vertical;
    const std::size_t w = vertical ? across : g.length_px, h = vertical ? g.length_px : across;
    if (g.x0 + w > intensity.nx() || g.y0 + h > intensity.ny())
      throw DataError("bar group lies outside the image");

    const auto trim = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(0.05 * static_cast<double>(g.length_px))));
    GroupContrast gc;
    gc.orientation = g.orientation;
    gc.period_um = g.period_um;
    gc.lp_per_mm = 1000.0 / g.period_um;
    double db_sum = 0.0, mtf_sum = 0.0;
    for (std::size_t s = trim; s + trim < g.length_px; ++s) {
      auto sample = [&](std::size_t i) {
        return vertical ? intensity(g.x0 + i, g.y0 + s) : intensity(g.x0 + s, g.y0 + i);
      };
      double bmax = -std::numeric_limits<double>::infinity();
      double gmin = std::numeric_limits<double>::infinity();
      for (std::size_t i : bars) bmax = std::max(bmax, sample(i));
      for (std::size_t i : gaps) gmin = std::min(gmin, sample(i));
      db_sum += contrast_db(bmax, gmin);
      mtf_sum += modulation(bmax, gmin);
      ++gc.cross_sections;
    }
    if (gc.cross_sections == 0) throw std::invalid_argument("bar group too short to measure");
    gc.contrast_db = db_sum / static_cast<double>(gc.cross_sections);
    gc.mtf = mtf_sum / static_cast<double>(gc.cross_sections);
    rep.groups.push_back(gc);
  }
  rep.horizontal_resolution_um = resolution_3db(rep.groups, BarOrientation::Vertical);
  rep.vertical_resolution_um = resolution_3db(rep.groups, BarOrientation::Horizontal);
  return rep;
}

double resolution_3db(std::span<const GroupContrast> groups, BarOrientation orientation) {
  std::vector<GroupContrast> g;
  for (const auto& c : groups)
    if (c.orientation == orientation) g.push_back(c);
  std::stable_sort(g.begin(), g.end(), [](const auto& a, const auto& b) { return a.period_um > b.period_um; });
  if (g.empty()) return std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i].contrast_db >= kResolutionThresholdDb) continue;
    if (i == 0) return std::numeric_limits<double>::infinity();
    const GroupContrast& a = g[i - 1];
    const GroupContrast& b = g[i];
    const double t = (kResolutionThresholdDb - a.contrast_db) / (b.contrast_db - a.contrast_db);
    return a.period_um + t * (b.period_um - a.period_um);
  }
  return g.back().period_um;
}

std::vector<double> region_variance(const Image& intensity, const PixelRegion& region) {
  check_region(intensity, region);
  std::vector<double> out;
  const double n = static_cast<double>(region.x1 - region.x0);
  for (std::size_t y = region.y0; y < region.y1; ++y) {
    double mean = 0.0;
    for (std::size_t x = region.x0; x < region.x1; ++x) mean += intensity(x, y);
    mean /= n;
    double var = 0.0;
    for (std::size_t x = region.x0; x < region.x1; ++x) var += (intensity(x, y) - mean) * (intensity(x, y) - mean);
    out.push_back(var / n);
  }
  return out;
}

Image db_image(const Image& intensity, double floor_db) {
  Image out(intensity.nx(), intensity.ny(), floor_db);
  const double peak = intensity.max();
  if (!(peak > 0.0)) return out;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = intensity.values()[i];
    out.values()[i] = v > 0.0 ? std::max(floor_db, 10.0 * std::log10(v / peak)) : floor_db;
  }
  return out;
}

double region_contrast_db(const Image& intensity, const PixelRegion& region) {
  check_region(intensity, region);
  double sum = 0.0;
  for (std::size_t y = region.y0; y < region.y1; ++y) {
    double mx = -std::numeric_limits<double>::infinity(), mn = std::numeric_limits<double>::infinity();
    for (std::size_t x = region.x0; x < region.x1; ++x) {
      mx = std::max(mx, intensity(x, y));
      mn = std::min(mn, intensity(x, y));
    }
    sum += contrast_db(mx, mn);
  }
  return sum / static_cast<double>(region.y1 - region.y0);
}

}  // namespace thz

#include "thz/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "thz/parallel.hpp"

namespace thz {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t pixel_seed(std::uint64_t seed, std::size_t x, std::size_t y) {
  return splitmix64(splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(x)) ^
                    (static_cast<std::uint64_t>(y) << 32));
}

std::size_t reflect(std::ptrdiff_t i, std::size_t n) {
  const auto N = static_cast<std::ptrdiff_t>(n);
  if (N == 1) return 0;
  const std::ptrdiff_t period = 2 * N;
  i %= period;
  if (i < 0) i += period;
  return static_cast<std::size_t>(i < N ? i : period - 1 - i);
}

// Length of [a, b) covered by the three bars of a group along its varying axis.
double bar_coverage(double a, double b, double start, double period) {
  double cov = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double lo = start + i * period;
    const double hi = lo + 0.5 * period;
    cov += std::max(0.0, std::min(b, hi) - std::max(a, lo));
  }
  return cov;
}

struct Rect {
  std::size_t w, h;
};

Rect group_footprint(const BarGroup& g, double step) {
  const auto across = static_cast<std::size_t>(std::ceil(2.5 * g.period_px(step) - 1e-9));
  if (g.orientation == BarOrientation::Vertical) return {across, g.length_px};
  return {g.length_px, across};
}

}  // namespace

void SceneSpec::validate() const {
  if (nx == 0 || ny == 0) throw std::invalid_argument("scene has zero size");
  if (reflectivity.nx() != nx || reflectivity.ny() != ny || depth_um.nx() != nx || depth_um.ny() != ny)
    throw std::invalid_argument("scene maps do not match nx x ny");
  for (double r : reflectivity.values())
    if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("reflectivity outside [0, 1]");
  for (double d : depth_um.values())
    if (!std::isfinite(d)) throw std::invalid_argument("depth map not finite");
  if (!(psf_fwhm_um > 0.0)) throw std::invalid_argument("psf_fwhm must be positive");
  if (!back_reflectivity.empty()) {
    if (back_reflectivity.nx() != nx || back_reflectivity.ny() != ny)
      throw std::invalid_argument("back reflectivity does not match nx x ny");
    for (double r : back_reflectivity.values())
      if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("back reflectivity outside [0, 1]");
    if (!std::isfinite(back_offset_um) || back_offset_um < 0.0) throw std::invalid_argument("invalid back offset");
  }
}

std::vector<double> step_chart_differences() {
  return {4009.0, 2987.0, 2006.0, 1004.0, 903.0, 803.0, 703.0,
          600.0,  472.0,  410.0,  298.0,  208.0, 91.0,  42.0};
}

std::vector<double> step_chart_heights() {
  std::vector<double> h;
  double acc = 0.0;
  for (double d : step_chart_differences()) h.push_back(acc += d);
  return h;
}

std::vector<double> default_usaf_periods() {
  return {2100.0, 1575.0, 1312.5, 1050.0, 918.75, 787.5, 692.4, 603.75, 525.0};
}

SceneSpec make_step_scene(const AcquisitionConfig& cfg, std::span<const double> heights,
                          std::size_t nx, std::size_t ny) {
  cfg.validate();
  if (heights.empty()) throw std::invalid_argument("step scene needs at least one step");
  if (nx == 0 || ny == 0) throw std::invalid_argument("scene has zero size");
  const std::size_t nb = heights.size() + 1;
  SceneSpec s;
  s.kind = "step";
  s.nx = nx;
  s.ny = ny;
  s.reflectivity = Image(nx, ny, 1.0);
  s.depth_um = Image(nx, ny, 0.0);
  for (std::size_t b = 0; b < nb; ++b) {
    StepBand band;
    band.x0 = static_cast<std::size_t>(std::llround(static_cast<double>(b * nx) / static_cast<double>(nb)));
    band.x1 = static_cast<std::size_t>(std::llround(static_cast<double>((b + 1) * nx) / static_cast<double>(nb)));
    if (band.x1 <= band.x0) throw std::invalid_argument("step bands have zero area for this nx");
    band.height_um = b == 0 ? 0.0 : heights[b - 1];
    for (std::size_t y = 0; y < ny; ++y)
      for (std::size_t x = band.x0; x < band.x1; ++x) s.depth_um(x, y) = band.height_um;
    s.bands.push_back(band);
  }
  s.reference_region = PixelRegion{s.bands[0].x0, 0, s.bands[0].x1, ny};
  return s;
}

SceneSpec make_usaf_scene(const AcquisitionConfig& cfg, std::span<const double> periods,
                          std::size_t nx, std::size_t ny) {
  cfg.validate();
  const double step = cfg.lateral_step_um;
  for (double p : periods)
    if (p < 2.0 * step - 1e-9)
      throw std::invalid_argument("bar period below the lateral sampling limit (2 x lateral step)");

  constexpr std::size_t kBorder = 4, kGap = 6, kBarLength = 16;
  constexpr std::size_t kBandRows = 18, kBandMargin = 4;

  SceneSpec s;
  s.kind = "usaf";
  s.nx = nx;
  s.ny = ny;
  s.reflectivity = Image(nx, ny, kSubstrateReflectivity);
  s.depth_um = Image(nx, ny, 0.0);

  std::vector<BarGroup> groups;
  for (auto orient : {BarOrientation::Vertical, BarOrientation::Horizontal})
    for (double p : periods) groups.push_back({orient, p, 0, 0, kBarLength});

  const std::size_t band_h = kBandRows + 2 * kBandMargin;
  if (ny < band_h + 2 * kBorder + kGap || nx < 2 * kBorder + 2 * kBandMargin + 4)
    throw std::invalid_argument("USAF chart does not fit the requested size");
  const std::size_t chart_bottom = ny - kBorder - band_h - kGap;

  // Shelf packing, left to right, top to bottom.
  std::size_t cx = kBorder, cy = kBorder, shelf_h = 0;
  for (auto& g : groups) {
    const Rect r = group_footprint(g, step);
    if (cx + r.w > nx - kBorder) {
      cx = kBorder;
      cy += shelf_h + kGap;
      shelf_h = 0;
    }
    if (cx + r.w > nx - kBorder || cy + r.h > chart_bottom)
      throw std::invalid_argument("USAF chart does not fit the requested size");
    g.x0 = cx;
    g.y0 = cy;
    cx += r.w + kGap;
    shelf_h = std::max(shelf_h, r.h);
  }

  for (const auto& g : groups) {
    const double period = g.period_px(step);
    const Rect r = group_footprint(g, step);
    for (std::size_t j = 0; j < r.h; ++j) {
      for (std::size_t i = 0; i < r.w; ++i) {
        const double along = g.orientation == BarOrientation::Vertical ? static_cast<double>(i)
                                                                     : static_cast<double>(j);
        const double cov = std::min(1.0, bar_coverage(along, along + 1.0, 0.0, period));
        s.reflectivity(g.x0 + i, g.y0 + j) =
            kSubstrateReflectivity + (1.0 - kSubstrateReflectivity) * cov;
      }
    }
  }
  s.groups = std::move(groups);

  // Tilted homogeneous band along the bottom.
  const std::size_t by0 = ny - kBorder - band_h, by1 = ny - kBorder;
  const std::size_t bx0 = kBorder, bx1 = nx - kBorder;
  for (std::size_t y = by0; y < by1; ++y)
    for (std::size_t x = bx0; x < bx1; ++x) {
      s.reflectivity(x, y) = 1.0;
      s.depth_um(x, y) = kMaxTiltUm * static_cast<double>(x - bx0) / static_cast<double>(bx1 - bx0 - 1);
    }
  s.homogeneous_region =
      PixelRegion{bx0 + 2 * kBandMargin, by0 + kBandMargin, bx1 - 2 * kBandMargin, by1 - kBandMargin};
  s.reference_region = PixelRegion{0, 0, nx, kBorder};
  return s;
}

SceneSpec make_metalpcb_scene(const AcquisitionConfig& cfg, std::span<const double> periods,
                              std::size_t nx, std::size_t ny, double back_offset_um,
                              double back_amplitude) {
  if (!(back_amplitude >= 0.0 && back_amplitude <= 1.0) || !(back_offset_um >= 0.0))
    throw std::invalid_argument("invalid board back-face parameters");
  SceneSpec s = make_usaf_scene(cfg, periods, nx, ny);
  s.kind = "metalpcb";
  s.back_offset_um = back_offset_um;
  s.back_reflectivity = Image(nx, ny);
  for (std::size_t i = 0; i < s.reflectivity.size(); ++i) {
    const double metal = (s.reflectivity.values()[i] - kSubstrateReflectivity) / (1.0 - kSubstrateReflectivity);
    s.back_reflectivity.values()[i] = back_amplitude * std::clamp(1.0 - metal, 0.0, 1.0);
  }
  return s;
}

SceneSpec make_textured_scene(const AcquisitionConfig& cfg, std::size_t nx, std::size_t ny,
                              double ripple, double period_px) {
  cfg.validate();
  if (nx < 16 || ny < 16) throw std::invalid_argument("textured scene needs at least 16 x 16 pixels");
  if (!(ripple >= 0.0 && ripple <= 1.0) || !(period_px >= 2.0))
    throw std::invalid_argument("invalid texture parameters");
  SceneSpec s;
  s.kind = "textured";
  s.nx = nx;
  s.ny = ny;
  s.reflectivity = Image(nx, ny, kSubstrateReflectivity);
  s.depth_um = Image(nx, ny, 0.0);
  const std::size_t m = 4;
  for (std::size_t y = m; y < ny - m; ++y)
    for (std::size_t x = m; x < nx - m; ++x) {
      const double t = 2.0 * kPi * static_cast<double>(x) / period_px;
      const double u = 2.0 * kPi * static_cast<double>(y) / period_px;
      s.reflectivity(x, y) = std::clamp(0.8 * (1.0 + 0.5 * ripple * (std::cos(t) + std::cos(u))), 0.0, 1.0);
    }
  s.texture_region = PixelRegion{2 * m, 2 * m, nx - 2 * m, ny - 2 * m};
  s.reference_region = s.texture_region;
  return s;
}

Image make_disk_image(std::size_t nx, std::size_t ny, std::size_t count, std::uint64_t seed) {
  if (nx == 0 || ny == 0) throw std::invalid_argument("disk image must be non-empty");
  constexpr double kBackground = 0.04;
  Image img(nx, ny, kBackground);
  std::mt19937_64 rng(splitmix64(seed));
  auto uniform = [&](double lo, double hi) {
    return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
  };
  const double levels[] = {1.0, kBackground, 0.5};
  for (std::size_t i = 0; i < count; ++i) {
    const double cx = uniform(0.0, static_cast<double>(nx));
    const double cy = uniform(0.0, static_cast<double>(ny));
    const double r = uniform(2.0, 9.0);
    const double level = levels[rng() % 3];
    for (std::size_t y = 0; y < ny; ++y)
      for (std::size_t x = 0; x < nx; ++x) {
        const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
        if (dx * dx + dy * dy <= r * r) img(x, y) = level;
      }
  }
  return img;
}

double reference_plane_m(const AcquisitionConfig& cfg) {
  const double dF = cfg.bandwidth_hz() / static_cast<double>(cfg.n_freq - 1);
  return kSpeedOfLight / (2.0 * dF) / 3.0;
}

double predicted_bin(const AcquisitionConfig& cfg, double depth_um) {
  const double dF = cfg.bandwidth_hz() / static_cast<double>(cfg.n_freq - 1);
  const double tau = 2.0 * (reference_plane_m(cfg) + depth_um * 1e-6) / kSpeedOfLight;
  const double D = static_cast<double>(cfg.padded_length());
  double z = std::fmod(D * dF * tau, D);
  if (z < 0.0) z += D;
  return z;
}

std::vector<double> psf_taps(double fwhm_um, double lateral_step_um) {
  const double sigma = fwhm_um / (2.0 * std::sqrt(2.0 * std::log(2.0))) / lateral_step_um;
  if (sigma < 1e-3) return {1.0};
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(4.0 * sigma));
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    taps[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& t : taps) t /= sum;
  return taps;
}

ComplexVolume synthesize(const SceneSpec& scene, const AcquisitionConfig& cfg, std::size_t threads) {
  cfg.validate();
  scene.validate();
  const std::size_t nx = scene.nx, ny = scene.ny, nz = cfg.n_freq;
  const double dF = cfg.bandwidth_hz() / static_cast<double>(nz - 1);
  const double z_ref = reference_plane_m(cfg);

  // Unblurred field per pixel.
  ComplexVolume field(nx, ny, nz, Domain::Frequency, cfg.lateral_step_um);
  parallel_for(nx * ny, threads, [&](std::size_t p) {
    const std::size_t x = p % nx, y = p / nx;
    const double r = scene.reflectivity(x, y);
    const double tau = 2.0 * (z_ref + scene.depth_um(x, y) * 1e-6) / kSpeedOfLight;
    auto px = field.pixel(p);
    for (std::size_t k = 0; k < nz; ++k) {
      double cycles = (cfg.f_start_hz + static_cast<double>(k) * dF) * tau;
      cycles -= std::floor(cycles);
      px[k] = std::polar(r, 2.0 * kPi * cycles);
    }
    if (!scene.back_reflectivity.empty() && scene.back_reflectivity(x, y) != 0.0) {
      const double rb = scene.back_reflectivity(x, y);
      const double tau_b = tau + 2.0 * scene.back_offset_um * 1e-6 / kSpeedOfLight;
      for (std::size_t k = 0; k < nz; ++k) {
        double cycles = (cfg.f_start_hz + static_cast<double>(k) * dF) * tau_b;
        cycles -= std::floor(cycles);
        px[k] += std::polar(rb, 2.0 * kPi * cycles);
      }
    }
  });

  const std::vector<double> taps = psf_taps(scene.psf_fwhm_um, cfg.lateral_step_um);
  const auto radius = static_cast<std::ptrdiff_t>(taps.size() / 2);
  if (radius > 0) {
    // Separable blur of whole z-profiles; every frequency bin sees the same kernel.
    ComplexVolume tmp(nx, ny, nz, Domain::Frequency, cfg.lateral_step_um);
    parallel_for(nx * ny, threads, [&](std::size_t p) {
      const std::size_t x = p % nx, y = p / nx;
      auto dst = tmp.pixel(p);
      std::fill(dst.begin(), dst.end(), cdouble{});
      for (std::ptrdiff_t t = -radius; t <= radius; ++t) {
        const double w = taps[static_cast<std::size_t>(t + radius)];
        auto src = field.pixel(reflect(static_cast<std::ptrdiff_t>(x) + t, nx), y);
        for (std::size_t k = 0; k < nz; ++k) dst[k] += w * src[k];
      }
    });
    parallel_for(nx * ny, threads, [&](std::size_t p) {
      const std::size_t x = p % nx, y = p / nx;
      auto dst = field.pixel(p);
      std::fill(dst.begin(), dst.end(), cdouble{});
      for (std::ptrdiff_t t = -radius; t <= radius; ++t) {
        const double w = taps[static_cast<std::size_t>(t + radius)];
        auto src = tmp.pixel(x, reflect(static_cast<std::ptrdiff_t>(y) + t, ny));
        for (std::size_t k = 0; k < nz; ++k) dst[k] += w * src[k];
      }
    });
  }

  if (scene.snr_db && std::isfinite(*scene.snr_db)) {
    const double peak = scene.reflectivity.max();
    const double noise_power = peak * peak / std::pow(10.0, *scene.snr_db / 10.0);
    const double sd = std::sqrt(noise_power / 2.0);
    parallel_for(nx * ny, threads, [&](std::size_t p) {
      const std::size_t x = p % nx, y = p / nx;
      std::mt19937_64 rng(pixel_seed(scene.rng_seed, x, y));
      std::normal_distribution<double> normal(0.0, sd);
      for (auto& s : field.pixel(p)) {
        const double re = normal(rng);
        const double im = normal(rng);
        s += cdouble(re, im);
      }
    });
  }
  return field;
}

}  // namespace thz

#include "thz/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "thz/parallel.hpp"

namespace thz {

namespace {

double median(std::vector<double> v) {
  if (v.empty()) throw NumericalError("median of an empty set");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

SincFitParams invalid_pixel(std::size_t z_max) {
  SincFitParams p;
  p.valid = false;
  p.converged = false;
  p.z_max = z_max;
  return p;
}

}  // namespace

FitWindow locate_window(std::span<const cdouble> profile, std::size_t tau_f, std::size_t min_window) {
  FitWindow w;
  w.tau_f = tau_f;
  if (profile.empty()) return w;
  std::size_t best = 0;
  double best_mag = std::abs(profile[0]);
  for (std::size_t z = 1; z < profile.size(); ++z) {
    const double m = std::abs(profile[z]);
    if (m > best_mag) {
      best_mag = m;
      best = z;
    }
  }
  w.z_max = best;
  if (!(best_mag > 0.0)) return w;
  w.first = best >= tau_f ? best - tau_f : 0;
  w.last = std::min(profile.size() - 1, best + tau_f);
  const std::size_t needed = std::min(min_window, 2 * tau_f + 1);
  w.valid = (w.last - w.first + 1) >= needed;
  return w;
}

MagnitudeFit fit_magnitude(std::span<const cdouble> profile, const FitWindow& window,
                           std::size_t pad_factor, const SolverOptions& opts) {
  if (!window.valid) throw std::invalid_argument("fit_magnitude: invalid window");
  const std::size_t n = window.length();
  std::vector<double> mag(n);
  for (std::size_t i = 0; i < n; ++i) mag[i] = std::abs(profile[window.first + i]);

  MagnitudeFit init;
  init.amplitude = std::abs(profile[window.z_max]);
  init.mu = static_cast<double>(window.z_max);
  init.sigma = std::min(1.0, 1.0 / static_cast<double>(std::max<std::size_t>(pad_factor, 1)));

  LeastSquaresProblem prob;
  prob.n_params = 3;
  prob.n_residuals = n;
  const std::size_t z0 = window.first;
  prob.residual = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
    sinc::magnitude_residuals(x, z0, mag, r);
  };
  prob.jacobian = [&](const Eigen::VectorXd& x, Eigen::MatrixXd& J) {
    sinc::magnitude_jacobian(x, z0, n, J);
  };
  prob.lower = Eigen::Vector3d(0.0, static_cast<double>(window.first), 1e-6);
  prob.upper = Eigen::Vector3d(INFINITY, static_cast<double>(window.last), 1.0);

  if (n < prob.n_params) return init;
  const SolverReport rep = solve(prob, Eigen::Vector3d(init.amplitude, init.mu, init.sigma), opts);
  if (!rep.success) {
    init.iterations = rep.iterations;
    return init;
  }
  MagnitudeFit out;
  out.amplitude = rep.solution[0];
  out.mu = rep.solution[1];
  out.sigma = rep.solution[2];
  out.ok = true;
  out.iterations = rep.iterations;
  return out;
}

PhaseInit init_phase(std::span<const cdouble> profile, const FitWindow& window, double omega) {
  if (!window.valid) throw std::invalid_argument("init_phase: invalid window");
  double s = 0.0, c = 0.0;
  for (std::size_t z = window.first; z <= window.last; ++z) {
    const double a = omega * static_cast<double>(z) + std::arg(profile[z]);
    s += std::sin(a);
    c += std::cos(a);
  }
  PhaseInit out;
  if (std::hypot(s, c) < 1e-12) {
    out.low_confidence = true;
    return out;
  }
  out.phi = wrap_phase(std::atan2(s, c));
  return out;
}

double window_rmse(std::span<const cdouble> profile, const FitWindow& window,
                   const sinc::ComplexParams& p, double omega) {
  double ss = 0.0;
  for (std::size_t z = window.first; z <= window.last; ++z)
    ss += std::norm(profile[z] - sinc::model(p, omega, static_cast<double>(z)));
  return std::sqrt(ss / static_cast<double>(2 * window.tau_f + 1));
}

SincFitParams fit_complex(std::span<const cdouble> profile, const FitWindow& window,
                          const sinc::ComplexParams& init, double omega, const SolverOptions& opts) {
  if (!window.valid) throw std::invalid_argument("fit_complex: invalid window");
  const std::size_t n = window.length();
  const auto data = profile.subspan(window.first, n);
  const std::size_t z0 = window.first;

  LeastSquaresProblem prob;
  prob.n_params = 4;
  prob.n_residuals = 2 * n;
  prob.residual = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
    sinc::complex_residuals(x, omega, z0, data, r);
  };
  prob.jacobian = [&](const Eigen::VectorXd& x, Eigen::MatrixXd& J) {
    sinc::complex_jacobian(x, omega, z0, n, J);
  };
  prob.lower = Eigen::Vector4d(0.0, static_cast<double>(window.first), 1e-6, -INFINITY);
  prob.upper = Eigen::Vector4d(INFINITY, static_cast<double>(window.last), 1.0, INFINITY);

  Eigen::Vector4d x0(init.amplitude, init.mu, init.sigma, init.phi);
  x0 = x0.cwiseMax(prob.lower).cwiseMin(prob.upper);

  SincFitParams out;
  out.valid = true;
  out.z_max = window.z_max;
  sinc::ComplexParams best{x0[0], x0[1], x0[2], x0[3]};
  if (prob.n_residuals >= prob.n_params) {
    const SolverReport rep = solve(prob, x0, opts);
    out.iterations = static_cast<std::uint32_t>(rep.iterations);
    out.converged = rep.success;
    if (rep.success) best = {rep.solution[0], rep.solution[1], rep.solution[2], rep.solution[3]};
  }
  out.amplitude = best.amplitude;
  out.mu = best.mu;
  out.sigma = best.sigma;
  out.phi = wrap_phase(best.phi);
  out.rmse = window_rmse(profile, window, best, omega);
  return out;
}

SincFitParams fit_pixel(std::span<const cdouble> profile, double omega, std::size_t pad_factor,
                        const FitOptions& opts) {
  const FitWindow w = locate_window(profile, opts.tau_f, opts.min_window);
  if (!w.valid) return invalid_pixel(w.z_max);
  const MagnitudeFit mag = fit_magnitude(profile, w, pad_factor, opts.solver);
  const PhaseInit ph = init_phase(profile, w, omega);
  // Unit phasors from negative sidelobes can outvote the main lobe and leave the
  // closed-form phase off by pi; start from whichever branch fits better.
  sinc::ComplexParams init{mag.amplitude, mag.mu, mag.sigma, ph.phi};
  sinc::ComplexParams flipped = init;
  flipped.phi = wrap_phase(ph.phi + kPi);
  if (window_rmse(profile, w, flipped, omega) < window_rmse(profile, w, init, omega)) init = flipped;
  return fit_complex(profile, w, init, omega, opts.solver);
}

std::size_t ParamGrid::converged_count() const {
  return static_cast<std::size_t>(
      std::count_if(params_.begin(), params_.end(), [](const SincFitParams& p) { return p.converged; }));
}

ParamGrid fit_volume(const ComplexVolume& spatial, const AcquisitionConfig& cfg, const FitOptions& opts) {
  if (spatial.domain() != Domain::Spatial)
    throw std::invalid_argument("fit_volume expects a spatial-domain volume");
  ParamGrid grid(spatial.nx(), spatial.ny());
  const double omega = cfg.omega();
  auto out = grid.params();
  parallel_for(spatial.pixel_count(), opts.threads, [&](std::size_t p) {
    out[p] = fit_pixel(spatial.pixel(p), omega, cfg.pad_factor, opts);
  });
  return grid;
}

SpectraFitResult fit_spectra(const ComplexVolume& frequency, const AcquisitionConfig& cfg,
                             const FitOptions& opts) {
  if (frequency.domain() != Domain::Frequency)
    throw std::invalid_argument("fit_spectra expects a frequency-domain volume");
  const std::size_t nx = frequency.nx(), ny = frequency.ny();
  const std::size_t nz = frequency.nz();
  const std::size_t D = nz * cfg.pad_factor;
  const double omega = cfg.omega();

  SpectraFitResult res;
  res.params = ParamGrid(nx, ny);
  auto out = res.params.params();
  std::vector<std::vector<double>> row_mag(ny);

  parallel_chunks(ny, opts.threads, [&](std::size_t yb, std::size_t ye, std::size_t) {
    DerampTransform tr(nz, cfg.pad_factor);
    std::vector<cdouble> profile(D);
    for (std::size_t y = yb; y < ye; ++y) {
      std::vector<double> acc(D, 0.0);
      for (std::size_t x = 0; x < nx; ++x) {
        const std::size_t p = y * nx + x;
        tr.apply(frequency.pixel(p), profile);
        for (std::size_t z = 0; z < D; ++z) acc[z] += std::abs(profile[z]);
        out[p] = fit_pixel(profile, omega, cfg.pad_factor, opts);
      }
      row_mag[y] = std::move(acc);
    }
  });

  res.mean_magnitude.assign(D, 0.0);
  for (std::size_t y = 0; y < ny; ++y)
    for (std::size_t z = 0; z < D; ++z) res.mean_magnitude[z] += row_mag[y][z];
  for (double& v : res.mean_magnitude) v /= static_cast<double>(nx * ny);

  res.reference.z_mean = argmax_lowest(res.mean_magnitude);
  res.reference.image = IntensityImage(nx, ny);
  auto iu = res.reference.image.values();
  parallel_for(nx * ny, opts.threads, [&](std::size_t p) {
    iu[p] = std::norm(padded_dft_bin(frequency.pixel(p), D, res.reference.z_mean));
  });
  return res;
}

IntensityImage reconstruct_intensity(const ParamGrid& grid) {
  IntensityImage img(grid.nx(), grid.ny());
  auto v = img.values();
  const auto ps = grid.params();
  for (std::size_t i = 0; i < ps.size(); ++i)
    v[i] = ps[i].valid ? ps[i].amplitude * ps[i].amplitude : 0.0;
  return img;
}

DepthMaps reconstruct_depth(const ParamGrid& grid, double z0, const AcquisitionConfig& cfg) {
  const double per_sample = depth_per_sample(cfg) / static_cast<double>(cfg.pad_factor);
  DepthMaps maps{DepthMap(grid.nx(), grid.ny()), DepthMap(grid.nx(), grid.ny())};
  const auto ps = grid.params();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (!ps[i].valid) continue;
    maps.from_mu.depth_um.values()[i] = (ps[i].mu - z0) * per_sample;
    maps.from_mu.valid[i] = 1;
    maps.from_max.depth_um.values()[i] = (static_cast<double>(ps[i].z_max) - z0) * per_sample;
    maps.from_max.valid[i] = 1;
  }
  return maps;
}

double estimate_reference_zero(const ParamGrid& grid, const PixelRegion& region) {
  if (region.x1 > grid.nx() || region.y1 > grid.ny() || region.x0 >= region.x1 || region.y0 >= region.y1)
    throw std::invalid_argument("reference region outside the grid or empty");
  std::vector<double> mus;
  for (std::size_t y = region.y0; y < region.y1; ++y)
    for (std::size_t x = region.x0; x < region.x1; ++x)
      if (grid(x, y).valid) mus.push_back(grid(x, y).mu);
  if (mus.empty()) throw NumericalError("no valid pixels in the reference region");
  return median(std::move(mus));
}

namespace {

// -slope of the unwrapped phase over the contiguous half-max lobe around the peak.
std::optional<double> lobe_phase_slope(std::span<const cdouble> profile) {
  if (profile.size() < 3) return std::nullopt;
  std::size_t peak = 0;
  for (std::size_t z = 1; z < profile.size(); ++z)
    if (std::abs(profile[z]) > std::abs(profile[peak])) peak = z;
  const double half = 0.5 * std::abs(profile[peak]);
  if (!(half > 0.0)) return std::nullopt;
  std::size_t lo = peak, hi = peak;
  while (lo > 0 && std::abs(profile[lo - 1]) >= half) --lo;
  while (hi + 1 < profile.size() && std::abs(profile[hi + 1]) >= half) ++hi;
  if (hi - lo < 1) return std::nullopt;

  const std::size_t n = hi - lo + 1;
  std::vector<double> phase(n);
  phase[0] = std::arg(profile[lo]);
  for (std::size_t i = 1; i < n; ++i) {
    double d = std::arg(profile[lo + i]) - std::arg(profile[lo + i - 1]);
    d = wrap_phase(d);
    phase[i] = phase[i - 1] + d;
  }
  // Least-squares slope against the window-relative index.
  const double mean_i = 0.5 * static_cast<double>(n - 1);
  const double mean_p = std::accumulate(phase.begin(), phase.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double di = static_cast<double>(i) - mean_i;
    sxy += di * (phase[i] - mean_p);
    sxx += di * di;
  }
  return -sxy / sxx;
}

}  // namespace

double estimate_carrier_omega(std::span<const std::vector<cdouble>> profiles) {
  if (profiles.size() < 10) throw std::invalid_argument("carrier estimate needs at least 10 pixels");
  std::vector<double> slopes;
  for (const auto& p : profiles)
    if (auto s = lobe_phase_slope(p)) slopes.push_back(*s);
  if (slopes.size() < 10) throw NumericalError("too few usable pixels for the carrier estimate");
  return median(std::move(slopes));
}

double estimate_carrier_omega(const ComplexVolume& spatial, std::span<const std::size_t> sample_pixels) {
  std::vector<std::vector<cdouble>> profiles;
  profiles.reserve(sample_pixels.size());
  for (std::size_t p : sample_pixels) {
    if (p >= spatial.pixel_count()) throw std::invalid_argument("sample pixel out of range");
    auto px = spatial.pixel(p);
    profiles.emplace_back(px.begin(), px.end());
  }
  return estimate_carrier_omega(profiles);
}

double estimate_carrier_omega_from_spectra(const ComplexVolume& frequency, const AcquisitionConfig& cfg,
                                           std::size_t count) {
  const std::size_t npix = frequency.pixel_count();
  std::vector<double> energy(npix);
  for (std::size_t p = 0; p < npix; ++p) {
    double e = 0.0;
    for (const auto& s : frequency.pixel(p)) e += std::norm(s);
    energy[p] = e;
  }
  std::vector<std::size_t> order(npix);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return energy[a] > energy[b]; });
  order.resize(std::min(npix, std::max<std::size_t>(count, 10)));

  DerampTransform tr(frequency.nz(), cfg.pad_factor);
  std::vector<std::vector<cdouble>> profiles;
  for (std::size_t p : order) {
    std::vector<cdouble> prof(tr.output_length());
    tr.apply(frequency.pixel(p), prof);
    profiles.push_back(std::move(prof));
  }
  return estimate_carrier_omega(profiles);
}

}  // namespace thz

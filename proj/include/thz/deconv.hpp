#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "thz/core.hpp"

namespace thz {

/// Odd-sized square blur kernel, nonnegative with unit sum. Construction
/// rescales the values to unit sum.
class Kernel {
 public:
  Kernel() = default;
  Kernel(std::size_t size, std::vector<double> values);

  std::size_t size() const { return size_; }
  std::size_t radius() const { return size_ / 2; }
  /// Offset (dx, dy) in [-radius, radius].
  double at(std::ptrdiff_t dx, std::ptrdiff_t dy) const {
    return values_[static_cast<std::size_t>(dy + static_cast<std::ptrdiff_t>(radius())) * size_ +
                   static_cast<std::size_t>(dx + static_cast<std::ptrdiff_t>(radius()))];
  }
  std::span<const double> values() const { return values_; }
  double sum() const;

 private:
  std::size_t size_ = 0;
  std::vector<double> values_;
};

Kernel delta_kernel(std::size_t size);
/// Sampled isotropic Gaussian exp(-r^2 / (2 sigma^2)), normalized.
Kernel gaussian_kernel(std::size_t size, double sigma_px);

/// (h * a)(x) = sum_t h(t) a(x - t) with half-sample symmetric reflection at the borders.
Image convolve(const Image& a, const Kernel& h, std::size_t threads = 1);
/// Exact adjoint of convolve() under the same boundary rule.
Image convolve_adjoint(const Image& b, const Kernel& h, std::size_t threads = 1);

/// One multiplicative update u <- u * h^T(observed / max(h * u, 1e-12)).
Image lucy_richardson_step(const Image& estimate, const Image& observed, const Kernel& h,
                           std::size_t threads = 1);
/// Runs `iters` updates starting from the observation.
IntensityImage lucy_richardson(const IntensityImage& observed, const Kernel& h, std::size_t iters,
                               std::size_t threads = 1);

/// ||h * I_d - I_v||_1 + lambda ||grad I_d||_1, forward differences, anisotropic.
double tv_objective(const Image& sharp, const Kernel& h, const Image& observed, double lambda);

/// Non-blind L1 data + TV deconvolution (primal-dual, nonnegative), warm-started from `init`.
Image tv_l1_deconvolve(const Image& observed, const Kernel& h, double lambda, std::size_t iters,
                       const Image* init = nullptr, std::size_t threads = 1);

struct BlindTvOptions {
  std::optional<double> lambda;  // absolute; default 2e-3 * max(I)
  std::size_t kernel_size = 15;
  std::size_t scales = 4;         // pyramid levels, factor sqrt(2) apart
  std::size_t inner_iters = 30;   // primal-dual iterations per image step
  std::size_t alternations = 20;  // kernel/image alternations per level
  std::size_t refinements = 5;    // objective-checked alternations at full resolution
  std::size_t final_iters = 300;  // image-only primal-dual iterations with the final kernel
  std::size_t threads = 1;
};

struct BlindTvResult {
  IntensityImage image;
  Kernel kernel;
  double lambda = 0.0;
  /// Objective after the pyramid, then after each accepted refinement step.
  std::vector<double> objective;
  std::size_t rejected = 0;
  bool warning = false;  // a refinement raised the objective even without the kernel update
};

/// Blind deconvolution under ||h * I_d - I||_1 + lambda ||grad I_d||_1.
///
/// Coarse to fine down to full resolution, each level alternates a kernel estimate from
/// shock-filtered edges of the current latent image (least squares on gradients, clipped and
/// renormalized) with a primal-dual image step. Refinements then alternate an image step with
/// an L1 kernel step (reweighted least squares on the simplex). A refinement is kept only if
/// it does not raise the objective; otherwise the image-only update is tried, and if that also
/// raises it the loop stops with the warning flag. A longer image-only solve with the final
/// kernel closes the run, kept under the same rule.
BlindTvResult blind_tv_deconvolve(const IntensityImage& observed, const BlindTvOptions& opts = {});

/// Kernel of a blind run, renormalized.
Kernel extract_kernel(const BlindTvResult& result);

/// Kernel shifted by whole pixels so its centroid sits nearest the centre (wrapped values dropped).
Kernel center_kernel(const Kernel& h);
/// RMS difference over the larger support after centring both kernels.
double kernel_rms_error(const Kernel& estimate, const Kernel& truth);

/// Bilinear resampling with corner alignment.
Image resample_bilinear(const Image& img, std::size_t nx, std::size_t ny);

}  // namespace thz

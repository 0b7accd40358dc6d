#pragma once

#include <cstddef>
#include <memory>
#include <span>

#include "thz/core.hpp"

namespace thz {

/// Appends zeros along z so each pixel has n * nz samples. Frequency domain only.
ComplexVolume zero_pad(const ComplexVolume& vol, std::size_t n);

/// Forward DFT along z for every pixel: U[z] = sum_k u[k] exp(-j 2 pi k z / nz).
/// No 1/nz factor, so Parseval reads sum |U|^2 = nz * sum |u|^2.
ComplexVolume deramp_fft(const ComplexVolume& vol, std::size_t threads = 0);

struct ReferenceIntensity {
  IntensityImage image;  // I_u
  std::size_t z_mean = 0;
};

/// Picks the z-slice with the largest mean magnitude (lowest index on ties) and
/// returns its per-pixel power.
ReferenceIntensity reference_intensity(const ComplexVolume& spatial, std::size_t threads = 0);

/// Index of the largest value, lowest index on ties.
std::size_t argmax_lowest(std::span<const double> values);

/// Per-pixel zero-pad + DFT with reusable FFT buffers. One instance per worker.
class DerampTransform {
 public:
  DerampTransform(std::size_t n_freq, std::size_t pad_factor);
  ~DerampTransform();
  DerampTransform(DerampTransform&&) noexcept;
  DerampTransform& operator=(DerampTransform&&) noexcept;

  std::size_t input_length() const { return n_freq_; }
  std::size_t output_length() const { return n_freq_ * pad_; }

  /// out.size() must equal output_length().
  void apply(std::span<const cdouble> spectrum, std::span<cdouble> out);

 private:
  struct Impl;
  std::size_t n_freq_;
  std::size_t pad_;
  std::unique_ptr<Impl> impl_;
};

/// Single bin of the padded DFT evaluated directly, sum_k u[k] exp(-j 2 pi k z / D).
cdouble padded_dft_bin(std::span<const cdouble> spectrum, std::size_t padded_length, std::size_t z);

}  // namespace thz

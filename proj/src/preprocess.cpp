#include "thz/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fft.hpp"
#include "thz/parallel.hpp"

namespace thz {

struct DerampTransform::Impl {
  detail::ForwardFft fft;
  detail::FftBuffer in;
  detail::FftBuffer out;
  explicit Impl(std::size_t n) : fft(n), in(n), out(n) {}
};

DerampTransform::DerampTransform(std::size_t n_freq, std::size_t pad_factor)
    : n_freq_(n_freq), pad_(pad_factor) {
  if (pad_factor == 0) throw std::invalid_argument("zero-padding factor must be >= 1");
  if (n_freq == 0) throw std::invalid_argument("empty spectrum");
  impl_ = std::make_unique<Impl>(n_freq * pad_factor);
}

DerampTransform::~DerampTransform() = default;
DerampTransform::DerampTransform(DerampTransform&&) noexcept = default;
DerampTransform& DerampTransform::operator=(DerampTransform&&) noexcept = default;

void DerampTransform::apply(std::span<const cdouble> spectrum, std::span<cdouble> out) {
  if (spectrum.size() != n_freq_ || out.size() != output_length())
    throw std::invalid_argument("DerampTransform: length mismatch");
  auto in = impl_->in.view();
  std::copy(spectrum.begin(), spectrum.end(), in.begin());
  std::fill(in.begin() + static_cast<std::ptrdiff_t>(n_freq_), in.end(), cdouble{});
  impl_->fft.execute(impl_->in, impl_->out);
  auto res = impl_->out.view();
  std::copy(res.begin(), res.end(), out.begin());
}

cdouble padded_dft_bin(std::span<const cdouble> spectrum, std::size_t padded_length, std::size_t z) {
  // Reduce k*z modulo D in integers so the twiddle angle stays small.
  cdouble acc{};
  const std::size_t D = padded_length;
  for (std::size_t k = 0; k < spectrum.size(); ++k) {
    const std::size_t m = (k * z) % D;
    const double ang = -2.0 * kPi * static_cast<double>(m) / static_cast<double>(D);
    acc += spectrum[k] * cdouble(std::cos(ang), std::sin(ang));
  }
  return acc;
}

ComplexVolume zero_pad(const ComplexVolume& vol, std::size_t n) {
  if (n == 0) throw std::invalid_argument("zero-padding factor must be >= 1");
  if (vol.domain() != Domain::Frequency)
    throw std::invalid_argument("zero_pad expects a frequency-domain volume");
  const std::size_t nz = vol.nz();
  ComplexVolume out(vol.nx(), vol.ny(), nz * n, Domain::Frequency, vol.lateral_step_um());
  for (std::size_t p = 0; p < vol.pixel_count(); ++p) {
    auto src = vol.pixel(p);
    std::copy(src.begin(), src.end(), out.pixel(p).begin());
  }
  return out;
}

ComplexVolume deramp_fft(const ComplexVolume& vol, std::size_t threads) {
  if (vol.domain() != Domain::Frequency)
    throw std::invalid_argument("deramp_fft expects a frequency-domain volume");
  const std::size_t nz = vol.nz();
  ComplexVolume out(vol.nx(), vol.ny(), nz, Domain::Spatial, vol.lateral_step_um());
  parallel_chunks(vol.pixel_count(), threads, [&](std::size_t b, std::size_t e, std::size_t) {
    DerampTransform tr(nz, 1);
    for (std::size_t p = b; p < e; ++p) tr.apply(vol.pixel(p), out.pixel(p));
  });
  return out;
}

std::size_t argmax_lowest(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

ReferenceIntensity reference_intensity(const ComplexVolume& spatial, std::size_t threads) {
  if (spatial.domain() != Domain::Spatial)
    throw std::invalid_argument("reference_intensity expects a spatial-domain volume");
  const std::size_t nz = spatial.nz();
  const std::size_t npix = spatial.pixel_count();
  std::vector<double> mean_mag(nz, 0.0);
  // Each z is summed over pixels in a fixed order, independent of the worker split.
  parallel_for(nz, threads, [&](std::size_t z) {
    double s = 0.0;
    for (std::size_t p = 0; p < npix; ++p) s += std::abs(spatial.pixel(p)[z]);
    mean_mag[z] = s / static_cast<double>(npix);
  });
  ReferenceIntensity ref;
  ref.z_mean = argmax_lowest(mean_mag);
  ref.image = IntensityImage(spatial.nx(), spatial.ny());
  for (std::size_t p = 0; p < npix; ++p)
    ref.image.values()[p] = std::norm(spatial.pixel(p)[ref.z_mean]);
  return ref;
}

}  // namespace thz

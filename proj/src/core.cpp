#include "thz/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace thz {

double AcquisitionConfig::omega() const {
  if (carrier_omega) return *carrier_omega;
  return kPi * static_cast<double>(n_freq - 1) / static_cast<double>(padded_length());
}

void AcquisitionConfig::validate() const {
  if (!(f_start_hz > 0.0)) throw std::invalid_argument("f_start must be positive");
  if (!(f_end_hz > f_start_hz)) throw std::invalid_argument("f_end must exceed f_start");
  if (n_freq < 2) throw std::invalid_argument("n_freq must be at least 2");
  if (pad_factor < 1) throw std::invalid_argument("pad_factor must be at least 1");
  if (!(lateral_step_um > 0.0)) throw std::invalid_argument("lateral_step must be positive");
  if (depth_per_sample_um && !(*depth_per_sample_um > 0.0))
    throw std::invalid_argument("depth_per_sample override must be positive");
  if (carrier_omega && !std::isfinite(*carrier_omega))
    throw std::invalid_argument("carrier_omega must be finite");
}

double depth_per_sample(const AcquisitionConfig& cfg) {
  if (cfg.depth_per_sample_um) return *cfg.depth_per_sample_um;
  return kSpeedOfLight / (2.0 * cfg.bandwidth_hz()) * 1e6;
}

ComplexVolume::ComplexVolume(std::size_t nx, std::size_t ny, std::size_t nz, Domain domain,
                             double lateral_step_um)
    : nx_(nx), ny_(ny), nz_(nz), domain_(domain), lateral_step_um_(lateral_step_um),
      samples_(nx * ny * nz) {}

ComplexVolume::ComplexVolume(std::size_t nx, std::size_t ny, std::size_t nz, Domain domain,
                             std::vector<cdouble> samples, double lateral_step_um)
    : nx_(nx), ny_(ny), nz_(nz), domain_(domain), lateral_step_um_(lateral_step_um),
      samples_(std::move(samples)) {
  if (samples_.size() != nx * ny * nz)
    throw DataError("volume sample count does not match nx*ny*nz");
}

Image::Image(std::size_t nx, std::size_t ny, std::vector<double> values)
    : nx_(nx), ny_(ny), values_(std::move(values)) {
  if (values_.size() != nx * ny) throw DataError("image value count does not match nx*ny");
}

double Image::max() const {
  if (values_.empty()) return 0.0;
  return *std::max_element(values_.begin(), values_.end());
}

double Image::sum() const { return std::accumulate(values_.begin(), values_.end(), 0.0); }

IntensityImage::IntensityImage(std::size_t nx, std::size_t ny, std::vector<double> values)
    : Image(nx, ny, std::move(values)) {
  validate();
}

IntensityImage::IntensityImage(Image img) : Image(std::move(img)) { validate(); }

void IntensityImage::validate() const {
  for (double v : values())
    if (!std::isfinite(v) || v < 0.0) throw DataError("intensity values must be finite and >= 0");
}

double wrap_phase(double phi) {
  double w = std::fmod(phi + kPi, 2.0 * kPi);
  if (w < 0.0) w += 2.0 * kPi;
  w -= kPi;
  // fmod rounding can land exactly on +pi
  if (w >= kPi) w -= 2.0 * kPi;
  return w;
}

}  // namespace thz

#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace thz {

using cdouble = std::complex<double>;

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s
inline constexpr double kPi = 3.14159265358979323846;

/// Thrown for malformed inputs (bad files, inconsistent shapes). Maps to CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a numerical stage cannot produce a usable result. Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// FMCW acquisition constants. Frequencies in Hz, lengths in micrometres.
struct AcquisitionConfig {
  double f_start_hz = 514e9;
  double f_end_hz = 640e9;
  std::size_t n_freq = 1400;
  std::size_t pad_factor = 9;
  double lateral_step_um = 262.5;
  /// Carrier of the modulated sinc model, rad per padded sample. Unset means pi*(Nz-1)/D.
  std::optional<double> carrier_omega;
  /// Physical depth per unpadded sample in um. Unset means c/(2B).
  std::optional<double> depth_per_sample_um;

  double bandwidth_hz() const { return f_end_hz - f_start_hz; }
  std::size_t padded_length() const { return pad_factor * n_freq; }
  double omega() const;

  /// Throws std::invalid_argument when an invariant is violated.
  void validate() const;
};

/// Depth resolution c/(2B) in um, or the stored override.
double depth_per_sample(const AcquisitionConfig& cfg);

enum class Domain : std::uint8_t { Frequency = 0, Spatial = 1 };

/// Dense nx*ny*nz complex grid. In memory each pixel's z-profile is contiguous,
/// pixels ordered x-fastest then y; the file format reorders to x-fastest.
class ComplexVolume {
 public:
  ComplexVolume() = default;
  ComplexVolume(std::size_t nx, std::size_t ny, std::size_t nz, Domain domain,
                double lateral_step_um = 262.5);
  ComplexVolume(std::size_t nx, std::size_t ny, std::size_t nz, Domain domain,
                std::vector<cdouble> samples, double lateral_step_um = 262.5);

  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  std::size_t nz() const { return nz_; }
  std::size_t pixel_count() const { return nx_ * ny_; }
  Domain domain() const { return domain_; }
  double lateral_step_um() const { return lateral_step_um_; }

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
    return (y * nx_ + x) * nz_ + z;
  }

  std::span<const cdouble> pixel(std::size_t x, std::size_t y) const {
    return {samples_.data() + (y * nx_ + x) * nz_, nz_};
  }
  std::span<cdouble> pixel(std::size_t x, std::size_t y) {
    return {samples_.data() + (y * nx_ + x) * nz_, nz_};
  }
  std::span<const cdouble> pixel(std::size_t flat) const {
    return {samples_.data() + flat * nz_, nz_};
  }
  std::span<cdouble> pixel(std::size_t flat) { return {samples_.data() + flat * nz_, nz_}; }

  const cdouble& at(std::size_t x, std::size_t y, std::size_t z) const {
    return samples_[index(x, y, z)];
  }
  cdouble& at(std::size_t x, std::size_t y, std::size_t z) { return samples_[index(x, y, z)]; }

  std::span<const cdouble> samples() const { return samples_; }

 private:
  std::size_t nx_ = 0, ny_ = 0, nz_ = 0;
  Domain domain_ = Domain::Frequency;
  double lateral_step_um_ = 262.5;
  std::vector<cdouble> samples_;
};

/// Row-major real 2D grid, x-fastest.
class Image {
 public:
  Image() = default;
  Image(std::size_t nx, std::size_t ny, double fill = 0.0) : nx_(nx), ny_(ny), values_(nx * ny, fill) {}
  Image(std::size_t nx, std::size_t ny, std::vector<double> values);

  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double& operator()(std::size_t x, std::size_t y) { return values_[y * nx_ + x]; }
  double operator()(std::size_t x, std::size_t y) const { return values_[y * nx_ + x]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  double max() const;
  double sum() const;

 private:
  std::size_t nx_ = 0, ny_ = 0;
  std::vector<double> values_;
};

/// Linear power image (squared field amplitude); values are finite and >= 0.
class IntensityImage : public Image {
 public:
  IntensityImage() = default;
  IntensityImage(std::size_t nx, std::size_t ny, double fill = 0.0) : Image(nx, ny, fill) {}
  IntensityImage(std::size_t nx, std::size_t ny, std::vector<double> values);
  explicit IntensityImage(Image img);

  /// Throws DataError on negative or non-finite values.
  void validate() const;
};

/// Depth in um relative to the reference zero. Invalid pixels hold kInvalid.
struct DepthMap {
  static constexpr double kInvalid = std::numeric_limits<double>::quiet_NaN();

  Image depth_um;
  std::vector<std::uint8_t> valid;

  DepthMap() = default;
  DepthMap(std::size_t nx, std::size_t ny) : depth_um(nx, ny, kInvalid), valid(nx * ny, 0) {}
  std::size_t nx() const { return depth_um.nx(); }
  std::size_t ny() const { return depth_um.ny(); }
  bool is_valid(std::size_t x, std::size_t y) const { return valid[y * nx() + x] != 0; }
};

/// Per-pixel modulated-sinc parameters and fit diagnostics.
struct SincFitParams {
  double amplitude = 0.0;  // A >= 0
  double mu = 0.0;         // padded samples
  double sigma = 1.0;      // > 0
  double phi = 0.0;        // [-pi, pi)
  double rmse = 0.0;
  bool converged = false;
  bool valid = false;
  std::uint32_t iterations = 0;
  std::size_t z_max = 0;   // magnitude-peak bin used to place the window
};

/// Wrap an angle to [-pi, pi).
double wrap_phase(double phi);

}  // namespace thz

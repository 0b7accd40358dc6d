#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "thz/core.hpp"
#include "thz/deconv.hpp"
#include "thz/fitting.hpp"
#include "thz/metrics.hpp"
#include "thz/phantom.hpp"

namespace thz {

/// THZ3 volume file errors. All derive from DataError.
class BadMagicError : public DataError {
 public:
  using DataError::DataError;
};
class VersionError : public DataError {
 public:
  using DataError::DataError;
};
class TruncatedError : public DataError {
 public:
  using DataError::DataError;
};

inline constexpr std::uint32_t kVolumeVersion = 1;

/// "THZ3", u32 version, u32 nx, ny, nz, u8 domain, f32 lateral step (um), then nx*ny*nz
/// (f32 re, f32 im) pairs with x fastest, then y, then z. Little-endian throughout.
void write_volume(const ComplexVolume& vol, const std::string& path);
ComplexVolume read_volume(const std::string& path);

/// One image row per line, comma separated, 17 significant digits. NaN is written as "nan".
void write_image_csv(const Image& img, const std::string& path);
Image read_image_csv(const std::string& path);

/// Depth map as CSV; invalid pixels are "nan".
void write_depth_csv(const DepthMap& map, const std::string& path);
DepthMap read_depth_csv(const std::string& path);

enum class PngScale { Linear, Db };

/// 16-bit grayscale. Linear maps [0, max] to [0, 65535]; Db maps [floor_db, 0] dB below the
/// peak to the same range.
void write_png16(const Image& img, const std::string& path, PngScale scale = PngScale::Linear,
                 double floor_db = -60.0);

void write_kernel_csv(const Kernel& k, const std::string& path);
Kernel read_kernel_csv(const std::string& path);

/// x,y,amplitude,mu,sigma,phi,rmse,converged,valid,iterations,z_max
void write_params_csv(const ParamGrid& grid, const std::string& path);
ParamGrid read_params_csv(const std::string& path);

/// Ground truth of a synthesized scene plus the acquisition constants, as JSON.
void write_scene_json(const SceneSpec& scene, const AcquisitionConfig& cfg, const std::string& path);
SceneSpec read_scene_json(const std::string& path, AcquisitionConfig* cfg = nullptr);

/// Generic CSV table with a header line.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};
void write_table_csv(const Table& t, const std::string& path);
std::string format_number(double v);

Table sweep_table(const std::vector<SweepRow>& rows);
Table depth_table(const std::vector<DepthStepRow>& rows);
Table contrast_table(const LinePatternReport& rep);
Table variance_table(const std::vector<double>& a, const std::vector<double>& b, const std::string& name_a,
                     const std::string& name_b);

struct PlotSeries {
  std::vector<double> x, y;
};

/// Line plot as an RGB PNG: frame, 5x5 grid and one coloured polyline with markers per
/// series. No text; the values are in the accompanying CSV.
void write_line_plot_png(const std::vector<PlotSeries>& series, const std::string& path,
                         std::size_t width = 640, std::size_t height = 400);

}  // namespace thz

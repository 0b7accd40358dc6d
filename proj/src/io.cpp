#include "thz/io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <sstream>

namespace thz {

namespace {

using nlohmann::json;

constexpr std::array<char, 4> kMagic{'T', 'H', 'Z', '3'};
constexpr std::size_t kHeaderBytes = 4 + 4 + 3 * 4 + 1 + 4;

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_f32(std::vector<unsigned char>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

float get_f32(const unsigned char* p) { return std::bit_cast<float>(get_u32(p)); }

std::ofstream open_out(const std::string& path, bool binary = false) {
  std::ofstream f(path, binary ? std::ios::binary : std::ios::out);
  if (!f) throw DataError("cannot open " + path + " for writing");
  return f;
}

std::ifstream open_in(const std::string& path, bool binary = false) {
  std::ifstream f(path, binary ? std::ios::binary : std::ios::in);
  if (!f) throw DataError("cannot open " + path);
  return f;
}

void finish(std::ofstream& f, const std::string& path) {
  f.flush();
  if (!f) throw DataError("write failed: " + path);
}

std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  const char* b = s.c_str();
  while (*b == ' ' || *b == '\t') ++b;
  char* end = nullptr;
  const double v = std::strtod(b, &end);
  if (end == b) throw DataError("not a number '" + s + "' in " + where);
  while (*end == ' ' || *end == '\t' || *end == '\r') ++end;
  if (*end != '\0') throw DataError("not a number '" + s + "' in " + where);
  return v;
}

std::vector<std::vector<double>> read_matrix_csv(const std::string& path) {
  auto f = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    for (const auto& cell : split(line)) row.push_back(parse_double(cell, path));
    if (!rows.empty() && row.size() != rows.front().size()) throw DataError("ragged rows in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("empty CSV: " + path);
  return rows;
}

std::string cell(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json region_json(const std::optional<PixelRegion>& r) {
  if (!r) return nullptr;
  return json{{"x0", r->x0}, {"y0", r->y0}, {"x1", r->x1}, {"y1", r->y1}};
}

std::optional<PixelRegion> region_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return PixelRegion{j.at("x0").get<std::size_t>(), j.at("y0").get<std::size_t>(), j.at("x1").get<std::size_t>(),
                     j.at("y1").get<std::size_t>()};
}

Image image_from(const json& j, std::size_t nx, std::size_t ny) {
  if (j.is_null()) return {};
  auto v = j.get<std::vector<double>>();
  if (v.size() != nx * ny) throw DataError("scene map has the wrong size");
  return Image(nx, ny, std::move(v));
}

json image_json(const Image& img) {
  if (img.empty()) return nullptr;
  return std::vector<double>(img.values().begin(), img.values().end());
}

}  // namespace

void write_volume(const ComplexVolume& vol, const std::string& path) {
  if (vol.nx() > 0xffffffffu || vol.ny() > 0xffffffffu || vol.nz() > 0xffffffffu)
    throw DataError("volume too large for the THZ3 format");
  std::vector<unsigned char> buf;
  buf.reserve(kHeaderBytes + vol.samples().size() * 8);
  buf.insert(buf.end(), kMagic.begin(), kMagic.end());
  put_u32(buf, kVolumeVersion);
  put_u32(buf, static_cast<std::uint32_t>(vol.nx()));
  put_u32(buf, static_cast<std::uint32_t>(vol.ny()));
  put_u32(buf, static_cast<std::uint32_t>(vol.nz()));
  buf.push_back(static_cast<unsigned char>(vol.domain()));
  put_f32(buf, static_cast<float>(vol.lateral_step_um()));
  for (std::size_t z = 0; z < vol.nz(); ++z)
    for (std::size_t y = 0; y < vol.ny(); ++y)
      for (std::size_t x = 0; x < vol.nx(); ++x) {
        const cdouble v = vol.at(x, y, z);
        put_f32(buf, static_cast<float>(v.real()));
        put_f32(buf, static_cast<float>(v.imag()));
      }
  auto f = open_out(path, true);
  f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  finish(f, path);
}

ComplexVolume read_volume(const std::string& path) {
  auto f = open_in(path, true);
  const std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (buf.size() >= 4 && !std::equal(kMagic.begin(), kMagic.end(), buf.begin()))
    throw BadMagicError("bad magic in " + path);
  if (buf.size() < 8) throw TruncatedError("truncated header in " + path);
  const std::uint32_t version = get_u32(buf.data() + 4);
  if (version != kVolumeVersion)
    throw VersionError("unsupported THZ3 version " + std::to_string(version) + " in " + path);
  if (buf.size() < kHeaderBytes) throw TruncatedError("truncated header in " + path);
  const std::uint64_t nx = get_u32(buf.data() + 8), ny = get_u32(buf.data() + 12), nz = get_u32(buf.data() + 16);
  const unsigned char tag = buf[20];
  if (tag > 1) throw DataError("unknown domain tag in " + path);
  const double step = get_f32(buf.data() + 21);
  const std::uint64_t count = nx * ny * nz;
  const std::uint64_t payload = buf.size() - kHeaderBytes;
  if (payload / 8 < count) throw TruncatedError("truncated payload in " + path);
  if (payload != count * 8) throw DataError("trailing bytes after the payload in " + path);

  ComplexVolume vol(nx, ny, nz, static_cast<Domain>(tag), step);
  const unsigned char* p = buf.data() + kHeaderBytes;
  for (std::size_t z = 0; z < nz; ++z)
    for (std::size_t y = 0; y < ny; ++y)
      for (std::size_t x = 0; x < nx; ++x, p += 8) vol.at(x, y, z) = cdouble(get_f32(p), get_f32(p + 4));
  return vol;
}

void write_image_csv(const Image& img, const std::string& path) {
  auto f = open_out(path);
  for (std::size_t y = 0; y < img.ny(); ++y) {
    for (std::size_t x = 0; x < img.nx(); ++x) f << (x ? "," : "") << cell(img(x, y));
    f << '\n';
  }
  finish(f, path);
}

Image read_image_csv(const std::string& path) {
  const auto rows = read_matrix_csv(path);
  Image img(rows.front().size(), rows.size());
  for (std::size_t y = 0; y < rows.size(); ++y)
    for (std::size_t x = 0; x < rows[y].size(); ++x) img(x, y) = rows[y][x];
  return img;
}

void write_depth_csv(const DepthMap& map, const std::string& path) {
  Image img(map.nx(), map.ny());
  for (std::size_t y = 0; y < map.ny(); ++y)
    for (std::size_t x = 0; x < map.nx(); ++x)
      img(x, y) = map.is_valid(x, y) ? map.depth_um(x, y) : DepthMap::kInvalid;
  write_image_csv(img, path);
}

DepthMap read_depth_csv(const std::string& path) {
  const Image img = read_image_csv(path);
  DepthMap map(img.nx(), img.ny());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double v = img.values()[i];
    if (!std::isfinite(v)) continue;
    map.depth_um.values()[i] = v;
    map.valid[i] = 1;
  }
  return map;
}

void write_png16(const Image& img, const std::string& path, PngScale scale, double floor_db) {
  if (img.empty()) throw DataError("cannot write an empty image");
  std::vector<png_uint_16> px(img.size(), 0);
  const double peak = img.max();
  if (peak > 0.0) {
    for (std::size_t i = 0; i < img.size(); ++i) {
      const double v = img.values()[i];
      double t = 0.0;
      if (scale == PngScale::Linear) {
        t = std::isfinite(v) ? v / peak : 0.0;
      } else if (v > 0.0) {
        t = 1.0 - std::max(floor_db, 10.0 * std::log10(v / peak)) / floor_db;
      }
      px[i] = static_cast<png_uint_16>(std::lround(std::clamp(t, 0.0, 1.0) * 65535.0));
    }
  }
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.nx());
  image.height = static_cast<png_uint_32>(img.ny());
  image.format = PNG_FORMAT_LINEAR_Y;
  if (!png_image_write_to_file(&image, path.c_str(), 0, px.data(), 0, nullptr))
    throw DataError("PNG write failed for " + path + ": " + image.message);
}

void write_kernel_csv(const Kernel& k, const std::string& path) {
  const auto r = static_cast<std::ptrdiff_t>(k.radius());
  Image img(k.size(), k.size());
  for (std::ptrdiff_t y = -r; y <= r; ++y)
    for (std::ptrdiff_t x = -r; x <= r; ++x)
      img(static_cast<std::size_t>(x + r), static_cast<std::size_t>(y + r)) = k.at(x, y);
  write_image_csv(img, path);
}

Kernel read_kernel_csv(const std::string& path) {
  const Image img = read_image_csv(path);
  if (img.nx() != img.ny()) throw DataError("kernel CSV is not square: " + path);
  try {
    return Kernel(img.nx(), std::vector<double>(img.values().begin(), img.values().end()));
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("bad kernel in ") + path + ": " + e.what());
  }
}

void write_params_csv(const ParamGrid& grid, const std::string& path) {
  auto f = open_out(path);
  f << "x,y,amplitude,mu,sigma,phi,rmse,converged,valid,iterations,z_max\n";
  for (std::size_t y = 0; y < grid.ny(); ++y)
    for (std::size_t x = 0; x < grid.nx(); ++x) {
      const SincFitParams& p = grid(x, y);
      f << x << ',' << y << ',' << cell(p.amplitude) << ',' << cell(p.mu) << ',' << cell(p.sigma) << ','
        << cell(p.phi) << ',' << cell(p.rmse) << ',' << int(p.converged) << ',' << int(p.valid) << ','
        << p.iterations << ',' << p.z_max << '\n';
    }
  finish(f, path);
}

ParamGrid read_params_csv(const std::string& path) {
  auto f = open_in(path);
  std::string line;
  if (!std::getline(f, line)) throw DataError("empty params CSV: " + path);
  struct Row {
    std::size_t x, y;
    SincFitParams p;
  };
  std::vector<Row> rows;
  std::size_t nx = 0, ny = 0;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto c = split(line);
    if (c.size() != 11) throw DataError("params CSV row needs 11 fields: " + path);
    Row r;
    r.x = static_cast<std::size_t>(parse_double(c[0], path));
    r.y = static_cast<std::size_t>(parse_double(c[1], path));
    r.p.amplitude = parse_double(c[2], path);
    r.p.mu = parse_double(c[3], path);
    r.p.sigma = parse_double(c[4], path);
    r.p.phi = parse_double(c[5], path);
    r.p.rmse = parse_double(c[6], path);
    r.p.converged = parse_double(c[7], path) != 0.0;
    r.p.valid = parse_double(c[8], path) != 0.0;
    r.p.iterations = static_cast<std::uint32_t>(parse_double(c[9], path));
    r.p.z_max = static_cast<std::size_t>(parse_double(c[10], path));
    nx = std::max(nx, r.x + 1);
    ny = std::max(ny, r.y + 1);
    rows.push_back(r);
  }
  if (rows.size() != nx * ny) throw DataError("params CSV does not cover a full grid: " + path);
  ParamGrid grid(nx, ny);
  for (const Row& r : rows) grid(r.x, r.y) = r.p;
  return grid;
}

void write_scene_json(const SceneSpec& s, const AcquisitionConfig& cfg, const std::string& path) {
  json j;
  j["kind"] = s.kind;
  j["nx"] = s.nx;
  j["ny"] = s.ny;
  j["psf_fwhm_um"] = s.psf_fwhm_um;
  j["snr_db"] = s.snr_db ? json(*s.snr_db) : json(nullptr);
  j["rng_seed"] = s.rng_seed;
  j["back_offset_um"] = s.back_offset_um;
  j["acquisition"] = {{"f_start_hz", cfg.f_start_hz},
                      {"f_end_hz", cfg.f_end_hz},
                      {"n_freq", cfg.n_freq},
                      {"pad_factor", cfg.pad_factor},
                      {"lateral_step_um", cfg.lateral_step_um},
                      {"carrier_omega", cfg.carrier_omega ? json(*cfg.carrier_omega) : json(nullptr)},
                      {"depth_per_sample_um",
                       cfg.depth_per_sample_um ? json(*cfg.depth_per_sample_um) : json(nullptr)}};
  j["bands"] = json::array();
  for (const auto& b : s.bands) j["bands"].push_back({{"x0", b.x0}, {"x1", b.x1}, {"height_um", b.height_um}});
  j["groups"] = json::array();
  for (const auto& g : s.groups)
    j["groups"].push_back({{"orientation", g.orientation == BarOrientation::Vertical ? "vertical" : "horizontal"},
                           {"period_um", g.period_um},
                           {"x0", g.x0},
                           {"y0", g.y0},
                           {"length_px", g.length_px}});
  j["homogeneous_region"] = region_json(s.homogeneous_region);
  j["reference_region"] = region_json(s.reference_region);
  j["texture_region"] = region_json(s.texture_region);
  j["reflectivity"] = image_json(s.reflectivity);
  j["depth_um"] = image_json(s.depth_um);
  j["back_reflectivity"] = image_json(s.back_reflectivity);
  auto f = open_out(path);
  f << j.dump() << '\n';
  finish(f, path);
}

SceneSpec read_scene_json(const std::string& path, AcquisitionConfig* cfg) {
  auto f = open_in(path);
  SceneSpec s;
  try {
    const json j = json::parse(f);
    s.kind = j.at("kind").get<std::string>();
    s.nx = j.at("nx").get<std::size_t>();
    s.ny = j.at("ny").get<std::size_t>();
    s.psf_fwhm_um = j.at("psf_fwhm_um").get<double>();
    if (!j.at("snr_db").is_null()) s.snr_db = j.at("snr_db").get<double>();
    s.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    s.back_offset_um = j.value("back_offset_um", 0.0);
    for (const auto& b : j.at("bands"))
      s.bands.push_back({b.at("x0").get<std::size_t>(), b.at("x1").get<std::size_t>(), b.at("height_um").get<double>()});
    for (const auto& g : j.at("groups")) {
      const auto o = g.at("orientation").get<std::string>();
      if (o != "vertical" && o != "horizontal") throw DataError("unknown bar orientation '" + o + "'");
      s.groups.push_back({o == "vertical" ? BarOrientation::Vertical : BarOrientation::Horizontal,
                          g.at("period_um").get<double>(), g.at("x0").get<std::size_t>(),
                          g.at("y0").get<std::size_t>(), g.at("length_px").get<std::size_t>()});
    }
    s.homogeneous_region = region_from(j.at("homogeneous_region"));
    s.reference_region = region_from(j.at("reference_region"));
    s.texture_region = region_from(j.at("texture_region"));
    s.reflectivity = image_from(j.at("reflectivity"), s.nx, s.ny);
    s.depth_um = image_from(j.at("depth_um"), s.nx, s.ny);
    s.back_reflectivity = image_from(j.value("back_reflectivity", json(nullptr)), s.nx, s.ny);
    if (cfg) {
      const json& a = j.at("acquisition");
      cfg->f_start_hz = a.at("f_start_hz").get<double>();
      cfg->f_end_hz = a.at("f_end_hz").get<double>();
      cfg->n_freq = a.at("n_freq").get<std::size_t>();
      cfg->pad_factor = a.at("pad_factor").get<std::size_t>();
      cfg->lateral_step_um = a.at("lateral_step_um").get<double>();
      cfg->carrier_omega.reset();
      cfg->depth_per_sample_um.reset();
      if (!a.at("carrier_omega").is_null()) cfg->carrier_omega = a.at("carrier_omega").get<double>();
      if (!a.at("depth_per_sample_um").is_null()) cfg->depth_per_sample_um = a.at("depth_per_sample_um").get<double>();
    }
  } catch (const json::exception& e) {
    throw DataError("bad scene file " + path + ": " + e.what());
  }
  return s;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void write_table_csv(const Table& t, const std::string& path) {
  auto f = open_out(path);
  for (std::size_t i = 0; i < t.columns.size(); ++i) f << (i ? "," : "") << t.columns[i];
  f << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) f << (i ? "," : "") << row[i];
    f << '\n';
  }
  finish(f, path);
}

Table sweep_table(const std::vector<SweepRow>& rows) {
  Table t{{"tau_f", "mean_rmse", "max_rmse", "valid_pixels", "seconds"}, {}};
  for (const auto& r : rows)
    t.rows.push_back({std::to_string(r.tau_f), format_number(r.mean_rmse), format_number(r.max_rmse),
                      std::to_string(r.valid), format_number(r.seconds)});
  return t;
}

Table depth_table(const std::vector<DepthStepRow>& rows) {
  Table t{{"depth_gt_um", "depth_mu_um", "error_mu_pct", "resolvable_mu", "depth_max_um", "error_max_pct",
           "resolvable_max"},
          {}};
  for (const auto& r : rows)
    t.rows.push_back({format_number(r.gt_um), format_number(r.mu_um), format_number(100.0 * r.error_mu),
                      r.resolvable_mu ? "1" : "0", format_number(r.max_um), format_number(100.0 * r.error_max),
                      r.resolvable_max ? "1" : "0"});
  return t;
}

Table contrast_table(const LinePatternReport& rep) {
  Table t{{"orientation", "period_um", "lp_per_mm", "contrast_db", "mtf", "cross_sections"}, {}};
  for (const auto& g : rep.groups)
    t.rows.push_back({g.orientation == BarOrientation::Vertical ? "vertical" : "horizontal", format_number(g.period_um),
                      format_number(g.lp_per_mm), format_number(g.contrast_db), format_number(g.mtf),
                      std::to_string(g.cross_sections)});
  return t;
}

Table variance_table(const std::vector<double>& a, const std::vector<double>& b, const std::string& name_a,
                     const std::string& name_b) {
  if (a.size() != b.size()) throw std::invalid_argument("variance columns differ in length");
  Table t{{"row", "variance_" + name_a, "variance_" + name_b}, {}};
  for (std::size_t i = 0; i < a.size(); ++i) t.rows.push_back({std::to_string(i), format_number(a[i]), format_number(b[i])});
  return t;
}

void write_line_plot_png(const std::vector<PlotSeries>& series, const std::string& path, std::size_t width,
                         std::size_t height) {
  if (width < 64 || height < 64) throw std::invalid_argument("plot too small");
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw std::invalid_argument("plot series x/y length mismatch");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!(x0 <= x1)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-300) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-300) y0 -= 0.5, y1 += 0.5;
  const double padx = 0.05 * (x1 - x0), pady = 0.05 * (y1 - y0);
  x0 -= padx, x1 += padx, y0 -= pady, y1 += pady;

  std::vector<unsigned char> rgb(width * height * 3, 255);
  auto set = [&](long x, long y, std::array<unsigned char, 3> c) {
    if (x < 0 || y < 0 || x >= static_cast<long>(width) || y >= static_cast<long>(height)) return;
    std::copy(c.begin(), c.end(), rgb.begin() + static_cast<std::ptrdiff_t>((static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x)) * 3));
  };
  const long L = 40, R = static_cast<long>(width) - 20, T = 20, B = static_cast<long>(height) - 40;
  for (int k = 0; k <= 5; ++k) {
    const long gx = L + (R - L) * k / 5, gy = T + (B - T) * k / 5;
    const unsigned char g = (k == 0 || k == 5) ? 0 : 210;
    for (long y = T; y <= B; ++y) set(gx, y, {g, g, g});
    for (long x = L; x <= R; ++x) set(x, gy, {g, g, g});
  }
  auto map = [&](double x, double y) {
    return std::pair<double, double>{L + (x - x0) / (x1 - x0) * static_cast<double>(R - L),
                                     B - (y - y0) / (y1 - y0) * static_cast<double>(B - T)};
  };
  static constexpr std::array<std::array<unsigned char, 3>, 6> palette{
      {{31, 119, 180}, {214, 39, 40}, {44, 160, 44}, {255, 127, 14}, {148, 103, 189}, {23, 190, 207}}};
  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto c = palette[si % palette.size()];
    const auto& s = series[si];
    bool have_prev = false;
    std::pair<double, double> prev;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
        have_prev = false;
        continue;
      }
      const auto p = map(s.x[i], s.y[i]);
      if (have_prev) {
        const int steps = static_cast<int>(std::ceil(std::max(std::abs(p.first - prev.first), std::abs(p.second - prev.second)))) + 1;
        for (int k = 0; k <= steps; ++k) {
          const double t = static_cast<double>(k) / steps;
          const long x = std::lround(prev.first + t * (p.first - prev.first));
          const long y = std::lround(prev.second + t * (p.second - prev.second));
          set(x, y, c);
          set(x, y + 1, c);
        }
      }
      for (long dy = -2; dy <= 2; ++dy)
        for (long dx = -2; dx <= 2; ++dx) set(std::lround(p.first) + dx, std::lround(p.second) + dy, c);
      prev = p;
      have_prev = true;
    }
  }
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, rgb.data(), 0, nullptr))
    throw DataError("PNG write failed for " + path + ": " + image.message);
}

}  // namespace thz

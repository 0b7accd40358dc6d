#include "thz/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "thz/io.hpp"

namespace thz {

namespace {

std::string fmt(double v, int digits = 6) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

double median_mu(const ParamGrid& grid) {
  std::vector<double> mu;
  for (const auto& p : grid.params())
    if (p.valid) mu.push_back(p.mu);
  if (mu.empty()) throw NumericalError("no valid pixels to place the reference zero");
  const std::size_t mid = mu.size() / 2;
  std::nth_element(mu.begin(), mu.begin() + static_cast<std::ptrdiff_t>(mid), mu.end());
  double m = mu[mid];
  if (mu.size() % 2 == 0) m = 0.5 * (m + *std::max_element(mu.begin(), mu.begin() + static_cast<std::ptrdiff_t>(mid)));
  return m;
}

// Desk-scale charts keep the finest periods that fit, dropping the coarsest first.
std::vector<double> periods_that_fit(const AcquisitionConfig& cfg, std::size_t nx, std::size_t ny) {
  std::vector<double> p = default_usaf_periods();
  while (!p.empty()) {
    try {
      make_usaf_scene(cfg, p, nx, ny);
      return p;
    } catch (const std::invalid_argument&) {
      p.erase(p.begin());
    }
  }
  throw ConfigError("image too small for a USAF chart: " + std::to_string(nx) + "x" + std::to_string(ny));
}

}  // namespace

SceneSpec make_scene(const SceneRequest& req, const AcquisitionConfig& cfg) {
  SceneSpec s;
  if (req.kind == "step") {
    const auto h = step_chart_heights();
    s = make_step_scene(cfg, h, req.nx, req.ny);
  } else if (req.kind == "usaf") {
    s = make_usaf_scene(cfg, periods_that_fit(cfg, req.nx, req.ny), req.nx, req.ny);
  } else if (req.kind == "metalpcb") {
    s = make_metalpcb_scene(cfg, periods_that_fit(cfg, req.nx, req.ny), req.nx, req.ny);
  } else if (req.kind == "textured") {
    s = make_textured_scene(cfg, req.nx, req.ny);
  } else {
    throw ConfigError("unknown scene '" + req.kind + "' (step, usaf, metalpcb, textured)");
  }
  s.snr_db = req.snr_db;
  s.rng_seed = req.seed;
  s.psf_fwhm_um = req.psf_fwhm_um;
  s.validate();
  return s;
}

AcquisitionConfig acquisition_from(const Config& c) {
  AcquisitionConfig cfg;
  if (c.has("f_start_hz")) cfg.f_start_hz = c.get_double("f_start_hz");
  if (c.has("f_end_hz")) cfg.f_end_hz = c.get_double("f_end_hz");
  if (c.has("n_freq")) cfg.n_freq = c.get_size("n_freq");
  if (c.has("pad_factor")) cfg.pad_factor = c.get_size("pad_factor");
  if (c.has("lateral_step_um")) cfg.lateral_step_um = c.get_double("lateral_step_um");
  if (c.has("depth_per_sample_um")) cfg.depth_per_sample_um = c.get_auto_double("depth_per_sample_um");
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid acquisition settings: ") + e.what());
  }
  return cfg;
}

double resolve_omega(const std::string& spec, const ComplexVolume& frequency, const AcquisitionConfig& cfg) {
  if (spec == "model") {
    AcquisitionConfig c = cfg;
    c.carrier_omega.reset();
    return c.omega();
  }
  if (spec == "auto") return estimate_carrier_omega_from_spectra(frequency, cfg);
  char* end = nullptr;
  const double w = std::strtod(spec.c_str(), &end);
  if (spec.empty() || *end != '\0' || !std::isfinite(w))
    throw ConfigError("omega must be 'model', 'auto' or a number, got '" + spec + "'");
  return w;
}

FitStage run_fit(const ComplexVolume& frequency, const AcquisitionConfig& cfg_in, std::size_t tau_f,
                 const std::string& omega_spec, std::optional<double> z0, const SceneSpec* scene,
                 std::size_t threads) {
  if (frequency.domain() != Domain::Frequency) throw DataError("fit expects a frequency-domain volume");
  if (frequency.nz() != cfg_in.n_freq)
    throw DataError("volume has " + std::to_string(frequency.nz()) + " frequency samples, config says " +
                    std::to_string(cfg_in.n_freq));
  FitStage st;
  AcquisitionConfig cfg = cfg_in;
  st.omega = resolve_omega(omega_spec, frequency, cfg);
  cfg.carrier_omega = st.omega;
  FitOptions o;
  o.tau_f = tau_f;
  o.threads = threads;
  st.fit = fit_spectra(frequency, cfg, o);
  if (z0) {
    st.z0 = *z0;
  } else if (scene && scene->reference_region) {
    st.z0 = estimate_reference_zero(st.fit.params, *scene->reference_region);
  } else {
    st.z0 = median_mu(st.fit.params);
  }
  if (!std::isfinite(st.z0)) throw NumericalError("reference zero could not be placed");
  st.depth = reconstruct_depth(st.fit.params, st.z0, cfg);
  st.iv = reconstruct_intensity(st.fit.params);
  return st;
}

double intensity_psf_sigma_px(double psf_fwhm_um, double lateral_step_um) {
  return psf_fwhm_um / (2.0 * std::sqrt(2.0 * std::log(2.0))) / lateral_step_um / std::sqrt(2.0);
}

DeconvOutput run_deconv(const IntensityImage& observed, const DeconvRequest& req) {
  DeconvOutput out;
  if (req.method == "tv-blind") {
    BlindTvResult r = blind_tv_deconvolve(observed, req.blind);
    out.image = r.image;
    out.kernel = extract_kernel(r);
    out.blind = std::move(r);
  } else if (req.method == "lr-gauss") {
    out.kernel = gaussian_kernel(req.kernel_size, req.sigma_px);
    out.image = lucy_richardson(observed, out.kernel, req.lr_iters, req.blind.threads);
  } else if (req.method == "lr-kernel") {
    if (!req.kernel) throw ConfigError("lr-kernel needs a kernel");
    out.kernel = *req.kernel;
    out.image = lucy_richardson(observed, out.kernel, req.lr_iters, req.blind.threads);
  } else {
    throw ConfigError("unknown deconvolution method '" + req.method + "' (tv-blind, lr-gauss, lr-kernel)");
  }
  return out;
}

const std::vector<std::string>& pipeline_required_keys() {
  static const std::vector<std::string> k{
      "scene",      "nx",          "ny",          "snr_db",   "seed",       "psf_fwhm_um", "f_start_hz",
      "f_end_hz",   "n_freq",      "pad_factor",  "lateral_step_um", "depth_per_sample_um", "omega",
      "tau_f",      "z0",          "deconv_methods", "lambda", "kernel_size", "scales",     "inner_iters",
      "lr_iters",   "lr_sigma_px", "eval_tasks",  "sweep_taus", "out_dir"};
  return k;
}

const std::vector<std::string>& pipeline_optional_keys() {
  static const std::vector<std::string> k{"threads", "alternations", "refinements", "final_iters", "write_volume",
                                          "png_scale"};
  return k;
}

PipelineReport run_pipeline(const Config& c, std::optional<std::size_t> threads_override) {
  for (const auto& k : pipeline_required_keys()) c.get(k);
  std::vector<std::string> known = pipeline_required_keys();
  known.insert(known.end(), pipeline_optional_keys().begin(), pipeline_optional_keys().end());
  c.check_known(known);

  PipelineReport rep;
  const std::size_t threads =
      threads_override ? *threads_override : (c.has("threads") ? c.get_size("threads") : std::size_t{0});
  const std::filesystem::path dir = c.get("out_dir");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
  auto out = [&](const std::string& name) {
    const std::string p = (dir / name).string();
    rep.files.push_back(p);
    return p;
  };
  const std::string scale_name = c.get_or("png_scale", "linear");
  if (scale_name != "linear" && scale_name != "db") throw ConfigError("png_scale must be linear or db");
  const PngScale scale = scale_name == "db" ? PngScale::Db : PngScale::Linear;

  // Validate every stage's settings before the expensive work starts.
  const AcquisitionConfig cfg = acquisition_from(c);
  SceneRequest sr;
  sr.kind = c.get("scene");
  sr.nx = c.get_size("nx");
  sr.ny = c.get_size("ny");
  const double snr = c.get_double("snr_db");
  if (std::isfinite(snr)) sr.snr_db = snr;
  sr.seed = c.get_size("seed");
  sr.psf_fwhm_um = c.get_double("psf_fwhm_um");
  const std::size_t tau_f = c.get_size("tau_f");
  const std::string omega_spec = c.get("omega");
  const std::optional<double> z0 = c.get_auto_double("z0");
  const auto methods = c.get_list("deconv_methods");
  const auto tasks = c.get_list("eval_tasks");
  for (const auto& t : tasks)
    if (t != "depth-table" && t != "mtf" && t != "variance" && t != "db" && t != "rmse-sweep")
      throw ConfigError("unknown eval task '" + t + "' (depth-table, mtf, variance, db, rmse-sweep)");
  std::vector<std::size_t> taus;
  for (double t : c.get_double_list("sweep_taus")) {
    if (!(t >= 1.0) || t != std::floor(t)) throw ConfigError("sweep_taus must be positive integers");
    taus.push_back(static_cast<std::size_t>(t));
  }

  DeconvRequest dr;
  dr.blind.lambda = c.get_auto_double("lambda");
  dr.blind.kernel_size = c.get_size("kernel_size");
  dr.blind.scales = c.get_size("scales");
  dr.blind.inner_iters = c.get_size("inner_iters");
  if (c.has("alternations")) dr.blind.alternations = c.get_size("alternations");
  if (c.has("refinements")) dr.blind.refinements = c.get_size("refinements");
  if (c.has("final_iters")) dr.blind.final_iters = c.get_size("final_iters");
  dr.blind.threads = threads;
  dr.kernel_size = dr.blind.kernel_size;
  dr.lr_iters = c.get_size("lr_iters");
  const auto sigma = c.get_auto_double("lr_sigma_px");
  dr.sigma_px = sigma ? *sigma : intensity_psf_sigma_px(sr.psf_fwhm_um, cfg.lateral_step_um);
  for (const auto& m : methods)
    if (m != "tv-blind" && m != "lr-gauss" && m != "lr-kernel")
      throw ConfigError("unknown deconvolution method '" + m + "' (tv-blind, lr-gauss, lr-kernel)");
  if (std::find(methods.begin(), methods.end(), "lr-kernel") != methods.end()) {
    const auto tv = std::find(methods.begin(), methods.end(), "tv-blind");
    if (tv == methods.end() || tv > std::find(methods.begin(), methods.end(), "lr-kernel"))
      throw ConfigError("lr-kernel in the pipeline reuses the tv-blind kernel; list tv-blind first");
  }

  // synth
  const SceneSpec scene = make_scene(sr, cfg);
  const ComplexVolume freq = synthesize(scene, cfg, threads);
  write_scene_json(scene, cfg, out("scene.json"));
  if (c.has("write_volume") && c.get_bool("write_volume")) write_volume(freq, out("volume.thz3"));
  rep.lines.push_back("scene " + scene.kind + " " + std::to_string(scene.nx) + "x" + std::to_string(scene.ny) +
                      "x" + std::to_string(cfg.n_freq));

  // fit
  const FitStage fs = run_fit(freq, cfg, tau_f, omega_spec, z0, &scene, threads);
  write_params_csv(fs.fit.params, out("params.csv"));
  write_image_csv(fs.fit.reference.image, out("iu.csv"));
  write_png16(fs.fit.reference.image, out("iu.png"), scale);
  write_image_csv(fs.iv, out("iv.csv"));
  write_png16(fs.iv, out("iv.png"), scale);
  write_depth_csv(fs.depth.from_mu, out("depth_mu.csv"));
  write_depth_csv(fs.depth.from_max, out("depth_max.csv"));
  rep.lines.push_back("fit omega " + fmt(fs.omega) + " z0 " + fmt(fs.z0, 8) + " valid " +
                      std::to_string(summarize_rmse(fs.fit.params).valid) + "/" + std::to_string(scene.nx * scene.ny));

  // deconv
  std::vector<std::pair<std::string, IntensityImage>> images{{"iu", fs.fit.reference.image}, {"iv", fs.iv}};
  std::optional<Kernel> blind_kernel;
  for (const auto& m : methods) {
    DeconvRequest r = dr;
    r.method = m;
    if (m == "lr-kernel") r.kernel = blind_kernel;
    const DeconvOutput d = run_deconv(fs.iv, r);
    if (m == "tv-blind") {
      blind_kernel = d.kernel;
      if (d.blind->warning) rep.lines.push_back("tv-blind: objective rose during refinement, stopped early");
    }
    write_image_csv(d.image, out("id_" + m + ".csv"));
    write_png16(d.image, out("id_" + m + ".png"), scale);
    write_kernel_csv(d.kernel, out("kernel_" + m + ".csv"));
    images.emplace_back("id_" + m, d.image);
  }

  // eval
  for (const auto& t : tasks) {
    if (t == "depth-table") {
      const auto rows = depth_step_table(fs.depth, scene);
      write_table_csv(depth_table(rows), out("depth_table.csv"));
      double smallest_mu = INFINITY, smallest_max = INFINITY;
      for (const auto& r : rows) {
        if (r.resolvable_mu) smallest_mu = std::min(smallest_mu, r.gt_um);
        if (r.resolvable_max) smallest_max = std::min(smallest_max, r.gt_um);
      }
      rep.lines.push_back("depth-table smallest resolvable step: mu " + fmt(smallest_mu) + " um, max " +
                          fmt(smallest_max) + " um");
    } else if (t == "mtf") {
      if (scene.groups.empty()) throw DataError("mtf needs a scene with bar groups");
      Table res{{"image", "horizontal_resolution_um", "vertical_resolution_um"}, {}};
      std::vector<PlotSeries> plot;
      for (const auto& [name, img] : images) {
        const auto lp = line_pattern_contrast(img, scene.groups, cfg.lateral_step_um);
        write_table_csv(contrast_table(lp), out("contrast_" + name + ".csv"));
        res.rows.push_back({name, format_number(lp.horizontal_resolution_um), format_number(lp.vertical_resolution_um)});
        PlotSeries s;
        for (const auto& g : lp.groups)
          if (g.orientation == BarOrientation::Vertical) {
            s.x.push_back(g.lp_per_mm);
            s.y.push_back(g.mtf);
          }
        plot.push_back(std::move(s));
        rep.lines.push_back("mtf " + name + ": horizontal " + fmt(lp.horizontal_resolution_um) + " um, vertical " +
                            fmt(lp.vertical_resolution_um) + " um");
      }
      write_table_csv(res, out("resolution.csv"));
      write_line_plot_png(plot, out("mtf.png"));
    } else if (t == "variance") {
      if (!scene.homogeneous_region) throw DataError("variance needs a scene with a homogeneous band");
      const auto vu = region_variance(fs.fit.reference.image, *scene.homogeneous_region);
      const auto vv = region_variance(fs.iv, *scene.homogeneous_region);
      write_table_csv(variance_table(vu, vv, "iu", "iv"), out("variance.csv"));
      std::size_t lower = 0;
      for (std::size_t i = 0; i < vu.size(); ++i) lower += vv[i] < vu[i];
      rep.lines.push_back("variance: iv below iu in " + std::to_string(lower) + "/" + std::to_string(vu.size()) + " rows");
    } else if (t == "db") {
      const PixelRegion region = scene.texture_region ? *scene.texture_region : PixelRegion{0, 0, scene.nx, scene.ny};
      Table tb{{"image", "region_contrast_db"}, {}};
      for (const auto& [name, img] : images) {
        const double db = region_contrast_db(img, region);
        tb.rows.push_back({name, format_number(db)});
        write_png16(db_image(img), out("db_" + name + ".png"), PngScale::Linear);
        rep.lines.push_back("db " + name + ": " + fmt(db));
      }
      write_table_csv(tb, out("db_contrast.csv"));
    } else if (t == "rmse-sweep") {
      AcquisitionConfig wc = cfg;
      wc.carrier_omega = fs.omega;
      FitOptions o;
      o.threads = threads;
      const auto rows = window_sweep(freq, wc, taus, o);
      Table tb = sweep_table(rows);
      for (auto& row : tb.rows) row.pop_back();  // wall time would break byte-identical reruns
      tb.columns.pop_back();
      write_table_csv(tb, out("rmse_sweep.csv"));
      PlotSeries s;
      for (const auto& r : rows) {
        s.x.push_back(static_cast<double>(r.tau_f));
        s.y.push_back(r.mean_rmse);
      }
      write_line_plot_png({s}, out("rmse_sweep.png"));
      const auto best = std::min_element(rows.begin(), rows.end(),
                                         [](const auto& a, const auto& b) { return a.mean_rmse < b.mean_rmse; });
      if (best != rows.end()) rep.lines.push_back("rmse-sweep minimum at tau_f " + std::to_string(best->tau_f));
    }
  }
  return rep;
}

}  // namespace thz

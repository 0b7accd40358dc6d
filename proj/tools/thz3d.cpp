#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "thz/config.hpp"
#include "thz/io.hpp"
#include "thz/pipeline.hpp"

using namespace thz;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct Common {
  std::string config_file;
  std::vector<std::string> sets;
};

// Config file, then --set overrides, then explicit flags (applied by the caller via set()).
Config load_config(const Common& c) {
  Config cfg = c.config_file.empty() ? Config{} : Config::load(c.config_file);
  for (const auto& s : c.sets) cfg.apply_override(s);
  return cfg;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_file, "key = value settings file");
  sub->add_option("--set", c.sets, "override a setting, key=value (repeatable)");
}

void log(const std::string& msg) { std::cerr << "thz3d: " << msg << '\n'; }

template <typename T>
void put(Config& cfg, const std::string& key, const std::optional<T>& v) {
  if (!v) return;
  if constexpr (std::is_same_v<T, std::string>) {
    cfg.set(key, *v);
  } else {
    std::ostringstream s;
    s.precision(17);
    s << *v;
    cfg.set(key, s.str());
  }
}

PngScale png_scale(const Config& cfg) {
  const std::string s = cfg.get_or("png_scale", "linear");
  if (s == "linear") return PngScale::Linear;
  if (s == "db") return PngScale::Db;
  throw ConfigError("png_scale must be linear or db");
}

AcquisitionConfig acquisition_for(const Config& cfg, const std::string& truth) {
  AcquisitionConfig acq;
  if (!truth.empty()) read_scene_json(truth, &acq);
  Config merged;
  for (const char* k : {"f_start_hz", "f_end_hz", "n_freq", "pad_factor", "lateral_step_um", "depth_per_sample_um"})
    if (cfg.has(k)) merged.set(k, cfg.get(k));
  AcquisitionConfig out = acquisition_from(merged);
  if (!merged.has("f_start_hz")) out.f_start_hz = acq.f_start_hz;
  if (!merged.has("f_end_hz")) out.f_end_hz = acq.f_end_hz;
  if (!merged.has("n_freq")) out.n_freq = acq.n_freq;
  if (!merged.has("pad_factor")) out.pad_factor = acq.pad_factor;
  if (!merged.has("lateral_step_um")) out.lateral_step_um = acq.lateral_step_um;
  if (!merged.has("depth_per_sample_um")) out.depth_per_sample_um = acq.depth_per_sample_um;
  out.validate();
  return out;
}

std::string require(const Config& cfg, const std::string& key, const std::string& flag) {
  if (!cfg.has(key)) throw ConfigError("missing " + flag + " (config key '" + key + "')");
  return cfg.get(key);
}

// synth ---------------------------------------------------------------------------------

struct SynthArgs {
  Common common;
  std::optional<std::string> scene, out, truth, snr;
  std::optional<std::size_t> nx, ny, n_freq;
  std::optional<std::uint64_t> seed;
  std::optional<double> psf;
};

int cmd_synth(const SynthArgs& a, std::size_t threads) {
  Config cfg = load_config(a.common);
  put(cfg, "scene", a.scene);
  put(cfg, "nx", a.nx);
  put(cfg, "ny", a.ny);
  put(cfg, "snr_db", a.snr);
  put(cfg, "seed", a.seed);
  put(cfg, "psf_fwhm_um", a.psf);
  put(cfg, "n_freq", a.n_freq);
  put(cfg, "out", a.out);
  put(cfg, "truth", a.truth);

  const AcquisitionConfig acq = acquisition_from(cfg);
  SceneRequest r;
  r.kind = cfg.get_or("scene", "usaf");
  r.nx = cfg.has("nx") ? cfg.get_size("nx") : 64;
  r.ny = cfg.has("ny") ? cfg.get_size("ny") : 64;
  const double snr = cfg.has("snr_db") ? cfg.get_double("snr_db") : 30.0;
  if (std::isfinite(snr)) r.snr_db = snr;
  r.seed = cfg.has("seed") ? cfg.get_size("seed") : 1;
  if (cfg.has("psf_fwhm_um")) r.psf_fwhm_um = cfg.get_double("psf_fwhm_um");
  const std::string out = require(cfg, "out", "--out");
  const std::string truth = cfg.get_or("truth", out + ".json");

  const SceneSpec scene = make_scene(r, acq);
  const ComplexVolume vol = synthesize(scene, acq, threads);
  write_volume(vol, out);
  write_scene_json(scene, acq, truth);
  std::cout << "wrote " << out << " (" << vol.nx() << "x" << vol.ny() << "x" << vol.nz() << ") and " << truth << '\n';
  return kOk;
}

// fit -----------------------------------------------------------------------------------

struct FitArgs {
  Common common;
  std::optional<std::string> in, truth, omega, z0, prefix;
  std::optional<std::size_t> pad, window;
};

int cmd_fit(const FitArgs& a, std::size_t threads) {
  Config cfg = load_config(a.common);
  put(cfg, "in", a.in);
  put(cfg, "truth", a.truth);
  put(cfg, "omega", a.omega);
  put(cfg, "z0", a.z0);
  put(cfg, "out_prefix", a.prefix);
  put(cfg, "pad_factor", a.pad);
  put(cfg, "tau_f", a.window);

  const std::string in = require(cfg, "in", "--in");
  const std::string prefix = require(cfg, "out_prefix", "--out-prefix");
  const std::string truth = cfg.get_or("truth", "");
  const AcquisitionConfig acq = acquisition_for(cfg, truth);
  const std::size_t tau_f = cfg.has("tau_f") ? cfg.get_size("tau_f") : 45;
  const std::string omega = cfg.get_or("omega", "model");
  const std::optional<double> z0 = cfg.has("z0") ? cfg.get_auto_double("z0") : std::nullopt;
  const PngScale scale = png_scale(cfg);

  std::optional<SceneSpec> scene;
  if (!truth.empty()) scene = read_scene_json(truth);
  const ComplexVolume vol = read_volume(in);
  const FitStage fs = run_fit(vol, acq, tau_f, omega, z0, scene ? &*scene : nullptr, threads);
  if (omega == "auto") log("estimated omega " + format_number(fs.omega));
  log("reference zero at padded sample " + format_number(fs.z0));

  write_params_csv(fs.fit.params, prefix + "params.csv");
  write_image_csv(fs.fit.reference.image, prefix + "iu.csv");
  write_png16(fs.fit.reference.image, prefix + "iu.png", scale);
  write_image_csv(fs.iv, prefix + "iv.csv");
  write_png16(fs.iv, prefix + "iv.png", scale);
  write_depth_csv(fs.depth.from_mu, prefix + "depth_mu.csv");
  write_depth_csv(fs.depth.from_max, prefix + "depth_max.csv");
  const RmseStats s = summarize_rmse(fs.fit.params);
  std::cout << "fitted " << s.valid << "/" << vol.pixel_count() << " pixels, mean RMSE " << format_number(s.mean)
            << ", omega " << format_number(fs.omega) << '\n';
  return kOk;
}

// deconv --------------------------------------------------------------------------------

struct DeconvArgs {
  Common common;
  std::optional<std::string> in, method, lambda, kernel, prefix;
  std::optional<std::size_t> kernel_size, iters, scales, inner_iters;
  std::optional<double> sigma, psf;
};

int cmd_deconv(const DeconvArgs& a, std::size_t threads) {
  Config cfg = load_config(a.common);
  put(cfg, "in", a.in);
  put(cfg, "method", a.method);
  put(cfg, "lambda", a.lambda);
  put(cfg, "kernel", a.kernel);
  put(cfg, "out_prefix", a.prefix);
  put(cfg, "kernel_size", a.kernel_size);
  put(cfg, "lr_iters", a.iters);
  put(cfg, "scales", a.scales);
  put(cfg, "inner_iters", a.inner_iters);
  put(cfg, "lr_sigma_px", a.sigma);
  put(cfg, "psf_fwhm_um", a.psf);

  const std::string in = require(cfg, "in", "--in");
  const std::string prefix = require(cfg, "out_prefix", "--out-prefix");
  DeconvRequest r;
  r.method = cfg.get_or("method", "tv-blind");
  if (cfg.has("lambda")) r.blind.lambda = cfg.get_auto_double("lambda");
  if (cfg.has("kernel_size")) r.blind.kernel_size = cfg.get_size("kernel_size");
  if (cfg.has("scales")) r.blind.scales = cfg.get_size("scales");
  if (cfg.has("inner_iters")) r.blind.inner_iters = cfg.get_size("inner_iters");
  r.blind.threads = threads;
  r.kernel_size = r.blind.kernel_size;
  if (cfg.has("lr_iters")) r.lr_iters = cfg.get_size("lr_iters");
  const double lateral = cfg.has("lateral_step_um") ? cfg.get_double("lateral_step_um") : 262.5;
  const double fwhm = cfg.has("psf_fwhm_um") ? cfg.get_double("psf_fwhm_um") : 793.7;
  const std::optional<double> sigma = cfg.has("lr_sigma_px") ? cfg.get_auto_double("lr_sigma_px") : std::nullopt;
  r.sigma_px = sigma ? *sigma : intensity_psf_sigma_px(fwhm, lateral);
  if (r.method == "lr-kernel") r.kernel = read_kernel_csv(require(cfg, "kernel", "--kernel"));

  IntensityImage img(read_image_csv(in));
  const DeconvOutput d = run_deconv(img, r);
  if (d.blind && d.blind->warning) log("tv-blind: objective rose during refinement, stopped early");
  write_image_csv(d.image, prefix + "id.csv");
  write_png16(d.image, prefix + "id.png", png_scale(cfg));
  write_kernel_csv(d.kernel, prefix + "kernel.csv");
  std::cout << r.method << ": wrote " << prefix << "id.csv, " << prefix << "id.png, " << prefix << "kernel.csv\n";
  return kOk;
}

// eval ----------------------------------------------------------------------------------

struct EvalArgs {
  Common common;
  std::optional<std::string> task, in, truth, image, reference, depth_mu, depth_max, prefix, taus, omega;
};

int cmd_eval(const EvalArgs& a, std::size_t threads) {
  Config cfg = load_config(a.common);
  put(cfg, "task", a.task);
  put(cfg, "in", a.in);
  put(cfg, "truth", a.truth);
  put(cfg, "image", a.image);
  put(cfg, "reference", a.reference);
  put(cfg, "depth_mu", a.depth_mu);
  put(cfg, "depth_max", a.depth_max);
  put(cfg, "out_prefix", a.prefix);
  put(cfg, "sweep_taus", a.taus);
  put(cfg, "omega", a.omega);

  const std::string task = require(cfg, "task", "--task");
  const std::string prefix = require(cfg, "out_prefix", "--out-prefix");
  auto scene = [&] { return read_scene_json(require(cfg, "truth", "--truth")); };

  if (task == "rmse-sweep") {
    const std::string truth = cfg.get_or("truth", "");
    AcquisitionConfig acq = acquisition_for(cfg, truth);
    const ComplexVolume vol = read_volume(require(cfg, "in", "--in"));
    acq.carrier_omega = resolve_omega(cfg.get_or("omega", "model"), vol, acq);
    std::vector<std::size_t> taus;
    for (double t : cfg.has("sweep_taus") ? cfg.get_double_list("sweep_taus") : std::vector<double>{5, 9, 13, 20, 28, 36, 45, 60}) {
      if (!(t >= 1.0) || t != std::floor(t)) throw ConfigError("sweep taus must be positive integers");
      taus.push_back(static_cast<std::size_t>(t));
    }
    FitOptions o;
    o.threads = threads;
    const auto rows = window_sweep(vol, acq, taus, o);
    write_table_csv(sweep_table(rows), prefix + "rmse_sweep.csv");
    PlotSeries s;
    for (const auto& r : rows) {
      s.x.push_back(static_cast<double>(r.tau_f));
      s.y.push_back(r.mean_rmse);
      std::cout << "tau_f " << r.tau_f << " mean " << format_number(r.mean_rmse) << " max " << format_number(r.max_rmse) << '\n';
    }
    write_line_plot_png({s}, prefix + "rmse_sweep.png");
  } else if (task == "depth-table") {
    const SceneSpec sc = scene();
    const DepthMaps maps{read_depth_csv(require(cfg, "depth_mu", "--depth-mu")),
                         read_depth_csv(require(cfg, "depth_max", "--depth-max"))};
    const auto rows = depth_step_table(maps, sc);
    write_table_csv(depth_table(rows), prefix + "depth_table.csv");
    for (const auto& r : rows)
      std::cout << "gt " << format_number(r.gt_um) << " mu " << format_number(r.mu_um) << " ("
                << format_number(100 * r.error_mu) << "%) max " << format_number(r.max_um) << " ("
                << format_number(100 * r.error_max) << "%)\n";
  } else if (task == "mtf") {
    const SceneSpec sc = scene();
    AcquisitionConfig acq;
    read_scene_json(require(cfg, "truth", "--truth"), &acq);
    const Image img = read_image_csv(require(cfg, "image", "--image"));
    const auto rep = line_pattern_contrast(img, sc.groups, acq.lateral_step_um);
    write_table_csv(contrast_table(rep), prefix + "contrast.csv");
    write_table_csv({{"horizontal_resolution_um", "vertical_resolution_um"},
                     {{format_number(rep.horizontal_resolution_um), format_number(rep.vertical_resolution_um)}}},
                    prefix + "resolution.csv");
    PlotSeries v, h;
    for (const auto& g : rep.groups) {
      auto& s = g.orientation == BarOrientation::Vertical ? v : h;
      s.x.push_back(g.lp_per_mm);
      s.y.push_back(g.mtf);
    }
    write_line_plot_png({v, h}, prefix + "mtf.png");
    std::cout << "3 dB resolution: horizontal " << format_number(rep.horizontal_resolution_um) << " um, vertical "
              << format_number(rep.vertical_resolution_um) << " um\n";
  } else if (task == "variance") {
    const SceneSpec sc = scene();
    if (!sc.homogeneous_region) throw DataError("scene has no homogeneous band");
    const Image ref = read_image_csv(require(cfg, "reference", "--reference"));
    const Image img = read_image_csv(require(cfg, "image", "--image"));
    const auto va = region_variance(ref, *sc.homogeneous_region);
    const auto vb = region_variance(img, *sc.homogeneous_region);
    write_table_csv(variance_table(va, vb, "reference", "image"), prefix + "variance.csv");
    std::size_t lower = 0;
    for (std::size_t i = 0; i < va.size(); ++i) lower += vb[i] < va[i];
    std::cout << "image variance below reference in " << lower << "/" << va.size() << " rows\n";
  } else if (task == "db") {
    const Image img = read_image_csv(require(cfg, "image", "--image"));
    PixelRegion region{0, 0, img.nx(), img.ny()};
    if (cfg.has("truth")) {
      const SceneSpec sc = scene();
      if (sc.texture_region) region = *sc.texture_region;
    }
    const double db = region_contrast_db(img, region);
    write_png16(db_image(img), prefix + "db.png", PngScale::Linear);
    write_table_csv({{"region_contrast_db"}, {{format_number(db)}}}, prefix + "db_contrast.csv");
    std::cout << "region contrast " << format_number(db) << " dB\n";
  } else {
    throw ConfigError("unknown task '" + task + "' (rmse-sweep, depth-table, mtf, variance, db)");
  }
  return kOk;
}

// pipeline ------------------------------------------------------------------------------

struct PipelineArgs {
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::string> out_dir;
};

int cmd_pipeline(const PipelineArgs& a, std::optional<std::size_t> threads) {
  Config cfg = Config::load(a.config_file);
  for (const auto& s : a.sets) cfg.apply_override(s);
  put(cfg, "out_dir", a.out_dir);
  const PipelineReport rep = run_pipeline(cfg, threads);
  for (const auto& line : rep.lines) std::cout << line << '\n';
  std::cout << "wrote " << rep.files.size() << " files to " << cfg.get("out_dir") << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FMCW terahertz 3D imaging: curve-fit depth super-resolution and blind deconvolution"};
  app.require_subcommand(1);
  app.fallthrough();
  std::optional<std::size_t> threads;
  app.add_option("--threads", threads, "worker threads (default: available parallelism)");

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "synthesize a phantom volume and its ground truth");
  add_common(synth, sa.common);
  synth->add_option("--scene", sa.scene, "step, usaf, metalpcb or textured");
  synth->add_option("--nx", sa.nx);
  synth->add_option("--ny", sa.ny);
  synth->add_option("--n-freq", sa.n_freq, "frequency samples per pixel");
  synth->add_option("--snr-db", sa.snr, "noise level, or inf for noiseless");
  synth->add_option("--seed", sa.seed);
  synth->add_option("--psf-fwhm", sa.psf, "lateral PSF FWHM in um");
  synth->add_option("--out", sa.out, "volume file (THZ3)");
  synth->add_option("--truth", sa.truth, "ground-truth JSON (default: <out>.json)");

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "curve-fit every pixel of a volume");
  add_common(fit, fa.common);
  fit->add_option("--in", fa.in, "frequency-domain volume");
  fit->add_option("--truth", fa.truth, "scene JSON; supplies acquisition constants and the reference region");
  fit->add_option("--pad", fa.pad, "zero-padding factor (default 9)");
  fit->add_option("--window", fa.window, "fit window half-width tau_f (default 45)");
  fit->add_option("--omega", fa.omega, "model, auto or a value in rad per padded sample");
  fit->add_option("--z0", fa.z0, "reference zero: auto or a padded-sample index");
  fit->add_option("--out-prefix", fa.prefix);

  DeconvArgs da;
  auto* deconv = app.add_subcommand("deconv", "deconvolve an intensity image");
  add_common(deconv, da.common);
  deconv->add_option("--in", da.in, "intensity image CSV");
  deconv->add_option("--method", da.method, "tv-blind, lr-gauss or lr-kernel");
  deconv->add_option("--lambda", da.lambda, "TV weight, or auto for 2e-3 max(I)");
  deconv->add_option("--kernel-size", da.kernel_size);
  deconv->add_option("--kernel", da.kernel, "kernel CSV for lr-kernel");
  deconv->add_option("--iters", da.iters, "Lucy-Richardson iterations (default 50)");
  deconv->add_option("--scales", da.scales, "tv-blind pyramid levels");
  deconv->add_option("--inner-iters", da.inner_iters, "tv-blind primal-dual iterations per image step");
  deconv->add_option("--sigma", da.sigma, "lr-gauss kernel sigma in pixels (default from the PSF)");
  deconv->add_option("--psf-fwhm", da.psf, "field PSF FWHM in um for the lr-gauss default");
  deconv->add_option("--out-prefix", da.prefix);

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "evaluation tables and plots");
  add_common(eval, ea.common);
  eval->add_option("--task", ea.task, "rmse-sweep, depth-table, mtf, variance or db");
  eval->add_option("--in", ea.in, "volume (rmse-sweep)");
  eval->add_option("--truth", ea.truth, "scene JSON");
  eval->add_option("--image", ea.image, "intensity image CSV");
  eval->add_option("--reference", ea.reference, "reference intensity CSV (variance)");
  eval->add_option("--depth-mu", ea.depth_mu);
  eval->add_option("--depth-max", ea.depth_max);
  eval->add_option("--taus", ea.taus, "comma-separated window half-widths");
  eval->add_option("--omega", ea.omega, "model, auto or a value (rmse-sweep)");
  eval->add_option("--out-prefix", ea.prefix);

  PipelineArgs pa;
  auto* pipeline = app.add_subcommand("pipeline", "synth, fit, deconv and eval from one config file");
  pipeline->add_option("config", pa.config_file, "config file")->required();
  pipeline->add_option("--set", pa.sets, "override a setting, key=value (repeatable)");
  pipeline->add_option("--out-dir", pa.out_dir);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    const std::size_t t = threads.value_or(0);
    if (synth->parsed()) return cmd_synth(sa, t);
    if (fit->parsed()) return cmd_fit(fa, t);
    if (deconv->parsed()) return cmd_deconv(da, t);
    if (eval->parsed()) return cmd_eval(ea, t);
    if (pipeline->parsed()) return cmd_pipeline(pa, threads);
  } catch (const DataError& e) {
    log(std::string("data error: ") + e.what());
    return kData;
  } catch (const NumericalError& e) {
    log(std::string("numerical failure: ") + e.what());
    return kNumerical;
  } catch (const std::invalid_argument& e) {
    log(std::string("usage error: ") + e.what());
    return kUsage;
  } catch (const std::exception& e) {
    log(std::string("numerical failure: ") + e.what());
    return kNumerical;
  }
  return kUsage;
}

// Command-line front end: simulate / blind / deconv / validate /
// longrange-check, wired to the repo-wide f64le+JSON array format.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sundeconv/blind.hpp"
#include "sundeconv/nonblind.hpp"
#include "sundeconv/prox.hpp"
#include "sundeconv/simkit.hpp"
#include "sundeconv/wavelet.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sundeconv;

namespace {

struct ConfigError : std::runtime_error {
  std::string code;
  ConfigError(std::string c, const std::string& what)
      : std::runtime_error(what), code(std::move(c)) {}
};

struct CommonOptions {
  std::string config_path;
  std::string out_dir = ".";
  std::string sigma_spec;
  std::string mu_spec;
  std::string prefilter_path;
  int b = -1;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  bool emit_pgm = false;
  bool trace = false;
  bool print_config = false;
};

void add_common_flags(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--config", opt.config_path, "JSON config file");
  cmd->add_option("--out-dir", opt.out_dir, "output directory");
  cmd->add_option("--sigma", opt.sigma_spec,
                  "noise level: fixed:<v> | rme | adaptive:1,2,3");
  cmd->add_option("--mu", opt.mu_spec,
                  "long-range constant: fixed:<v> | estimate");
  cmd->add_option("--prefilter", opt.prefilter_path,
                  "parametric prefilter kernel (array file)");
  cmd->add_option("--b", opt.b, "filter half width");
  cmd->add_option("--seed", opt.seed, "rng seed")
      ->each([&opt](const std::string&) { opt.seed_set = true; });
  cmd->add_option("--threads", opt.threads, "worker thread cap (0 = cores)");
  cmd->add_flag("--emit-pgm", opt.emit_pgm, "write PGM renderings");
  cmd->add_flag("--trace", opt.trace, "emit per-iteration JSON-lines trace");
  cmd->add_flag("--print-effective-config", opt.print_config,
                "dump the merged configuration and exit");
}

json load_config(const CommonOptions& opt) {
  json cfg = json::object();
  if (!opt.config_path.empty()) {
    std::ifstream f(opt.config_path);
    if (!f)
      throw ConfigError("config_unreadable", "cannot open " + opt.config_path);
    try {
      cfg = json::parse(f);
    } catch (const json::parse_error& e) {
      throw ConfigError("config_invalid", e.what());
    }
  }
  return cfg;
}

// Flag overrides beat config keys; config keys beat defaults.
void merge_flags(json& cfg, const CommonOptions& opt) {
  if (!opt.sigma_spec.empty()) cfg["sigma"] = opt.sigma_spec;
  if (!opt.mu_spec.empty()) cfg["mu"] = opt.mu_spec;
  if (!opt.prefilter_path.empty()) cfg["prefilter"] = opt.prefilter_path;
  if (opt.b >= 0) cfg["b"] = opt.b;
  if (opt.seed_set) cfg["seed"] = opt.seed;
  if (opt.threads > 0) cfg["threads"] = opt.threads;
  if (opt.emit_pgm) cfg["emit_pgm"] = true;
  if (opt.trace) cfg["trace"] = true;
  cfg["out_dir"] = opt.out_dir;
}

void apply_threads(const json& cfg) {
  int threads = cfg.value("threads", 0);
  if (threads <= 0)
    threads = static_cast<int>(std::thread::hardware_concurrency());
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#endif
}

void ensure_out_dir(const json& cfg) {
  fs::create_directories(cfg.at("out_dir").get<std::string>());
}

std::string out_path(const json& cfg, const std::string& name) {
  return (fs::path(cfg.at("out_dir").get<std::string>()) / name).string();
}

std::vector<DiskGeometry> parse_geometry(const json& cfg, std::size_t patches) {
  if (!cfg.contains("geometry"))
    throw ConfigError("geometry_missing", "no geometry entries in config");
  std::vector<DiskGeometry> geoms;
  for (const json& g : cfg.at("geometry"))
    geoms.push_back(DiskGeometry::from_radius(g.at("row").get<double>(),
                                              g.at("col").get<double>(),
                                              g.at("radius").get<double>()));
  if (patches != 0 && geoms.size() != patches)
    throw ConfigError("geometry_missing",
                      "geometry count does not match observation count");
  return geoms;
}

ImageStack load_observations(const json& cfg) {
  if (!cfg.contains("observations"))
    throw ConfigError("observations_missing", "no observation files in config");
  ImageStack y;
  for (const json& p : cfg.at("observations"))
    y.push_back(read_array(p.get<std::string>()));
  if (y.empty())
    throw ConfigError("observations_missing", "empty observation list");
  return y;
}

SolverConfig parse_solver(const json& cfg) {
  SolverConfig sc;
  const json s = cfg.value("solver", json::object());
  sc.decay = s.value("decay", sc.decay);
  sc.max_outer = s.value("max_outer", sc.max_outer);
  sc.max_rho_rounds = s.value("max_rho_rounds", sc.max_rho_rounds);
  sc.whiteness_window = s.value("whiteness_window", sc.whiteness_window);
  sc.noise_bound_c = s.value("noise_bound_c", sc.noise_bound_c);
  sc.inner_tol = s.value("inner_tol", sc.inner_tol);
  sc.max_inner_image = s.value("max_inner_image", sc.max_inner_image);
  sc.max_inner_filter = s.value("max_inner_filter", sc.max_inner_filter);
  sc.theta_draws = s.value("theta_draws", sc.theta_draws);
  sc.adaptive_cp_steps = s.value("adaptive_cp_steps", sc.adaptive_cp_steps);
  sc.seed = cfg.value("seed", 42);
  return sc;
}

struct SigmaChoice {
  std::string source;  // fixed | rme | adaptive
  double fixed = 0.0;
  std::vector<double> multipliers{1.0, 2.0, 3.0};
};

SigmaChoice parse_sigma(const json& cfg) {
  SigmaChoice s;
  if (!cfg.contains("sigma")) {
    s.source = "rme";
    return s;
  }
  const json& j = cfg.at("sigma");
  if (j.is_number()) {
    s.source = "fixed";
    s.fixed = j.get<double>();
    return s;
  }
  const std::string spec = j.get<std::string>();
  if (spec == "rme") {
    s.source = "rme";
  } else if (spec.rfind("fixed:", 0) == 0) {
    s.source = "fixed";
    s.fixed = std::stod(spec.substr(6));
  } else if (spec.rfind("adaptive", 0) == 0) {
    s.source = "adaptive";
    if (spec.size() > 9) {
      s.multipliers.clear();
      std::string rest = spec.substr(9);
      std::size_t pos = 0;
      while (pos < rest.size()) {
        std::size_t comma = rest.find(',', pos);
        if (comma == std::string::npos) comma = rest.size();
        s.multipliers.push_back(std::stod(rest.substr(pos, comma - pos)));
        pos = comma + 1;
      }
    }
    if (s.multipliers.empty())
      throw ConfigError("sigma_invalid", "adaptive sigma needs multipliers");
  } else {
    throw ConfigError("sigma_invalid", "unrecognized sigma spec: " + spec);
  }
  return s;
}

struct MuChoice {
  std::string source;  // fixed | estimate
  double fixed = 0.0;
};

MuChoice parse_mu(const json& cfg) {
  MuChoice m;
  m.source = "fixed";
  if (!cfg.contains("mu")) return m;
  const json& j = cfg.at("mu");
  if (j.is_number()) {
    m.fixed = j.get<double>();
    return m;
  }
  const std::string spec = j.get<std::string>();
  if (spec == "estimate") {
    m.source = "estimate";
  } else if (spec.rfind("fixed:", 0) == 0) {
    m.fixed = std::stod(spec.substr(6));
  } else {
    throw ConfigError("mu_invalid", "unrecognized mu spec: " + spec);
  }
  return m;
}

FilterEstimate load_filter(const std::string& path) {
  const Image img = read_array(path);
  if (!img.square() || img.rows % 2 == 0)
    throw ConfigError("filter_invalid", "filter file must be odd square");
  FilterEstimate h;
  h.half_width = img.rows / 2;
  h.core = img.v;
  h.validate();
  return h;
}

void write_filter(const std::string& path, const FilterEstimate& h) {
  Image img(h.side(), h.side());
  img.v = h.core;
  write_array(path, img);
}

IterTraceFn make_trace(const json& cfg) {
  if (!cfg.value("trace", false)) return {};
  auto stream = std::make_shared<std::ofstream>(out_path(cfg, "trace.jsonl"));
  return [stream](int k, int t, double objective, double change, double step) {
    json line = {{"k", k},
                 {"t", t},
                 {"objective", objective},
                 {"primal_change", change},
                 {"step", step}};
    *stream << line.dump() << "\n";
  };
}

int run_simulate(const json& cfg) {
  SyntheticScenario sc;
  sc.side = cfg.value("side", 256);
  sc.patches = cfg.value("patches", 3);
  sc.disk_radius = cfg.value("radius", 48.0);
  if (cfg.contains("center")) {
    sc.disk_row = cfg.at("center").at(0).get<double>();
    sc.disk_col = cfg.at("center").at(1).get<double>();
  } else {
    sc.disk_row = sc.side / 2.0;
    sc.disk_col = sc.side / 2.0;
  }
  sc.filter_half_width = cfg.value("b", 16);
  sc.bsnr_db = cfg.value("bsnr_db", 30.0);
  sc.noiseless = cfg.value("noiseless", false);
  sc.noise_seed = cfg.value("seed", 42);
  sc.texture_seed = cfg.value("texture_seed", 7);

  const std::string kind = cfg.value("filter", "gaussian");
  if (kind == "gaussian") {
    const json fp = cfg.value("filter_params", json::object());
    sc.filter = make_gaussian_filter(
        sc.filter_half_width, fp.value("sigma_h", 2.0), fp.value("sigma_v", 4.0),
        fp.value("rotation_deg", 45.0));
  } else if (kind == "x") {
    sc.filter = make_x_filter(sc.filter_half_width);
  } else if (kind == "delta") {
    sc.filter = delta_filter(sc.filter_half_width);
  } else {
    sc.filter = load_filter(kind);
    sc.filter_half_width = sc.filter.half_width;
  }

  ensure_out_dir(cfg);
  const SimulatedData data = simulate_observations(sc);

  json manifest;
  manifest["observations"] = json::array();
  manifest["ground_truth"] = json::array();
  manifest["geometry"] = json::array();
  for (int j = 0; j < sc.patches; ++j) {
    char name[64];
    std::snprintf(name, sizeof(name), "y_%03d.f64", j);
    write_array(out_path(cfg, name), data.y[j]);
    manifest["observations"].push_back(out_path(cfg, name));
    std::snprintf(name, sizeof(name), "xgt_%03d.f64", j);
    write_array(out_path(cfg, name), data.x_gt[j]);
    manifest["ground_truth"].push_back(out_path(cfg, name));
    manifest["geometry"].push_back({{"row", sc.disk_row},
                                    {"col", sc.disk_col},
                                    {"radius", sc.disk_radius}});
    if (cfg.value("emit_pgm", false)) {
      std::snprintf(name, sizeof(name), "y_%03d.pgm", j);
      write_pgm16(out_path(cfg, name), data.y[j], false);
    }
  }
  write_filter(out_path(cfg, "h_gt.f64"), data.h_gt);
  manifest["h_gt"] = out_path(cfg, "h_gt.f64");
  manifest["b"] = sc.filter_half_width;
  manifest["sigma_true"] = data.sigma;
  manifest["bsnr_db"] = sc.bsnr_db;
  manifest["seed"] = sc.noise_seed;
  manifest["texture_seed"] = sc.texture_seed;
  manifest["filter"] = kind;

  std::ofstream m(out_path(cfg, "scenario.json"));
  m << manifest.dump(2) << "\n";
  std::cout << "wrote " << sc.patches << " patches to "
            << cfg.at("out_dir").get<std::string>() << "\n";
  return 0;
}

struct BlindInputs {
  ImageStack y;
  ImageStack z;
  std::vector<DiskGeometry> geoms;
  int b = 16;
  int levels = 3;
  double mu = 0.0;
  std::optional<Image> prefilter;
};

BlindInputs gather_blind_inputs(const json& cfg) {
  BlindInputs in;
  in.y = load_observations(cfg);
  in.geoms = parse_geometry(cfg, in.y.size());
  if (!cfg.contains("b"))
    throw ConfigError("b_missing", "filter half width b required");
  in.b = cfg.at("b").get<int>();
  in.levels = cfg.value("levels", 3);

  const MuChoice mu = parse_mu(cfg);
  in.mu = mu.source == "estimate" ? estimate_mu(in.y, in.geoms) : mu.fixed;
  in.z = in.y;
  for (Image& img : in.z)
    for (double& v : img.v) v -= in.mu;

  if (cfg.contains("prefilter"))
    in.prefilter = read_array(cfg.at("prefilter").get<std::string>());
  return in;
}

void write_blind_outputs(const json& cfg, const BlindProblem& prob,
                         const BlindResult& result, const std::string& suffix) {
  write_filter(out_path(cfg, "h_star" + suffix + ".f64"), result.h);
  const ImageStack inner = result.x_inner(prob.dom);
  for (std::size_t j = 0; j < inner.size(); ++j) {
    char name[64];
    std::snprintf(name, sizeof(name), "x_star%s_%03zu.f64", suffix.c_str(), j);
    write_array(out_path(cfg, name), inner[j]);
    if (cfg.value("emit_pgm", false)) {
      std::snprintf(name, sizeof(name), "x_star%s_%03zu.pgm", suffix.c_str(), j);
      write_pgm16(out_path(cfg, name), inner[j], false);
    }
  }
  if (cfg.value("emit_pgm", false)) {
    Image himg(result.h.side(), result.h.side());
    himg.v = result.h.core;
    write_pgm16(out_path(cfg, "h_star" + suffix + ".pgm"), himg, true);
  }
  std::ofstream rep(out_path(cfg, "run_report" + suffix + ".json"));
  rep << run_report_to_json(result.report) << "\n";
}

int run_blind(const json& cfg) {
  BlindInputs in = gather_blind_inputs(cfg);
  SolverConfig solver = parse_solver(cfg);
  solver.mu = in.mu;
  ensure_out_dir(cfg);
  solver.trace = make_trace(cfg);

  const SigmaChoice sigma = parse_sigma(cfg);
  const bool warm_sweep = cfg.value("warm_sweep", false);
  const std::size_t patches = in.y.size();

  json summary;
  summary["mu"] = in.mu;

  ImageStack x_warm;
  FilterEstimate h_warm = delta_filter(in.b);
  const std::size_t first_p = warm_sweep ? 1 : patches;
  for (std::size_t p = first_p; p <= patches; ++p) {
    ImageStack z(in.z.begin(), in.z.begin() + static_cast<std::ptrdiff_t>(p));
    std::vector<DiskGeometry> geoms(
        in.geoms.begin(), in.geoms.begin() + static_cast<std::ptrdiff_t>(p));
    BlindProblem prob =
        make_blind_problem(z, geoms, in.b, in.levels, solver.theta_draws,
                           solver.seed, in.prefilter ? &*in.prefilter : nullptr);

    double sigma_base = sigma.fixed;
    if (sigma.source != "fixed") {
      sigma_base = estimate_sigma_rme(z[0], WaveletDictionary(z[0].rows, in.levels));
      summary["sigma_rme"] = sigma_base;
    }

    ImageStack x0 = initial_images(prob);
    for (std::size_t j = 0; j < x_warm.size() && j < x0.size(); ++j)
      x0[j] = x_warm[j];
    const bool use_warm = !x_warm.empty();

    BlindResult result;
    if (sigma.source == "adaptive") {
      const SigmaSweepResult sweep =
          adaptive_sigma(prob, solver, in.b, sigma_base, sigma.multipliers);
      result = std::move(sweep.best);
      summary["sigma_sweep"] = json::array();
      for (std::size_t i = 0; i < sweep.sigmas.size(); ++i)
        summary["sigma_sweep"].push_back(
            {{"sigma", sweep.sigmas[i]},
             {"whiteness", sweep.reports[i].best_whiteness}});
      summary["sigma"] = sweep.chosen_sigma;
    } else {
      solver.sigma = sigma_base;
      result = use_warm ? iterative_rho(prob, solver, in.b, &x0, &h_warm)
                        : iterative_rho(prob, solver, in.b);
      summary["sigma"] = solver.sigma;
    }

    const std::string suffix =
        warm_sweep ? "_P" + std::to_string(p) : std::string();
    write_blind_outputs(cfg, prob, result, suffix);
    if (warm_sweep && p == patches) write_blind_outputs(cfg, prob, result, "");
    summary["final_rho"] = result.report.final_rho;
    summary["best_whiteness"] = result.report.best_whiteness;
    x_warm = result.x;
    h_warm = result.h;
  }

  std::ofstream s(out_path(cfg, "blind_summary.json"));
  s << summary.dump(2) << "\n";
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int run_deconv(const json& cfg, bool validate) {
  if (!cfg.contains("observation"))
    throw ConfigError("observations_missing", "deconv needs an observation file");
  if (!cfg.contains("filter"))
    throw ConfigError("filter_missing", "deconv needs a filter file");
  const Image y = read_array(cfg.at("observation").get<std::string>());
  const FilterEstimate h = load_filter(cfg.at("filter").get<std::string>());

  std::vector<DiskGeometry> geoms;
  if (validate) {
    geoms = parse_geometry(cfg, 0);
    if (geoms.size() != 1)
      throw ConfigError("geometry_missing", "validate needs exactly one geometry");
  }

  const MuChoice mu = parse_mu(cfg);
  double mu_value = mu.fixed;
  if (mu.source == "estimate") {
    if (geoms.empty())
      throw ConfigError("geometry_missing", "mu estimation needs geometry");
    mu_value = estimate_mu({y}, geoms);
  }
  Image z = y;
  for (double& v : z.v) v -= mu_value;

  std::optional<Spectrum> prefilter;
  if (cfg.contains("prefilter")) {
    const Image k = read_array(cfg.at("prefilter").get<std::string>());
    prefilter = kernel_spectrum(k, z.rows + 2 * h.half_width);
  }

  DeconvolveOptions opts;
  opts.levels = cfg.value("levels", 3);
  opts.seed = cfg.value("seed", 42);
  const json s = cfg.value("solver", json::object());
  opts.tol = s.value("inner_tol", opts.tol);
  opts.max_inner = s.value("max_inner_image", opts.max_inner);
  opts.adaptive_cp_steps = s.value("adaptive_cp_steps", opts.adaptive_cp_steps);

  ensure_out_dir(cfg);
  DeconvolveResult res;
  json sweep_log = json::array();
  if (cfg.contains("rho")) {
    res = deconvolve(z, h, cfg.at("rho").get<double>(), opts,
                     prefilter ? &*prefilter : nullptr);
  } else {
    const double rho_base = cfg.value("rho_base", 1.0);
    AdaptiveDeconvolveResult sweep = deconvolve_adaptive(
        z, h, rho_base, opts, prefilter ? &*prefilter : nullptr);
    for (std::size_t i = 0; i < sweep.rhos.size(); ++i)
      sweep_log.push_back(
          {{"rho", sweep.rhos[i]}, {"whiteness", sweep.whiteness[i]}});
    res = std::move(sweep.best);
  }

  write_array(out_path(cfg, "x_star.f64"), res.x);
  if (cfg.value("emit_pgm", false))
    write_pgm16(out_path(cfg, "x_star.pgm"), res.x, false);

  json report;
  report["rho"] = res.rho;
  report["whiteness"] = res.whiteness;
  report["mu"] = mu_value;
  if (!sweep_log.empty()) report["rho_sweep"] = sweep_log;

  if (validate) {
    const IndexSet omega = derive_omega(geoms[0], y.rows);
    MetricSet metrics;
    metrics.disk_ratio = disk_intensity_ratio(y, res.x, omega);
    if (cfg.contains("ground_truth")) {
      const Image gt = read_array(cfg.at("ground_truth").get<std::string>());
      metrics.isnr = compute_isnr(y, res.x, gt);
    }
    if (cfg.contains("filter_truth")) {
      const FilterEstimate h_gt =
          load_filter(cfg.at("filter_truth").get<std::string>());
      metrics.rsnr = compute_rsnr(h_gt, h);
    }
    report["metrics"] = json::parse(metrics_to_json(metrics));
    if (cfg.contains("profile_row")) {
      write_profile_csv(out_path(cfg, "profile.csv"), y, res.x,
                        cfg.at("profile_row").get<int>());
      report["profile"] = out_path(cfg, "profile.csv");
    }
  }

  std::ofstream rep(
      out_path(cfg, validate ? "metrics.json" : "deconv_report.json"));
  rep << report.dump(2) << "\n";
  std::cout << report.dump(2) << "\n";
  return 0;
}

int run_longrange(const json& cfg) {
  if (!cfg.contains("psf"))
    throw ConfigError("psf_missing", "longrange-check needs a psf file");
  if (!cfg.contains("image"))
    throw ConfigError("observations_missing", "longrange-check needs an image");
  const Image psf = read_array(cfg.at("psf").get<std::string>());
  const Image img = read_array(cfg.at("image").get<std::string>());
  const int b = cfg.value("b", 64);
  double row = img.rows / 2.0, col = img.cols / 2.0;
  if (cfg.contains("center")) {
    row = cfg.at("center").at(0).get<double>();
    col = cfg.at("center").at(1).get<double>();
  }
  const double radius = cfg.value("window_radius", 10.0);

  ensure_out_dir(cfg);
  const LongRangeCheck check =
      longrange_constant_check(psf, img, b, row, col, radius);
  write_array(out_path(cfg, "convolved.f64"), check.convolved);

  json report = {{"spread", check.spread},
                 {"mean", check.mean_value},
                 {"spread_over_mean", check.mean_value != 0.0
                                          ? check.spread / check.mean_value
                                          : 0.0}};
  std::ofstream rep(out_path(cfg, "longrange.json"));
  rep << report.dump(2) << "\n";
  std::cout << report.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"transit-constrained blind PSF estimation and deconvolution"};
  app.require_subcommand(1);

  CommonOptions opt;
  CLI::App* simulate =
      app.add_subcommand("simulate", "generate synthetic transit observations");
  CLI::App* blind =
      app.add_subcommand("blind", "estimate the PSF core from transit patches");
  CLI::App* deconv =
      app.add_subcommand("deconv", "known-PSF deconvolution of a patch");
  CLI::App* validate = app.add_subcommand(
      "validate", "deconvolve a held-out patch and report metrics");
  CLI::App* longrange = app.add_subcommand(
      "longrange-check", "test the constant long-range approximation");

  for (CLI::App* cmd : {simulate, blind, deconv, validate, longrange})
    add_common_flags(cmd, opt);
  bool warm_sweep = false;
  blind->add_flag("--warm-sweep", warm_sweep,
                  "run P = 1..n sequentially, warm-starting each stage");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    json cfg = load_config(opt);
    merge_flags(cfg, opt);
    if (warm_sweep) cfg["warm_sweep"] = true;
    apply_threads(cfg);
    if (opt.print_config) {
      std::cout << cfg.dump(2) << "\n";
      return 0;
    }
    if (simulate->parsed()) return run_simulate(cfg);
    if (blind->parsed()) return run_blind(cfg);
    if (deconv->parsed()) return run_deconv(cfg, false);
    if (validate->parsed()) return run_deconv(cfg, true);
    if (longrange->parsed()) return run_longrange(cfg);
    return 2;
  } catch (const ConfigError& e) {
    const json err = {{"error", e.code}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    const json err = {{"error", "config"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    const json err = {{"error", "numeric"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 3;
  }
}

#include "sundeconv/blind.hpp"

#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "sundeconv/prox.hpp"

namespace sundeconv {

void SolverConfig::validate() const {
  if (!(decay > 0.0 && decay < 1.0))
    throw std::invalid_argument("SolverConfig: decay must be in (0,1)");
  if (max_outer < 1 || max_rho_rounds < 1 || max_inner_image < 1 ||
      max_inner_filter < 1)
    throw std::invalid_argument("SolverConfig: iteration caps must be >= 1");
  if (sigma < 0.0) throw std::invalid_argument("SolverConfig: sigma < 0");
  if (whiteness_window < 1)
    throw std::invalid_argument("SolverConfig: whiteness window < 1");
}

std::string run_report_to_json(const RunReport& r) {
  nlohmann::json j;
  j["iterations"] = nlohmann::json::array();
  for (const IterRecord& it : r.iterations) {
    j["iterations"].push_back({{"round", it.round},
                               {"k", it.k},
                               {"objective", it.objective},
                               {"residual_norm", it.residual_norm},
                               {"whiteness", it.whiteness},
                               {"rho", it.rho},
                               {"lambda", it.lambda},
                               {"image_iterations", it.image_iterations},
                               {"filter_iterations", it.filter_iterations}});
  }
  j["final_rho"] = r.final_rho;
  j["sigma"] = r.sigma;
  j["epsilon_target"] = r.epsilon_target;
  j["best_whiteness"] = r.best_whiteness;
  j["best_round"] = r.best_round;
  j["best_k"] = r.best_k;
  j["wall_seconds"] = r.wall_seconds;
  return j.dump(2);
}

BlindProblem make_blind_problem(const ImageStack& z,
                                const std::vector<DiskGeometry>& geoms, int b,
                                int levels, int theta_draws, std::uint64_t seed,
                                const Image* prefilter_kernel) {
  if (z.empty()) throw std::invalid_argument("make_blind_problem: no patches");
  const int n = z[0].rows;
  for (const Image& im : z)
    if (im.rows != n || im.cols != n)
      throw std::invalid_argument("make_blind_problem: ragged patch stack");
  if (geoms.size() != z.size())
    throw std::invalid_argument("make_blind_problem: geometry count mismatch");

  ExpandedDomain dom{n, b};
  BlindProblem p{z,
                 geoms,
                 dom,
                 WaveletDictionary(dom.side(), levels),
                 {},
                 {},
                 {},
                 std::nullopt};
  p.sets = build_coefficient_sets(geoms, dom, p.dict, theta_draws, seed);
  for (const DiskGeometry& g : geoms) {
    p.omegas.push_back(derive_omega(g, n));
    p.omegas_expanded.push_back(omega_in_expanded(p.omegas.back(), dom));
  }
  if (prefilter_kernel)
    p.prefilter = kernel_spectrum(*prefilter_kernel, dom.side());
  return p;
}

ImageStack initial_images(const BlindProblem& p) {
  ImageStack x0;
  x0.reserve(p.z.size());
  for (std::size_t j = 0; j < p.z.size(); ++j) {
    Image e = p.dom.insert_inner(p.z[j]);
    project_p0(e, p.omegas_expanded[j]);
    x0.push_back(std::move(e));
  }
  return x0;
}

double whiteness_measure(const ImageStack& residuals, int window) {
  if (residuals.empty())
    throw std::invalid_argument("whiteness_measure: empty stack");
  double acc = 0.0;
  for (const Image& r : residuals) {
    if (!r.square())
      throw std::invalid_argument("whiteness_measure: square residuals required");
    const int n = r.rows;
    const double mu = mean(r);
    double var = 0.0;
    for (double x : r.v) var += (x - mu) * (x - mu);
    var /= static_cast<double>(r.size());
    if (var <= 1e-24 * std::max(1.0, mu * mu))
      return -std::numeric_limits<double>::infinity();

    Image norm(n, n);
    const double inv_sd = 1.0 / std::sqrt(var);
    for (std::size_t i = 0; i < r.size(); ++i)
      norm.v[i] = (r.v[i] - mu) * inv_sd;
    // Biased circular estimate; lag (0,0) is exactly 1 by construction.
    Image acf = autocorrelation_circular(norm);

    double m_j = 0.0;
    for (int dm = -window; dm <= window; ++dm) {
      for (int dn = -window; dn <= window; ++dn) {
        if (dm == 0 && dn == 0) continue;
        const int i = (dm + n) % n;
        const int j = (dn + n) % n;
        const double c = acf(i, j);
        m_j -= c * c;
      }
    }
    acc += m_j;
  }
  return acc / static_cast<double>(residuals.size());
}

double estimate_mu(const ImageStack& patches,
                   const std::vector<DiskGeometry>& geoms,
                   double inner_radius) {
  if (patches.empty() || patches.size() != geoms.size())
    throw std::invalid_argument("estimate_mu: patch/geometry mismatch");
  double acc = 0.0;
  for (std::size_t p = 0; p < patches.size(); ++p) {
    const DiskGeometry& g = geoms[p];
    if (g.inner_radius < inner_radius)
      throw std::invalid_argument("estimate_mu: disk smaller than inner radius");
    const Image& im = patches[p];
    double s = 0.0;
    std::size_t count = 0;
    const double r2 = inner_radius * inner_radius;
    for (int i = 0; i < im.rows; ++i) {
      for (int j = 0; j < im.cols; ++j) {
        const double di = i - g.row, dj = j - g.col;
        if (di * di + dj * dj <= r2) {
          s += im(i, j);
          ++count;
        }
      }
    }
    if (count == 0)
      throw std::invalid_argument("estimate_mu: empty sampling disk");
    acc += s / static_cast<double>(count);
  }
  return acc / static_cast<double>(patches.size());
}

double noise_energy_bound(double sigma, std::size_t count, double c) {
  const double np = static_cast<double>(count);
  return sigma * std::sqrt(np + c * std::sqrt(np));
}

ImageStack BlindResult::x_inner(const ExpandedDomain& dom) const {
  ImageStack inner;
  inner.reserve(x.size());
  for (const Image& e : x) inner.push_back(dom.select_inner(e));
  return inner;
}

namespace {

ImageStack compute_residual(const BlindProblem& p, const ForwardOperator& op,
                            const ImageStack& x) {
  ImageStack r;
  r.reserve(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    Image rj = op.apply(x[j]);
    for (std::size_t i = 0; i < rj.size(); ++i)
      rj.v[i] = p.z[j].v[i] - rj.v[i];
    r.push_back(std::move(rj));
  }
  return r;
}

double blind_objective(const BlindProblem& p, const ImageStack& x, double rho,
                       const ImageStack& residual) {
  double l1 = 0.0;
  std::vector<double> coeffs;
  const std::vector<double>& band_w = p.dict.band_penalty_weights();
  const std::size_t band_px =
      static_cast<std::size_t>(p.dict.side()) * p.dict.side();
  for (const Image& xj : x) {
    p.dict.analyze(xj, coeffs);
    for (std::size_t i = 0; i < coeffs.size(); ++i)
      if (p.sets.theta[i]) l1 += band_w[i / band_px] * std::abs(coeffs[i]);
  }
  const double res = norm_fro(residual);
  return rho * l1 + 0.5 * res * res;
}

struct AmOutcome {
  ImageStack x;
  FilterEstimate h;
  double whiteness = -std::numeric_limits<double>::infinity();
  double residual_norm = 0.0;
};

AmOutcome run_alternating(const BlindProblem& p, const SolverConfig& config,
                          const ImageStack& x0, const FilterEstimate& h0,
                          int round, RunReport& report) {
  config.validate();
  if (x0.size() != p.z.size())
    throw std::invalid_argument("alternating_minimization: bad X0 stack");
  h0.validate();

  const double rho = config.rho0;
  double lambda = rho;

  ImageStack x = x0;
  FilterEstimate h = h0;
  CpDualState duals;
  ApgState apg;

  AmOutcome best;
  double prev_whiteness = -std::numeric_limits<double>::infinity();
  int decreases = 0;

  for (int k = 1; k <= config.max_outer; ++k) {
    ForwardOperator op(h, p.dom,
                       p.prefilter ? &(*p.prefilter) : nullptr);
    const ImageStack anchor = x;
    ImageStepProblem ip;
    ip.z = &p.z;
    ip.op = &op;
    ip.dict = &p.dict;
    ip.sets = &p.sets;
    ip.omegas = &p.omegas_expanded;
    ip.rho = rho;
    ip.lambda_x = lambda;
    ip.anchor = &anchor;
    ip.adaptive_steps = config.adaptive_cp_steps;
    const InnerResult ir =
        solve_image_step(ip, x, duals, config.inner_tol,
                         config.max_inner_image, k, config.trace);

    const FilterEstimate h_anchor = h;
    FilterStepProblem fp;
    fp.z = &p.z;
    fp.x = &x;
    fp.dom = p.dom;
    fp.prefilter = p.prefilter ? &(*p.prefilter) : nullptr;
    fp.lambda_h = lambda;
    fp.anchor = &h_anchor;
    const InnerResult fr =
        solve_filter_step(fp, h, apg, config.inner_tol,
                          config.max_inner_filter, k, config.trace);

    lambda *= config.decay;

    ForwardOperator op_new(h, p.dom, p.prefilter ? &(*p.prefilter) : nullptr);
    const ImageStack residual = compute_residual(p, op_new, x);
    const double res_norm = norm_fro(residual);
    const double white = whiteness_measure(residual, config.whiteness_window);
    const double objective = blind_objective(p, x, rho, residual);

    report.iterations.push_back({round, k, objective, res_norm, white, rho,
                                 lambda / config.decay, ir.iterations,
                                 fr.iterations});

    // A degenerate (zero-variance) residual means the data is fit exactly;
    // nothing left to whiten.
    if (!std::isfinite(white)) {
      if (best.x.empty()) {
        best.x = x;
        best.h = h;
        best.whiteness = white;
        best.residual_norm = res_norm;
        report.best_round = round;
        report.best_k = k;
        report.best_whiteness = white;
      }
      break;
    }

    if (white > best.whiteness) {
      best.x = x;
      best.h = h;
      best.whiteness = white;
      best.residual_norm = res_norm;
      report.best_round = round;
      report.best_k = k;
      report.best_whiteness = white;
    }
    if (k >= 2 && white < prev_whiteness) {
      if (++decreases >= config.whiteness_patience) break;
    } else {
      decreases = 0;
    }
    prev_whiteness = white;
  }
  if (best.x.empty()) {
    best.x = x;
    best.h = h;
  }
  return best;
}

}  // namespace

BlindResult alternating_minimization(const BlindProblem& p,
                                     const SolverConfig& config,
                                     const ImageStack& x0,
                                     const FilterEstimate& h0) {
  const auto t0 = std::chrono::steady_clock::now();
  BlindResult out;
  out.report.sigma = config.sigma;
  out.report.final_rho = config.rho0;
  out.report.epsilon_target = noise_energy_bound(
      config.sigma, p.z.size() * p.z[0].size(), config.noise_bound_c);
  AmOutcome best = run_alternating(p, config, x0, h0, 1, out.report);
  out.x = std::move(best.x);
  out.h = std::move(best.h);
  out.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return out;
}

BlindResult iterative_rho(const BlindProblem& p, const SolverConfig& config,
                          int filter_half_width, const ImageStack* x0,
                          const FilterEstimate* h0) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();

  const std::size_t np = p.z.size() * p.z[0].size();
  const double eps_target =
      noise_energy_bound(config.sigma, np, config.noise_bound_c);

  ImageStack x = x0 ? *x0 : initial_images(p);
  FilterEstimate h = h0 ? *h0 : delta_filter(filter_half_width);
  if (x.size() != p.z.size())
    throw std::invalid_argument("iterative_rho: x0 stack size mismatch");
  h.validate();

  double rho;
  if (config.rho0 > 0.0) {
    rho = config.rho0;
  } else {
    // tau_Z: mean (weighted) l1 mass of the observation coefficients
    // inside theta, in the scale-uniform coordinates of the penalty.
    double tau_z = 0.0;
    std::vector<double> coeffs;
    const std::vector<double>& band_w = p.dict.band_penalty_weights();
    const std::size_t band_px =
        static_cast<std::size_t>(p.dict.side()) * p.dict.side();
    for (const Image& xj : initial_images(p)) {
      p.dict.analyze(xj, coeffs);
      for (std::size_t i = 0; i < coeffs.size(); ++i)
        if (p.sets.theta[i]) tau_z += band_w[i / band_px] * std::abs(coeffs[i]);
    }
    if (p.sets.theta_count == 0)
      throw std::runtime_error("iterative_rho: empty theta set");
    tau_z *= std::sqrt(2.0) /
             (static_cast<double>(p.z.size()) *
              static_cast<double>(p.sets.theta_count));
    if (tau_z <= 0.0)
      throw std::runtime_error("iterative_rho: blank observations (tau = 0)");
    rho = std::max(std::sqrt(2.0) * config.sigma * config.sigma / tau_z,
                   config.rho_min);
  }

  BlindResult out;
  out.report.sigma = config.sigma;
  out.report.epsilon_target = eps_target;

  double best_whiteness = -std::numeric_limits<double>::infinity();
  double prev_whiteness = -std::numeric_limits<double>::infinity();

  for (int round = 1; round <= config.max_rho_rounds; ++round) {
    SolverConfig round_config = config;
    round_config.rho0 = rho;
    AmOutcome res =
        run_alternating(p, round_config, x, h, round, out.report);

    x = res.x;
    h = res.h;

    if (res.whiteness > best_whiteness) {
      best_whiteness = res.whiteness;
      out.x = res.x;
      out.h = res.h;
      out.report.final_rho = rho;
      out.report.best_whiteness = res.whiteness;
    }

    const double eps_l = res.residual_norm;
    if (eps_l > 0.0)
      rho = std::max(rho * (eps_target / eps_l), config.rho_min);

    if (!std::isfinite(res.whiteness)) break;
    if (round >= 2 && res.whiteness < prev_whiteness) break;
    prev_whiteness = res.whiteness;
  }

  if (out.x.empty()) {
    out.x = std::move(x);
    out.h = std::move(h);
    out.report.final_rho = rho;
  }
  out.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return out;
}

SigmaSweepResult adaptive_sigma(const BlindProblem& p,
                                const SolverConfig& config,
                                int filter_half_width, double sigma_base,
                                const std::vector<double>& multipliers) {
  if (multipliers.empty())
    throw std::invalid_argument("adaptive_sigma: no multipliers");
  SigmaSweepResult sweep;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < multipliers.size(); ++i) {
    SolverConfig c = config;
    c.sigma = multipliers[i] * sigma_base;
    sweep.sigmas.push_back(c.sigma);
    BlindResult r = iterative_rho(p, c, filter_half_width);
    sweep.reports.push_back(r.report);
    if (r.report.best_whiteness > best || sweep.best.x.empty()) {
      best = r.report.best_whiteness;
      sweep.chosen_sigma = c.sigma;
      sweep.chosen_index = static_cast<int>(i);
      sweep.best = std::move(r);
    }
  }
  return sweep;
}

}  // namespace sundeconv

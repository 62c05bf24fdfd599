#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "sundeconv/grid.hpp"
#include "sundeconv/image.hpp"
#include "sundeconv/solvers.hpp"
#include "sundeconv/wavelet.hpp"

namespace sundeconv {

struct SolverConfig {
  double rho0 = 0.0;        // initial regularization; 0 = derive from sigma
  double sigma = 0.0;       // noise standard deviation, DN
  double mu = 0.0;          // long-range constant, DN (already subtracted)
  double decay = 0.75;      // Delta, per-iteration schedule on lambda
  int max_outer = 20;       // alternation cap per rho round
  int max_rho_rounds = 5;
  int whiteness_window = 4;  // L
  // Consecutive whiteness decreases tolerated before a round stops; the
  // measure dips transiently while the filter reorganizes, so a strict
  // first-decrease stop can fire far from the peak.
  int whiteness_patience = 3;
  double noise_bound_c = 2.0;
  double inner_tol = 1e-5;
  int max_inner_image = 300;
  int max_inner_filter = 300;
  int theta_draws = 3;
  std::uint64_t seed = 42;
  double rho_min = 1e-12;
  bool adaptive_cp_steps = true;
  IterTraceFn trace;

  void validate() const;
};

struct IterRecord {
  int round = 0;
  int k = 0;
  double objective = 0.0;
  double residual_norm = 0.0;
  double whiteness = 0.0;
  double rho = 0.0;
  double lambda = 0.0;
  int image_iterations = 0;
  int filter_iterations = 0;
};

struct RunReport {
  std::vector<IterRecord> iterations;
  double final_rho = 0.0;
  double sigma = 0.0;
  double epsilon_target = 0.0;
  double best_whiteness = -std::numeric_limits<double>::infinity();
  int best_round = 0;
  int best_k = 0;
  double wall_seconds = 0.0;
};

std::string run_report_to_json(const RunReport& report);

// Everything derived from the observations that the optimization needs:
// expanded-domain geometry, dictionary, coefficient sets and disk indices.
struct BlindProblem {
  ImageStack z;  // modified observations Y - mu, n x n
  std::vector<DiskGeometry> geoms;
  ExpandedDomain dom;
  WaveletDictionary dict;  // on the expanded side
  CoefficientSets sets;
  std::vector<IndexSet> omegas;           // patch-window indices
  std::vector<IndexSet> omegas_expanded;  // same, expanded-grid indices
  std::optional<Spectrum> prefilter;      // embedded on the expanded grid
};

BlindProblem make_blind_problem(const ImageStack& z,
                                const std::vector<DiskGeometry>& geoms, int b,
                                int levels, int theta_draws, std::uint64_t seed,
                                const Image* prefilter_kernel = nullptr);

// Trivial-solution initialization: the observations zero-padded into the
// expanded grid and projected onto P0.
ImageStack initial_images(const BlindProblem& p);

// Mean whiteness of the residual stack: per image, minus the sum of
// squared off-center circular autocorrelations of the normalized residual
// within a (2L+1)^2 window. Always <= 0; -inf for a zero-variance residual.
double whiteness_measure(const ImageStack& residuals, int window);

// Mean intensity over a disk of radius inner_radius at each geometry
// center, averaged across patches; the long-range PSF constant.
double estimate_mu(const ImageStack& patches,
                   const std::vector<DiskGeometry>& geoms,
                   double inner_radius = 10.0);

// Noise-energy bound: epsilon = sigma sqrt(count + c sqrt(count)).
double noise_energy_bound(double sigma, std::size_t count, double c);

struct BlindResult {
  ImageStack x;  // expanded-domain estimates
  FilterEstimate h;
  RunReport report;

  ImageStack x_inner(const ExpandedDomain& dom) const;
};

// One run of the alternating scheme at fixed rho: image step, filter step,
// decaying cost-to-move weights, whiteness-based stop. Returns the iterate
// with the maximal recorded whiteness.
BlindResult alternating_minimization(const BlindProblem& p,
                                     const SolverConfig& config,
                                     const ImageStack& x0,
                                     const FilterEstimate& h0);

// Outer rho refinement: rho starts at sqrt(2) sigma^2 / tau_Z and scales by
// the ratio of the target noise energy to the achieved residual energy,
// warm-starting each round from the previous result. x0/h0 override the
// trivial initialization (e.g. results of a run with fewer patches); a
// positive rho0 in the config skips the tau-based initial value, which
// keeps warm-started stages on their established regularization level.
BlindResult iterative_rho(const BlindProblem& p, const SolverConfig& config,
                          int filter_half_width,
                          const ImageStack* x0 = nullptr,
                          const FilterEstimate* h0 = nullptr);

struct SigmaSweepResult {
  double chosen_sigma = 0.0;
  int chosen_index = 0;
  std::vector<double> sigmas;
  BlindResult best;
  std::vector<RunReport> reports;
};

// Runs iterative_rho for each candidate sigma = multiplier * sigma_base and
// keeps the run whose residual is whitest.
SigmaSweepResult adaptive_sigma(const BlindProblem& p,
                                const SolverConfig& config,
                                int filter_half_width, double sigma_base,
                                const std::vector<double>& multipliers);

}  // namespace sundeconv

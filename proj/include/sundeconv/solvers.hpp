#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "sundeconv/grid.hpp"
#include "sundeconv/image.hpp"
#include "sundeconv/wavelet.hpp"

namespace sundeconv {

// Power-iteration estimate of the largest singular value of a linear map,
// driven through its normal operator T = K^T K. Deterministic given seed.
// Callers add their own safety margin before deriving step sizes.
double estimate_operator_norm(
    const std::function<void(const std::vector<double>&, std::vector<double>&)>&
        normal_op,
    std::size_t dim, int iterations, std::uint64_t seed);

// Optional per-iteration trace: outer index k, inner index t, objective,
// relative primal change, step size.
using IterTraceFn =
    std::function<void(int k, int t, double objective, double change, double step)>;

struct InnerResult {
  int iterations = 0;
  double objective = 0.0;
  double last_change = 0.0;
  bool converged = false;
};

// Dual state of the primal-dual image solver, kept across outer iterations
// for warm starts. v1 lives in the coefficient domain (zero outside theta),
// v2 on the observed window, v3 on the expanded grid. The step pair and
// balancing damping survive warm starts as well.
struct CpDualState {
  std::vector<std::vector<double>> v1;
  ImageStack v2;
  ImageStack v3;
  double nu = 0.0;
  double primal_step = 0.0;
  double balance_damping = 0.5;
  double operator_norm = 0.0;
  bool valid = false;

  void reset() {
    v1.clear();
    v2.clear();
    v3.clear();
    nu = 0.0;
    primal_step = 0.0;
    balance_damping = 0.5;
    operator_norm = 0.0;
    valid = false;
  }
};

struct ImageStepProblem {
  const ImageStack* z = nullptr;               // observations, n x n
  const ForwardOperator* op = nullptr;         // S_N Phi(h)
  const WaveletDictionary* dict = nullptr;     // on the expanded side
  const CoefficientSets* sets = nullptr;
  const std::vector<IndexSet>* omegas = nullptr;  // expanded-grid indices
  double rho = 0.0;
  double lambda_x = 0.0;
  const ImageStack* anchor = nullptr;          // X^(k), expanded
  // Residual balancing of the step pair (the product stays fixed at the
  // value the step condition allows). false = fixed balanced steps.
  bool adaptive_steps = true;
};

// Minimizes rho ||S_theta Psi^T X||_1 + 1/2 ||Z - S_N Phi(h) X||_F^2
//           + lambda_x/2 ||X - X^(k)||_F^2   over X in P0,
// via the three-dual-block Chambolle-Pock iteration. x is the initial
// iterate on entry and the solution on exit; it is feasible exactly.
InnerResult solve_image_step(const ImageStepProblem& p, ImageStack& x,
                             CpDualState& duals, double tol, int max_inner,
                             int outer_k = 0, const IterTraceFn& trace = {});

// Momentum/step memory of the filter solver.
struct ApgState {
  double step = 1.0;
  bool valid = false;

  void reset() {
    step = 1.0;
    valid = false;
  }
};

struct FilterStepProblem {
  const ImageStack* z = nullptr;      // observations, n x n
  const ImageStack* x = nullptr;      // current images, expanded
  ExpandedDomain dom;
  const Spectrum* prefilter = nullptr;  // optional, on the expanded grid
  double lambda_h = 0.0;
  const FilterEstimate* anchor = nullptr;  // h^(k)
};

// Minimizes 1/2 sum_j ||z_j - S_N Phi(x_j) h||^2 + lambda_h/2 ||h - h^(k)||^2
// over h in the simplex with support Gamma, via monotone accelerated
// proximal gradient with backtracking. h is the initial iterate on entry.
InnerResult solve_filter_step(const FilterStepProblem& p, FilterEstimate& h,
                              ApgState& state, double tol, int max_inner,
                              int outer_k = 0, const IterTraceFn& trace = {});

// Norm of the stacked linear map of the image subproblem
// [S_theta Psi^T; S_N Phi(h); I], with the power-iteration estimate.
double image_step_operator_norm(const ForwardOperator& op,
                                const WaveletDictionary& dict,
                                const CoefficientSets& sets, int iterations,
                                std::uint64_t seed);

// Smooth part of the filter subproblem and its gradient, evaluated at an
// embedded filter iterate.
double filter_step_smooth(const FilterStepProblem& p, const Image& h_embedded,
                          Image* grad);

}  // namespace sundeconv

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sundeconv/grid.hpp"
#include "sundeconv/image.hpp"
#include "sundeconv/solvers.hpp"

namespace sundeconv {

struct DeconvolveOptions {
  int levels = 3;
  int border_draws = 3;
  std::uint64_t seed = 42;
  double tol = 1e-5;
  int max_inner = 300;
  int whiteness_window = 4;
  bool adaptive_cp_steps = true;
};

struct DeconvolveResult {
  Image x;           // restored patch, n x n, non-negative
  Image x_expanded;  // full free-boundary estimate
  double rho = 0.0;
  double whiteness = 0.0;
  InnerResult inner;
};

// Known-PSF deconvolution: minimizes
//   rho ||S_delta Psi^T x||_1 + 1/2 ||z - S_N Phi(h) x||^2   over x >= 0
// on the expanded grid, with delta the detail coefficients unaffected by
// the boundary.
DeconvolveResult deconvolve(const Image& z, const FilterEstimate& h,
                            double rho, const DeconvolveOptions& opts = {},
                            const Spectrum* prefilter = nullptr);

// Sweeps rho over rho_base * 0.5 * {1, 0.5, 0.25} (kept below the blind
// pipeline's value) and returns the run with the whitest residual.
struct AdaptiveDeconvolveResult {
  DeconvolveResult best;
  std::vector<double> rhos;
  std::vector<double> whiteness;
};
AdaptiveDeconvolveResult deconvolve_adaptive(const Image& z,
                                             const FilterEstimate& h,
                                             double rho_base,
                                             const DeconvolveOptions& opts = {},
                                             const Spectrum* prefilter = nullptr);

// ISNR = 20 log10 ||Y - GT||_F / ||X - GT||_F. Returns +inf (the sentinel)
// when the restored stack matches the ground truth exactly.
double compute_isnr(const ImageStack& y, const ImageStack& x,
                    const ImageStack& gt);
double compute_isnr(const Image& y, const Image& x, const Image& gt);

// RSNR = 20 log10 ||h_gt||_2 / ||h_gt - h||_2, cores aligned at the window
// center. Returns +inf when the filters match exactly.
double compute_rsnr(const FilterEstimate& gt, const FilterEstimate& est);

// Ratio of restored to observed intensity summed over the disk pixels.
double disk_intensity_ratio(const Image& y, const Image& x,
                            const IndexSet& omega);

// BSNR = 10 log10(var(blurred stack) / sigma^2).
double compute_bsnr(const ImageStack& blurred, double sigma);

struct MetricSet {
  double isnr = 0.0;
  double rsnr = 0.0;
  double disk_ratio = 0.0;
  double bsnr = 0.0;
};

std::string metrics_to_json(const MetricSet& m);

// Row profile y(row, :) next to x(row, :) as CSV (column, observed,
// restored) for figure-style inspection.
void write_profile_csv(const std::string& path, const Image& observed,
                       const Image& restored, int row);

}  // namespace sundeconv

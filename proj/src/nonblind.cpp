#include "sundeconv/nonblind.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "json.hpp"
#include "sundeconv/blind.hpp"
#include "sundeconv/wavelet.hpp"

namespace sundeconv {

DeconvolveResult deconvolve(const Image& z, const FilterEstimate& h,
                            double rho, const DeconvolveOptions& opts,
                            const Spectrum* prefilter) {
  if (rho < 0.0) throw std::invalid_argument("deconvolve: rho < 0");
  h.validate();
  if (!z.square()) throw std::invalid_argument("deconvolve: square patch required");

  const ExpandedDomain dom{z.rows, h.half_width};
  WaveletDictionary dict(dom.side(), opts.levels);
  CoefficientSets sets =
      build_coefficient_sets({}, dom, dict, opts.border_draws, opts.seed);
  // The l1 prior of the non-blind problem runs over the boundary-clean
  // detail set; reuse the image-step solver by exposing it as theta.
  sets.theta = sets.delta;
  sets.theta_count = sets.delta_count;

  ForwardOperator op(h, dom, prefilter);

  ImageStack z_stack{z};
  ImageStack x{dom.insert_inner(z)};
  for (double& v : x[0].v) v = std::max(v, 0.0);
  const ImageStack anchor{Image(dom.side(), dom.side())};
  const std::vector<IndexSet> omegas{IndexSet{}};

  ImageStepProblem ip;
  ip.z = &z_stack;
  ip.op = &op;
  ip.dict = &dict;
  ip.sets = &sets;
  ip.omegas = &omegas;
  ip.rho = rho;
  ip.lambda_x = 0.0;
  ip.anchor = &anchor;
  ip.adaptive_steps = opts.adaptive_cp_steps;

  CpDualState duals;
  DeconvolveResult out;
  out.inner = solve_image_step(ip, x, duals, opts.tol, opts.max_inner);
  out.rho = rho;
  out.x_expanded = std::move(x[0]);
  out.x = dom.select_inner(out.x_expanded);

  Image residual = op.apply(out.x_expanded);
  for (std::size_t i = 0; i < residual.size(); ++i)
    residual.v[i] = z.v[i] - residual.v[i];
  out.whiteness = whiteness_measure({residual}, opts.whiteness_window);
  return out;
}

AdaptiveDeconvolveResult deconvolve_adaptive(const Image& z,
                                             const FilterEstimate& h,
                                             double rho_base,
                                             const DeconvolveOptions& opts,
                                             const Spectrum* prefilter) {
  AdaptiveDeconvolveResult sweep;
  double best = -std::numeric_limits<double>::infinity();
  for (double mult : {1.0, 0.5, 0.25}) {
    const double rho = rho_base * 0.5 * mult;
    DeconvolveResult r = deconvolve(z, h, rho, opts, prefilter);
    sweep.rhos.push_back(rho);
    sweep.whiteness.push_back(r.whiteness);
    if (r.whiteness > best) {
      best = r.whiteness;
      sweep.best = std::move(r);
    }
  }
  return sweep;
}

namespace {

double db_ratio(double num, double den) {
  if (den == 0.0) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(num / den);
}

}  // namespace

double compute_isnr(const ImageStack& y, const ImageStack& x,
                    const ImageStack& gt) {
  if (y.size() != x.size() || y.size() != gt.size())
    throw std::invalid_argument("compute_isnr: stack size mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    if (!y[j].same_shape(gt[j]) || !x[j].same_shape(gt[j]))
      throw std::invalid_argument("compute_isnr: shape mismatch");
    for (std::size_t i = 0; i < gt[j].size(); ++i) {
      const double dy = y[j].v[i] - gt[j].v[i];
      const double dx = x[j].v[i] - gt[j].v[i];
      num += dy * dy;
      den += dx * dx;
    }
  }
  return db_ratio(std::sqrt(num), std::sqrt(den));
}

double compute_isnr(const Image& y, const Image& x, const Image& gt) {
  return compute_isnr(ImageStack{y}, ImageStack{x}, ImageStack{gt});
}

double compute_rsnr(const FilterEstimate& gt, const FilterEstimate& est) {
  if (gt.half_width != est.half_width)
    throw std::invalid_argument("compute_rsnr: support mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < gt.core.size(); ++i) {
    num += gt.core[i] * gt.core[i];
    const double d = gt.core[i] - est.core[i];
    den += d * d;
  }
  return db_ratio(std::sqrt(num), std::sqrt(den));
}

double disk_intensity_ratio(const Image& y, const Image& x,
                            const IndexSet& omega) {
  if (!y.same_shape(x))
    throw std::invalid_argument("disk_intensity_ratio: shape mismatch");
  if (omega.empty())
    throw std::invalid_argument("disk_intensity_ratio: empty disk set");
  double sx = 0.0, sy = 0.0;
  for (int idx : omega) {
    sx += x.v[static_cast<std::size_t>(idx)];
    sy += y.v[static_cast<std::size_t>(idx)];
  }
  if (sy == 0.0)
    throw std::invalid_argument("disk_intensity_ratio: zero observed intensity");
  return sx / sy;
}

double compute_bsnr(const ImageStack& blurred, double sigma) {
  if (sigma <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(variance(blurred) / (sigma * sigma));
}

std::string metrics_to_json(const MetricSet& m) {
  nlohmann::json j = {{"isnr_db", m.isnr},
                      {"rsnr_db", m.rsnr},
                      {"disk_intensity_ratio", m.disk_ratio},
                      {"bsnr_db", m.bsnr}};
  return j.dump(2);
}

void write_profile_csv(const std::string& path, const Image& observed,
                       const Image& restored, int row) {
  if (!observed.same_shape(restored))
    throw std::invalid_argument("write_profile_csv: shape mismatch");
  if (row < 0 || row >= observed.rows)
    throw std::invalid_argument("write_profile_csv: row out of range");
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_profile_csv: cannot open " + path);
  f << "col,observed,restored\n";
  for (int j = 0; j < observed.cols; ++j)
    f << j << "," << observed(row, j) << "," << restored(row, j) << "\n";
}

}  // namespace sundeconv

#include "sundeconv/prox.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sundeconv {

void soft_threshold(std::span<double> v, double t) {
  if (t < 0.0) throw std::invalid_argument("soft_threshold: t < 0");
  for (double& x : v) {
    const double m = std::abs(x) - t;
    x = m > 0.0 ? std::copysign(m, x) : 0.0;
  }
}

std::vector<double> soft_threshold(std::span<const double> v, double t) {
  std::vector<double> out(v.begin(), v.end());
  soft_threshold(std::span<double>(out), t);
  return out;
}

void prox_quadratic_fidelity(std::span<double> v, std::span<const double> z,
                             double step) {
  if (v.size() != z.size())
    throw std::invalid_argument("prox_quadratic_fidelity: shape mismatch");
  const double inv = 1.0 / (1.0 + step);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (v[i] + step * z[i]) * inv;
}

void prox_cost_to_move(std::span<double> v, std::span<const double> anchor,
                       double lambda, double step) {
  if (v.size() != anchor.size())
    throw std::invalid_argument("prox_cost_to_move: shape mismatch");
  if (lambda < 0.0) throw std::invalid_argument("prox_cost_to_move: lambda < 0");
  const double sl = step * lambda;
  const double inv = 1.0 / (1.0 + sl);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (v[i] + sl * anchor[i]) * inv;
}

void project_p0(Image& expanded, const IndexSet& omega_expanded) {
  for (double& x : expanded.v) x = std::max(x, 0.0);
  for (int idx : omega_expanded) expanded.v[static_cast<std::size_t>(idx)] = 0.0;
}

void project_p0(ImageStack& stack, const std::vector<IndexSet>& omegas_expanded) {
  if (stack.size() != omegas_expanded.size())
    throw std::invalid_argument("project_p0: stack/omega count mismatch");
  for (std::size_t j = 0; j < stack.size(); ++j)
    project_p0(stack[j], omegas_expanded[j]);
}

void project_simplex(std::span<double> v) {
  if (v.empty()) throw std::invalid_argument("project_simplex: empty input");
  std::vector<double> u(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cum = 0.0, theta = 0.0;
  int support = 0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    cum += u[k];
    const double cand = (cum - 1.0) / static_cast<double>(k + 1);
    if (u[k] - cand > 0.0) {
      theta = cand;
      support = static_cast<int>(k + 1);
    }
  }
  if (support == 0) theta = (cum - 1.0) / static_cast<double>(u.size());
  for (double& x : v) x = std::max(x - theta, 0.0);
}

void project_simplex_support(Image& embedded, int half_width) {
  if (!embedded.square())
    throw std::invalid_argument("project_simplex_support: square grid required");
  FilterEstimate core = extract_filter(embedded, half_width);
  project_simplex(std::span<double>(core.core));
  embedded = embed_filter(core, embedded.rows);
}

FilterEstimate project_simplex_support(const FilterEstimate& h) {
  FilterEstimate out = h;
  project_simplex(std::span<double>(out.core));
  return out;
}

}  // namespace sundeconv

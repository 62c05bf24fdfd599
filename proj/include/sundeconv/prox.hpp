#pragma once

#include <span>
#include <vector>

#include "sundeconv/grid.hpp"
#include "sundeconv/image.hpp"

namespace sundeconv {

// Component-wise soft threshold: sign(v) * max(|v| - t, 0).
void soft_threshold(std::span<double> v, double t);
std::vector<double> soft_threshold(std::span<const double> v, double t);

// prox of step * (1/2)||z - .||^2 evaluated at v: (v + step z) / (1 + step).
void prox_quadratic_fidelity(std::span<double> v, std::span<const double> z,
                             double step);

// prox of step * (lambda/2)||. - anchor||^2: (v + step lambda anchor) /
// (1 + step lambda).
void prox_cost_to_move(std::span<double> v, std::span<const double> anchor,
                       double lambda, double step);

// prox of the convex conjugate via the Moreau decomposition:
// prox_{nu F*}(z) = z - nu prox_{F/nu}(z / nu). prox_f(v, step) must
// compute prox_{step F}(v) in place.
template <typename ProxFn>
void conjugate_prox(ProxFn&& prox_f, std::span<double> z, double nu) {
  std::vector<double> inner(z.begin(), z.end());
  for (double& x : inner) x /= nu;
  prox_f(std::span<double>(inner), 1.0 / nu);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] -= nu * inner[i];
}

// Projection onto P0 for one expanded patch: zeros the pixels listed in
// omega (expanded-grid flat indices) and clamps everything, border
// included, at zero from below.
void project_p0(Image& expanded, const IndexSet& omega_expanded);
void project_p0(ImageStack& stack, const std::vector<IndexSet>& omegas_expanded);

// Euclidean projection onto the probability simplex (sort-and-shift).
void project_simplex(std::span<double> v);

// Zeros everything outside the central (2b+1)^2 support window of the
// embedded m x m filter and projects the window onto the simplex.
void project_simplex_support(Image& embedded, int half_width);
FilterEstimate project_simplex_support(const FilterEstimate& h);

}  // namespace sundeconv

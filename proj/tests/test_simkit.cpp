#include <cmath>

#include "doctest.h"
#include "sundeconv/nonblind.hpp"
#include "sundeconv/simkit.hpp"

using namespace sundeconv;

TEST_CASE("gaussian filter: simplex membership and symmetry") {
  const FilterEstimate round = make_gaussian_filter(8, 2.0, 2.0, 0.0);
  CHECK_NOTHROW(round.validate());
  // Radially symmetric: invariant under a quarter turn.
  for (int i = 0; i < round.side(); ++i)
    for (int j = 0; j < round.side(); ++j)
      CHECK(round.at(i, j) ==
            doctest::Approx(round.at(j, round.side() - 1 - i)).epsilon(1e-12));

  const FilterEstimate tilted = make_gaussian_filter(16, 2.0, 4.0, 45.0);
  CHECK_NOTHROW(tilted.validate());
  for (int i = 0; i < tilted.side(); ++i)
    for (int j = 0; j < tilted.side(); ++j)
      CHECK(tilted.at(i, j) == doctest::Approx(tilted.at(j, i)).epsilon(1e-12));
}

TEST_CASE("x filter: symmetry, simplex membership and the 3x3 case") {
  const FilterEstimate x = make_x_filter(16);
  CHECK_NOTHROW(x.validate());
  for (int i = 0; i < x.side(); ++i)
    for (int j = 0; j < x.side(); ++j) {
      CHECK(x.at(i, j) == x.at(j, i));
      CHECK(x.at(i, j) == x.at(j, x.side() - 1 - i));
    }

  const FilterEstimate tiny = make_x_filter(1);
  const double corner = std::exp(-0.25);
  const double norm = 2.0 + 4.0 * corner;
  CHECK(tiny.at(0, 0) == doctest::Approx(corner / norm).epsilon(1e-12));
  CHECK(tiny.at(0, 2) == doctest::Approx(corner / norm).epsilon(1e-12));
  CHECK(tiny.at(2, 0) == doctest::Approx(corner / norm).epsilon(1e-12));
  CHECK(tiny.at(2, 2) == doctest::Approx(corner / norm).epsilon(1e-12));
  CHECK(tiny.at(1, 1) == doctest::Approx(2.0 / norm).epsilon(1e-12));
  CHECK(tiny.at(0, 1) == 0.0);
  CHECK(tiny.at(1, 0) == 0.0);
}

TEST_CASE("texture is reproducible and positive") {
  const Image a = make_solar_texture(256, 7);
  const Image b = make_solar_texture(256, 7);
  CHECK(max_abs_diff(a, b) == 0.0);
  for (double v : a.v) CHECK(v >= 0.0);
  CHECK(variance(a) > 0.0);

  const Image c = make_solar_texture(256, 8);
  CHECK(max_abs_diff(a, c) > 0.0);
}

TEST_CASE("cutout centers stay far apart") {
  for (int i = 0; i < 6; ++i)
    for (int j = i + 1; j < 6; ++j) {
      const auto [ri, ci] = texture_cutout_center(i);
      const auto [rj, cj] = texture_cutout_center(j);
      CHECK(std::hypot(ri - rj, ci - cj) >= 256.0);
    }
}

namespace {

SyntheticScenario small_scenario(std::uint64_t seed) {
  SyntheticScenario sc;
  sc.side = 96;
  sc.patches = 2;
  sc.disk_radius = 16.0;
  sc.disk_row = 48.0;
  sc.disk_col = 48.0;
  sc.filter_half_width = 6;
  sc.filter = make_gaussian_filter(6, 1.5, 2.5, 45.0);
  sc.bsnr_db = 30.0;
  sc.noise_seed = seed;
  return sc;
}

}  // namespace

TEST_CASE("noiseless simulation equals the blurred cutouts exactly") {
  SyntheticScenario sc = small_scenario(1);
  sc.noiseless = true;
  const SimulatedData data = simulate_observations(sc);
  CHECK(data.sigma == 0.0);

  const ExpandedDomain dom{sc.side, sc.filter_half_width};
  for (int j = 0; j < sc.patches; ++j) {
    ForwardOperator op(sc.filter, dom);
    const Image expected = op.apply(data.x_gt_expanded[j]);
    CHECK(max_abs_diff(expected, data.y[j]) < 1e-12);
  }
}

TEST_CASE("the disk is exactly zero in the ground truth") {
  const SimulatedData data = simulate_observations(small_scenario(2));
  for (int j = 0; j < 2; ++j) {
    const IndexSet omega = derive_omega(data.geoms[j], 96);
    double s = 0.0;
    for (int idx : omega) s += std::abs(data.x_gt[j].v[idx]);
    CHECK(s == 0.0);
  }
}

TEST_CASE("empirical bsnr stays within 0.2 dB of the target") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SyntheticScenario sc = small_scenario(seed);
    const SimulatedData noisy = simulate_observations(sc);
    sc.noiseless = true;
    const SimulatedData clean = simulate_observations(sc);

    double noise_energy = 0.0;
    std::size_t count = 0;
    for (int j = 0; j < sc.patches; ++j) {
      for (std::size_t i = 0; i < noisy.y[j].size(); ++i) {
        const double d = noisy.y[j].v[i] - clean.y[j].v[i];
        noise_energy += d * d;
      }
      count += noisy.y[j].size();
    }
    const double empirical =
        10.0 * std::log10(variance(clean.y) /
                          (noise_energy / static_cast<double>(count)));
    CHECK(std::abs(empirical - 30.0) <= 0.2);
  }
}

TEST_CASE("simulation is bit-reproducible and stable under stack growth") {
  SyntheticScenario sc = small_scenario(3);
  const SimulatedData a = simulate_observations(sc);
  const SimulatedData b = simulate_observations(sc);
  for (int j = 0; j < sc.patches; ++j)
    CHECK(max_abs_diff(a.y[j], b.y[j]) == 0.0);

  // Earlier patches must not change when the stack grows, apart from the
  // global noise scale tied to the BSNR of the larger stack.
  SyntheticScenario wide = sc;
  wide.patches = 3;
  const SimulatedData c = simulate_observations(wide);
  sc.noiseless = true;
  wide.noiseless = true;
  const SimulatedData clean_a = simulate_observations(sc);
  const SimulatedData clean_c = simulate_observations(wide);
  for (int j = 0; j < sc.patches; ++j) {
    CHECK(max_abs_diff(clean_a.y[j], clean_c.y[j]) == 0.0);
    Image na = a.y[j], nc = c.y[j];
    axpy(-1.0, clean_a.y[j], na);
    axpy(-1.0, clean_c.y[j], nc);
    for (std::size_t i = 0; i < na.size(); ++i)
      CHECK(na.v[i] / a.sigma == doctest::Approx(nc.v[i] / c.sigma).epsilon(1e-12));
  }
}

TEST_CASE("longrange check: zero tail gives zero spread") {
  Image psf(65, 65, 0.0);
  const Image img = make_solar_texture(128, 4);
  const LongRangeCheck r = longrange_constant_check(psf, img, 16, 64, 64);
  CHECK(r.spread == 0.0);
  CHECK(r.mean_value == 0.0);
}

TEST_CASE("longrange check: flat scenes stay flat") {
  const Image psf = make_powerlaw_tail_kernel(65, 16);
  const Image img(128, 128, 5.0);
  const LongRangeCheck r = longrange_constant_check(psf, img, 16, 64, 64);
  CHECK(r.spread <= 1e-9 * std::abs(r.mean_value));
}

TEST_CASE("longrange check: structured scene varies little inside the disk") {
  const Image psf = make_powerlaw_tail_kernel(255, 64);
  const Image img = make_solar_texture(256, 7);
  const LongRangeCheck r = longrange_constant_check(psf, img, 64, 128, 128);
  CHECK(r.mean_value > 0.0);
  CHECK(r.spread / r.mean_value < 0.1);
}

#include <cmath>
#include <vector>

#include "doctest.h"
#include "sundeconv/prox.hpp"
#include "sundeconv/rng.hpp"
#include "sundeconv/solvers.hpp"

using namespace sundeconv;

namespace {

Image random_image(int side, std::uint64_t stream, double lo = -1.0,
                   double hi = 1.0) {
  Image img(side, side);
  for (std::size_t i = 0; i < img.size(); ++i)
    img.v[i] = lo + (hi - lo) * rng::uniform(777, stream, i);
  return img;
}

FilterEstimate random_simplex_filter(int b, std::uint64_t stream) {
  FilterEstimate h;
  h.half_width = b;
  h.core.resize(static_cast<std::size_t>(h.side()) * h.side());
  double s = 0.0;
  for (std::size_t i = 0; i < h.core.size(); ++i) {
    h.core[i] = rng::uniform(888, stream, i);
    s += h.core[i];
  }
  for (double& x : h.core) x /= s;
  return h;
}

}  // namespace

TEST_CASE("operator norm of the identity") {
  auto identity = [](const std::vector<double>& in, std::vector<double>& out) {
    out = in;
  };
  CHECK(estimate_operator_norm(identity, 64, 30, 1) ==
        doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("operator norm of a periodic simplex convolution") {
  const int side = 16;
  const FilterEstimate h = random_simplex_filter(1, 2);
  const Spectrum spec = filter_spectrum(h, side);
  auto normal = [&](const std::vector<double>& in, std::vector<double>& out) {
    Image u(side, side);
    u.v = in;
    out = correlate_spectrum(convolve_spectrum(u, spec), spec).v;
  };
  const double est =
      estimate_operator_norm(normal, static_cast<std::size_t>(side) * side, 500, 3);
  double max_dft = 0.0;
  for (const auto& c : spec) max_dft = std::max(max_dft, std::abs(c));
  CHECK(est <= 1.0 + 1e-6);
  CHECK(est == doctest::Approx(max_dft).epsilon(1e-5));
}

TEST_CASE("operator norm of the wavelet analysis map") {
  WaveletDictionary dict(20);
  std::vector<double> coeffs;
  auto normal = [&](const std::vector<double>& in, std::vector<double>& out) {
    Image u(20, 20);
    u.v = in;
    dict.analyze(u, coeffs);
    out = dict.synthesize(coeffs).v;
  };
  CHECK(estimate_operator_norm(normal, 400, 30, 4) ==
        doctest::Approx(1.0).epsilon(1e-6));
}

namespace {

struct SmallProblem {
  ExpandedDomain dom;
  WaveletDictionary dict;
  CoefficientSets sets;
  std::vector<IndexSet> omegas;
  ImageStack z;

  SmallProblem(int n, int b, int levels)
      : dom{n, b}, dict(dom.side(), levels) {
    sets = build_coefficient_sets({}, dom, dict, 3, 17);
    omegas.assign(1, IndexSet{});
  }
};

}  // namespace

TEST_CASE("image step with identity blur and no priors clamps the data") {
  SmallProblem sp(16, 2, 3);
  sp.z.push_back(random_image(16, 10, -1.0, 2.0));
  const FilterEstimate h = delta_filter(2);
  ForwardOperator op(h, sp.dom);

  ImageStack x{Image(sp.dom.side(), sp.dom.side())};
  const ImageStack anchor = x;
  ImageStepProblem ip;
  ip.z = &sp.z;
  ip.op = &op;
  ip.dict = &sp.dict;
  ip.sets = &sp.sets;
  ip.omegas = &sp.omegas;
  ip.rho = 0.0;
  ip.lambda_x = 0.0;
  ip.anchor = &anchor;

  CpDualState duals;
  const InnerResult r = solve_image_step(ip, x, duals, 1e-9, 4000);
  CHECK(r.iterations > 0);

  const Image inner = sp.dom.select_inner(x[0]);
  double worst = 0.0;
  for (std::size_t i = 0; i < inner.size(); ++i)
    worst = std::max(worst,
                     std::abs(inner.v[i] - std::max(sp.z[0].v[i], 0.0)));
  CHECK(worst < 1e-4);
  // Feasibility is exact.
  for (double v : x[0].v) CHECK(v >= 0.0);
}

TEST_CASE("toy image step beats a local perturbation grid") {
  SmallProblem sp(4, 0, 1);
  sp.z.push_back(random_image(4, 20, -0.5, 1.5));
  const FilterEstimate h = delta_filter(0);
  ForwardOperator op(h, sp.dom);

  const double rho = 0.05;
  ImageStack x{sp.z[0]};
  project_p0(x[0], {});
  const ImageStack anchor = x;
  ImageStepProblem ip;
  ip.z = &sp.z;
  ip.op = &op;
  ip.dict = &sp.dict;
  ip.sets = &sp.sets;
  ip.omegas = &sp.omegas;
  ip.rho = rho;
  ip.lambda_x = 0.0;
  ip.anchor = &anchor;

  CpDualState duals;
  solve_image_step(ip, x, duals, 1e-10, 5000);

  auto objective = [&](const Image& u) {
    std::vector<double> c = sp.dict.analyze(u);
    double l1 = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i)
      if (sp.sets.theta[i]) l1 += std::abs(c[i]);
    Image r = op.apply(u);
    double fid = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double d = sp.z[0].v[i] - r.v[i];
      fid += d * d;
    }
    return rho * l1 + 0.5 * fid;
  };

  const double at_solution = objective(x[0]);
  for (int coord = 0; coord < 16; ++coord) {
    for (double step : {-0.05, -0.02, 0.02, 0.05}) {
      Image perturbed = x[0];
      perturbed.v[coord] = std::max(perturbed.v[coord] + step, 0.0);
      CHECK(at_solution <= objective(perturbed) + 1e-8);
    }
  }
}

TEST_CASE("filter step recovers the kernel from delta scenes") {
  const int n = 24, b = 3;
  const ExpandedDomain dom{n, b};
  const int m = dom.side();
  const FilterEstimate h_true = random_simplex_filter(b, 30);

  ImageStack x;
  ImageStack z;
  for (int j = 0; j < 2; ++j) {
    Image xbar(m, m);
    xbar(m / 2 + j, m / 2 - 2 * j) = 1.0;
    ForwardOperator op(h_true, dom);
    z.push_back(op.apply(xbar));
    x.push_back(std::move(xbar));
  }

  FilterEstimate h = project_simplex_support(FilterEstimate{
      b, std::vector<double>(static_cast<std::size_t>(2 * b + 1) * (2 * b + 1),
                             1.0)});
  const FilterEstimate anchor = h;
  FilterStepProblem fp;
  fp.z = &z;
  fp.x = &x;
  fp.dom = dom;
  fp.lambda_h = 0.0;
  fp.anchor = &anchor;

  ApgState state;
  const InnerResult r = solve_filter_step(fp, h, state, 1e-12, 500);
  CHECK(r.iterations <= 500);
  double worst = 0.0;
  for (std::size_t i = 0; i < h.core.size(); ++i)
    worst = std::max(worst, std::abs(h.core[i] - h_true.core[i]));
  CHECK(worst < 1e-6);
  CHECK_NOTHROW(h.validate());
}

TEST_CASE("filter step with a dominant anchor returns the anchor") {
  const int n = 16, b = 2;
  const ExpandedDomain dom{n, b};
  ImageStack x{random_image(dom.side(), 40, 0.0, 1.0)};
  ImageStack z{random_image(n, 41, 0.0, 1.0)};

  FilterEstimate anchor = random_simplex_filter(b, 42);
  FilterEstimate h = anchor;
  FilterStepProblem fp;
  fp.z = &z;
  fp.x = &x;
  fp.dom = dom;
  fp.lambda_h = 1e12;
  fp.anchor = &anchor;

  ApgState state;
  solve_filter_step(fp, h, state, 1e-12, 200);
  double worst = 0.0;
  for (std::size_t i = 0; i < h.core.size(); ++i)
    worst = std::max(worst, std::abs(h.core[i] - anchor.core[i]));
  CHECK(worst < 1e-8);
}

TEST_CASE("filter gradient matches central finite differences") {
  const int n = 3, b = 1;
  const ExpandedDomain dom{n, b};
  const int m = dom.side();
  ImageStack x{random_image(m, 50, 0.0, 1.0), random_image(m, 51, 0.0, 1.0)};
  ImageStack z{random_image(n, 52, 0.0, 1.0), random_image(n, 53, 0.0, 1.0)};
  FilterEstimate anchor = random_simplex_filter(b, 54);

  FilterStepProblem fp;
  fp.z = &z;
  fp.x = &x;
  fp.dom = dom;
  fp.lambda_h = 0.35;
  fp.anchor = &anchor;

  const Image h = random_image(m, 55, 0.0, 0.4);
  Image grad;
  filter_step_smooth(fp, h, &grad);

  const double eps = 1e-6;
  for (std::size_t i = 0; i < h.size(); ++i) {
    Image hp = h, hm = h;
    hp.v[i] += eps;
    hm.v[i] -= eps;
    const double fd =
        (filter_step_smooth(fp, hp, nullptr) - filter_step_smooth(fp, hm, nullptr)) /
        (2.0 * eps);
    CHECK(grad.v[i] == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("apg objective is non-increasing under the monotone safeguard") {
  const int n = 16, b = 2;
  const ExpandedDomain dom{n, b};
  const FilterEstimate h_true = random_simplex_filter(b, 60);
  ImageStack x{random_image(dom.side(), 61, 0.0, 2.0),
               random_image(dom.side(), 62, 0.0, 2.0)};
  ImageStack z;
  for (const Image& xj : x) {
    ForwardOperator op(h_true, dom);
    z.push_back(op.apply(xj));
  }

  FilterEstimate h = delta_filter(b);
  const FilterEstimate anchor = h;
  FilterStepProblem fp;
  fp.z = &z;
  fp.x = &x;
  fp.dom = dom;
  fp.lambda_h = 0.1;
  fp.anchor = &anchor;

  std::vector<double> objectives;
  ApgState state;
  solve_filter_step(fp, h, state, 0.0, 120, 0,
                    [&](int, int, double obj, double, double) {
                      objectives.push_back(obj);
                    });
  REQUIRE(objectives.size() > 5);
  for (std::size_t i = 1; i < objectives.size(); ++i)
    CHECK(objectives[i] <= objectives[i - 1] + 1e-10 * std::abs(objectives[i - 1]) + 1e-12);
}

TEST_CASE("cp objective settles below its starting value") {
  SmallProblem sp(16, 2, 3);
  const FilterEstimate h = random_simplex_filter(2, 70);
  ForwardOperator op(h, sp.dom);
  Image clean = random_image(sp.dom.side(), 71, 0.0, 2.0);
  sp.z.push_back(op.apply(clean));

  ImageStack x{Image(sp.dom.side(), sp.dom.side())};
  const ImageStack anchor = x;
  ImageStepProblem ip;
  ip.z = &sp.z;
  ip.op = &op;
  ip.dict = &sp.dict;
  ip.sets = &sp.sets;
  ip.omegas = &sp.omegas;
  ip.rho = 0.01;
  ip.lambda_x = 0.05;
  ip.anchor = &anchor;

  std::vector<double> objectives;
  CpDualState duals;
  solve_image_step(ip, x, duals, 0.0, 150, 0,
                   [&](int, int, double obj, double, double) {
                     objectives.push_back(obj);
                   });
  REQUIRE(objectives.size() > 10);
  CHECK(objectives.back() < objectives.front());
  for (double obj : objectives) CHECK(obj <= 10.0 * objectives.front() + 1e-9);
}

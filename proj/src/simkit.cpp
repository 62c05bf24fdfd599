#include "sundeconv/simkit.hpp"

#include <cmath>
#include <stdexcept>

#include "sundeconv/fft.hpp"
#include "sundeconv/rng.hpp"

namespace sundeconv {

namespace {

constexpr double kPi = 3.14159265358979323846;

void normalize_simplex_mass(FilterEstimate& h) {
  double s = 0.0;
  for (double x : h.core) s += x;
  if (s <= 0.0) throw std::runtime_error("filter construction: zero mass");
  for (double& x : h.core) x /= s;
}

Image gaussian_blur_periodic(const Image& img, double sigma) {
  const int side = img.rows;
  Image kernel(side, side);
  double mass = 0.0;
  const int reach = static_cast<int>(std::ceil(5.0 * sigma));
  for (int di = -reach; di <= reach; ++di) {
    for (int dj = -reach; dj <= reach; ++dj) {
      const double w = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
      kernel((di % side + side) % side, (dj % side + side) % side) += w;
      mass += w;
    }
  }
  for (double& x : kernel.v) x /= mass;
  return convolve_circular(img, kernel);
}

}  // namespace

FilterEstimate make_gaussian_filter(int half_width, double sigma_h,
                                    double sigma_v, double rotation_deg) {
  if (half_width < 1)
    throw std::invalid_argument("make_gaussian_filter: half_width < 1");
  FilterEstimate h;
  h.half_width = half_width;
  h.core.assign(static_cast<std::size_t>(h.side()) * h.side(), 0.0);
  const double theta = rotation_deg * kPi / 180.0;
  const double c = std::cos(theta), s = std::sin(theta);
  for (int i = 0; i < h.side(); ++i) {
    for (int j = 0; j < h.side(); ++j) {
      const double dx = j - half_width;  // horizontal
      const double dy = i - half_width;  // vertical
      const double a1 = c * dx + s * dy;
      const double a2 = -s * dx + c * dy;
      h.at(i, j) = std::exp(-0.5 * (a1 * a1 / (sigma_h * sigma_h) +
                                    a2 * a2 / (sigma_v * sigma_v)));
    }
  }
  normalize_simplex_mass(h);
  return h;
}

FilterEstimate make_x_filter(int half_width) {
  if (half_width < 1) throw std::invalid_argument("make_x_filter: half_width < 1");
  FilterEstimate h;
  h.half_width = half_width;
  h.core.assign(static_cast<std::size_t>(h.side()) * h.side(), 0.0);
  for (int d = -half_width; d <= half_width; ++d) {
    const double w = std::exp(-std::abs(d) / 4.0);
    h.at(half_width + d, half_width + d) += w;  // main diagonal
    h.at(half_width + d, half_width - d) += w;  // anti diagonal
  }
  normalize_simplex_mass(h);
  return h;
}

Image make_solar_texture(int side, std::uint64_t seed) {
  if (side < 64) throw std::invalid_argument("make_solar_texture: side too small");

  // Optically thin coronal emission is diffuse: a large-scale field
  // carries most of the contrast, a mid-scale field adds structure and a
  // weak small-scale component adds realism without pixel-level speckle.
  Image fine(side, side), mid(side, side), coarse(side, side);
  for (std::size_t i = 0; i < fine.size(); ++i) {
    fine.v[i] = rng::gaussian(seed, 0, i);
    mid.v[i] = rng::gaussian(seed, 3, i);
    coarse.v[i] = rng::gaussian(seed, 1, i);
  }
  fine = gaussian_blur_periodic(fine, 3.0);
  mid = gaussian_blur_periodic(mid, 8.0);
  coarse = gaussian_blur_periodic(coarse, 24.0);
  const double fine_sd = std::sqrt(variance(fine));
  const double mid_sd = std::sqrt(variance(mid));
  const double coarse_sd = std::sqrt(variance(coarse));

  Image img(side, side);
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double g = fine.v[i] / fine_sd;
    const double mg = mid.v[i] / mid_sd;
    const double cg = coarse.v[i] / coarse_sd;
    img.v[i] = 110.0 * std::exp(0.06 * g + 0.25 * mg + 0.65 * cg);
  }

  // Bright coronal loops: arcs with a Gaussian cross-section.
  const int loops = 40;
  std::uint64_t ctr = 0;
  auto u = [&](void) { return rng::uniform(seed, 2, ctr++); };
  Image overlay(side, side);
  for (int l = 0; l < loops; ++l) {
    const double cr = u() * side, cc = u() * side;
    const double radius = 30.0 + 220.0 * u();
    const double a0 = 2.0 * kPi * u();
    const double span = 0.6 + 1.9 * u();
    const double width = 1.5 + 2.5 * u();
    const double amp = 60.0 + 320.0 * u();
    const int steps = static_cast<int>(radius * span * 2.0) + 8;
    for (int t = 0; t <= steps; ++t) {
      const double a = a0 + span * t / steps;
      const double pr = cr + radius * std::cos(a);
      const double pc = cc + radius * std::sin(a);
      const int ir = static_cast<int>(std::lround(pr));
      const int ic = static_cast<int>(std::lround(pc));
      const int reach = static_cast<int>(std::ceil(2.5 * width));
      for (int di = -reach; di <= reach; ++di) {
        for (int dj = -reach; dj <= reach; ++dj) {
          const int r = ir + di, c = ic + dj;
          if (r < 0 || r >= side || c < 0 || c >= side) continue;
          const double dr = pr - r, dc = pc - c;
          const double w = std::exp(-(dr * dr + dc * dc) / (2.0 * width * width));
          overlay(r, c) = std::max(overlay(r, c), amp * w);
        }
      }
    }
  }

  // Compact active regions.
  for (int k = 0; k < 5; ++k) {
    const double cr = u() * side, cc = u() * side;
    const double sg = 8.0 + 20.0 * u();
    const double amp = 250.0 + 650.0 * u();
    const int reach = static_cast<int>(std::ceil(3.0 * sg));
    for (int di = -reach; di <= reach; ++di) {
      for (int dj = -reach; dj <= reach; ++dj) {
        const int r = static_cast<int>(cr) + di, c = static_cast<int>(cc) + dj;
        if (r < 0 || r >= side || c < 0 || c >= side) continue;
        const double w = std::exp(-(di * di + dj * dj) / (2.0 * sg * sg));
        overlay(r, c) = std::max(overlay(r, c), amp * w);
      }
    }
  }

  for (std::size_t i = 0; i < img.size(); ++i)
    img.v[i] = std::max(img.v[i] + overlay.v[i], 0.0);
  return img;
}

std::pair<int, int> texture_cutout_center(int index) {
  static constexpr std::pair<int, int> kCenters[] = {
      {176, 176}, {176, 816}, {816, 176}, {816, 816}, {496, 496}, {816, 496}};
  if (index < 0 || index >= static_cast<int>(std::size(kCenters)))
    throw std::invalid_argument("texture_cutout_center: index out of range");
  return kCenters[index];
}

SimulatedData simulate_observations(const SyntheticScenario& scenario) {
  const int n = scenario.side;
  const int b = scenario.filter_half_width;
  const int m = n + 2 * b;
  if (scenario.patches < 1)
    throw std::invalid_argument("simulate_observations: patches < 1");
  scenario.filter.validate();
  if (scenario.filter.half_width != b)
    throw std::invalid_argument("simulate_observations: filter width mismatch");

  const int texture_side = 1024;
  if (m > texture_side)
    throw std::invalid_argument("simulate_observations: patch exceeds texture");
  const Image texture = make_solar_texture(texture_side, scenario.texture_seed);

  const ExpandedDomain dom{n, b};
  const Spectrum h_spec = filter_spectrum(scenario.filter, m);

  SimulatedData out;
  out.h_gt = scenario.filter;
  const double disk_r2 = scenario.disk_radius * scenario.disk_radius;

  for (int j = 0; j < scenario.patches; ++j) {
    const auto [cr, cc] = texture_cutout_center(j);
    const int r0 = cr - m / 2, c0 = cc - m / 2;
    if (r0 < 0 || c0 < 0 || r0 + m > texture_side || c0 + m > texture_side)
      throw std::runtime_error("simulate_observations: cutout out of bounds");

    Image xbar(m, m);
    for (int i = 0; i < m; ++i)
      for (int jj = 0; jj < m; ++jj) xbar(i, jj) = texture(r0 + i, c0 + jj);

    // The occulting body: an exact zero disk in the extended scene.
    const double dcr = scenario.disk_row + b, dcc = scenario.disk_col + b;
    for (int i = 0; i < m; ++i) {
      for (int jj = 0; jj < m; ++jj) {
        const double di = i - dcr, dj = jj - dcc;
        if (di * di + dj * dj <= disk_r2) xbar(i, jj) = 0.0;
      }
    }

    out.x_gt.push_back(dom.select_inner(xbar));
    out.y.push_back(dom.select_inner(convolve_spectrum(xbar, h_spec)));
    out.x_gt_expanded.push_back(std::move(xbar));
    out.geoms.push_back(DiskGeometry::from_radius(
        scenario.disk_row, scenario.disk_col, scenario.disk_radius));
  }

  if (!scenario.noiseless) {
    const double var_signal = variance(out.y);
    out.sigma = std::sqrt(var_signal / std::pow(10.0, scenario.bsnr_db / 10.0));
    for (int j = 0; j < scenario.patches; ++j) {
      Image& yj = out.y[j];
      for (std::size_t i = 0; i < yj.size(); ++i)
        yj.v[i] += out.sigma * rng::gaussian(scenario.noise_seed,
                                             static_cast<std::uint64_t>(j), i);
    }
  }
  return out;
}

LongRangeCheck longrange_constant_check(const Image& full_psf,
                                        const Image& image, int half_width,
                                        double disk_row, double disk_col,
                                        double window_radius) {
  if (!full_psf.square() || full_psf.rows % 2 == 0)
    throw std::invalid_argument("longrange_constant_check: odd square kernel required");
  if (full_psf.rows <= 2 * half_width + 1)
    throw std::invalid_argument("longrange_constant_check: kernel not larger than core window");
  if (!image.square())
    throw std::invalid_argument("longrange_constant_check: square image required");

  Image tail = full_psf;
  const int c = full_psf.rows / 2;
  for (int i = c - half_width; i <= c + half_width; ++i)
    for (int j = c - half_width; j <= c + half_width; ++j) tail(i, j) = 0.0;

  LongRangeCheck out;
  out.convolved = convolve_circular(image, embed_kernel(tail, image.rows));

  double lo = 0.0, hi = 0.0, acc = 0.0;
  std::size_t count = 0;
  const double r2 = window_radius * window_radius;
  for (int i = 0; i < image.rows; ++i) {
    for (int j = 0; j < image.cols; ++j) {
      const double di = i - disk_row, dj = j - disk_col;
      if (di * di + dj * dj > r2) continue;
      const double v = out.convolved(i, j);
      if (count == 0) {
        lo = hi = v;
      } else {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      acc += v;
      ++count;
    }
  }
  if (count == 0)
    throw std::invalid_argument("longrange_constant_check: empty sampling disk");
  out.spread = hi - lo;
  out.mean_value = acc / static_cast<double>(count);
  return out;
}

Image make_powerlaw_tail_kernel(int side, int core_half_width, double exponent) {
  if (side % 2 == 0 || side < 2 * core_half_width + 3)
    throw std::invalid_argument("make_powerlaw_tail_kernel: bad side");
  Image k(side, side);
  const int c = side / 2;
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < side; ++j) {
      if (std::abs(i - c) <= core_half_width && std::abs(j - c) <= core_half_width)
        continue;
      const double r = std::hypot(i - c, j - c);
      k(i, j) = std::pow(r / (core_half_width + 1.0), -exponent);
    }
  }
  return k;
}

}  // namespace sundeconv

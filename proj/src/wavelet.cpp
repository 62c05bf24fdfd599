#include "sundeconv/wavelet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "sundeconv/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sundeconv {

namespace {

// Orthonormal Daubechies filters with two vanishing moments, scaled by
// 1/sqrt(2) per 1-D pass so the undecimated frame is Parseval-tight.
constexpr double kSqrt3 = 1.7320508075688772935;
constexpr double kNorm = 5.65685424949238019521;  // 4 * sqrt(2)
constexpr double kLo[4] = {(1.0 + kSqrt3) / kNorm / 1.41421356237309504880,
                           (3.0 + kSqrt3) / kNorm / 1.41421356237309504880,
                           (3.0 - kSqrt3) / kNorm / 1.41421356237309504880,
                           (1.0 - kSqrt3) / kNorm / 1.41421356237309504880};
constexpr double kHi[4] = {(1.0 - kSqrt3) / kNorm / 1.41421356237309504880,
                           -(3.0 - kSqrt3) / kNorm / 1.41421356237309504880,
                           (3.0 + kSqrt3) / kNorm / 1.41421356237309504880,
                           -(1.0 + kSqrt3) / kNorm / 1.41421356237309504880};
constexpr int kTaps = 4;

// out(i,j) = sum_k f[k] * in(i, (j + s*k) mod m)
void filt_cols_fwd(const double* in, double* out, int m, const double* f, int s) {
#pragma omp parallel for schedule(static) if (!omp_in_parallel())
  for (int i = 0; i < m; ++i) {
    const double* row = in + static_cast<std::size_t>(i) * m;
    double* orow = out + static_cast<std::size_t>(i) * m;
    const int safe = m - (kTaps - 1) * s;
    int j = 0;
    for (; j < safe; ++j)
      orow[j] = f[0] * row[j] + f[1] * row[j + s] + f[2] * row[j + 2 * s] +
                f[3] * row[j + 3 * s];
    for (; j < m; ++j) {
      double acc = 0.0;
      for (int k = 0; k < kTaps; ++k) acc += f[k] * row[(j + s * k) % m];
      orow[j] = acc;
    }
  }
}

// out(i,j) = sum_k f[k] * in(i, (j - s*k) mod m)  (adjoint pass)
void filt_cols_adj(const double* in, double* out, int m, const double* f, int s) {
#pragma omp parallel for schedule(static) if (!omp_in_parallel())
  for (int i = 0; i < m; ++i) {
    const double* row = in + static_cast<std::size_t>(i) * m;
    double* orow = out + static_cast<std::size_t>(i) * m;
    const int safe = (kTaps - 1) * s;
    int j = 0;
    for (; j < safe && j < m; ++j) {
      double acc = 0.0;
      for (int k = 0; k < kTaps; ++k) acc += f[k] * row[(j - s * k + 4 * m) % m];
      orow[j] = acc;
    }
    for (; j < m; ++j)
      orow[j] = f[0] * row[j] + f[1] * row[j - s] + f[2] * row[j - 2 * s] +
                f[3] * row[j - 3 * s];
  }
}

// out(i,j) = sum_k f[k] * in((i + s*k) mod m, j)
void filt_rows_fwd(const double* in, double* out, int m, const double* f, int s) {
#pragma omp parallel for schedule(static) if (!omp_in_parallel())
  for (int i = 0; i < m; ++i) {
    const double* r0 = in + static_cast<std::size_t>(i) * m;
    const double* r1 = in + static_cast<std::size_t>((i + s) % m) * m;
    const double* r2 = in + static_cast<std::size_t>((i + 2 * s) % m) * m;
    const double* r3 = in + static_cast<std::size_t>((i + 3 * s) % m) * m;
    double* orow = out + static_cast<std::size_t>(i) * m;
    for (int j = 0; j < m; ++j)
      orow[j] = f[0] * r0[j] + f[1] * r1[j] + f[2] * r2[j] + f[3] * r3[j];
  }
}

void filt_rows_adj(const double* in, double* out, int m, const double* f, int s) {
#pragma omp parallel for schedule(static) if (!omp_in_parallel())
  for (int i = 0; i < m; ++i) {
    const double* r0 = in + static_cast<std::size_t>(i) * m;
    const double* r1 = in + static_cast<std::size_t>((i - s + 4 * m) % m) * m;
    const double* r2 = in + static_cast<std::size_t>((i - 2 * s + 4 * m) % m) * m;
    const double* r3 = in + static_cast<std::size_t>((i - 3 * s + 4 * m) % m) * m;
    double* orow = out + static_cast<std::size_t>(i) * m;
    for (int j = 0; j < m; ++j)
      orow[j] = f[0] * r0[j] + f[1] * r1[j] + f[2] * r2[j] + f[3] * r3[j];
  }
}

}  // namespace

WaveletDictionary::WaveletDictionary(int side, int levels)
    : side_(side), levels_(levels) {
  if (levels < 1) throw std::invalid_argument("WaveletDictionary: levels < 1");
  // The coarsest a trous filter must fit on the circular grid.
  const int extent = (kTaps - 1) * (1 << (levels - 1)) + 1;
  if (side < extent)
    throw std::invalid_argument("WaveletDictionary: side too small for levels");
}

void WaveletDictionary::analyze(const Image& x, std::vector<double>& coeffs) const {
  if (x.rows != side_ || x.cols != side_)
    throw std::invalid_argument("analyze: shape mismatch");
  const int m = side_;
  const std::size_t px = static_cast<std::size_t>(m) * m;
  coeffs.resize(coeff_len());

  std::vector<double> a(x.v), tl(px), th(px), next(px);
  for (int level = 1; level <= levels_; ++level) {
    const int s = 1 << (level - 1);
    const int band = 1 + 3 * (levels_ - level);
    filt_cols_fwd(a.data(), tl.data(), m, kLo, s);
    filt_cols_fwd(a.data(), th.data(), m, kHi, s);
    filt_rows_fwd(tl.data(), next.data(), m, kLo, s);
    filt_rows_fwd(tl.data(), coeffs.data() + band_offset(band), m, kHi, s);
    filt_rows_fwd(th.data(), coeffs.data() + band_offset(band + 1), m, kLo, s);
    filt_rows_fwd(th.data(), coeffs.data() + band_offset(band + 2), m, kHi, s);
    a.swap(next);
  }
  std::memcpy(coeffs.data(), a.data(), px * sizeof(double));
}

std::vector<double> WaveletDictionary::analyze(const Image& x) const {
  std::vector<double> c;
  analyze(x, c);
  return c;
}

Image WaveletDictionary::synthesize(std::span<const double> coeffs) const {
  if (coeffs.size() != coeff_len())
    throw std::invalid_argument("synthesize: malformed coefficient layout");
  const int m = side_;
  const std::size_t px = static_cast<std::size_t>(m) * m;

  std::vector<double> a(coeffs.begin(), coeffs.begin() + px);
  std::vector<double> tl(px), th(px), tmp(px), out(px);
  for (int level = levels_; level >= 1; --level) {
    const int s = 1 << (level - 1);
    const int band = 1 + 3 * (levels_ - level);
    const double* dh = coeffs.data() + band_offset(band);
    const double* dv = coeffs.data() + band_offset(band + 1);
    const double* dd = coeffs.data() + band_offset(band + 2);

    filt_rows_adj(a.data(), tl.data(), m, kLo, s);
    filt_rows_adj(dh, tmp.data(), m, kHi, s);
    for (std::size_t i = 0; i < px; ++i) tl[i] += tmp[i];
    filt_rows_adj(dv, th.data(), m, kLo, s);
    filt_rows_adj(dd, tmp.data(), m, kHi, s);
    for (std::size_t i = 0; i < px; ++i) th[i] += tmp[i];

    filt_cols_adj(tl.data(), out.data(), m, kLo, s);
    filt_cols_adj(th.data(), tmp.data(), m, kHi, s);
    for (std::size_t i = 0; i < px; ++i) out[i] += tmp[i];
    a.swap(out);
  }

  Image img(m, m);
  img.v = std::move(a);
  return img;
}

double WaveletDictionary::finest_detail_gain() const {
  double lo2 = 0.0, hi2 = 0.0;
  for (int k = 0; k < kTaps; ++k) {
    lo2 += kLo[k] * kLo[k];
    hi2 += kHi[k] * kHi[k];
  }
  // Separable level-1 subbands: lo*hi, hi*lo, hi*hi all share this norm
  // because the scaled filters have equal l2 norms.
  return std::sqrt(lo2 * hi2);
}

const std::vector<double>& WaveletDictionary::band_noise_gains() const {
  if (gains_.empty()) {
    Image delta(side_, side_);
    delta(side_ / 2, side_ / 2) = 1.0;
    std::vector<double> coeffs;
    analyze(delta, coeffs);
    const std::size_t px = static_cast<std::size_t>(side_) * side_;
    gains_.resize(subbands());
    for (int s = 0; s < subbands(); ++s) {
      double acc = 0.0;
      for (std::size_t i = band_offset(s); i < band_offset(s) + px; ++i)
        acc += coeffs[i] * coeffs[i];
      gains_[s] = std::sqrt(acc);
    }
  }
  return gains_;
}

const std::vector<double>& WaveletDictionary::band_penalty_weights() const {
  if (weights_.empty()) {
    const std::vector<double>& g = band_noise_gains();
    const double ref = g[subbands() - 1];
    weights_.resize(subbands());
    for (int s = 0; s < subbands(); ++s) weights_[s] = ref / g[s];
  }
  return weights_;
}

CoefficientSets build_coefficient_sets(const std::vector<DiskGeometry>& geoms,
                                       const ExpandedDomain& dom,
                                       const WaveletDictionary& dict,
                                       int draws, std::uint64_t seed,
                                       double eps_zero) {
  const int m = dom.side(), b = dom.border;
  if (dict.side() != m)
    throw std::invalid_argument("build_coefficient_sets: dictionary side mismatch");
  const std::size_t w = dict.coeff_len();
  const std::size_t details_begin = dict.detail_offset();

  CoefficientSets sets;
  sets.theta.assign(w, 0);
  sets.delta.assign(w, 0);
  sets.lambda.assign(w, 0);
  std::fill(sets.theta.begin() + details_begin, sets.theta.end(), 1);
  std::fill(sets.delta.begin() + details_begin, sets.delta.end(), 1);
  std::fill(sets.lambda.begin() + dict.finest_begin(), sets.lambda.end(), 1);

  std::vector<double> coeffs;
  const double background = 0.5;

  auto mark_affected = [&](const Image& img, bool strip_theta, bool strip_delta) {
    dict.analyze(img, coeffs);
    for (std::size_t i = details_begin; i < w; ++i) {
      if (std::abs(coeffs[i]) > eps_zero) {
        if (strip_theta) sets.theta[i] = 0;
        if (strip_delta) sets.delta[i] = 0;
      }
    }
  };

  for (int d = 0; d < draws; ++d) {
    if (!geoms.empty()) {
      Image img(m, m, background);
      std::uint64_t counter = 0;
      for (const DiskGeometry& g : geoms) {
        const double cr = g.row + b, cc = g.col + b;
        const double r2 = g.outer_radius * g.outer_radius;
        for (int i = 0; i < m; ++i) {
          for (int j = 0; j < m; ++j) {
            const double di = i - cr, dj = j - cc;
            if (di * di + dj * dj <= r2)
              img(i, j) = rng::uniform(seed, 2 * d, counter + static_cast<std::uint64_t>(i) * m + j);
          }
        }
        counter += static_cast<std::uint64_t>(m) * m;
      }
      mark_affected(img, true, false);
    }
    if (b > 0) {
      Image img(m, m, background);
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
          if (i < b || i >= m - b || j < b || j >= m - b)
            img(i, j) = rng::uniform(seed, 2 * d + 1,
                                     static_cast<std::uint64_t>(i) * m + j);
        }
      }
      mark_affected(img, true, true);
    }
  }

  sets.theta_count = std::count(sets.theta.begin(), sets.theta.end(), 1);
  sets.delta_count = std::count(sets.delta.begin(), sets.delta.end(), 1);
  return sets;
}

double estimate_sigma_rme(const Image& y, const WaveletDictionary& dict) {
  std::vector<double> coeffs = dict.analyze(y);
  std::vector<double> mags(coeffs.begin() + dict.finest_begin(),
                           coeffs.begin() + dict.finest_end());
  for (double& x : mags) x = std::abs(x);
  if (mags.empty()) return 0.0;
  const std::size_t mid = mags.size() / 2;
  std::nth_element(mags.begin(), mags.begin() + mid, mags.end());
  double med = mags[mid];
  if (mags.size() % 2 == 0) {
    const double lo = *std::max_element(mags.begin(), mags.begin() + mid);
    med = 0.5 * (med + lo);
  }
  return med / 0.6745 / dict.finest_detail_gain();
}

void write_coeffs(const std::string& path, std::span<const double> coeffs,
                  const WaveletDictionary& dict) {
  if (coeffs.size() != dict.coeff_len())
    throw std::invalid_argument("write_coeffs: layout mismatch");
  Image as_rows(dict.subbands(), dict.side() * dict.side());
  std::copy(coeffs.begin(), coeffs.end(), as_rows.v.begin());
  write_array(path, as_rows);

  std::vector<std::string> names;
  names.emplace_back("approx" + std::to_string(dict.levels()));
  for (int level = dict.levels(); level >= 1; --level)
    for (const char* o : {"h", "v", "d"})
      names.emplace_back("detail" + std::to_string(level) + "_" + o);

  std::ifstream in(path + ".json");
  nlohmann::json sidecar = nlohmann::json::parse(in);
  in.close();
  sidecar["subbands"] = names;
  sidecar["subband_shape"] = {dict.side(), dict.side()};
  std::ofstream out(path + ".json");
  out << sidecar.dump(2) << "\n";
}

}  // namespace sundeconv

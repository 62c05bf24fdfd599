#include "sundeconv/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>

namespace sundeconv {

namespace {
// FFTW planning is not thread-safe; execution through distinct plans is.
std::mutex g_plan_mutex;
}  // namespace

Fft2d::Fft2d(int side) : side_(side), spec_cols_(side / 2 + 1) {
  if (side < 1) throw std::invalid_argument("Fft2d: side must be >= 1");
  std::lock_guard<std::mutex> lock(g_plan_mutex);
  real_buf_ = fftw_alloc_real(static_cast<std::size_t>(side) * side);
  cplx_buf_ = fftw_alloc_complex(static_cast<std::size_t>(side) * spec_cols_);
  auto* c = static_cast<fftw_complex*>(cplx_buf_);
  plan_fwd_ = fftw_plan_dft_r2c_2d(side, side, real_buf_, c, FFTW_MEASURE);
  plan_inv_ = fftw_plan_dft_c2r_2d(side, side, c, real_buf_, FFTW_MEASURE);
  if (!plan_fwd_ || !plan_inv_) throw std::runtime_error("Fft2d: planning failed");
}

Fft2d::~Fft2d() {
  std::lock_guard<std::mutex> lock(g_plan_mutex);
  fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
  fftw_destroy_plan(static_cast<fftw_plan>(plan_inv_));
  fftw_free(real_buf_);
  fftw_free(cplx_buf_);
}

void Fft2d::forward(const Image& x, Spectrum& out) {
  if (x.rows != side_ || x.cols != side_)
    throw std::invalid_argument("Fft2d::forward: shape mismatch");
  std::memcpy(real_buf_, x.v.data(), x.size() * sizeof(double));
  fftw_execute(static_cast<fftw_plan>(plan_fwd_));
  const std::size_t n = static_cast<std::size_t>(side_) * spec_cols_;
  out.resize(n);
  std::memcpy(out.data(), cplx_buf_, n * sizeof(fftw_complex));
}

Spectrum Fft2d::forward(const Image& x) {
  Spectrum s;
  forward(x, s);
  return s;
}

void Fft2d::inverse(const Spectrum& s, Image& out) {
  const std::size_t n = static_cast<std::size_t>(side_) * spec_cols_;
  if (s.size() != n) throw std::invalid_argument("Fft2d::inverse: bad spectrum");
  std::memcpy(cplx_buf_, s.data(), n * sizeof(fftw_complex));
  fftw_execute(static_cast<fftw_plan>(plan_inv_));
  out.rows = side_;
  out.cols = side_;
  out.v.resize(static_cast<std::size_t>(side_) * side_);
  const double scale = 1.0 / (static_cast<double>(side_) * side_);
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] = real_buf_[i] * scale;
}

Image Fft2d::inverse(const Spectrum& s) {
  Image out;
  inverse(s, out);
  return out;
}

Fft2d& fft_for(int side) {
  thread_local std::map<int, std::unique_ptr<Fft2d>> cache;
  auto it = cache.find(side);
  if (it == cache.end())
    it = cache.emplace(side, std::make_unique<Fft2d>(side)).first;
  return *it->second;
}

void multiply_spectra(const Spectrum& a, const Spectrum& b, Spectrum& out) {
  if (a.size() != b.size())
    throw std::invalid_argument("multiply_spectra: size mismatch");
  out.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
}

Image convolve_circular(const Image& x, const Image& kernel) {
  if (!x.same_shape(kernel) || !x.square())
    throw std::invalid_argument("convolve_circular: shape mismatch");
  Fft2d& fft = fft_for(x.rows);
  Spectrum xs = fft.forward(x);
  Spectrum ks = fft.forward(kernel);
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] *= ks[i];
  return fft.inverse(xs);
}

Image convolve_spectrum(const Image& x, const Spectrum& kernel_spec) {
  Fft2d& fft = fft_for(x.rows);
  Spectrum xs = fft.forward(x);
  if (xs.size() != kernel_spec.size())
    throw std::invalid_argument("convolve_spectrum: spectrum size mismatch");
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] *= kernel_spec[i];
  return fft.inverse(xs);
}

Image correlate_spectrum(const Image& x, const Spectrum& kernel_spec) {
  Fft2d& fft = fft_for(x.rows);
  Spectrum xs = fft.forward(x);
  if (xs.size() != kernel_spec.size())
    throw std::invalid_argument("correlate_spectrum: spectrum size mismatch");
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] *= std::conj(kernel_spec[i]);
  return fft.inverse(xs);
}

Image autocorrelation_circular(const Image& x) {
  if (!x.square())
    throw std::invalid_argument("autocorrelation_circular: square input required");
  Fft2d& fft = fft_for(x.rows);
  Spectrum xs = fft.forward(x);
  for (auto& c : xs) c = std::norm(c);
  Image acf = fft.inverse(xs);
  const double n = static_cast<double>(x.size());
  for (double& v : acf.v) v /= n;
  return acf;
}

}  // namespace sundeconv

#pragma once

#include <complex>
#include <vector>

#include "sundeconv/image.hpp"

namespace sundeconv {

using Spectrum = std::vector<std::complex<double>>;

// Real-to-complex 2-D FFT of a fixed square size with owned aligned
// buffers. Instances are not thread-safe; use fft_for() which hands out a
// thread-local engine per size.
class Fft2d {
 public:
  explicit Fft2d(int side);
  ~Fft2d();
  Fft2d(const Fft2d&) = delete;
  Fft2d& operator=(const Fft2d&) = delete;

  int side() const { return side_; }
  int spec_cols() const { return spec_cols_; }

  Spectrum forward(const Image& x);
  void forward(const Image& x, Spectrum& out);
  // Inverse transform including the 1/side^2 normalization.
  Image inverse(const Spectrum& s);
  void inverse(const Spectrum& s, Image& out);

 private:
  int side_;
  int spec_cols_;
  double* real_buf_;
  void* cplx_buf_;
  void* plan_fwd_;
  void* plan_inv_;
};

Fft2d& fft_for(int side);

// Circular convolution of two same-size square arrays; the kernel is
// stored with its center at index (0,0) in wrap-around convention.
Image convolve_circular(const Image& x, const Image& kernel);

// Convolution/correlation against a precomputed kernel spectrum.
Image convolve_spectrum(const Image& x, const Spectrum& kernel_spec);
Image correlate_spectrum(const Image& x, const Spectrum& kernel_spec);

// Biased circular autocorrelation, normalized so that lag (0,0) equals
// the mean square of the input.
Image autocorrelation_circular(const Image& x);

void multiply_spectra(const Spectrum& a, const Spectrum& b, Spectrum& out);

}  // namespace sundeconv

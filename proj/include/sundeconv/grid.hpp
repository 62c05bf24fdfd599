#pragma once

#include <optional>
#include <vector>

#include "sundeconv/fft.hpp"
#include "sundeconv/image.hpp"

namespace sundeconv {

// Flat pixel indices into a row-major grid.
using IndexSet = std::vector<int>;

// Occulting-disk geometry on an n x n patch. Pixel (i,j) has its center
// at coordinates (i,j); the center may be fractional. The margins r_in and
// r_out absorb a one-pixel uncertainty on the predicted disk boundary.
struct DiskGeometry {
  double row = 0.0;
  double col = 0.0;
  double radius = 0.0;         // apparent body radius R
  double inner_radius = 0.0;   // r_in, pixels known to be black
  double outer_radius = 0.0;   // r_out, pixels possibly touched by the edge

  static DiskGeometry from_radius(double row, double col, double radius);
  void validate() const;
  // True when the outer disk lies fully inside an n x n patch.
  bool fits(int side) const;
};

// PSF core on a (2b+1) x (2b+1) support: non-negative, unit l1 mass.
struct FilterEstimate {
  int half_width = 0;     // b
  std::vector<double> core;  // (2b+1)^2, row-major, center at (b,b)

  int side() const { return 2 * half_width + 1; }
  double& at(int i, int j) { return core[static_cast<std::size_t>(i) * side() + j]; }
  double at(int i, int j) const { return core[static_cast<std::size_t>(i) * side() + j]; }
  // Checks non-negativity and unit mass (1e-9).
  void validate() const;
};

FilterEstimate delta_filter(int half_width);

// Geometry of the border expansion used so that periodic FFT convolution
// never mixes observed pixels with wrap-around values: the optimization
// runs on an m x m grid with m = n + 2b and the observed window is the
// central n x n block. Border pixels are free variables.
struct ExpandedDomain {
  int inner_side = 0;  // n
  int border = 0;      // b

  int side() const { return inner_side + 2 * border; }
  // Selection S_N: central n x n window of an m x m array.
  Image select_inner(const Image& expanded) const;
  // Adjoint of S_N: zero-insert an n x n array into the center.
  Image insert_inner(const Image& inner) const;
  // Flat m-grid index of interior pixel (i,j).
  int expanded_index(int i, int j) const {
    return (i + border) * side() + (j + border);
  }
};

// Pixels of the n x n patch whose center lies within inner_radius of the
// disk center.
IndexSet derive_omega(const DiskGeometry& geom, int side);

// Same set expressed in expanded-grid flat indices.
IndexSet omega_in_expanded(const IndexSet& omega, const ExpandedDomain& dom);

// Places the (2b+1)^2 core onto an m x m grid with the core center at the
// wrap-around origin, so convolution introduces no translation.
Image embed_filter(const FilterEstimate& h, int side);
FilterEstimate extract_filter(const Image& embedded, int half_width);

// Embeds an arbitrary odd-side kernel (center at the middle pixel).
Image embed_kernel(const Image& kernel, int side);

// Y = S_N Phi(h_pre (x) h) Xbar and its adjoint. The kernel spectrum is
// precomputed once per filter value.
class ForwardOperator {
 public:
  ForwardOperator(const FilterEstimate& h, const ExpandedDomain& dom,
                  const Spectrum* prefilter_spec = nullptr);
  ForwardOperator(Spectrum kernel_spec, const ExpandedDomain& dom);

  Image apply(const Image& expanded) const;
  Image adjoint(const Image& inner) const;
  // Convolution on the expanded grid without the S_N crop.
  Image convolve_expanded(const Image& expanded) const;
  const Spectrum& kernel_spectrum() const { return kernel_spec_; }
  const ExpandedDomain& domain() const { return dom_; }

 private:
  ExpandedDomain dom_;
  Spectrum kernel_spec_;
};

// Spectrum of an embedded odd-side kernel on the m-grid.
Spectrum kernel_spectrum(const Image& kernel, int side);
Spectrum filter_spectrum(const FilterEstimate& h, int side);

}  // namespace sundeconv

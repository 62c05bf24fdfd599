#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sundeconv/grid.hpp"
#include "sundeconv/image.hpp"

namespace sundeconv {

// Undecimated Daubechies-2 transform (a trous, circular extension) on a
// square grid. Filters are scaled so the frame is Parseval-tight:
// synthesize is the exact adjoint of analyze and synthesize(analyze(x)) = x.
//
// Coefficient layout, each subband side^2 long, row-major:
//   [approx_J, detail_J(h,v,d), ..., detail_1(h,v,d)]
class WaveletDictionary {
 public:
  explicit WaveletDictionary(int side, int levels = 3);

  int side() const { return side_; }
  int levels() const { return levels_; }
  int subbands() const { return 3 * levels_ + 1; }
  std::size_t coeff_len() const {
    return static_cast<std::size_t>(subbands()) * side_ * side_;
  }

  void analyze(const Image& x, std::vector<double>& coeffs) const;
  std::vector<double> analyze(const Image& x) const;
  Image synthesize(std::span<const double> coeffs) const;

  // First flat index of a subband; band 0 is the approximation.
  std::size_t band_offset(int band) const {
    return static_cast<std::size_t>(band) * side_ * side_;
  }
  std::size_t detail_offset() const { return band_offset(1); }
  // Flat range [begin, end) of the finest-scale detail coefficients.
  std::size_t finest_begin() const { return band_offset(subbands() - 3); }
  std::size_t finest_end() const { return coeff_len(); }

  // l2 norm of the equivalent filter of any finest-scale detail subband;
  // the per-coefficient gain white noise experiences.
  double finest_detail_gain() const;

  // Per-band noise gains (equivalent-filter l2 norms) and the sparsity
  // penalty weights that make a flat threshold noise-uniform across
  // scales: weight = finest gain / band gain, finest bands = 1. This is
  // the coefficient scaling of the conventional undecimated transform,
  // expressed against the Parseval-normalized one used here.
  const std::vector<double>& band_noise_gains() const;
  const std::vector<double>& band_penalty_weights() const;
  int band_of(std::size_t coeff_index) const {
    return static_cast<int>(coeff_index /
                            (static_cast<std::size_t>(side_) * side_));
  }

 private:
  int side_;
  int levels_;
  mutable std::vector<double> gains_;
  mutable std::vector<double> weights_;
};

// Index sets over the coefficient vector. theta keeps detail coefficients
// unaffected by any occulting disk and by the expanded border; delta keeps
// detail coefficients unaffected by the border only; lambda marks the
// finest-scale details. Masks are 0/1 over coeff_len() entries.
struct CoefficientSets {
  std::vector<std::uint8_t> theta;
  std::vector<std::uint8_t> delta;
  std::vector<std::uint8_t> lambda;
  std::size_t theta_count = 0;  // Q
  std::size_t delta_count = 0;  // S
};

// Marks coefficients touched by the disks / border by analyzing images
// whose disk (resp. border frame) pixels hold U(0,1) draws over a constant
// background; a detail coefficient with magnitude above eps_zero in any
// draw is affected. Deterministic given the seed. Disk centers are patch
// coordinates; they are shifted by the border width internally.
CoefficientSets build_coefficient_sets(const std::vector<DiskGeometry>& geoms,
                                       const ExpandedDomain& dom,
                                       const WaveletDictionary& dict,
                                       int draws, std::uint64_t seed,
                                       double eps_zero = 1e-12);

// Robust-median noise estimate from the finest-scale detail coefficients:
// sigma = med|alpha| / 0.6745, corrected for the subband gain so that the
// result is in the units of the input.
double estimate_sigma_rme(const Image& y, const WaveletDictionary& dict);

// Coefficient vectors in the repo array format, one subband per row, with
// a "subbands" sidecar field describing the layout.
void write_coeffs(const std::string& path, std::span<const double> coeffs,
                  const WaveletDictionary& dict);

}  // namespace sundeconv

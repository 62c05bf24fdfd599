#pragma once

#include <cstdint>
#include <vector>

#include "sundeconv/grid.hpp"
#include "sundeconv/image.hpp"

namespace sundeconv {

// Anisotropic Gaussian PSF core, rotated, truncated to the support window
// and normalized onto the simplex.
FilterEstimate make_gaussian_filter(int half_width = 16, double sigma_h = 2.0,
                                    double sigma_v = 4.0,
                                    double rotation_deg = 45.0);

// Diffraction-like cross: mass exp(-d/4) at diagonal distance d along both
// diagonals of the support window, simplex-normalized.
FilterEstimate make_x_filter(int half_width = 16);

// Procedural EUV-like scene: granulation (smoothed exponentiated noise),
// bright loops and compact active regions. Deterministic per seed.
Image make_solar_texture(int side, std::uint64_t seed);

struct SyntheticScenario {
  int side = 256;       // n
  int patches = 3;      // P
  double disk_radius = 48.0;
  double disk_row = 128.0;  // patch coordinates (0-based)
  double disk_col = 128.0;
  int filter_half_width = 16;  // b
  FilterEstimate filter;       // ground-truth PSF core
  double bsnr_db = 30.0;
  bool noiseless = false;
  std::uint64_t noise_seed = 42;
  std::uint64_t texture_seed = 7;
};

struct SimulatedData {
  ImageStack y;        // observations, n x n
  ImageStack x_gt;     // clean scenes in the observed window, n x n
  ImageStack x_gt_expanded;  // clean extended scenes, m x m
  FilterEstimate h_gt;
  std::vector<DiskGeometry> geoms;
  double sigma = 0.0;
};

// Simulates transit observations: texture cutouts on the expanded grid
// with the occulting disk zeroed before blurring, circular convolution by
// the ground-truth filter, central-window selection, then white Gaussian
// noise at the level implied by the BSNR target. Noise draws are keyed by
// (seed, patch index) so the stack can be extended without changing
// earlier patches.
SimulatedData simulate_observations(const SyntheticScenario& scenario);

// Cutout centers used on the source texture; pairwise at least 256 px
// apart. index selects one of the fixed positions.
std::pair<int, int> texture_cutout_center(int index);

struct LongRangeCheck {
  Image convolved;
  double spread = 0.0;  // max - min inside the sampling disk
  double mean_value = 0.0;
};

// Convolves the image with the core-zeroed tail of a full PSF kernel and
// reports the intensity spread inside a sampling disk, testing the
// constant long-range approximation. The kernel is odd-sided, centered;
// its central (2b+1)^2 window is forced to zero first.
LongRangeCheck longrange_constant_check(const Image& full_psf,
                                        const Image& image, int half_width,
                                        double disk_row, double disk_col,
                                        double window_radius = 10.0);

// Synthetic power-law tail kernel: value (r / r0)^(-exponent) outside the
// central core window, zero inside, unnormalized (the constant-mu check is
// scale-invariant).
Image make_powerlaw_tail_kernel(int side, int core_half_width,
                                double exponent = 3.0);

}  // namespace sundeconv

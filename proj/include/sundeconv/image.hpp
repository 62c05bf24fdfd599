#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace sundeconv {

// Dense row-major 2-D array of doubles. Pixel (i,j) = row i, column j,
// with the pixel center at integer coordinates (i,j).
struct Image {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Image() = default;
  Image(int r, int c, double fill = 0.0)
      : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, fill) {}

  double& operator()(int i, int j) {
    return v[static_cast<std::size_t>(i) * cols + j];
  }
  double operator()(int i, int j) const {
    return v[static_cast<std::size_t>(i) * cols + j];
  }

  std::size_t size() const { return v.size(); }
  bool square() const { return rows == cols; }
  bool same_shape(const Image& o) const {
    return rows == o.rows && cols == o.cols;
  }
};

using ImageStack = std::vector<Image>;

double dot(const Image& a, const Image& b);
double norm_fro(const Image& a);
double norm_fro(const ImageStack& s);
double sum(const Image& a);
double mean(const Image& a);
// Population variance (normalized by the element count).
double variance(const Image& a);
double variance(const ImageStack& s);
double max_abs_diff(const Image& a, const Image& b);

// y += alpha * x
void axpy(double alpha, const Image& x, Image& y);

// Flat binary of little-endian f64, row-major, with a JSON sidecar
// "<path>.json" describing shape/dtype/order. This is the array format
// used by every tool in the repo.
void write_array(const std::string& path, const Image& img);
Image read_array(const std::string& path);

// 16-bit binary PGM (P5, maxval 65535), min-max scaled. When log_scale is
// set the values pass through log10(x + 1e-8) first.
void write_pgm16(const std::string& path, const Image& img, bool log_scale);

}  // namespace sundeconv

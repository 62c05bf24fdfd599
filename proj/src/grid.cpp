#include "sundeconv/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace sundeconv {

DiskGeometry DiskGeometry::from_radius(double row, double col, double radius) {
  DiskGeometry g;
  g.row = row;
  g.col = col;
  g.radius = radius;
  g.inner_radius = radius - 1.0;
  g.outer_radius = radius + 1.0;
  g.validate();
  return g;
}

void DiskGeometry::validate() const {
  if (!(inner_radius > 0.0) || !(inner_radius < radius) ||
      !(radius < outer_radius))
    throw std::invalid_argument("DiskGeometry: need 0 < r_in < R < r_out");
}

bool DiskGeometry::fits(int side) const {
  return row - outer_radius >= 0.0 && col - outer_radius >= 0.0 &&
         row + outer_radius <= side - 1.0 && col + outer_radius <= side - 1.0;
}

void FilterEstimate::validate() const {
  if (half_width < 0) throw std::invalid_argument("FilterEstimate: b < 0");
  const std::size_t expect =
      static_cast<std::size_t>(side()) * static_cast<std::size_t>(side());
  if (core.size() != expect)
    throw std::invalid_argument("FilterEstimate: core size mismatch");
  double s = 0.0;
  for (double x : core) {
    if (!(x >= 0.0))
      throw std::invalid_argument("FilterEstimate: negative entry");
    s += x;
  }
  if (std::abs(s - 1.0) > 1e-9)
    throw std::invalid_argument("FilterEstimate: mass != 1");
}

FilterEstimate delta_filter(int half_width) {
  FilterEstimate h;
  h.half_width = half_width;
  h.core.assign(static_cast<std::size_t>(h.side()) * h.side(), 0.0);
  h.at(half_width, half_width) = 1.0;
  return h;
}

Image ExpandedDomain::select_inner(const Image& expanded) const {
  const int m = side(), n = inner_side, b = border;
  if (expanded.rows != m || expanded.cols != m)
    throw std::invalid_argument("select_inner: shape mismatch");
  Image out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = expanded(i + b, j + b);
  return out;
}

Image ExpandedDomain::insert_inner(const Image& inner) const {
  const int m = side(), n = inner_side, b = border;
  if (inner.rows != n || inner.cols != n)
    throw std::invalid_argument("insert_inner: shape mismatch");
  Image out(m, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i + b, j + b) = inner(i, j);
  return out;
}

IndexSet derive_omega(const DiskGeometry& geom, int side) {
  geom.validate();
  if (!geom.fits(side))
    throw std::invalid_argument("derive_omega: disk exceeds patch bounds");
  IndexSet omega;
  const double r2 = geom.inner_radius * geom.inner_radius;
  const int i_lo = std::max(0, static_cast<int>(std::floor(geom.row - geom.inner_radius)));
  const int i_hi = std::min(side - 1, static_cast<int>(std::ceil(geom.row + geom.inner_radius)));
  for (int i = i_lo; i <= i_hi; ++i) {
    for (int j = 0; j < side; ++j) {
      const double di = i - geom.row, dj = j - geom.col;
      if (di * di + dj * dj <= r2) omega.push_back(i * side + j);
    }
  }
  return omega;
}

IndexSet omega_in_expanded(const IndexSet& omega, const ExpandedDomain& dom) {
  IndexSet out;
  out.reserve(omega.size());
  const int n = dom.inner_side;
  for (int idx : omega) {
    const int i = idx / n, j = idx % n;
    out.push_back(dom.expanded_index(i, j));
  }
  return out;
}

Image embed_filter(const FilterEstimate& h, int side) {
  const int b = h.half_width;
  if (h.side() > side)
    throw std::invalid_argument("embed_filter: filter larger than grid");
  Image out(side, side);
  for (int i = 0; i < h.side(); ++i) {
    for (int j = 0; j < h.side(); ++j) {
      const int di = i - b, dj = j - b;
      const int r = (di % side + side) % side;
      const int c = (dj % side + side) % side;
      out(r, c) = h.at(i, j);
    }
  }
  return out;
}

FilterEstimate extract_filter(const Image& embedded, int half_width) {
  const int side = embedded.rows;
  FilterEstimate h;
  h.half_width = half_width;
  if (h.side() > side)
    throw std::invalid_argument("extract_filter: filter larger than grid");
  h.core.assign(static_cast<std::size_t>(h.side()) * h.side(), 0.0);
  for (int i = 0; i < h.side(); ++i) {
    for (int j = 0; j < h.side(); ++j) {
      const int di = i - half_width, dj = j - half_width;
      const int r = (di % side + side) % side;
      const int c = (dj % side + side) % side;
      h.at(i, j) = embedded(r, c);
    }
  }
  return h;
}

Image embed_kernel(const Image& kernel, int side) {
  if (!kernel.square() || kernel.rows % 2 == 0)
    throw std::invalid_argument("embed_kernel: odd square kernel required");
  if (kernel.rows > side)
    throw std::invalid_argument("embed_kernel: kernel larger than grid");
  const int b = kernel.rows / 2;
  Image out(side, side);
  for (int i = 0; i < kernel.rows; ++i) {
    for (int j = 0; j < kernel.cols; ++j) {
      const int r = ((i - b) % side + side) % side;
      const int c = ((j - b) % side + side) % side;
      out(r, c) = kernel(i, j);
    }
  }
  return out;
}

Spectrum kernel_spectrum(const Image& kernel, int side) {
  return fft_for(side).forward(embed_kernel(kernel, side));
}

Spectrum filter_spectrum(const FilterEstimate& h, int side) {
  return fft_for(side).forward(embed_filter(h, side));
}

ForwardOperator::ForwardOperator(const FilterEstimate& h,
                                 const ExpandedDomain& dom,
                                 const Spectrum* prefilter_spec)
    : dom_(dom) {
  kernel_spec_ = filter_spectrum(h, dom.side());
  if (prefilter_spec) {
    if (prefilter_spec->size() != kernel_spec_.size())
      throw std::invalid_argument("ForwardOperator: prefilter spectrum mismatch");
    for (std::size_t i = 0; i < kernel_spec_.size(); ++i)
      kernel_spec_[i] *= (*prefilter_spec)[i];
  }
}

ForwardOperator::ForwardOperator(Spectrum kernel_spec, const ExpandedDomain& dom)
    : dom_(dom), kernel_spec_(std::move(kernel_spec)) {
  const int m = dom.side();
  if (kernel_spec_.size() != static_cast<std::size_t>(m) * (m / 2 + 1))
    throw std::invalid_argument("ForwardOperator: spectrum size mismatch");
}

Image ForwardOperator::convolve_expanded(const Image& expanded) const {
  if (expanded.rows != dom_.side() || expanded.cols != dom_.side())
    throw std::invalid_argument("ForwardOperator: shape mismatch");
  return convolve_spectrum(expanded, kernel_spec_);
}

Image ForwardOperator::apply(const Image& expanded) const {
  return dom_.select_inner(convolve_expanded(expanded));
}

Image ForwardOperator::adjoint(const Image& inner) const {
  return correlate_spectrum(dom_.insert_inner(inner), kernel_spec_);
}

}  // namespace sundeconv

#include "sundeconv/image.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace sundeconv {

double dot(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("dot: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.v[i] * b.v[i];
  return s;
}

double norm_fro(const Image& a) {
  double s = 0.0;
  for (double x : a.v) s += x * x;
  return std::sqrt(s);
}

double norm_fro(const ImageStack& s) {
  double acc = 0.0;
  for (const Image& im : s)
    for (double x : im.v) acc += x * x;
  return std::sqrt(acc);
}

double sum(const Image& a) {
  double s = 0.0;
  for (double x : a.v) s += x;
  return s;
}

double mean(const Image& a) {
  return a.size() ? sum(a) / static_cast<double>(a.size()) : 0.0;
}

double variance(const Image& a) {
  if (a.size() == 0) return 0.0;
  const double m = mean(a);
  double s = 0.0;
  for (double x : a.v) s += (x - m) * (x - m);
  return s / static_cast<double>(a.size());
}

double variance(const ImageStack& st) {
  std::size_t n = 0;
  double m = 0.0;
  for (const Image& im : st) {
    for (double x : im.v) m += x;
    n += im.size();
  }
  if (n == 0) return 0.0;
  m /= static_cast<double>(n);
  double s = 0.0;
  for (const Image& im : st)
    for (double x : im.v) s += (x - m) * (x - m);
  return s / static_cast<double>(n);
}

double max_abs_diff(const Image& a, const Image& b) {
  if (!a.same_shape(b))
    throw std::invalid_argument("max_abs_diff: shape mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    d = std::max(d, std::abs(a.v[i] - b.v[i]));
  return d;
}

void axpy(double alpha, const Image& x, Image& y) {
  if (!x.same_shape(y)) throw std::invalid_argument("axpy: shape mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y.v[i] += alpha * x.v[i];
}

namespace {

static_assert(sizeof(double) == 8);

bool host_is_little_endian() {
  return std::endian::native == std::endian::little;
}

void byteswap_f64(std::vector<double>& v) {
  for (double& d : v) {
    std::uint64_t u;
    std::memcpy(&u, &d, 8);
    u = __builtin_bswap64(u);
    std::memcpy(&d, &u, 8);
  }
}

}  // namespace

void write_array(const std::string& path, const Image& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_array: cannot open " + path);
  std::vector<double> buf = img.v;
  if (!host_is_little_endian()) byteswap_f64(buf);
  f.write(reinterpret_cast<const char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * 8));
  if (!f) throw std::runtime_error("write_array: short write " + path);

  nlohmann::json sidecar = {{"shape", {img.rows, img.cols}},
                            {"dtype", "f64le"},
                            {"order", "row-major"}};
  std::ofstream sf(path + ".json");
  if (!sf) throw std::runtime_error("write_array: cannot open sidecar");
  sf << sidecar.dump(2) << "\n";
}

Image read_array(const std::string& path) {
  std::ifstream sf(path + ".json");
  if (!sf) throw std::runtime_error("read_array: missing sidecar for " + path);
  nlohmann::json sidecar = nlohmann::json::parse(sf);
  if (sidecar.at("dtype") != "f64le" || sidecar.at("order") != "row-major")
    throw std::runtime_error("read_array: unsupported dtype/order in sidecar");
  const int rows = sidecar.at("shape").at(0).get<int>();
  const int cols = sidecar.at("shape").at(1).get<int>();
  if (rows <= 0 || cols <= 0)
    throw std::runtime_error("read_array: bad shape in sidecar");

  Image img(rows, cols);
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_array: cannot open " + path);
  f.read(reinterpret_cast<char*>(img.v.data()),
         static_cast<std::streamsize>(img.size() * 8));
  if (f.gcount() != static_cast<std::streamsize>(img.size() * 8))
    throw std::runtime_error("read_array: truncated file " + path);
  if (!host_is_little_endian()) byteswap_f64(img.v);
  return img;
}

void write_pgm16(const std::string& path, const Image& img, bool log_scale) {
  std::vector<double> vals = img.v;
  if (log_scale)
    for (double& x : vals) x = std::log10(std::max(x, 0.0) + 1e-8);

  double lo = vals.empty() ? 0.0 : vals[0], hi = lo;
  for (double x : vals) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  const double span = (hi > lo) ? hi - lo : 1.0;

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_pgm16: cannot open " + path);
  f << "P5\n" << img.cols << " " << img.rows << "\n65535\n";
  for (double x : vals) {
    const auto q =
        static_cast<std::uint16_t>(std::lround((x - lo) / span * 65535.0));
    const char bytes[2] = {static_cast<char>(q >> 8),
                           static_cast<char>(q & 0xff)};
    f.write(bytes, 2);
  }
}

}  // namespace sundeconv

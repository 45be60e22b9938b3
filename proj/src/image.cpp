#include "revfilt/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

namespace revfilt {

Image::Image(std::size_t width, std::size_t height, double fill)
    : width_(width), height_(height), pixels_(width * height, fill) {
  if (width == 0 || height == 0) throw Error("image dimensions must be positive");
}

Image::Image(std::size_t width, std::size_t height, std::vector<double> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width == 0 || height == 0) throw Error("image dimensions must be positive");
  if (pixels_.size() != width * height) {
    throw DimensionMismatch("pixel count " + std::to_string(pixels_.size()) +
                            " does not match " + std::to_string(width) + "x" +
                            std::to_string(height));
  }
  if (!all_finite()) throw NonFiniteError("image contains non-finite pixels");
}

double Image::at_clamped(std::ptrdiff_t x, std::ptrdiff_t y) const {
  const auto w = static_cast<std::ptrdiff_t>(width_);
  const auto h = static_cast<std::ptrdiff_t>(height_);
  x = std::clamp<std::ptrdiff_t>(x, 0, w - 1);
  y = std::clamp<std::ptrdiff_t>(y, 0, h - 1);
  return pixels_[static_cast<std::size_t>(y * w + x)];
}

bool Image::bitwise_equal(const Image& other) const {
  if (!same_shape(other)) return false;
  // memcmp semantics: distinguishes -0.0 from +0.0.
  return std::equal(pixels_.begin(), pixels_.end(), other.pixels_.begin(),
                    [](double a, double b) {
                      return std::memcmp(&a, &b, sizeof(double)) == 0;
                    });
}

bool Image::all_finite() const {
  return std::all_of(pixels_.begin(), pixels_.end(),
                     [](double v) { return std::isfinite(v); });
}

double Image::mean() const {
  if (pixels_.empty()) return 0.0;
  return std::accumulate(pixels_.begin(), pixels_.end(), 0.0) /
         static_cast<double>(pixels_.size());
}

void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b)) {
    throw DimensionMismatch(std::string(what) + ": " + std::to_string(a.width()) + "x" +
                            std::to_string(a.height()) + " vs " +
                            std::to_string(b.width()) + "x" + std::to_string(b.height()));
  }
}

namespace {

template <typename Op>
Image zip(const Image& a, const Image& b, const char* what, Op op) {
  require_same_shape(a, b, what);
  Image out(a.width(), a.height());
  bool finite = true;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double v = op(a[i], b[i]);
    finite &= std::isfinite(v);
    out[i] = v;
  }
  if (!finite) throw NonFiniteError(std::string(what) + " produced a non-finite pixel");
  return out;
}

}  // namespace

Image add(const Image& a, const Image& b) {
  return zip(a, b, "add", [](double u, double v) { return u + v; });
}

Image sub(const Image& a, const Image& b) {
  return zip(a, b, "sub", [](double u, double v) { return u - v; });
}

Image axpy(const Image& a, double c, const Image& b) {
  return zip(a, b, "axpy", [c](double u, double v) { return u + c * v; });
}

Image scale(const Image& a, double c) {
  Image out(a.width(), a.height());
  bool finite = true;
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[i] = c * a[i];
    finite &= std::isfinite(out[i]);
  }
  if (!finite) throw NonFiniteError("scale produced a non-finite pixel");
  return out;
}

double dot(const Image& a, const Image& b) {
  require_same_shape(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double frobenius_norm(const Image& a) {
  double s = 0.0;
  for (double v : a.pixels()) s += v * v;
  return std::sqrt(s);
}

double max_abs_diff(const Image& a, const Image& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

namespace {

// u = A v, A is rows x cols row-major.
void matvec(const Image& a, const std::vector<double>& v, std::vector<double>& u) {
  const std::size_t rows = a.height(), cols = a.width();
  const auto px = a.pixels();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = px.data() + r * cols;
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += row[c] * v[c];
    u[r] = s;
  }
}

// v = Aᵀ u
void matvec_t(const Image& a, const std::vector<double>& u, std::vector<double>& v) {
  const std::size_t rows = a.height(), cols = a.width();
  const auto px = a.pixels();
  std::fill(v.begin(), v.end(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = px.data() + r * cols;
    const double ur = u[r];
    for (std::size_t c = 0; c < cols; ++c) v[c] += row[c] * ur;
  }
}

double normalize(std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  s = std::sqrt(s);
  if (s > 0.0)
    for (double& x : v) x /= s;
  return s;
}

std::vector<double> start_vector(const Image& a) {
  const std::size_t cols = a.width();
  std::vector<double> u(a.height());
  std::vector<double> v(cols, 1.0);
  matvec(a, v, u);
  if (std::any_of(u.begin(), u.end(), [](double x) { return x != 0.0; })) return v;

  for (std::size_t c = 0; c < cols; ++c) v[c] = (c % 2 == 0) ? 1.0 : -1.0;
  matvec(a, v, u);
  if (std::any_of(u.begin(), u.end(), [](double x) { return x != 0.0; })) return v;

  // Both fixed vectors are in the null space: start from the heaviest row,
  // whose Rayleigh quotient is strictly positive.
  std::size_t best = 0;
  double best_norm = -1.0;
  const auto px = a.pixels();
  for (std::size_t r = 0; r < a.height(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += px[r * cols + c] * px[r * cols + c];
    if (s > best_norm) {
      best_norm = s;
      best = r;
    }
  }
  v.assign(px.begin() + static_cast<std::ptrdiff_t>(best * cols),
           px.begin() + static_cast<std::ptrdiff_t>((best + 1) * cols));
  return v;
}

}  // namespace

double spectral_norm(const Image& a, SpectralNormOptions opts) {
  if (!(opts.tol > 0.0)) throw Error("spectral_norm: tol must be positive");
  if (frobenius_norm(a) == 0.0) return 0.0;

  std::vector<double> v = start_vector(a);
  std::vector<double> u(a.height());
  normalize(v);

  // The estimate approaches sigma geometrically, so a small step can still
  // leave a large remainder when the ratio is near one. The remaining error
  // is bounded by step * rho / (1 - rho), with rho taken from the last two
  // steps.
  double sigma = 0.0;
  double prev_step = 0.0;
  for (int it = 0; it < std::max(opts.max_iter, 1); ++it) {
    matvec(a, v, u);
    double un = 0.0;
    for (double x : u) un += x * x;
    const double next = std::sqrt(un);
    matvec_t(a, u, v);
    normalize(v);
    const double step = std::abs(next - sigma);
    sigma = next;
    if (it < 2) {
      prev_step = step;
      continue;
    }
    const double rho = prev_step > 0.0 ? std::min(step / prev_step, 0.999) : 0.0;
    prev_step = step;
    if (step / (1.0 - rho) <= opts.tol * next) break;
  }
  return sigma;
}

double norm(const Image& a, NormKind kind) {
  return kind == NormKind::spectral ? spectral_norm(a) : frobenius_norm(a);
}

double psnr(const Image& ref, const Image& test, double peak) {
  require_same_shape(ref, test, "psnr");
  if (!(peak > 0.0)) throw Error("psnr: peak must be positive");
  double se = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double d = ref[i] - test[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(ref.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

}  // namespace revfilt

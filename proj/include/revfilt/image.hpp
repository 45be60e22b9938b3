#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "revfilt/error.hpp"

namespace revfilt {

/// Single-channel real-valued pixel grid, stored row-major.
///
/// Values nominally live in [0,1] but are never clamped by arithmetic; only
/// save_image() clamps. Every pixel must be finite.
class Image {
 public:
  Image() = default;
  Image(std::size_t width, std::size_t height, double fill = 0.0);
  Image(std::size_t width, std::size_t height, std::vector<double> pixels);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t size() const { return pixels_.size(); }
  bool empty() const { return pixels_.empty(); }

  double& operator()(std::size_t x, std::size_t y) { return pixels_[y * width_ + x]; }
  double operator()(std::size_t x, std::size_t y) const { return pixels_[y * width_ + x]; }
  double& operator[](std::size_t i) { return pixels_[i]; }
  double operator[](std::size_t i) const { return pixels_[i]; }

  std::span<double> pixels() { return pixels_; }
  std::span<const double> pixels() const { return pixels_; }

  /// Edge-clamped read; coordinates outside the grid replicate the border.
  double at_clamped(std::ptrdiff_t x, std::ptrdiff_t y) const;

  bool same_shape(const Image& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  /// Bitwise equality of shape and every pixel.
  bool bitwise_equal(const Image& other) const;

  bool all_finite() const;

  double mean() const;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<double> pixels_;
};

void require_same_shape(const Image& a, const Image& b, const char* what);

Image add(const Image& a, const Image& b);
Image sub(const Image& a, const Image& b);
Image scale(const Image& a, double c);
/// a + c*b
Image axpy(const Image& a, double c, const Image& b);

inline Image operator+(const Image& a, const Image& b) { return add(a, b); }
inline Image operator-(const Image& a, const Image& b) { return sub(a, b); }
inline Image operator*(double c, const Image& a) { return scale(a, c); }

/// Frobenius inner product of two flattened images.
double dot(const Image& a, const Image& b);
double frobenius_norm(const Image& a);
double max_abs_diff(const Image& a, const Image& b);

enum class NormKind { frobenius, spectral };

struct SpectralNormOptions {
  double tol = 1e-6;
  int max_iter = 100;
};

/// Largest singular value of the image viewed as a height x width matrix,
/// by power iteration on AᵀA.
double spectral_norm(const Image& a, SpectralNormOptions opts = {});

double norm(const Image& a, NormKind kind);

inline constexpr double kPsnrCap = 99.0;

/// 10*log10(peak² / MSE), capped at kPsnrCap when MSE is zero.
double psnr(const Image& ref, const Image& test, double peak = 1.0);

/// Reads binary PGM (P5, 8-bit) or PNG; colour inputs are reduced to
/// BT.601 luminance. Pixels are mapped to [0,1] by division by 255.
Image load_image(const std::filesystem::path& path);

/// Writes PGM or PNG chosen by extension. Pixels are clamped to [0,1] and
/// quantised with round(v*255).
void save_image(const Image& img, const std::filesystem::path& path);

std::string encode_pgm(const Image& img);
Image decode_pgm(std::span<const unsigned char> bytes);

std::uint8_t quantize_pixel(double v);

}  // namespace revfilt

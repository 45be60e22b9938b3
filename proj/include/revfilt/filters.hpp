#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "revfilt/image.hpp"

namespace revfilt {

/// Opaque deterministic map Image -> Image with an invocation counter.
///
/// Copies share the underlying callable but not the counter.
class BlackBoxFilter {
 public:
  using Fn = std::function<Image(const Image&)>;

  BlackBoxFilter(std::string label, Fn fn);

  /// Applies the filter once. Throws FilterError when the output shape
  /// differs from the input or contains non-finite pixels.
  Image apply(const Image& x);
  Image operator()(const Image& x) { return apply(x); }

  std::uint64_t call_count() const { return calls_; }
  void reset_count() { calls_ = 0; }
  const std::string& label() const { return label_; }

 private:
  std::string label_;
  Fn fn_;
  std::uint64_t calls_ = 0;
};

// ---------------------------------------------------------------------------
// Built-in filters. All use replicate (edge-clamp) padding.

Image gaussian_filter(const Image& img, double sigma);
Image motion_blur(const Image& img, double length, double theta_deg);
Image disk_blur(const Image& img, double radius);
Image adaptive_wiener(const Image& img, int window, double noise);
Image guided_filter_self(const Image& img, int window, double eps);
Image bilateral_filter(const Image& img, double sigma_s, double sigma_r);

/// Dense correlation kernel with odd dimensions, origin at the centre.
struct Kernel {
  int width = 1;
  int height = 1;
  std::vector<double> weights;  // row-major

  double at(int x, int y) const { return weights[static_cast<std::size_t>(y * width + x)]; }
  double sum() const;
};

Kernel gaussian_kernel_1d(double sigma);
Kernel motion_kernel(double length, double theta_deg);
Kernel disk_kernel(double radius);

/// Correlation with replicate padding; zero taps are skipped.
Image correlate(const Image& img, const Kernel& k);

/// Mean over a (2r+1)² window with replicate padding.
Image box_mean(const Image& img, int radius);

// ---------------------------------------------------------------------------
// External executable adapter.

struct ExternOptions {
  std::chrono::milliseconds timeout{60'000};
};

/// Spawns `/bin/sh -c cmd` once per apply: the input goes to the child's
/// stdin as binary PGM and a PGM of identical size is read from its stdout.
BlackBoxFilter extern_filter(const std::string& cmd, ExternOptions opts = {});

/// Runs cmd once with stdin_data; returns stdout. Throws FilterError on spawn
/// failure, timeout or nonzero exit (message includes captured stderr).
std::string run_subprocess(const std::string& cmd, const std::string& stdin_data,
                           std::chrono::milliseconds timeout);

// ---------------------------------------------------------------------------
// Filter specifications.

enum class FilterKind { gaussian, motion, disk, wiener, guided_self, bilateral, extern_cmd };

std::string to_string(FilterKind kind);

using ParamValue = std::variant<double, std::string>;

struct FilterSpec {
  FilterKind kind = FilterKind::gaussian;
  std::map<std::string, ParamValue> params;

  double number(const std::string& key) const;
  const std::string& text(const std::string& key) const;

  /// Canonical "kind:key=val,..." form, keys sorted.
  std::string label() const;
};

/// Parses "kind:key=val,key=val". Keys omitted from the string take their
/// default settings (Gaussian sigma 5, motion l=20 theta=45, disk r=3,
/// wiener 5x5 n=0.1, self-guided 5x5 eps=0.1, bilateral sigma_s=3
/// sigma_r=0.05). Unknown keys are rejected. The extern kind requires cmd=...
/// and accepts an optional timeout in seconds.
FilterSpec parse_filter_spec(const std::string& text);

/// Validates parameter ranges and builds the filter.
BlackBoxFilter make_filter(const FilterSpec& spec);

}  // namespace revfilt

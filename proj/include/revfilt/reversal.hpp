#pragma once

#include <map>
#include <optional>
#include <string>

#include "revfilt/fixed_point.hpp"
#include "revfilt/gradient.hpp"
#include "revfilt/methods.hpp"
#include "revfilt/trace.hpp"

namespace revfilt {

enum class AccelKind {
  none,  // Picard on the method's fixed-point map
  mann,
  chebyshev,
  anderson,
  irons,
  epsilon,
  gd,
  mgd,
  nag,
  rmsprop,
  adadelta,
  adam,
  sgdr,
};

enum class DriverFamily { fixed_point, gradient };

DriverFamily family_of(AccelKind kind);
std::string to_string(AccelKind kind);

/// Acceleration scheme plus explicit parameter overrides, as written on the
/// command line ("anderson:m=5", "sgdr:T=5,min=1,max=2", ...).
struct AccelSpec {
  AccelKind kind = AccelKind::none;
  std::map<std::string, double> params;
  std::optional<AdamBias> adam_bias;

  std::string label() const;
};

AccelSpec parse_accel_spec(const std::string& text);

/// Per-method defaults for gradient schemes; explicit params win.
///   mgd/nag  λ=1, β=0.9       adam β₁=0.9, β₂=0.999, λ=0.02
///   sgdr     T=5 with [λ_min, λ_max] = [1,2] (T, R), [0,3] (TDA, p), [0,1] (P)
AgdConfig resolve_agd(const AccelSpec& spec, Method method);

/// Chebyshev defaults: T=32, α=3 (α=1 for the P-method), λ1=0, λ2=1.
ChebyshevSchedule resolve_chebyshev(const AccelSpec& spec, Method method);

struct RunOptions {
  /// Stop once ||e||/||b|| drops below this; 0 disables (default).
  double residual_tol = 0.0;
  bool record_timing = true;
  /// Spend one extra filter call after the loop to fill the final residual.
  bool final_residual = false;
  /// A final PSNR this far below the k=0 PSNR marks the run diverged.
  double divergence_margin_db = 0.5;
  double psnr_peak = 1.0;
};

struct RunResult {
  IterationTrace trace;
  Image final_iterate;
  /// Highest-PSNR iterate when ground truth is given, else the final one.
  Image best_iterate;
  int best_k = 0;
};

/// Runs `budget` iterations of the scheme from x0, recording one trace row
/// per iterate (k = 0..budget). Non-finite iterates abort the loop with the
/// trace preserved and `diverged` set.
RunResult run_reversal(BoundProblem& prob, const AccelSpec& accel, const Image& x0, int budget,
                       const std::optional<Image>& ground_truth = std::nullopt,
                       const RunOptions& opts = {});

/// Fixed-point family entry point (none, mann, chebyshev, anderson, irons,
/// epsilon).
RunResult run_fixed_point(BoundProblem& prob, const AccelSpec& accel, const Image& x0,
                          int budget, const std::optional<Image>& ground_truth = std::nullopt,
                          const RunOptions& opts = {});

/// Gradient family entry point driven by an explicit optimiser state.
RunResult run_gradient_descent(BoundProblem& prob, AgdState state, const Image& x0, int budget,
                               const std::optional<Image>& ground_truth = std::nullopt,
                               const RunOptions& opts = {});

/// Filter calls one outer iteration of (method, accel) costs.
int filter_calls_per_iteration(Method method, AccelKind accel);

}  // namespace revfilt

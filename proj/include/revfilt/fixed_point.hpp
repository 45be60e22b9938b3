#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <limits>

#include "revfilt/image.hpp"

namespace revfilt {

using FixedPointMap = std::function<Image(const Image&)>;

/// f(x).
Image picard_step(const FixedPointMap& f, const Image& x);

/// x + ω(f(x) − x). ω = 1 returns f(x) unchanged, so the relaxed iteration
/// reduces to Picard bitwise.
Image mann_step(const FixedPointMap& f, const Image& x, double omega);

/// Periodic relaxation weights
///   ω_k = [ (λ2+λ1)/2 + (λ2−λ1)/2 · cos((2k'+1)π / 2T) ]⁻¹,  k' = k mod T,
/// clipped from above at clip_alpha. The defaults (λ1=0, λ2=1) give
/// ω_k = min(α, 2 / (1 + cos((2k'+1)π / 2T))), which increases through each
/// period from 2/(1+cos(π/2T)) to 2/(1−cos(π/2T)) before clipping.
struct ChebyshevSchedule {
  int period_T = 32;
  double clip_alpha = 3.0;
  double lambda1 = 0.0;
  double lambda2 = 1.0;

  void validate() const;
};

double chebyshev_omega(long long k, const ChebyshevSchedule& sched);
/// Same as chebyshev_omega without the clip.
double chebyshev_omega_unclipped(long long k, const ChebyshevSchedule& sched);

/// Anderson mixing over a sliding window of the last m+1 iterates.
///
/// With residuals F(x) = f(x) − x and differences ΔF_j, Δf_j over the window,
/// θ minimises ||F(x_k) + Σ θ_j ΔF_j||² (normal equations, ridge on the
/// diagonal) and the next iterate is f(x_k) + Σ θ_j Δf_j.
class AndersonState {
 public:
  explicit AndersonState(int window_m = 5, double ridge = 1e-10);

  Image step(const FixedPointMap& f, const Image& x);

  int window() const { return window_m_; }
  std::size_t history_size() const { return xs_.size(); }
  /// True when the last least-squares solve failed and Picard was used.
  bool last_fallback() const { return last_fallback_; }
  /// ||F(x_k) + Σ θ_j ΔF_j||² achieved by the last step.
  double last_objective() const { return last_objective_; }
  /// ||F(x_k)||² of the last step.
  double last_residual_sq() const { return last_residual_sq_; }

 private:
  int window_m_;
  double ridge_;
  std::deque<Image> xs_;
  std::deque<Image> fs_;
  std::deque<Image> residuals_;
  bool last_fallback_ = false;
  double last_objective_ = 0.0;
  double last_residual_sq_ = 0.0;
};

inline constexpr double kExtrapolationGuard = 1e-12;

struct ExtrapolationResult {
  Image next;
  /// ||Δ²x||² fell below the guard and f(x) was returned instead.
  bool fallback = false;
};

/// Vector Aitken step with the Samelson inverse of Δ²x:
///   x − (⟨Δx, Δ²x⟩ / ||Δ²x||²) Δx,
/// where Δx = f(x) − x, Δf = f(f(x)) − f(x), Δ²x = Δf − Δx. Two f calls.
ExtrapolationResult irons_step(const FixedPointMap& f, const Image& x,
                               double guard_eps = kExtrapolationGuard);

/// First-order vector ε step:
///   f(x) + (||Δx||² Δf − ||Δf||² Δx) / ||Δ²x||². Two f calls.
ExtrapolationResult epsilon_step(const FixedPointMap& f, const Image& x,
                                 double guard_eps = kExtrapolationGuard);

}  // namespace revfilt

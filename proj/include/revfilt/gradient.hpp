#pragma once

#include <cstdint>
#include <optional>

#include "revfilt/image.hpp"
#include "revfilt/methods.hpp"

namespace revfilt {

/// Cosine-annealed step size with warm restarts:
///   λ = λ_min + ½(λ_max − λ_min)(1 + cos(π · t_cur / T)).
struct SgdrSchedule {
  int period_T = 5;
  double lambda_min = 1.0;
  double lambda_max = 2.0;
  int t_cur = 0;

  void validate() const;
  /// Advances t_cur by one step, restarting at 0 when it reaches T.
  void advance();
};

double sgdr_lambda(const SgdrSchedule& sched);

enum class AgdKind { gd, mgd, nag, rmsprop, adadelta, adam, sgdr };

std::string to_string(AgdKind kind);

enum class AdamBias {
  power,    // 1 − β^k
  printed,  // 1 − β, constant
};

struct AgdConfig {
  AgdKind kind = AgdKind::gd;
  double lambda = 1.0;
  double beta = 0.9;    // momentum / first-moment / decay rate
  double beta2 = 0.999;  // adam second moment
  double eps = 1e-8;
  AdamBias adam_bias = AdamBias::power;
  SgdrSchedule sgdr{};

  void validate() const;
};

/// Per-run optimiser state. The surrogate s = −∇c(x) comes from
/// BoundProblem::grad_surrogate, so every "−λ∇c" in the textbook rules is
/// "+λ·s" here.
///
///   gd       x + λ s
///   mgd      v = βv + λ s(x);          x + v
///   nag      v = βv + λ s(x + βv);     x + v
///   rmsprop  v = βv + (1−β)s²;         x + λ s / √(v+ε)
///   adadelta v = βv + (1−β)s²;  Δ = √(u+ε)/√(v+ε) · s;  u = βu + (1−β)Δ²;  x + λΔ
///   adam     m = β₁m + (1−β₁)s;  v = β₂v + (1−β₂)s²;  x + λ m̂ / (√v̂ + ε)
///   sgdr     x + λ_k s with λ_k from the cosine schedule
class AgdState {
 public:
  explicit AgdState(AgdConfig cfg);

  Image step(BoundProblem& prob, const Image& x);

  const AgdConfig& config() const { return cfg_; }
  /// Step size used by the most recent step (λ_k for SGDR).
  double last_lambda() const { return last_lambda_; }
  std::int64_t step_count() const { return step_count_; }
  /// Point where the last surrogate was evaluated (the lookahead for NAG).
  const Image& last_probe() const { return last_probe_; }

  const std::optional<Image>& velocity() const { return v_; }
  const std::optional<Image>& second_moment() const { return s2_; }
  const std::optional<Image>& delta_accum() const { return u_; }

 private:
  void ensure_shape(const Image& x);

  AgdConfig cfg_;
  std::optional<Image> v_;   // velocity (mgd/nag) or squared-gradient average
  std::optional<Image> m_;   // adam first moment
  std::optional<Image> s2_;  // rmsprop/adadelta/adam second moment
  std::optional<Image> u_;   // adadelta update accumulator
  Image last_probe_;
  double last_lambda_ = 0.0;
  std::int64_t step_count_ = 0;
};

/// One update of the configured rule; `state` carries accumulators.
inline Image agd_step(AgdState& state, BoundProblem& prob, const Image& x) {
  return state.step(prob, x);
}

}  // namespace revfilt

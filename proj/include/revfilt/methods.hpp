#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "revfilt/filters.hpp"
#include "revfilt/image.hpp"

namespace revfilt {

enum class Method { T, R, TDA, P, p };

std::string to_string(Method m);
/// Accepts t, r, tda, P, p (P and p are distinct; t/r/tda are case-insensitive).
Method parse_method(const std::string& s);

struct MethodKind {
  Method tag = Method::T;
  double lambda = 1.0;
  double alpha = 0.99;  // R only: coefficient on x

  void validate() const;
  /// Filter calls consumed by one fixed-point map or surrogate evaluation.
  int filter_calls_per_eval() const;
};

/// A black-box filter g, its observation b and the reversal method.
///
/// The filter is referenced, not owned; it must outlive the problem. Every
/// fixed_point_map / grad_surrogate evaluation spends exactly
/// filter_calls_per_eval() calls of g: e(x) is computed once per evaluation
/// and shared with p(x) / t(x).
class BoundProblem {
 public:
  BoundProblem(BlackBoxFilter& g, Image b, MethodKind method);

  const Image& observation() const { return b_; }
  const MethodKind& method() const { return method_; }
  BlackBoxFilter& filter() { return *g_; }
  std::uint64_t filter_calls() const { return g_->call_count(); }

  Image residual_e(const Image& x);
  Image step_p(const Image& x);
  Image step_t(const Image& x);

  Image fixed_point_map(const Image& x);
  /// −∇c(x): e for T/R, t for TDA, ½p for P/p.
  Image grad_surrogate(const Image& x);

  /// Frobenius norm of e at x if x was the argument of one of the two most
  /// recent evaluations. Never calls g.
  std::optional<double> cached_residual_norm(const Image& x) const;

  /// Number of P-method steps skipped because ||p|| fell below 1e-12.
  std::uint64_t degenerate_steps() const { return degenerate_steps_; }

 private:
  Image e_of(const Image& x);
  Image p_given_e(const Image& x, const Image& e);
  Image t_given_e(const Image& x, const Image& e);
  void remember(const Image& x, const Image& e);

  BlackBoxFilter* g_;
  Image b_;
  MethodKind method_;
  std::uint64_t degenerate_steps_ = 0;

  struct ResidualEntry {
    Image x;
    double norm = 0.0;
  };
  ResidualEntry recent_[2];
  int recent_next_ = 0;
  int recent_count_ = 0;
};

inline constexpr double kDegeneratePNorm = 1e-12;

/// Max abs difference between grad_surrogate(x) and fixed_point_map(x) − x.
/// For the P-method returns 1 − cosine similarity of the two directions.
double consistency_check(BoundProblem& prob, const Image& x);

double cosine_similarity(const Image& a, const Image& b);

}  // namespace revfilt

#include "revfilt/methods.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace revfilt {

std::string to_string(Method m) {
  switch (m) {
    case Method::T: return "T";
    case Method::R: return "R";
    case Method::TDA: return "TDA";
    case Method::P: return "P";
    case Method::p: return "p";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  if (s == "P") return Method::P;
  if (s == "p") return Method::p;
  std::string lower = s;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "t") return Method::T;
  if (lower == "r") return Method::R;
  if (lower == "tda") return Method::TDA;
  throw ConfigError("unknown method '" + s + "' (expected t, r, tda, P or p)");
}

void MethodKind::validate() const {
  if (!std::isfinite(lambda)) throw ConfigError("method lambda must be finite");
  if (tag == Method::R && !(alpha > 0.0 && alpha <= 1.0)) {
    throw ConfigError("R-method alpha must lie in (0, 1]");
  }
}

int MethodKind::filter_calls_per_eval() const {
  switch (tag) {
    case Method::T:
    case Method::R: return 1;
    case Method::TDA: return 2;
    case Method::P:
    case Method::p: return 3;
  }
  return 0;
}

BoundProblem::BoundProblem(BlackBoxFilter& g, Image b, MethodKind method)
    : g_(&g), b_(std::move(b)), method_(method) {
  method_.validate();
  if (b_.empty()) throw Error("BoundProblem: empty observation");
}

void BoundProblem::remember(const Image& x, const Image& e) {
  recent_[recent_next_] = {x, frobenius_norm(e)};
  recent_next_ = (recent_next_ + 1) % 2;
  recent_count_ = std::min(recent_count_ + 1, 2);
}

std::optional<double> BoundProblem::cached_residual_norm(const Image& x) const {
  for (int i = 0; i < recent_count_; ++i) {
    if (recent_[i].x.bitwise_equal(x)) return recent_[i].norm;
  }
  return std::nullopt;
}

Image BoundProblem::e_of(const Image& x) {
  require_same_shape(x, b_, "iterate vs observation");
  Image e = sub(b_, g_->apply(x));
  remember(x, e);
  return e;
}

Image BoundProblem::p_given_e(const Image& x, const Image& e) {
  return sub(g_->apply(add(x, e)), g_->apply(sub(x, e)));
}

// g(x) = b − e is recovered from e instead of calling g again.
Image BoundProblem::t_given_e(const Image& x, const Image& e) {
  return sub(g_->apply(add(x, e)), sub(b_, e));
}

Image BoundProblem::residual_e(const Image& x) { return e_of(x); }

Image BoundProblem::step_p(const Image& x) {
  const Image e = e_of(x);
  return p_given_e(x, e);
}

Image BoundProblem::step_t(const Image& x) {
  const Image e = e_of(x);
  return t_given_e(x, e);
}

Image BoundProblem::grad_surrogate(const Image& x) {
  const Image e = e_of(x);
  switch (method_.tag) {
    case Method::T:
    case Method::R: return e;
    case Method::TDA: return t_given_e(x, e);
    case Method::P:
    case Method::p: return scale(p_given_e(x, e), 0.5);
  }
  throw Error("unreachable method");
}

Image BoundProblem::fixed_point_map(const Image& x) {
  const double lambda = method_.lambda;
  switch (method_.tag) {
    case Method::T:
    case Method::TDA:
    case Method::p:
      // x + λ·(−∇c); shares the surrogate path so λ=1 matches GD bitwise.
      return axpy(x, lambda, grad_surrogate(x));
    case Method::R: {
      const Image e = e_of(x);
      if (method_.alpha == 1.0) return axpy(x, lambda, e);
      return axpy(scale(x, method_.alpha), lambda, e);
    }
    case Method::P: {
      const Image e = e_of(x);
      const Image p = p_given_e(x, e);
      if (frobenius_norm(e) == 0.0) return x;
      const double p_norm = spectral_norm(p);
      if (p_norm < kDegeneratePNorm) {
        ++degenerate_steps_;
        return x;
      }
      const double e_norm = spectral_norm(e);
      return axpy(x, lambda * e_norm / (2.0 * p_norm), p);
    }
  }
  throw Error("unreachable method");
}

double cosine_similarity(const Image& a, const Image& b) {
  const double na = frobenius_norm(a), nb = frobenius_norm(b);
  if (na == 0.0 || nb == 0.0) return na == nb ? 1.0 : 0.0;
  return dot(a, b) / (na * nb);
}

double consistency_check(BoundProblem& prob, const Image& x) {
  const Image surrogate = prob.grad_surrogate(x);
  const Image step = sub(prob.fixed_point_map(x), x);
  if (prob.method().tag == Method::P) return 1.0 - cosine_similarity(surrogate, step);
  return max_abs_diff(surrogate, step);
}

}  // namespace revfilt

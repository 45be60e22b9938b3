#include "revfilt/fixed_point.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

namespace revfilt {

Image picard_step(const FixedPointMap& f, const Image& x) { return f(x); }

Image mann_step(const FixedPointMap& f, const Image& x, double omega) {
  if (!std::isfinite(omega)) throw Error("mann_step: omega must be finite");
  Image fx = f(x);
  if (omega == 1.0) return fx;
  return axpy(x, omega, sub(fx, x));
}

void ChebyshevSchedule::validate() const {
  if (period_T < 1) throw ConfigError("chebyshev: period T must be >= 1");
  if (!(clip_alpha > 0.0)) throw ConfigError("chebyshev: clip alpha must be positive");
  if (!(lambda1 >= 0.0) || !(lambda2 > 0.0) || lambda1 > lambda2) {
    throw ConfigError("chebyshev: need 0 <= lambda1 <= lambda2 and lambda2 > 0");
  }
}

double chebyshev_omega_unclipped(long long k, const ChebyshevSchedule& sched) {
  sched.validate();
  if (k < 0) throw Error("chebyshev: iteration index must be >= 0");
  const long long kk = k % sched.period_T;
  const double c = std::cos((2.0 * static_cast<double>(kk) + 1.0) * std::numbers::pi /
                            (2.0 * sched.period_T));
  const double denom = (sched.lambda2 + sched.lambda1) / 2.0 + (sched.lambda2 - sched.lambda1) / 2.0 * c;
  return 1.0 / denom;
}

double chebyshev_omega(long long k, const ChebyshevSchedule& sched) {
  return std::min(sched.clip_alpha, chebyshev_omega_unclipped(k, sched));
}

AndersonState::AndersonState(int window_m, double ridge) : window_m_(window_m), ridge_(ridge) {
  if (window_m < 0) throw ConfigError("anderson: window m must be >= 0");
  if (!(ridge >= 0.0)) throw ConfigError("anderson: ridge must be >= 0");
}

Image AndersonState::step(const FixedPointMap& f, const Image& x) {
  last_fallback_ = false;
  Image fx = f(x);
  Image residual = sub(fx, x);
  last_residual_sq_ = dot(residual, residual);
  last_objective_ = last_residual_sq_;
  if (window_m_ == 0) return fx;

  xs_.push_back(x);
  fs_.push_back(fx);
  residuals_.push_back(std::move(residual));
  while (xs_.size() > static_cast<std::size_t>(window_m_) + 1) {
    xs_.pop_front();
    fs_.pop_front();
    residuals_.pop_front();
  }
  const auto mk = static_cast<Eigen::Index>(xs_.size()) - 1;
  if (mk == 0) return fx;

  const Image& fk = residuals_.back();
  std::vector<Image> dF;
  dF.reserve(static_cast<std::size_t>(mk));
  for (Eigen::Index j = 0; j < mk; ++j) {
    const auto uj = static_cast<std::size_t>(j);
    dF.push_back(sub(residuals_[uj + 1], residuals_[uj]));
  }

  Eigen::MatrixXd gram(mk, mk);
  Eigen::VectorXd rhs(mk);
  for (Eigen::Index i = 0; i < mk; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    rhs(i) = -dot(dF[ui], fk);
    for (Eigen::Index j = 0; j <= i; ++j) {
      gram(i, j) = gram(j, i) = dot(dF[ui], dF[static_cast<std::size_t>(j)]);
    }
  }
  const double trace = gram.trace();
  if (trace == 0.0) return fx;  // stalled history: θ = 0
  gram.diagonal().array() += ridge_ * trace / static_cast<double>(mk);

  const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  Eigen::VectorXd theta;
  if (ldlt.info() == Eigen::Success) theta = ldlt.solve(rhs);
  if (ldlt.info() != Eigen::Success || !theta.allFinite()) {
    last_fallback_ = true;
    return fx;
  }

  Image next = fx;
  Image objective = fk;
  for (Eigen::Index j = 0; j < mk; ++j) {
    const auto uj = static_cast<std::size_t>(j);
    next = axpy(next, theta(j), sub(fs_[uj + 1], fs_[uj]));
    objective = axpy(objective, theta(j), dF[uj]);
  }
  last_objective_ = dot(objective, objective);
  return next;
}

namespace {

struct Differences {
  Image fx;
  Image dx;
  Image df;
  Image d2x;
  double d2x_sq;
};

Differences differences(const FixedPointMap& f, const Image& x) {
  Image fx = f(x);
  Image ffx = f(fx);
  Image dx = sub(fx, x);
  Image df = sub(ffx, fx);
  Image d2x = sub(df, dx);
  const double d2x_sq = dot(d2x, d2x);
  return {std::move(fx), std::move(dx), std::move(df), std::move(d2x), d2x_sq};
}

}  // namespace

ExtrapolationResult irons_step(const FixedPointMap& f, const Image& x, double guard_eps) {
  Differences d = differences(f, x);
  if (d.d2x_sq < guard_eps) return {std::move(d.fx), true};
  const double coef = dot(d.dx, d.d2x) / d.d2x_sq;
  return {axpy(x, -coef, d.dx), false};
}

ExtrapolationResult epsilon_step(const FixedPointMap& f, const Image& x, double guard_eps) {
  Differences d = differences(f, x);
  if (d.d2x_sq < guard_eps) return {std::move(d.fx), true};
  const double dx_sq = dot(d.dx, d.dx);
  const double df_sq = dot(d.df, d.df);
  const Image correction = sub(scale(d.df, dx_sq), scale(d.dx, df_sq));
  return {axpy(d.fx, 1.0 / d.d2x_sq, correction), false};
}

}  // namespace revfilt

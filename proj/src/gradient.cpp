#include "revfilt/gradient.hpp"

#include <cmath>
#include <numbers>

namespace revfilt {

void SgdrSchedule::validate() const {
  if (period_T < 1) throw ConfigError("sgdr: period T must be >= 1");
  if (!(lambda_min <= lambda_max)) throw ConfigError("sgdr: need lambda_min <= lambda_max");
  if (t_cur < 0 || t_cur > period_T) throw ConfigError("sgdr: t_cur out of [0, T]");
}

void SgdrSchedule::advance() {
  ++t_cur;
  if (t_cur >= period_T) t_cur = 0;
}

double sgdr_lambda(const SgdrSchedule& sched) {
  sched.validate();
  if (sched.t_cur == 0) return sched.lambda_max;
  if (sched.t_cur == sched.period_T) return sched.lambda_min;
  const double c = std::cos(std::numbers::pi * sched.t_cur / sched.period_T);
  return sched.lambda_min + 0.5 * (sched.lambda_max - sched.lambda_min) * (1.0 + c);
}

std::string to_string(AgdKind kind) {
  switch (kind) {
    case AgdKind::gd: return "gd";
    case AgdKind::mgd: return "mgd";
    case AgdKind::nag: return "nag";
    case AgdKind::rmsprop: return "rmsprop";
    case AgdKind::adadelta: return "adadelta";
    case AgdKind::adam: return "adam";
    case AgdKind::sgdr: return "sgdr";
  }
  return "?";
}

void AgdConfig::validate() const {
  if (!std::isfinite(lambda)) throw ConfigError("agd: lambda must be finite");
  if (!(beta >= 0.0 && beta < 1.0)) throw ConfigError("agd: beta must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("agd: beta2 must lie in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("agd: eps must be positive");
  if (kind == AgdKind::sgdr) sgdr.validate();
}

AgdState::AgdState(AgdConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void AgdState::ensure_shape(const Image& x) {
  auto init = [&](std::optional<Image>& acc) {
    if (!acc) {
      acc.emplace(x.width(), x.height(), 0.0);
    } else {
      require_same_shape(*acc, x, "optimiser accumulator");
    }
  };
  switch (cfg_.kind) {
    case AgdKind::mgd:
    case AgdKind::nag: init(v_); break;
    case AgdKind::rmsprop: init(s2_); break;
    case AgdKind::adadelta:
      init(s2_);
      init(u_);
      break;
    case AgdKind::adam:
      init(m_);
      init(s2_);
      break;
    case AgdKind::gd:
    case AgdKind::sgdr: break;
  }
}

Image AgdState::step(BoundProblem& prob, const Image& x) {
  ensure_shape(x);
  ++step_count_;
  const double lambda = cfg_.lambda;
  const double beta = cfg_.beta;
  last_lambda_ = lambda;

  switch (cfg_.kind) {
    case AgdKind::gd: {
      last_probe_ = x;
      return axpy(x, lambda, prob.grad_surrogate(x));
    }
    case AgdKind::sgdr: {
      last_lambda_ = sgdr_lambda(cfg_.sgdr);
      cfg_.sgdr.advance();
      last_probe_ = x;
      return axpy(x, last_lambda_, prob.grad_surrogate(x));
    }
    case AgdKind::mgd:
    case AgdKind::nag: {
      Image& v = *v_;
      // β = 0 skips the lookahead so NAG and MGD collapse onto GD exactly.
      last_probe_ = (cfg_.kind == AgdKind::nag && beta != 0.0) ? axpy(x, beta, v) : x;
      const Image s = prob.grad_surrogate(last_probe_);
      v = axpy(scale(v, beta), lambda, s);
      return add(x, v);
    }
    case AgdKind::rmsprop: {
      last_probe_ = x;
      const Image s = prob.grad_surrogate(x);
      Image& v = *s2_;
      Image out(x.width(), x.height());
      for (std::size_t i = 0; i < x.size(); ++i) {
        v[i] = beta * v[i] + (1.0 - beta) * s[i] * s[i];
        out[i] = x[i] + lambda * s[i] / std::sqrt(v[i] + cfg_.eps);
      }
      if (!out.all_finite()) throw NonFiniteError("rmsprop produced a non-finite pixel");
      return out;
    }
    case AgdKind::adadelta: {
      last_probe_ = x;
      const Image s = prob.grad_surrogate(x);
      Image& v = *s2_;
      Image& u = *u_;
      Image out(x.width(), x.height());
      for (std::size_t i = 0; i < x.size(); ++i) {
        v[i] = beta * v[i] + (1.0 - beta) * s[i] * s[i];
        const double delta = std::sqrt(u[i] + cfg_.eps) / std::sqrt(v[i] + cfg_.eps) * s[i];
        u[i] = beta * u[i] + (1.0 - beta) * delta * delta;
        out[i] = x[i] + lambda * delta;
      }
      if (!out.all_finite()) throw NonFiniteError("adadelta produced a non-finite pixel");
      return out;
    }
    case AgdKind::adam: {
      last_probe_ = x;
      const Image s = prob.grad_surrogate(x);
      Image& m = *m_;
      Image& v = *s2_;
      const double k = static_cast<double>(step_count_);
      const double c1 = cfg_.adam_bias == AdamBias::power ? 1.0 - std::pow(beta, k) : 1.0 - beta;
      const double c2 =
          cfg_.adam_bias == AdamBias::power ? 1.0 - std::pow(cfg_.beta2, k) : 1.0 - cfg_.beta2;
      Image out(x.width(), x.height());
      for (std::size_t i = 0; i < x.size(); ++i) {
        m[i] = beta * m[i] + (1.0 - beta) * s[i];
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * s[i] * s[i];
        const double m_hat = m[i] / c1;
        const double v_hat = v[i] / c2;
        out[i] = x[i] + lambda * m_hat / (std::sqrt(v_hat) + cfg_.eps);
      }
      if (!out.all_finite()) throw NonFiniteError("adam produced a non-finite pixel");
      return out;
    }
  }
  throw Error("unreachable optimiser kind");
}

}  // namespace revfilt

#include "revfilt/reversal.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>

namespace revfilt {

DriverFamily family_of(AccelKind kind) {
  switch (kind) {
    case AccelKind::none:
    case AccelKind::mann:
    case AccelKind::chebyshev:
    case AccelKind::anderson:
    case AccelKind::irons:
    case AccelKind::epsilon: return DriverFamily::fixed_point;
    default: return DriverFamily::gradient;
  }
}

std::string to_string(AccelKind kind) {
  switch (kind) {
    case AccelKind::none: return "none";
    case AccelKind::mann: return "mann";
    case AccelKind::chebyshev: return "chb";
    case AccelKind::anderson: return "anderson";
    case AccelKind::irons: return "irons";
    case AccelKind::epsilon: return "epsilon";
    case AccelKind::gd: return "gd";
    case AccelKind::mgd: return "mgd";
    case AccelKind::nag: return "nag";
    case AccelKind::rmsprop: return "rmsprop";
    case AccelKind::adadelta: return "adadelta";
    case AccelKind::adam: return "adam";
    case AccelKind::sgdr: return "sgdr";
  }
  return "?";
}

namespace {

struct AccelInfo {
  AccelKind kind;
  std::vector<std::string> names;
  std::set<std::string> keys;
};

const std::vector<AccelInfo>& accel_table() {
  static const std::vector<AccelInfo> table = {
      {AccelKind::none, {"none", "picard"}, {}},
      {AccelKind::mann, {"mann"}, {"omega"}},
      {AccelKind::chebyshev, {"chb", "chebyshev"}, {"T", "alpha", "lambda1", "lambda2"}},
      {AccelKind::anderson, {"anderson", "aa"}, {"m", "ridge"}},
      {AccelKind::irons, {"irons"}, {"guard"}},
      {AccelKind::epsilon, {"epsilon"}, {"guard"}},
      {AccelKind::gd, {"gd"}, {"lambda"}},
      {AccelKind::mgd, {"mgd"}, {"lambda", "beta"}},
      {AccelKind::nag, {"nag"}, {"lambda", "beta"}},
      {AccelKind::rmsprop, {"rmsprop"}, {"lambda", "beta", "eps"}},
      {AccelKind::adadelta, {"adadelta"}, {"lambda", "beta", "eps"}},
      {AccelKind::adam, {"adam"}, {"lambda", "beta1", "beta2", "eps"}},
      {AccelKind::sgdr, {"sgdr"}, {"T", "min", "max"}},
  };
  return table;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

double param_or(const AccelSpec& spec, const std::string& key, double fallback) {
  const auto it = spec.params.find(key);
  return it == spec.params.end() ? fallback : it->second;
}

int integer_param(const AccelSpec& spec, const std::string& key, int fallback) {
  const double v = param_or(spec, key, fallback);
  if (v != std::floor(v)) throw ConfigError(key + " must be an integer");
  return static_cast<int>(v);
}

// Shortest form that round-trips, so labels stay readable and unique.
std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string AccelSpec::label() const {
  std::string out = to_string(kind);
  char sep = ':';
  for (const auto& [k, v] : params) {
    out += sep + k + "=" + format_number(v);
    sep = ',';
  }
  if (adam_bias) {
    out += sep;
    out += *adam_bias == AdamBias::power ? "bias=power" : "bias=printed";
  }
  return out;
}

AccelSpec parse_accel_spec(const std::string& text) {
  const auto colon = text.find(':');
  const std::string name = trim(text.substr(0, colon));
  const AccelInfo* info = nullptr;
  for (const auto& candidate : accel_table()) {
    for (const auto& n : candidate.names)
      if (n == name) info = &candidate;
  }
  if (info == nullptr) {
    throw ConfigError("unknown acceleration '" + name +
                      "' (expected none, mann, chb, anderson, irons, epsilon, gd, mgd, nag, "
                      "rmsprop, adadelta, adam or sgdr)");
  }
  AccelSpec spec;
  spec.kind = info->kind;
  if (colon == std::string::npos) return spec;

  std::stringstream ss(text.substr(colon + 1));
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    if (part.empty()) continue;
    const auto eq = part.find('=');
    if (eq == std::string::npos) throw ConfigError("acceleration parameter '" + part + "' must be key=value");
    const std::string key = trim(part.substr(0, eq));
    const std::string val = trim(part.substr(eq + 1));
    if (spec.kind == AccelKind::adam && key == "bias") {
      if (val == "power") {
        spec.adam_bias = AdamBias::power;
      } else if (val == "printed") {
        spec.adam_bias = AdamBias::printed;
      } else {
        throw ConfigError("adam bias must be 'power' or 'printed'");
      }
      continue;
    }
    if (!info->keys.contains(key)) {
      throw ConfigError("unknown parameter '" + key + "' for acceleration '" + name + "'");
    }
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(val, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != val.size() || !std::isfinite(v)) {
      throw ConfigError("parameter '" + key + "' expects a number, got '" + val + "'");
    }
    spec.params[key] = v;
  }
  return spec;
}

AgdConfig resolve_agd(const AccelSpec& spec, Method method) {
  AgdConfig cfg;
  switch (spec.kind) {
    case AccelKind::gd:
      cfg.kind = AgdKind::gd;
      cfg.lambda = param_or(spec, "lambda", 1.0);
      break;
    case AccelKind::mgd:
    case AccelKind::nag:
      cfg.kind = spec.kind == AccelKind::mgd ? AgdKind::mgd : AgdKind::nag;
      cfg.lambda = param_or(spec, "lambda", 1.0);
      cfg.beta = param_or(spec, "beta", 0.9);
      break;
    case AccelKind::rmsprop:
      cfg.kind = AgdKind::rmsprop;
      cfg.lambda = param_or(spec, "lambda", 0.01);
      cfg.beta = param_or(spec, "beta", 0.9);
      cfg.eps = param_or(spec, "eps", 1e-8);
      break;
    case AccelKind::adadelta:
      cfg.kind = AgdKind::adadelta;
      cfg.lambda = param_or(spec, "lambda", 1.0);
      cfg.beta = param_or(spec, "beta", 0.9);
      cfg.eps = param_or(spec, "eps", 1e-8);
      break;
    case AccelKind::adam:
      cfg.kind = AgdKind::adam;
      cfg.lambda = param_or(spec, "lambda", 0.02);
      cfg.beta = param_or(spec, "beta1", 0.9);
      cfg.beta2 = param_or(spec, "beta2", 0.999);
      cfg.eps = param_or(spec, "eps", 1e-8);
      cfg.adam_bias = spec.adam_bias.value_or(AdamBias::power);
      break;
    case AccelKind::sgdr: {
      cfg.kind = AgdKind::sgdr;
      double lo = 1.0, hi = 2.0;
      switch (method) {
        case Method::T:
        case Method::R: break;
        case Method::TDA:
        case Method::p:
          lo = 0.0;
          hi = 3.0;
          break;
        case Method::P:
          lo = 0.0;
          hi = 1.0;
          break;
      }
      cfg.sgdr.period_T = integer_param(spec, "T", 5);
      cfg.sgdr.lambda_min = param_or(spec, "min", lo);
      cfg.sgdr.lambda_max = param_or(spec, "max", hi);
      cfg.lambda = cfg.sgdr.lambda_max;
      break;
    }
    default:
      throw ConfigError("'" + to_string(spec.kind) + "' is not a gradient-descent scheme");
  }
  cfg.validate();
  return cfg;
}

ChebyshevSchedule resolve_chebyshev(const AccelSpec& spec, Method method) {
  ChebyshevSchedule s;
  s.period_T = integer_param(spec, "T", 32);
  s.clip_alpha = param_or(spec, "alpha", method == Method::P ? 1.0 : 3.0);
  s.lambda1 = param_or(spec, "lambda1", 0.0);
  s.lambda2 = param_or(spec, "lambda2", 1.0);
  s.validate();
  return s;
}

int filter_calls_per_iteration(Method method, AccelKind accel) {
  MethodKind mk;
  mk.tag = method;
  const int base = mk.filter_calls_per_eval();
  return (accel == AccelKind::irons || accel == AccelKind::epsilon) ? 2 * base : base;
}

namespace {

struct StepOutcome {
  Image next;
  std::optional<double> param;
  std::vector<std::string> flags;
};

using Stepper = std::function<StepOutcome(const Image& x, int k)>;

RunResult drive(BoundProblem& prob, const Stepper& stepper, std::string accel_label,
                const Image& x0, int budget, const std::optional<Image>& truth,
                const RunOptions& opts) {
  if (budget < 1) throw ConfigError("iteration budget must be >= 1");
  require_same_shape(x0, prob.observation(), "initial iterate vs observation");
  if (truth) require_same_shape(*truth, prob.observation(), "ground truth vs observation");

  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  const std::uint64_t calls0 = prob.filter_calls();
  const double b_norm = frobenius_norm(prob.observation());

  RunResult result;
  IterationTrace& trace = result.trace;
  trace.method = to_string(prob.method().tag);
  trace.accel = std::move(accel_label);
  trace.filter = prob.filter().label();

  auto make_record = [&](int k, const Image& x) {
    IterationRecord r;
    r.k = k;
    if (truth) r.psnr_db = psnr(*truth, x, opts.psnr_peak);
    r.filter_calls = prob.filter_calls() - calls0;
    if (opts.record_timing) {
      r.elapsed_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    }
    return r;
  };

  Image x = x0;
  Image best = x0;
  int best_k = 0;
  double best_psnr = -std::numeric_limits<double>::infinity();
  trace.records.push_back(make_record(0, x));
  if (truth) best_psnr = *trace.records.back().psnr_db;

  for (int k = 0; k < budget; ++k) {
    StepOutcome out;
    try {
      out = stepper(x, k);
    } catch (const NonFiniteError&) {
      trace.diverged = true;
      trace.records.back().flags.push_back("nonfinite");
      break;
    }
    IterationRecord& cur = trace.records.back();
    cur.residual = prob.cached_residual_norm(x);
    cur.step_param = out.param;
    for (auto& f : out.flags) cur.flags.push_back(std::move(f));
    const std::optional<double> residual = cur.residual;

    x = std::move(out.next);
    trace.records.push_back(make_record(k + 1, x));
    if (truth && *trace.records.back().psnr_db > best_psnr) {
      best_psnr = *trace.records.back().psnr_db;
      best = x;
      best_k = k + 1;
    }
    if (opts.residual_tol > 0.0 && residual && b_norm > 0.0 &&
        *residual / b_norm < opts.residual_tol) {
      break;
    }
  }

  if (opts.final_residual && !trace.diverged) {
    trace.records.back().residual = frobenius_norm(prob.residual_e(x));
  }
  if (truth && !trace.diverged) {
    const auto p0 = trace.initial_psnr();
    const auto pn = trace.final_psnr();
    if (p0 && pn && *pn < *p0 - opts.divergence_margin_db) trace.diverged = true;
  }
  result.final_iterate = x;
  result.best_iterate = truth ? best : x;
  result.best_k = truth ? best_k : trace.records.back().k;
  return result;
}

std::vector<std::string> degenerate_flag(BoundProblem& prob, std::uint64_t before) {
  if (prob.degenerate_steps() > before) return {"degenerate_p"};
  return {};
}

}  // namespace

RunResult run_fixed_point(BoundProblem& prob, const AccelSpec& accel, const Image& x0,
                          int budget, const std::optional<Image>& ground_truth,
                          const RunOptions& opts) {
  if (family_of(accel.kind) != DriverFamily::fixed_point) {
    throw ConfigError("'" + to_string(accel.kind) + "' is not a fixed-point scheme");
  }
  const Method method = prob.method().tag;
  const FixedPointMap f = [&prob](const Image& x) { return prob.fixed_point_map(x); };
  Stepper stepper;

  switch (accel.kind) {
    case AccelKind::none:
      stepper = [&](const Image& x, int) {
        const auto d0 = prob.degenerate_steps();
        Image next = picard_step(f, x);
        return StepOutcome{std::move(next), prob.method().lambda, degenerate_flag(prob, d0)};
      };
      break;
    case AccelKind::mann: {
      const double omega = param_or(accel, "omega", 1.0);
      if (!std::isfinite(omega)) throw ConfigError("mann omega must be finite");
      stepper = [&, omega](const Image& x, int) {
        const auto d0 = prob.degenerate_steps();
        Image next = mann_step(f, x, omega);
        return StepOutcome{std::move(next), omega, degenerate_flag(prob, d0)};
      };
      break;
    }
    case AccelKind::chebyshev: {
      const ChebyshevSchedule sched = resolve_chebyshev(accel, method);
      stepper = [&, sched](const Image& x, int k) {
        const auto d0 = prob.degenerate_steps();
        const double omega = chebyshev_omega(k, sched);
        Image next = mann_step(f, x, omega);
        return StepOutcome{std::move(next), omega, degenerate_flag(prob, d0)};
      };
      break;
    }
    case AccelKind::anderson: {
      auto state = std::make_shared<AndersonState>(integer_param(accel, "m", 5),
                                                   param_or(accel, "ridge", 1e-10));
      stepper = [&, state](const Image& x, int) {
        const auto d0 = prob.degenerate_steps();
        Image next = state->step(f, x);
        auto flags = degenerate_flag(prob, d0);
        if (state->last_fallback()) flags.push_back("ls_fallback");
        return StepOutcome{std::move(next), std::nullopt, std::move(flags)};
      };
      break;
    }
    case AccelKind::irons:
    case AccelKind::epsilon: {
      const double guard = param_or(accel, "guard", kExtrapolationGuard);
      if (!(guard > 0.0)) throw ConfigError("extrapolation guard must be positive");
      const bool irons = accel.kind == AccelKind::irons;
      stepper = [&, guard, irons](const Image& x, int) {
        const auto d0 = prob.degenerate_steps();
        ExtrapolationResult r = irons ? irons_step(f, x, guard) : epsilon_step(f, x, guard);
        auto flags = degenerate_flag(prob, d0);
        if (r.fallback) flags.push_back("guard_fallback");
        return StepOutcome{std::move(r.next), std::nullopt, std::move(flags)};
      };
      break;
    }
    default: break;
  }
  return drive(prob, stepper, accel.label(), x0, budget, ground_truth, opts);
}

RunResult run_gradient_descent(BoundProblem& prob, AgdState state, const Image& x0, int budget,
                               const std::optional<Image>& ground_truth,
                               const RunOptions& opts) {
  auto shared = std::make_shared<AgdState>(std::move(state));
  const Stepper stepper = [&prob, shared](const Image& x, int) {
    const auto d0 = prob.degenerate_steps();
    Image next = shared->step(prob, x);
    return StepOutcome{std::move(next), shared->last_lambda(), degenerate_flag(prob, d0)};
  };
  return drive(prob, stepper, to_string(shared->config().kind), x0, budget, ground_truth, opts);
}

RunResult run_reversal(BoundProblem& prob, const AccelSpec& accel, const Image& x0, int budget,
                       const std::optional<Image>& ground_truth, const RunOptions& opts) {
  if (family_of(accel.kind) == DriverFamily::fixed_point) {
    return run_fixed_point(prob, accel, x0, budget, ground_truth, opts);
  }
  RunResult r = run_gradient_descent(prob, AgdState(resolve_agd(accel, prob.method().tag)), x0,
                                     budget, ground_truth, opts);
  r.trace.accel = accel.label();
  return r;
}

}  // namespace revfilt

#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "revfilt/fixed_point.hpp"
#include "revfilt/gradient.hpp"

using namespace revfilt;

namespace {

BlackBoxFilter gaussian_g(double sigma = 1.0) {
  return BlackBoxFilter("gaussian", [sigma](const Image& x) { return gaussian_filter(x, sigma); });
}

AgdConfig config(AgdKind kind, double lambda, double beta = 0.9) {
  AgdConfig c;
  c.kind = kind;
  c.lambda = lambda;
  c.beta = beta;
  return c;
}

MethodKind method(Method m) {
  MethodKind k;
  k.tag = m;
  return k;
}

}  // namespace

TEST_CASE("sgdr schedule") {
  SgdrSchedule s;
  s.period_T = 6;
  s.lambda_min = 0.5;
  s.lambda_max = 3.0;
  s.t_cur = 0;
  CHECK(sgdr_lambda(s) == 3.0);
  s.t_cur = 6;
  CHECK(sgdr_lambda(s) == 0.5);
  s.t_cur = 3;
  CHECK(sgdr_lambda(s) == doctest::Approx(1.75).epsilon(1e-15));

  // Warm restart: t_cur cycles 0..T-1 and λ returns to λ_max at each restart.
  SgdrSchedule r;
  r.period_T = 5;
  std::vector<double> seq;
  for (int k = 0; k < 15; ++k) {
    seq.push_back(sgdr_lambda(r));
    r.advance();
  }
  for (int k = 0; k < 15; k += 5) CHECK(seq[static_cast<std::size_t>(k)] == r.lambda_max);
  for (int k = 0; k < 10; ++k) CHECK(seq[static_cast<std::size_t>(k)] == seq[static_cast<std::size_t>(k + 5)]);
  for (int k = 1; k < 5; ++k) CHECK(seq[static_cast<std::size_t>(k)] < seq[static_cast<std::size_t>(k - 1)]);

  SgdrSchedule bad;
  bad.lambda_min = 3;
  bad.lambda_max = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = SgdrSchedule{};
  bad.t_cur = 7;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("gd at unit step is picard and mann with unit weight") {
  BlackBoxFilter g = gaussian_g();
  const Image b = g.apply(oracle::random_image(16, 16, 1));
  for (Method m : {Method::T, Method::TDA, Method::p}) {
    BoundProblem prob(g, b, method(m));
    AgdState gd(config(AgdKind::gd, 1.0));
    const FixedPointMap f = [&](const Image& x) { return prob.fixed_point_map(x); };
    Image xg = b, xm = b, xp = b;
    for (int k = 0; k < 10; ++k) {
      xg = agd_step(gd, prob, xg);
      xm = mann_step(f, xm, 1.0);
      xp = picard_step(f, xp);
      CHECK(xg.bitwise_equal(xp));
      CHECK(xm.bitwise_equal(xp));
    }
  }
}

TEST_CASE("zero momentum collapses onto gd") {
  BlackBoxFilter g = gaussian_g();
  const Image b = g.apply(oracle::random_image(12, 12, 2));
  BoundProblem prob(g, b, method(Method::TDA));
  AgdState gd(config(AgdKind::gd, 0.8));
  AgdState mgd(config(AgdKind::mgd, 0.8, 0.0));
  AgdState nag(config(AgdKind::nag, 0.8, 0.0));
  Image a = b, m = b, n = b;
  for (int k = 0; k < 8; ++k) {
    a = gd.step(prob, a);
    m = mgd.step(prob, m);
    n = nag.step(prob, n);
    CHECK(m.bitwise_equal(a));
    CHECK(n.bitwise_equal(a));
  }
}

TEST_CASE("gd recovers an identity filter in one step") {
  BlackBoxFilter id("identity", [](const Image& x) { return x; });
  const Image truth = oracle::random_image(5, 5, 3);
  BoundProblem prob(id, truth, method(Method::T));
  AgdState gd(config(AgdKind::gd, 1.0));
  CHECK(max_abs_diff(gd.step(prob, oracle::random_image(5, 5, 4)), truth) < 1e-15);
}

TEST_CASE("momentum updates") {
  BlackBoxFilter g = gaussian_g();
  const Image b = g.apply(oracle::random_image(10, 10, 5));
  BoundProblem prob(g, b, method(Method::T));
  const Image x0 = b;

  SUBCASE("mgd velocity") {
    AgdState mgd(config(AgdKind::mgd, 0.5, 0.9));
    const Image s0 = prob.grad_surrogate(x0);
    const Image x1 = mgd.step(prob, x0);
    CHECK(max_abs_diff(x1, axpy(x0, 0.5, s0)) < 1e-15);
    const Image s1 = prob.grad_surrogate(x1);
    const Image v1 = axpy(scale(scale(s0, 0.5), 0.9), 0.5, s1);
    const Image x2 = mgd.step(prob, x1);
    CHECK(max_abs_diff(x2, add(x1, v1)) < 1e-14);
  }

  SUBCASE("nag evaluates the surrogate at the lookahead point") {
    AgdState nag(config(AgdKind::nag, 1.0, 0.9));
    const Image x1 = nag.step(prob, x0);
    CHECK(nag.last_probe().bitwise_equal(x0));
    const Image v1 = sub(x1, x0);
    nag.step(prob, x1);
    CHECK(max_abs_diff(nag.last_probe(), axpy(x1, 0.9, v1)) < 1e-15);
  }
}

TEST_CASE("adam first step has magnitude close to lambda") {
  // Constant surrogate G: the identity filter with b - x = G.
  BlackBoxFilter id("identity", [](const Image& x) { return x; });
  const Image x0 = oracle::random_image(6, 6, 6);
  Image G = oracle::random_image(6, 6, 7, -1, 1);
  for (auto& v : G.pixels()) v += v >= 0 ? 0.1 : -0.1;
  BoundProblem prob(id, add(x0, G), method(Method::T));

  const double lambda = 0.05;
  AgdConfig cfg = config(AgdKind::adam, lambda);
  AgdState adam(cfg);
  const Image x1 = adam.step(prob, x0);
  for (std::size_t i = 0; i < x0.size(); ++i) {
    // m̂ = G and v̂ = G² after one bias-corrected step.
    const double expect = x0[i] + lambda * G[i] / (std::abs(G[i]) + cfg.eps);
    CHECK(std::abs(x1[i] - expect) <= 1e-15);
    const double mag = std::abs(x1[i] - x0[i]);
    CHECK(mag <= lambda);
    CHECK(mag >= 0.99 * lambda);
  }

  // The printed form keeps constant 1-β denominators; its first step is the same.
  AgdConfig printed = cfg;
  printed.adam_bias = AdamBias::printed;
  AgdState adam_p(printed);
  CHECK(max_abs_diff(adam_p.step(prob, x0), x1) < 1e-15);
  // They differ from the second step on.
  const Image a2 = adam.step(prob, x1);
  const Image p2 = adam_p.step(prob, x1);
  CHECK(max_abs_diff(a2, p2) > 0.0);
}

TEST_CASE("adaptive accumulators stay nonnegative") {
  BlackBoxFilter g = gaussian_g();
  const Image b = g.apply(oracle::random_image(10, 10, 8));
  for (AgdKind kind : {AgdKind::rmsprop, AgdKind::adadelta, AgdKind::adam}) {
    BoundProblem prob(g, b, method(Method::TDA));
    AgdState st(config(kind, kind == AgdKind::adadelta ? 1.0 : 0.01));
    Image x = b;
    for (int k = 0; k < 10; ++k) {
      x = st.step(prob, x);
      for (double v : st.second_moment()->pixels()) CHECK(v >= 0.0);
      if (st.delta_accum())
        for (double v : st.delta_accum()->pixels()) CHECK(v >= 0.0);
    }
    CHECK(st.step_count() == 10);
  }
}

TEST_CASE("rmsprop and adadelta first steps") {
  BlackBoxFilter id("identity", [](const Image& x) { return x; });
  const Image x0(1, 1, 0.0);
  BoundProblem prob(id, Image(1, 1, 0.5), method(Method::T));
  const double s = 0.5;

  AgdState rms(config(AgdKind::rmsprop, 0.01));
  const double v = 0.1 * s * s;
  CHECK(rms.step(prob, x0)[0] == doctest::Approx(0.01 * s / std::sqrt(v + 1e-8)).epsilon(1e-14));

  AgdState ada(config(AgdKind::adadelta, 1.0));
  const double delta = std::sqrt(1e-8) / std::sqrt(v + 1e-8) * s;
  CHECK(ada.step(prob, x0)[0] == doctest::Approx(delta).epsilon(1e-14));
  CHECK((*ada.delta_accum())[0] == doctest::Approx(0.1 * delta * delta).epsilon(1e-14));
}

TEST_CASE("sgdr steps follow the schedule") {
  BlackBoxFilter g = gaussian_g();
  const Image b = g.apply(oracle::random_image(8, 8, 9));
  BoundProblem prob(g, b, method(Method::T));
  AgdConfig cfg = config(AgdKind::sgdr, 2.0);
  cfg.sgdr.period_T = 5;
  cfg.sgdr.lambda_min = 1.0;
  cfg.sgdr.lambda_max = 2.0;
  AgdState st(cfg);
  Image x = b;
  SgdrSchedule ref = cfg.sgdr;
  for (int k = 0; k < 12; ++k) {
    const Image s = prob.grad_surrogate(x);
    const Image next = st.step(prob, x);
    CHECK(st.last_lambda() == sgdr_lambda(ref));
    CHECK(max_abs_diff(next, axpy(x, sgdr_lambda(ref), s)) == 0.0);
    ref.advance();
    x = next;
  }
}

TEST_CASE("every optimiser spends one surrogate per step") {
  BlackBoxFilter g = gaussian_g();
  const Image b = g.apply(oracle::random_image(8, 8, 10));
  for (Method m : {Method::T, Method::TDA, Method::P}) {
    for (AgdKind kind : {AgdKind::gd, AgdKind::mgd, AgdKind::nag, AgdKind::rmsprop,
                         AgdKind::adadelta, AgdKind::adam, AgdKind::sgdr}) {
      BoundProblem prob(g, b, method(m));
      AgdState st(config(kind, 0.5));
      Image x = b;
      const auto c0 = g.call_count();
      for (int k = 0; k < 4; ++k) x = st.step(prob, x);
      CHECK(g.call_count() - c0 == static_cast<std::uint64_t>(4 * prob.method().filter_calls_per_eval()));
    }
  }
}

TEST_CASE("optimiser configuration is validated") {
  CHECK_THROWS_AS(AgdState(config(AgdKind::mgd, 1.0, 1.0)), ConfigError);
  CHECK_THROWS_AS(AgdState(config(AgdKind::mgd, 1.0, -0.1)), ConfigError);
  AgdConfig bad_eps = config(AgdKind::adam, 0.01);
  bad_eps.eps = 0.0;
  CHECK_THROWS_AS(AgdState{bad_eps}, ConfigError);
  CHECK_THROWS_AS(AgdState(config(AgdKind::gd, std::nan(""))), ConfigError);
}

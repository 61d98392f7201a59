#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "lmf/harness.hpp"

using namespace lmf;

namespace {

ExperimentConfig small(int theorem) {
  auto c = ExperimentConfig::preset(theorem);
  c.N = {64, 128};
  c.M = 40;
  c.t = {0.25, 0.5, 0.75, 1.0};
  c.workers = 1;
  return c;
}

}  // namespace

TEST_CASE("config round trip and presets") {
  for (int th : {1, 2, 3}) {
    const auto c = ExperimentConfig::preset(th);
    CHECK_NOTHROW(c.validate());
    const auto back = ExperimentConfig::from_json_text(c.to_json_text());
    CHECK(back.to_json_text() == c.to_json_text());
    CHECK(back.hash() == c.hash());
  }
  auto c = ExperimentConfig::preset(2);
  c.workers = 7;
  CHECK(c.hash() == ExperimentConfig::preset(2).hash());
  c.seed = 9;
  CHECK(c.hash() != ExperimentConfig::preset(2).hash());

  const auto p3 = ExperimentConfig::from_json_text(R"({"schema":"lmf-experiment/1","theorem":3})");
  CHECK(p3.to_json_text() == ExperimentConfig::preset(3).to_json_text());
}

TEST_CASE("config rejects unknown keys and bad values") {
  const std::string head = R"({"schema":"lmf-experiment/1","theorem":1,)";
  auto code = [](const std::string& text, std::vector<std::string> ov = {}) {
    try {
      ExperimentConfig::from_json_text(text, ov);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode{};
  };
  CHECK(code(head + R"("alhpa":1.8})") == ErrorCode::Config);
  CHECK(code(head + R"("innovations":{"sigma3":1}})") == ErrorCode::Config);
  CHECK(code(head + R"("J":{"policy":"fixed","value":8,"extra":1}})") == ErrorCode::Config);
  CHECK(code(head + R"("ell":{"kind":"constant","a":0.5}})") == ErrorCode::Config);
  CHECK(code(R"({"theorem":1})") == ErrorCode::Config);
  CHECK(code(R"({"schema":"lmf-experiment/0","theorem":1})") == ErrorCode::Config);
  CHECK(code("{not json") == ErrorCode::Config);
  CHECK(code(head + R"("beta":1.2})") == ErrorCode::Domain);
  CHECK(code(head + R"("M":"many"})") == ErrorCode::Config);
  CHECK(code(head + R"("t":[0.5,0.25]})") == ErrorCode::Config);
  CHECK(code(R"({"schema":"lmf-experiment/1","theorem":2,"ell":{"kind":"log-power","sigma":1,"c1":1,"a":0.5}})") ==
        ErrorCode::Domain);
  CHECK(code(head + "}", {"diagnostics.nope=3"}) == ErrorCode::Config);
  CHECK(code(head + "}", {"no-equals-sign"}) == ErrorCode::Config);

  const auto c = ExperimentConfig::from_json_text(head + R"("M":50})",
                                                  {"M=12", "innovations.mode=centered", "K=2*odd-bump", "J.policy=fixed",
                                                   "J.value=32", "drift=as-printed"});
  CHECK(c.M == 12);
  CHECK(c.innov.mode == InnovationMode::Centered);
  CHECK(c.K(0.7) == doctest::Approx(2 * FunctionalSpec::odd_bump()(0.7)));
  CHECK(c.J.resolve(c.beta, c.ell, 1000) == 32);
  CHECK(c.drift == DriftConvention::AsPrinted);
}

TEST_CASE("J policy") {
  JPolicy p;
  CHECK(p.resolve(0.9, SlowlyVaryingSpec::zero(), 100) == 1600);
  CHECK(p.depends_on_n(0.9));
  CHECK_FALSE(p.depends_on_n(1.6));
  CHECK(p.resolve(1.6, SlowlyVaryingSpec::zero(), 100) == default_truncation(1.6, SlowlyVaryingSpec::zero(), 100));
  p.kind = JPolicy::Kind::Multiple;
  p.multiple = 2.5;
  CHECK(p.resolve(1.6, SlowlyVaryingSpec::zero(), 10) == 25);
  CHECK(p.depends_on_n(1.6));
}

TEST_CASE("zero functional gives zero sums") {
  auto c = small(1);
  c.K = FunctionalSpec{};
  const auto ps = run_partial_sums(c);
  CHECK(std::all_of(ps.raw.begin(), ps.raw.end(), [](double v) { return v == 0.0; }));
}

TEST_CASE("partial sums do not depend on the worker count") {
  for (int th : {1, 2}) {
    auto c = small(th);
    const auto a = run_partial_sums(c);
    c.workers = 3;
    const auto b = run_partial_sums(c);
    CHECK(a.raw == b.raw);
    CHECK(a.center == b.center);
  }
}

TEST_CASE("partial sums match direct summation") {
  auto c = ExperimentConfig::preset(2);
  c.N = {8};
  c.M = 1;
  c.t = {0.5, 1.0};
  c.J.kind = JPolicy::Kind::Fixed;
  c.J.value = 4;
  c.seed = 77;
  const auto ps = run_partial_sums(c);

  const auto coefs = c.coefficients(8);
  const auto a = coefficients(coefs);
  const Innovations eps(c.innov);
  std::vector<double> e(8 + 4 - 1);
  Rng rng = replication_rng(c.seed, 0, 0);
  draw_innovations(eps, rng, e);
  double s = 0, half = 0;
  for (std::size_t n = 1; n <= 8; ++n) {
    double x = 0;
    for (std::size_t j = 1; j <= 4; ++j) x += a[j - 1] * e[n - j + 3];  // e_{n-j} sits at index n - j + J - 1
    s += c.K(x) - ps.center[0];
    if (n == 4) half = s;
  }
  CHECK(ps.sum(0, 0, 0) == doctest::Approx(half).epsilon(1e-12));
  CHECK(ps.sum(0, 1, 0) == doctest::Approx(s).epsilon(1e-12));
  CHECK(ps.normalized(0, 1, 0) == doctest::Approx(s / norm_thm23(c.alpha, c.beta, c.ell, c.h, 8)).epsilon(1e-9));
}

TEST_CASE("decomposition terms against brute force") {
  auto c = ExperimentConfig::preset(2);
  const std::size_t N = 32, J = 64;
  const CoefficientSpec coefs{c.beta, c.ell, J};
  const LinearProcess lp(coefs, c.innov);
  const KInfinity kinf(c.K, lp);
  const EtaK eta(kinf, coefs);
  const auto& a = lp.a();
  Rng rng = replication_rng(5, 1, 0);
  std::vector<double> e(N + J), x(N);
  draw_innovations(lp.innovations(), rng, e);
  convolve_direct(a, std::span<const double>(e).first(N + J - 1), x);
  const double center = kinf(0.0);
  const auto d = decompose(eta, c.K, center, e, x);

  double S = 0, T = 0, Tau = 0, sx = 0;
  std::vector<double> ek(J);
  for (std::size_t j = 0; j < J; ++j) ek[j] = kinf.expect_scaled(a[j]);
  for (std::size_t n = 1; n <= N; ++n) {
    S += c.K(x[n - 1]) - center;
    sx += x[n - 1];
    for (std::size_t j = 1; j <= J; ++j) {
      T += kinf(a[j - 1] * e[n - j + J - 1]) - ek[j - 1];
      Tau += kinf(a[j - 1] * e[n - 1 + J]) - ek[j - 1];
    }
  }
  CHECK(d.S == doctest::Approx(S).epsilon(1e-12));
  CHECK(std::abs(d.T - T) <= 1e-5 * (1 + std::abs(T)));
  CHECK(std::abs(d.Tau - Tau) <= 1e-5 * (1 + std::abs(Tau)));
  CHECK(d.U == doctest::Approx(-int_K_df(kinf) * sx).epsilon(1e-14));
  CHECK_THROWS_AS(decompose(eta, c.K, center, std::span<const double>(e).first(N + J - 1), x), Error);
}

TEST_CASE("increment checks") {
  auto c = small(1);
  const auto ps = run_partial_sums(c);
  const auto inc = increment_checks(ps);
  bool sawZero = false, sawQuarter = false;
  for (const auto& r : inc) {
    CHECK(r.ks >= 0);
    CHECK(r.ks <= 1);
    CHECK(r.pValue >= 0);
    CHECK(r.pValue <= 1);
    if (r.t1 == 0) {
      CHECK(r.ks == 0.0);
      sawZero = true;
    }
    if (r.t1 == 0.25 && r.t2 == 0.75) sawQuarter = true;
  }
  CHECK(sawZero);
  CHECK(sawQuarter);
}

TEST_CASE("self-test sums pass the KS null bound") {
  auto c = ExperimentConfig::preset(3);
  c.N = {1024};
  c.M = 2000;
  c.workers = 2;
  const auto r = selftest(c);
  CHECK(r.passed());
  for (const auto& cell : r.marginals.cells) {
    CHECK(cell.ks <= 1.36 / std::sqrt(2000.0) + 0.01);
    CHECK(cell.ks >= 0);
  }
  CHECK(r.marginals.quantiles.size() == 4 * 11);
  const auto csv = quantiles_csv(r.marginals);
  CHECK(csv.rfind("N,t,p,empirical_quantile,limit_quantile\n", 0) == 0);
}

TEST_CASE("rescaling K rescales sums and limit laws") {
  auto c = small(1);
  c.M = 200;
  auto c2 = c;
  c2.K = c.K.scaled(2.0);
  const auto k1 = compute_constants(c), k2 = compute_constants(c2);
  const auto s1 = run_partial_sums(c), s2 = run_partial_sums(c2);
  for (std::size_t i = 0; i < s1.raw.size(); ++i) CHECK(s2.raw[i] == doctest::Approx(2 * s1.raw[i]).epsilon(1e-13));
  CHECK(k2.c.cTilde == doctest::Approx(2 * k1.c.cTilde).epsilon(1e-13));
  const auto m1 = verify_marginals(c, k1, s1), m2 = verify_marginals(c2, k2, s2);
  for (std::size_t i = 0; i < m1.cells.size(); ++i) CHECK(std::abs(m1.cells[i].ks - m2.cells[i].ks) <= 1e-12);

  // theorems 2-3: gamma_i are lambda^{ab}-homogeneous, so the limit scale carries lambda
  auto d = ExperimentConfig::preset(3);
  d.N = {256};
  auto d2 = d;
  d2.K = d.K.scaled(2.0);
  const auto g1 = compute_constants(d), g2 = compute_constants(d2);
  const double p = d.alpha * d.beta;
  CHECK(g2.c.gamma1 == doctest::Approx(std::pow(2.0, p) * g1.c.gamma1).epsilon(1e-8));
  CHECK(g2.c.gamma2 == doctest::Approx(std::pow(2.0, p) * g1.c.gamma2).epsilon(1e-8));
  CHECK(limit_law(d2, g2, 1.0).scale == doctest::Approx(2 * limit_law(d, g1, 1.0).scale).epsilon(1e-8));
}

TEST_CASE("degenerate theorem 1 limit is refused") {
  auto c = small(1);
  c.K = FunctionalSpec::gaussian_bump();
  try {
    verify(c);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Degenerate);
    CHECK(std::string(e.what()).find("theorem 3") != std::string::npos);
  }
}

TEST_CASE("symmetric eta tails") {
  auto c = ExperimentConfig::preset(2);
  c.K = FunctionalSpec::odd_bump();
  c.diag.eta_draws = 200000;
  c.diag.tail_levels = {1e-2, 1e-3};
  c.diag.aN = 1e4;
  c.workers = 2;
  const auto k = compute_constants(c);
  CHECK(k.c.gamma1 == doctest::Approx(k.c.gamma2).epsilon(1e-8));
  const auto t = eta_tail_diagnostics(c, k);
  for (const auto& L : t.levels) {
    const double n = double(L.countPos + L.countNeg);
    CHECK(std::abs(double(L.countPos) - double(L.countNeg)) <= 2 * std::sqrt(n));
    CHECK(L.exactPos == doctest::Approx(L.exactNeg).epsilon(1e-6));
    CHECK(L.exactPos + L.exactNeg == doctest::Approx(L.level).epsilon(0.2));
  }
  CHECK(t.aN > t.levels.back().x);
}

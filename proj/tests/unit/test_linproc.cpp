#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "lmf/linproc.hpp"

using namespace lmf;

namespace {
InnovationSpec sym(double alpha) {
  InnovationSpec sp;
  sp.alpha = alpha;
  return sp;
}
InnovationSpec centered(double alpha) {
  InnovationSpec sp;
  sp.alpha = alpha;
  sp.sigma1 = 0.3;
  sp.sigma2 = 0.7;
  sp.mode = InnovationMode::Centered;
  return sp;
}
}  // namespace

TEST_CASE("coefficients") {
  const auto a = coefficients({0.9, SlowlyVaryingSpec::zero(), 16});
  CHECK(a[0] == 1.0);
  CHECK(a[15] == doctest::Approx(std::pow(16.0, -0.9)).epsilon(1e-15));
  CHECK(a[15] == doctest::Approx(0.0823).epsilon(2e-3));
  const auto b = coefficients({0.9, SlowlyVaryingSpec::zero(2.5), 16});
  for (std::size_t i = 0; i < 16; ++i) CHECK(b[i] == doctest::Approx(2.5 * a[i]).epsilon(1e-15));
  const auto ell = SlowlyVaryingSpec::log_power(1.2, 0.4, 0.75);
  const auto c = coefficients({1.3, ell, 200});
  CHECK(c[0] == 1.2);
  for (std::size_t i = 2; i <= 200; i += 17) CHECK(c[i - 1] / std::pow(double(i), -1.3) == doctest::Approx(sv_eval(ell, double(i))).epsilon(1e-13));
  CHECK_THROWS_AS(coefficients({0.9, SlowlyVaryingSpec::zero(), 0}), Error);
}

TEST_CASE("truncation budget") {
  const CoefficientSpec c{0.9, SlowlyVaryingSpec::zero(), 100000};
  const double t = truncation_budget(c, 1.7);
  CHECK(t == doctest::Approx(std::pow(1e5, 1 - 1.53) / 0.53).epsilon(1e-3));
  CHECK(t == doctest::Approx(4.17e-3).epsilon(5e-3));
  CoefficientSpec c4 = c;
  c4.J *= 4;
  CHECK(t / truncation_budget(c4, 1.7) == doctest::Approx(std::pow(4.0, 1.53 - 1)).epsilon(0.02));
  CHECK_THROWS_AS(truncation_budget(c, 1.1), Error);

  // direct partial sum plus an Euler-Maclaurin tail as the oracle
  for (const auto& ell : {SlowlyVaryingSpec::zero(), SlowlyVaryingSpec::log_power(1.0, 0.5, 0.75)}) {
    const CoefficientSpec s{1.4, ell, 1000};
    const double ap = 1.2;
    auto term = [&](double j) { return std::pow(std::pow(j, -s.beta) * sv_eval(ell, j), ap); };
    double direct = 0.0;
    const std::size_t far = 2000000;
    for (std::size_t j = s.J + 1; j <= far; ++j) direct += term(double(j));
    CoefficientSpec tail = s;
    tail.J = far;
    direct += truncation_budget(tail, ap);
    CHECK(truncation_budget(s, ap) == doctest::Approx(direct).epsilon(0.01));
  }
}

TEST_CASE("default truncation") {
  CHECK(default_truncation(0.9, SlowlyVaryingSpec::zero(), 1024) == 16 * 1024);
  const std::size_t J = default_truncation(1.6, SlowlyVaryingSpec::zero(), 1024);
  CHECK(truncation_budget({1.6, SlowlyVaryingSpec::zero(), J}, 1.0) <= 1e-3);
  CHECK(truncation_budget({1.6, SlowlyVaryingSpec::zero(), J - 1}, 1.0) > 1e-3);
  CHECK_THROWS_AS(check_summable(0.8, 1.2), Error);
  CHECK_NOTHROW(check_summable(0.8, 1.6));
}

TEST_CASE("FFT convolution") {
  // identity kernel
  {
    PathSimulator sim({1.0}, 50);
    std::vector<double> e(50), x(50);
    for (std::size_t k = 0; k < e.size(); ++k) e[k] = std::sin(1.0 + k);
    sim.convolve(e, x);
    for (std::size_t n = 0; n < 50; ++n) CHECK(x[n] == doctest::Approx(e[n]).epsilon(1e-14));
  }
  // constant input gives the kernel sum
  {
    const auto a = coefficients({0.9, SlowlyVaryingSpec::zero(), 300});
    PathSimulator sim(a, 64);
    REQUIRE(sim.uses_fft());
    std::vector<double> e(sim.input_length(), 1.0), x(64);
    sim.convolve(e, x);
    double sum = 0;
    for (double v : a) sum += v;
    for (double v : x) CHECK(v == doctest::Approx(sum).epsilon(1e-12));
  }
  // naive oracle at N = 256, J = 512 with heavy-tailed inputs
  for (double alpha : {0.8, 1.8}) {
    const auto a = coefficients({1.6, SlowlyVaryingSpec::zero(), 512});
    PathSimulator sim(a, 256);
    REQUIRE(sim.uses_fft());
    Innovations eps(sym(alpha));
    std::vector<double> e(sim.input_length()), x(256), y(256);
    Rng rng(Rng::substream(5, 0, 0));
    draw_innovations(eps, rng, e);
    sim.convolve(e, x);
    convolve_direct(a, e, y);
    double scale = 0, err = 0;
    for (std::size_t n = 0; n < 256; ++n) {
      scale = std::max(scale, std::abs(y[n]));
      err = std::max(err, std::abs(x[n] - y[n]));
    }
    CHECK(err <= 1e-10 * scale);
  }
}

TEST_CASE("simulate_paths determinism, causality and file round trip") {
  const CoefficientSpec c{0.9, SlowlyVaryingSpec::zero(), 128};
  const auto sp = sym(1.8);
  const auto b1 = simulate_paths(c, sp, 100, 7, 42, 1);
  const auto b3 = simulate_paths(c, sp, 100, 7, 42, 3);
  CHECK(b1.values == b3.values);
  CHECK(simulate_paths(c, sp, 100, 7, 43, 1).values != b1.values);

  // replication 4 reproduced from its innovations
  const auto e = regenerate_innovations(b1, sp, 4);
  std::vector<double> x(100);
  convolve_direct(coefficients(c), e, x);
  for (std::size_t n = 0; n < 100; ++n) CHECK(b1.at(n, 4) == doctest::Approx(x[n]).epsilon(1e-10));

  // perturbing e_m moves only X_n with m < n <= m + J
  auto e2 = e;
  const std::size_t k = 60;  // e_{1-J+k}
  const long m = 1 - 128 + static_cast<long>(k);
  e2[k] += 5.0;
  std::vector<double> x2(100);
  convolve_direct(coefficients(c), e2, x2);
  for (long n = 1; n <= 100; ++n) {
    const bool inside = n > m && n <= m + 128;
    CHECK((x2[n - 1] != x[n - 1]) == inside);
  }

  const auto path = (std::filesystem::temp_directory_path() / "lmf_paths_test.bin").string();
  write_path_batch(path, b1);
  CHECK(std::filesystem::file_size(path) == 32 + 8 * 700);
  const auto back = read_path_batch(path);
  CHECK(back.N == 100);
  CHECK(back.M == 7);
  CHECK(back.J == 128);
  CHECK(back.seed == 42);
  CHECK(back.values == b1.values);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_path_batch(path), Error);

  CHECK_THROWS_AS(simulate_paths(c, sp, 100, 7, 42, 1, 1000), Error);
}

TEST_CASE("process cf") {
  for (const auto& [beta, sp] : {std::pair{0.9, sym(1.8)}, std::pair{1.6, sym(0.8)}, std::pair{0.8, centered(1.6)}}) {
    LinearProcess lp({beta, SlowlyVaryingSpec::zero(), 3000}, sp);
    CHECK(lp.cf(0.0) == cplx(1.0, 0.0));
    double sup = 0;
    for (double u : {1e-5, 1e-3, 0.02, 0.3, 0.9, 2.0, 4.0, 9.0}) {
      CHECK(std::abs(lp.cf(u) - lp.cf_direct(u)) < 1e-10);
      CHECK(std::abs(lp.cf(-u) - std::conj(lp.cf(u))) < 1e-15);
    }
    for (double u = 0.01; u <= 1e3; u *= 1.1) sup = std::max(sup, std::abs(lp.cf(u)) * (1 + std::pow(u, 4)));
    CHECK(sup < 1e3);
  }
  // single factor
  LinearProcess one({0.9, SlowlyVaryingSpec::zero(), 1}, sym(1.5));
  Innovations e(sym(1.5));
  for (double u : {0.01, 0.7, 3.0, 20.0}) CHECK(std::abs(one.cf(u) - e.cf(u)) < 1e-12);
  // a slowly varying coefficient factor
  LinearProcess lv({1.2, SlowlyVaryingSpec::log_power(1.0, 0.5, 0.75), 2000}, centered(1.5));
  for (double u : {0.05, 0.5, 2.0}) CHECK(std::abs(lv.cf(u) - lv.cf_direct(u)) < 1e-10);
  InnovationSpec hv = sym(1.5);
  hv.x0 = 5.0;
  hv.h = SlowlyVaryingSpec::log_power(1.0, 0.1, 0.75);
  CHECK_THROWS_AS(LinearProcess({0.9, SlowlyVaryingSpec::zero(), 10}, hv), Error);
}

TEST_CASE("density") {
  LinearProcess lp({0.9, SlowlyVaryingSpec::zero(), 2000}, sym(1.8));
  for (double x : {0.3, 1.7, 6.0, 80.0}) {
    CHECK(lp.density(x).f == doctest::Approx(lp.density(-x).f).epsilon(1e-10));
    CHECK(lp.density(x).fprime == doctest::Approx(-lp.density(-x).fprime).epsilon(1e-9));
  }
  CHECK(std::abs(lp.density(0.0).fprime) <= 1e-8);

  // derivative against a central difference of f
  for (double x : {0.5, 3.0}) {
    const double h = 1e-3;
    const double fd = (lp.density(x + h).f - lp.density(x - h).f) / (2 * h);
    CHECK(lp.density(x).fprime == doctest::Approx(fd).epsilon(1e-5));
  }

  // normalization over [-1e3, 1e3]: log-spaced Gauss-Legendre panels on each side
  double mass = 0.0;
  std::vector<double> edges{0.0, 0.5};
  while (edges.back() < 1e3) edges.push_back(std::min(1e3, edges.back() * 1.5));
  for (std::size_t k = 0; k + 1 < edges.size(); ++k)
    mass += 2.0 * gauss_legendre20([&](double x) { return lp.density(x).f; }, edges[k], edges[k + 1]);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(lp.interval_probability(-1e3, 1e3) == doctest::Approx(mass).epsilon(1e-6));
  CHECK(lp.interval_probability(-2.0, 1.0) ==
        doctest::Approx(integrate_gk([&](double x) { return lp.density(x).f; }, -2.0, 1.0, 1e-10)).epsilon(1e-8));
}

TEST_CASE("density against a Monte Carlo histogram") {
  const CoefficientSpec c{1.6, SlowlyVaryingSpec::zero(), 32};
  const auto sp = centered(1.6);
  LinearProcess lp(c, sp);
  const auto batch = simulate_paths(c, sp, 1, 1000000, 9, 2);
  const double lo = -6.0, hi = 6.0;
  const int bins = 24;
  std::vector<long> count(bins, 0);
  for (double v : batch.values)
    if (v >= lo && v < hi) ++count[static_cast<int>((v - lo) / (hi - lo) * bins)];
  int outside = 0;
  for (int b = 0; b < bins; ++b) {
    const double p = lp.interval_probability(lo + (hi - lo) * b / bins, lo + (hi - lo) * (b + 1) / bins);
    const double n = 1e6, se = std::sqrt(n * p * (1 - p));
    if (std::abs(count[b] - n * p) > 3 * se) ++outside;
  }
  // about 0.3% of bins leave 3 SE by chance; allow one
  CHECK(outside <= 1);
}

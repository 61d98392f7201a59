#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "lmf/numeric.hpp"

using namespace lmf;

TEST_CASE("substreams are deterministic and distinct") {
  Rng a = Rng::substream(42, 3, 1), b = Rng::substream(42, 3, 1), c = Rng::substream(42, 3, 2);
  const auto x = a.bits();
  CHECK(x == b.bits());
  CHECK(x != c.bits());
}

TEST_CASE("uniform is in the open unit interval with the right mean") {
  Rng r(1);
  double s = 0;
  for (int i = 0; i < 200000; ++i) {
    const double u = r.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    s += u;
  }
  CHECK(std::abs(s / 200000 - 0.5) < 0.003);
}

TEST_CASE("parallel_for visits each index once and propagates errors") {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
  for (auto& h : hits) CHECK(h.load() == 1);
  CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                    if (i == 5) fail(ErrorCode::Domain, "boom");
                  }),
                  Error);
}

TEST_CASE("quadrature against elementary integrals") {
  CHECK(std::abs(gauss_legendre20([](double x) { return std::exp(x); }, 0, 1) - (std::exp(1.0) - 1)) < 1e-14);
  CHECK(std::abs(integrate_gk([](double x) { return std::sin(x); }, 0, kPi, 1e-12) - 2.0) < 1e-12);
  CHECK(std::abs(integrate_ts([](double x) { return 1.0 / std::sqrt(x); }, 0, 1, 1e-10) - 2.0) < 1e-10);
  CHECK(std::abs(integrate_to_infinity([](double x) { return 1.0 / (1.0 + x * x); }, 0.0, 1e-9) - kPi / 2) < 1e-8);
}

TEST_CASE("kolmogorov survival function") {
  // reference values of the Kolmogorov distribution
  CHECK(std::abs(kolmogorov_q(1.36) - 0.0494) < 5e-4);
  CHECK(std::abs(kolmogorov_q(1.0) - 0.2700) < 5e-4);
  CHECK(std::abs(kolmogorov_q(0.5) - 0.9639) < 5e-4);
  // both series agree at the switch point
  const double y = std::exp(-kPi * kPi / (8 * 1.18 * 1.18));
  double s = 0;
  for (int k = 1; k < 40; k += 2) s += std::pow(y, k * k);
  CHECK(std::abs((1 - std::sqrt(2 * kPi) / 1.18 * s) - kolmogorov_q(1.18)) < 1e-12);
}

TEST_CASE("two-sample KS") {
  std::vector<double> a(500), b(500);
  std::iota(a.begin(), a.end(), 0.0);
  std::iota(b.begin(), b.end(), 0.0);
  auto r = ks_two_sample(a, b);
  CHECK(r.distance == 0.0);
  CHECK(r.p_value == 1.0);
  for (auto& x : b) x += 250;
  r = ks_two_sample(a, b);
  CHECK(std::abs(r.distance - 0.5) < 1e-12);
  CHECK(r.p_value < 1e-10);
}

TEST_CASE("one-sample KS of a uniform grid") {
  std::vector<double> xs(100);
  for (int i = 0; i < 100; ++i) xs[i] = (i + 0.5) / 100;
  CHECK(std::abs(ks_statistic(xs, [](double x) { return x; }) - 0.005) < 1e-12);
}

TEST_CASE("quantiles and slope") {
  std::vector<double> v{1, 2, 3, 4, 5};
  CHECK(quantile_sorted(v, 0.5) == 3);
  CHECK(quantile_sorted(v, 0.25) == 2);
  CHECK(median({5, 1, 3}) == 3);
  std::vector<double> x{0, 1, 2, 3}, y{1, 3, 5, 7};
  CHECK(std::abs(ls_slope(x, y) - 2.0) < 1e-14);
}

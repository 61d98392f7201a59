#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "lmf/stable.hpp"

using namespace lmf;

TEST_CASE("cf at zero and closed forms") {
  for (double a : {0.5, 1.0, 1.5, 2.0}) CHECK(stable_cf({a, 1.3, 0.4, 2.0}, 0.0) == cplx(1.0, 0.0));
  CHECK(std::abs(stable_cf({1.0, 1.0, 0.0, 0.0}, 2.0) - std::exp(-2.0)) < 1e-15);
  CHECK(std::abs(stable_cf({2.0, 1.0, 0.0, 0.0}, 1.0) - std::exp(-1.0)) < 1e-15);
  // skew is ignored at alpha = 2
  CHECK(std::abs(stable_cf({2.0, 1.0, 0.9, 0.0}, 1.0) - std::exp(-1.0)) < 1e-15);
}

TEST_CASE("cf hermitian symmetry and modulus bound") {
  for (double a : {0.8, 1.0, 1.35, 1.8})
    for (double u : {0.01, 0.3, 1.0, 7.5}) {
      StableLaw law{a, 0.7, a == 1.0 ? 0.0 : -0.6, 0.3};
      CHECK(std::abs(stable_cf(law, -u) - std::conj(stable_cf(law, u))) < 1e-15);
      CHECK(std::abs(stable_cf(law, u)) <= 1.0);
    }
}

TEST_CASE("cdf closed-form oracles") {
  // Cauchy: F(x) = 1/2 + atan(x)/pi
  StableLaw cauchy{1.0, 1.0, 0.0, 0.0};
  for (double x : {-30.0, -3.0, -0.5, 0.0, 1.0, 4.0, 49.0})
    CHECK(std::abs(stable_cdf(cauchy, x) - (0.5 + std::atan(x) / kPi)) < 1e-8);
  CHECK(std::abs(stable_cdf(cauchy, 1.0) - 0.75) < 1e-8);
  // alpha = 2 is N(0, 2 scale^2)
  StableLaw gauss{2.0, 1.0, 0.0, 0.0};
  CHECK(std::abs(stable_cdf(gauss, 2.0) - 0.5 * std::erfc(-2.0 / 2.0)) < 1e-12);
  // Levy law (alpha 1/2, totally skewed): F(x) = erfc(sqrt(c/(2x))) with c = scale
  StableLaw levy{0.5, 1.0, 1.0, 0.0};
  for (double x : {0.05, 0.5, 2.0, 20.0})
    CHECK(std::abs(stable_cdf(levy, x) - std::erfc(std::sqrt(1.0 / (2.0 * x)))) < 1e-7);
}

TEST_CASE("cdf symmetry, monotonicity and limits") {
  for (double a : {0.8, 1.0, 1.35, 1.62, 1.8}) {
    StableLaw sym{a, 1.4, 0.0, -0.7};
    CHECK(std::abs(stable_cdf(sym, -0.7) - 0.5) < 1e-6);
    for (double eta : {-1.0, 0.0, 0.5}) {
      if (a == 1.0 && eta != 0.0) continue;
      StableLaw law{a, 1.0, eta, 0.2};
      double prev = -1.0;
      for (double x = -60.0; x <= 60.0; x += 0.37) {
        const double F = stable_cdf(law, x);
        CHECK(F >= prev);
        prev = F;
      }
      CHECK(stable_cdf(law, 0.2 - 50.0) <= 1e-1);
      CHECK(stable_cdf(law, 0.2 + 50.0) >= 1 - 1e-1);
    }
  }
}

TEST_CASE("tail series continues the quadrature at the table edge") {
  for (double a : {0.8, 1.35, 1.8})
    for (double eta : {-1.0, 0.0, 0.5}) {
      StableLaw law{a, 1.0, eta, 0.0};
      // the two sides of the switch differ only by quadrature/series error
      CHECK(std::abs(stable_cdf(law, 49.999999) - stable_cdf(law, 50.000001)) < 2e-7);
      CHECK(std::abs(stable_cdf(law, -49.999999) - stable_cdf(law, -50.000001)) < 2e-7);
    }
}

TEST_CASE("cdf table matches direct inversion") {
  for (double a : {0.8, 1.35, 1.8}) {
    StableLaw law{a, 2.0, a < 1 ? -1.0 : 0.5, 1.0};
    StableCdfTable table(law);
    for (double x = -97.3; x < 100.0; x += 3.1) CHECK(std::abs(table(x) - stable_cdf(law, x)) < 1e-6);
    for (double p : {0.01, 0.3, 0.5, 0.9, 0.999}) CHECK(std::abs(table(table.quantile(p)) - p) < 1e-9);
  }
}

TEST_CASE("sampler moments and symmetry") {
  Rng rng(12345);
  const int n = 100000;
  std::vector<double> xs(n);
  StableLaw gauss{2.0, 1.0, 0.0, 0.0};
  double s = 0, s2 = 0;
  for (auto& x : xs) {
    x = stable_sample(gauss, rng);
    s += x;
    s2 += x * x;
  }
  const double var = s2 / n - (s / n) * (s / n);
  CHECK(std::abs(var - 2.0) < 0.1);

  StableLaw cauchy{1.0, 1.0, 0.0, 0.0};
  for (auto& x : xs) x = stable_sample(cauchy, rng);
  std::sort(xs.begin(), xs.end());
  CHECK(std::abs(quantile_sorted(xs, 0.5)) < 0.02);
  CHECK_THROWS_AS(stable_sample({1.0, 1.0, 0.5, 0.0}, rng), Error);
}

TEST_CASE("sampler empirical cf") {
  const int n = 100000;
  for (double a : {0.8, 1.35, 1.8})
    for (double eta : {-1.0, 0.5}) {
      StableLaw law{a, 1.0, eta, 0.3};
      Rng rng = Rng::substream(99, static_cast<std::uint64_t>(a * 100), static_cast<std::uint64_t>(eta * 10 + 20));
      std::vector<double> xs(n);
      for (auto& x : xs) x = stable_sample(law, rng);
      for (double u : {-2.0, -1.0, -0.5, 0.5, 1.0, 2.0}) {
        cplx m = 0;
        for (double x : xs) m += std::exp(cplx(0, u * x));
        m /= n;
        CHECK(std::abs(m - stable_cf(law, u)) < 0.02);
      }
    }
}

TEST_CASE("sampler agrees with cdf (KS)") {
  const int n = 100000;
  for (double a : {0.8, 1.0, 1.35, 1.62, 1.8})
    for (double eta : {-1.0, 0.0, 0.5}) {
      if (a == 1.0 && eta != 0.0) continue;
      StableLaw law{a, 1.0, eta, 0.0};
      Rng rng = Rng::substream(7, static_cast<std::uint64_t>(a * 100), static_cast<std::uint64_t>(eta * 10 + 20));
      std::vector<double> xs(n);
      for (auto& x : xs) x = stable_sample(law, rng);
      std::sort(xs.begin(), xs.end());
      StableCdfTable table(law);
      INFO("alpha=" << a << " eta=" << eta);
      CHECK(ks_statistic(xs, [&](double x) { return table(x); }) <= 0.01);
    }
}

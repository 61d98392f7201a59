#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "lmf/innovations.hpp"

using namespace lmf;

namespace {
InnovationSpec sym(double alpha, double s = 0.5, double x0 = 2.0) {
  InnovationSpec sp;
  sp.alpha = alpha;
  sp.sigma1 = sp.sigma2 = s;
  sp.x0 = x0;
  return sp;
}

InnovationSpec skewed(double alpha) {
  InnovationSpec sp;
  sp.alpha = alpha;
  sp.sigma1 = 0.3;
  sp.sigma2 = 0.7;
  sp.x0 = 2.0;
  sp.mode = alpha > 1 ? InnovationMode::Centered : InnovationMode::Raw;
  return sp;
}

// Plain tensor-product Gauss-Legendre on the density, truncated far out; an
// oracle route that shares nothing with either cf implementation.
cplx cf_by_panels(const Innovations& e, double u, double cut) {
  cplx acc = 0.0;
  const double lo = -cut, hi = cut;
  const double w = std::min(0.05, 0.5 / (std::abs(u) + 1e-9));
  for (double a = lo; a < hi; a += w)
    acc += gauss_legendre20_c([&](double x) { return e.density(x) * std::exp(cplx(0, u * x)); }, a, std::min(hi, a + w));
  return acc;
}
}  // namespace

TEST_CASE("spec validation") {
  auto sp = sym(1.5);
  sp.sigma2 = 0.6;
  CHECK_THROWS_AS(Innovations{sp}, Error);
  sp = sym(1.5);
  sp.mode = InnovationMode::Raw;
  CHECK_THROWS_AS(Innovations{sp}, Error);
  sp = sym(0.8);
  sp.mode = InnovationMode::Centered;
  CHECK_THROWS_AS(Innovations{sp}, Error);
  sp = skewed(1.5);
  sp.alpha = 1.0;
  CHECK_THROWS_AS(Innovations{sp}, Error);
  CHECK_THROWS_AS(Innovations{sym(1.5, 5.0, 1.0)}, Error);  // tails carry too much mass
  CHECK(innovation_mode_from_string("centered") == InnovationMode::Centered);
  CHECK_THROWS_AS(innovation_mode_from_string("none"), Error);
}

TEST_CASE("density is a C1 probability density") {
  for (const auto& sp : {sym(1.8), sym(1.0), sym(0.8), skewed(1.6), skewed(0.8)}) {
    Innovations e(sp);
    const double x0 = sp.x0, m = e.shift();
    for (double s : {-1.0, 1.0}) {
      const double y = s * x0 - m;
      CHECK(e.density(y - 1e-9) == doctest::Approx(e.density(y + 1e-9)).epsilon(1e-7));
      const double d = 1e-5;
      const double left = (e.density(y - d) - e.density(y - 2 * d)) / d;
      const double right = (e.density(y + 2 * d) - e.density(y + d)) / d;
      CHECK(left == doctest::Approx(right).epsilon(1e-3));
    }
    const double core = integrate_gk([&](double x) { return e.density(x); }, -x0 - m, x0 - m, 1e-13);
    CHECK(core == doctest::Approx(1.0 - e.cdf(-x0 - m) - (1.0 - e.cdf(x0 - m))).epsilon(1e-12));
    CHECK(e.cdf(-x0 - m) == doctest::Approx(sp.sigma1 * std::pow(x0, -sp.alpha)).epsilon(1e-14));
  }
}

TEST_CASE("quantile") {
  CHECK(Innovations(sym(1.5)).quantile(0.5) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(std::abs(Innovations(sym(0.7)).quantile(0.5)) < 1e-14);

  // closed-form tail inversion: 0.5 x^-1.2 = 0.05
  Innovations e(sym(1.2, 0.5, 2.0));
  CHECK(e.quantile(0.95) == doctest::Approx(std::pow(10.0, 1 / 1.2)).epsilon(1e-13));
  CHECK(e.quantile(0.95) == doctest::Approx(6.813).epsilon(1e-4));

  for (const auto& sp : {sym(1.8), skewed(1.6), skewed(0.8), sym(1.0)}) {
    Innovations f(sp);
    double prev = -INFINITY;
    for (double x = -60.0; x <= 60.0; x += 0.37) {
      CHECK(f.quantile(f.cdf(x)) == doctest::Approx(x).epsilon(1e-10));
    }
    for (double p = 1e-6; p < 1.0; p += 0.01) {
      const double q = f.quantile(p);
      CHECK(q > prev);
      prev = q;
    }
  }
  CHECK_THROWS_AS(e.quantile(0.0), Error);
  CHECK_THROWS_AS(e.quantile(1.0), Error);
}

TEST_CASE("sampler") {
  const int n = 1000000;
  {
    Innovations e(skewed(1.8));
    Rng rng(Rng::substream(11, 0, 0));
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
      const double x = e.sample(rng);
      s += x;
      s2 += x * x;
    }
    const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
    CHECK(std::abs(mean) < 3 * se);
  }
  {
    const auto sp = sym(1.5);
    Innovations e(sp);
    Rng rng(Rng::substream(12, 0, 0));
    const double x = 2 * sp.x0;
    long up = 0, down = 0, both = 0;
    for (int i = 0; i < n; ++i) {
      const double v = e.sample(rng);
      up += v > x;
      down += v < -x;
    }
    both = up + down;
    const double expect = e.abs_tail(x);
    CHECK(expect == doctest::Approx(2 * 0.5 * std::pow(x, -1.5)).epsilon(1e-14));
    CHECK(std::abs(static_cast<double>(both) / n / expect - 1) < 0.05);
    // symmetric: P(e > x) and P(e < -x) agree within binomial noise
    const double p = expect / 2, sd = std::sqrt(2 * n * p * (1 - p));
    CHECK(std::abs(static_cast<double>(up - down)) < 3 * sd);
  }
}

TEST_CASE("KS against the exact cdf") {
  for (const auto& sp : {sym(1.8), skewed(1.6), skewed(0.8)}) {
    Innovations e(sp);
    Rng rng(Rng::substream(21, 0, 0));
    std::vector<double> xs(100000);
    for (auto& x : xs) x = e.sample(rng);
    std::sort(xs.begin(), xs.end());
    CHECK(ks_statistic(xs, [&](double x) { return e.cdf(x); }) <= 0.01);
  }
}

TEST_CASE("cf routes agree") {
  for (const auto& sp : {sym(1.8), sym(1.0), sym(0.8), skewed(1.6), skewed(0.8), sym(1.5, 0.25, 1.0)}) {
    Innovations e(sp);
    CHECK(e.cf(0.0) == cplx(1.0, 0.0));
    for (double u : {1e-4, 3e-3, 0.05, 0.4, 1.0, 2.5, 3.999, 4.001, 7.0, 25.0, 300.0}) {
      const cplx a = e.cf(u), b = e.cf_quadrature(u);
      CHECK(std::abs(a - b) <= 1e-8);
      CHECK(std::abs(e.cf(-u) - std::conj(a)) < 1e-15);
      CHECK(std::abs(a) <= 1.0 + 1e-12);
      if (sp.mode == InnovationMode::Symmetric) CHECK(std::abs(a.imag()) <= 1e-8);
    }
  }
}

TEST_CASE("cf matches a brute-force panel oracle at moderate u") {
  // tails beyond the cut are added from the exact survival function bound
  for (const auto& sp : {sym(1.8), skewed(1.6)}) {
    Innovations e(sp);
    for (double u : {0.7, 3.0, 9.0}) {
      const double cut = 4000.0;
      const double mass_out = e.abs_tail(cut);
      CHECK(std::abs(e.cf(u) - cf_by_panels(e, u, cut)) <= mass_out + 1e-9);
    }
  }
}

TEST_CASE("series and large-argument routes are continuous at the switch") {
  for (const auto& sp : {sym(1.8), skewed(1.6), skewed(0.8), sym(1.0)}) {
    Innovations e(sp);
    const double u = 8.0 / sp.x0;
    CHECK(std::abs(e.cf(u * (1 - 1e-9)) - e.cf(u * (1 + 1e-9))) < 1e-9);
  }
}

TEST_CASE("small-lambda bounds") {
  for (const auto& sp : {sym(1.8), sym(1.0), sym(0.8), skewed(1.6), skewed(0.8)}) {
    Innovations e(sp);
    const double ap = sp.alpha - 0.05;
    const auto fa = e.fit_bound_abs(ap), fs = e.fit_bound_sq(ap);
    CHECK(std::isfinite(fa.C));
    CHECK(std::isfinite(fs.C));
    // |1 - cf| = O(l^alpha): the ratio stays bounded even with a' = alpha
    CHECK(e.fit_bound_abs(sp.alpha).C < 20.0);
    CHECK(fa.C < 20.0);
    CHECK(fs.C < 20.0);
    for (int k = 0; k <= 240; ++k) {
      const double l = std::pow(10.0, -3.0 + 6.0 * k / 240.0);
      CHECK(std::abs(1.0 - e.cf(l)) <= fa.C * std::min(std::pow(l, ap), 1.0) * (1 + 1e-12));
    }
    const double w = e.decay_witness();
    CHECK(std::isfinite(w));
    CHECK(w < 1e3);
  }
}

TEST_CASE("slowly varying tail factor") {
  InnovationSpec sp = sym(1.5, 0.5, 5.0);
  sp.h = SlowlyVaryingSpec::log_power(1.0, 0.3, 0.75);
  Innovations e(sp);
  for (double x : {5.0, 9.0, 50.0, 1e4}) {
    CHECK(1.0 - e.cdf(x) == doctest::Approx(0.5 * std::pow(x, -1.5) * sv_eval(sp.h, x)).epsilon(1e-12));
    CHECK(e.cdf(-x) == doctest::Approx(0.5 * std::pow(x, -1.5) * sv_eval(sp.h, x)).epsilon(1e-12));
  }
  for (double p : {1e-7, 0.01, 0.2, 0.5, 0.93, 0.999999}) CHECK(e.cdf(e.quantile(p)) == doctest::Approx(p).epsilon(1e-10));
  for (double u : {0.1, 1.0, 10.0}) {
    CHECK(std::abs(e.cf(u).imag()) <= 1e-8);
    CHECK(std::abs(e.cf(u) - cf_by_panels(e, u, 4000.0)) <= e.abs_tail(4000.0) + 1e-9);
  }
  Rng rng(Rng::substream(31, 0, 0));
  std::vector<double> xs(100000);
  for (auto& x : xs) x = e.sample(rng);
  std::sort(xs.begin(), xs.end());
  CHECK(ks_statistic(xs, [&](double x) { return e.cdf(x); }) <= 0.01);
}

#include <algorithm>
#include <cmath>
#include <tuple>
#include <vector>

#include "doctest.h"
#include "lmf/functionals.hpp"
#include "lmf/limits.hpp"

using namespace lmf;

TEST_CASE("LFSM kernel scale") {
  CHECK(lfsm_kernel_scale(1.8, 0.9, 0.0) == 0.0);
  for (auto [a, b] : {std::pair{1.8, 0.9}, std::pair{1.6, 0.8}, std::pair{1.2, 0.95}, std::pair{1.9, 0.6}}) {
    const double s1 = lfsm_kernel_scale(a, b, 1.0);
    CHECK(s1 == doctest::Approx(lfsm_kernel_scale_exp_sinh(a, b, 1.0)).epsilon(1e-5));
    CHECK(lfsm_kernel_scale(a, b, 2.0) / s1 == doctest::Approx(std::pow(2.0, 1 / a + 1 - b)).epsilon(1e-4));
    CHECK(lfsm_kernel_scale(a, b, 0.3) / s1 == doctest::Approx(std::pow(0.3, 1 / a + 1 - b)).epsilon(1e-4));
  }
  CHECK_THROWS_AS(lfsm_kernel_scale(1.8, 0.5, 1.0), Error);
  CHECK_THROWS_AS(lfsm_kernel_scale(1.8, 1.0, 1.0), Error);
  CHECK_THROWS_AS(lfsm_kernel_scale(1.8, 0.9, -1.0), Error);
}

TEST_CASE("Theorem 1 marginal") {
  const double a = 1.8, b = 0.9;
  const auto law = thm1_marginal(a, b, 0.3, 0.7, -0.4, 1.0);
  CHECK(law.alpha == a);
  CHECK(law.skew == doctest::Approx(-0.4).epsilon(1e-15));
  CHECK(law.shift == 0.0);
  const double ks = lfsm_kernel_scale(a, b, 1.0);
  for (double u : {-3.0, -0.2, 0.5, 4.0}) {
    const double sg = u > 0 ? 1 : -1;
    const cplx expect = std::exp(-std::pow(0.4 * ks, a) * std::pow(std::abs(u), a) *
                                 cplx(1, -law.skew * sg * std::tan(kPi * a / 2)));
    CHECK(std::abs(stable_cf(law, u) - expect) <= 1e-10);
  }
  // self-similarity of the marginal
  const auto L = Thm1Limit::make(a, b, 0.3, 0.7, -0.4);
  const double H = 1 / a + 1 - b;
  for (double u : {-1.5, 0.7, 2.0})
    CHECK(std::abs(stable_cf(L.marginal(2.0), u) - stable_cf(L.marginal(1.0), std::pow(2.0, H) * u)) <= 1e-8);
  CHECK(thm1_marginal(a, b, 0.5, 0.5, 0.3, 0.7).skew == 0.0);
  CHECK(thm1_marginal(a, b, 0.5, 0.5, 0.0, 0.7).degenerate());
  CHECK_THROWS_AS(thm1_marginal(1.8, 0.4, 0.5, 0.5, 0.3, 1.0), Error);
}

TEST_CASE("sine integral") {
  for (double p : {0.3, 1.0, 1.28, 1.35, 1.6, 1.9}) {
    CHECK(sine_integral(p) == doctest::Approx(sine_integral_closed_form(p)).epsilon(1e-8));
    CHECK(sine_integral(p) > 0);
  }
  CHECK(std::abs(sine_integral(1.35) - sine_integral_closed_form(1.35)) <= 1e-6);
  CHECK(sine_integral(1.0) == doctest::Approx(kPi / 2).epsilon(1e-12));
  // half-period sums with repeated averaging of the alternating partial sums
  const double p = 1.35;
  std::vector<double> partial;
  double s = integrate_ts([&](double x) { return (x == 0 ? 1.0 : std::sin(x) / x) * std::pow(x, 1 - p); }, 0.0, kPi, 1e-14);
  for (int k = 1; k <= 40; ++k) {
    partial.push_back(s);
    s += integrate_gk([&](double x) { return std::sin(x) * std::pow(x, -p); }, k * kPi, (k + 1) * kPi, 1e-15);
  }
  for (int r = 0; r < 20; ++r) {
    for (std::size_t i = 0; i + 1 < partial.size(); ++i) partial[i] = (partial[i] + partial[i + 1]) / 2;
    partial.pop_back();
  }
  CHECK(partial.back() == doctest::Approx(sine_integral_closed_form(p)).epsilon(1e-10));
  CHECK_THROWS_AS(sine_integral(2.0), Error);
}

TEST_CASE("Levy form equals the closed form") {
  for (auto [p, g1, g2] : {std::tuple{1.28, 0.0, 0.6}, std::tuple{1.35, 0.2, 0.5}, std::tuple{1.7, 0.9, 0.1}}) {
    double worst = 0;
    for (double u = -10; u <= 10.0001; u += 0.25) worst = std::max(worst, std::abs(z_levy_cf(p, g1, g2, u) - z_closed_form_cf(p, g1, g2, u)));
    CHECK(worst <= 1e-5);
    CHECK(z_levy_cf(p, g1, g2, 0.0) == cplx(1.0));
    for (double u : {0.3, 2.5}) CHECK(std::abs(z_levy_cf(p, g1, g2, -u) - std::conj(z_levy_cf(p, g1, g2, u))) <= 1e-13);
  }
  CHECK_THROWS_AS(z_levy_cf(1.35, 0.0, 0.0, 1.0), Error);
  CHECK_THROWS_AS(z_levy_cf(2.1, 0.1, 0.1, 1.0), Error);
}

TEST_CASE("Theorem 2/3 marginal") {
  const double p = 1.28;
  auto m = thm23_marginal(p, 0.3, 0.3, 0.0, 1.0);
  CHECK(m.law.skew == 0.0);
  CHECK(m.drift == 0.0);
  // c-bar carries the (gamma2 - gamma1)/(gamma2 + gamma1) prefactor
  const auto g = gammas_and_cbar(p, 0.5, 0.5, 0.4, -0.4);
  CHECK(thm23_marginal(p, g.gamma1, g.gamma2, g.cBar, 0.5).drift == 0.0);

  const auto L = Thm23Limit::make(p, 0.1, 0.5, 1.7);
  CHECK(L.sineIntegral > 0);
  CHECK(L.marginal(0.4).scale / L.marginal(1.0).scale == doctest::Approx(std::pow(0.4, 1 / p)).epsilon(1e-14));
  m = thm23_marginal(p, 0.1, 0.5, 1.7, 0.4);
  CHECK(m.law.skew == doctest::Approx(4.0 / 6.0).epsilon(1e-15));
  CHECK(m.drift == doctest::Approx(std::pow(0.6, 1 / p) * 1.7 * std::pow(0.4, 1 / p)).epsilon(1e-14));
  CHECK(m.law.shift == m.drift);
  // the cf of (g1+g2)^{1/p} Z_t equals the Levy-form cf at t with rescaled u, less the drift
  for (double u : {-2.0, 0.6}) {
    const double c = std::pow(0.6, 1 / p);
    const cplx lhs = stable_cf(m.law, u) * std::exp(cplx(0, -u * m.drift));
    const cplx z1 = z_closed_form_cf(p, 0.1, 0.5, c * std::pow(0.4, 1 / p) * u);
    const double b = 4.0 / 6.0;
    const cplx noDrift = z1 * std::exp(cplx(0, -c * std::pow(0.4, 1 / p) * u * b * (cbar_bracket(p) - 1 / (p - 1))));
    CHECK(std::abs(lhs - noDrift) <= 1e-10);
  }
  CHECK_THROWS_AS(thm23_marginal(p, 0.0, 0.0, 0.0, 1.0), Error);
}

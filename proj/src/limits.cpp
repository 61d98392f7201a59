#include "lmf/limits.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "lmf/functionals.hpp"

namespace lmf {

namespace {

void check_lfsm(double alpha, double beta, double t) {
  if (!(alpha > 1.0 && alpha <= 2.0 && beta > 1.0 / alpha && beta < 1.0))
    fail(ErrorCode::Regime, "LFSM kernel needs 1 < alpha <= 2 and 1/alpha < beta < 1");
  if (!(t >= 0.0) || !std::isfinite(t)) fail(ErrorCode::InvalidArgument, "LFSM kernel: t must be >= 0");
}

void check_p(double p) {
  if (!(p > 1.0 && p < 2.0)) fail(ErrorCode::Regime, "alpha*beta must lie in (1,2)");
}

double sinc(double y) { return std::abs(y) < 1e-4 ? 1 - y * y / 6 : std::sin(y) / y; }

// (t+v)^g - v^g without cancellation for large v
double kernel_diff(double g, double t, double v) {
  if (v == 0.0) return std::pow(t, g);
  return std::pow(v, g) * std::expm1(g * std::log1p(t / v));
}

}  // namespace

double lfsm_kernel_scale(double alpha, double beta, double t) {
  check_lfsm(alpha, beta, t);
  if (t == 0.0) return 0.0;
  const double g = 1.0 - beta;
  const double present = std::pow(t, g * alpha + 1) / (g * alpha + 1);

  auto f = [&](double v) { return std::pow(kernel_diff(g, t, v), alpha); };
  double lo = 1e-12 * t;
  double past = lo * f(0.0);
  const double V = 1e6 * t;
  while (lo < V) {
    past += gauss_legendre20(f, lo, 2 * lo);
    lo *= 2;
  }
  // (t+v)^g - v^g = g t v^{g-1} (1 + c1 x + c2 x^2 + ...), x = t/v
  const double c1 = (g - 1) / 2, c2 = (g - 1) * (g - 2) / 6;
  const double e1 = alpha * c1, e2 = alpha * c2 + alpha * (alpha - 1) / 2 * c1 * c1;
  const double ab = alpha * beta;
  double tail = 0;
  const double coef[3] = {1.0, e1, e2};
  for (int k = 0; k < 3; ++k) tail += coef[k] * std::pow(t, k) * std::pow(lo, 1 - ab - k) / (ab + k - 1);
  past += std::pow(g * t, alpha) * tail;
  return std::pow(present + past, 1 / alpha);
}

double lfsm_kernel_scale_exp_sinh(double alpha, double beta, double t) {
  check_lfsm(alpha, beta, t);
  if (t == 0.0) return 0.0;
  const double g = 1.0 - beta;
  boost::math::quadrature::tanh_sinh<double> ts;
  const double present = ts.integrate([&](double s) { return std::pow(t - s, g * alpha); }, 0.0, t, 1e-14);
  boost::math::quadrature::exp_sinh<double> es;
  double err = 0;
  const double past = es.integrate([&](double v) { return std::pow(kernel_diff(g, t, v), alpha); }, 1e-14, &err);
  return std::pow(present + past, 1 / alpha);
}

Thm1Limit Thm1Limit::make(double alpha, double beta, double sigma1, double sigma2, double cTilde) {
  check_lfsm(alpha, beta, 1.0);
  if (!(sigma1 >= 0 && sigma2 >= 0 && sigma1 + sigma2 > 0))
    fail(ErrorCode::InvalidArgument, "tail constants must be >= 0 with positive sum");
  if (!std::isfinite(cTilde)) fail(ErrorCode::InvalidArgument, "c-tilde must be finite");
  Thm1Limit L;
  L.alpha = alpha;
  L.beta = beta;
  L.skew = (sigma2 - sigma1) / (sigma1 + sigma2);
  L.cTilde = cTilde;
  L.kernelScale1 = lfsm_kernel_scale(alpha, beta, 1.0);
  return L;
}

double Thm1Limit::kernel_scale(double t) const {
  if (!(t >= 0.0)) fail(ErrorCode::InvalidArgument, "t must be >= 0");
  return t == 0.0 ? 0.0 : std::pow(t, 1 / alpha + 1 - beta) * kernelScale1;
}

StableLaw Thm1Limit::marginal(double t) const {
  StableLaw law;
  law.alpha = alpha;
  law.scale = std::abs(cTilde) * kernel_scale(t);
  // g_t >= 0 for beta < 1, so the driver's skew passes through with the sign of cTilde
  law.skew = cTilde > 0 ? skew : (cTilde < 0 ? -skew : 0.0);
  law.shift = 0.0;
  law.validate();
  return law;
}

StableLaw thm1_marginal(double alpha, double beta, double sigma1, double sigma2, double cTilde, double t) {
  return Thm1Limit::make(alpha, beta, sigma1, sigma2, cTilde).marginal(t);
}

double sine_integral_closed_form(double p) {
  if (!(p > 0.0 && p < 2.0)) fail(ErrorCode::Domain, "sine integral needs 0 < p < 2");
  if (p == 1.0) return kPi / 2;
  return boost::math::tgamma(1 - p) * std::cos(kPi * p / 2);
}

double sine_integral(double p) {
  if (!(p > 0.0 && p < 2.0)) fail(ErrorCode::Domain, "sine integral needs 0 < p < 2");
  double s = integrate_ts([&](double x) { return sinc(x) * std::pow(x, 1 - p); }, 0.0, kPi, 1e-14);
  constexpr int kPanels = 64;
  for (int k = 1; k <= kPanels; ++k)
    s += gauss_legendre20([&](double x) { return std::sin(x) * std::pow(x, -p); }, k * kPi, (k + 1) * kPi);
  // int_X^inf sin x x^-p dx = cos X X^-p (1 - p(p+1)/X^2 + ...) at sin X = 0
  const double X = (kPanels + 1) * kPi;
  const double cosX = (kPanels + 1) % 2 == 0 ? 1.0 : -1.0;
  double term = 1, series = 1;
  for (int k = 0; k < 6; ++k) {
    term *= -(p + 2 * k) * (p + 2 * k + 1) / (X * X);
    series += term;
  }
  return s + cosX * std::pow(X, -p) * series;
}

namespace {

// int_1^inf e^{iux} x^-q dx, u > 0, q > 1
cplx oscillatory_tail(double u, double q) {
  const double half = kPi / u;
  const double X = std::max(400.0 / u, 2.0);
  cplx s = 0;
  double a = 1.0;
  while (a < X) {
    const double b = std::min({a + half, 2 * a, X});
    // at most half a period and a factor 2 in x per panel: 20 nodes resolve it
    s += gauss_legendre20_c([&](double x) { return std::exp(cplx(0, u * x)) * std::pow(x, -q); }, a, b);
    a = b;
  }
  // integration by parts: -(e^{iuX}/(iu)) sum_k (q)_k / ((iu)^k X^{q+k})
  const cplx iu(0, u);
  cplx term = std::exp(cplx(0, u * X)) * std::pow(X, -q) / iu, series = term;
  for (int k = 0; k < 12; ++k) {
    term *= (q + k) / (iu * X);
    series += term;
  }
  return s - series;
}

// (sin y - y) / y^3, accurate for small y
double sin_minus_id_cubed(double y) {
  const double y2 = y * y;
  if (std::abs(y) < 1e-2) return -1.0 / 6 + y2 * (1.0 / 120 - y2 / 5040);
  return (std::sin(y) - y) / (y2 * y);
}

// int_0^inf (e^{iux} - 1 - iux/(x^2+1)) x^{-p-1} dx for u > 0
cplx levy_integral(double p, double u) {
  // [0, 1]: tanh-sinh near the origin, Gauss-Kronrod once oscillation starts
  auto re = [&](double x) {
    const double sc = sinc(u * x / 2);
    return -0.5 * u * u * sc * sc * std::pow(x, 1 - p);
  };
  auto im = [&](double x) { return (u * u * u * sin_minus_id_cubed(u * x) + u / (1 + x * x)) * std::pow(x, 2 - p); };
  const double m = std::min(1.0, 1.0 / u);
  double re0 = integrate_ts(re, 0.0, m, 1e-10), im0 = integrate_ts(im, 0.0, m, 1e-10);
  if (m < 1.0) {
    re0 += integrate_gk(re, m, 1.0, 1e-10);
    im0 += integrate_gk(im, m, 1.0, 1e-10);
  }
  const cplx osc = oscillatory_tail(u, p + 1);
  // int_1^inf x^-p/(1+x^2) dx = int_0^1 y^p/(1+y^2) dy
  const double comp = integrate_ts([&](double y) { return std::pow(y, p) / (1 + y * y); }, 0.0, 1.0, 1e-14);
  return cplx(re0 + osc.real() - 1 / p, im0 + osc.imag() - u * comp);
}

}  // namespace

cplx z_levy_cf(double p, double gamma1, double gamma2, double u) {
  check_p(p);
  if (!(gamma1 >= 0 && gamma2 >= 0 && gamma1 + gamma2 > 0))
    fail(ErrorCode::Degenerate, "gamma1 + gamma2 must be positive");
  if (u == 0.0) return 1.0;
  const double w2 = gamma2 / (gamma1 + gamma2), w1 = gamma1 / (gamma1 + gamma2);
  const double i1 = integrate_ts([&](double y) { return std::pow(y, p) / (1 + y * y); }, 0.0, 1.0, 1e-14);
  const double i2 = integrate_ts([&](double x) { return std::pow(x, 2 - p) / (1 + x * x); }, 0.0, 1.0, 1e-14);
  const cplx L = levy_integral(p, std::abs(u));
  const cplx pos = u > 0 ? L : std::conj(L);  // positive jumps at frequency u
  const cplx neg = std::conj(pos);            // negative jumps: x -> -x
  const cplx expo = cplx(0, u * (w2 - w1) * p * (i1 - i2)) + w2 * p * pos + w1 * p * neg;
  return std::exp(expo);
}

cplx z_closed_form_cf(double p, double gamma1, double gamma2, double u) {
  check_p(p);
  if (!(gamma1 >= 0 && gamma2 >= 0 && gamma1 + gamma2 > 0))
    fail(ErrorCode::Degenerate, "gamma1 + gamma2 must be positive");
  const double b = (gamma2 - gamma1) / (gamma2 + gamma1);
  const double drift = b * (cbar_bracket(p) - 1 / (p - 1));
  const double S = sine_integral(p);
  const double sg = u > 0 ? 1.0 : (u < 0 ? -1.0 : 0.0);
  const double mag = S * std::pow(std::abs(u), p);
  return std::exp(cplx(-mag, u * drift + mag * b * sg * std::tan(kPi * p / 2)));
}

Thm23Limit Thm23Limit::make(double alphaBeta, double gamma1, double gamma2, double cBar) {
  check_p(alphaBeta);
  if (!(gamma1 >= 0 && gamma2 >= 0)) fail(ErrorCode::InvalidArgument, "gammas must be >= 0");
  if (!(gamma1 + gamma2 > 0)) fail(ErrorCode::Degenerate, "gamma1 + gamma2 = 0: degenerate limit");
  if (!std::isfinite(cBar)) fail(ErrorCode::InvalidArgument, "c-bar must be finite");
  Thm23Limit L;
  L.alphaBeta = alphaBeta;
  L.gamma1 = gamma1;
  L.gamma2 = gamma2;
  L.cBar = cBar;
  L.sineIntegral = sine_integral(alphaBeta);
  return L;
}

double Thm23Limit::drift(double t) const {
  if (!(t >= 0.0)) fail(ErrorCode::InvalidArgument, "t must be >= 0");
  const double p = alphaBeta;
  return std::pow(gamma1 + gamma2, 1 / p) * cBar * std::pow(t, 1 / p);
}

StableLaw Thm23Limit::marginal(double t) const {
  const double p = alphaBeta;
  StableLaw law;
  law.alpha = p;
  law.scale = std::pow(gamma1 + gamma2, 1 / p) * std::pow(t * sineIntegral, 1 / p);
  law.skew = skew();
  law.shift = drift(t);
  law.validate();
  return law;
}

Thm23Marginal thm23_marginal(double alphaBeta, double gamma1, double gamma2, double cBar, double t) {
  const auto L = Thm23Limit::make(alphaBeta, gamma1, gamma2, cBar);
  return {L.marginal(t), L.drift(t)};
}

}  // namespace lmf

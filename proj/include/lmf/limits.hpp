#pragma once

#include "lmf/numeric.hpp"
#include "lmf/stable.hpp"

namespace lmf {

// (int |g_t(s)|^alpha ds)^{1/alpha} for g_t(s) = (t-s)^{1-beta} - (-s)^{1-beta} 1{s<0}.
// Gauss-Legendre panels on a geometric grid plus an asymptotic series for the
// far past. Requires 1/alpha < beta < 1 and t >= 0.
double lfsm_kernel_scale(double alpha, double beta, double t);
// Same quantity by exp-sinh quadrature over the whole half-line (reference route).
double lfsm_kernel_scale_exp_sinh(double alpha, double beta, double t);

struct Thm1Limit {
  double alpha = 0, beta = 0;
  double skew = 0;          // (sigma2 - sigma1) / (sigma1 + sigma2)
  double cTilde = 0;
  double kernelScale1 = 0;  // lfsm_kernel_scale at t = 1

  static Thm1Limit make(double alpha, double beta, double sigma1, double sigma2, double cTilde);
  double kernel_scale(double t) const;  // t^{1/alpha + 1 - beta} kernelScale1
  // Marginal of cTilde Z_t; scale 0 (degenerate at 0) when cTilde = 0.
  StableLaw marginal(double t) const;
};

StableLaw thm1_marginal(double alpha, double beta, double sigma1, double sigma2, double cTilde, double t);

// int_0^inf sin(x) x^-p dx for 0 < p < 2: quadrature over half periods with an
// integration-by-parts tail.
double sine_integral(double p);
// Gamma(1-p) cos(pi p/2)
double sine_integral_closed_form(double p);

// Characteristic function of the stable variable with Levy measure
// p (gamma2 x^{-p-1} dx on x > 0, gamma1 |x|^{-p-1} dx on x < 0) / (gamma1 + gamma2),
// compensator x/(x^2+1) and the drift term, each integral by quadrature.
cplx z_levy_cf(double p, double gamma1, double gamma2, double u);
// The same law written as drift plus a stable cf with scale^p = sine_integral(p).
cplx z_closed_form_cf(double p, double gamma1, double gamma2, double u);

struct Thm23Limit {
  double alphaBeta = 0;
  double gamma1 = 0, gamma2 = 0, cBar = 0;
  double sineIntegral = 0;

  static Thm23Limit make(double alphaBeta, double gamma1, double gamma2, double cBar);
  double skew() const { return (gamma2 - gamma1) / (gamma2 + gamma1); }
  // Law of (gamma2 + gamma1)^{1/p} (cBar t^{1/p} + Z_t); shift carries the drift.
  StableLaw marginal(double t) const;
  double drift(double t) const;
};

struct Thm23Marginal {
  StableLaw law;
  double drift;
};
Thm23Marginal thm23_marginal(double alphaBeta, double gamma1, double gamma2, double cBar, double t);

}  // namespace lmf

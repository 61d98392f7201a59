#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "lmf/numeric.hpp"

namespace lmf {

// Slowly varying function in Karamata form l(x) = sigma exp(int_1^x eta(t)/t dt).
struct SlowlyVaryingSpec {
  enum class Kind { Zero, LogPower, Tabulated };
  Kind kind = Kind::Zero;
  double sigma = 1.0;
  // log-power: eta(t) = c1 (ln t)^{-a}, 0 < a <= 1. For a = 1 the integral is
  // based at e, giving l(x) = sigma (ln x)^{c1}.
  double c1 = 0.0;
  double a = 1.0;
  // tabulated: eta linear in ln t between knots, constant outside.
  std::vector<double> knots, etas;

  static SlowlyVaryingSpec zero(double sigma = 1.0);
  static SlowlyVaryingSpec log_power(double sigma, double c1, double a);
  static SlowlyVaryingSpec tabulated(double sigma, std::vector<double> knots, std::vector<double> etas);

  void validate() const;
  bool is_constant() const { return kind == Kind::Zero; }
  double eta(double t) const;
  // ln l(x); x > 1.
  double log_value(double x) const;
  // ln l(e^s); s > 0. Usable where e^s overflows.
  double log_value_at_log(double s) const;
  std::string describe() const;
};

double sv_eval(const SlowlyVaryingSpec& spec, double x);

struct EtaMonitor {
  double threshold;             // |eta(t)| <= 1 for t >= threshold
  std::vector<double> doubling;  // |eta| at threshold * 2^k, k = 0..
  bool decaying;                 // non-increasing along the doubling grid tail
};
EtaMonitor eta_monitor(const SlowlyVaryingSpec& spec);

// x^{1/beta} l^{1/beta}(x^{1/beta})
double ell_beta(const SlowlyVaryingSpec& spec, double beta, double x);

// Nondecreasing map g on (A, inf) with generalized inverse
// g^<-(x) = inf{s > A : g(s) >= x}. The threshold A is the last
// non-monotone point of a log grid over [s_lo, s_hi], plus one grid step.
class MonotoneMap {
 public:
  MonotoneMap(std::function<double(double)> g, double s_lo, double s_hi, int per_decade = 1024);
  double operator()(double s) const { return g_(s); }
  double inverse(double x) const;  // +inf when x exceeds the tabulated range
  double threshold() const { return A_; }
  double range_max() const { return gv_.back(); }

 private:
  std::function<double(double)> g_;
  double A_;
  std::vector<double> sv_, gv_;
};

// Fixed point y = h(N^{1/alpha} y^{1/alpha}).
struct HAlphaResult {
  double value;
  double residual;
  int iterations;
};
HAlphaResult solve_h_alpha(const SlowlyVaryingSpec& h, double alpha, double N);

// N^{1+1/alpha-beta} l(N) h_alpha(N)^{1/alpha}
double norm_thm1(double alpha, double beta, const SlowlyVaryingSpec& ell, const SlowlyVaryingSpec& h, double N);

// ((l_beta^<-)^alpha / h(l_beta^<-))^<-(N), built from two nested inversions.
class Thm23Normalizer {
 public:
  Thm23Normalizer(double alpha, double beta, const SlowlyVaryingSpec& ell, const SlowlyVaryingSpec& h);
  double operator()(double N) const;
  // The composed forward map x -> (l_beta^<-(x))^alpha / h(l_beta^<-(x)).
  double forward(double x) const;

 private:
  double alpha_, beta_;
  SlowlyVaryingSpec ell_, h_;
  std::unique_ptr<MonotoneMap> inner_, outer_;
};
double norm_thm23(double alpha, double beta, const SlowlyVaryingSpec& ell, const SlowlyVaryingSpec& h, double N);

// l(x l^{1/beta}(x)) / l(x) at each x.
std::vector<double> check_ell_ratio(const SlowlyVaryingSpec& ell, double beta, const std::vector<double>& xs);

}  // namespace lmf

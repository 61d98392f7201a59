#pragma once

#include <array>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "lmf/innovations.hpp"
#include "lmf/linproc.hpp"
#include "lmf/numeric.hpp"

namespace lmf {

// K as a linear combination of gaussian bumps e^{-x^2}, odd bumps x e^{-x^2}
// and indicators of [lo, hi].
struct KTerm {
  enum class Kind { GaussianBump, OddBump, Indicator };
  Kind kind = Kind::GaussianBump;
  double weight = 1.0;
  double lo = 0.0, hi = 1.0;  // indicator only
};

struct FunctionalSpec {
  std::vector<KTerm> terms;

  static FunctionalSpec gaussian_bump(double weight = 1.0);
  static FunctionalSpec odd_bump(double weight = 1.0);
  static FunctionalSpec indicator(double lo, double hi, double weight = 1.0);
  // Parses "gaussian-bump", "odd-bump", "indicator[a,b]" and weighted sums
  // such as "2*gaussian-bump + -0.5*odd-bump".
  static FunctionalSpec parse(const std::string& text);

  void validate() const;
  std::string describe() const;
  FunctionalSpec scaled(double lambda) const;
  FunctionalSpec operator+(const FunctionalSpec& other) const;

  double operator()(double x) const;
  bool smooth() const;  // no indicator terms
  bool zero() const;    // no terms or all weights 0
  bool even() const;    // only gaussian bumps
  // int x^k K(x) dx
  double moment(int k) const;
  // int |K|, by quadrature for mixed combinations
  double abs_integral() const;
};

// int e^{ixu} K(x) dx in closed form.
cplx k_hat(const FunctionalSpec& spec, double u);

// K_inf(x) = E K(X_1 + x) for a truncated linear process, tabulated once.
//
// Smooth terms: trapezoid sums of K^(u) phi(-u) on a uniform u-grid, inverted
// by a real FFT onto a uniform x-grid of period P. The periodization error is
// removed with the power-law tail model of K_inf; cubic Hermite interpolation
// uses the FFT derivative. Beyond |x| = P/4 the tail model is used.
// Indicator terms go through LinearProcess::interval_probability.
class KInfinity {
 public:
  struct Options {
    double step = 1.0 / 32;
    double period = 32768;
  };
  // `process` must outlive this object.
  KInfinity(const FunctionalSpec& spec, const LinearProcess& process);
  KInfinity(const FunctionalSpec& spec, const LinearProcess& process, Options opt);

  const FunctionalSpec& spec() const { return spec_; }
  const LinearProcess& process() const { return *lp_; }

  double operator()(double x) const;
  double derivative(double x) const;
  // K_inf(x) - K_inf(0) without cancellation near 0.
  double increment(double x) const;
  // K_inf^(p)(0), p = 0..6
  const std::array<double, 7>& taylor() const { return taylor_; }
  static constexpr double kTaylorRadius = 0.05;  // increment() uses the Taylor sum below this

  // Fourier quadrature at a single point; reference route.
  double direct(double x) const;
  // Power-law tail model of K_inf and its slope (valid for large |x|).
  double tail_model(double x) const;
  double tail_model_slope(double x) const;
  // int_X^inf tail_model(sign u) u^-r du, X > 0
  double tail_integral(double X, double sign, double r) const;
  double x_core() const { return x_core_; }
  double step() const { return h_; }

  // E K_inf(a e) for the innovation e, by quadrature against its density.
  double expect_scaled(double a) const;
  // E K_inf(a e) - K_inf(0)
  double expect_increment(double a) const;

 private:
  void build_grid(Options opt);
  double smooth_value(double x) const;
  double smooth_slope(double x) const;
  double indicator_value(double x) const;
  double indicator_slope(double x) const;

  FunctionalSpec spec_, smooth_part_;
  std::vector<KTerm> indicators_;
  const LinearProcess* lp_;
  double h_ = 0, x_core_ = 0;
  std::vector<double> val_, der_;  // smooth part at x = (k - half) h, k = 0..2 half
  std::size_t half_ = 0;
  std::array<double, 7> taylor_{};
  // tail model: f_X(z) ~ c_pm |z|^-(alpha+1), moments of the smooth part
  double tail_s_ = 0, tail_left_ = 0, tail_right_ = 0;
  std::array<double, 4> mom_{};
};

// -int K df = K_inf'(0); returns int K df.
double int_K_df(const KInfinity& kinf);
// Same, from the Fourier representation by adaptive quadrature (reference route).
double int_K_df_direct(const KInfinity& kinf);

// (1/(1-beta)) (s1+s2)^{1/alpha} (Gamma(1-alpha) cos(pi alpha/2))^{1/alpha} (-intKdf)
double c_tilde(double alpha, double beta, double sigma1, double sigma2, double intKdf);
// The displayed constant with |Gamma(alpha-1) cos(pi alpha/2)|^{1/alpha}.
double c_tilde_as_printed(double alpha, double beta, double sigma1, double sigma2, double intKdf);

// C_K^{+-} = (1/beta) int_0^inf (K_inf(+-u) - K_inf(0)) u^{-1/beta-1} du.
std::pair<double, double> c_k_pm(const KInfinity& kinf, double beta);
// Same integral in the original variable t, int_0^inf (K_inf(+-t^-beta) - K_inf(0)) dt.
std::pair<double, double> c_k_pm_t_domain(const KInfinity& kinf, double beta);

struct GammaConstants {
  double gamma1, gamma2, cBar, bracket;
};
// The bracket of c-bar by Gauss-Kronrod; throws Degenerate when gamma1 + gamma2 = 0.
GammaConstants gammas_and_cbar(double alphaBeta, double sigma1, double sigma2, double cPlus, double cMinus);
double cbar_bracket(double alphaBeta);
// Independent discretization of the bracket (composite midpoint in substituted
// variables).
double cbar_bracket_midpoint(double alphaBeta);

struct LimitConstants {
  double intKdf = 0;
  double cTilde = 0, cTildeAsPrinted = 0;
  double cPlus = 0, cMinus = 0;
  double gamma1 = 0, gamma2 = 0, cBar = 0;
  double kInf0 = 0;  // K_inf(0), the centering constant
};

// eta_K(x) = sum_j (K_inf(a_j x) - E K_inf(a_j e)).
//
// Explicit terms for j <= J; the terms with a_j |x| below the Taylor radius are
// summed from suffix power sums of a_j. E K_inf(a e) - K_inf(0) is tabulated in
// ln a and interpolated.
class EtaK {
 public:
  EtaK(const KInfinity& kinf, const CoefficientSpec& coefs);

  std::size_t J() const { return a_.size(); }
  const std::vector<double>& a() const { return a_; }

  // Sum over j <= J.
  double truncated(double x) const;
  // Sum over lo <= j <= hi (1-based, hi <= J); 0 when lo > hi.
  double range(double x, std::size_t lo, std::size_t hi) const;
  struct Value {
    double value;            // truncated + tail_estimate
    double truncated;
    double tail_estimate;    // integral-comparison estimate of sum_{j>J}
    double remainder_bound;  // bound on |sum_{j>J}| from truncation budgets
  };
  // Full series; throws Regime when the series diverges (beta <= 1 with
  // K_inf'(0) != 0) and Convergence when remainder_bound > tol.
  Value full(double x, double tol = INFINITY) const;

  // E K_inf(a_j e) - K_inf(0) as used (interpolated), and its suffix sums.
  double d(double a) const;
  // The same for j > n, n in [0, J]: sum_{j=n+1}^{J} d(a_j).
  double d_suffix(std::size_t n) const { return d_suffix_[n]; }
  // sum_{j=n+1}^{J} a_j^p, p = 1..6
  double a_suffix(int p, std::size_t n) const { return a_suffix_[p - 1][n]; }
  // Index j* (1-based) from which a_i |x| < Taylor radius for all i >= j*.
  std::size_t taylor_start(double x) const;
  const KInfinity& kinf() const { return *kinf_; }

 private:
  double d_fit(double a) const;

  const KInfinity* kinf_;
  CoefficientSpec spec_;
  std::vector<double> a_;
  std::vector<double> amax_suffix_;  // max_{i >= j} a_i, 0-based
  std::array<std::vector<double>, 6> a_suffix_;
  std::vector<double> d_suffix_;
  // table of d on s = ln a
  double s_lo_ = 0, s_step_ = 0;
  std::vector<double> d_table_;
  // d(a) ~ c1 a^alpha + c2 a^q below the table
  double fit_c1_ = 0, fit_c2_ = 0, fit_q_ = 0;
  double holder_c_ = 0, holder_exp_ = 0;  // |d(a)| <= holder_c a^holder_exp on the table
};

}  // namespace lmf

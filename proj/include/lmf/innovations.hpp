#pragma once

#include <array>
#include <string>
#include <vector>

#include "lmf/numeric.hpp"
#include "lmf/regvar.hpp"

namespace lmf {

enum class InnovationMode { Symmetric, Centered, Raw };

struct InnovationSpec {
  double alpha = 1.5;
  double sigma1 = 0.5;  // left tail constant:  P(e <= -x) = sigma1 x^-alpha h(x)
  double sigma2 = 0.5;  // right tail constant: P(e > x)   = sigma2 x^-alpha h(x)
  SlowlyVaryingSpec h;  // default h == 1
  double x0 = 2.0;      // tails are exact beyond x0
  InnovationMode mode = InnovationMode::Symmetric;
  double delta = 1.0;   // witness exponent for |cf(u)| <= c / (1 + |u|^delta)

  void validate() const;
};

std::string to_string(InnovationMode m);
InnovationMode innovation_mode_from_string(const std::string& s);

// Innovation family: Pareto-type tails beyond x0 and a quartic density on
// [-x0, x0] matched in value and slope at +-x0 and normalized to total mass 1.
class Innovations {
 public:
  explicit Innovations(const InnovationSpec& spec);

  const InnovationSpec& spec() const { return spec_; }
  double shift() const { return shift_; }  // subtracted from the raw variable (its mean when centered)

  double density(double x) const;
  double cdf(double x) const;
  // P(|e| > x), x >= 0
  double abs_tail(double x) const;
  double quantile(double p) const;
  double sample(Rng& rng) const;

  // Characteristic function: series / closed-form route (h == 1) or
  // Fourier quadrature of the density (h != 1).
  cplx cf(double u) const;
  // Fourier quadrature of the density; independent of the series route.
  cplx cf_quadrature(double u) const;

  // Small-v expansion of the unshifted cf (h == 1 only):
  // cf_raw(v) = sum_k c_k (iv)^k / k! + d v^alpha for v > 0.
  bool closed_form_cf() const { return unit_h_; }
  const std::vector<double>& series_coefficients() const { return series_c_; }
  cplx series_alpha_coefficient() const { return series_d_; }

  // Raw moments of the core polynomial piece: int_{-x0}^{x0} x^k p(x) dx.
  double core_moment(int k) const;
  std::array<double, 5> core_coefficients() const { return b_; }

  struct BoundFit {
    double C;          // sup over the grid of lhs / (|l|^a' ^ 1)
    double small_end;  // the same ratio at the smallest grid point
  };
  // |1 - cf(l)| and 1 - |cf(l)|^2 against (|l|^a' ^ 1) on l in [1e-3, 1e3].
  BoundFit fit_bound_abs(double alpha_prime) const;
  BoundFit fit_bound_sq(double alpha_prime) const;
  // sup over |u| in [1, 1e4] of |cf(u)| (1 + |u|^delta).
  double decay_witness() const;

 private:
  double raw_cdf(double x) const;
  double raw_quantile(double p, double q) const;
  double core_solve(double target) const;              // x in [-x0, x0] with int_{-x0}^x p = target
  double tail_survival(double sigma, double y) const;  // sigma y^-alpha h(y)
  double tail_density(double sigma, double y) const;
  double tail_density_slope(double sigma, double y) const;
  double tail_inverse(double sigma, double q) const;   // y >= x0 with survival q
  double poly(double x) const;
  double poly_integral(double x) const;                // int_{-x0}^x p
  cplx raw_cf_series(double v) const;                  // v > 0, v x0 <= 8
  cplx raw_cf_large(double v) const;                   // v > 0
  cplx raw_cf(double v) const;

  InnovationSpec spec_;
  bool unit_h_;
  std::array<double, 5> b_{};
  double left_mass_ = 0, right_mass_ = 0;  // tail masses beyond -x0 and x0
  double shift_ = 0;
  std::vector<double> core_table_;  // core quantiles on a uniform grid in probability
  double core_step_ = 0;
  std::vector<double> series_c_;  // coefficients c_k of the small-v expansion
  cplx series_d_;                 // coefficient of v^alpha
};

}  // namespace lmf

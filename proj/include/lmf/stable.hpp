#pragma once

#include <memory>
#include <vector>

#include "lmf/numeric.hpp"

namespace lmf {

// Stable law with characteristic function
//   exp(i u mu - scale^alpha |u|^alpha (1 - i skew sgn(u) w(u, alpha))),
// w = tan(pi alpha / 2) for alpha != 1 and (2/pi) ln|u| for alpha = 1.
// scale = 0 denotes the point mass at `shift`.
struct StableLaw {
  double alpha = 2.0;
  double scale = 1.0;
  double skew = 0.0;
  double shift = 0.0;

  void validate() const;
  bool degenerate() const { return scale == 0.0; }
  // Skew actually in effect (0 for the Gaussian case).
  double effective_skew() const { return alpha == 2.0 ? 0.0 : skew; }
};

cplx stable_cf(const StableLaw& law, double u);

// Chambers-Mallows-Stuck transform of a uniform angle and an exponential.
double stable_sample(const StableLaw& law, Rng& rng);

// Gil-Pelaez inversion. Absolute error below 1e-6 on |x - shift| <= 50 scale;
// beyond that the tail is taken from the convergent (alpha < 1) or asymptotic
// (alpha > 1) power series of the stable tail.
double stable_cdf(const StableLaw& law, double x);
// Density by the same inversion (used for the interpolating table).
double stable_pdf(const StableLaw& law, double x);

// Tabulated CDF for evaluating many points against one law: piecewise cubic
// Hermite in the standardized variable on [-50, 50] using exact density
// values as slopes, with the series tails outside.
class StableCdfTable {
 public:
  explicit StableCdfTable(const StableLaw& law, double step = 0.05);
  double operator()(double x) const;
  double quantile(double p) const;
  const StableLaw& law() const { return law_; }

 private:
  double tail(double z) const;
  StableLaw law_;
  double step_;
  double zmax_;
  std::vector<double> F_, f_;
};

}  // namespace lmf

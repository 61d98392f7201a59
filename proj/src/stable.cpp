#include "lmf/stable.hpp"

#include <algorithm>
#include <cmath>

namespace lmf {

namespace {

constexpr double kTableEdge = 50.0;   // standardized |z| covered by quadrature
constexpr double kDecayCut = 36.0;    // v^alpha beyond which e^{-v^alpha} < 3e-16

double skew_factor(double alpha) { return std::tan(kPi * alpha / 2.0); }

// Phase of the standardized integrand, theta(v) = -v z + skew v^alpha w(v).
struct GpIntegrand {
  double alpha, skew, tanfac, z, log_scale;
  bool cauchy_log;  // alpha == 1 with skew != 0

  double phase(double v) const {
    if (cauchy_log) return -v * z + skew * v * (2.0 / kPi) * (std::log(v) - log_scale);
    return -v * z + skew * tanfac * std::pow(v, alpha);
  }
  // Upper bound of |theta'(v)| on [lo, lo + 1].
  double max_rate(double lo) const {
    if (cauchy_log)
      return std::abs(z) + std::abs(skew) * (2.0 / kPi) * (std::abs(std::log(std::max(lo, 1e-300)) - log_scale) + 2.0);
    const double p = alpha < 1.0 ? std::pow(std::max(lo, 1e-300), alpha - 1.0) : std::pow(lo + 1.0, alpha - 1.0);
    return std::abs(z) + std::abs(skew * tanfac) * alpha * p;
  }
};

struct CdfPdf {
  double cdf, pdf;  // pdf in standardized units
};

// Gil-Pelaez for the standardized variable z = (x - shift) / scale.
CdfPdf gil_pelaez(const StableLaw& law, double z) {
  const double a = law.alpha;
  const double eta = law.effective_skew();
  GpIntegrand g{a, eta, a == 1.0 ? 0.0 : skew_factor(a), z, std::log(law.scale), a == 1.0 && eta != 0.0};
  if (a == 2.0) g.tanfac = 0.0;

  auto sin_part = [&](double v) {
    if (v <= 0.0) {
      // limit of e^{-v^a} sin(theta)/v as v -> 0 (finite unless a <= 1 and skewed)
      if (eta == 0.0 || a > 1.0) return -z;
      return 0.0;
    }
    return std::exp(-std::pow(v, a)) * std::sin(g.phase(v)) / v;
  };
  auto cos_part = [&](double v) { return std::exp(-std::pow(v, a)) * std::cos(g.phase(v)); };

  const double vmax = std::pow(kDecayCut, 1.0 / a);
  const double v1 = std::min({1.0, 2.0 / (std::abs(z) + 1.0), vmax});

  double I_sin = integrate_ts(sin_part, 0.0, v1, 1e-9);
  double I_cos = integrate_ts(cos_part, 0.0, v1, 1e-9);

  const auto nodes = gl20_nodes();
  const auto weights = gl20_weights();
  double lo = v1;
  while (lo < vmax) {
    const double w = std::min(1.0, 2.0 / (g.max_rate(lo) + 1e-12));
    const double hi = std::min(vmax, lo + w);
    const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
    double s = 0.0, c = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double v = mid + half * nodes[i];
      const double damp = std::exp(-std::pow(v, a));
      const double th = g.phase(v);
      s += weights[i] * damp * std::sin(th) / v;
      c += weights[i] * damp * std::cos(th);
    }
    I_sin += s * half;
    I_cos += c * half;
    lo = hi;
  }
  return {0.5 - I_sin / kPi, I_cos / kPi};
}

// Tail series of the standardized law: P(Z > z) for z > 0 when `right`,
// P(Z < -z) otherwise. Convergent for alpha < 1, asymptotic for alpha > 1.
double tail_series(const StableLaw& law, double z, bool right) {
  const double a = law.alpha;
  const double eta = law.effective_skew();
  double phi0 = 0.0, lam = 1.0;
  if (a != 1.0 && a != 2.0) {
    const double t = eta * skew_factor(a);
    phi0 = std::atan(t);
    lam = std::sqrt(1.0 + t * t);
  }
  double rho = 0.5 * (1.0 + phi0 / (kPi * a / 2.0));
  if (!right) rho = 1.0 - rho;
  const double y = z / std::pow(lam, 1.0 / a);
  const double ly = std::log(y);
  double sum = 0.0, prev = INFINITY;
  for (int n = 1; n <= 80; ++n) {
    const double logmag = std::lgamma(n * a) - std::lgamma(n + 1.0) - n * a * ly;
    const double mag = std::exp(logmag);
    if (a > 1.0 && mag > prev) break;  // asymptotic series: stop at smallest term
    const double term = mag * std::sin(n * kPi * rho * a);
    sum += (n % 2 == 1 ? term : -term);
    if (mag < 1e-18) break;
    prev = mag;
  }
  return std::clamp(sum / kPi, 0.0, 1.0);
}

// Support edge for totally skewed laws with alpha < 1 (standardized units).
bool outside_support(const StableLaw& law, double z, double& value) {
  if (law.alpha < 1.0 && law.skew == 1.0 && z <= 0.0) {
    value = 0.0;
    return true;
  }
  if (law.alpha < 1.0 && law.skew == -1.0 && z >= 0.0) {
    value = 1.0;
    return true;
  }
  return false;
}

}  // namespace

void StableLaw::validate() const {
  if (!(alpha > 0.0 && alpha <= 2.0)) fail(ErrorCode::Domain, "stable law: alpha must lie in (0,2]");
  if (!(scale >= 0.0) || !std::isfinite(scale)) fail(ErrorCode::Domain, "stable law: scale must be >= 0");
  if (!(std::abs(skew) <= 1.0)) fail(ErrorCode::Domain, "stable law: |skew| must be <= 1");
  if (!std::isfinite(shift)) fail(ErrorCode::Domain, "stable law: shift must be finite");
}

cplx stable_cf(const StableLaw& law, double u) {
  if (u == 0.0) return 1.0;
  const double a = law.alpha;
  const double eta = law.effective_skew();
  const double au = std::abs(u);
  const double sg = u > 0 ? 1.0 : -1.0;
  double w;
  if (a == 1.0)
    w = (2.0 / kPi) * std::log(au);
  else
    w = a == 2.0 ? 0.0 : skew_factor(a);
  const double mag = std::pow(law.scale * au, a);
  // scale^a |u|^a (1 - i eta sgn w)
  return std::exp(cplx(-mag, u * law.shift + mag * eta * sg * w));
}

double stable_sample(const StableLaw& law, Rng& rng) {
  const double a = law.alpha;
  const double eta = law.effective_skew();
  if (a == 1.0 && eta != 0.0) fail(ErrorCode::Domain, "stable sampler: alpha = 1 requires skew = 0");
  const double V = kPi * (rng.uniform() - 0.5);
  const double W = rng.exponential();
  double X;
  if (a == 1.0) {
    X = std::tan(V);
  } else {
    const double t = eta * (a == 2.0 ? 0.0 : skew_factor(a));
    const double B = std::atan(t) / a;
    const double S = std::pow(1.0 + t * t, 1.0 / (2.0 * a));
    X = S * std::sin(a * (V + B)) / std::pow(std::cos(V), 1.0 / a) *
        std::pow(std::cos(V - a * (V + B)) / W, (1.0 - a) / a);
  }
  return law.scale * X + law.shift;
}

double stable_cdf(const StableLaw& law, double x) {
  if (law.degenerate()) return x >= law.shift ? 1.0 : 0.0;
  const double z = (x - law.shift) / law.scale;
  double edge;
  if (outside_support(law, z, edge)) return edge;
  if (law.alpha == 2.0) return 0.5 * std::erfc(-z / 2.0);
  const bool series_ok = !(law.alpha == 1.0 && law.skew != 0.0);
  if (series_ok && std::abs(z) > kTableEdge) {
    return z > 0 ? 1.0 - tail_series(law, z, true) : tail_series(law, -z, false);
  }
  // Snap to a 2^-40 lattice: removes roundoff-level wiggles (about 1e-16)
  // where the CDF is flat, far below the quadrature tolerance.
  return std::clamp(std::nearbyint(gil_pelaez(law, z).cdf * 0x1.0p40) * 0x1.0p-40, 0.0, 1.0);
}

double stable_pdf(const StableLaw& law, double x) {
  if (law.degenerate()) fail(ErrorCode::Degenerate, "density of a point mass");
  const double z = (x - law.shift) / law.scale;
  double edge;
  if (outside_support(law, z, edge)) return 0.0;
  if (law.alpha == 2.0) return std::exp(-z * z / 4.0) / (2.0 * std::sqrt(kPi)) / law.scale;
  return std::max(0.0, gil_pelaez(law, z).pdf) / law.scale;
}

StableCdfTable::StableCdfTable(const StableLaw& law, double step) : law_(law), step_(step), zmax_(kTableEdge) {
  law_.validate();
  if (law_.degenerate()) return;
  const auto n = static_cast<std::size_t>(std::llround(2.0 * zmax_ / step_)) + 1;
  F_.resize(n);
  f_.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double z = -zmax_ + static_cast<double>(k) * step_;
    double edge;
    if (outside_support(law_, z, edge)) {
      F_[k] = edge;
      f_[k] = 0.0;
    } else if (law_.alpha == 2.0) {
      F_[k] = 0.5 * std::erfc(-z / 2.0);
      f_[k] = std::exp(-z * z / 4.0) / (2.0 * std::sqrt(kPi));
    } else {
      const auto r = gil_pelaez(law_, z);
      F_[k] = std::clamp(r.cdf, 0.0, 1.0);
      f_[k] = std::max(0.0, r.pdf);
    }
  }
}

double StableCdfTable::tail(double z) const {
  if (law_.alpha == 2.0) return z > 0 ? 1.0 : 0.0;
  if (law_.alpha == 1.0 && law_.skew != 0.0) return stable_cdf(law_, law_.shift + law_.scale * z);
  return z > 0 ? 1.0 - tail_series(law_, z, true) : tail_series(law_, -z, false);
}

double StableCdfTable::operator()(double x) const {
  if (law_.degenerate()) return x >= law_.shift ? 1.0 : 0.0;
  const double z = (x - law_.shift) / law_.scale;
  if (std::isnan(z)) return NAN;
  if (z <= -zmax_ || z >= zmax_) {
    double edge;
    if (outside_support(law_, z, edge)) return edge;
    return tail(z);
  }
  const double pos = (z + zmax_) / step_;
  const auto k = std::min(static_cast<std::size_t>(pos), F_.size() - 2);
  const double s = pos - static_cast<double>(k);
  const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
  const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
  const double v = h00 * F_[k] + h10 * step_ * f_[k] + h01 * F_[k + 1] + h11 * step_ * f_[k + 1];
  return std::clamp(v, 0.0, 1.0);
}

double StableCdfTable::quantile(double p) const {
  if (!(p > 0.0 && p < 1.0)) fail(ErrorCode::Domain, "stable quantile: p must lie in (0,1)");
  if (law_.degenerate()) return law_.shift;
  double lo = law_.shift - law_.scale, hi = law_.shift + law_.scale;
  while ((*this)(lo) > p) lo = law_.shift - 2.0 * (law_.shift - lo);
  while ((*this)(hi) < p) hi = law_.shift + 2.0 * (hi - law_.shift);
  for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, std::abs(lo) + std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if ((*this)(mid) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace lmf

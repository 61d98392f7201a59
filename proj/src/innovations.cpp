#include "lmf/innovations.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <boost/math/quadrature/ooura_fourier_integrals.hpp>

namespace lmf {

namespace {

constexpr double kSeriesLimit = 8.0;  // series route for v x0 <= this
constexpr double kAsymptoticZ = 40.0;
constexpr int kSeriesTerms = 64;
constexpr int kCoreTable = 1024;  // quantile table intervals over the core mass

// E(z) = int_z^inf e^{iy} y^{-a} dy for z >= 8 (a > 1).
cplx oscillatory_tail(double a, double z) {
  cplx head = 0.0;
  if (z < kAsymptoticZ) {
    const int panels = static_cast<int>(std::ceil((kAsymptoticZ - z) / 1.5));
    const double w = (kAsymptoticZ - z) / panels;
    for (int k = 0; k < panels; ++k)
      head += gauss_legendre20_c([a](double y) { return std::exp(cplx(0, y)) * std::pow(y, -a); }, z + k * w,
                                 z + (k + 1) * w);
    z = kAsymptoticZ;
  }
  // i e^{iz} sum_k (-i)^k (a)_k z^{-a-k}, truncated at its smallest term
  cplx sum = 0.0, mi_pow = 1.0;
  double poch = 1.0, zp = std::pow(z, -a), prev = INFINITY;
  for (int k = 0; k < 200; ++k) {
    const double mag = poch * zp;
    if (mag > prev || mag < 1e-20) break;
    sum += mi_pow * mag;
    prev = mag;
    poch *= a + k;
    zp /= z;
    mi_pow *= cplx(0, -1);
  }
  return head + cplx(0, 1) * std::exp(cplx(0, z)) * sum;
}

double h_value(const SlowlyVaryingSpec& h, double y) { return h.is_constant() ? h.sigma : sv_eval(h, y); }
double h_eta(const SlowlyVaryingSpec& h, double y) { return h.is_constant() ? 0.0 : h.eta(y); }

}  // namespace

std::string to_string(InnovationMode m) {
  switch (m) {
    case InnovationMode::Symmetric:
      return "symmetric";
    case InnovationMode::Centered:
      return "centered";
    case InnovationMode::Raw:
      return "raw";
  }
  return "raw";
}

InnovationMode innovation_mode_from_string(const std::string& s) {
  if (s == "symmetric") return InnovationMode::Symmetric;
  if (s == "centered") return InnovationMode::Centered;
  if (s == "raw") return InnovationMode::Raw;
  fail(ErrorCode::Config, "unknown innovation mode '" + s + "'");
}

void InnovationSpec::validate() const {
  if (!(alpha > 0.0 && alpha < 2.0)) fail(ErrorCode::Domain, "innovations: alpha must lie in (0,2)");
  if (!(sigma1 >= 0.0 && sigma2 >= 0.0 && sigma1 + sigma2 > 0.0))
    fail(ErrorCode::Domain, "innovations: tail constants must be >= 0 with positive sum");
  if (!(x0 > 0.0) || !std::isfinite(x0)) fail(ErrorCode::Domain, "innovations: x0 must be positive");
  if (!h.is_constant() && !(x0 > 1.0)) fail(ErrorCode::Domain, "innovations: x0 must exceed 1 when h is not constant");
  if (!(delta > 0.0)) fail(ErrorCode::Domain, "innovations: delta must be positive");
  h.validate();
  if (mode == InnovationMode::Symmetric && sigma1 != sigma2)
    fail(ErrorCode::Domain, "innovations: symmetric mode requires sigma1 == sigma2");
  if (alpha == 1.0 && mode != InnovationMode::Symmetric)
    fail(ErrorCode::Domain, "innovations: alpha = 1 requires symmetric mode");
  if (alpha > 1.0 && mode == InnovationMode::Raw)
    fail(ErrorCode::Domain, "innovations: alpha > 1 requires centered or symmetric mode");
  if (alpha < 1.0 && mode == InnovationMode::Centered)
    fail(ErrorCode::Domain, "innovations: centering needs a finite mean (alpha > 1)");
}

double Innovations::tail_survival(double sigma, double y) const {
  return sigma * std::pow(y, -spec_.alpha) * h_value(spec_.h, y);
}

double Innovations::tail_density(double sigma, double y) const {
  return sigma * std::pow(y, -spec_.alpha - 1.0) * h_value(spec_.h, y) * (spec_.alpha - h_eta(spec_.h, y));
}

double Innovations::tail_density_slope(double sigma, double y) const {
  const double a = spec_.alpha;
  const double e = h_eta(spec_.h, y);
  double de = 0.0;
  if (!spec_.h.is_constant()) {
    const double d = 1e-5 * y;
    de = (spec_.h.eta(y + d) - spec_.h.eta(y - d)) / (2 * d);
  }
  const double base = sigma * std::pow(y, -a - 1.0) * h_value(spec_.h, y);
  // d/dy [y^{-a-1} h(y)] = y^{-a-2} h(y) (e - a - 1)
  return base * ((e - a - 1.0) / y * (a - e) - de);
}

Innovations::Innovations(const InnovationSpec& spec) : spec_(spec) {
  spec_.validate();
  unit_h_ = spec_.h.is_constant();
  const double a = spec_.alpha, x0 = spec_.x0;
  left_mass_ = tail_survival(spec_.sigma1, x0);
  right_mass_ = tail_survival(spec_.sigma2, x0);
  const double core_mass = 1.0 - left_mass_ - right_mass_;
  if (!(core_mass > 0.0)) fail(ErrorCode::Domain, "innovations: tails carry all the mass; increase x0");
  for (double y = x0; y < 1e12 * x0; y *= 2.0)
    if (!(a - h_eta(spec_.h, y) > 0.0)) fail(ErrorCode::Domain, "innovations: tail density not positive for this h");

  // density at -x0 and its slope come from the mirrored left tail
  const double fL = tail_density(spec_.sigma1, x0), fR = tail_density(spec_.sigma2, x0);
  const double dL = -tail_density_slope(spec_.sigma1, x0), dR = tail_density_slope(spec_.sigma2, x0);
  Eigen::Matrix<double, 5, 5> A;
  Eigen::Matrix<double, 5, 1> rhs;
  for (int j = 0; j < 5; ++j) {
    A(0, j) = std::pow(-x0, j);
    A(1, j) = std::pow(x0, j);
    A(2, j) = j == 0 ? 0.0 : j * std::pow(-x0, j - 1);
    A(3, j) = j == 0 ? 0.0 : j * std::pow(x0, j - 1);
    A(4, j) = (std::pow(x0, j + 1) - std::pow(-x0, j + 1)) / (j + 1);
  }
  rhs << fL, fR, dL, dR, core_mass;
  const Eigen::Matrix<double, 5, 1> sol = A.fullPivLu().solve(rhs);
  for (int j = 0; j < 5; ++j) b_[j] = sol(j);
  if (spec_.mode == InnovationMode::Symmetric) b_[1] = b_[3] = 0.0;
  for (int k = 0; k <= 2000; ++k) {
    const double x = -x0 + 2.0 * x0 * k / 2000.0;
    if (!(poly(x) > 0.0))
      fail(ErrorCode::Domain, "innovations: core density is not positive; choose a larger x0");
  }

  core_step_ = core_mass / kCoreTable;
  core_table_.resize(kCoreTable + 1);
  for (int k = 0; k <= kCoreTable; ++k)
    core_table_[k] = k == 0 ? -x0 : k == kCoreTable ? x0 : core_solve(k * core_step_);

  if (spec_.mode == InnovationMode::Centered) {
    double m = core_moment(1);
    if (unit_h_) {
      const double s = spec_.h.sigma;
      m += a * s * (spec_.sigma2 - spec_.sigma1) * std::pow(x0, 1.0 - a) / (a - 1.0);
    } else {
      // E[e; e > x0] = x0 S(x0) + int_{x0}^inf S(y) dy
      auto S2 = [&](double y) { return tail_survival(spec_.sigma2, y); };
      auto S1 = [&](double y) { return tail_survival(spec_.sigma1, y); };
      m += x0 * (right_mass_ - left_mass_) + integrate_to_infinity(S2, x0, 1e-12) - integrate_to_infinity(S1, x0, 1e-12);
    }
    shift_ = m;
  }

  if (unit_h_) {
    const double s1 = spec_.sigma1 * spec_.h.sigma, s2 = spec_.sigma2 * spec_.h.sigma;
    series_c_.resize(kSeriesTerms);
    for (int k = 0; k < kSeriesTerms; ++k) {
      double c = core_moment(k);
      if (static_cast<double>(k) != a) {
        const double t = a * std::pow(x0, k - a) / (k - a);
        c -= t * s2 + t * s1 * (k % 2 == 0 ? 1.0 : -1.0);
      }
      series_c_[k] = c;
    }
    if (a == 1.0) {
      series_d_ = -kPi * s1;  // limit of a Gamma(-a) (s2 e^{-i pi a/2} + s1 e^{i pi a/2}) at a = 1, s1 = s2
    } else {
      const double g = a * std::tgamma(-a);
      series_d_ = g * (s2 * std::exp(cplx(0, -kPi * a / 2)) + s1 * std::exp(cplx(0, kPi * a / 2)));
    }
  }
}

double Innovations::poly(double x) const {
  return b_[0] + x * (b_[1] + x * (b_[2] + x * (b_[3] + x * b_[4])));
}

double Innovations::poly_integral(double x) const {
  auto P = [&](double t) {
    return t * (b_[0] + t * (b_[1] / 2 + t * (b_[2] / 3 + t * (b_[3] / 4 + t * b_[4] / 5))));
  };
  return P(x) - P(-spec_.x0);
}

double Innovations::core_moment(int k) const {
  const double x0 = spec_.x0;
  double m = 0.0;
  for (int j = 0; j < 5; ++j) {
    const int p = j + k + 1;
    m += b_[j] * (std::pow(x0, p) - std::pow(-x0, p)) / p;
  }
  return m;
}

double Innovations::density(double x) const {
  const double y = x + shift_;
  if (y <= -spec_.x0) return tail_density(spec_.sigma1, -y);
  if (y >= spec_.x0) return tail_density(spec_.sigma2, y);
  return poly(y);
}

double Innovations::raw_cdf(double y) const {
  if (y <= -spec_.x0) return tail_survival(spec_.sigma1, -y);
  if (y >= spec_.x0) return 1.0 - tail_survival(spec_.sigma2, y);
  return left_mass_ + poly_integral(y);
}

double Innovations::cdf(double x) const { return raw_cdf(x + shift_); }

double Innovations::abs_tail(double x) const {
  if (x < 0.0) return 1.0;
  const double up = x + shift_, lo = -x + shift_;
  const double upper = up >= spec_.x0 ? tail_survival(spec_.sigma2, up) : 1.0 - raw_cdf(up);
  return upper + raw_cdf(lo);
}

double Innovations::tail_inverse(double sigma, double q) const {
  const double a = spec_.alpha;
  if (unit_h_) return std::pow(sigma * spec_.h.sigma / q, 1.0 / a);
  // Newton in ln y on ln S(y) = ln q
  double ly = std::log(std::max(spec_.x0, std::pow(sigma / q, 1.0 / a)));
  const double lq = std::log(q), ls = std::log(sigma);
  for (int it = 0; it < 100; ++it) {
    const double y = std::exp(ly);
    const double f = ls - a * ly + spec_.h.log_value(y) - lq;
    const double step = f / (a - spec_.h.eta(y));
    ly = std::max(std::log(spec_.x0), ly + step);
    if (std::abs(step) < 1e-15) break;
  }
  return std::exp(ly);
}

double Innovations::core_solve(double target) const {
  double lo = -spec_.x0, hi = spec_.x0;
  double x = -spec_.x0 + 2.0 * spec_.x0 * target / (1.0 - left_mass_ - right_mass_);
  for (int it = 0; it < 100; ++it) {
    const double g = poly_integral(x) - target;
    if (g > 0)
      hi = x;
    else
      lo = x;
    double next = x - g / poly(x);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) < 1e-15 * std::max(1.0, std::abs(x))) return next;
    x = next;
  }
  return x;
}

double Innovations::raw_quantile(double p, double q) const {
  if (p <= left_mass_) return -tail_inverse(spec_.sigma1, p);
  if (q <= right_mass_) return tail_inverse(spec_.sigma2, q);
  const double target = p - left_mass_;
  // table guess, then Newton; the bracketing solver is the fallback
  const double pos = target / core_step_;
  const auto k = std::min(static_cast<std::size_t>(pos), core_table_.size() - 2);
  const double s = pos - static_cast<double>(k);
  double x = core_table_[k] + s * (core_table_[k + 1] - core_table_[k]);
  for (int it = 0; it < 4; ++it) {
    const double step = (poly_integral(x) - target) / poly(x);
    x -= step;
    if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(x))) return std::clamp(x, -spec_.x0, spec_.x0);
  }
  return core_solve(target);
}

double Innovations::quantile(double p) const {
  if (!(p > 0.0 && p < 1.0)) fail(ErrorCode::Domain, "innovation quantile: p must lie in (0,1)");
  return raw_quantile(p, 1.0 - p) - shift_;
}

double Innovations::sample(Rng& rng) const {
  const double u = rng.uniform();
  return raw_quantile(u, 1.0 - u) - shift_;
}

cplx Innovations::raw_cf_series(double v) const {
  cplx sum = 0.0, term = 1.0;
  const cplx iv(0.0, v);
  for (int k = 0; k < kSeriesTerms; ++k) {
    sum += series_c_[k] * term;
    term *= iv / static_cast<double>(k + 1);
  }
  return sum + series_d_ * std::pow(v, spec_.alpha);
}

cplx Innovations::raw_cf_large(double v) const {
  const double x0 = spec_.x0, a = spec_.alpha;
  // core: int e^{ivx} p(x) dx = [e^{ivx} sum_j (-1)^j p^{(j)}(x) / (iv)^{j+1}]
  auto bracket = [&](double x) {
    double d[5];
    d[0] = poly(x);
    d[1] = b_[1] + x * (2 * b_[2] + x * (3 * b_[3] + x * 4 * b_[4]));
    d[2] = 2 * b_[2] + x * (6 * b_[3] + x * 12 * b_[4]);
    d[3] = 6 * b_[3] + x * 24 * b_[4];
    d[4] = 24 * b_[4];
    cplx s = 0.0, inv = 1.0 / cplx(0, v), pw = inv;
    for (int j = 0; j < 5; ++j) {
      s += (j % 2 == 0 ? 1.0 : -1.0) * d[j] * pw;
      pw *= inv;
    }
    return std::exp(cplx(0, v * x)) * s;
  };
  const cplx core = bracket(x0) - bracket(-x0);
  const cplx E = oscillatory_tail(a + 1.0, v * x0);
  const double s = spec_.h.sigma, va = a * std::pow(v, a);
  return core + va * (spec_.sigma2 * s * E + spec_.sigma1 * s * std::conj(E));
}

cplx Innovations::raw_cf(double v) const {
  if (v == 0.0) return 1.0;
  if (v < 0.0) return std::conj(raw_cf(-v));
  if (!unit_h_) return cf_quadrature(v) * std::exp(cplx(0, v * shift_));
  return v * spec_.x0 <= kSeriesLimit ? raw_cf_series(v) : raw_cf_large(v);
}

cplx Innovations::cf(double u) const {
  if (u == 0.0) return 1.0;
  return raw_cf(u) * std::exp(cplx(0, -u * shift_));
}

cplx Innovations::cf_quadrature(double u) const {
  if (u == 0.0) return 1.0;
  const double v = std::abs(u), x0 = spec_.x0;
  // core: polynomial times a trigonometric factor, Gauss-Legendre on panels
  // no wider than one radian of phase
  const int panels = std::max(4, static_cast<int>(std::ceil(2.0 * v * x0)));
  double cr = 0.0, ci = 0.0;
  for (int k = 0; k < panels; ++k) {
    const double lo = -x0 + 2.0 * x0 * k / panels, hi = -x0 + 2.0 * x0 * (k + 1) / panels;
    cr += gauss_legendre20([&](double x) { return std::cos(v * x) * poly(x); }, lo, hi);
    ci += gauss_legendre20([&](double x) { return std::sin(v * x) * poly(x); }, lo, hi);
  }
  static thread_local boost::math::quadrature::ooura_fourier_cos<double> fcos(1e-12, 10);
  static thread_local boost::math::quadrature::ooura_fourier_sin<double> fsin(1e-12, 10);
  auto g2 = [&](double t) { return tail_density(spec_.sigma2, x0 + t); };
  auto g1 = [&](double t) { return tail_density(spec_.sigma1, x0 + t); };
  const double C2 = fcos.integrate(g2, v).first, S2 = fsin.integrate(g2, v).first;
  const double C1 = spec_.sigma1 > 0 ? fcos.integrate(g1, v).first : 0.0;
  const double S1 = spec_.sigma1 > 0 ? fsin.integrate(g1, v).first : 0.0;
  const double c = std::cos(v * x0), s = std::sin(v * x0);
  const double re = cr + c * (C2 + C1) - s * (S2 + S1);
  const double im = ci + s * (C2 - C1) + c * (S2 - S1);
  cplx raw(re, im);
  if (u < 0) raw = std::conj(raw);
  return raw * std::exp(cplx(0, -u * shift_));
}

Innovations::BoundFit Innovations::fit_bound_abs(double alpha_prime) const {
  BoundFit fit{0.0, 0.0};
  for (int k = 0; k <= 240; ++k) {
    const double l = std::pow(10.0, -3.0 + 6.0 * k / 240.0);
    const double r = std::abs(1.0 - cf(l)) / std::min(std::pow(l, alpha_prime), 1.0);
    fit.C = std::max(fit.C, r);
    if (k == 0) fit.small_end = r;
  }
  return fit;
}

Innovations::BoundFit Innovations::fit_bound_sq(double alpha_prime) const {
  BoundFit fit{0.0, 0.0};
  for (int k = 0; k <= 240; ++k) {
    const double l = std::pow(10.0, -3.0 + 6.0 * k / 240.0);
    const double r = (1.0 - std::norm(cf(l))) / std::min(std::pow(l, alpha_prime), 1.0);
    fit.C = std::max(fit.C, r);
    if (k == 0) fit.small_end = r;
  }
  return fit;
}

double Innovations::decay_witness() const {
  double sup = 0.0;
  for (int k = 0; k <= 400; ++k) {
    const double u = std::pow(10.0, 4.0 * k / 400.0);
    sup = std::max(sup, std::abs(cf(u)) * (1.0 + std::pow(u, spec_.delta)));
  }
  return sup;
}

}  // namespace lmf

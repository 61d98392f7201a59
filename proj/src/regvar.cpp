#include "lmf/regvar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace lmf {

SlowlyVaryingSpec SlowlyVaryingSpec::zero(double sigma) {
  SlowlyVaryingSpec s;
  s.sigma = sigma;
  s.validate();
  return s;
}

SlowlyVaryingSpec SlowlyVaryingSpec::log_power(double sigma, double c1, double a) {
  SlowlyVaryingSpec s;
  s.kind = Kind::LogPower;
  s.sigma = sigma;
  s.c1 = c1;
  s.a = a;
  s.validate();
  return s;
}

SlowlyVaryingSpec SlowlyVaryingSpec::tabulated(double sigma, std::vector<double> knots, std::vector<double> etas) {
  SlowlyVaryingSpec s;
  s.kind = Kind::Tabulated;
  s.sigma = sigma;
  s.knots = std::move(knots);
  s.etas = std::move(etas);
  s.validate();
  return s;
}

void SlowlyVaryingSpec::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) fail(ErrorCode::Domain, "slowly varying: sigma must be > 0");
  if (kind == Kind::LogPower) {
    if (!(a > 0.0 && a <= 1.0)) fail(ErrorCode::Domain, "log-power preset: exponent a must lie in (0,1]");
    if (!std::isfinite(c1)) fail(ErrorCode::Domain, "log-power preset: c1 must be finite");
  }
  if (kind == Kind::Tabulated) {
    if (knots.empty() || knots.size() != etas.size())
      fail(ErrorCode::Domain, "tabulated eta: knots and values must be non-empty and of equal length");
    if (knots.front() < 1.0) fail(ErrorCode::Domain, "tabulated eta: knots must be >= 1");
    for (std::size_t i = 1; i < knots.size(); ++i)
      if (!(knots[i] > knots[i - 1])) fail(ErrorCode::Domain, "tabulated eta: knots must be strictly increasing");
  }
}

double SlowlyVaryingSpec::eta(double t) const {
  switch (kind) {
    case Kind::Zero:
      return 0.0;
    case Kind::LogPower:
      return t > 1.0 ? c1 * std::pow(std::log(t), -a) : INFINITY;
    case Kind::Tabulated: {
      if (t <= knots.front()) return etas.front();
      if (t >= knots.back()) return etas.back();
      const auto it = std::upper_bound(knots.begin(), knots.end(), t);
      const std::size_t k = static_cast<std::size_t>(it - knots.begin()) - 1;
      const double w = (std::log(t) - std::log(knots[k])) / (std::log(knots[k + 1]) - std::log(knots[k]));
      return etas[k] + w * (etas[k + 1] - etas[k]);
    }
  }
  return 0.0;
}

double SlowlyVaryingSpec::log_value(double x) const {
  if (!(x > 1.0)) fail(ErrorCode::Domain, "slowly varying function evaluated at x <= 1");
  return log_value_at_log(std::log(x));
}

double SlowlyVaryingSpec::log_value_at_log(double s) const {
  if (!(s > 0.0)) fail(ErrorCode::Domain, "slowly varying function evaluated at x <= 1");
  const double ls = std::log(sigma);
  switch (kind) {
    case Kind::Zero:
      return ls;
    case Kind::LogPower: {
      const double L = s;
      if (a == 1.0) return ls + c1 * std::log(L);
      return ls + c1 * std::pow(L, 1.0 - a) / (1.0 - a);
    }
    case Kind::Tabulated: {
      // eta is piecewise linear in s = ln t, so the integral is exact trapezoid.
      const double s0 = std::log(knots.front());
      double acc = etas.front() * std::min(s, s0);
      for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
        const double lo = std::log(knots[k]), hi = std::log(knots[k + 1]);
        if (s <= lo) break;
        const double e = std::min(s, hi);
        const double eta_e = etas[k] + (e - lo) / (hi - lo) * (etas[k + 1] - etas[k]);
        acc += 0.5 * (etas[k] + eta_e) * (e - lo);
      }
      const double s_last = std::log(knots.back());
      if (s > s_last) acc += etas.back() * (s - s_last);
      return ls + acc;
    }
  }
  return ls;
}

std::string SlowlyVaryingSpec::describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind) {
    case Kind::Zero:
      os << "zero(sigma=" << sigma << ")";
      break;
    case Kind::LogPower:
      os << "log-power(sigma=" << sigma << ",c1=" << c1 << ",a=" << a << ")";
      break;
    case Kind::Tabulated:
      os << "tabulated(sigma=" << sigma << ",knots=" << knots.size() << ")";
      break;
  }
  return os.str();
}

double sv_eval(const SlowlyVaryingSpec& spec, double x) { return std::exp(spec.log_value(x)); }

EtaMonitor eta_monitor(const SlowlyVaryingSpec& spec) {
  EtaMonitor m{1.0 + 1e-9, {}, true};
  if (spec.kind == SlowlyVaryingSpec::Kind::LogPower && std::abs(spec.c1) > 1.0)
    m.threshold = std::exp(std::pow(std::abs(spec.c1), 1.0 / spec.a));
  if (spec.kind == SlowlyVaryingSpec::Kind::LogPower && std::abs(spec.c1) <= 1.0) m.threshold = std::exp(1.0);
  if (spec.kind == SlowlyVaryingSpec::Kind::Tabulated) {
    m.threshold = spec.knots.front();
    for (std::size_t k = 0; k < spec.knots.size(); ++k)
      if (std::abs(spec.etas[k]) > 1.0) m.threshold = spec.knots[std::min(k + 1, spec.knots.size() - 1)];
  }
  double t = m.threshold;
  for (int k = 0; k < 64; ++k, t *= 2.0) m.doubling.push_back(std::abs(spec.eta(t)));
  for (std::size_t k = m.doubling.size() / 2; k + 1 < m.doubling.size(); ++k)
    if (m.doubling[k + 1] > m.doubling[k] + 1e-15) m.decaying = false;
  return m;
}

double ell_beta(const SlowlyVaryingSpec& spec, double beta, double x) {
  if (!(beta > 0.0)) fail(ErrorCode::Domain, "ell_beta: beta must be > 0");
  const double y = std::pow(x, 1.0 / beta);
  if (!(y > 1.0)) fail(ErrorCode::Domain, "ell_beta: x^{1/beta} must exceed 1");
  return y * std::exp(spec.log_value(y) / beta);
}

MonotoneMap::MonotoneMap(std::function<double(double)> g, double s_lo, double s_hi, int per_decade)
    : g_(std::move(g)) {
  if (!(s_lo > 0.0 && s_hi > s_lo) || per_decade < 2) fail(ErrorCode::InvalidArgument, "monotone map: bad grid");
  const double decades = std::log10(s_hi / s_lo);
  const auto n = static_cast<std::size_t>(std::ceil(decades * per_decade)) + 1;
  std::vector<double> s(n), v(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = i + 1 == n ? s_hi : s_lo * std::pow(10.0, static_cast<double>(i) / per_decade);
    v[i] = g_(s[i]);
    if (std::isnan(v[i])) fail(ErrorCode::Domain, "monotone map: forward map returned NaN");
  }
  std::size_t first = 1;
  for (std::size_t i = 0; i + 1 < n; ++i)
    if (!(v[i + 1] > v[i])) first = i + 2;
  if (first + 1 >= n) fail(ErrorCode::Domain, "monotone map: no increasing range on the grid");
  A_ = s[first - 1];
  sv_.assign(s.begin() + static_cast<std::ptrdiff_t>(first), s.end());
  gv_.assign(v.begin() + static_cast<std::ptrdiff_t>(first), v.end());
}

double MonotoneMap::inverse(double x) const {
  if (std::isnan(x)) fail(ErrorCode::Domain, "monotone inverse of NaN");
  if (x > gv_.back()) return std::numeric_limits<double>::infinity();
  const auto it = std::lower_bound(gv_.begin(), gv_.end(), x);
  const std::size_t k = static_cast<std::size_t>(it - gv_.begin());
  double hi = sv_[k];
  double lo = k == 0 ? A_ : sv_[k - 1];
  // Bisection keeps g(lo) < x <= g(hi); the lower end A itself is never evaluated.
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (g_(mid) >= x)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

HAlphaResult solve_h_alpha(const SlowlyVaryingSpec& h, double alpha, double N) {
  if (!(N > 1.0)) fail(ErrorCode::Domain, "solve_h_alpha: N must exceed 1");
  if (!(alpha > 0.0)) fail(ErrorCode::Domain, "solve_h_alpha: alpha must be > 0");
  const double base = std::pow(N, 1.0 / alpha);
  auto F = [&](double y) {
    const double arg = base * std::pow(y, 1.0 / alpha);
    if (!(arg > 1.0)) fail(ErrorCode::Convergence, "solve_h_alpha: iterate left the domain of h");
    return sv_eval(h, arg);
  };
  double y = sv_eval(h, base);
  double res = std::abs(F(y) / y - 1.0);
  double damping = 1.0;
  int it = 0;
  for (; it < 500 && res > 1e-14; ++it) {
    const double next = (1.0 - damping) * y + damping * F(y);
    const double r = std::abs(F(next) / next - 1.0);
    if (r >= res && damping > 1e-3) {
      damping *= 0.5;
      continue;
    }
    y = next;
    res = r;
  }
  if (res > 1e-8) fail(ErrorCode::Convergence, "solve_h_alpha: fixed-point iteration did not converge");
  return {y, res, it};
}

double norm_thm1(double alpha, double beta, const SlowlyVaryingSpec& ell, const SlowlyVaryingSpec& h, double N) {
  if (!(alpha > 1.0 && alpha < 2.0 && beta > 1.0 / alpha && beta < 1.0))
    fail(ErrorCode::Domain, "norm_thm1 requires 1 < alpha < 2 and 1/alpha < beta < 1");
  if (!(N > 1.0)) fail(ErrorCode::Domain, "norm_thm1: N must exceed 1");
  const double ha = h.is_constant() ? h.sigma : solve_h_alpha(h, alpha, N).value;
  return std::pow(N, 1.0 + 1.0 / alpha - beta) * sv_eval(ell, N) * std::pow(ha, 1.0 / alpha);
}

namespace {
constexpr double kGridLo = 1.0 + 1e-6;
constexpr double kGridHi = 1e60;
}  // namespace

Thm23Normalizer::Thm23Normalizer(double alpha, double beta, const SlowlyVaryingSpec& ell, const SlowlyVaryingSpec& h)
    : alpha_(alpha), beta_(beta), ell_(ell), h_(h) {
  const double ab = alpha * beta;
  if (!(ab > 1.0 && ab < 2.0)) fail(ErrorCode::Domain, "Theorem 2/3 normalizer requires alpha*beta in (1,2)");
  inner_ = std::make_unique<MonotoneMap>([this](double s) { return ell_beta(ell_, beta_, s); }, kGridLo, kGridHi);
  const double x_lo = (*inner_)(inner_->threshold() * (1.0 + 1e-6)) * (1.0 + 1e-6);
  const double x_hi = inner_->range_max() * (1.0 - 1e-6);
  outer_ = std::make_unique<MonotoneMap>([this](double x) { return forward(x); }, x_lo, x_hi, 256);
}

double Thm23Normalizer::forward(double x) const {
  const double s = inner_->inverse(x);
  if (!std::isfinite(s)) return std::numeric_limits<double>::infinity();
  return std::pow(s, alpha_) / sv_eval(h_, s);
}

double Thm23Normalizer::operator()(double N) const {
  if (!(N > 0.0)) fail(ErrorCode::Domain, "normalizer: N must be positive");
  const double v = outer_->inverse(N);
  if (!std::isfinite(v)) fail(ErrorCode::Domain, "normalizer: N beyond the invertible range");
  return v;
}

double norm_thm23(double alpha, double beta, const SlowlyVaryingSpec& ell, const SlowlyVaryingSpec& h, double N) {
  return Thm23Normalizer(alpha, beta, ell, h)(N);
}

std::vector<double> check_ell_ratio(const SlowlyVaryingSpec& ell, double beta, const std::vector<double>& xs) {
  std::vector<double> out;
  out.reserve(xs.size());
  for (double x : xs) {
    const double lx = ell.log_value(x);
    const double y = x * std::exp(lx / beta);
    out.push_back(std::exp(ell.log_value(y) - lx));
  }
  return out;
}

}  // namespace lmf

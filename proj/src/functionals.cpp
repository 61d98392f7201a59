#include "lmf/functionals.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include <fftw3.h>

#include "fftw_lock.hpp"

namespace lmf {

namespace {

const double kSqrtPi = std::sqrt(kPi);

double factorial(int p) {
  double f = 1;
  for (int k = 2; k <= p; ++k) f *= k;
  return f;
}

// sum_{m >= 1} (x + m P)^-q for x > -P, q > 1: explicit terms, then the
// midpoint integral for the rest.
double shifted_power_sum(double x, double P, double q) {
  constexpr int kExplicit = 4;
  double s = 0;
  for (int m = 1; m <= kExplicit; ++m) s += std::pow(x + m * P, -q);
  return s + std::pow(x + (kExplicit + 0.5) * P, 1 - q) / ((q - 1) * P);
}

struct PowerTerm {
  double c, q;  // c |x|^-q
};

}  // namespace

// --- FunctionalSpec -----------------------------------------------------

FunctionalSpec FunctionalSpec::gaussian_bump(double weight) { return {{{KTerm::Kind::GaussianBump, weight}}}; }
FunctionalSpec FunctionalSpec::odd_bump(double weight) { return {{{KTerm::Kind::OddBump, weight}}}; }
FunctionalSpec FunctionalSpec::indicator(double lo, double hi, double weight) {
  return {{{KTerm::Kind::Indicator, weight, lo, hi}}};
}

FunctionalSpec FunctionalSpec::parse(const std::string& text) {
  FunctionalSpec out;
  std::size_t i = 0;
  auto skip = [&] {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  };
  auto bad = [&](const std::string& why) -> void {
    fail(ErrorCode::Config, "cannot parse functional '" + text + "': " + why);
  };
  while (true) {
    skip();
    double w = 1.0;
    if (i < text.size() && (std::isdigit(static_cast<unsigned char>(text[i])) || text[i] == '-' || text[i] == '.')) {
      if (text[i] == '-' && i + 1 < text.size() && std::isalpha(static_cast<unsigned char>(text[i + 1]))) {
        w = -1.0;
        ++i;
      } else {
        char* end = nullptr;
        w = std::strtod(text.c_str() + i, &end);
        if (end == text.c_str() + i) bad("expected a weight");
        i = static_cast<std::size_t>(end - text.c_str());
        skip();
        if (i >= text.size() || text[i] != '*') bad("expected '*' after a weight");
        ++i;
        skip();
      }
    }
    std::size_t start = i;
    while (i < text.size() && (std::isalpha(static_cast<unsigned char>(text[i])) || text[i] == '-')) ++i;
    const std::string name = text.substr(start, i - start);
    if (name == "gaussian-bump") {
      out.terms.push_back({KTerm::Kind::GaussianBump, w});
    } else if (name == "odd-bump") {
      out.terms.push_back({KTerm::Kind::OddBump, w});
    } else if (name == "indicator") {
      skip();
      if (i >= text.size() || text[i] != '[') bad("expected '[' after indicator");
      const auto close = text.find(']', i);
      if (close == std::string::npos) bad("missing ']'");
      const std::string inner = text.substr(i + 1, close - i - 1);
      const auto comma = inner.find(',');
      if (comma == std::string::npos) bad("indicator needs [a,b]");
      char* e1 = nullptr;
      char* e2 = nullptr;
      const std::string sa = inner.substr(0, comma), sb = inner.substr(comma + 1);
      const double lo = std::strtod(sa.c_str(), &e1), hi = std::strtod(sb.c_str(), &e2);
      if (e1 == sa.c_str() || e2 == sb.c_str()) bad("indicator bounds must be numbers");
      out.terms.push_back({KTerm::Kind::Indicator, w, lo, hi});
      i = close + 1;
    } else {
      bad("unknown term '" + name + "'");
    }
    skip();
    if (i == text.size()) break;
    if (text[i] != '+') bad("expected '+'");
    ++i;
  }
  out.validate();
  return out;
}

void FunctionalSpec::validate() const {
  for (const auto& t : terms) {
    if (!std::isfinite(t.weight)) fail(ErrorCode::InvalidArgument, "functional weight must be finite");
    if (t.kind == KTerm::Kind::Indicator && !(std::isfinite(t.lo) && std::isfinite(t.hi) && t.lo < t.hi))
      fail(ErrorCode::InvalidArgument, "indicator needs finite a < b");
  }
}

std::string FunctionalSpec::describe() const {
  if (terms.empty()) return "0";
  std::ostringstream os;
  os.precision(17);
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const auto& t = terms[k];
    if (k) os << " + ";
    if (t.weight != 1.0) os << t.weight << "*";
    switch (t.kind) {
      case KTerm::Kind::GaussianBump: os << "gaussian-bump"; break;
      case KTerm::Kind::OddBump: os << "odd-bump"; break;
      case KTerm::Kind::Indicator: os << "indicator[" << t.lo << "," << t.hi << "]"; break;
    }
  }
  return os.str();
}

FunctionalSpec FunctionalSpec::scaled(double lambda) const {
  FunctionalSpec out = *this;
  for (auto& t : out.terms) t.weight *= lambda;
  return out;
}

FunctionalSpec FunctionalSpec::operator+(const FunctionalSpec& other) const {
  FunctionalSpec out = *this;
  out.terms.insert(out.terms.end(), other.terms.begin(), other.terms.end());
  return out;
}

double FunctionalSpec::operator()(double x) const {
  double s = 0;
  for (const auto& t : terms) {
    switch (t.kind) {
      case KTerm::Kind::GaussianBump: s += t.weight * std::exp(-x * x); break;
      case KTerm::Kind::OddBump: s += t.weight * x * std::exp(-x * x); break;
      case KTerm::Kind::Indicator: s += (x >= t.lo && x <= t.hi) ? t.weight : 0.0; break;
    }
  }
  return s;
}

bool FunctionalSpec::smooth() const {
  return std::none_of(terms.begin(), terms.end(), [](const KTerm& t) { return t.kind == KTerm::Kind::Indicator; });
}

bool FunctionalSpec::zero() const {
  return std::all_of(terms.begin(), terms.end(), [](const KTerm& t) { return t.weight == 0.0; });
}

bool FunctionalSpec::even() const {
  return std::all_of(terms.begin(), terms.end(),
                     [](const KTerm& t) { return t.kind == KTerm::Kind::GaussianBump || t.weight == 0.0; });
}

double FunctionalSpec::moment(int k) const {
  // int x^k e^{-x^2} dx = Gamma((k+1)/2) for even k, 0 for odd k
  auto gauss = [](int k) { return k % 2 ? 0.0 : std::tgamma((k + 1) / 2.0); };
  double s = 0;
  for (const auto& t : terms) {
    switch (t.kind) {
      case KTerm::Kind::GaussianBump: s += t.weight * gauss(k); break;
      case KTerm::Kind::OddBump: s += t.weight * gauss(k + 1); break;
      case KTerm::Kind::Indicator:
        s += t.weight * (std::pow(t.hi, k + 1) - std::pow(t.lo, k + 1)) / (k + 1);
        break;
    }
  }
  return s;
}

double FunctionalSpec::abs_integral() const {
  if (terms.size() == 1) {
    const auto& t = terms[0];
    const double w = std::abs(t.weight);
    switch (t.kind) {
      case KTerm::Kind::GaussianBump: return w * kSqrtPi;
      case KTerm::Kind::OddBump: return w;
      case KTerm::Kind::Indicator: return w * (t.hi - t.lo);
    }
  }
  std::vector<double> edges{-12.0, 12.0};
  for (const auto& t : terms)
    if (t.kind == KTerm::Kind::Indicator) {
      edges.push_back(t.lo);
      edges.push_back(t.hi);
    }
  std::sort(edges.begin(), edges.end());
  double s = 0;
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    if (edges[k + 1] <= edges[k]) continue;
    s += integrate_gk([&](double x) { return std::abs((*this)(x)); }, edges[k], edges[k + 1], 1e-12);
  }
  return s;
}

cplx k_hat(const FunctionalSpec& spec, double u) {
  cplx s = 0;
  const double g = kSqrtPi * std::exp(-u * u / 4);
  for (const auto& t : spec.terms) {
    switch (t.kind) {
      case KTerm::Kind::GaussianBump: s += t.weight * g; break;
      case KTerm::Kind::OddBump: s += t.weight * cplx(0, u / 2 * g); break;
      case KTerm::Kind::Indicator:
        if (u == 0.0)
          s += t.weight * (t.hi - t.lo);
        else
          s += t.weight * (std::exp(cplx(0, u * t.hi)) - std::exp(cplx(0, u * t.lo))) / cplx(0, u);
        break;
    }
  }
  return s;
}

// --- KInfinity ----------------------------------------------------------

KInfinity::KInfinity(const FunctionalSpec& spec, const LinearProcess& process)
    : KInfinity(spec, process, Options{}) {}

KInfinity::KInfinity(const FunctionalSpec& spec, const LinearProcess& process, Options opt) : spec_(spec), lp_(&process) {
  spec_.validate();
  for (const auto& t : spec_.terms) {
    if (t.weight == 0.0) continue;
    if (t.kind == KTerm::Kind::Indicator)
      indicators_.push_back(t);
    else
      smooth_part_.terms.push_back(t);
  }
  const auto& is = lp_->innovations().spec();
  double A = 0;
  for (double a : lp_->a()) A += std::pow(std::abs(a), is.alpha);
  tail_s_ = is.alpha + 1;
  tail_left_ = is.alpha * is.sigma1 * A;
  tail_right_ = is.alpha * is.sigma2 * A;
  for (int k = 0; k < 4; ++k) mom_[k] = smooth_part_.moment(k);
  build_grid(opt);

  taylor_[0] = (smooth_part_.terms.empty() ? 0.0 : val_[half_]) + indicator_value(0.0);
  taylor_[1] = (smooth_part_.terms.empty() ? 0.0 : der_[half_]) + indicator_slope(0.0);
}

namespace {
// Coefficients of the tail model on one side: for x -> +inf the process sits
// in its left tail, for x -> -inf in its right tail.
std::vector<PowerTerm> tail_terms(double c, double s, const std::array<double, 4>& mom, bool negative_side) {
  std::vector<PowerTerm> out;
  double rising = 1;
  for (int k = 0; k < 4; ++k) {
    if (k) rising *= s + k - 1;
    const double sign = (negative_side && k % 2) ? -1.0 : 1.0;
    const double coef = c * mom[k] / factorial(k) * rising * sign;
    if (coef != 0.0) out.push_back({coef, s + k});
  }
  return out;
}
}  // namespace

double KInfinity::tail_model(double x) const {
  if (x == 0.0) return INFINITY;
  const bool neg = x < 0;
  double v = 0;
  for (const auto& t : tail_terms(neg ? tail_right_ : tail_left_, tail_s_, mom_, neg)) v += t.c * std::pow(std::abs(x), -t.q);
  return v;
}

double KInfinity::tail_integral(double X, double sign, double r) const {
  const bool neg = sign < 0;
  double v = 0;
  for (const auto& t : tail_terms(neg ? tail_right_ : tail_left_, tail_s_, mom_, neg))
    v += t.c * std::pow(X, 1 - t.q - r) / (t.q + r - 1);
  return v;
}

double KInfinity::tail_model_slope(double x) const {
  if (x == 0.0) return INFINITY;
  const bool neg = x < 0;
  double v = 0;
  for (const auto& t : tail_terms(neg ? tail_right_ : tail_left_, tail_s_, mom_, neg))
    v += -t.q * t.c * std::pow(std::abs(x), -t.q - 1) * (neg ? -1.0 : 1.0);
  return v;
}

void KInfinity::build_grid(Options opt) {
  if (smooth_part_.terms.empty()) return;
  if (!(opt.step > 0 && opt.period >= 64 * opt.step)) fail(ErrorCode::InvalidArgument, "bad K_inf grid options");
  double wsum = 0;
  for (const auto& t : smooth_part_.terms) wsum += std::abs(t.weight);
  // |K^(u)| < 1e-17 beyond U
  double U = 2 * std::sqrt(std::log(1e17 * std::max(1.0, wsum) * 10));
  if (lp_->cf_cutoff() > 0) U = std::min(U, lp_->cf_cutoff());
  std::size_t n = std::bit_ceil(static_cast<std::size_t>(std::ceil(opt.period / opt.step)));
  h_ = opt.period / static_cast<double>(n);
  if (U > kPi / h_) fail(ErrorCode::InvalidArgument, "K_inf grid step too coarse for the transform support");
  const double P = opt.period, du = 2 * kPi / P;
  const std::size_t nc = n / 2 + 1;
  const std::size_t kmax = std::min(nc - 1, static_cast<std::size_t>(std::ceil(U / du)));

  fftw_complex* in_v = fftw_alloc_complex(nc);
  fftw_complex* in_d = fftw_alloc_complex(nc);
  double* out_v = fftw_alloc_real(n);
  double* out_d = fftw_alloc_real(n);
  if (!in_v || !in_d || !out_v || !out_d) fail(ErrorCode::Resource, "K_inf grid allocation failed");
  std::fill_n(reinterpret_cast<double*>(in_v), 2 * nc, 0.0);
  std::fill_n(reinterpret_cast<double*>(in_d), 2 * nc, 0.0);
  // Taylor coefficients p >= 2 straight from the trapezoid sums
  std::array<double, 7> tsum{};
  for (std::size_t k = 0; k <= kmax; ++k) {
    const double u = k * du;
    const cplx g = k_hat(smooth_part_, u) * std::conj(lp_->cf(u));
    const cplx c = std::conj(g) * (du / (2 * kPi));
    const cplx cd = cplx(0, u) * c;
    in_v[k][0] = c.real();
    in_v[k][1] = c.imag();
    in_d[k][0] = cd.real();
    in_d[k][1] = cd.imag();
    cplx mi = 1;  // (-iu)^p
    for (int p = 0; p <= 6; ++p) {
      tsum[p] += (k == 0 ? 0.5 : 1.0) * (mi * g).real();
      mi *= cplx(0, -u);
    }
  }
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_plan pv = fftw_plan_dft_c2r_1d(static_cast<int>(n), in_v, out_v, FFTW_ESTIMATE);
    fftw_plan pd = fftw_plan_dft_c2r_1d(static_cast<int>(n), in_d, out_d, FFTW_ESTIMATE);
    fftw_execute(pv);
    fftw_execute(pd);
    fftw_destroy_plan(pv);
    fftw_destroy_plan(pd);
  }
  half_ = n / 4;
  x_core_ = static_cast<double>(half_ - 2) * h_;
  val_.resize(2 * half_ + 1);
  der_.resize(2 * half_ + 1);
  for (std::size_t i = 0; i <= 2 * half_; ++i) {
    const std::ptrdiff_t k = static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(half_);
    const std::size_t idx = k >= 0 ? static_cast<std::size_t>(k) : static_cast<std::size_t>(k + static_cast<std::ptrdiff_t>(n));
    val_[i] = out_v[idx];
    der_[i] = out_d[idx];
  }
  fftw_free(in_v);
  fftw_free(in_d);
  fftw_free(out_v);
  fftw_free(out_d);

  // Remove the periodic images sum_{m != 0} K_inf(x + m P) with the tail model.
  const auto right = tail_terms(tail_left_, tail_s_, mom_, false);  // arguments x + mP > 0
  const auto left = tail_terms(tail_right_, tail_s_, mom_, true);   // arguments x - mP < 0
  double worst = 0;
  for (const auto& t : right) worst += std::abs(t.c) * 4 * std::pow(0.75 * P, -t.q);
  for (const auto& t : left) worst += std::abs(t.c) * 4 * std::pow(0.75 * P, -t.q);
  if (worst > 1e-16) {
    for (std::size_t i = 0; i <= 2 * half_; ++i) {
      const double x = (static_cast<double>(i) - static_cast<double>(half_)) * h_;
      double v = 0, d = 0;
      for (const auto& t : right) {
        v += t.c * shifted_power_sum(x, P, t.q);
        d -= t.q * t.c * shifted_power_sum(x, P, t.q + 1);
      }
      for (const auto& t : left) {
        v += t.c * shifted_power_sum(-x, P, t.q);
        d += t.q * t.c * shifted_power_sum(-x, P, t.q + 1);
      }
      val_[i] -= v;
      der_[i] -= d;
    }
  }
  for (int p = 2; p <= 6; ++p) taylor_[p] = tsum[p] * du / kPi;
}

double KInfinity::smooth_value(double x) const {
  if (val_.empty()) return 0.0;
  if (std::abs(x) > x_core_) return tail_model(x);
  const double t = x / h_ + static_cast<double>(half_);
  const auto i = static_cast<std::size_t>(t);
  const double s = t - static_cast<double>(i);
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * val_[i] + (s3 - 2 * s2 + s) * h_ * der_[i] + (-2 * s3 + 3 * s2) * val_[i + 1] +
         (s3 - s2) * h_ * der_[i + 1];
}

double KInfinity::smooth_slope(double x) const {
  if (der_.empty()) return 0.0;
  if (std::abs(x) > x_core_) return tail_model_slope(x);
  const double t = x / h_ + static_cast<double>(half_);
  const auto i = static_cast<std::size_t>(t);
  const double s = t - static_cast<double>(i);
  const double s2 = s * s;
  return ((6 * s2 - 6 * s) * val_[i] + (-6 * s2 + 6 * s) * val_[i + 1]) / h_ + (3 * s2 - 4 * s + 1) * der_[i] +
         (3 * s2 - 2 * s) * der_[i + 1];
}

double KInfinity::indicator_value(double x) const {
  double s = 0;
  for (const auto& t : indicators_) s += t.weight * lp_->interval_probability(t.lo - x, t.hi - x);
  return s;
}

double KInfinity::indicator_slope(double x) const {
  double s = 0;
  for (const auto& t : indicators_) s += t.weight * (lp_->density(t.lo - x).f - lp_->density(t.hi - x).f);
  return s;
}

double KInfinity::operator()(double x) const {
  return smooth_value(x) + (indicators_.empty() ? 0.0 : indicator_value(x));
}

double KInfinity::derivative(double x) const {
  return smooth_slope(x) + (indicators_.empty() ? 0.0 : indicator_slope(x));
}

double KInfinity::increment(double x) const {
  if (indicators_.empty() && std::abs(x) < kTaylorRadius) {
    double s = 0, xp = 1;
    for (int p = 1; p <= 6; ++p) {
      xp *= x;
      s += taylor_[p] / factorial(p) * xp;
    }
    return s;
  }
  return (*this)(x)-taylor_[0];
}

double KInfinity::direct(double x) const {
  double s = indicators_.empty() ? 0.0 : indicator_value(x);
  if (smooth_part_.terms.empty()) return s;
  double wsum = 0;
  for (const auto& t : smooth_part_.terms) wsum += std::abs(t.weight);
  double U = 2 * std::sqrt(std::log(1e17 * std::max(1.0, wsum) * 10));
  if (lp_->cf_cutoff() > 0) U = std::min(U, lp_->cf_cutoff());
  std::vector<double> edges{0.0};
  for (int k = 44; k >= 2; --k) edges.push_back(std::ldexp(1.0, -k));
  while (edges.back() < U) edges.push_back(std::min(U, edges.back() + 0.25));
  auto f = [&](double u) { return (k_hat(smooth_part_, u) * std::conj(lp_->cf(u)) * std::exp(cplx(0, -u * x))).real(); };
  double acc = 0;
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    const double lo = edges[k], hi = edges[k + 1];
    const int split = std::max(1, static_cast<int>(std::ceil((hi - lo) * std::abs(x) / 6.0)));
    for (int m = 0; m < split; ++m) acc += gauss_legendre20(f, lo + (hi - lo) * m / split, lo + (hi - lo) * (m + 1) / split);
  }
  return s + acc / kPi;
}

double KInfinity::expect_increment(double a) const {
  const auto& e = lp_->innovations();
  const auto& is = e.spec();
  const double m = e.shift(), x0 = is.x0;
  auto g = [&](double y) { return increment(a * y) * e.density(y); };
  double acc = 0;
  // core
  const double lo = -x0 - m, hi = x0 - m;
  const int core_panels = std::max(4, static_cast<int>(std::ceil(2 * x0 * std::abs(a) * 2)));
  for (int k = 0; k < core_panels; ++k) acc += gauss_legendre20(g, lo + (hi - lo) * k / core_panels, lo + (hi - lo) * (k + 1) / core_panels);
  // tails in s = ln |raw|
  const double s0 = std::log(x0);
  const double s_max = std::log(std::max(x0 * std::exp(1.0), 1e9 / std::max(std::abs(a), 1e-30)));
  const int panels = std::max(1, static_cast<int>(std::ceil((s_max - s0) / 0.5)));
  for (double side : {1.0, -1.0}) {
    auto gs = [&](double s) {
      const double r = std::exp(s);
      return g(side * r - m) * r;
    };
    for (int k = 0; k < panels; ++k) acc += gauss_legendre20(gs, s0 + (s_max - s0) * k / panels, s0 + (s_max - s0) * (k + 1) / panels);
    const double R = std::exp(s_max);
    const double mass = side > 0 ? 1.0 - e.cdf(R - m) : e.cdf(-R - m);
    acc += increment(a * (side * R - m)) * mass;
  }
  return acc;
}

double KInfinity::expect_scaled(double a) const { return taylor_[0] + expect_increment(a); }

// --- constants ----------------------------------------------------------

double int_K_df(const KInfinity& kinf) { return -kinf.taylor()[1]; }

double int_K_df_direct(const KInfinity& kinf) {
  const auto& spec = kinf.spec();
  const auto& lp = kinf.process();
  double s = 0;
  FunctionalSpec smooth;
  for (const auto& t : spec.terms) {
    if (t.kind == KTerm::Kind::Indicator)
      s += t.weight * (lp.density(t.hi).f - lp.density(t.lo).f);
    else
      smooth.terms.push_back(t);
  }
  if (smooth.terms.empty()) return s;
  double U = 2 * std::sqrt(std::log(1e19));
  if (lp.cf_cutoff() > 0) U = std::min(U, lp.cf_cutoff());
  // int K df = -(1/pi) Re int_0^U (-iu) K^(u) phi(-u) du
  auto f = [&](double u) { return (cplx(0, -u) * k_hat(smooth, u) * std::conj(lp.cf(u))).real(); };
  const double v = integrate_gk(f, 0.0, 1.0, 1e-11) + integrate_gk(f, 1.0, U, 1e-11);
  return s - v / kPi;
}

double c_tilde(double alpha, double beta, double sigma1, double sigma2, double intKdf) {
  if (!(alpha > 1 && alpha < 2 && beta > 1 / alpha && beta < 1))
    fail(ErrorCode::Domain, "c_tilde needs 1 < alpha < 2 and 1/alpha < beta < 1");
  const double r = std::tgamma(1 - alpha) * std::cos(kPi * alpha / 2);
  return std::pow(sigma1 + sigma2, 1 / alpha) * std::pow(r, 1 / alpha) * (-intKdf) / (1 - beta);
}

double c_tilde_as_printed(double alpha, double beta, double sigma1, double sigma2, double intKdf) {
  if (!(alpha > 1 && alpha < 2 && beta > 1 / alpha && beta < 1))
    fail(ErrorCode::Domain, "c_tilde needs 1 < alpha < 2 and 1/alpha < beta < 1");
  const double r = std::abs(std::tgamma(alpha - 1) * std::cos(kPi * alpha / 2));
  return std::pow(sigma1 + sigma2, 1 / alpha) * std::pow(r, 1 / alpha) * (-intKdf) / (1 - beta);
}

namespace {
void require_smooth(const KInfinity& kinf, const char* what) {
  for (const auto& t : kinf.spec().terms)
    if (t.kind == KTerm::Kind::Indicator && t.weight != 0.0)
      fail(ErrorCode::Config, std::string(what) + " supports smooth K only (gaussian and odd bumps)");
}

// Divergence check for integrals against u^{-1/beta-1} near 0.
bool linear_term_counts(const KInfinity& kinf, double beta, const char* what) {
  const double slope = kinf.taylor()[1];
  if (beta > 1) return true;
  if (std::abs(slope) > 1e-9 * (1 + std::abs(kinf.taylor()[0])))
    fail(ErrorCode::Regime, std::string(what) + " diverges for beta <= 1 unless int K df = 0");
  return false;
}
}  // namespace

std::pair<double, double> c_k_pm(const KInfinity& kinf, double beta) {
  require_smooth(kinf, "C_K");
  if (!(beta > 0.5)) fail(ErrorCode::Domain, "C_K needs beta > 1/2");
  const bool linear = linear_term_counts(kinf, beta, "C_K");
  const auto& tc = kinf.taylor();
  const double r = KInfinity::kTaylorRadius, X = kinf.x_core(), ib = 1 / beta;
  std::array<double, 2> out{};
  for (int side = 0; side < 2; ++side) {
    const double sg = side == 0 ? 1.0 : -1.0;
    double acc = 0;
    // [0, r]: Taylor terms
    for (int p = linear ? 1 : 2; p <= 6; ++p)
      acc += tc[p] * std::pow(sg, p) / factorial(p) * std::pow(r, p - ib) / (p - ib);
    // [r, X]: Gauss-Legendre panels in ln u
    const double v0 = std::log(r), v1 = std::log(X);
    const int panels = static_cast<int>(std::ceil((v1 - v0) / 0.25));
    auto f = [&](double v) { return kinf.increment(sg * std::exp(v)) * std::exp(-v * ib); };
    for (int k = 0; k < panels; ++k) acc += gauss_legendre20(f, v0 + (v1 - v0) * k / panels, v0 + (v1 - v0) * (k + 1) / panels);
    // [X, inf): tail model minus K_inf(0)
    acc -= tc[0] * beta * std::pow(X, -ib);
    acc += kinf.tail_integral(X, sg, ib + 1);
    out[side] = acc / beta;
  }
  return {out[0], out[1]};
}

std::pair<double, double> c_k_pm_t_domain(const KInfinity& kinf, double beta) {
  require_smooth(kinf, "C_K");
  const bool linear = linear_term_counts(kinf, beta, "C_K");
  const auto& tc = kinf.taylor();
  const double r = KInfinity::kTaylorRadius, X = kinf.x_core();
  const double t1 = std::pow(X, -1 / beta), t2 = std::pow(r, -1 / beta);
  std::array<double, 2> out{};
  for (int side = 0; side < 2; ++side) {
    const double sg = side == 0 ? 1.0 : -1.0;
    // t in (0, t1): K_inf(+-t^-beta) from the tail model, integrated numerically
    auto near = [&](double t) { return t > 0 ? kinf.tail_model(sg * std::pow(t, -beta)) : 0.0; };
    double acc = -tc[0] * t1 + integrate_gk(near, 0.0, t1, 1e-13);
    // t in (t1, t2): adaptive Gauss-Kronrod on the table, split at decades
    double lo = t1;
    while (lo < t2) {
      const double hi = std::min(t2, lo * 4);
      acc += integrate_gk([&](double t) { return kinf.increment(sg * std::pow(t, -beta)); }, lo, hi, 1e-9);
      lo = hi;
    }
    // t > t2: Taylor terms, int_{t2}^inf t^{-p beta} dt
    for (int p = linear ? 1 : 2; p <= 6; ++p)
      acc += tc[p] * std::pow(sg, p) / factorial(p) * std::pow(t2, 1 - p * beta) / (p * beta - 1);
    out[side] = acc;
  }
  return {out[0], out[1]};
}

namespace {
void check_alpha_beta(double p) {
  if (!(p > 1 && p < 2)) fail(ErrorCode::Domain, "alpha beta must lie in (1, 2)");
}
}  // namespace

double cbar_bracket(double p) {
  check_alpha_beta(p);
  // int_1^inf x^-p/(x^2+1) dx = int_0^1 y^p/(1+y^2) dy
  const double i1 = integrate_ts([&](double y) { return std::pow(y, p) / (1 + y * y); }, 0.0, 1.0, 1e-14);
  const double i2 = integrate_ts([&](double x) { return std::pow(x, 2 - p) / (1 + x * x); }, 0.0, 1.0, 1e-14);
  // int_0^inf x^{2-p}(x^2+3)/(x^2+1)^2 dx, with x = 1/y on [1, inf)
  const double i3a =
      integrate_ts([&](double x) { return std::pow(x, 2 - p) * (x * x + 3) / ((x * x + 1) * (x * x + 1)); }, 0.0, 1.0, 1e-14);
  const double i3b =
      integrate_ts([&](double y) { return std::pow(y, p - 2) * (1 + 3 * y * y) / ((1 + y * y) * (1 + y * y)); }, 0.0, 1.0, 1e-14);
  return 1 / (p - 1) + p * (i1 - i2) + i3a + i3b;
}

double cbar_bracket_midpoint(double p) {
  check_alpha_beta(p);
  // int_0^1 y^c g(y) dy = int_0^1 6 w^{6c+5} g(w^6) dw, composite midpoint
  auto mid = [](double c, auto g) {
    const int n = 1 << 20;
    double s = 0;
    for (int k = 0; k < n; ++k) {
      const double w = (k + 0.5) / n, y = std::pow(w, 6);
      s += 6 * std::pow(w, 6 * c + 5) * g(y);
    }
    return s / n;
  };
  const double i1 = mid(p, [](double y) { return 1 / (1 + y * y); });
  const double i2 = mid(2 - p, [](double y) { return 1 / (1 + y * y); });
  const double i3a = mid(2 - p, [](double x) { return (x * x + 3) / ((x * x + 1) * (x * x + 1)); });
  const double i3b = mid(p - 2, [](double y) { return (1 + 3 * y * y) / ((1 + y * y) * (1 + y * y)); });
  return 1 / (p - 1) + p * (i1 - i2) + i3a + i3b;
}

GammaConstants gammas_and_cbar(double p, double sigma1, double sigma2, double cPlus, double cMinus) {
  check_alpha_beta(p);
  GammaConstants g{};
  g.gamma2 = (cPlus > 0 ? sigma2 * std::pow(cPlus, p) : 0.0) + (cMinus > 0 ? sigma1 * std::pow(cMinus, p) : 0.0);
  g.gamma1 = (cPlus < 0 ? sigma2 * std::pow(-cPlus, p) : 0.0) + (cMinus < 0 ? sigma1 * std::pow(-cMinus, p) : 0.0);
  if (!(g.gamma1 + g.gamma2 > 0)) fail(ErrorCode::Degenerate, "gamma1 + gamma2 = 0: degenerate limit");
  g.bracket = cbar_bracket(p);
  g.cBar = (g.gamma2 - g.gamma1) / (g.gamma2 + g.gamma1) * g.bracket;
  return g;
}

// --- EtaK ---------------------------------------------------------------

namespace {
constexpr double kTableStep = 0.02;  // spacing of the d-table in ln a
}

EtaK::EtaK(const KInfinity& kinf, const CoefficientSpec& coefs) : kinf_(&kinf), spec_(coefs) {
  require_smooth(kinf, "eta_K");
  a_ = kinf.process().a();
  if (a_.size() != coefs.J) fail(ErrorCode::InvalidArgument, "eta_K coefficients do not match the process");
  const std::size_t J = a_.size();
  amax_suffix_.assign(J, 0.0);
  for (std::size_t i = J; i-- > 0;) amax_suffix_[i] = std::max(std::abs(a_[i]), i + 1 < J ? amax_suffix_[i + 1] : 0.0);
  for (int p = 1; p <= 6; ++p) {
    auto& v = a_suffix_[p - 1];
    v.assign(J + 1, 0.0);
    for (std::size_t n = J; n-- > 0;) v[n] = v[n + 1] + std::pow(a_[n], p);
  }

  double amin = INFINITY, amaxv = 0;
  for (double a : a_) {
    amin = std::min(amin, std::abs(a));
    amaxv = std::max(amaxv, std::abs(a));
  }
  if (!(amin > 0)) fail(ErrorCode::InvalidArgument, "eta_K needs nonzero coefficients");
  s_lo_ = std::log(amin) - 2 * kTableStep;
  s_step_ = kTableStep;
  const auto n = static_cast<std::size_t>(std::ceil((std::log(amaxv) - s_lo_) / s_step_)) + 3;
  d_table_.resize(n);
  for (std::size_t i = 0; i < n; ++i) d_table_[i] = kinf.expect_increment(std::exp(s_lo_ + s_step_ * i));

  const double alpha = kinf.process().innovations().spec().alpha;
  fit_q_ = alpha < 1 ? 1.0 : 2.0;
  const double a1 = std::exp(s_lo_), a2 = a1 / 16;
  const double d1 = d_table_[0], d2 = kinf.expect_increment(a2);
  // c1 a^alpha + c2 a^q through (a1, d1), (a2, d2)
  const double m11 = std::pow(a1, alpha), m12 = std::pow(a1, fit_q_), m21 = std::pow(a2, alpha), m22 = std::pow(a2, fit_q_);
  const double det = m11 * m22 - m12 * m21;
  fit_c1_ = (d1 * m22 - m12 * d2) / det;
  fit_c2_ = (m11 * d2 - m21 * d1) / det;

  holder_exp_ = 0.5 * (alpha + 1 / coefs.beta);
  holder_c_ = 0;
  for (std::size_t i = 0; i < n; ++i)
    holder_c_ = std::max(holder_c_, std::abs(d_table_[i]) / std::exp(holder_exp_ * (s_lo_ + s_step_ * i)));
  holder_c_ = std::max(holder_c_, std::abs(d2) / std::pow(a2, holder_exp_)) * 1.05;

  d_suffix_.assign(J + 1, 0.0);
  for (std::size_t k = J; k-- > 0;) d_suffix_[k] = d_suffix_[k + 1] + d(a_[k]);
}

double EtaK::d_fit(double a) const {
  const double alpha = kinf_->process().innovations().spec().alpha;
  return fit_c1_ * std::pow(a, alpha) + fit_c2_ * std::pow(a, fit_q_);
}

double EtaK::d(double a) const {
  const double s = std::log(a);
  if (s < s_lo_) return d_fit(a);
  const double t = (s - s_lo_) / s_step_;
  if (t > static_cast<double>(d_table_.size() - 1)) return kinf_->expect_increment(a);
  auto i = static_cast<std::ptrdiff_t>(std::floor(t));
  i = std::clamp<std::ptrdiff_t>(i - 1, 0, static_cast<std::ptrdiff_t>(d_table_.size()) - 4);
  // cubic Lagrange through nodes i..i+3
  const double u = t - static_cast<double>(i);
  double v = 0;
  for (int k = 0; k < 4; ++k) {
    double w = 1;
    for (int m = 0; m < 4; ++m)
      if (m != k) w *= (u - m) / (k - m);
    v += w * d_table_[static_cast<std::size_t>(i + k)];
  }
  return v;
}

std::size_t EtaK::taylor_start(double x) const {
  const double ax = std::abs(x);
  if (ax == 0.0) return 1;
  // first index with amax_suffix * |x| < radius
  const auto it = std::partition_point(amax_suffix_.begin(), amax_suffix_.end(),
                                       [&](double m) { return m * ax >= KInfinity::kTaylorRadius; });
  return static_cast<std::size_t>(it - amax_suffix_.begin()) + 1;
}

double EtaK::truncated(double x) const { return range(x, 1, a_.size()); }

double EtaK::range(double x, std::size_t lo, std::size_t hi) const {
  if (lo < 1) lo = 1;
  if (hi > a_.size()) fail(ErrorCode::InvalidArgument, "eta_K range beyond J");
  if (lo > hi) return 0.0;
  const std::size_t js = std::max(taylor_start(x), lo);
  const auto& tc = kinf_->taylor();
  double s = 0;
  for (std::size_t j = lo; j < js && j <= hi; ++j) s += kinf_->increment(a_[j - 1] * x);
  if (js <= hi) {
    double xp = 1;
    for (int p = 1; p <= 6; ++p) {
      xp *= x;
      s += tc[p] / factorial(p) * xp * (a_suffix_[p - 1][js - 1] - a_suffix_[p - 1][hi]);
    }
  }
  return s - (d_suffix_[lo - 1] - d_suffix_[hi]);
}

EtaK::Value EtaK::full(double x, double tol) const {
  const auto& tc = kinf_->taylor();
  const bool linear = linear_term_counts(*kinf_, spec_.beta, "eta_K");
  Value v{};
  v.truncated = truncated(x);
  // explicit terms past J while a_j |x| is outside the Taylor range
  double extra = 0;
  std::size_t j = a_.size() + 1;
  auto coef = [&](std::size_t j) { return std::pow(double(j), -spec_.beta) * sv_eval(spec_.ell, double(j)); };
  for (double aj = coef(j); aj * std::abs(x) >= KInfinity::kTaylorRadius; aj = coef(++j))
    extra += kinf_->increment(aj * x) - d(aj);
  CoefficientSpec rest = spec_;
  rest.J = j - 1;
  double tail = 0, xp = 1;
  for (int p = 1; p <= 6; ++p) {
    xp *= x;
    if (p == 1 && !linear) continue;
    tail += tc[p] / factorial(p) * xp * truncation_budget(rest, p);
  }
  const double alpha = kinf_->process().innovations().spec().alpha;
  tail -= fit_c1_ * truncation_budget(rest, alpha) + fit_c2_ * truncation_budget(rest, fit_q_);
  v.tail_estimate = extra + tail;
  v.value = v.truncated + v.tail_estimate;

  // |K_inf(a x) - K_inf(0)| <= L1 a |x| (or L2 (a x)^2 / 2 when K_inf'(0) = 0),
  // |d(a)| <= holder_c a^holder_exp
  double L = 0;
  if (linear) {
    for (double t : {0.0, 0.01, 0.1, 0.3, 0.6, 1.0, 1.5, 2.0, 3.0, 5.0})
      L = std::max({L, std::abs(kinf_->derivative(t)), std::abs(kinf_->derivative(-t))});
    v.remainder_bound = L * 1.1 * std::abs(x) * truncation_budget(rest, 1.0);
  } else {
    const double hh = 1e-3;
    for (double t : {0.0, 0.01, 0.1, 0.3, 0.6, 1.0, 1.5, 2.0, 3.0, 5.0})
      for (double sg : {1.0, -1.0})
        L = std::max(L, std::abs(kinf_->derivative(sg * t + hh) - kinf_->derivative(sg * t - hh)) / (2 * hh));
    v.remainder_bound = L * 1.1 * x * x / 2 * truncation_budget(rest, 2.0);
  }
  v.remainder_bound += holder_c_ * truncation_budget(rest, holder_exp_);
  if (v.remainder_bound > tol) fail(ErrorCode::Convergence, "eta_K remainder bound exceeds the tolerance");
  return v;
}

}  // namespace lmf

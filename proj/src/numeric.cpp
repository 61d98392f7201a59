#include "lmf/numeric.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <cstdio>
#include <thread>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

namespace lmf {

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng Rng::substream(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = splitmix64(master);
  s = splitmix64(s ^ splitmix64(a + 0x632be59bd9b4e019ULL));
  s = splitmix64(s ^ splitmix64(b + 0x8cb92ba72f3d8dd7ULL));
  return Rng(s);
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

unsigned default_workers() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(count)));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto body = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next = count;
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// --- quadrature ---------------------------------------------------------

namespace {

struct Gl20Table {
  std::vector<double> x, w;
  Gl20Table() {
    using G = boost::math::quadrature::gauss<double, 20>;
    const auto& ax = G::abscissa();
    const auto& wt = G::weights();
    // Boost stores the non-negative half; expand to the full symmetric rule.
    for (std::size_t i = ax.size(); i-- > 0;) {
      if (ax[i] == 0.0) continue;
      x.push_back(-ax[i]);
      w.push_back(wt[i]);
    }
    for (std::size_t i = 0; i < ax.size(); ++i) {
      x.push_back(ax[i]);
      w.push_back(wt[i]);
    }
  }
};

const Gl20Table& gl20() {
  static const Gl20Table table;
  return table;
}

}  // namespace

std::span<const double> gl20_nodes() { return gl20().x; }
std::span<const double> gl20_weights() { return gl20().w; }

double gauss_legendre20(const std::function<double(double)>& f, double a, double b) {
  const auto& t = gl20();
  const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
  double s = 0.0;
  for (std::size_t i = 0; i < t.x.size(); ++i) s += t.w[i] * f(mid + half * t.x[i]);
  return s * half;
}

cplx gauss_legendre20_c(const std::function<cplx(double)>& f, double a, double b) {
  const auto& t = gl20();
  const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
  cplx s = 0.0;
  for (std::size_t i = 0; i < t.x.size(); ++i) s += t.w[i] * f(mid + half * t.x[i]);
  return s * half;
}

namespace {
std::string fmt_sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}
}  // namespace

double integrate_gk(const std::function<double(double)>& f, double a, double b, double abs_tol,
                    unsigned max_depth) {
  if (a == b) return 0.0;
  double err = 0.0, l1 = 0.0;
  const double rel = 1e-14;
  double r = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, max_depth, rel, &err, &l1);
  if (!(std::isfinite(r)) || err > abs_tol) {
    // One retry splitting the interval, which helps with interior kinks.
    const double m = 0.5 * (a + b);
    double e1 = 0.0, e2 = 0.0;
    double r1 = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, m, max_depth, rel, &e1, &l1);
    double r2 = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, m, b, max_depth, rel, &e2, &l1);
    if (!std::isfinite(r1 + r2) || e1 + e2 > abs_tol)
      fail(ErrorCode::Convergence, "gauss-kronrod quadrature did not reach tolerance (err " + fmt_sci(e1 + e2) + ")");
    return r1 + r2;
  }
  return r;
}

double integrate_ts(const std::function<double(double)>& f, double a, double b, double abs_tol) {
  if (a == b) return 0.0;
  static thread_local boost::math::quadrature::tanh_sinh<double> integrator(12);
  double err = 0.0, l1 = 0.0;
  std::size_t levels = 0;
  double r = integrator.integrate(f, a, b, 1e-13, &err, &l1, &levels);
  if (!std::isfinite(r) || err > std::max(abs_tol, 1e-13 * l1))
    fail(ErrorCode::Convergence, "tanh-sinh quadrature did not reach tolerance");
  return r;
}

double integrate_to_infinity(const std::function<double(double)>& f, double a, double abs_tol) {
  double total = 0.0;
  double lo = a;
  double width = std::max(1.0, std::abs(a));
  int quiet = 0;
  for (int panel = 0; panel < 400; ++panel) {
    const double hi = lo + width;
    const double part = integrate_gk(f, lo, hi, abs_tol / 64);
    total += part;
    if (std::abs(part) < abs_tol / 64) {
      if (++quiet >= 2) return total;
    } else {
      quiet = 0;
    }
    lo = hi;
    width *= 2.0;
  }
  fail(ErrorCode::Convergence, "semi-infinite integral did not settle");
}

// --- statistics ---------------------------------------------------------

double ks_statistic(std::span<const double> sorted, const std::function<double(double)>& cdf) {
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double F = cdf(sorted[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - F, F - static_cast<double>(i) / n});
  }
  return d;
}

double kolmogorov_q(double lambda) {
  if (lambda < 1e-3) return 1.0;
  if (lambda < 1.18) {
    // Small-lambda form (Jacobi theta transformation) converges faster here.
    const double y = std::exp(-kPi * kPi / (8.0 * lambda * lambda));
    double s = 0.0;
    for (int k = 1; k < 40; k += 2) s += std::pow(y, k * k);
    return std::clamp(1.0 - std::sqrt(2.0 * kPi) / lambda * s, 0.0, 1.0);
  }
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 == 1 ? term : -term);
    if (term < 1e-18) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

TwoSampleKs ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) fail(ErrorCode::InvalidArgument, "two-sample KS needs non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  return {d, kolmogorov_q((ne + 0.12 + 0.11 / ne) * d)};
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) fail(ErrorCode::InvalidArgument, "quantile of empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, 0.5);
}

double ls_slope(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) fail(ErrorCode::InvalidArgument, "slope fit needs at least two points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace lmf

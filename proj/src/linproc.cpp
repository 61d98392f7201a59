#include "lmf/linproc.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>

#include <fftw3.h>

#include "fftw_lock.hpp"

namespace lmf {

std::mutex& detail::fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

namespace {

constexpr int kSeriesDegree = 18;       // total degree in (v^alpha, v) of the log-cf expansion
constexpr double kSeriesBound = 0.1;    // bound on |cf_raw(v) - 1| over the series range
constexpr double kLogModulusFloor = -40.0;
constexpr std::size_t kDirectWork = 8192;  // N J at or below this convolves directly

std::size_t fft_friendly(std::size_t n) {
  for (std::size_t m = std::max<std::size_t>(n, 1);; ++m) {
    std::size_t r = m;
    for (std::size_t p : {2, 3, 5, 7})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

// Truncated bivariate polynomial in X = v^alpha and Y = v, total degree <= kSeriesDegree.
using Poly2 = std::vector<std::vector<cplx>>;

Poly2 poly2_zero() { return Poly2(kSeriesDegree + 1, std::vector<cplx>(kSeriesDegree + 1, 0.0)); }

Poly2 poly2_mul(const Poly2& p, const Poly2& q) {
  Poly2 r = poly2_zero();
  for (int j1 = 0; j1 <= kSeriesDegree; ++j1)
    for (int k1 = 0; j1 + k1 <= kSeriesDegree; ++k1) {
      if (p[j1][k1] == 0.0) continue;
      for (int j2 = 0; j1 + k1 + j2 <= kSeriesDegree; ++j2)
        for (int k2 = 0; j1 + k1 + j2 + k2 <= kSeriesDegree; ++k2) r[j1 + j2][k1 + k2] += p[j1][k1] * q[j2][k2];
    }
  return r;
}

template <typename T>
void put_le(std::ostream& os, T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    v = std::bit_cast<T>(bytes);
  }
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) fail(ErrorCode::Io, "path batch file truncated");
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    v = std::bit_cast<T>(bytes);
  }
  return v;
}

constexpr char kMagic[8] = {'L', 'M', 'F', 'P', 'A', 'T', 'H', '1'};

}  // namespace

void CoefficientSpec::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) fail(ErrorCode::Domain, "coefficients: beta must be positive");
  if (J < 1) fail(ErrorCode::Domain, "coefficients: J must be >= 1");
  ell.validate();
}

void check_summable(double alpha, double beta) {
  if (!(alpha * beta > 1.0))
    fail(ErrorCode::Regime, "linear process: alpha * beta must exceed 1 for a.s. convergence");
}

std::vector<double> coefficients(const CoefficientSpec& spec) {
  spec.validate();
  std::vector<double> a(spec.J);
  a[0] = spec.ell.sigma;
  for (std::size_t i = 2; i <= spec.J; ++i) {
    const double x = static_cast<double>(i);
    a[i - 1] = spec.ell.is_constant() ? spec.ell.sigma * std::pow(x, -spec.beta)
                                      : std::exp(-spec.beta * std::log(x) + spec.ell.log_value(x));
  }
  return a;
}

double truncation_budget(const CoefficientSpec& spec, double alpha_prime) {
  spec.validate();
  const double p = alpha_prime * spec.beta;
  if (!(p > 1.0)) fail(ErrorCode::Regime, "truncation budget: alpha' beta must exceed 1");
  const double x0 = static_cast<double>(spec.J) + 0.5;
  if (spec.ell.is_constant()) return std::pow(spec.ell.sigma, alpha_prime) * std::pow(x0, 1.0 - p) / (p - 1.0);
  // int_{x0}^inf a(x)^a' dx in s = ln x
  const double s0 = std::log(x0);
  auto g = [&](double t) {
    const double s = s0 + t;
    return std::exp(alpha_prime * (-spec.beta * s + spec.ell.log_value_at_log(s)) + s);
  };
  const double scale = g(0.0) / (p - 1.0);
  return integrate_to_infinity(g, 0.0, 1e-10 * scale);
}

std::size_t default_truncation(double beta, const SlowlyVaryingSpec& ell, std::size_t N, double tail_tol) {
  if (beta <= 1.0) return 16 * N;
  CoefficientSpec c{beta, ell, 1};
  std::size_t lo = 1, hi = 1;
  for (c.J = hi; truncation_budget(c, 1.0) > tail_tol; c.J = hi) {
    lo = hi;
    hi *= 2;
    if (hi > (std::size_t{1} << 40)) fail(ErrorCode::Resource, "default truncation: tail does not reach tolerance");
  }
  while (hi - lo > 1) {
    c.J = lo + (hi - lo) / 2;
    if (truncation_budget(c, 1.0) > tail_tol)
      lo = c.J;
    else
      hi = c.J;
  }
  return hi;
}

// --- characteristic function and density -----------------------------------

LinearProcess::LinearProcess(const CoefficientSpec& coefs, const InnovationSpec& innov)
    : a_(coefficients(coefs)), eps_(innov) {
  check_summable(innov.alpha, coefs.beta);
  if (!eps_.closed_form_cf())
    fail(ErrorCode::Config, "linear process cf requires innovations with constant h");
  const double alpha = innov.alpha;
  const auto& c = eps_.series_coefficients();
  const cplx d = eps_.series_alpha_coefficient();

  // w(v) = cf_raw(v) - 1 as a polynomial in (v^alpha, v)
  Poly2 w = poly2_zero();
  w[1][0] = d;
  cplx ik = 1.0;
  double fact = 1.0;
  for (int k = 1; k <= kSeriesDegree; ++k) {
    ik *= cplx(0, 1);
    fact *= k;
    w[0][k] = c[k] * ik / fact;
  }
  // log(1 + w) = sum_n (-1)^{n+1} w^n / n
  Poly2 logw = poly2_zero(), wn = w;
  for (int n = 1; n <= kSeriesDegree; ++n) {
    for (int j = 0; j <= kSeriesDegree; ++j)
      for (int k = 0; j + k <= kSeriesDegree; ++k) logw[j][k] += (n % 2 == 1 ? 1.0 : -1.0) * wn[j][k] / double(n);
    if (n < kSeriesDegree) wn = poly2_mul(wn, w);
  }
  logw[0][1] -= cplx(0, eps_.shift());  // the centering shift is an exact linear phase
  for (int j = 0; j <= kSeriesDegree; ++j)
    for (int k = 0; j + k <= kSeriesDegree; ++k)
      if (logw[j][k] != 0.0) {
        exps_.push_back(j * alpha + k);
        logc_.push_back(logw[j][k]);
      }

  // series range: |cf_raw - 1| bounded by kSeriesBound
  auto bound = [&](double v) {
    double b = std::abs(d) * std::pow(v, alpha), t = 1.0;
    for (int k = 1; k <= kSeriesDegree; ++k) {
      t *= v / k;
      b += std::abs(c[k]) * t;
    }
    return b;
  };
  double lo = 0.0, hi = 1.0 / innov.x0;
  while (bound(hi) < kSeriesBound) hi *= 2.0;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (bound(mid) < kSeriesBound ? lo : hi) = mid;
  }
  v_cut_ = lo;

  // cut points: every index below 64, then geometric with ratio 1.1, plus J
  const std::size_t J = a_.size();
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < std::min<std::size_t>(64, J); ++i) idx.push_back(i);
  for (double g = 64.0; g < static_cast<double>(J); g *= 1.1) {
    const auto i = static_cast<std::size_t>(g);
    if (i > idx.back()) idx.push_back(i);
  }
  if (idx.back() != J) idx.push_back(J);

  std::vector<double> suffix_max(J + 1, 0.0);
  for (std::size_t i = J; i-- > 0;) suffix_max[i] = std::max(suffix_max[i + 1], a_[i]);

  // Scaled suffix power sums P_p(I) = sum_{i >= I} (a_i / amax(I))^e_p, by a
  // backward recurrence across the cuts.
  const std::size_t np = exps_.size();
  cuts_.resize(idx.size());
  for (std::size_t m = idx.size(); m-- > 0;) {
    Cut& cut = cuts_[m];
    cut.index = idx[m];
    cut.amax = suffix_max[idx[m]];
    cut.P.assign(np, 0.0);
    if (cut.index == J) continue;
    const Cut& next = cuts_[m + 1];
    if (next.index < J) {
      const double r = next.amax / cut.amax;
      for (std::size_t p = 0; p < np; ++p) cut.P[p] = next.P[p] * std::pow(r, exps_[p]);
    }
    std::vector<double> ra(kSeriesDegree + 1), rk(kSeriesDegree + 1);
    for (std::size_t i = cut.index; i < next.index; ++i) {
      const double r = a_[i] / cut.amax;
      const double rpa = std::pow(r, alpha);
      ra[0] = rk[0] = 1.0;
      for (int q = 1; q <= kSeriesDegree; ++q) {
        ra[q] = ra[q - 1] * rpa;
        rk[q] = rk[q - 1] * r;
      }
      std::size_t p = 0;
      for (int j = 0; j <= kSeriesDegree; ++j)
        for (int k = 0; j + k <= kSeriesDegree; ++k)
          if (logw[j][k] != 0.0) cut.P[p++] += ra[j] * rk[k];
    }
  }

  // cutoff where |cf| has dropped below 1e-18 for good
  int quiet = 0;
  for (double u = 1e-3; u < 1e6; u *= 1.05) {
    if (std::abs(cf(u)) < 1e-18) {
      if (++quiet >= 10) {
        u_max_ = u;
        break;
      }
    } else {
      quiet = 0;
      u_max_ = 0.0;
    }
  }
}

cplx LinearProcess::log_tail(double v_scale, const Cut& cut) const {
  cplx acc = 0.0;
  for (std::size_t p = 0; p < exps_.size(); ++p) acc += logc_[p] * std::pow(v_scale, exps_[p]) * cut.P[p];
  return acc;
}

cplx LinearProcess::cf(double u) const {
  if (u == 0.0) return 1.0;
  const double v = std::abs(u);
  // first cut whose suffix stays inside the series range
  auto it = std::partition_point(cuts_.begin(), cuts_.end(), [&](const Cut& c) { return c.amax * v > v_cut_; });
  cplx logsum = it->index < a_.size() ? log_tail(it->amax * v, *it) : cplx(0.0);
  cplx prod = 1.0;
  for (std::size_t i = 0; i < it->index; ++i) {
    prod *= eps_.cf(a_[i] * v);
    if (std::log(std::abs(prod)) + logsum.real() < kLogModulusFloor) break;
  }
  const cplx r = prod * std::exp(logsum);
  return u > 0 ? r : std::conj(r);
}

cplx LinearProcess::cf_direct(double u) const {
  cplx prod = 1.0;
  for (double ai : a_) prod *= eps_.cf(ai * u);
  return prod;
}

namespace {
constexpr double kPanel = 0.25;       // base panel width in u
constexpr double kMaxPhase = 12.0;    // radians of e^{-iux} per Gauss-Legendre-20 panel
}  // namespace

// Inverse-transform integrals over u in (0, u_max): graded panels toward 0,
// where cf has a |u|^alpha cusp, then uniform panels; panels are split so the
// phase of e^{-iux} moves by at most kMaxPhase over each.
template <typename F>
void LinearProcess::for_each_node(double xmax, F&& fn) const {
  const auto nodes = gl20_nodes();
  const auto weights = gl20_weights();
  auto panel = [&](double lo, double hi) {
    const int split = std::max(1, static_cast<int>(std::ceil((hi - lo) * xmax / kMaxPhase)));
    for (int s = 0; s < split; ++s) {
      const double a = lo + (hi - lo) * s / split, b = lo + (hi - lo) * (s + 1) / split;
      const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        const double u = mid + half * nodes[i];
        fn(u, weights[i] * half);
      }
    }
  };
  const double u0 = std::min(kPanel, u_max_);
  for (int k = 0; k < 48; ++k) panel(u0 * std::ldexp(1.0, -k - 1), u0 * std::ldexp(1.0, -k));
  const int n = static_cast<int>(std::ceil((u_max_ - u0) / kPanel));
  for (int k = 0; k < n; ++k) panel(u0 + (u_max_ - u0) * k / n, u0 + (u_max_ - u0) * (k + 1) / n);
}

// Tier k holds nodes and cf values good for |x| <= 48 * 4^k.
const std::vector<LinearProcess::Node>& LinearProcess::node_cache(int tier) const {
  if (u_max_ == 0.0) fail(ErrorCode::Convergence, "linear process cf does not decay below 1e-18 on |u| < 1e6");
  auto& t = tiers_[tier];
  std::call_once(t.once, [&] {
    for_each_node(std::ldexp(kMaxPhase / kPanel, 2 * tier), [&](double u, double w) { t.nodes.push_back({u, w, cf(u)}); });
  });
  return t.nodes;
}

template <typename G>
void LinearProcess::integrate_nodes(double xmax, G&& g) const {
  for (int tier = 0; tier < kTiers; ++tier)
    if (xmax <= std::ldexp(kMaxPhase / kPanel, 2 * tier)) {
      for (const auto& nd : node_cache(tier)) g(nd.u, nd.w, nd.phi);
      return;
    }
  if (u_max_ == 0.0) fail(ErrorCode::Convergence, "linear process cf does not decay below 1e-18 on |u| < 1e6");
  for_each_node(xmax, [&](double u, double w) { g(u, w, cf(u)); });
}

LinearProcess::Density LinearProcess::density(double x) const {
  // f(x) = (1/pi) int_0^inf Re(e^{-iux} cf(u)) du, f'(x) = (1/pi) int_0^inf u Im(e^{-iux} cf(u)) du
  double f = 0.0, fp = 0.0;
  integrate_nodes(std::abs(x), [&](double u, double w, cplx phi) {
    const cplx z = std::exp(cplx(0, -u * x)) * phi;
    f += w * z.real();
    fp += w * u * z.imag();
  });
  return {f / kPi, fp / kPi};
}

double LinearProcess::interval_probability(double a, double b) const {
  if (!(a <= b)) fail(ErrorCode::InvalidArgument, "interval probability: need a <= b");
  // (1/pi) int_0^inf Re(cf(u) (e^{-iua} - e^{-iub}) / (iu)) du
  double acc = 0.0;
  integrate_nodes(std::max(std::abs(a), std::abs(b)), [&](double u, double w, cplx phi) {
    const cplx k = (std::exp(cplx(0, -u * a)) - std::exp(cplx(0, -u * b))) / cplx(0, u);
    acc += w * (phi * k).real();
  });
  return acc / kPi;
}

// --- FFT convolution ---------------------------------------------------------

struct PathSimulator::Impl {
  fftw_plan forward = nullptr, backward = nullptr;
  fftw_complex* a_hat = nullptr;
  ~Impl() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
    if (a_hat) fftw_free(a_hat);
  }
};

PathSimulator::PathSimulator(std::vector<double> a, std::size_t N) : a_(std::move(a)), N_(N), impl_(new Impl) {
  if (a_.empty() || N_ == 0) fail(ErrorCode::InvalidArgument, "path simulator: empty kernel or N = 0");
  L_ = fft_friendly(N_ + a_.size() - 1);
  if (N_ * a_.size() <= kDirectWork) return;
  const std::size_t nc = L_ / 2 + 1;
  double* buf = fftw_alloc_real(L_);
  fftw_complex* spec = fftw_alloc_complex(nc);
  impl_->a_hat = fftw_alloc_complex(nc);
  if (!buf || !spec || !impl_->a_hat) fail(ErrorCode::Resource, "path simulator: FFT buffer allocation failed");
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    impl_->forward = fftw_plan_dft_r2c_1d(static_cast<int>(L_), buf, spec, FFTW_ESTIMATE);
    impl_->backward = fftw_plan_dft_c2r_1d(static_cast<int>(L_), spec, buf, FFTW_ESTIMATE);
  }
  std::fill(buf, buf + L_, 0.0);
  std::copy(a_.begin(), a_.end(), buf);
  fftw_execute_dft_r2c(impl_->forward, buf, impl_->a_hat);
  fftw_free(buf);
  fftw_free(spec);
}

PathSimulator::~PathSimulator() = default;

bool PathSimulator::uses_fft() const { return impl_->forward != nullptr; }

void PathSimulator::convolve(std::span<const double> eps, std::span<double> out) const {
  if (eps.size() != input_length() || out.size() != N_)
    fail(ErrorCode::InvalidArgument, "path simulator: buffer sizes do not match (N, J)");
  if (!uses_fft()) return convolve_direct(a_, eps, out);
  const std::size_t nc = L_ / 2 + 1;
  double* buf = fftw_alloc_real(L_);
  fftw_complex* spec = fftw_alloc_complex(nc);
  if (!buf || !spec) fail(ErrorCode::Resource, "path simulator: FFT buffer allocation failed");
  std::fill(buf, buf + L_, 0.0);
  std::copy(eps.begin(), eps.end(), buf);
  fftw_execute_dft_r2c(impl_->forward, buf, spec);
  for (std::size_t k = 0; k < nc; ++k) {
    const double re = spec[k][0] * impl_->a_hat[k][0] - spec[k][1] * impl_->a_hat[k][1];
    const double im = spec[k][0] * impl_->a_hat[k][1] + spec[k][1] * impl_->a_hat[k][0];
    spec[k][0] = re;
    spec[k][1] = im;
  }
  fftw_execute_dft_c2r(impl_->backward, spec, buf);
  // y[m] = sum_k a_{k+1} eps[m-k]; X_n = y[n + J - 2]
  const double scale = 1.0 / static_cast<double>(L_);
  const std::size_t off = a_.size() - 1;
  for (std::size_t n = 0; n < N_; ++n) out[n] = buf[n + off] * scale;
  fftw_free(buf);
  fftw_free(spec);
}

void convolve_direct(std::span<const double> a, std::span<const double> eps, std::span<double> out) {
  const std::size_t J = a.size();
  if (eps.size() != out.size() + J - 1) fail(ErrorCode::InvalidArgument, "direct convolution: size mismatch");
  for (std::size_t n = 0; n < out.size(); ++n) {
    double s = 0.0;
    for (std::size_t k = 0; k < J; ++k) s += a[k] * eps[n + J - 1 - k];
    out[n] = s;
  }
}

// --- simulation --------------------------------------------------------------

Rng replication_rng(std::uint64_t seed, std::uint64_t tag, std::uint64_t m) { return Rng::substream(seed, tag, m); }

void draw_innovations(const Innovations& eps, Rng& rng, std::span<double> out) {
  for (auto& e : out) e = eps.sample(rng);
}

PathBatch simulate_paths(const CoefficientSpec& coefs, const InnovationSpec& innov, std::size_t N, std::size_t M,
                         std::uint64_t seed, unsigned workers, std::size_t memory_budget) {
  if (N < 1 || M < 1) fail(ErrorCode::InvalidArgument, "simulate_paths: N and M must be >= 1");
  if (N > UINT32_MAX || M > UINT32_MAX) fail(ErrorCode::InvalidArgument, "simulate_paths: N or M too large");
  check_summable(innov.alpha, coefs.beta);
  const Innovations eps(innov);
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(M)));
  const std::size_t L = fft_friendly(N + coefs.J - 1);
  const double need = 8.0 * (static_cast<double>(N) * M + workers * (3.0 * L + N + coefs.J) + 2.0 * L);
  if (need > static_cast<double>(memory_budget))
    fail(ErrorCode::Resource, "simulate_paths: needs " + std::to_string(static_cast<std::uint64_t>(need)) +
                                  " bytes, budget is " + std::to_string(memory_budget));
  PathSimulator sim(coefficients(coefs), N);
  PathBatch batch;
  batch.N = static_cast<std::uint32_t>(N);
  batch.M = static_cast<std::uint32_t>(M);
  batch.J = coefs.J;
  batch.seed = seed;
  batch.values.assign(N * M, 0.0);
  parallel_for(M, workers, [&](std::size_t m) {
    std::vector<double> e(sim.input_length()), x(N);
    Rng rng = replication_rng(seed, 0, m);
    draw_innovations(eps, rng, e);
    sim.convolve(e, x);
    for (std::size_t n = 0; n < N; ++n) batch.values[n * M + m] = x[n];
  });
  return batch;
}

std::vector<double> regenerate_innovations(const PathBatch& batch, const InnovationSpec& innov, std::size_t m) {
  if (m >= batch.M) fail(ErrorCode::InvalidArgument, "regenerate_innovations: replication index out of range");
  const Innovations eps(innov);
  std::vector<double> e(batch.N + batch.J - 1);
  Rng rng = replication_rng(batch.seed, 0, m);
  draw_innovations(eps, rng, e);
  return e;
}

void write_path_batch(const std::string& path, const PathBatch& batch) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) fail(ErrorCode::Io, "cannot open '" + path + "' for writing");
  os.write(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(os, batch.N);
  put_le<std::uint32_t>(os, batch.M);
  put_le<std::uint64_t>(os, batch.J);
  put_le<std::uint64_t>(os, batch.seed);
  for (double v : batch.values) put_le<double>(os, v);
  if (!os) fail(ErrorCode::Io, "write to '" + path + "' failed");
}

PathBatch read_path_batch(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::Io, "cannot open '" + path + "'");
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0) fail(ErrorCode::Io, "'" + path + "' is not a path batch file");
  PathBatch b;
  b.N = get_le<std::uint32_t>(is);
  b.M = get_le<std::uint32_t>(is);
  b.J = get_le<std::uint64_t>(is);
  b.seed = get_le<std::uint64_t>(is);
  b.values.resize(static_cast<std::size_t>(b.N) * b.M);
  for (auto& v : b.values) v = get_le<double>(is);
  return b;
}

}  // namespace lmf

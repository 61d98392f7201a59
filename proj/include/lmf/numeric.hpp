#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lmf {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.141592653589793238462643383279502884;

enum class ErrorCode {
  InvalidArgument = 1,
  Domain = 2,        // parameter-region or argument-domain violation
  Convergence = 3,   // quadrature / iteration failed to reach tolerance
  Resource = 4,      // memory budget or similar
  Config = 5,
  Io = 6,
  Degenerate = 7,    // degenerate limit law
  Regime = 8,        // integral diverges in the requested parameter regime
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

// Random stream. Substreams are derived from (master seed, stream ids) by a
// SplitMix64 mix, so every replication owns an independent generator and the
// result of a run does not depend on how replications are scheduled.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng substream(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0);

  // Uniform on the lattice (k + 1/2) 2^-52, so u and 1 - u are both exact
  // and never 0 or 1.
  double uniform() { return (static_cast<double>(engine_() >> 12) + 0.5) * 0x1.0p-52; }
  double exponential() { return -std::log(uniform()); }
  std::uint64_t bits() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view data);

// Runs fn(i) for i in [0, count) on up to `workers` threads. Each index is
// processed exactly once; callers write results into per-index slots.
void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& fn);
unsigned default_workers();

// --- quadrature ---------------------------------------------------------

// Fixed 20-point Gauss-Legendre on [a,b].
double gauss_legendre20(const std::function<double(double)>& f, double a, double b);
cplx gauss_legendre20_c(const std::function<cplx(double)>& f, double a, double b);
// Nodes/weights on [-1,1] for the 20-point rule (abscissae ascending).
std::span<const double> gl20_nodes();
std::span<const double> gl20_weights();

// Adaptive Gauss-Kronrod (31 point) on a finite interval. Throws Convergence if
// the error estimate exceeds abs_tol.
double integrate_gk(const std::function<double(double)>& f, double a, double b, double abs_tol,
                    unsigned max_depth = 15);
// Tanh-sinh on a finite interval; tolerates integrable endpoint singularities.
double integrate_ts(const std::function<double(double)>& f, double a, double b, double abs_tol);

// Integral of f over [a, inf) by geometric panels of growing width; stops when
// a panel contributes less than abs_tol/64 twice in a row. f must be
// eventually monotone in magnitude.
double integrate_to_infinity(const std::function<double(double)>& f, double a, double abs_tol);

// --- statistics ---------------------------------------------------------

// One-sample KS distance of `sorted` (ascending) against `cdf`.
double ks_statistic(std::span<const double> sorted, const std::function<double(double)>& cdf);

struct TwoSampleKs {
  double distance;
  double p_value;
};
TwoSampleKs ks_two_sample(std::vector<double> a, std::vector<double> b);

// Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_q(double lambda);

double quantile_sorted(std::span<const double> sorted, double p);
double median(std::vector<double> v);
// Least-squares slope of y against x.
double ls_slope(std::span<const double> x, std::span<const double> y);

}  // namespace lmf

#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "lmf/innovations.hpp"
#include "lmf/numeric.hpp"
#include "lmf/regvar.hpp"

namespace lmf {

// a_i = i^-beta l(i), i = 1..J, with l(1) = sigma.
struct CoefficientSpec {
  double beta = 0.9;
  SlowlyVaryingSpec ell;
  std::size_t J = 1;

  void validate() const;
};

std::vector<double> coefficients(const CoefficientSpec& spec);

// sum_{j > J} a_j^alpha' by integral comparison (midpoint-shifted).
double truncation_budget(const CoefficientSpec& spec, double alpha_prime);

// Default truncation: beta > 1 takes the smallest J with sum_{j>J} a_j <= tail_tol,
// otherwise J = 16 N.
std::size_t default_truncation(double beta, const SlowlyVaryingSpec& ell, std::size_t N, double tail_tol = 1e-3);

// Throws Regime unless alpha beta > 1.
void check_summable(double alpha, double beta);

// Truncated linear process X_n = sum_{i<=J} a_i e_{n-i}: characteristic function
// and density. Requires h == 1 innovations (closed-form cf route).
class LinearProcess {
 public:
  LinearProcess(const CoefficientSpec& coefs, const InnovationSpec& innov);

  const std::vector<double>& a() const { return a_; }
  const Innovations& innovations() const { return eps_; }
  std::size_t J() const { return a_.size(); }

  // prod_i cf_e(a_i u); factors with a_i u below the series cut enter through
  // precomputed power sums of log cf_e.
  cplx cf(double u) const;
  // Direct product of all J factors; reference route.
  cplx cf_direct(double u) const;
  // |cf(u)| < 1e-18 for u beyond this point (scanned on a geometric grid);
  // 0 when that does not happen below 1e6, and then density() throws.
  double cf_cutoff() const { return u_max_; }

  struct Density {
    double f, fprime;
  };
  Density density(double x) const;
  // P(a <= X <= b) by the same inversion.
  double interval_probability(double a, double b) const;

 private:
  struct Cut {
    std::size_t index;       // factors a_index.. (0-based) use the series
    double amax;             // max a_i over the suffix
    std::vector<double> P;   // power sums per exponent
  };
  cplx log_tail(double v_scale, const Cut& cut) const;
  struct Node {
    double u, w;
    cplx phi;
  };
  template <typename F>
  void for_each_node(double xmax, F&& fn) const;
  template <typename G>
  void integrate_nodes(double xmax, G&& g) const;
  const std::vector<Node>& node_cache(int tier) const;

  std::vector<double> a_;
  Innovations eps_;
  double v_cut_ = 0;                // series route for a_i |u| <= v_cut
  std::vector<double> exps_;        // exponents j alpha + k
  std::vector<cplx> logc_;          // log cf_e(v) = sum logc_[p] v^exps_[p]
  std::vector<Cut> cuts_;
  double u_max_ = 0;
  static constexpr int kTiers = 4;
  struct Tier {
    std::once_flag once;
    std::vector<Node> nodes;
  };
  mutable std::array<Tier, kTiers> tiers_;  // inversion nodes with cached cf values
};

// Fast linear convolution for fixed (a, N) through real FFTs (direct summation
// when N J is small).
class PathSimulator {
 public:
  PathSimulator(std::vector<double> a, std::size_t N);
  ~PathSimulator();
  PathSimulator(const PathSimulator&) = delete;
  PathSimulator& operator=(const PathSimulator&) = delete;

  std::size_t N() const { return N_; }
  std::size_t J() const { return a_.size(); }
  std::size_t fft_size() const { return L_; }
  std::size_t input_length() const { return N_ + a_.size() - 1; }
  bool uses_fft() const;

  // eps[k] = e_{1-J+k}, k < N+J-1; out[n-1] = X_n, n = 1..N.
  void convolve(std::span<const double> eps, std::span<double> out) const;

 private:
  std::vector<double> a_;
  std::size_t N_, L_;
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// O(N J) reference convolution with the same indexing as PathSimulator.
void convolve_direct(std::span<const double> a, std::span<const double> eps, std::span<double> out);

// Substream used for replication m of a run with this master seed and tag.
Rng replication_rng(std::uint64_t seed, std::uint64_t tag, std::uint64_t m);
void draw_innovations(const Innovations& eps, Rng& rng, std::span<double> out);

struct PathBatch {
  std::uint32_t N = 0, M = 0;
  std::uint64_t J = 0, seed = 0;
  std::vector<double> values;  // row-major N x M: values[n * M + m] = X_{n+1} of replication m

  double at(std::size_t n, std::size_t m) const { return values[n * M + m]; }
};

PathBatch simulate_paths(const CoefficientSpec& coefs, const InnovationSpec& innov, std::size_t N, std::size_t M,
                         std::uint64_t seed, unsigned workers = 1, std::size_t memory_budget = std::size_t{1} << 32);
// The innovations e_{1-J}..e_{N-1} behind replication m of a batch.
std::vector<double> regenerate_innovations(const PathBatch& batch, const InnovationSpec& innov, std::size_t m);

// Flat binary file: 32-byte header (magic "LMFPATH1", u32 N, u32 M, u64 J,
// u64 seed), then little-endian doubles in row-major order.
void write_path_batch(const std::string& path, const PathBatch& batch);
PathBatch read_path_batch(const std::string& path);

}  // namespace lmf

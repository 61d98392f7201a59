#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lmf/functionals.hpp"
#include "lmf/limits.hpp"
#include "lmf/linproc.hpp"
#include "lmf/regvar.hpp"

namespace lmf {

// How the limit law of Theorems 2-3 is centred: "mean-zero" drops the c-bar
// drift, "as-printed" keeps (gamma1+gamma2)^{1/ab} c-bar t^{1/ab}.
enum class DriftConvention { MeanZero, AsPrinted };

struct JPolicy {
  enum class Kind { Auto, Fixed, Multiple };
  Kind kind = Kind::Auto;
  std::size_t value = 0;   // fixed
  double multiple = 16;    // multiple, and auto for beta <= 1
  double tail_tol = 1e-3;  // auto for beta > 1
  std::size_t resolve(double beta, const SlowlyVaryingSpec& ell, std::size_t N) const;
  bool depends_on_n(double beta) const;
};

struct DiagnosticsConfig {
  std::vector<std::size_t> N{256, 512, 1024, 2048, 4096};
  std::size_t M = 300;
  double r = 1.2;
  std::size_t eta_draws = 1000000;
  std::vector<double> tail_levels{1e-2, 1e-3, 1e-4};
  double aN = 1e6;
};

struct Criteria {
  double trend_tol = 0.01;
  double ks_max = 0.1;        // KS at the largest N, t = 1
  double cf_gap_max = 0.08;   // empirical-CF gap at u = +-0.5
  double median_max = 0.05;   // theorem 3: Theorem-1-normalized median |S|
  double int_k_df_tol = 1e-8;
  double slope_slack = 0.3;
  double tail_rel = 0.15;
  double a_n_rel = 0.10;
  double p_min = 0.01;        // increment two-sample tests
};

struct ExperimentConfig {
  static constexpr const char* kSchema = "lmf-experiment/1";

  int theorem = 1;
  double alpha = 1.8, beta = 0.9;
  SlowlyVaryingSpec ell, h;
  InnovationSpec innov;  // alpha and h mirror the fields above
  FunctionalSpec K;
  std::vector<std::size_t> N;
  std::size_t M = 2000;
  std::vector<double> t{0.25, 0.5, 0.75, 1.0};
  JPolicy J;
  std::uint64_t seed = 1;
  unsigned workers = 0;  // 0: available parallelism; excluded from the hash
  DriftConvention drift = DriftConvention::MeanZero;
  DiagnosticsConfig diag;
  Criteria criteria;

  static ExperimentConfig preset(int theorem);
  // Overrides are "dotted.key=value"; value is read as JSON, else as a string.
  static ExperimentConfig from_json_text(const std::string& text, const std::vector<std::string>& overrides = {});
  static ExperimentConfig load(const std::string& path, const std::vector<std::string>& overrides = {});
  std::string to_json_text() const;  // canonical form, without workers
  std::uint64_t hash() const;        // fnv1a64 of the canonical form
  void validate() const;
  unsigned resolved_workers() const;
  CoefficientSpec coefficients(std::size_t N) const;
};

struct ConstantsReport {
  LimitConstants c;
  std::size_t J = 0;  // truncation the constants were computed at
  double skew = 0;    // (sigma2 - sigma1) / (sigma1 + sigma2)
  std::vector<std::size_t> N;
  std::vector<double> normThm1, normThm23;  // NaN where undefined
};
ConstantsReport compute_constants(const ExperimentConfig& cfg);

struct PartialSums {
  std::vector<std::size_t> N, J;
  std::vector<double> t;
  std::size_t M = 0;
  std::vector<double> center;  // K_inf(0) of the simulated model per N
  std::vector<double> norm;    // theorem normalizer per N
  std::vector<double> raw;     // S_[Nt] for (iN, it, m), row-major

  double sum(std::size_t iN, std::size_t it, std::size_t m) const { return raw[(iN * t.size() + it) * M + m]; }
  double normalized(std::size_t iN, std::size_t it, std::size_t m) const { return sum(iN, it, m) / norm[iN]; }
  std::vector<double> column(std::size_t iN, std::size_t it, bool normalize = true) const;
};
PartialSums run_partial_sums(const ExperimentConfig& cfg);

struct MarginalCell {
  std::size_t N = 0;
  double t = 0;
  double ks = 0;          // against the limit law in use
  double ksAlt = 0;       // theorem 1: as-printed c-tilde; theorems 2-3: other drift convention
  double cfGap = 0;       // max over u in {+-0.25, +-0.5, +-1, +-2}
  double cfGapHalf = 0;   // max over u = +-0.5
  double bowley = 0;      // (q90 + q10 - 2 q50) / (q90 - q10)
  double medianAbsThm1 = 0;  // theorem 3 only: median |S| / norm_thm1(N)
};

struct QuantileRow {
  std::size_t N;
  double t, p, empirical, limit;
};

struct MarginalReport {
  std::vector<StableLaw> limit;  // per t
  std::vector<double> limitBowley;
  std::vector<MarginalCell> cells;  // N-major
  std::vector<bool> trend;          // per t: KS nonincreasing in N within tolerance
  std::vector<QuantileRow> quantiles;
};
MarginalReport verify_marginals(const ExperimentConfig& cfg, const ConstantsReport& k, const PartialSums& sums);

// The limit law used at time t (shift 0 under the mean-zero convention).
StableLaw limit_law(const ExperimentConfig& cfg, const ConstantsReport& k, double t, bool alternative = false);

struct SlopeFit {
  std::string name;
  std::vector<double> N, value;
  double slope = 0, bound = 0;
  bool pass = false;
};
struct DecompositionReport {
  std::vector<SlopeFit> fits;
  double uIdentityGap = 0;  // max |U_N - K_inf'(0) sum X_n| over recorded paths
  // Theorems 2-3: KS of the normalized i.i.d. sum (Tau) at the largest N against the t = 1 limit
  double tauKs = -1;
};
// Shared-randomness evaluation of S_N, T_N, U_N and the i.i.d. sum over the
// diagnostics N grid.
DecompositionReport decomposition_diagnostics(const ExperimentConfig& cfg, const ConstantsReport& k);

struct DecompositionSample {
  double S, T, U, Tau;
};
// One replication: innovations e[i] = e_{1-J+i}, i < N + J (the last one is e_N).
DecompositionSample decompose(const EtaK& eta, const FunctionalSpec& K, double center, std::span<const double> eps,
                              std::span<const double> x);

struct TailLevel {
  double level = 0, x = 0;
  std::size_t countPos = 0, countNeg = 0;
  double scaledPos = 0, scaledNeg = 0;  // normalizer-scaled tail probabilities
  double sePos = 0, seNeg = 0;
  double exactPos = 0, exactNeg = 0;    // deterministic tail probabilities at x
};
struct TailReport {
  std::size_t draws = 0;
  std::size_t J = 0;
  std::vector<TailLevel> levels;
  double aNLevel = 0, aN = 0, aNRatio = 0, aNTarget = 0;
};
// Eta_K tails: Monte Carlo at the configured levels and the deterministic
// P(eta_K(e) > x) from the monotone tails of eta_K and the innovation cdf.
TailReport eta_tail_diagnostics(const ExperimentConfig& cfg, const ConstantsReport& k);

struct IncrementCheck {
  double t1, t2;
  double ks, pValue;
  double rankCorrelation;  // between S_[N t1] and S_[N t2] - S_[N t1]
};
std::vector<IncrementCheck> increment_checks(const PartialSums& sums);

struct CriterionResult {
  std::string id;
  std::string description;
  bool pass = false;
  double value = 0, threshold = 0;
};

// Coupled comparison of the truncation J(N) against 4 J(N) at the smallest N
// and the last t: the shorter kernel reuses the most recent innovations of
// the longer one, so the two-sample distance isolates the omitted tail.
struct TruncationCheck {
  std::size_t N = 0, J = 0, Jlong = 0;
  double t = 1;
  double ks = 0, ksLong = 0;  // against the limit law
  double distance = 0;        // two-sample KS between the coupled samples
};
TruncationCheck truncation_check(const ExperimentConfig& cfg, const ConstantsReport& k);

struct VerificationReport {
  ExperimentConfig config;
  ConstantsReport constants;
  MarginalReport marginals;
  std::vector<IncrementCheck> increments;
  bool hasTruncation = false;
  TruncationCheck truncation;
  bool selftest = false;
  std::vector<CriterionResult> criteria;
  bool passed() const;
};

VerificationReport verify(const ExperimentConfig& cfg);
// The marginal pipeline on samples drawn from the limit law itself.
VerificationReport selftest(const ExperimentConfig& cfg);

struct DiagnosticsReport {
  ExperimentConfig config;
  ConstantsReport constants;
  DecompositionReport decomposition;
  bool hasTails = false;
  TailReport tails;
  std::vector<CriterionResult> criteria;
  bool passed() const;
};
DiagnosticsReport diagnose(const ExperimentConfig& cfg);

std::string constants_json(const ExperimentConfig& cfg, const ConstantsReport& k);
std::string report_json(const VerificationReport& r);
std::string report_json(const DiagnosticsReport& r);
std::string quantiles_csv(const MarginalReport& m);

}  // namespace lmf

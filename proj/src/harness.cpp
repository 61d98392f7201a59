#include "lmf/harness.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <numeric>

#include "json.hpp"

#ifndef LMF_VERSION
#define LMF_VERSION "0.0.0"
#endif

namespace lmf {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kCfU[] = {-2, -1, -0.5, -0.25, 0.25, 0.5, 1, 2};
constexpr double kQuantileP[] = {0.01, 0.025, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.975, 0.99};
constexpr std::uint64_t kSelftestTag = 1000;
constexpr std::uint64_t kDiagTag = 2000;
constexpr std::uint64_t kTailTag = 3000;
constexpr std::uint64_t kTruncTag = 4000;
constexpr std::size_t kTailChunk = 1 << 16;

// Process, K_inf and the coefficients at one truncation length.
struct Model {
  CoefficientSpec coefs;
  std::unique_ptr<LinearProcess> lp;
  std::unique_ptr<KInfinity> kinf;
};

Model build_model(const ExperimentConfig& cfg, std::size_t J, bool with_kinf = true) {
  Model m;
  m.coefs = CoefficientSpec{cfg.beta, cfg.ell, J};
  m.lp = std::make_unique<LinearProcess>(m.coefs, cfg.innov);
  if (with_kinf && !cfg.K.zero()) m.kinf = std::make_unique<KInfinity>(cfg.K, *m.lp);
  return m;
}

double center_of(const Model& m) { return m.kinf ? (*m.kinf)(0.0) : 0.0; }

bool thm1_region(const ExperimentConfig& cfg) {
  return cfg.alpha > 1 && cfg.alpha < 2 && cfg.beta > 1 / cfg.alpha && cfg.beta < 1;
}

bool thm23_region(const ExperimentConfig& cfg) {
  const double p = cfg.alpha * cfg.beta;
  return p > 1 && p < 2;
}

std::size_t time_index(std::size_t N, double t) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(N) * t + 1e-9));
}

double bowley(std::span<const double> sorted) {
  const double q10 = quantile_sorted(sorted, 0.1), q50 = quantile_sorted(sorted, 0.5), q90 = quantile_sorted(sorted, 0.9);
  return q90 > q10 ? (q90 + q10 - 2 * q50) / (q90 - q10) : 0.0;
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j);
    i = j + 1;
  }
  return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double mean = (n - 1) / 2;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (ra[i] - mean) * (rb[i] - mean);
    saa += (ra[i] - mean) * (ra[i] - mean);
    sbb += (rb[i] - mean) * (rb[i] - mean);
  }
  return saa > 0 && sbb > 0 ? sab / std::sqrt(saa * sbb) : 0.0;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

CriterionResult le(std::string id, std::string description, double value, double threshold) {
  return {std::move(id), std::move(description), value <= threshold, value, threshold};
}

std::size_t last_t(const ExperimentConfig& cfg) { return cfg.t.size() - 1; }

// int K df vanishing to the criterion tolerance counts as zero: the theorem 1
// limit is then the point mass at 0.
void require_nondegenerate(const ExperimentConfig& cfg, const ConstantsReport& k) {
  if (cfg.theorem == 1 && std::abs(k.c.intKdf) <= cfg.criteria.int_k_df_tol)
    fail(ErrorCode::Degenerate, "c-tilde = 0 (int K df = 0): the theorem 1 limit is 0; use theorem 3 mode");
}

}  // namespace

std::vector<double> PartialSums::column(std::size_t iN, std::size_t it, bool normalize) const {
  std::vector<double> out(M);
  for (std::size_t m = 0; m < M; ++m) out[m] = normalize ? normalized(iN, it, m) : sum(iN, it, m);
  return out;
}

ConstantsReport compute_constants(const ExperimentConfig& cfg) {
  cfg.validate();
  ConstantsReport r;
  r.N = cfg.N;
  r.J = cfg.J.resolve(cfg.beta, cfg.ell, cfg.N.back());
  r.skew = (cfg.innov.sigma2 - cfg.innov.sigma1) / (cfg.innov.sigma1 + cfg.innov.sigma2);
  auto& c = r.c;
  const double s1 = cfg.innov.sigma1, s2 = cfg.innov.sigma2, p = cfg.alpha * cfg.beta;
  if (cfg.K.zero()) {
    if (cfg.theorem != 1) fail(ErrorCode::Degenerate, "K = 0: gamma1 + gamma2 = 0 and the limit is degenerate");
  } else {
    const Model m = build_model(cfg, r.J);
    c.kInf0 = (*m.kinf)(0.0);
    c.intKdf = int_K_df(*m.kinf);
    if (cfg.theorem == 3 && std::abs(c.intKdf) > 1e-6)
      fail(ErrorCode::Domain, "theorem 3 needs int K df = 0 (within 1e-6); got " + std::to_string(c.intKdf));
    if (thm1_region(cfg)) {
      c.cTilde = c_tilde(cfg.alpha, cfg.beta, s1, s2, c.intKdf);
      c.cTildeAsPrinted = c_tilde_as_printed(cfg.alpha, cfg.beta, s1, s2, c.intKdf);
    }
    if (cfg.theorem != 1) {
      if (!cfg.K.smooth()) fail(ErrorCode::Config, "theorems 2 and 3 need a smooth K (no indicator terms)");
      const auto [cp, cm] = c_k_pm(*m.kinf, cfg.beta);
      c.cPlus = cp;
      c.cMinus = cm;
      const auto g = gammas_and_cbar(p, s1, s2, cp, cm);
      c.gamma1 = g.gamma1;
      c.gamma2 = g.gamma2;
      c.cBar = g.cBar;
    }
  }
  std::unique_ptr<Thm23Normalizer> n23;
  if (thm23_region(cfg)) n23 = std::make_unique<Thm23Normalizer>(cfg.alpha, cfg.beta, cfg.ell, cfg.h);
  for (std::size_t n : cfg.N) {
    r.normThm1.push_back(thm1_region(cfg) ? norm_thm1(cfg.alpha, cfg.beta, cfg.ell, cfg.h, double(n)) : kNaN);
    r.normThm23.push_back(n23 ? (*n23)(double(n)) : kNaN);
  }
  return r;
}

PartialSums run_partial_sums(const ExperimentConfig& cfg) {
  cfg.validate();
  PartialSums ps;
  ps.N = cfg.N;
  ps.t = cfg.t;
  ps.M = cfg.M;
  const std::size_t nN = cfg.N.size(), nT = cfg.t.size(), M = cfg.M;
  ps.raw.assign(nN * nT * M, 0.0);
  const unsigned workers = cfg.resolved_workers();

  std::unique_ptr<Thm23Normalizer> n23;
  if (cfg.theorem != 1) n23 = std::make_unique<Thm23Normalizer>(cfg.alpha, cfg.beta, cfg.ell, cfg.h);
  for (std::size_t n : cfg.N) {
    ps.J.push_back(cfg.J.resolve(cfg.beta, cfg.ell, n));
    ps.norm.push_back(cfg.theorem == 1 ? norm_thm1(cfg.alpha, cfg.beta, cfg.ell, cfg.h, double(n)) : (*n23)(double(n)));
  }

  // Replication m of group g draws e_{1-J}..e_{N_g - 1} from replication_rng(seed, g, m).
  // With J independent of N one path of length N_max serves every N (group 0);
  // otherwise each N is its own group, numbered from 1.
  auto run_group = [&](std::uint64_t tag, std::size_t J, std::size_t Nsim, const std::vector<std::size_t>& members) {
    const Model model = build_model(cfg, J);
    const double center = center_of(model);
    for (std::size_t iN : members) ps.center.at(iN) = center;
    const PathSimulator sim(model.lp->a(), Nsim);
    const Innovations& eps = model.lp->innovations();
    parallel_for(M, workers, [&](std::size_t m) {
      std::vector<double> e(sim.input_length()), x(Nsim);
      Rng rng = replication_rng(cfg.seed, tag, m);
      draw_innovations(eps, rng, e);
      sim.convolve(e, x);
      std::vector<double> cum(Nsim + 1, 0.0);
      for (std::size_t n = 0; n < Nsim; ++n) cum[n + 1] = cum[n] + (cfg.K(x[n]) - center);
      for (std::size_t iN : members)
        for (std::size_t it = 0; it < nT; ++it) ps.raw[(iN * nT + it) * M + m] = cum[time_index(cfg.N[iN], cfg.t[it])];
    });
  };

  ps.center.assign(nN, 0.0);
  if (!cfg.J.depends_on_n(cfg.beta)) {
    std::vector<std::size_t> all(nN);
    std::iota(all.begin(), all.end(), 0);
    run_group(0, ps.J.back(), cfg.N.back(), all);
  } else {
    for (std::size_t iN = 0; iN < nN; ++iN) run_group(iN + 1, ps.J[iN], cfg.N[iN], {iN});
  }
  return ps;
}

TruncationCheck truncation_check(const ExperimentConfig& cfg, const ConstantsReport& k) {
  cfg.validate();
  TruncationCheck r;
  r.N = cfg.N.front();
  r.t = cfg.t.back();
  r.J = cfg.J.resolve(cfg.beta, cfg.ell, r.N);
  r.Jlong = 4 * r.J;
  const Model shortM = build_model(cfg, r.J), longM = build_model(cfg, r.Jlong);
  const double cShort = center_of(shortM), cLong = center_of(longM);
  const PathSimulator simS(shortM.lp->a(), r.N), simL(longM.lp->a(), r.N);
  const double norm = cfg.theorem == 1 ? norm_thm1(cfg.alpha, cfg.beta, cfg.ell, cfg.h, double(r.N))
                                       : norm_thm23(cfg.alpha, cfg.beta, cfg.ell, cfg.h, double(r.N));
  const std::size_t n = time_index(r.N, r.t), M = cfg.M;
  std::vector<double> a(M), b(M);
  parallel_for(M, cfg.resolved_workers(), [&](std::size_t m) {
    std::vector<double> e(simL.input_length()), x(r.N);
    Rng rng = replication_rng(cfg.seed, kTruncTag, m);
    draw_innovations(longM.lp->innovations(), rng, e);
    simL.convolve(e, x);
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += cfg.K(x[i]) - cLong;
    b[m] = s / norm;
    simS.convolve(std::span<const double>(e).last(simS.input_length()), x);
    s = 0;
    for (std::size_t i = 0; i < n; ++i) s += cfg.K(x[i]) - cShort;
    a[m] = s / norm;
  });
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const StableCdfTable lim(limit_law(cfg, k, r.t));
  r.ks = ks_statistic(a, [&](double x) { return lim(x); });
  r.ksLong = ks_statistic(b, [&](double x) { return lim(x); });
  r.distance = ks_two_sample(a, b).distance;
  return r;
}

StableLaw limit_law(const ExperimentConfig& cfg, const ConstantsReport& k, double t, bool alternative) {
  if (cfg.theorem == 1) {
    const double ct = alternative ? k.c.cTildeAsPrinted : k.c.cTilde;
    return thm1_marginal(cfg.alpha, cfg.beta, cfg.innov.sigma1, cfg.innov.sigma2, ct, t);
  }
  const auto L = Thm23Limit::make(cfg.alpha * cfg.beta, k.c.gamma1, k.c.gamma2, k.c.cBar);
  StableLaw law = L.marginal(t);
  const bool printed = (cfg.drift == DriftConvention::AsPrinted) != alternative;
  law.shift = printed ? L.drift(t) : 0.0;
  return law;
}

MarginalReport verify_marginals(const ExperimentConfig& cfg, const ConstantsReport& k, const PartialSums& sums) {
  require_nondegenerate(cfg, k);
  MarginalReport r;
  const std::size_t nT = sums.t.size();
  std::vector<std::unique_ptr<StableCdfTable>> tab, alt;
  for (double t : sums.t) {
    r.limit.push_back(limit_law(cfg, k, t));
    tab.push_back(std::make_unique<StableCdfTable>(r.limit.back()));
    alt.push_back(std::make_unique<StableCdfTable>(limit_law(cfg, k, t, true)));
    const auto& T = *tab.back();
    const double q10 = T.quantile(0.1), q50 = T.quantile(0.5), q90 = T.quantile(0.9);
    r.limitBowley.push_back((q90 + q10 - 2 * q50) / (q90 - q10));
  }
  for (std::size_t iN = 0; iN < sums.N.size(); ++iN) {
    for (std::size_t it = 0; it < nT; ++it) {
      auto v = sums.column(iN, it);
      std::sort(v.begin(), v.end());
      MarginalCell cell;
      cell.N = sums.N[iN];
      cell.t = sums.t[it];
      cell.ks = ks_statistic(v, [&](double x) { return (*tab[it])(x); });
      cell.ksAlt = ks_statistic(v, [&](double x) { return (*alt[it])(x); });
      for (double u : kCfU) {
        double cs = 0, sn = 0;
        for (double x : v) {
          cs += std::cos(u * x);
          sn += std::sin(u * x);
        }
        const cplx emp(cs / double(v.size()), sn / double(v.size()));
        const double gap = std::abs(emp - stable_cf(r.limit[it], u));
        cell.cfGap = std::max(cell.cfGap, gap);
        if (std::abs(u) == 0.5) cell.cfGapHalf = std::max(cell.cfGapHalf, gap);
      }
      cell.bowley = bowley(v);
      if (cfg.theorem == 3) {
        std::vector<double> a(sums.M);
        for (std::size_t m = 0; m < sums.M; ++m) a[m] = std::abs(sums.sum(iN, it, m)) / k.normThm1.at(iN);
        cell.medianAbsThm1 = median(std::move(a));
      }
      for (double p : kQuantileP) r.quantiles.push_back({cell.N, cell.t, p, quantile_sorted(v, p), tab[it]->quantile(p)});
      r.cells.push_back(cell);
    }
  }
  for (std::size_t it = 0; it < nT; ++it) {
    bool ok = true;
    for (std::size_t iN = 1; iN < sums.N.size(); ++iN)
      ok = ok && r.cells[iN * nT + it].ks <= r.cells[(iN - 1) * nT + it].ks + cfg.criteria.trend_tol;
    r.trend.push_back(ok);
  }
  return r;
}

std::vector<IncrementCheck> increment_checks(const PartialSums& sums) {
  std::vector<IncrementCheck> out;
  const std::size_t iN = sums.N.size() - 1, nT = sums.t.size();
  auto find_t = [&](double t) -> std::ptrdiff_t {
    for (std::size_t i = 0; i < nT; ++i)
      if (std::abs(sums.t[i] - t) < 1e-12) return std::ptrdiff_t(i);
    return -1;
  };
  // t1 = 0 (index -1) and every t1 < t2 whose difference is on the grid
  for (std::ptrdiff_t i1 = -1; i1 < std::ptrdiff_t(nT); ++i1) {
    for (std::size_t i2 = std::size_t(i1 + 1); i2 < nT; ++i2) {
      const double t1 = i1 < 0 ? 0.0 : sums.t[std::size_t(i1)], t2 = sums.t[i2];
      const auto id = find_t(t2 - t1);
      if (id < 0) continue;
      std::vector<double> inc(sums.M), ref = sums.column(iN, std::size_t(id)), first(sums.M, 0.0);
      for (std::size_t m = 0; m < sums.M; ++m) {
        if (i1 >= 0) first[m] = sums.normalized(iN, std::size_t(i1), m);
        inc[m] = sums.normalized(iN, i2, m) - first[m];
      }
      const auto ks = ks_two_sample(inc, ref);
      out.push_back({t1, t2, ks.distance, ks.p_value, i1 < 0 ? 0.0 : spearman(first, inc)});
    }
  }
  return out;
}

DecompositionSample decompose(const EtaK& eta, const FunctionalSpec& K, double center, std::span<const double> eps,
                              std::span<const double> x) {
  const std::size_t N = x.size(), J = eta.J();
  if (eps.size() != N + J) fail(ErrorCode::InvalidArgument, "decompose: need N + J innovations");
  DecompositionSample s{0, 0, 0, 0};
  double sx = 0;
  for (std::size_t n = 0; n < N; ++n) {
    s.S += K(x[n]) - center;
    sx += x[n];
  }
  // e_k enters X_n for n - k in [1, J] and 1 <= n <= N
  for (std::size_t i = 0; i + 1 < N + J; ++i) {
    const std::ptrdiff_t k = std::ptrdiff_t(i) + 1 - std::ptrdiff_t(J);
    const std::size_t lo = std::size_t(std::max<std::ptrdiff_t>(1, 1 - k));
    const std::size_t hi = std::size_t(std::min<std::ptrdiff_t>(std::ptrdiff_t(J), std::ptrdiff_t(N) - k));
    s.T += eta.range(eps[i], lo, hi);
  }
  s.U = eta.kinf().taylor()[1] * sx;
  for (std::size_t n = 1; n <= N; ++n) s.Tau += eta.truncated(eps[n - 1 + J]);
  return s;
}

DecompositionReport decomposition_diagnostics(const ExperimentConfig& cfg, const ConstantsReport& k) {
  cfg.validate();
  const auto& grid = cfg.diag.N;
  if (grid.size() < 3) fail(ErrorCode::InvalidArgument, "decomposition diagnostics need at least 3 N values");
  if (!cfg.K.smooth() || cfg.K.zero()) fail(ErrorCode::Config, "decomposition diagnostics need a smooth nonzero K");
  const std::size_t M = cfg.diag.M;
  const unsigned workers = cfg.resolved_workers();
  DecompositionReport r;
  SlopeFit st{"S-T second moment", {}, {}, 0, std::max(4 - 2 * cfg.alpha * cfg.beta, 1.0) + cfg.criteria.slope_slack, false};
  SlopeFit tu{"T-U first moment", {}, {}, 0, 1 / cfg.diag.r + cfg.criteria.slope_slack, false};
  SlopeFit tur{"T-U r-th moment", {}, {}, 0, 1 + cfg.criteria.slope_slack, false};
  SlopeFit tt{"T-Tau first moment", {}, {}, 0, 2 - cfg.alpha * cfg.beta + cfg.criteria.slope_slack, false};
  for (std::size_t iN = 0; iN < grid.size(); ++iN) {
    const std::size_t N = grid[iN], J = cfg.J.resolve(cfg.beta, cfg.ell, N);
    const Model model = build_model(cfg, J);
    const EtaK eta(*model.kinf, model.coefs);
    const double center = center_of(model), slope0 = -int_K_df(*model.kinf);
    const PathSimulator sim(model.lp->a(), N);
    std::vector<DecompositionSample> out(M);
    std::vector<double> gap(M);
    parallel_for(M, workers, [&](std::size_t m) {
      std::vector<double> e(N + J), x(N);
      Rng rng = replication_rng(cfg.seed, kDiagTag + iN, m);
      draw_innovations(model.lp->innovations(), rng, e);
      sim.convolve(std::span<const double>(e).first(sim.input_length()), x);
      out[m] = decompose(eta, cfg.K, center, e, x);
      double sx = 0;
      for (double v : x) sx += v;
      gap[m] = std::abs(out[m].U - slope0 * sx) / std::max(1.0, std::abs(out[m].U));
    });
    double a = 0, b = 0, br = 0, c = 0;
    for (const auto& s : out) {
      a += (s.S - s.T) * (s.S - s.T);
      b += std::abs(s.T - s.U);
      br += std::pow(std::abs(s.T - s.U), cfg.diag.r);
      c += std::abs(s.T - s.Tau);
    }
    const double dn = double(N);
    for (auto* f : {&st, &tu, &tur, &tt}) f->N.push_back(dn);
    st.value.push_back(a / double(M));
    tu.value.push_back(b / double(M));
    tur.value.push_back(br / double(M));
    tt.value.push_back(c / double(M));
    r.uIdentityGap = std::max(r.uIdentityGap, *std::max_element(gap.begin(), gap.end()));
    if (cfg.theorem != 1 && iN + 1 == grid.size()) {
      const double norm = norm_thm23(cfg.alpha, cfg.beta, cfg.ell, cfg.h, dn);
      std::vector<double> tau(M);
      for (std::size_t m = 0; m < M; ++m) tau[m] = out[m].Tau / norm;
      std::sort(tau.begin(), tau.end());
      const StableCdfTable lim(limit_law(cfg, k, 1.0));
      r.tauKs = ks_statistic(tau, [&](double x) { return lim(x); });
    }
  }
  for (auto* f : {&st, &tu, &tur, &tt}) {
    std::vector<double> lx, ly;
    bool positive = true;
    for (std::size_t i = 0; i < f->N.size(); ++i) {
      positive = positive && f->value[i] > 0;
      lx.push_back(std::log(f->N[i]));
      ly.push_back(std::log(std::max(f->value[i], 1e-300)));
    }
    f->slope = positive ? ls_slope(lx, ly) : -std::numeric_limits<double>::infinity();
    f->pass = f->slope <= f->bound;
    r.fits.push_back(*f);
  }
  return r;
}

namespace {

// y > 0 with |eta(side * y)| = x on the far tail of that side, where
// eta(side * y) ~ C y^{1/beta}.
double tail_root(const EtaK& eta, double side, double C, double beta, double x) {
  auto g = [&](double ly) {
    const double v = std::abs(eta.full(side * std::exp(ly)).value);
    return (v > 0 ? std::log(v) : -1e300) - std::log(x);
  };
  double lo = beta * std::log(x / std::abs(C)), hi = lo;
  double glo = g(lo), ghi = glo;
  for (int i = 0; glo > 0; ++i) {
    if (i > 200) fail(ErrorCode::Convergence, "eta tail root: no lower bracket");
    hi = lo, ghi = glo;
    lo -= 0.5, glo = g(lo);
  }
  for (int i = 0; ghi < 0; ++i) {
    if (i > 200) fail(ErrorCode::Convergence, "eta tail root: no upper bracket");
    lo = hi, glo = ghi;
    hi += 0.5, ghi = g(hi);
  }
  // Illinois
  int stale = 0;
  for (int it = 0; it < 100 && hi - lo > 1e-12; ++it) {
    const double m = hi - ghi * (hi - lo) / (ghi - glo);
    const double gm = g(m);
    if (gm == 0) return std::exp(m);
    if ((gm < 0) == (glo < 0)) {
      lo = m, glo = gm;
      if (stale == -1) ghi /= 2;
      stale = -1;
    } else {
      hi = m, ghi = gm;
      if (stale == 1) glo /= 2;
      stale = 1;
    }
  }
  return std::exp(0.5 * (lo + hi));
}

struct ExactTail {
  double pos, neg;
};

ExactTail exact_tail(const EtaK& eta, const Innovations& eps, double beta, double Cp, double Cm, double x) {
  ExactTail out{0, 0};
  for (double side : {1.0, -1.0}) {
    const double C = side > 0 ? Cp : Cm;
    if (C == 0) continue;
    const double y = tail_root(eta, side, C, beta, x);
    const double pr = side > 0 ? 1 - eps.cdf(y) : eps.cdf(-y);
    (C > 0 ? out.pos : out.neg) += pr;
  }
  return out;
}

}  // namespace

TailReport eta_tail_diagnostics(const ExperimentConfig& cfg, const ConstantsReport& k) {
  cfg.validate();
  if (cfg.theorem == 1) fail(ErrorCode::Regime, "eta_K diverges under theorem 1 (int K df != 0 with beta < 1)");
  TailReport r;
  r.draws = cfg.diag.eta_draws;
  r.J = k.J;
  const Model model = build_model(cfg, k.J);
  const EtaK eta(*model.kinf, model.coefs);
  const Innovations& eps = model.lp->innovations();
  const Thm23Normalizer norm(cfg.alpha, cfg.beta, cfg.ell, cfg.h);

  const std::size_t chunks = (r.draws + kTailChunk - 1) / kTailChunk;
  std::vector<double> v(r.draws);
  parallel_for(chunks, cfg.resolved_workers(), [&](std::size_t c) {
    Rng rng = Rng::substream(cfg.seed, kTailTag, c);
    const std::size_t end = std::min(r.draws, (c + 1) * kTailChunk);
    for (std::size_t i = c * kTailChunk; i < end; ++i) v[i] = eta.full(eps.sample(rng)).value;
  });
  std::vector<double> absv(v.size());
  std::transform(v.begin(), v.end(), absv.begin(), [](double a) { return std::abs(a); });
  std::sort(absv.begin(), absv.end());

  const double n = double(r.draws);
  for (double q : cfg.diag.tail_levels) {
    const std::size_t kx = static_cast<std::size_t>(std::llround(q * n));
    if (kx < 100 || kx >= r.draws)
      fail(ErrorCode::InvalidArgument, "too few tail exceedances (< 100) at level " + std::to_string(q));
    TailLevel L;
    L.level = q;
    L.x = absv[r.draws - kx - 1];
    for (double a : v) {
      L.countPos += a > L.x;
      L.countNeg += a < -L.x;
    }
    if (L.countPos + L.countNeg < 100)
      fail(ErrorCode::InvalidArgument, "too few tail exceedances (< 100) at level " + std::to_string(q));
    const double f = norm.forward(L.x);
    L.scaledPos = f * double(L.countPos) / n;
    L.scaledNeg = f * double(L.countNeg) / n;
    L.sePos = f * std::sqrt(double(L.countPos)) / n;
    L.seNeg = f * std::sqrt(double(L.countNeg)) / n;
    const auto ex = exact_tail(eta, eps, cfg.beta, k.c.cPlus, k.c.cMinus, L.x);
    L.exactPos = ex.pos;
    L.exactNeg = ex.neg;
    r.levels.push_back(L);
  }

  // a_N = inf{x : P(|eta| > x) <= 1/N} from the deterministic tail, solved in log-log
  r.aNLevel = cfg.diag.aN;
  const double p = cfg.alpha * cfg.beta, target = -std::log(r.aNLevel);
  auto g = [&](double lx) {
    const auto ex = exact_tail(eta, eps, cfg.beta, k.c.cPlus, k.c.cMinus, std::exp(lx));
    return std::log(ex.pos + ex.neg) - target;
  };
  const TailLevel& last = r.levels.empty() ? TailLevel{} : r.levels.back();
  double lo = r.levels.empty() ? 0.0 : std::log(last.x) + std::log(last.level * r.aNLevel) / p;
  double hi = lo, glo = g(lo), ghi = glo;
  while (glo < 0) hi = lo, ghi = glo, lo -= 0.5, glo = g(lo);
  while (ghi > 0) lo = hi, glo = ghi, hi += 0.5, ghi = g(hi);
  int stale = 0;
  for (int it = 0; it < 100 && hi - lo > 1e-12; ++it) {
    const double m = hi - ghi * (hi - lo) / (ghi - glo);
    const double gm = g(m);
    if (gm == 0) {
      lo = hi = m;
      break;
    }
    if ((gm > 0) == (glo > 0)) {
      lo = m, glo = gm;
      if (stale == -1) ghi /= 2;
      stale = -1;
    } else {
      hi = m, ghi = gm;
      if (stale == 1) glo /= 2;
      stale = 1;
    }
  }
  r.aN = std::exp(0.5 * (lo + hi));
  r.aNRatio = r.aN / norm(r.aNLevel);
  r.aNTarget = std::pow(k.c.gamma1 + k.c.gamma2, 1 / p);
  return r;
}

namespace {

void add_marginal_criteria(const ExperimentConfig& cfg, VerificationReport& r) {
  const auto& m = r.marginals;
  const auto& cr = cfg.criteria;
  const std::size_t it = last_t(cfg), nT = cfg.t.size(), last = (cfg.N.size() - 1) * nT + it;
  const auto& cell = m.cells[last];
  const std::string at = "N=" + std::to_string(cell.N) + ", t=" + std::to_string(cell.t);
  auto& out = r.criteria;
  if (cfg.theorem == 3)
    out.push_back(le("int-k-df", "|int K df| at the largest J", std::abs(r.constants.c.intKdf), cr.int_k_df_tol));
  double worst = 0;
  for (std::size_t iN = 1; iN < cfg.N.size(); ++iN)
    worst = std::max(worst, m.cells[iN * nT + it].ks - m.cells[(iN - 1) * nT + it].ks);
  out.push_back(le("ks-trend", "largest KS increase between consecutive N, t=" + std::to_string(cell.t), worst, cr.trend_tol));
  out.push_back(le("ks-final", "KS distance at " + at, cell.ks, cr.ks_max));
  if (cfg.theorem == 1)
    out.push_back(le("cf-gap", "empirical-CF gap at u=+-0.5, " + at, cell.cfGapHalf, cr.cf_gap_max));
  if (cfg.theorem == 2) {
    const double want = (r.constants.c.gamma2 > r.constants.c.gamma1) - (r.constants.c.gamma2 < r.constants.c.gamma1);
    const double got = (cell.bowley > 0) - (cell.bowley < 0);
    out.push_back({"skew-sign", "sign of the Bowley skewness at " + at + " equals sgn(gamma2 - gamma1)",
                   want == 0 || got == want, cell.bowley, want});
  }
  if (cfg.theorem == 3) {
    double rise = -std::numeric_limits<double>::infinity();
    for (std::size_t iN = 1; iN < cfg.N.size(); ++iN)
      rise = std::max(rise, m.cells[iN * nT + it].medianAbsThm1 - m.cells[(iN - 1) * nT + it].medianAbsThm1);
    out.push_back({"thm1-median", "median |S| / theorem-1 normalizer decreasing in N and small at " + at,
                   rise <= 0 && cell.medianAbsThm1 <= cr.median_max, cell.medianAbsThm1, cr.median_max});
  }
}

void add_increment_criteria(const ExperimentConfig& cfg, VerificationReport& r) {
  auto find = [&](double t1, double t2) -> const IncrementCheck* {
    for (const auto& c : r.increments)
      if (std::abs(c.t1 - t1) < 1e-12 && std::abs(c.t2 - t2) < 1e-12) return &c;
    return nullptr;
  };
  if (cfg.theorem == 1) {
    if (const auto* c = find(0.25, 0.75))
      r.criteria.push_back({"increments", "two-sample KS p-value, S(0.75)-S(0.25) against S(0.5)",
                            c->pValue > cfg.criteria.p_min, c->pValue, cfg.criteria.p_min});
  }
  if (cfg.theorem == 2) {
    if (const auto* c = find(0.5, 1.0))
      r.criteria.push_back(le("disjoint-increments", "|Spearman correlation| of S(0.5) and S(1)-S(0.5)",
                              std::abs(c->rankCorrelation), 3 / std::sqrt(double(cfg.M))));
  }
}

}  // namespace

bool VerificationReport::passed() const {
  return std::all_of(criteria.begin(), criteria.end(), [](const CriterionResult& c) { return c.pass; });
}

bool DiagnosticsReport::passed() const {
  return std::all_of(criteria.begin(), criteria.end(), [](const CriterionResult& c) { return c.pass; });
}

VerificationReport verify(const ExperimentConfig& cfg) {
  VerificationReport r;
  r.config = cfg;
  r.constants = compute_constants(cfg);
  require_nondegenerate(cfg, r.constants);
  const auto sums = run_partial_sums(cfg);
  r.marginals = verify_marginals(cfg, r.constants, sums);
  r.increments = increment_checks(sums);
  add_marginal_criteria(cfg, r);
  add_increment_criteria(cfg, r);
  if (cfg.beta <= 1 && cfg.J.depends_on_n(cfg.beta)) {
    r.hasTruncation = true;
    r.truncation = truncation_check(cfg, r.constants);
    const auto& tc = r.truncation;
    r.criteria.push_back(le("truncation-shift",
                            "|KS(4J) - KS(J)| against the limit at N=" + std::to_string(tc.N) + ", J=" + std::to_string(tc.J),
                            std::abs(tc.ksLong - tc.ks), cfg.criteria.ks_max / 4));
  }
  return r;
}

VerificationReport selftest(const ExperimentConfig& cfg) {
  VerificationReport r;
  r.config = cfg;
  r.selftest = true;
  r.constants = compute_constants(cfg);
  PartialSums ps;
  ps.N = cfg.N;
  ps.t = cfg.t;
  ps.M = cfg.M;
  ps.J.assign(cfg.N.size(), 0);
  ps.center.assign(cfg.N.size(), 0.0);
  ps.norm.assign(cfg.N.size(), 1.0);
  ps.raw.assign(cfg.N.size() * cfg.t.size() * cfg.M, 0.0);
  const std::size_t nT = cfg.t.size();
  for (std::size_t it = 0; it < nT; ++it) {
    require_nondegenerate(cfg, r.constants);
    const StableLaw law = limit_law(cfg, r.constants, cfg.t[it]);
    for (std::size_t iN = 0; iN < cfg.N.size(); ++iN) {
      const std::uint64_t tag = kSelftestTag + iN * nT + it;
      parallel_for(cfg.M, cfg.resolved_workers(), [&](std::size_t m) {
        Rng rng = replication_rng(cfg.seed, tag, m);
        ps.raw[(iN * nT + it) * cfg.M + m] = stable_sample(law, rng);
      });
    }
  }
  r.marginals = verify_marginals(cfg, r.constants, ps);
  const double bound = 1.36 / std::sqrt(double(cfg.M)) + 0.01;
  for (const auto& cell : r.marginals.cells)
    r.criteria.push_back(le("selftest-ks", "KS of limit-law draws, N=" + std::to_string(cell.N) + ", t=" +
                                               std::to_string(cell.t),
                            cell.ks, bound));
  for (const auto& cell : r.marginals.cells)
    r.criteria.push_back(le("selftest-cf", "empirical-CF gap at u=+-0.5, N=" + std::to_string(cell.N) + ", t=" +
                                               std::to_string(cell.t),
                            cell.cfGapHalf, cfg.criteria.cf_gap_max));
  return r;
}

DiagnosticsReport diagnose(const ExperimentConfig& cfg) {
  DiagnosticsReport r;
  r.config = cfg;
  r.constants = compute_constants(cfg);
  r.decomposition = decomposition_diagnostics(cfg, r.constants);
  const auto& cr = cfg.criteria;
  r.criteria.push_back(le("u-identity", "U_N against (-int K df) sum X_n on recorded paths",
                          r.decomposition.uIdentityGap, 1e-12));
  for (const auto& f : r.decomposition.fits) {
    const bool used = f.name == "S-T second moment" || (cfg.theorem == 1 && f.name == "T-U first moment") ||
                      (cfg.theorem != 1 && f.name == "T-Tau first moment");
    if (used) r.criteria.push_back(le("slope: " + f.name, "log-log slope in N", f.slope, f.bound));
  }
  if (cfg.theorem != 1) {
    r.hasTails = true;
    r.tails = eta_tail_diagnostics(cfg, r.constants);
    const auto& c = r.constants.c;
    const bool posSide = c.gamma2 >= c.gamma1;
    const double gamma = posSide ? c.gamma2 : c.gamma1;
    const auto& deep = r.tails.levels.back();
    const double scaled = posSide ? deep.scaledPos : deep.scaledNeg;
    r.criteria.push_back(le("tail-scaled", std::string("relative error of the scaled ") + (posSide ? "upper" : "lower") +
                                               " tail at level " + std::to_string(deep.level),
                            std::abs(scaled / gamma - 1), cr.tail_rel));
    r.criteria.push_back(le("a-N-ratio", "relative error of a_N / normalizer against (gamma1 + gamma2)^{1/ab}",
                            std::abs(r.tails.aNRatio / r.tails.aNTarget - 1), cr.a_n_rel));
  }
  return r;
}

// --- output ---------------------------------------------------------------

namespace {

json law_json(const StableLaw& l) {
  return {{"alpha", l.alpha}, {"scale", l.scale}, {"skew", l.skew}, {"shift", l.shift}};
}

json constants_obj(const ConstantsReport& k) {
  const auto& c = k.c;
  return {{"J", k.J},
          {"N", k.N},
          {"skew", k.skew},
          {"int_K_df", c.intKdf},
          {"K_inf_0", c.kInf0},
          {"c_tilde", c.cTilde},
          {"c_tilde_as_printed", c.cTildeAsPrinted},
          {"C_K_plus", c.cPlus},
          {"C_K_minus", c.cMinus},
          {"gamma1", c.gamma1},
          {"gamma2", c.gamma2},
          {"c_bar", c.cBar},
          {"norm_thm1", k.normThm1},
          {"norm_thm23", k.normThm23}};
}

json provenance(const ExperimentConfig& cfg) {
  return {{"version", LMF_VERSION},
          {"schema", ExperimentConfig::kSchema},
          {"config_hash", hex64(cfg.hash())},
          {"seed", cfg.seed}};
}

json criteria_json(const std::vector<CriterionResult>& v) {
  json a = json::array();
  for (const auto& c : v)
    a.push_back({{"id", c.id}, {"description", c.description}, {"pass", c.pass}, {"value", c.value},
                 {"threshold", c.threshold}});
  return a;
}

}  // namespace

std::string constants_json(const ExperimentConfig& cfg, const ConstantsReport& k) {
  json j;
  j["kind"] = "constants";
  j["provenance"] = provenance(cfg);
  j["config"] = json::parse(cfg.to_json_text());
  j["constants"] = constants_obj(k);
  return j.dump(2);
}

std::string report_json(const VerificationReport& r) {
  json j;
  j["kind"] = r.selftest ? "selftest" : "verify";
  j["provenance"] = provenance(r.config);
  j["config"] = json::parse(r.config.to_json_text());
  j["constants"] = constants_obj(r.constants);
  json lim = json::array();
  for (std::size_t i = 0; i < r.marginals.limit.size(); ++i) {
    json l = law_json(r.marginals.limit[i]);
    l["t"] = r.config.t[i];
    l["bowley"] = r.marginals.limitBowley[i];
    lim.push_back(l);
  }
  json cells = json::array();
  for (const auto& c : r.marginals.cells) {
    json o = {{"N", c.N}, {"t", c.t}, {"ks", c.ks}, {"ks_alt", c.ksAlt}, {"cf_gap", c.cfGap},
              {"cf_gap_half", c.cfGapHalf}, {"bowley", c.bowley}};
    if (r.config.theorem == 3 && !r.selftest) o["median_abs_thm1"] = c.medianAbsThm1;
    cells.push_back(o);
  }
  json trend = json::array();
  for (std::size_t i = 0; i < r.marginals.trend.size(); ++i)
    trend.push_back({{"t", r.config.t[i]}, {"nonincreasing", bool(r.marginals.trend[i])}});
  j["marginals"] = {{"limit", lim}, {"cells", cells}, {"trend", trend}};
  json inc = json::array();
  for (const auto& c : r.increments)
    inc.push_back({{"t1", c.t1}, {"t2", c.t2}, {"ks", c.ks}, {"p_value", c.pValue}, {"rank_correlation", c.rankCorrelation}});
  j["increments"] = inc;
  if (r.hasTruncation) {
    const auto& tc = r.truncation;
    j["truncation"] = {{"N", tc.N}, {"t", tc.t}, {"J", tc.J}, {"J_long", tc.Jlong},
                       {"ks", tc.ks}, {"ks_long", tc.ksLong}, {"distance", tc.distance}};
  }
  j["criteria"] = criteria_json(r.criteria);
  j["passed"] = r.passed();
  return j.dump(2);
}

std::string report_json(const DiagnosticsReport& r) {
  json j;
  j["kind"] = "diagnose";
  j["provenance"] = provenance(r.config);
  j["config"] = json::parse(r.config.to_json_text());
  j["constants"] = constants_obj(r.constants);
  json fits = json::array();
  for (const auto& f : r.decomposition.fits)
    fits.push_back({{"name", f.name}, {"N", f.N}, {"value", f.value}, {"slope", f.slope}, {"bound", f.bound},
                    {"pass", f.pass}});
  j["decomposition"] = {{"fits", fits}, {"u_identity_gap", r.decomposition.uIdentityGap}};
  if (r.decomposition.tauKs >= 0) j["decomposition"]["tau_ks"] = r.decomposition.tauKs;
  if (r.hasTails) {
    json lv = json::array();
    for (const auto& l : r.tails.levels)
      lv.push_back({{"level", l.level},         {"x", l.x},
                    {"count_pos", l.countPos},  {"count_neg", l.countNeg},
                    {"scaled_pos", l.scaledPos}, {"scaled_neg", l.scaledNeg},
                    {"se_pos", l.sePos},        {"se_neg", l.seNeg},
                    {"exact_pos", l.exactPos},  {"exact_neg", l.exactNeg}});
    j["eta_tails"] = {{"draws", r.tails.draws}, {"J", r.tails.J},         {"levels", lv},
                      {"a_N_level", r.tails.aNLevel}, {"a_N", r.tails.aN}, {"a_N_ratio", r.tails.aNRatio},
                      {"a_N_target", r.tails.aNTarget}};
  }
  j["criteria"] = criteria_json(r.criteria);
  j["passed"] = r.passed();
  return j.dump(2);
}

std::string quantiles_csv(const MarginalReport& m) {
  std::string out = "N,t,p,empirical_quantile,limit_quantile\n";
  char buf[160];
  for (const auto& q : m.quantiles) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n", q.N, q.t, q.p, q.empirical, q.limit);
    out += buf;
  }
  return out;
}

}  // namespace lmf

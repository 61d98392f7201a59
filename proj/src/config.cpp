#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "lmf/harness.hpp"

namespace lmf {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& msg) { fail(ErrorCode::Config, msg); }

void allow_keys(const json& j, const std::set<std::string>& keys, const std::string& where) {
  if (!j.is_object()) config_error(where + " must be an object");
  for (const auto& [k, v] : j.items())
    if (!keys.count(k)) config_error("unknown key '" + (where.empty() ? k : where + "." + k) + "'");
}

template <typename T>
T get(const json& j, const std::string& key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    config_error("bad value for '" + (where.empty() ? key : where + "." + key) + "'");
  }
}

template <typename T>
void maybe(const json& j, const std::string& key, T& out, const std::string& where) {
  if (j.contains(key)) out = get<T>(j, key, where);
}

json sv_to_json(const SlowlyVaryingSpec& s) {
  switch (s.kind) {
    case SlowlyVaryingSpec::Kind::Zero: return {{"kind", "constant"}, {"sigma", s.sigma}};
    case SlowlyVaryingSpec::Kind::LogPower: return {{"kind", "log-power"}, {"sigma", s.sigma}, {"c1", s.c1}, {"a", s.a}};
    case SlowlyVaryingSpec::Kind::Tabulated:
      return {{"kind", "tabulated"}, {"sigma", s.sigma}, {"knots", s.knots}, {"etas", s.etas}};
  }
  return {};
}

SlowlyVaryingSpec sv_from_json(const json& j, const std::string& where) {
  allow_keys(j, {"kind", "sigma", "c1", "a", "knots", "etas"}, where);
  const auto kind = get<std::string>(j, "kind", where);
  const double sigma = j.contains("sigma") ? get<double>(j, "sigma", where) : 1.0;
  if (kind == "constant") {
    for (const char* k : {"c1", "a", "knots", "etas"})
      if (j.contains(k)) config_error(where + "." + k + " is not used by kind 'constant'");
    return SlowlyVaryingSpec::zero(sigma);
  }
  if (kind == "log-power") {
    if (j.contains("knots") || j.contains("etas")) config_error(where + ": knots/etas need kind 'tabulated'");
    return SlowlyVaryingSpec::log_power(sigma, get<double>(j, "c1", where), get<double>(j, "a", where));
  }
  if (kind == "tabulated") {
    if (j.contains("c1") || j.contains("a")) config_error(where + ": c1/a need kind 'log-power'");
    return SlowlyVaryingSpec::tabulated(sigma, get<std::vector<double>>(j, "knots", where),
                                        get<std::vector<double>>(j, "etas", where));
  }
  config_error(where + ".kind must be constant, log-power or tabulated");
}

json j_to_json(const JPolicy& p) {
  switch (p.kind) {
    case JPolicy::Kind::Auto: return {{"policy", "auto"}, {"multiple", p.multiple}, {"tail_tol", p.tail_tol}};
    case JPolicy::Kind::Fixed: return {{"policy", "fixed"}, {"value", p.value}};
    case JPolicy::Kind::Multiple: return {{"policy", "multiple"}, {"multiple", p.multiple}};
  }
  return {};
}

JPolicy j_from_json(const json& j) {
  allow_keys(j, {"policy", "value", "multiple", "tail_tol"}, "J");
  JPolicy p;
  const auto kind = get<std::string>(j, "policy", "J");
  if (kind == "auto")
    p.kind = JPolicy::Kind::Auto;
  else if (kind == "fixed")
    p.kind = JPolicy::Kind::Fixed;
  else if (kind == "multiple")
    p.kind = JPolicy::Kind::Multiple;
  else
    config_error("J.policy must be auto, fixed or multiple");
  maybe(j, "value", p.value, "J");
  maybe(j, "multiple", p.multiple, "J");
  maybe(j, "tail_tol", p.tail_tol, "J");
  if (p.kind == JPolicy::Kind::Fixed && p.value < 1) config_error("J.value must be >= 1 for the fixed policy");
  if (!(p.multiple > 0)) config_error("J.multiple must be positive");
  if (!(p.tail_tol > 0)) config_error("J.tail_tol must be positive");
  return p;
}

const char* drift_name(DriftConvention d) { return d == DriftConvention::MeanZero ? "mean-zero" : "as-printed"; }

json to_json(const ExperimentConfig& c) {
  json j;
  j["schema"] = ExperimentConfig::kSchema;
  j["theorem"] = c.theorem;
  j["alpha"] = c.alpha;
  j["beta"] = c.beta;
  j["ell"] = sv_to_json(c.ell);
  j["h"] = sv_to_json(c.h);
  j["innovations"] = {{"sigma1", c.innov.sigma1},
                      {"sigma2", c.innov.sigma2},
                      {"x0", c.innov.x0},
                      {"mode", to_string(c.innov.mode)}};
  j["K"] = c.K.describe();
  j["N"] = c.N;
  j["M"] = c.M;
  j["t"] = c.t;
  j["J"] = j_to_json(c.J);
  j["seed"] = c.seed;
  j["drift"] = drift_name(c.drift);
  j["diagnostics"] = {{"N", c.diag.N},       {"M", c.diag.M},
                      {"r", c.diag.r},       {"eta_draws", c.diag.eta_draws},
                      {"tail_levels", c.diag.tail_levels}, {"a_N", c.diag.aN}};
  const auto& k = c.criteria;
  j["criteria"] = {{"trend_tol", k.trend_tol},       {"ks_max", k.ks_max},       {"cf_gap_max", k.cf_gap_max},
                   {"median_max", k.median_max},     {"int_k_df_tol", k.int_k_df_tol},
                   {"slope_slack", k.slope_slack},   {"tail_rel", k.tail_rel},   {"a_n_rel", k.a_n_rel},
                   {"p_min", k.p_min}};
  return j;
}

void apply_override(json& root, const std::string& ov) {
  const auto eq = ov.find('=');
  if (eq == std::string::npos || eq == 0) config_error("override '" + ov + "' is not key=value");
  const std::string key = ov.substr(0, eq), text = ov.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &root;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) config_error("override key '" + key + "' has an empty component");
    parts.push_back(part);
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    json& next = (*node)[parts[i]];
    if (next.is_null()) next = json::object();
    if (!next.is_object()) config_error("override '" + key + "': '" + parts[i] + "' is not an object");
    node = &next;
  }
  (*node)[parts.back()] = value;
}

}  // namespace

std::size_t JPolicy::resolve(double beta, const SlowlyVaryingSpec& ell, std::size_t N) const {
  switch (kind) {
    case Kind::Fixed: return value;
    case Kind::Multiple: return static_cast<std::size_t>(std::ceil(multiple * static_cast<double>(N)));
    case Kind::Auto:
      if (beta <= 1.0) return static_cast<std::size_t>(std::ceil(multiple * static_cast<double>(N)));
      return default_truncation(beta, ell, N, tail_tol);
  }
  return 0;
}

bool JPolicy::depends_on_n(double beta) const {
  return kind == Kind::Multiple || (kind == Kind::Auto && beta <= 1.0);
}

ExperimentConfig ExperimentConfig::preset(int theorem) {
  ExperimentConfig c;
  c.theorem = theorem;
  c.N = {1024, 4096, 16384};
  c.K = theorem == 1 ? FunctionalSpec::odd_bump() : FunctionalSpec::gaussian_bump();
  c.innov.sigma1 = c.innov.sigma2 = 0.5;
  switch (theorem) {
    case 1: c.alpha = 1.8, c.beta = 0.9; break;
    case 2:
      c.alpha = 0.8, c.beta = 1.6;
      c.innov.mode = InnovationMode::Raw;
      break;
    case 3: c.alpha = 1.6, c.beta = 0.8; break;
    default: config_error("theorem must be 1, 2 or 3");
  }
  c.innov.alpha = c.alpha;
  return c;
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text, const std::vector<std::string>& overrides) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) config_error("not valid JSON");
  if (!j.is_object()) config_error("top level must be an object");
  for (const auto& ov : overrides) apply_override(j, ov);

  allow_keys(j, {"schema", "theorem", "alpha", "beta", "ell", "h", "innovations", "K", "N", "M", "t", "J", "seed",
                 "workers", "drift", "diagnostics", "criteria"},
             "");
  if (!j.contains("schema")) config_error("missing 'schema'");
  if (get<std::string>(j, "schema", "") != kSchema) config_error(std::string("schema must be '") + kSchema + "'");
  if (!j.contains("theorem")) config_error("missing 'theorem'");
  const int theorem = get<int>(j, "theorem", "");
  if (theorem < 1 || theorem > 3) config_error("theorem must be 1, 2 or 3");

  // Missing keys take the preset values of the selected theorem.
  ExperimentConfig c = preset(theorem);
  maybe(j, "alpha", c.alpha, "");
  maybe(j, "beta", c.beta, "");
  if (j.contains("ell")) c.ell = sv_from_json(j["ell"], "ell");
  if (j.contains("h")) c.h = sv_from_json(j["h"], "h");
  if (j.contains("innovations")) {
    const auto& ji = j["innovations"];
    allow_keys(ji, {"sigma1", "sigma2", "x0", "mode"}, "innovations");
    maybe(ji, "sigma1", c.innov.sigma1, "innovations");
    maybe(ji, "sigma2", c.innov.sigma2, "innovations");
    maybe(ji, "x0", c.innov.x0, "innovations");
    if (ji.contains("mode")) {
      try {
        c.innov.mode = innovation_mode_from_string(get<std::string>(ji, "mode", "innovations"));
      } catch (const Error& e) {
        config_error(std::string("innovations.mode: ") + e.what());
      }
    }
  }
  c.innov.alpha = c.alpha;
  c.innov.h = c.h;
  if (j.contains("K")) {
    try {
      c.K = FunctionalSpec::parse(get<std::string>(j, "K", ""));
    } catch (const Error& e) {
      config_error(std::string("K: ") + e.what());
    }
  }
  maybe(j, "N", c.N, "");
  maybe(j, "M", c.M, "");
  maybe(j, "t", c.t, "");
  if (j.contains("J")) c.J = j_from_json(j["J"]);
  maybe(j, "seed", c.seed, "");
  maybe(j, "workers", c.workers, "");
  if (j.contains("drift")) {
    const auto d = get<std::string>(j, "drift", "");
    if (d == "mean-zero")
      c.drift = DriftConvention::MeanZero;
    else if (d == "as-printed")
      c.drift = DriftConvention::AsPrinted;
    else
      config_error("drift must be mean-zero or as-printed");
  }
  if (j.contains("diagnostics")) {
    const auto& jd = j["diagnostics"];
    allow_keys(jd, {"N", "M", "r", "eta_draws", "tail_levels", "a_N"}, "diagnostics");
    maybe(jd, "N", c.diag.N, "diagnostics");
    maybe(jd, "M", c.diag.M, "diagnostics");
    maybe(jd, "r", c.diag.r, "diagnostics");
    maybe(jd, "eta_draws", c.diag.eta_draws, "diagnostics");
    maybe(jd, "tail_levels", c.diag.tail_levels, "diagnostics");
    maybe(jd, "a_N", c.diag.aN, "diagnostics");
  }
  if (j.contains("criteria")) {
    const auto& jc = j["criteria"];
    auto& k = c.criteria;
    allow_keys(jc, {"trend_tol", "ks_max", "cf_gap_max", "median_max", "int_k_df_tol", "slope_slack", "tail_rel",
                    "a_n_rel", "p_min"},
               "criteria");
    maybe(jc, "trend_tol", k.trend_tol, "criteria");
    maybe(jc, "ks_max", k.ks_max, "criteria");
    maybe(jc, "cf_gap_max", k.cf_gap_max, "criteria");
    maybe(jc, "median_max", k.median_max, "criteria");
    maybe(jc, "int_k_df_tol", k.int_k_df_tol, "criteria");
    maybe(jc, "slope_slack", k.slope_slack, "criteria");
    maybe(jc, "tail_rel", k.tail_rel, "criteria");
    maybe(jc, "a_n_rel", k.a_n_rel, "criteria");
    maybe(jc, "p_min", k.p_min, "criteria");
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str(), overrides);
}

std::string ExperimentConfig::to_json_text() const { return to_json(*this).dump(); }

std::uint64_t ExperimentConfig::hash() const { return fnv1a64(to_json_text()); }

unsigned ExperimentConfig::resolved_workers() const { return workers == 0 ? default_workers() : workers; }

CoefficientSpec ExperimentConfig::coefficients(std::size_t n) const {
  return CoefficientSpec{beta, ell, J.resolve(beta, ell, n)};
}

void ExperimentConfig::validate() const {
  auto region = [&](bool ok, const std::string& what) {
    if (!ok) fail(ErrorCode::Domain, "theorem " + std::to_string(theorem) + " needs " + what);
  };
  const double p = alpha * beta;
  switch (theorem) {
    case 1:
      region(alpha > 1 && alpha < 2, "1 < alpha < 2");
      region(beta > 1 / alpha && beta < 1, "1/alpha < beta < 1");
      break;
    case 2: {
      region(p > 1 && p < 2, "1 < alpha beta < 2");
      region(beta > 1, "beta > 1");
      const double r = check_ell_ratio(ell, beta, {1e8})[0];
      region(std::abs(r - 1) <= 0.02, "l(x l^{1/beta}(x)) / l(x) within 2% of 1 at x = 1e8");
      break;
    }
    case 3:
      region(alpha > 1 && alpha < 2, "1 < alpha < 2");
      region(beta > 1 / alpha && beta <= 1, "1/alpha < beta <= 1");
      break;
    default: config_error("theorem must be 1, 2 or 3");
  }
  if (innov.alpha != alpha) config_error("innovation alpha must equal alpha");
  ell.validate();
  h.validate();
  innov.validate();
  K.validate();
  if (N.empty()) config_error("N grid is empty");
  for (std::size_t i = 0; i < N.size(); ++i) {
    if (N[i] < 1) config_error("N values must be >= 1");
    if (i > 0 && N[i] <= N[i - 1]) config_error("N grid must be increasing");
  }
  if (M < 1) config_error("M must be >= 1");
  if (t.empty()) config_error("t grid is empty");
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] > 0 && t[i] <= 1)) config_error("t values must lie in (0, 1]");
    if (i > 0 && t[i] <= t[i - 1]) config_error("t grid must be increasing");
  }
  for (std::size_t i = 1; i < diag.N.size(); ++i)
    if (diag.N[i] <= diag.N[i - 1]) config_error("diagnostics.N must be increasing");
  if (diag.M < 2) config_error("diagnostics.M must be >= 2");
  if (!(diag.r >= 1)) config_error("diagnostics.r must be >= 1");
  for (double q : diag.tail_levels)
    if (!(q > 0 && q < 1)) config_error("diagnostics.tail_levels must lie in (0, 1)");
  if (!(diag.aN > 1)) config_error("diagnostics.a_N must exceed 1");
}

}  // namespace lmf

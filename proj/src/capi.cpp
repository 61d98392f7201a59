#include "lmf/lmf.h"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <new>
#include <string>

#include "json.hpp"
#include "lmf/harness.hpp"

struct lmf_config {
  lmf::ExperimentConfig cfg;
};

struct lmf_report {
  std::string json;
  std::string csv;
  bool has_csv = false;
  int passed = 1;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
lmf_status guard(F&& f) {
  try {
    g_last_error.clear();
    f();
    return LMF_OK;
  } catch (const lmf::Error& e) {
    g_last_error = e.what();
    return static_cast<lmf_status>(static_cast<int>(e.code()));
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return LMF_E_RESOURCE;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return LMF_E_INTERNAL;
  }
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

void need(const void* p, const char* what) {
  if (!p) lmf::fail(lmf::ErrorCode::InvalidArgument, std::string(what) + " is null");
}

std::vector<std::string> collect(const char* const* ov, size_t n) {
  if (n) need(ov, "overrides");
  std::vector<std::string> out;
  for (size_t i = 0; i < n; ++i) {
    need(ov[i], "override");
    out.emplace_back(ov[i]);
  }
  return out;
}

}  // namespace

extern "C" {

const char* lmf_version(void) {
#ifdef LMF_VERSION
  return LMF_VERSION;
#else
  return "0.0.0";
#endif
}

const char* lmf_last_error(void) { return g_last_error.c_str(); }

const char* lmf_status_name(lmf_status s) {
  switch (s) {
    case LMF_OK: return "ok";
    case LMF_E_INVALID_ARGUMENT: return "invalid-argument";
    case LMF_E_DOMAIN: return "domain";
    case LMF_E_CONVERGENCE: return "convergence";
    case LMF_E_RESOURCE: return "resource";
    case LMF_E_CONFIG: return "config";
    case LMF_E_IO: return "io";
    case LMF_E_DEGENERATE: return "degenerate";
    case LMF_E_REGIME: return "regime";
    case LMF_E_INTERNAL: return "internal";
  }
  return "unknown";
}

void lmf_string_free(char* s) { std::free(s); }

lmf_status lmf_config_preset(int theorem, lmf_config** out) {
  return guard([&] {
    need(out, "out");
    *out = new lmf_config{lmf::ExperimentConfig::preset(theorem)};
  });
}

lmf_status lmf_config_from_json(const char* text, const char* const* overrides, size_t n, lmf_config** out) {
  return guard([&] {
    need(text, "text");
    need(out, "out");
    *out = new lmf_config{lmf::ExperimentConfig::from_json_text(text, collect(overrides, n))};
  });
}

lmf_status lmf_config_load(const char* path, const char* const* overrides, size_t n, lmf_config** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new lmf_config{lmf::ExperimentConfig::load(path, collect(overrides, n))};
  });
}

lmf_status lmf_config_set_seed(lmf_config* cfg, uint64_t seed) {
  return guard([&] {
    need(cfg, "config");
    cfg->cfg.seed = seed;
  });
}

lmf_status lmf_config_set_workers(lmf_config* cfg, unsigned workers) {
  return guard([&] {
    need(cfg, "config");
    cfg->cfg.workers = workers;
  });
}

lmf_status lmf_config_to_json(const lmf_config* cfg, char** out) {
  return guard([&] {
    need(cfg, "config");
    need(out, "out");
    *out = dup(cfg->cfg.to_json_text());
  });
}

lmf_status lmf_config_hash(const lmf_config* cfg, uint64_t* out) {
  return guard([&] {
    need(cfg, "config");
    need(out, "out");
    *out = cfg->cfg.hash();
  });
}

void lmf_config_free(lmf_config* cfg) { delete cfg; }

lmf_status lmf_run_constants(const lmf_config* cfg, lmf_report** out) {
  return guard([&] {
    need(cfg, "config");
    need(out, "out");
    const auto k = lmf::compute_constants(cfg->cfg);
    *out = new lmf_report{lmf::constants_json(cfg->cfg, k), {}, false, 1};
  });
}

lmf_status lmf_run_verify(const lmf_config* cfg, lmf_report** out) {
  return guard([&] {
    need(cfg, "config");
    need(out, "out");
    const auto r = lmf::verify(cfg->cfg);
    *out = new lmf_report{lmf::report_json(r), lmf::quantiles_csv(r.marginals), true, r.passed() ? 1 : 0};
  });
}

lmf_status lmf_run_selftest(const lmf_config* cfg, lmf_report** out) {
  return guard([&] {
    need(cfg, "config");
    need(out, "out");
    const auto r = lmf::selftest(cfg->cfg);
    *out = new lmf_report{lmf::report_json(r), lmf::quantiles_csv(r.marginals), true, r.passed() ? 1 : 0};
  });
}

lmf_status lmf_run_diagnose(const lmf_config* cfg, lmf_report** out) {
  return guard([&] {
    need(cfg, "config");
    need(out, "out");
    const auto r = lmf::diagnose(cfg->cfg);
    *out = new lmf_report{lmf::report_json(r), {}, false, r.passed() ? 1 : 0};
  });
}

lmf_status lmf_report_json(const lmf_report* r, char** out) {
  return guard([&] {
    need(r, "report");
    need(out, "out");
    *out = dup(r->json);
  });
}

lmf_status lmf_report_quantiles_csv(const lmf_report* r, char** out) {
  return guard([&] {
    need(r, "report");
    need(out, "out");
    if (!r->has_csv) lmf::fail(lmf::ErrorCode::InvalidArgument, "report has no quantile table");
    *out = dup(r->csv);
  });
}

int lmf_report_passed(const lmf_report* r) { return r ? r->passed : 0; }

void lmf_report_free(lmf_report* r) { delete r; }

lmf_status lmf_simulate_to_file(const lmf_config* cfg, const char* path, char** summary) {
  return guard([&] {
    need(cfg, "config");
    need(path, "path");
    const auto& c = cfg->cfg;
    c.validate();
    const std::size_t N = c.N.back();
    const auto coefs = c.coefficients(N);
    const auto batch = lmf::simulate_paths(coefs, c.innov, N, c.M, c.seed, c.resolved_workers());
    lmf::write_path_batch(path, batch);
    if (summary) {
      char hash[17];
      std::snprintf(hash, sizeof hash, "%016" PRIx64, c.hash());
      const nlohmann::json j = {{"kind", "simulate"}, {"N", N},       {"M", c.M},       {"J", coefs.J},
                                {"seed", c.seed},     {"config_hash", hash}, {"version", lmf_version()}};
      *summary = dup(j.dump(2));
    }
  });
}

lmf_status lmf_limit_table_csv(const lmf_config* cfg, size_t points, char** out) {
  return guard([&] {
    need(cfg, "config");
    need(out, "out");
    if (points < 2) lmf::fail(lmf::ErrorCode::InvalidArgument, "limit table needs at least 2 points");
    const auto& c = cfg->cfg;
    const auto k = lmf::compute_constants(c);
    std::string s = "t,x,cdf,pdf\n";
    char buf[128];
    for (double t : c.t) {
      const auto law = lmf::limit_law(c, k, t);
      if (law.degenerate()) lmf::fail(lmf::ErrorCode::Degenerate, "limit law is degenerate; use theorem 3 mode");
      const lmf::StableCdfTable tab(law);
      const double lo = tab.quantile(0.001), hi = tab.quantile(0.999);
      for (size_t i = 0; i < points; ++i) {
        const double x = lo + (hi - lo) * double(i) / double(points - 1);
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", t, x, tab(x), lmf::stable_pdf(law, x));
        s += buf;
      }
    }
    *out = dup(s);
  });
}

lmf_status lmf_stable_eval(double alpha, double scale, double skew, double shift, const double* x, size_t n,
                           double* cdf, double* pdf) {
  return guard([&] {
    if (n) need(x, "x");
    const lmf::StableLaw law{alpha, scale, skew, shift};
    law.validate();
    for (size_t i = 0; i < n; ++i) {
      if (cdf) cdf[i] = lmf::stable_cdf(law, x[i]);
      if (pdf) pdf[i] = lmf::stable_pdf(law, x[i]);
    }
  });
}

}  // extern "C"

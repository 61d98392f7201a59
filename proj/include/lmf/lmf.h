/* C interface to the lmf library. All handles are opaque; every call that can
 * fail returns an lmf_status and leaves a message for lmf_last_error(). Strings
 * returned through char** are owned by the caller and freed with
 * lmf_string_free. */
#ifndef LMF_LMF_H
#define LMF_LMF_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define LMF_API __declspec(dllexport)
#else
#define LMF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lmf_status {
  LMF_OK = 0,
  LMF_E_INVALID_ARGUMENT = 1,
  LMF_E_DOMAIN = 2,
  LMF_E_CONVERGENCE = 3,
  LMF_E_RESOURCE = 4,
  LMF_E_CONFIG = 5,
  LMF_E_IO = 6,
  LMF_E_DEGENERATE = 7,
  LMF_E_REGIME = 8,
  LMF_E_INTERNAL = 99
} lmf_status;

typedef struct lmf_config lmf_config;
typedef struct lmf_report lmf_report;

LMF_API const char* lmf_version(void);
/* Message of the last failed call on this thread ("" if none). */
LMF_API const char* lmf_last_error(void);
LMF_API const char* lmf_status_name(lmf_status s);
LMF_API void lmf_string_free(char* s);

/* Configuration. Overrides are "dotted.key=value" strings. */
LMF_API lmf_status lmf_config_preset(int theorem, lmf_config** out);
LMF_API lmf_status lmf_config_from_json(const char* text, const char* const* overrides, size_t n_overrides,
                                        lmf_config** out);
LMF_API lmf_status lmf_config_load(const char* path, const char* const* overrides, size_t n_overrides,
                                   lmf_config** out);
LMF_API lmf_status lmf_config_set_seed(lmf_config* cfg, uint64_t seed);
LMF_API lmf_status lmf_config_set_workers(lmf_config* cfg, unsigned workers);
LMF_API lmf_status lmf_config_to_json(const lmf_config* cfg, char** out);
LMF_API lmf_status lmf_config_hash(const lmf_config* cfg, uint64_t* out);
LMF_API void lmf_config_free(lmf_config* cfg);

/* Pipelines. Each produces a report handle. */
LMF_API lmf_status lmf_run_constants(const lmf_config* cfg, lmf_report** out);
LMF_API lmf_status lmf_run_verify(const lmf_config* cfg, lmf_report** out);
LMF_API lmf_status lmf_run_selftest(const lmf_config* cfg, lmf_report** out);
LMF_API lmf_status lmf_run_diagnose(const lmf_config* cfg, lmf_report** out);

LMF_API lmf_status lmf_report_json(const lmf_report* r, char** out);
/* Quantile table (verify and selftest reports only). */
LMF_API lmf_status lmf_report_quantiles_csv(const lmf_report* r, char** out);
/* 1 when every criterion passed (constants reports have none). */
LMF_API int lmf_report_passed(const lmf_report* r);
LMF_API void lmf_report_free(lmf_report* r);

/* Simulates M paths of length N = last value of the N grid and writes them in
 * the binary path format; a JSON summary is returned through summary. */
LMF_API lmf_status lmf_simulate_to_file(const lmf_config* cfg, const char* path, char** summary);

/* CSV (t, x, cdf, pdf) of the limit law at each t of the config, on a grid
 * spanning its 0.001 and 0.999 quantiles. */
LMF_API lmf_status lmf_limit_table_csv(const lmf_config* cfg, size_t points, char** out);

/* Stable law evaluation: cdf and pdf at n points (either output may be NULL). */
LMF_API lmf_status lmf_stable_eval(double alpha, double scale, double skew, double shift, const double* x, size_t n,
                                   double* cdf, double* pdf);

#ifdef __cplusplus
}
#endif

#endif

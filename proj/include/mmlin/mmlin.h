#ifndef MMLIN_H_
#define MMLIN_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MMLIN_API __declspec(dllexport)
#else
#define MMLIN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mmlin_status {
  MMLIN_OK = 0,
  MMLIN_INVALID_ARGUMENT = 1,
  MMLIN_DATA_ERROR = 2,
  MMLIN_MISSING_ARM = 3,
  MMLIN_INVALID_PRUNING = 4,
  MMLIN_INVALID_DELTA = 5,
  MMLIN_INVALID_RULE = 6,
  MMLIN_INVALID_VARIANCE = 7,
  MMLIN_SOLVER_STALLED = 8,
  MMLIN_ORACLE_TOO_LARGE = 9,
  MMLIN_DEGENERATE_DENOMINATOR = 10,
  MMLIN_CONFIG_ERROR = 11,
  MMLIN_IO_ERROR = 12,
  MMLIN_INTERNAL_ERROR = 99
} mmlin_status;

typedef enum mmlin_target { MMLIN_TARGET_ATE = 0, MMLIN_TARGET_ATT = 1 } mmlin_target;
typedef enum mmlin_delta_rule { MMLIN_DELTA_FIXED = 0, MMLIN_DELTA_QUANTILE = 1, MMLIN_DELTA_RMSE = 2 } mmlin_delta_rule;
typedef enum mmlin_ci_style { MMLIN_CI_FOLDED_NORMAL = 0, MMLIN_CI_ADDITIVE = 1 } mmlin_ci_style;
typedef enum mmlin_fit_method { MMLIN_FIT_LOCAL_CONSTANT = 0, MMLIN_FIT_NEAREST_NEIGHBOR = 1 } mmlin_fit_method;

typedef struct mmlin_sample mmlin_sample;
typedef struct mmlin_estimate mmlin_estimate;
typedef struct mmlin_sweep mmlin_sweep;
typedef struct mmlin_sim mmlin_sim;
typedef struct mmlin_curve mmlin_curve;

/* Message of the last failure on the calling thread ("" if none). */
MMLIN_API const char* mmlin_last_error(void);
MMLIN_API const char* mmlin_status_name(mmlin_status status);
MMLIN_API const char* mmlin_version(void);
/* Strings and arrays returned by the library are released with these. */
MMLIN_API void mmlin_string_free(char* s);
MMLIN_API void mmlin_array_free(double* a);

/* Samples: y, optional 0/1 d (may be NULL), x stored row-major n x p. */
MMLIN_API mmlin_status mmlin_sample_read_csv(const char* path, mmlin_sample** out);
MMLIN_API mmlin_status mmlin_sample_from_arrays(size_t n, size_t p, const double* y, const int* d, const double* x,
                                                mmlin_sample** out);
MMLIN_API void mmlin_sample_free(mmlin_sample* s);
MMLIN_API size_t mmlin_sample_n(const mmlin_sample* s);
MMLIN_API size_t mmlin_sample_p(const mmlin_sample* s);

typedef struct mmlin_estimate_options {
  mmlin_target target;
  double lipschitz_c;
  const double* a_diag; /* NULL = identity */
  size_t a_diag_len;
  mmlin_delta_rule delta_rule;
  double delta;
  double alpha;
  double beta;
  double sigma_bar; /* NaN or <= 0: root mean squared residual of the preliminary fit */
  mmlin_ci_style ci_style;
  mmlin_fit_method fit_method;
  int fit_k;
  int threads;
  int max_iterations; /* solver budget, summed over working-set rounds */
} mmlin_estimate_options;

MMLIN_API void mmlin_estimate_options_init(mmlin_estimate_options* opts);

MMLIN_API mmlin_status mmlin_estimate_run(const mmlin_sample* s, const mmlin_estimate_options* opts,
                                         mmlin_estimate** out);
MMLIN_API void mmlin_estimate_free(mmlin_estimate* e);
MMLIN_API double mmlin_estimate_psi_hat(const mmlin_estimate* e);
MMLIN_API double mmlin_estimate_se(const mmlin_estimate* e);
MMLIN_API double mmlin_estimate_maxbias(const mmlin_estimate* e);
MMLIN_API double mmlin_estimate_delta(const mmlin_estimate* e);
/* Copies min(len, n) weights into k. */
MMLIN_API size_t mmlin_estimate_weights(const mmlin_estimate* e, double* k, size_t len);
MMLIN_API mmlin_status mmlin_estimate_report_json(const mmlin_estimate* e, char** out);
MMLIN_API mmlin_status mmlin_estimate_weights_csv(const mmlin_estimate* e, char** out);

/* "lo:hi:steps" into a fresh array. */
MMLIN_API mmlin_status mmlin_parse_grid(const char* spec, double** values, size_t* count);

MMLIN_API mmlin_status mmlin_sweep_c(const mmlin_sample* s, const mmlin_estimate_options* opts, const double* c_grid,
                                     size_t count, mmlin_sweep** out);
MMLIN_API void mmlin_sweep_free(mmlin_sweep* w);
MMLIN_API size_t mmlin_sweep_failed_rows(const mmlin_sweep* w);
MMLIN_API mmlin_status mmlin_sweep_csv(const mmlin_sweep* w, char** out);
MMLIN_API mmlin_status mmlin_sweep_svg(const mmlin_sweep* w, char** out);

MMLIN_API mmlin_status mmlin_modulus_curve(const mmlin_sample* s, const mmlin_estimate_options* opts,
                                           const double* deltas, size_t count, mmlin_curve** out);
MMLIN_API void mmlin_curve_free(mmlin_curve* c);
MMLIN_API mmlin_status mmlin_curve_csv(const mmlin_curve* c, char** out);

typedef struct mmlin_sim_options {
  const int* cases;
  size_t n_cases;
  const int64_t* n_grid;
  size_t n_n;
  const double* c_grid;
  size_t n_c;
  int reps;
  uint64_t seed;
  int threads;
  double noise_sd;
  double delta_star;
  double alpha;
  int augmented;
  int coverage;
  mmlin_fit_method fit_method;
} mmlin_sim_options;

/* Case 1, n = 100, C = 2, 500 reps, seed 1, one thread. */
MMLIN_API void mmlin_sim_options_init(mmlin_sim_options* opts);
MMLIN_API mmlin_status mmlin_simulate(const mmlin_sim_options* opts, mmlin_sim** out);
MMLIN_API void mmlin_sim_free(mmlin_sim* r);
MMLIN_API mmlin_status mmlin_sim_panel_csv(const mmlin_sim* r, char** out);
MMLIN_API mmlin_status mmlin_sim_augmented_csv(const mmlin_sim* r, char** out);
MMLIN_API mmlin_status mmlin_sim_reps_csv(const mmlin_sim* r, char** out);

#ifdef __cplusplus
}
#endif

#endif

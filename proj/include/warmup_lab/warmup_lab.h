#ifndef WARMUP_LAB_H
#define WARMUP_LAB_H

/* C interface to warmup-lab. Every function returns a status code (WL_OK on
 * success); on failure wl_last_error() describes the problem for the calling
 * thread. Strings returned through char** out-parameters are owned by the
 * caller and must be released with wl_string_free(). */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(WARMUP_LAB_BUILDING)
#    define WL_API __declspec(dllexport)
#  else
#    define WL_API __declspec(dllimport)
#  endif
#else
#  define WL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

enum wl_status {
  WL_OK = 0,
  WL_E_PRECONDITION = 1,
  WL_E_EVALUATION = 2,
  WL_E_CAPACITY = 3,
  WL_E_CONSTRUCTION = 4,
  WL_E_CAPABILITY = 5,
  WL_E_INCONSISTENCY = 6,
  WL_E_INPUT = 7,
  WL_E_SAMPLER = 8,
  WL_E_OUT_OF_HORIZON = 9,
  WL_E_FIT = 10,
  WL_E_CONFIG = 11,
  WL_E_IO = 12,
  WL_E_INTERNAL = 13,
  WL_E_NULL_ARGUMENT = 64,
  WL_E_UNKNOWN = 99
};

typedef struct wl_problem wl_problem;
typedef struct wl_trajectory wl_trajectory;

WL_API const char* wl_version(void);
WL_API const char* wl_status_name(int status);
/* Message of the last failure on this thread; empty after a success. */
WL_API const char* wl_last_error(void);
WL_API void wl_string_free(char* s);

/* ---- problems --------------------------------------------------------- */

/* name is a registered problem; params_json is a JSON object (may be NULL). */
WL_API int wl_problem_create(const char* name, const char* params_json, wl_problem** out);
/* TOML text with a [problem] table. */
WL_API int wl_problem_from_toml(const char* toml_text, const char* source, wl_problem** out);
WL_API void wl_problem_free(wl_problem* p);
WL_API int wl_problem_dim(const wl_problem* p, int64_t* dim);
WL_API int wl_problem_initial_point(const wl_problem* p, double* w, size_t n);
WL_API int wl_problem_value(const wl_problem* p, const double* w, size_t n, double* f);
WL_API int wl_problem_gradient(const wl_problem* p, const double* w, size_t n, double* grad);
/* Certificate and derived step sizes as JSON. */
WL_API int wl_problem_constants_json(const wl_problem* p, char** json);
/* Samples n_points from the problem's region and checks the certificate, or
 * (cert[0], cert[1], cert[2]) = (H0, H1, f*) when cert is non-NULL. */
WL_API int wl_problem_verify(const wl_problem* p, const double* cert, int64_t n_points, uint64_t seed,
                             int64_t* violations, double* worst_ratio);
WL_API int wl_problem_lemmas_csv(const wl_problem* p, int64_t n_points, uint64_t seed, char** csv);

/* ---- optimisation ----------------------------------------------------- */

/* policy_json uses the [policy] table layout, e.g. {"kind":"constant","eta":0.1}.
 * grad_tol / loss_tol <= 0 disable those stop rules. */
WL_API int wl_run_gd(const wl_problem* p, const char* policy_json, uint64_t max_iters, double grad_tol,
                     double loss_tol, wl_trajectory** out);
WL_API int wl_run_sgd(const wl_problem* p, const char* policy_json, int64_t batch_size, uint64_t seed,
                      uint64_t max_iters, wl_trajectory** out);
WL_API void wl_trajectory_free(wl_trajectory* t);
WL_API int wl_trajectory_iterations(const wl_trajectory* t, uint64_t* iters);
WL_API int wl_trajectory_final_loss(const wl_trajectory* t, double* f);
/* Static string: max_iters, grad_tol, loss_tol, diverged or step_error. */
WL_API int wl_trajectory_stop_reason(const wl_trajectory* t, const char** reason);
WL_API int wl_trajectory_csv(const wl_trajectory* t, char** csv);

/* ---- theory ----------------------------------------------------------- */

/* kind: upper_aiming, upper_pl, upper_nonconvex, lower_nonconvex, lower_convex,
 * lower_pl; inputs_json holds H0, H1, delta0, eps, theta, mu, dist0 as needed. */
WL_API int wl_predict_bound(const char* kind, const char* inputs_json, double* iters);
WL_API int wl_max_safe_constant_step(double f_w0, double H1, double* eta);

/* ---- harness ---------------------------------------------------------- */

/* Runs a TOML config (with its sweep) and returns a JSON array of
 * {"id", "dir", "stop_reason", "iters"} records. jobs = 0 uses all threads. */
WL_API int wl_run_config_file(const char* path, unsigned jobs, char** runs_json);
WL_API int wl_run_config_text(const char* toml_text, const char* source, unsigned jobs, char** runs_json);
/* Canonical TOML of a config after validation. */
WL_API int wl_config_canonical(const char* toml_text, const char* source, char** toml_out);
/* Newline-separated experiment names. */
WL_API int wl_experiment_names(char** names);
/* all_ok is set to 1 when every checked row passes. */
WL_API int wl_run_experiment(const char* name, const char* out_root, char** markdown, int* all_ok);
/* warnings_json is a JSON array of strings (may be NULL if not wanted). */
WL_API int wl_report(const char* const* run_ids, size_t n_ids, const char* root, char** markdown, char** csv,
                     char** warnings_json);
/* WARMUP_LAB_OUT when set, else `configured`. */
WL_API int wl_output_root(const char* configured, char** path);

#ifdef __cplusplus
}
#endif

#endif /* WARMUP_LAB_H */

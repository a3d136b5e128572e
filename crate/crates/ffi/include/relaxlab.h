#ifndef RELAXLAB_H
#define RELAXLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum {
  RELAXLAB_STATUS_OK = 0,
  RELAXLAB_STATUS_NULL_POINTER = 1,
  RELAXLAB_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Bad config text or a failed config check.
   */
  RELAXLAB_STATUS_CONFIG = 3,
  RELAXLAB_STATUS_IO = 4,
  /**
   * The numerics refused the input (domain, CFL, bracketing, ...).
   */
  RELAXLAB_STATUS_NUMERICS = 5,
  /**
   * The run finished but at least one diagnostic check failed.
   */
  RELAXLAB_STATUS_CHECKS_FAILED = 6,
  RELAXLAB_STATUS_PANIC = 7,
} RelaxlabStatus;

/**
 * Parsed experiment config.
 */
typedef struct RelaxlabConfig RelaxlabConfig;

/**
 * One split-scheme run: config, current state and the log of the last run.
 */
typedef struct RelaxlabSimulation RelaxlabSimulation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *relaxlab_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *relaxlab_version(void);

/**
 * Parses config JSON. Relative paths inside it resolve against `base_dir`,
 * or the working directory when `base_dir` is NULL.
 *
 * # Safety
 * `json` and `base_dir` must be NULL or NUL-terminated; `out` must be
 * writable.
 */
RelaxlabStatus relaxlab_config_parse(const char *json, const char *base_dir, RelaxlabConfig **out);

/**
 * Reads and parses a config file.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` must be writable.
 */
RelaxlabStatus relaxlab_config_load(const char *path, RelaxlabConfig **out);

/**
 * # Safety
 * `cfg` must come from this library and not be freed twice.
 */
void relaxlab_config_free(RelaxlabConfig *cfg);

/**
 * Experiment name; valid while `cfg` lives.
 *
 * # Safety
 * `cfg` must be a live handle.
 */
const char *relaxlab_config_name(const RelaxlabConfig *cfg);

/**
 * Runs the configured experiment and writes its outputs to `out_dir`.
 * `threads == 0` uses the default pool. Returns `ChecksFailed` when the
 * outputs were written but a diagnostic failed.
 *
 * # Safety
 * `cfg` must be a live handle and `out_dir` NUL-terminated.
 */
RelaxlabStatus relaxlab_run_experiment(const RelaxlabConfig *cfg,
                                       const char *out_dir,
                                       size_t threads);

/**
 * Builds a simulation from the config's model, grid, scheme and initial
 * data. The config handle may be freed afterwards.
 *
 * # Safety
 * `cfg` must be a live handle; `out` must be writable.
 */
RelaxlabStatus relaxlab_simulation_new(const RelaxlabConfig *cfg, RelaxlabSimulation **out);

/**
 * # Safety
 * `sim` must come from this library and not be freed twice.
 */
void relaxlab_simulation_free(RelaxlabSimulation *sim);

/**
 * Number of fine cells.
 *
 * # Safety
 * `sim` must be a live handle.
 */
size_t relaxlab_simulation_len(const RelaxlabSimulation *sim);

/**
 * Copies the current `u` and `v` into caller buffers of length `len`.
 * Either buffer may be NULL to skip it.
 *
 * # Safety
 * Non-null buffers must hold `len` doubles.
 */
RelaxlabStatus relaxlab_simulation_get_fields(const RelaxlabSimulation *sim,
                                              double *u,
                                              double *v,
                                              size_t len);

/**
 * Replaces the state. Values must lie in [0, 1].
 *
 * # Safety
 * Both buffers must hold `len` doubles.
 */
RelaxlabStatus relaxlab_simulation_set_fields(RelaxlabSimulation *sim,
                                              const double *u,
                                              const double *v,
                                              size_t len);

/**
 * Advances the state by the scheme's horizon.
 *
 * # Safety
 * `sim` must be a live handle.
 */
RelaxlabStatus relaxlab_simulation_run(RelaxlabSimulation *sim);

/**
 * Entropy residual maxima of the last run: convection sub-steps and
 * events. A positive value is a violated inequality.
 *
 * # Safety
 * `sim` must be a live handle; outputs may be NULL.
 */
RelaxlabStatus relaxlab_simulation_residuals(const RelaxlabSimulation *sim,
                                             double *convect,
                                             double *event);

/**
 * Langmuir isotherm `A(u) = (1 + β) u / (1 + β u)`; `β = 0` is linear.
 *
 * # Safety
 * `out` must be writable.
 */
RelaxlabStatus relaxlab_isotherm_value(double beta, double u, double *out);

/**
 * One pointwise relaxation layer with `rate = μΔt`; a negative `rate`
 * means `μ = ∞`.
 *
 * # Safety
 * `u1` and `v1` must be writable.
 */
RelaxlabStatus relaxlab_relax_inner(double beta,
                                    double u0,
                                    double v0,
                                    double rate,
                                    double *u1,
                                    double *v1);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RELAXLAB_H */

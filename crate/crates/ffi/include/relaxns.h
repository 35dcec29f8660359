#ifndef RELAXNS_H
#define RELAXNS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Values from 1 to 18 mirror the library error classes.
 */
typedef enum RelaxnsStatus {
  RELAXNS_STATUS_OK = 0,
  RELAXNS_STATUS_INVALID_GRID = 1,
  RELAXNS_STATUS_GRID_MISMATCH = 2,
  RELAXNS_STATUS_RANK_MISMATCH = 3,
  RELAXNS_STATUS_DIMENSION_MISMATCH = 4,
  RELAXNS_STATUS_UNSUPPORTED = 5,
  RELAXNS_STATUS_INVALID_ARGUMENT = 6,
  RELAXNS_STATUS_CFL = 7,
  RELAXNS_STATUS_STEP_GUARD = 8,
  RELAXNS_STATUS_NON_FINITE = 9,
  RELAXNS_STATUS_TIME_WINDOW = 10,
  RELAXNS_STATUS_FORCING_GAP = 11,
  RELAXNS_STATUS_INSUFFICIENT_POINTS = 12,
  RELAXNS_STATUS_CERTIFICATE = 13,
  RELAXNS_STATUS_DIVERGED = 14,
  RELAXNS_STATUS_CONFIG = 15,
  RELAXNS_STATUS_CHECK_FAILED = 16,
  RELAXNS_STATUS_IO = 17,
  RELAXNS_STATUS_JSON = 18,
  RELAXNS_STATUS_NULL_POINTER = 100,
  RELAXNS_STATUS_INVALID_UTF8 = 101,
  RELAXNS_STATUS_BUFFER_SIZE = 102,
  RELAXNS_STATUS_PANIC = 103,
} RelaxnsStatus;

/**
 * Field selector for solver state access.
 */
typedef enum RelaxnsField {
  RELAXNS_FIELD_PRESSURE = 0,
  RELAXNS_FIELD_VELOCITY = 1,
  RELAXNS_FIELD_STRESS = 2,
} RelaxnsField;

/**
 * Periodic grid on the unit torus.
 */
typedef struct RelaxnsGrid RelaxnsGrid;

/**
 * Relaxation-system state with a fixed-step integrator.
 */
typedef struct RelaxnsSolver RelaxnsSolver;

/**
 * `L^2` and `L^inf` norms of a solver state.
 */
typedef struct RelaxnsNorms {
  double t;
  double u_l2;
  double p_l2;
  double stress_l2;
  double div_u_l2;
  double u_linf;
} RelaxnsNorms;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *relaxns_version(void);

/**
 * Message of the last failure on this thread, or null after a success.
 * The pointer stays valid until the next library call on this thread.
 */
const char *relaxns_last_error_message(void);

/**
 * Process exit code the command-line tool uses for `status`.
 */
int32_t relaxns_status_exit_code(enum RelaxnsStatus status);

/**
 * Creates a `dim`-dimensional grid with `n` points per axis.
 */
enum RelaxnsStatus relaxns_grid_new(size_t dim, size_t n, struct RelaxnsGrid **out);

void relaxns_grid_free(struct RelaxnsGrid *grid);

/**
 * Number of grid points, or zero for a null grid.
 */
size_t relaxns_grid_points(const struct RelaxnsGrid *grid);

/**
 * Buffer length of one field on `grid`, or zero for a null grid.
 */
size_t relaxns_field_len(const struct RelaxnsGrid *grid, enum RelaxnsField which);

/**
 * Samples the Taylor-Green velocity of the given amplitude into `buf`.
 */
enum RelaxnsStatus relaxns_taylor_green(const struct RelaxnsGrid *grid,
                                        double amplitude,
                                        double *buf,
                                        size_t len);

/**
 * Creates a solver with zero state for relaxation parameters `epsilon`,
 * `delta` and fixed step `dt`.
 */
enum RelaxnsStatus relaxns_solver_new(const struct RelaxnsGrid *grid,
                                      double epsilon,
                                      double delta,
                                      double dt,
                                      struct RelaxnsSolver **out);

void relaxns_solver_free(struct RelaxnsSolver *solver);

/**
 * Replaces one field of the state; time is unchanged.
 */
enum RelaxnsStatus relaxns_solver_set_field(struct RelaxnsSolver *solver,
                                            enum RelaxnsField which,
                                            const double *values,
                                            size_t len);

/**
 * Sets the state from a velocity field, with pressure and stress taken
 * from the Navier-Stokes relations for that velocity, and resets time to 0.
 */
enum RelaxnsStatus relaxns_solver_prepare(struct RelaxnsSolver *solver,
                                          const double *velocity,
                                          size_t len);

/**
 * Advances the state by `steps` fixed steps. On failure the state is left
 * at the last successful step.
 */
enum RelaxnsStatus relaxns_solver_step(struct RelaxnsSolver *solver, size_t steps);

/**
 * Current time, or NaN for a null solver.
 */
double relaxns_solver_time(const struct RelaxnsSolver *solver);

/**
 * Copies one field of the state into `buf`.
 */
enum RelaxnsStatus relaxns_solver_get_field(const struct RelaxnsSolver *solver,
                                            enum RelaxnsField which,
                                            double *buf,
                                            size_t len);

/**
 * Norms of the current state.
 */
enum RelaxnsStatus relaxns_solver_norms(const struct RelaxnsSolver *solver,
                                        struct RelaxnsNorms *out);

/**
 * Runs a command-line subcommand (`run-ns`, `run-relax`, `run-affine`,
 * `sweep` or `check`) with a JSON configuration, writing artifacts and a
 * manifest into `out_dir`. `config_json` may be null for `check`.
 */
enum RelaxnsStatus relaxns_run_command(const char *command,
                                       const char *config_json,
                                       const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RELAXNS_H */

#ifndef BLAB_H
#define BLAB_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum BlabStatus {
  BLAB_STATUS_OK = 0,
  BLAB_STATUS_NULL_POINTER = 1,
  BLAB_STATUS_INVALID_ARGUMENT = 2,
  BLAB_STATUS_PRECONDITION = 3,
  BLAB_STATUS_NON_CONVERGENCE = 4,
  BLAB_STATUS_IO = 5,
  BLAB_STATUS_PANIC = 6,
} BlabStatus;

/**
 * Verdict of an admissibility diagnostic.
 */
typedef enum BlabVerdict {
  BLAB_VERDICT_DIVERGES = 0,
  BLAB_VERDICT_CONVERGES = 1,
  BLAB_VERDICT_INCONCLUSIVE = 2,
  BLAB_VERDICT_FMO_CONSISTENT = 3,
  BLAB_VERDICT_FMO_VIOLATED = 4,
} BlabVerdict;

/**
 * Result of a Dirichlet solve.
 */
typedef struct BlabDirichlet BlabDirichlet;

/**
 * Sampled complex field on a square grid.
 */
typedef struct BlabField BlabField;

/**
 * Scalar summary of a principal solve.
 */
typedef struct BlabSolveSummary {
  size_t iterations;
  double final_residual;
  double k_max;
  double tail_residual;
  double min_interior_jacobian;
  bool koebe_verdict;
  bool hydrodynamic;
  bool homeomorphic_proxy;
  bool regular_proxy;
} BlabSolveSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread (empty after a success).
 * The pointer stays valid until the next call on the same thread.
 */
const char *blab_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *blab_version(void);

/**
 * Creates a field from `2 * n * n` interleaved `re, im` values in row-major
 * order (rows along the imaginary axis).
 *
 * # Safety
 * `values` must point to `2 * n * n` readable doubles; `out` must be writable.
 */
enum BlabStatus blab_field_new(size_t n,
                               double half_width,
                               double center_re,
                               double center_im,
                               const double *values,
                               struct BlabField **out);

/**
 * Reads a CFLD-1 file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum BlabStatus blab_field_read(const char *path, struct BlabField **out);

/**
 * Writes a field as CFLD-1.
 *
 * # Safety
 * `field` must come from this library; `path` must be NUL-terminated.
 */
enum BlabStatus blab_field_write(const struct BlabField *field, const char *path);

/**
 * Nodes per side; 0 for a null handle.
 *
 * # Safety
 * `field` must be null or come from this library.
 */
size_t blab_field_n(const struct BlabField *field);

/**
 * Copies the values into `out` as interleaved `re, im` pairs; `capacity` is
 * the number of doubles available and must be at least `2 * n * n`.
 *
 * # Safety
 * `out` must point to `capacity` writable doubles.
 */
enum BlabStatus blab_field_values(const struct BlabField *field, double *out, size_t capacity);

/**
 * # Safety
 * `field` must be null or a handle not yet freed.
 */
void blab_field_free(struct BlabField *field);

/**
 * Principal solution `f = z + P[h]` of `f_zbar = mu f_z`; `out_map` receives
 * a new field handle.
 *
 * # Safety
 * Pointers must be valid; `summary` may be null.
 */
enum BlabStatus blab_solve_principal(const struct BlabField *mu,
                                     double tol,
                                     size_t max_iterations,
                                     struct BlabField **out_map,
                                     struct BlabSolveSummary *summary);

/**
 * Dirichlet problem with `m` uniform boundary samples of `phi`.
 *
 * # Safety
 * `phi` must point to `m` readable doubles; `out` must be writable.
 */
enum BlabStatus blab_solve_dirichlet(const struct BlabField *mu,
                                     const double *phi,
                                     size_t m,
                                     double z0_re,
                                     double z0_im,
                                     double tol,
                                     struct BlabDirichlet **out);

/**
 * The solution `f = F o G` as a new field handle.
 *
 * # Safety
 * `sol` must come from [`blab_solve_dirichlet`]; `out` must be writable.
 */
enum BlabStatus blab_dirichlet_solution(const struct BlabDirichlet *sol, struct BlabField **out);

/**
 * Number of Taylor coefficients of `F`.
 *
 * # Safety
 * `sol` must be null or come from [`blab_solve_dirichlet`].
 */
size_t blab_dirichlet_coefficient_count(const struct BlabDirichlet *sol);

/**
 * Copies the Taylor coefficients of `F` as interleaved `re, im` pairs.
 *
 * # Safety
 * `out` must point to `capacity` writable doubles.
 */
enum BlabStatus blab_dirichlet_coefficients(const struct BlabDirichlet *sol,
                                            double *out,
                                            size_t capacity);

/**
 * `max_j |Re f(e^{i theta_j}) - phi_j|`.
 *
 * # Safety
 * `out` must be writable.
 */
enum BlabStatus blab_dirichlet_boundary_residual(const struct BlabDirichlet *sol, double *out);

/**
 * # Safety
 * `sol` must be null or a handle not yet freed.
 */
void blab_dirichlet_free(struct BlabDirichlet *sol);

/**
 * Divergence of `∫ dt / (t q(t))` for the circle means of `Q` (real part of
 * `q`) around `z0`. Pass `t_min <= 0` for two grid cells.
 *
 * # Safety
 * `out` must be writable.
 */
enum BlabStatus blab_divergence_check(const struct BlabField *q,
                                      double z0_re,
                                      double z0_im,
                                      double delta0,
                                      double t_min,
                                      enum BlabVerdict *out);

/**
 * FMO diagnostic of `Q` (real part of `q`) at `z0` on the default radii.
 *
 * # Safety
 * `out` must be writable.
 */
enum BlabStatus blab_fmo_check(const struct BlabField *q,
                               double z0_re,
                               double z0_im,
                               enum BlabVerdict *out);

/**
 * Runs a compactness experiment. `config_json` may be null for the
 * defaults; `out_json` receives the report, freed with [`blab_string_free`].
 *
 * # Safety
 * `config_json` must be null or NUL-terminated; `out_json` must be writable.
 */
enum BlabStatus blab_compactness_run(const char *config_json, char **out_json);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void blab_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BLAB_H */

#ifndef NSPARSE_H
#define NSPARSE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum NsStatus {
  NS_STATUS_OK = 0,
  NS_STATUS_NULL_POINTER = 1,
  NS_STATUS_INVALID_ARGUMENT = 2,
  NS_STATUS_IO = 3,
  NS_STATUS_FORMAT = 4,
  NS_STATUS_SOLVER = 5,
  NS_STATUS_PANIC = 6,
} NsStatus;

typedef enum NsSparsenessMode {
  NS_SPARSENESS_MODE_VOLUMETRIC = 0,
  NS_SPARSENESS_MODE_ONE_D = 1,
} NsSparsenessMode;

// Velocity field on the periodic grid.
typedef struct NsField NsField;

// Time stepper together with its current state.
typedef struct NsSolver NsSolver;

typedef struct NsNorms {
  double sup_u;
  double l2_u;
  double sup_w;
  double grad_energy;
} NsNorms;

typedef struct NsTuningPair {
  double lambda;
  double delta;
  double h;
  bool constraint_ok;
  double residual;
} NsTuningPair;

typedef struct NsZAlpha {
  bool verdict;
  double rho_star;
  double fraction_passing;
  double union_fraction;
  uintptr_t resolved;
  uintptr_t unresolved;
} NsZAlpha;

typedef struct NsGapRow {
  uint32_t k;
  double regularity;
  double apriori;
  double energy;
  double gap_ratio;
} NsGapRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the
// next failing call on the same thread.
const char *ns_last_error(void);

// Initial condition `kind` (`abc`, `taylor_green`, `kida`,
// `random_bandlimited`) with default parameters on an `n³` grid.
//
// # Safety
// `kind` must be a nul-terminated string and `out` a valid pointer.
enum NsStatus ns_field_init(const char *kind, uintptr_t n, double box_length, struct NsField **out);

// Field from three component arrays of `n³` doubles each, index
// `(i₁·n + i₂)·n + i₃`.
//
// # Safety
// Each of `u1`, `u2`, `u3` must point to `n³` readable doubles.
enum NsStatus ns_field_from_data(uintptr_t n,
                                 double box_length,
                                 const double *u1,
                                 const double *u2,
                                 const double *u3,
                                 struct NsField **out);

// # Safety
// `field` must come from this library and not be used afterwards; null is ignored.
void ns_field_free(struct NsField *field);

// Grid size `n`, or 0 for a null handle.
//
// # Safety
// `field` must be null or a live handle.
uintptr_t ns_field_n(const struct NsField *field);

// Copies component `comp` (0, 1 or 2) into `out`, which holds `len ≥ n³` doubles.
//
// # Safety
// `out` must point to `len` writable doubles.
enum NsStatus ns_field_copy_component(const struct NsField *field,
                                      uintptr_t comp,
                                      double *out,
                                      uintptr_t len);

// # Safety
// `field` and `out` must be valid pointers.
enum NsStatus ns_field_norms(const struct NsField *field, struct NsNorms *out);

// Sup-norm of `∂^ζ f` for the multi-index `(z1, z2, z3)`.
//
// # Safety
// `field` and `out` must be valid pointers.
enum NsStatus ns_field_derivative_sup(const struct NsField *field,
                                      uint32_t z1,
                                      uint32_t z2,
                                      uint32_t z3,
                                      double *out);

// Writes a velocity snapshot at time `t`.
//
// # Safety
// `field` must be a live handle and `path` a nul-terminated UTF-8 string.
enum NsStatus ns_snapshot_save(const struct NsField *field, double t, const char *path);

// Reads a snapshot; `out_t` may be null.
//
// # Safety
// `path` must be a nul-terminated UTF-8 string and `out` a valid pointer.
enum NsStatus ns_snapshot_load(const char *path, struct NsField **out, double *out_t);

// Solver starting from a copy of `field` at `t = 0` with fixed step `dt`.
//
// # Safety
// `field` and `out` must be valid pointers.
enum NsStatus ns_solver_new(const struct NsField *field,
                            double dt,
                            double cfl_limit,
                            struct NsSolver **out);

// # Safety
// `solver` must come from this library and not be used afterwards; null is ignored.
void ns_solver_free(struct NsSolver *solver);

// Advances `steps` steps. On failure the state stays at the last good step.
//
// # Safety
// `solver` must be a live handle.
enum NsStatus ns_solver_step(struct NsSolver *solver, uint64_t steps);

// Current time, or NaN for a null handle.
//
// # Safety
// `solver` must be null or a live handle.
double ns_solver_time(const struct NsSolver *solver);

// New field handle holding a copy of the current velocity.
//
// # Safety
// `solver` and `out` must be valid pointers.
enum NsStatus ns_solver_field(const struct NsSolver *solver, struct NsField **out);

// Harmonic measure of the extremal slit `[-1, -1+λ]` seen from the origin.
//
// # Safety
// `out` must be a valid pointer.
enum NsStatus ns_extremal_h(double lambda, double *out);

// # Safety
// `out` must be a valid pointer.
enum NsStatus ns_tuning_pair(double delta, struct NsTuningPair *out);

// Membership of `∂_{x₁}^k u` in `Z_α(λ, δ; c₀)`, scanning every grid point.
//
// # Safety
// `field` and `out` must be valid pointers.
enum NsStatus ns_zalpha_check(const struct NsField *field,
                              uint32_t k,
                              double lambda,
                              double delta,
                              double c0,
                              double alpha,
                              enum NsSparsenessMode mode,
                              struct NsZAlpha *out);

// Chain value `R(j, c) = (‖D^j u‖_∞ / (c^j j!))^{1/(j+1)}`; NaN on internal failure.
double ns_chain_value(uint32_t j, double c, double norm);

// # Safety
// `out` must be a valid pointer.
enum NsStatus ns_gap_row(uint32_t k, struct NsGapRow *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NSPARSE_H */

#ifndef MULTICUT_H
#define MULTICUT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum McStatus {
  MC_STATUS_OK = 0,
  MC_STATUS_NULL_POINTER = 1,
  MC_STATUS_INVALID_ARGUMENT = 2,
  MC_STATUS_NUMERICAL_FAILURE = 3,
  MC_STATUS_BUFFER_TOO_SMALL = 4,
  MC_STATUS_PANIC = 5,
} McStatus;

typedef struct McEquilibrium McEquilibrium;

typedef struct McPotential McPotential;

typedef struct McRecurrence McRecurrence;

typedef struct McSkew McSkew;

/*
 `S, DS, IS, S^T` at one pair of points.
 */
typedef struct McMatrixKernel {
  double s;
  double ds;
  double is;
  double st;
} McMatrixKernel;

typedef double (*McTestFunction)(double x, void *user);

typedef struct McStats {
  double mean;
  double variance;
  double std_error;
  double variance_std_error;
} McStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread; empty after a success.
 Valid until the next call on the same thread.
 */
const char *mc_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *mc_version(void);

/*
 Polynomial potential from `len` ascending coefficients.

 # Safety
 `coeffs` must point to `len` readable doubles; `out` must be writable.
 */
enum McStatus mc_potential_new(const double *coeffs, size_t len, struct McPotential **out);

/*
 # Safety
 `p` must come from [`mc_potential_new`] or be null.
 */
void mc_potential_free(struct McPotential *p);

/*
 Equilibrium measure with `q` cuts.

 # Safety
 Pointers must be valid; `out` receives a handle owned by the caller.
 */
enum McStatus mc_equilibrium_solve(const struct McPotential *potential,
                                   size_t q,
                                   struct McEquilibrium **out);

/*
 # Safety
 `m` must come from [`mc_equilibrium_solve`] or be null.
 */
void mc_equilibrium_free(struct McEquilibrium *m);

/*
 Copies the `2q` endpoints; `BufferTooSmall` when `len < 2q`.

 # Safety
 `buf` must hold `len` doubles.
 */
enum McStatus mc_equilibrium_endpoints(const struct McEquilibrium *m, double *buf, size_t len);

/*
 # Safety
 Pointers must be valid.
 */
enum McStatus mc_equilibrium_cuts(const struct McEquilibrium *m, size_t *out);

/*
 Density at `x`, zero off the support.

 # Safety
 Pointers must be valid.
 */
enum McStatus mc_equilibrium_density(const struct McEquilibrium *m, double x, double *out);

/*
 Stieltjes transform `∫ρ(λ)/(λ - z) dλ` off the support.

 # Safety
 Pointers must be valid.
 */
enum McStatus mc_equilibrium_stieltjes(const struct McEquilibrium *m,
                                       double re,
                                       double im,
                                       double *out_re,
                                       double *out_im);

/*
 First-order correction to the Stieltjes transform for `β ∈ {1, 2, 4}`.

 # Safety
 Pointers must be valid.
 */
enum McStatus mc_loop_correction(const struct McEquilibrium *m,
                                 uint32_t beta,
                                 double re,
                                 double im,
                                 double *out_re,
                                 double *out_im);

/*
 Recurrence table for the weight `e^{-nV}` at the default depth.

 # Safety
 Pointers must be valid.
 */
enum McStatus mc_recurrence_build(const struct McPotential *potential,
                                  size_t n,
                                  struct McRecurrence **out);

/*
 # Safety
 `t` must come from [`mc_recurrence_build`] or be null.
 */
void mc_recurrence_free(struct McRecurrence *t);

/*
 `K_{n,2}(x, y)`.

 # Safety
 Pointers must be valid.
 */
enum McStatus mc_recurrence_cd_kernel(const struct McRecurrence *t,
                                      double x,
                                      double y,
                                      double *out);

/*
 `log Q_{n,2}` for the table's potential.

 # Safety
 Pointers must be valid.
 */
enum McStatus mc_recurrence_log_q2(const struct McRecurrence *t, double *out);

/*
 β = 1, 4 matrices for an even-`n` table.

 # Safety
 Pointers must be valid.
 */
enum McStatus mc_skew_build(const struct McRecurrence *t, struct McSkew **out);

/*
 # Safety
 `s` must come from [`mc_skew_build`] or be null.
 */
void mc_skew_free(struct McSkew *s);

/*
 `det T_n`.

 # Safety
 Pointers must be valid.
 */
enum McStatus mc_skew_det_t(const struct McSkew *s, double *out);

/*
 Matrix kernel entries for `β ∈ {1, 4}`.

 # Safety
 Pointers must be valid.
 */
enum McStatus mc_skew_matrix_kernel(const struct McSkew *s,
                                    uint32_t beta,
                                    double x,
                                    double y,
                                    struct McMatrixKernel *out);

/*
 Gaussian-reference `log Q_{n,β}`.

 # Safety
 `out` must be writable.
 */
enum McStatus mc_selberg_log_q(size_t n, uint32_t beta, double *out);

/*
 `sin(πt)/(πt)`.
 */
double mc_sine_kernel(double t);

/*
 Metropolis estimate of mean and variance of `Σ φ(λ_i)` with default
 chain settings; `φ` is called with `user` as its second argument.

 # Safety
 Pointers must be valid and `phi` callable from any thread.
 */
enum McStatus mc_sample_linear_statistic(const struct McPotential *potential,
                                         size_t n,
                                         uint32_t beta,
                                         size_t steps,
                                         size_t burn_in,
                                         uint64_t seed,
                                         McTestFunction phi,
                                         void *user,
                                         struct McStats *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MULTICUT_H */

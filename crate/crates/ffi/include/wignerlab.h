#ifndef WIGNERLAB_H
#define WIGNERLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes.
typedef enum WlStatus {
  WL_STATUS_OK = 0,
  WL_STATUS_NULL_POINTER = 1,
  WL_STATUS_INVALID_ARGUMENT = 2,
  WL_STATUS_INVALID_MEASURE = 3,
  WL_STATUS_DOMAIN = 4,
  WL_STATUS_NO_CONVERGENCE = 5,
  WL_STATUS_NON_HERGLOTZ = 6,
  WL_STATUS_EDGE_NOT_BRACKETED = 7,
  WL_STATUS_KERNEL_OUT_OF_RANGE = 8,
  WL_STATUS_REGULARITY_VIOLATION = 9,
  WL_STATUS_EIGENSOLVER_FAILURE = 10,
  WL_STATUS_IO = 11,
  WL_STATUS_PANIC = 12,
} WlStatus;

// Opaque spectral measure handle.
typedef struct WlMeasure WlMeasure;

typedef struct WlComplex {
  double re;
  double im;
} WlComplex;

// Solution of the self-consistent equation at one point.
typedef struct WlStieltjes {
  struct WlComplex m;
  // First derivative in z.
  struct WlComplex m1;
  // Second derivative in z.
  struct WlComplex m2;
  double residual;
  uintptr_t iterations;
} WlStieltjes;

typedef struct WlSupport {
  double l_minus;
  double l_plus;
} WlSupport;

typedef struct WlCltParams {
  double m_phi;
  double v_phi;
  // NaN when not available.
  double vtilde_phi;
  double quad_error;
} WlCltParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer is
// valid until the next call into the library from the same thread.
const char *wl_last_error_message(void);

// Measure from a descriptor such as `two_point:0.5`, `uniform:1` or
// `discrete:FILE`.
//
// # Safety
// `descriptor` must be a NUL-terminated string, `out` a valid pointer.
enum WlStatus wl_measure_from_descriptor(const char *descriptor, struct WlMeasure **out);

// Symmetric two-point law on `{-a, a}`.
//
// # Safety
// `out` must be a valid pointer.
enum WlStatus wl_measure_two_point(double a, struct WlMeasure **out);

// Uniform law on `[-a, a]`.
//
// # Safety
// `out` must be a valid pointer.
enum WlStatus wl_measure_uniform(double a, struct WlMeasure **out);

// Finitely supported law with `len` atoms.
//
// # Safety
// `points` and `weights` must each point to `len` doubles, `out` must be
// a valid pointer.
enum WlStatus wl_measure_discrete(const double *points,
                                  const double *weights,
                                  uintptr_t len,
                                  struct WlMeasure **out);

// Releases a handle. NULL is a no-op.
//
// # Safety
// `m` must come from a `wl_measure_*` constructor and not be freed twice.
void wl_measure_free(struct WlMeasure *m);

// `k`-th moment, `k <= 8`.
//
// # Safety
// `m` must be a live handle, `out` a valid pointer.
enum WlStatus wl_measure_moment(const struct WlMeasure *m, uint32_t k, double *out);

// Solves for the Stieltjes transform of the free convolution at `z`.
//
// # Safety
// `m` must be a live handle, `out` a valid pointer.
enum WlStatus wl_solve(const struct WlMeasure *m,
                       double theta,
                       struct WlComplex z,
                       struct WlStieltjes *out);

// Density at `e`; `eta_floor` in `[1e-9, 1e-3]`.
//
// # Safety
// `m` must be a live handle, `out` a valid pointer.
enum WlStatus wl_density(const struct WlMeasure *m,
                         double theta,
                         double e,
                         double eta_floor,
                         double *out);

// Support edges.
//
// # Safety
// `m` must be a live handle, `out` a valid pointer.
enum WlStatus wl_support_edges(const struct WlMeasure *m, double theta, struct WlSupport *out);

// CLT mean and variance for a polynomial test function given by a
// descriptor such as `poly:0,0,1`. `nodes_per_side == 0` selects the
// default contour.
//
// # Safety
// `m` must be a live handle, `phi` a NUL-terminated string, `out` a
// valid pointer.
enum WlStatus wl_clt_params(const struct WlMeasure *m,
                            double theta,
                            double w2,
                            double w4,
                            const char *phi,
                            double margin,
                            double v0,
                            uintptr_t nodes_per_side,
                            struct WlCltParams *out);

// Chebyshev coefficient `τ_ℓ(φ)`.
//
// # Safety
// `phi` must be a NUL-terminated string, `out` a valid pointer.
enum WlStatus wl_tau_ell(const char *phi, uintptr_t ell, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WIGNERLAB_H */

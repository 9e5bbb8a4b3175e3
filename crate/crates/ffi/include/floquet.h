#ifndef FLOQUET_H
#define FLOQUET_H

#include <stddef.h>
#include <stdint.h>
#include <stdbool.h>

typedef enum FloquetEigenKind {
  FLOQUET_EIGEN_KIND_PERIODIC = 0,
  FLOQUET_EIGEN_KIND_ANTIPERIODIC = 1,
} FloquetEigenKind;

typedef enum FloquetStatus {
  FLOQUET_STATUS_OK = 0,
  FLOQUET_STATUS_NULL_POINTER = 1,
  FLOQUET_STATUS_INVALID_ARGUMENT = 2,
  FLOQUET_STATUS_INVALID_POTENTIAL = 3,
  FLOQUET_STATUS_PARSE = 4,
  FLOQUET_STATUS_NO_CONVERGENCE = 5,
  FLOQUET_STATUS_NUMERICAL = 6,
  FLOQUET_STATUS_BUFFER_TOO_SMALL = 7,
  FLOQUET_STATUS_PANIC = 8,
} FloquetStatus;

typedef struct FloquetBands FloquetBands;

typedef struct FloquetEigenvalues FloquetEigenvalues;

typedef struct FloquetPotential FloquetPotential;

// One periodic or antiperiodic eigenvalue; `n` is the cluster label (z ≈ πn).
typedef struct FloquetEigenvalue {
  uint32_t n;
  uint32_t m;
  double lambda;
  uint32_t multiplicity;
  double residual;
} FloquetEigenvalue;

// A band [lo, hi] with its multiplicity, or a gap with multiplicity 0.
typedef struct FloquetBand {
  double lo;
  double hi;
  uint32_t multiplicity;
  // False when hi is the end of the scanned range rather than an edge.
  bool closed;
} FloquetBand;

typedef struct FloquetTraceSummary {
  double q0;
  double q2;
  double q0_target;
  double q2_target;
  double tail_relative_q0;
  double tail_relative_q2;
  bool insufficient_truncation;
} FloquetTraceSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Length in bytes of the last error message on this thread, excluding the
// terminating NUL. Zero after a successful call.
uintptr_t floquet_last_error_length(void);

// Copies the last error message as a NUL-terminated string into `buf`.
//
// # Safety
// `buf` must point to `len` writable bytes.
enum FloquetStatus floquet_last_error_message(char *buf, uintptr_t len);

// Builds V(t) = V⁰ + 2Σₙ (Cₙ cos 2πnt + Sₙ sin 2πnt).
//
// `mean` holds dim² values row-major; `cos` and `sin` each hold
// `harmonics`·dim² values, harmonic n = 1 first, and may be null when
// `harmonics` is 0.
//
// # Safety
// Pointers must reference arrays of the stated sizes; `out` must be writable.
enum FloquetStatus floquet_potential_new(uintptr_t dim,
                                         const double *mean,
                                         uintptr_t harmonics,
                                         const double *cos,
                                         const double *sin,
                                         struct FloquetPotential **out);

// Parses a potential from its JSON description.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum FloquetStatus floquet_potential_from_json(const char *json, struct FloquetPotential **out);

// # Safety
// `p` must come from a constructor above and not be freed twice. Null is ignored.
void floquet_potential_free(struct FloquetPotential *p);

// Matrix size N, or 0 for a null handle.
//
// # Safety
// `p` must be null or a live handle.
uintptr_t floquet_potential_dim(const struct FloquetPotential *p);

// Writes the N Lyapunov values Δ_m(z) into `re` and `im`, each of length `len` ≥ N.
//
// # Safety
// `p` must be a live handle and `re`/`im` must hold `len` doubles.
enum FloquetStatus floquet_lyapunov_values(const struct FloquetPotential *p,
                                           double z_re,
                                           double z_im,
                                           double *re,
                                           double *im,
                                           uintptr_t len);

// D(τ, z) = det(M(z) − τI).
//
// # Safety
// `p` must be a live handle and `out_re`/`out_im` writable.
enum FloquetStatus floquet_characteristic_value(const struct FloquetPotential *p,
                                                double z_re,
                                                double z_im,
                                                double tau_re,
                                                double tau_im,
                                                double *out_re,
                                                double *out_im);

// Periodic or antiperiodic eigenvalues of the clusters k = 0..=n_max.
//
// # Safety
// `p` must be a live handle and `out` writable.
enum FloquetStatus floquet_eigenvalues(const struct FloquetPotential *p,
                                       enum FloquetEigenKind kind,
                                       uintptr_t n_max,
                                       struct FloquetEigenvalues **out);

// # Safety
// `h` must be null or a live handle.
uintptr_t floquet_eigenvalues_len(const struct FloquetEigenvalues *h);

// # Safety
// `h` must be a live handle and `out` writable.
enum FloquetStatus floquet_eigenvalues_get(const struct FloquetEigenvalues *h,
                                           uintptr_t index,
                                           struct FloquetEigenvalue *out);

// # Safety
// `h` must come from [`floquet_eigenvalues`] and not be freed twice. Null is ignored.
void floquet_eigenvalues_free(struct FloquetEigenvalues *h);

// Band structure on [λ₀⁺, lambda_max].
//
// # Safety
// `p` must be a live handle and `out` writable.
enum FloquetStatus floquet_scan_bands(const struct FloquetPotential *p,
                                      double lambda_max,
                                      struct FloquetBands **out);

// # Safety
// `h` must be null or a live handle.
uintptr_t floquet_bands_len(const struct FloquetBands *h);

// # Safety
// `h` must be null or a live handle.
uintptr_t floquet_gaps_len(const struct FloquetBands *h);

// # Safety
// `h` must be a live handle and `out` writable.
enum FloquetStatus floquet_bands_get(const struct FloquetBands *h,
                                     uintptr_t index,
                                     struct FloquetBand *out);

// # Safety
// `h` must be a live handle and `out` writable.
enum FloquetStatus floquet_gaps_get(const struct FloquetBands *h,
                                    uintptr_t index,
                                    struct FloquetBand *out);

// # Safety
// `h` must come from [`floquet_scan_bands`] and not be freed twice. Null is ignored.
void floquet_bands_free(struct FloquetBands *h);

// u(x) and v(x) of the quasimomentum on a sorted real grid.
//
// # Safety
// `p` must be a live handle; `xs`, `u` and `v` must hold `len` doubles.
enum FloquetStatus floquet_exponent_and_density(const struct FloquetPotential *p,
                                                const double *xs,
                                                uintptr_t len,
                                                double *u,
                                                double *v);

// Trace integrals Q₀ and Q₂ over `clusters` clusters with their targets.
//
// # Safety
// `p` must be a live handle and `out` writable.
enum FloquetStatus floquet_trace_integrals(const struct FloquetPotential *p,
                                           uintptr_t clusters,
                                           struct FloquetTraceSummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FLOQUET_H */

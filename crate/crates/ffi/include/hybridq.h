#ifndef HYBRIDQ_H
#define HYBRIDQ_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QhStatus {
  QH_STATUS_OK = 0,
  QH_STATUS_NULL_POINTER = 1,
  QH_STATUS_INVALID_ARGUMENT = 2,
  QH_STATUS_DIMENSION_MISMATCH = 3,
  QH_STATUS_IO = 4,
  QH_STATUS_INTEGRITY = 5,
  QH_STATUS_NUMERICAL = 6,
  QH_STATUS_CONFIG = 7,
  QH_STATUS_PANIC = 8,
  QH_STATUS_OTHER = 9,
} QhStatus;

// A finished run loaded from disk with every artifact hash verified.
typedef struct QhBundle QhBundle;

// A ZZ feature map with full entanglement and the default pair phase.
typedef struct QhKernel QhKernel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Owned by the library and valid
// until the next failing call on the same thread.
const char *qh_last_error_message(void);

// Static NUL-terminated version string.
const char *qh_version(void);

// Shots needed so an estimated probability is within `epsilon` with confidence `1 - delta`.
//
// # Safety
// `out` must be null or point to writable memory for one `uint64_t`.
enum QhStatus qh_required_shots(double epsilon, double delta, uint64_t *out);

// # Safety
// `out` must be null or point to writable memory for one handle pointer.
enum QhStatus qh_kernel_new(size_t num_qubits, size_t reps, struct QhKernel **out);

// Number of qubits, or 0 for a null handle.
//
// # Safety
// `kernel` must be null or a live handle from [`qh_kernel_new`].
size_t qh_kernel_num_qubits(const struct QhKernel *kernel);

// Exact kernel value between two angle vectors of length `len` (the qubit count).
//
// # Safety
// `kernel` must be a live handle; `a` and `b` must point to `len` doubles; `out` to one double.
enum QhStatus qh_kernel_eval(const struct QhKernel *kernel,
                             const double *a,
                             const double *b,
                             size_t len,
                             double *out);

// Shot-estimated kernel value under depolarizing noise, without readout error.
//
// # Safety
// Same as [`qh_kernel_eval`].
enum QhStatus qh_kernel_eval_shots(const struct QhKernel *kernel,
                                   const double *a,
                                   const double *b,
                                   size_t len,
                                   uint64_t shots,
                                   double depol_1q,
                                   double depol_2q,
                                   uint64_t seed,
                                   double *out);

// Exact Gram matrix of `n` angle vectors stored row-major (`n × len`), written row-major
// into `out` (`n × n`).
//
// # Safety
// `angle_rows` must point to `n * len` doubles and `out` to `n * n` writable doubles.
enum QhStatus qh_kernel_gram(const struct QhKernel *kernel,
                             const double *angle_rows,
                             size_t n,
                             size_t len,
                             double *out);

// # Safety
// `kernel` must be null or a handle from [`qh_kernel_new`] not yet freed.
void qh_kernel_free(struct QhKernel *kernel);

// Opens a finished run directory whose stage files live under `store_root`.
//
// # Safety
// `run_dir` and `store_root` must be NUL-terminated strings; `out` must point to one
// writable handle pointer.
enum QhStatus qh_bundle_open(const char *run_dir, const char *store_root, struct QhBundle **out);

// Width of the preprocessed feature rows accepted by [`qh_bundle_score`].
//
// # Safety
// `bundle` must be a live handle; `out` must point to one writable `size_t`.
enum QhStatus qh_bundle_num_features(const struct QhBundle *bundle, size_t *out);

// The stored decision threshold; a row is labelled 1 when its score is at least this.
//
// # Safety
// `bundle` must be a live handle; `out` must point to one writable double.
enum QhStatus qh_bundle_threshold(const struct QhBundle *bundle, double *out);

// Exact-mode scores for `rows` preprocessed feature rows (`rows × cols`, row-major).
// `labels` may be null; otherwise it receives 0/1 per row from the stored threshold.
//
// # Safety
// `x` must point to `rows * cols` floats, `scores` to `rows` doubles and `labels`, when
// non-null, to `rows` bytes.
enum QhStatus qh_bundle_score(const struct QhBundle *bundle,
                              const float *x,
                              size_t rows,
                              size_t cols,
                              double *scores,
                              uint8_t *labels);

// # Safety
// `bundle` must be null or a handle from [`qh_bundle_open`] not yet freed.
void qh_bundle_free(struct QhBundle *bundle);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HYBRIDQ_H */

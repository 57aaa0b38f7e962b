#ifndef SKETCHLAB_H
#define SKETCHLAB_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Status codes returned by every fallible function.
 */
typedef enum skl_status {
  SKL_OK = 0,
  SKL_ERR_NULL_POINTER = 1,
  SKL_ERR_INVALID_ARGUMENT = 2,
  SKL_ERR_NUMERIC = 3,
} skl_status;

/*
 Opaque dense matrix handle.
 */
typedef struct skl_matrix skl_matrix;

/*
 Opaque sparse sketching-matrix handle.
 */
typedef struct skl_sketch skl_sketch;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the most recent error on this thread. The pointer stays valid
 until the next failing call on the same thread.
 */
const char *skl_last_error(void);

/*
 Creates a matrix from a row-major buffer of `rows * cols` doubles.
 Returns null on invalid input (see skl_last_error).

 # Safety
 `data` must point to at least `rows * cols` readable doubles.
 */
struct skl_matrix *skl_matrix_new(uintptr_t rows, uintptr_t cols, const double *data);

/*
 # Safety
 `m` must be a pointer from this library, not yet freed; null is a no-op.
 */
void skl_matrix_free(struct skl_matrix *m);

/*
 # Safety
 `m` must be a live matrix handle.
 */
uintptr_t skl_matrix_rows(const struct skl_matrix *m);

/*
 # Safety
 `m` must be a live matrix handle.
 */
uintptr_t skl_matrix_cols(const struct skl_matrix *m);

/*
 Copies the matrix into `out` (row-major); `len` is the capacity of `out`
 in doubles and must be at least rows * cols.

 # Safety
 `m` must be a live handle and `out` writable for `len` doubles.
 */
enum skl_status skl_matrix_copy_data(const struct skl_matrix *m, double *out, uintptr_t len);

/*
 Random sparse sketch with `s` nonzeros per column, seeded.
 */
struct skl_sketch *skl_sketch_random(uintptr_t m, uintptr_t n, uintptr_t s, uint64_t seed);

/*
 # Safety
 `s` must be a pointer from this library, not yet freed; null is a no-op.
 */
void skl_sketch_free(struct skl_sketch *s);

/*
 Densifies a sketch into a matrix handle.

 # Safety
 `s` must be a live sketch handle.
 */
struct skl_matrix *skl_sketch_densify(const struct skl_sketch *s);

/*
 Rank-k approximation through the sketch; writes a new matrix handle to
 `out`.

 # Safety
 `s` and `a` must be live handles; `out` must be a writable pointer slot.
 */
enum skl_status skl_scw(const struct skl_sketch *s,
                        const struct skl_matrix *a,
                        uintptr_t k,
                        struct skl_matrix **out);

/*
 ‖A − scw(S, A, k)‖_F² for a unit-Frobenius-norm A.

 # Safety
 `s` and `a` must be live handles; `out` must point to a writable double.
 */
enum skl_status skl_scw_loss(const struct skl_sketch *s,
                             const struct skl_matrix *a,
                             uintptr_t k,
                             double *out);

/*
 Moore–Penrose pseudo-inverse via the characteristic-polynomial recursion.
 Pass `coeff_tol <= 0` for the default tolerance.

 # Safety
 `z` must be a live handle; `out` must be a writable pointer slot.
 */
enum skl_status skl_pinv_decell(const struct skl_matrix *z,
                                double coeff_tol,
                                struct skl_matrix **out);

/*
 Nyström approximation error ‖A − AS(SᵀAS)†(AS)ᵀ‖_F² for symmetric PSD A;
 `s` is a dense sketching matrix with as many rows as A.

 # Safety
 `s` and `a` must be live matrix handles; `out` must point to a writable
 double.
 */
enum skl_status skl_nystrom_loss(const struct skl_matrix *s,
                                 const struct skl_matrix *a,
                                 double *out);

/*
 Training surrogate loss ‖U_kᵀSᵀSU − I₀‖_F² for a dense sketch `s`.

 # Safety
 `s` and `a` must be live matrix handles; `out` must point to a writable
 double.
 */
enum skl_status skl_surrogate_loss(const struct skl_matrix *s,
                                   const struct skl_matrix *a,
                                   uintptr_t k,
                                   double *out);

/*
 Gradient of the surrogate loss with respect to the dense sketch.

 # Safety
 `s` and `a` must be live matrix handles; `out` must be a writable pointer
 slot.
 */
enum skl_status skl_surrogate_grad(const struct skl_matrix *s,
                                   const struct skl_matrix *a,
                                   uintptr_t k,
                                   struct skl_matrix **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SKETCHLAB_H */

#ifndef CNGAUGE_H
#define CNGAUGE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Status codes; zero is success.
 */
typedef enum CngStatus {
  CNG_STATUS_OK = 0,
  CNG_STATUS_NULL_POINTER = 1,
  CNG_STATUS_INVALID_UTF8 = 2,
  CNG_STATUS_CONFIG = 3,
  CNG_STATUS_PRECONDITION = 4,
  CNG_STATUS_UNSUPPORTED = 5,
  CNG_STATUS_DOMAIN = 6,
  CNG_STATUS_NOT_POSITIVE_DEFINITE = 7,
  CNG_STATUS_FOREIGN_FIELD = 8,
  CNG_STATUS_NON_CONVERGENCE = 9,
  CNG_STATUS_IO = 10,
  CNG_STATUS_INTERNAL = 11,
  CNG_STATUS_BUFFER_TOO_SMALL = 12,
  CNG_STATUS_PANIC = 13,
} CngStatus;

/*
 Field valence codes.
 */
typedef enum CngValence {
  CNG_VALENCE_SCALAR = 0,
  CNG_VALENCE_ONE_FORM = 1,
  CNG_VALENCE_SYM2 = 2,
} CngValence;

/*
 A tensor field bound to the model that created it.
 */
typedef struct CngField CngField;

/*
 A discretized model manifold.
 */
typedef struct CngModel CngModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copies the last error message of this thread into `buf` (NUL-terminated,
 truncated to `len`). Returns the full message length excluding the NUL,
 or 0 when there is none.

 # Safety
 `buf` must be null or point to `len` writable bytes.
 */
uintptr_t cng_last_error_message(char *buf, uintptr_t len);

/*
 Library version as a static NUL-terminated string.
 */
const char *cng_version(void);

/*
 Builds a model with its default parameters, e.g. `"sphere_stereo"`.

 # Safety
 `model` must be a NUL-terminated string; `out` must be writable.
 */
enum CngStatus cng_model_new(const char *model,
                             uintptr_t dim,
                             uintptr_t resolution,
                             struct CngModel **out);

/*
 Builds a model from the `key = value` configuration text.

 # Safety
 `config` must be a NUL-terminated string; `out` must be writable.
 */
enum CngStatus cng_model_from_config(const char *config, struct CngModel **out);

/*
 # Safety
 `model` must be null or a handle from `cng_model_new`, freed once.
 */
void cng_model_free(struct CngModel *model);

/*
 Dimension and sample count (ghost samples included) of a model.

 # Safety
 `model` must be a live handle; the out-pointers must be writable.
 */
enum CngStatus cng_model_shape(const struct CngModel *model, uintptr_t *dim, uintptr_t *npts);

/*
 Measured Einstein constant `λ̂` (mean of `s/n`).

 # Safety
 `model` must be a live handle; `out` must be writable.
 */
enum CngStatus cng_model_lambda_hat(const struct CngModel *model, double *out);

/*
 Creates a field from `len = npts * ncomp` values, sample-major.

 # Safety
 `values` must point to `len` readable doubles; `out` must be writable.
 */
enum CngStatus cng_field_from_values(const struct CngModel *model,
                                     enum CngValence valence,
                                     const double *values,
                                     uintptr_t len,
                                     struct CngField **out);

/*
 Seeded band-limited random field.

 # Safety
 `model` must be a live handle; `out` must be writable.
 */
enum CngStatus cng_field_random(const struct CngModel *model,
                                enum CngValence valence,
                                uint64_t seed,
                                struct CngField **out);

/*
 # Safety
 `field` must be null or a live field handle, freed once.
 */
void cng_field_free(struct CngField *field);

/*
 Number of doubles held by a field.

 # Safety
 `field` must be a live handle; `out` must be writable.
 */
enum CngStatus cng_field_len(const struct CngField *field, uintptr_t *out);

/*
 Copies the field values into `buf`, which must hold `cng_field_len` doubles.

 # Safety
 `buf` must point to `len` writable doubles.
 */
enum CngStatus cng_field_copy(const struct CngField *field, double *buf, uintptr_t len);

/*
 Applies an operator named like `"lichnerowicz:general"` or `"divergence"`.

 # Safety
 Handles must be live and `field` must come from `model`; `out` must be writable.
 */
enum CngStatus cng_apply(const struct CngModel *model,
                         const char *op,
                         const struct CngField *field,
                         struct CngField **out);

/*
 Pointwise supremum of the metric norm over measurement samples.

 # Safety
 Handles must be live; `out` must be writable.
 */
enum CngStatus cng_sup_norm(const struct CngModel *model,
                            const struct CngField *field,
                            double *out);

/*
 The `count` eigenvalues of an assembled torus operator nearest `target`,
 written to `buf` in ascending distance from the target.

 # Safety
 `buf` must point to `count` writable doubles.
 */
enum CngStatus cng_eigenvalues(const struct CngModel *model,
                               const char *op,
                               uintptr_t count,
                               double target,
                               double *buf);

/*
 Runs the identity suite at `{res, res+8, res+16}` and returns the JSON
 report (without wall-clock data). `passed` receives 1 when every asserted
 case passed.

 # Safety
 `model` must be a NUL-terminated string; out-pointers must be writable.
 */
enum CngStatus cng_run_identities(const char *model,
                                  uintptr_t dim,
                                  uintptr_t resolution,
                                  uint64_t seed,
                                  char **json,
                                  int32_t *passed);

/*
 # Safety
 `s` must be null or a string returned by this library, freed once.
 */
void cng_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CNGAUGE_H */

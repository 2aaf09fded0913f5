#ifndef HADAMARD_H
#define HADAMARD_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HdStatus {
  HD_STATUS_OK = 0,
  HD_STATUS_NULL_POINTER = 1,
  HD_STATUS_INVALID_ARGUMENT = 2,
  HD_STATUS_SCHEMA = 3,
  HD_STATUS_NUMERICAL = 4,
  HD_STATUS_VALIDATION = 5,
  HD_STATUS_PANIC = 6,
} HdStatus;

/*
 A continuation example run.
 */
typedef struct HdDift HdDift;

/*
 Roots of `det(A - s B)`.
 */
typedef struct HdPencil HdPencil;

/*
 Reports of one scenario config run.
 */
typedef struct HdRun HdRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread ("" after a success).
 The pointer stays valid until the next call on this thread.
 */
const char *hd_last_error(void);

/*
 Bessel function `J_k(x)` for `0 <= x <= 100`.

 # Safety
 `out` must be a valid pointer to a double.
 */
enum HdStatus hd_bessel_j(uint32_t k, double x, double *out);

/*
 The `m`-th positive zero of `J_k`.

 # Safety
 `out` must be a valid pointer to a double.
 */
enum HdStatus hd_bessel_zero(uint32_t k, uint32_t m, double *out);

/*
 Solves the pencil for row-major `n x n` matrices `a` (symmetric) and `b`
 (symmetric positive definite).

 # Safety
 `a` and `b` must point to `n * n` doubles; `out` to a handle slot.
 */
enum HdStatus hd_pencil_new(const double *a, const double *b, size_t n, struct HdPencil **out);

/*
 Number of roots (the pencil dimension).

 # Safety
 `p` must be a live handle from `hd_pencil_new`.
 */
size_t hd_pencil_dim(const struct HdPencil *p);

/*
 Copies the ascending roots into `roots` (capacity `cap`) and, if
 `simple` is non-null, their simplicity flags.

 # Safety
 `p` must be a live handle; `roots` must hold `cap` doubles and `simple`
 (if non-null) `cap` bools.
 */
enum HdStatus hd_pencil_roots(const struct HdPencil *p, double *roots, bool *simple, size_t cap);

/*
 # Safety
 `p` must be null or a handle from `hd_pencil_new` not yet freed.
 */
void hd_pencil_free(struct HdPencil *p);

/*
 Runs every scenario of a JSON config in memory. `validate` non-zero
 adds finite-element validation; `quick` non-zero halves resolutions.
 Scenario-level failures do not fail the call: they are recorded in the
 reports and in [`hd_run_exit_code`].

 # Safety
 `config_json` must be a NUL-terminated string; `out` a handle slot.
 */
enum HdStatus hd_run_scenarios(const char *config_json,
                               int32_t validate,
                               int32_t quick,
                               uint64_t seed,
                               struct HdRun **out);

/*
 # Safety
 `r` must be a live handle from `hd_run_scenarios`.
 */
size_t hd_run_count(const struct HdRun *r);

/*
 CLI-equivalent exit code: 0 pass, 1 validation failure, 3 numerical.

 # Safety
 `r` must be a live handle from `hd_run_scenarios`.
 */
int32_t hd_run_exit_code(const struct HdRun *r);

/*
 JSON report of scenario `i`, owned by the handle (null if out of range).

 # Safety
 `r` must be a live handle from `hd_run_scenarios`.
 */
const char *hd_run_report(const struct HdRun *r, size_t i);

/*
 # Safety
 `r` must be null or a handle from `hd_run_scenarios` not yet freed.
 */
void hd_run_free(struct HdRun *r);

/*
 Checks and continues the named catalog example. A failed hypothesis is
 reported through [`hd_dift_passed`], not as a call failure.

 # Safety
 `name` must be a NUL-terminated string; `out` a handle slot.
 */
enum HdStatus hd_dift_run(const char *name, struct HdDift **out);

/*
 # Safety
 `d` must be a live handle from `hd_dift_run`.
 */
bool hd_dift_passed(const struct HdDift *d);

/*
 JSON report, owned by the handle.

 # Safety
 `d` must be a live handle from `hd_dift_run`.
 */
const char *hd_dift_report(const struct HdDift *d);

/*
 # Safety
 `d` must be null or a handle from `hd_dift_run` not yet freed.
 */
void hd_dift_free(struct HdDift *d);

/*
 Writes the newline-separated catalog into `buf` (capacity `cap`, NUL
 included) and its full size into `needed`. A null `buf` only queries.

 # Safety
 `buf` (if non-null) must hold `cap` bytes; `needed` must be valid.
 */
enum HdStatus hd_catalog(char *buf, size_t cap, size_t *needed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HADAMARD_H */

#ifndef KANTOROVICH_H
#define KANTOROVICH_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result codes.
 */
typedef enum {
  KT_ERROR_OK = 0,
  KT_ERROR_NULL_POINTER = 1,
  KT_ERROR_INVALID_INPUT = 2,
  KT_ERROR_HYPOTHESIS_VIOLATED = 3,
  KT_ERROR_DOMAIN = 4,
  KT_ERROR_UNKNOWN_PROBLEM = 5,
  KT_ERROR_SINGULAR_BASE_POINT = 6,
  KT_ERROR_SINGULAR_JACOBIAN = 7,
  KT_ERROR_INSUFFICIENT_TRACE = 8,
  KT_ERROR_BUFFER_TOO_SMALL = 9,
  KT_ERROR_PANIC = 99,
} KtError;

typedef enum {
  KT_NORM_EUCLIDEAN = 0,
  KT_NORM_MAX = 1,
} KtNorm;

typedef enum {
  KT_CERTIFICATE_STATUS_CERTIFIED_STRICT = 0,
  KT_CERTIFICATE_STATUS_CERTIFIED_BOUNDARY = 1,
  KT_CERTIFICATE_STATUS_REJECTED = 2,
} KtCertificateStatus;

typedef enum {
  KT_STOP_REASON_MAJORANT_GAP_TOL = 0,
  KT_STOP_REASON_STEP_TOL = 1,
  KT_STOP_REASON_KMAX_REACHED = 2,
  KT_STOP_REASON_SINGULAR_JACOBIAN = 3,
  KT_STOP_REASON_LEFT_CERTIFIED_BALL = 4,
} KtStopReason;

typedef struct KtCertificate KtCertificate;

/**
 * A nonlinear system with its base point and domain radius.
 */
typedef struct KtProblem KtProblem;

typedef struct KtReport KtReport;

/**
 * A problem preconditioned by its Jacobian at the base point.
 */
typedef struct KtSystem KtSystem;

typedef struct KtTrace KtTrace;

/**
 * Roots and shape of the quadratic majorant.
 */
typedef struct {
  double t_star;
  double t_star2;
  double theta;
  bool strict;
} KtMajorantAnalysis;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer stays
 * valid until the next call into this library on the same thread.
 */
const char *kt_last_error_message(void);

/**
 * Release a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from a `*_to_json` function and not have been freed.
 */
void kt_string_free(char *s);

/**
 * Roots `t_star <= t_star2` and `theta = t_star / t_star2` of the majorant
 * `f(t) = (L/2) t^2 - t + b`.
 *
 * # Safety
 * `out_analysis` must be a valid pointer.
 */
KtError kt_majorant_analyze(double b, double lipschitz, KtMajorantAnalysis *out_analysis);

/**
 * Closed-form majorant iterate `t_k`.
 *
 * # Safety
 * `out_t` must be a valid pointer.
 */
KtError kt_majorant_closed_form(double b, double lipschitz, uint32_t k, double *out_t);

/**
 * Majorant iterates `t_0..t_{len-1}` by the Newton recursion, written to `out_t`.
 *
 * # Safety
 * `out_t` must point to `len` writable doubles.
 */
KtError kt_majorant_sequence(double b, double lipschitz, double *out_t, size_t len);

/**
 * Builtin problem by name, with default parameters.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out_problem` a valid pointer.
 */
KtError kt_problem_builtin(const char *name, KtProblem **out_problem);

/**
 * Problem from a JSON description: `name`, optional `params`, `x0`, `R`, `norm`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out_problem` a valid pointer.
 */
KtError kt_problem_from_json(const char *json, KtProblem **out_problem);

/**
 * Dimension of the problem.
 *
 * # Safety
 * `problem` must be a live handle or null.
 */
size_t kt_problem_dim(const KtProblem *problem);

/**
 * # Safety
 * `problem` must be a live handle or null; it is invalid afterwards.
 */
void kt_problem_free(KtProblem *problem);

/**
 * Certificate from scalar inputs `b`, `L`, `R`. A violated hypothesis yields
 * a REJECTED certificate, not an error.
 *
 * # Safety
 * `out_cert` must be a valid pointer.
 */
KtError kt_certify(double b,
                   double lipschitz,
                   double radius,
                   KtNorm norm,
                   size_t k_max,
                   KtCertificate **out_cert);

/**
 * Precondition `problem` and certify it. Pass a NaN `lipschitz` to use the
 * problem's own constant; a finite value is checked against a sampled
 * estimate. The problem handle is not consumed.
 *
 * # Safety
 * `problem` must be a live handle; `out_system` and `out_cert` valid pointers.
 */
KtError kt_certify_problem(const KtProblem *problem,
                           double lipschitz,
                           size_t k_max,
                           KtSystem **out_system,
                           KtCertificate **out_cert);

/**
 * # Safety
 * `system` must be a live handle or null; it is invalid afterwards.
 */
void kt_system_free(KtSystem *system);

/**
 * # Safety
 * `cert` must be a live handle; `out_status` a valid pointer.
 */
KtError kt_certificate_status(const KtCertificate *cert, KtCertificateStatus *out_status);

/**
 * Existence radius `t*`; NaN for a rejected certificate.
 *
 * # Safety
 * `cert` must be a live handle; `out_t_star` a valid pointer.
 */
KtError kt_certificate_t_star(const KtCertificate *cert, double *out_t_star);

/**
 * # Safety
 * `cert` must be a live handle; `out_json` a valid pointer.
 */
KtError kt_certificate_to_json(const KtCertificate *cert, char **out_json);

/**
 * # Safety
 * `cert` must be a live handle or null; it is invalid afterwards.
 */
void kt_certificate_free(KtCertificate *cert);

/**
 * Newton's method from the base point. Nonpositive tolerances and a zero
 * `k_max` select the defaults.
 *
 * # Safety
 * `system` and `cert` must be live handles; `out_trace` a valid pointer.
 */
KtError kt_solve(const KtSystem *system,
                 const KtCertificate *cert,
                 double majorant_tol,
                 double step_tol,
                 size_t k_max,
                 KtTrace **out_trace);

/**
 * Number of iterates, `x_0` included.
 *
 * # Safety
 * `trace` must be a live handle or null.
 */
size_t kt_trace_len(const KtTrace *trace);

/**
 * Copy iterate `k` into `out_x`, which holds `len` doubles.
 *
 * # Safety
 * `trace` must be a live handle; `out_x` must point to `len` writable doubles.
 */
KtError kt_trace_iterate(const KtTrace *trace, size_t k, double *out_x, size_t len);

/**
 * # Safety
 * `trace` must be a live handle; `out_reason` a valid pointer.
 */
KtError kt_trace_stop_reason(const KtTrace *trace, KtStopReason *out_reason);

/**
 * # Safety
 * `trace` must be a live handle; `out_json` a valid pointer.
 */
KtError kt_trace_to_json(const KtTrace *trace, char **out_json);

/**
 * # Safety
 * `trace` must be a live handle or null; it is invalid afterwards.
 */
void kt_trace_free(KtTrace *trace);

/**
 * Audit every a priori bound along `trace`.
 *
 * # Safety
 * `system`, `cert` and `trace` must be live handles; `out_report` a valid pointer.
 */
KtError kt_verify(const KtSystem *system,
                  const KtCertificate *cert,
                  const KtTrace *trace,
                  size_t samples,
                  uint64_t seed,
                  KtReport **out_report);

/**
 * # Safety
 * `report` must be a live handle; `out_all_pass` a valid pointer.
 */
KtError kt_report_all_pass(const KtReport *report, bool *out_all_pass);

/**
 * Total and failed check counts.
 *
 * # Safety
 * `report` must be a live handle; the out-pointers must be valid.
 */
KtError kt_report_counts(const KtReport *report, size_t *out_total, size_t *out_failed);

/**
 * # Safety
 * `report` must be a live handle; `out_json` a valid pointer.
 */
KtError kt_report_to_json(const KtReport *report, char **out_json);

/**
 * # Safety
 * `report` must be a live handle or null; it is invalid afterwards.
 */
void kt_report_free(KtReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KANTOROVICH_H */

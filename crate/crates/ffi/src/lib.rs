//! C ABI over the `kantorovich` solver.
//!
//! Every fallible function returns a [`KtError`] code and writes its result
//! through an out-pointer. On failure, [`kt_last_error_message`] describes the
//! most recent error on the calling thread. Objects are opaque handles owned
//! by the caller and released with the matching `*_free` function; strings
//! returned by `*_to_json` are released with [`kt_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use kantorovich::certify::{certify, certify_problem, Certificate, CertificateStatus, LipschitzSource};
use kantorovich::newton::{solve, NewtonTrace, StopCriteria, StopReason};
use kantorovich::problem::{NormKind, ProblemFile, ProblemSpec};
use kantorovich::verify::{full_verification, BoundReport, VerifyOptions};
use kantorovich::{Error, MajorantParams, PreconditionedSystem};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KtError {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    HypothesisViolated = 3,
    Domain = 4,
    UnknownProblem = 5,
    SingularBasePoint = 6,
    SingularJacobian = 7,
    InsufficientTrace = 8,
    BufferTooSmall = 9,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KtNorm {
    Euclidean = 0,
    Max = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KtCertificateStatus {
    CertifiedStrict = 0,
    CertifiedBoundary = 1,
    Rejected = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KtStopReason {
    MajorantGapTol = 0,
    StepTol = 1,
    KmaxReached = 2,
    SingularJacobian = 3,
    LeftCertifiedBall = 4,
}

/// Roots and shape of the quadratic majorant.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KtMajorantAnalysis {
    pub t_star: f64,
    pub t_star2: f64,
    pub theta: f64,
    pub strict: bool,
}

/// A nonlinear system with its base point and domain radius.
pub struct KtProblem(ProblemSpec);

/// A problem preconditioned by its Jacobian at the base point.
pub struct KtSystem(PreconditionedSystem);

pub struct KtCertificate(Certificate);

pub struct KtTrace(NewtonTrace);

pub struct KtReport(BoundReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn code_of(err: &Error) -> KtError {
    match err {
        Error::HypothesisViolated { .. } => KtError::HypothesisViolated,
        Error::DomainError(_) | Error::DomainViolation { .. } => KtError::Domain,
        Error::UnknownProblem(_) => KtError::UnknownProblem,
        Error::InvalidInput(_) => KtError::InvalidInput,
        Error::SingularBasePoint { .. } => KtError::SingularBasePoint,
        Error::SingularJacobian { .. } => KtError::SingularJacobian,
        Error::InsufficientTrace(_) => KtError::InsufficientTrace,
    }
}

struct Fail(KtError, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(code_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(KtError::NullPointer, format!("{what} is null"))
}

/// Run `f`, translating errors and panics into codes.
fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> KtError {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => KtError::Ok,
        Ok(Err(Fail(code, msg))) => {
            set_last_error(msg);
            code
        }
        Err(_) => {
            set_last_error("internal panic".into());
            KtError::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(KtError::InvalidInput, format!("{what} is not valid UTF-8")))
}

fn json_out(value: &impl serde::Serialize, out_json: *mut *mut c_char) -> Result<(), Fail> {
    let slot = unsafe { out(out_json, "out_json")? };
    let text = serde_json::to_string(value).map_err(|e| Fail(KtError::InvalidInput, e.to_string()))?;
    *slot = CString::new(text)
        .map_err(|e| Fail(KtError::InvalidInput, e.to_string()))?
        .into_raw();
    Ok(())
}

fn norm_of(norm: KtNorm) -> NormKind {
    match norm {
        KtNorm::Euclidean => NormKind::Euclidean,
        KtNorm::Max => NormKind::Max,
    }
}

/// Message for the last failed call on this thread, or null. The pointer stays
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn kt_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from a `*_to_json` function and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn kt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Roots `t_star <= t_star2` and `theta = t_star / t_star2` of the majorant
/// `f(t) = (L/2) t^2 - t + b`.
///
/// # Safety
/// `out_analysis` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kt_majorant_analyze(b: f64, lipschitz: f64, out_analysis: *mut KtMajorantAnalysis) -> KtError {
    guard(|| {
        let slot = out(out_analysis, "out_analysis")?;
        let a = MajorantParams::new(b, lipschitz)?.analyze();
        *slot = KtMajorantAnalysis {
            t_star: a.t_star,
            t_star2: a.t_star2,
            theta: a.theta,
            strict: a.strict,
        };
        Ok(())
    })
}

/// Closed-form majorant iterate `t_k`.
///
/// # Safety
/// `out_t` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kt_majorant_closed_form(b: f64, lipschitz: f64, k: u32, out_t: *mut f64) -> KtError {
    guard(|| {
        let slot = out(out_t, "out_t")?;
        *slot = MajorantParams::new(b, lipschitz)?.closed_form_t(k);
        Ok(())
    })
}

/// Majorant iterates `t_0..t_{len-1}` by the Newton recursion, written to `out_t`.
///
/// # Safety
/// `out_t` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn kt_majorant_sequence(b: f64, lipschitz: f64, out_t: *mut f64, len: usize) -> KtError {
    guard(|| {
        if out_t.is_null() {
            return Err(null("out_t"));
        }
        if len == 0 {
            return Ok(());
        }
        let m = MajorantParams::new(b, lipschitz)?;
        let traj = m.sequence(len - 1);
        std::slice::from_raw_parts_mut(out_t, len).copy_from_slice(&traj.t[..len]);
        Ok(())
    })
}

/// Builtin problem by name, with default parameters.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out_problem` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kt_problem_builtin(name: *const c_char, out_problem: *mut *mut KtProblem) -> KtError {
    guard(|| {
        let slot = out(out_problem, "out_problem")?;
        let file = ProblemFile {
            name: c_str(name, "name")?.to_string(),
            ..Default::default()
        };
        *slot = Box::into_raw(Box::new(KtProblem(file.to_spec()?)));
        Ok(())
    })
}

/// Problem from a JSON description: `name`, optional `params`, `x0`, `R`, `norm`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out_problem` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kt_problem_from_json(json: *const c_char, out_problem: *mut *mut KtProblem) -> KtError {
    guard(|| {
        let slot = out(out_problem, "out_problem")?;
        let file = ProblemFile::from_json(c_str(json, "json")?)?;
        *slot = Box::into_raw(Box::new(KtProblem(file.to_spec()?)));
        Ok(())
    })
}

/// Dimension of the problem.
///
/// # Safety
/// `problem` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn kt_problem_dim(problem: *const KtProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.0.dim)
}

/// # Safety
/// `problem` must be a live handle or null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn kt_problem_free(problem: *mut KtProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Certificate from scalar inputs `b`, `L`, `R`. A violated hypothesis yields
/// a REJECTED certificate, not an error.
///
/// # Safety
/// `out_cert` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kt_certify(
    b: f64,
    lipschitz: f64,
    radius: f64,
    norm: KtNorm,
    k_max: usize,
    out_cert: *mut *mut KtCertificate,
) -> KtError {
    guard(|| {
        let slot = out(out_cert, "out_cert")?;
        let cert = certify(b, lipschitz, radius, norm_of(norm), k_max)?;
        *slot = Box::into_raw(Box::new(KtCertificate(cert)));
        Ok(())
    })
}

/// Precondition `problem` and certify it. Pass a NaN `lipschitz` to use the
/// problem's own constant; a finite value is checked against a sampled
/// estimate. The problem handle is not consumed.
///
/// # Safety
/// `problem` must be a live handle; `out_system` and `out_cert` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn kt_certify_problem(
    problem: *const KtProblem,
    lipschitz: f64,
    k_max: usize,
    out_system: *mut *mut KtSystem,
    out_cert: *mut *mut KtCertificate,
) -> KtError {
    guard(|| {
        let ps = borrow(problem, "problem")?.0.clone();
        let sys_slot = out(out_system, "out_system")?;
        let cert_slot = out(out_cert, "out_cert")?;
        let source = if lipschitz.is_nan() {
            LipschitzSource::Known
        } else {
            LipschitzSource::EstimateGuarded(lipschitz)
        };
        let (pcs, cert) = certify_problem(ps, source, k_max)?;
        *sys_slot = Box::into_raw(Box::new(KtSystem(pcs)));
        *cert_slot = Box::into_raw(Box::new(KtCertificate(cert)));
        Ok(())
    })
}

/// # Safety
/// `system` must be a live handle or null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn kt_system_free(system: *mut KtSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

/// # Safety
/// `cert` must be a live handle; `out_status` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kt_certificate_status(
    cert: *const KtCertificate,
    out_status: *mut KtCertificateStatus,
) -> KtError {
    guard(|| {
        let c = borrow(cert, "cert")?;
        *out(out_status, "out_status")? = match c.0.status {
            CertificateStatus::CertifiedStrict => KtCertificateStatus::CertifiedStrict,
            CertificateStatus::CertifiedBoundary => KtCertificateStatus::CertifiedBoundary,
            CertificateStatus::Rejected => KtCertificateStatus::Rejected,
        };
        Ok(())
    })
}

/// Existence radius `t*`; NaN for a rejected certificate.
///
/// # Safety
/// `cert` must be a live handle; `out_t_star` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kt_certificate_t_star(cert: *const KtCertificate, out_t_star: *mut f64) -> KtError {
    guard(|| {
        let c = borrow(cert, "cert")?;
        *out(out_t_star, "out_t_star")? = c.0.t_star.unwrap_or(f64::NAN);
        Ok(())
    })
}

/// # Safety
/// `cert` must be a live handle; `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kt_certificate_to_json(cert: *const KtCertificate, out_json: *mut *mut c_char) -> KtError {
    guard(|| json_out(&borrow(cert, "cert")?.0, out_json))
}

/// # Safety
/// `cert` must be a live handle or null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn kt_certificate_free(cert: *mut KtCertificate) {
    if !cert.is_null() {
        drop(Box::from_raw(cert));
    }
}

/// Newton's method from the base point. Nonpositive tolerances and a zero
/// `k_max` select the defaults.
///
/// # Safety
/// `system` and `cert` must be live handles; `out_trace` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kt_solve(
    system: *const KtSystem,
    cert: *const KtCertificate,
    majorant_tol: f64,
    step_tol: f64,
    k_max: usize,
    out_trace: *mut *mut KtTrace,
) -> KtError {
    guard(|| {
        let pcs = &borrow(system, "system")?.0;
        let c = &borrow(cert, "cert")?.0;
        let slot = out(out_trace, "out_trace")?;
        let defaults = StopCriteria::default();
        let stop = StopCriteria {
            majorant_tol: if majorant_tol > 0.0 {
                majorant_tol
            } else {
                defaults.majorant_tol
            },
            step_tol: if step_tol > 0.0 { step_tol } else { defaults.step_tol },
            k_max: if k_max > 0 { k_max } else { defaults.k_max },
        };
        *slot = Box::into_raw(Box::new(KtTrace(solve(pcs, c, &stop)?)));
        Ok(())
    })
}

/// Number of iterates, `x_0` included.
///
/// # Safety
/// `trace` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn kt_trace_len(trace: *const KtTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.0.len())
}

/// Copy iterate `k` into `out_x`, which holds `len` doubles.
///
/// # Safety
/// `trace` must be a live handle; `out_x` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn kt_trace_iterate(trace: *const KtTrace, k: usize, out_x: *mut f64, len: usize) -> KtError {
    guard(|| {
        let t = &borrow(trace, "trace")?.0;
        if out_x.is_null() {
            return Err(null("out_x"));
        }
        let x = t.iterates.get(k).ok_or_else(|| {
            Fail(
                KtError::InvalidInput,
                format!("iterate {k} out of range (len {})", t.len()),
            )
        })?;
        if len < x.len() {
            return Err(Fail(
                KtError::BufferTooSmall,
                format!("need {} doubles, got {len}", x.len()),
            ));
        }
        std::slice::from_raw_parts_mut(out_x, x.len()).copy_from_slice(x.as_slice());
        Ok(())
    })
}

/// # Safety
/// `trace` must be a live handle; `out_reason` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kt_trace_stop_reason(trace: *const KtTrace, out_reason: *mut KtStopReason) -> KtError {
    guard(|| {
        let t = borrow(trace, "trace")?;
        *out(out_reason, "out_reason")? = match t.0.stop_reason {
            StopReason::MajorantGapTol => KtStopReason::MajorantGapTol,
            StopReason::StepTol => KtStopReason::StepTol,
            StopReason::KmaxReached => KtStopReason::KmaxReached,
            StopReason::SingularJacobian => KtStopReason::SingularJacobian,
            StopReason::LeftCertifiedBall => KtStopReason::LeftCertifiedBall,
        };
        Ok(())
    })
}

/// # Safety
/// `trace` must be a live handle; `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kt_trace_to_json(trace: *const KtTrace, out_json: *mut *mut c_char) -> KtError {
    guard(|| json_out(&borrow(trace, "trace")?.0, out_json))
}

/// # Safety
/// `trace` must be a live handle or null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn kt_trace_free(trace: *mut KtTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Audit every a priori bound along `trace`.
///
/// # Safety
/// `system`, `cert` and `trace` must be live handles; `out_report` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kt_verify(
    system: *const KtSystem,
    cert: *const KtCertificate,
    trace: *const KtTrace,
    samples: usize,
    seed: u64,
    out_report: *mut *mut KtReport,
) -> KtError {
    guard(|| {
        let pcs = &borrow(system, "system")?.0;
        let c = &borrow(cert, "cert")?.0;
        let t = &borrow(trace, "trace")?.0;
        let slot = out(out_report, "out_report")?;
        let report = full_verification(pcs, c, t, &VerifyOptions { samples, seed })?;
        *slot = Box::into_raw(Box::new(KtReport(report)));
        Ok(())
    })
}

/// # Safety
/// `report` must be a live handle; `out_all_pass` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kt_report_all_pass(report: *const KtReport, out_all_pass: *mut bool) -> KtError {
    guard(|| {
        let r = borrow(report, "report")?;
        *out(out_all_pass, "out_all_pass")? = r.0.all_pass;
        Ok(())
    })
}

/// Total and failed check counts.
///
/// # Safety
/// `report` must be a live handle; the out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn kt_report_counts(
    report: *const KtReport,
    out_total: *mut usize,
    out_failed: *mut usize,
) -> KtError {
    guard(|| {
        let r = borrow(report, "report")?;
        *out(out_total, "out_total")? = r.0.summary.total;
        *out(out_failed, "out_failed")? = r.0.summary.failed;
        Ok(())
    })
}

/// # Safety
/// `report` must be a live handle; `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kt_report_to_json(report: *const KtReport, out_json: *mut *mut c_char) -> KtError {
    guard(|| json_out(&borrow(report, "report")?.0, out_json))
}

/// # Safety
/// `report` must be a live handle or null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn kt_report_free(report: *mut KtReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

use std::ffi::{CStr, CString};
use std::ptr;

use kantorovich_ffi::*;

fn last_error() -> String {
    let p = kt_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn take_json(p: *mut std::ffi::c_char) -> serde_json::Value {
    let text = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned();
    unsafe { kt_string_free(p) };
    serde_json::from_str(&text).unwrap()
}

#[test]
fn majorant_functions() {
    let mut a = KtMajorantAnalysis::default();
    assert_eq!(unsafe { kt_majorant_analyze(0.5, 1.0, &mut a) }, KtError::Ok);
    assert_eq!((a.t_star, a.t_star2, a.theta, a.strict), (1.0, 1.0, 1.0, false));
    assert!(kt_last_error_message().is_null());

    let mut t = [0.0; 5];
    assert_eq!(
        unsafe { kt_majorant_sequence(0.5, 1.0, t.as_mut_ptr(), t.len()) },
        KtError::Ok
    );
    assert_eq!(t, [0.0, 0.5, 0.75, 0.875, 0.9375]);
    let mut t3 = 0.0;
    assert_eq!(unsafe { kt_majorant_closed_form(0.5, 1.0, 3, &mut t3) }, KtError::Ok);
    assert_eq!(t3, 0.875);

    assert_eq!(
        unsafe { kt_majorant_analyze(1.0, 1.0, &mut a) },
        KtError::HypothesisViolated
    );
    assert!(last_error().contains("2bL"));
    assert_eq!(unsafe { kt_majorant_analyze(-1.0, 1.0, &mut a) }, KtError::InvalidInput);
    assert_eq!(
        unsafe { kt_majorant_analyze(0.1, 1.0, ptr::null_mut()) },
        KtError::NullPointer
    );
}

#[test]
fn full_pipeline() {
    let name = CString::new("circle-line").unwrap();
    let mut problem = ptr::null_mut();
    assert_eq!(unsafe { kt_problem_builtin(name.as_ptr(), &mut problem) }, KtError::Ok);
    assert_eq!(unsafe { kt_problem_dim(problem) }, 2);

    let (mut system, mut cert) = (ptr::null_mut(), ptr::null_mut());
    assert_eq!(
        unsafe { kt_certify_problem(problem, f64::NAN, 50, &mut system, &mut cert) },
        KtError::Ok
    );
    let mut status = KtCertificateStatus::Rejected;
    assert_eq!(unsafe { kt_certificate_status(cert, &mut status) }, KtError::Ok);
    assert_eq!(status, KtCertificateStatus::CertifiedStrict);
    let mut t_star = 0.0;
    assert_eq!(unsafe { kt_certificate_t_star(cert, &mut t_star) }, KtError::Ok);
    assert!(t_star > 0.0);

    let mut trace = ptr::null_mut();
    assert_eq!(unsafe { kt_solve(system, cert, 0.0, 0.0, 0, &mut trace) }, KtError::Ok);
    let n = unsafe { kt_trace_len(trace) };
    assert!(n >= 2);
    let mut x = [0.0; 2];
    assert_eq!(
        unsafe { kt_trace_iterate(trace, n - 1, x.as_mut_ptr(), 2) },
        KtError::Ok
    );
    let h = std::f64::consts::FRAC_1_SQRT_2;
    assert!((x[0] - h).abs() < 1e-14 && (x[1] - h).abs() < 1e-14, "{x:?}");
    assert_eq!(
        unsafe { kt_trace_iterate(trace, n - 1, x.as_mut_ptr(), 1) },
        KtError::BufferTooSmall
    );
    assert_eq!(
        unsafe { kt_trace_iterate(trace, n, x.as_mut_ptr(), 2) },
        KtError::InvalidInput
    );
    let mut reason = KtStopReason::KmaxReached;
    assert_eq!(unsafe { kt_trace_stop_reason(trace, &mut reason) }, KtError::Ok);
    assert_eq!(reason, KtStopReason::MajorantGapTol);

    let mut report = ptr::null_mut();
    assert_eq!(
        unsafe { kt_verify(system, cert, trace, 16, 42, &mut report) },
        KtError::Ok
    );
    let mut all_pass = false;
    assert_eq!(unsafe { kt_report_all_pass(report, &mut all_pass) }, KtError::Ok);
    assert!(all_pass);
    let (mut total, mut failed) = (0, 1);
    assert_eq!(
        unsafe { kt_report_counts(report, &mut total, &mut failed) },
        KtError::Ok
    );
    assert!(total > 0 && failed == 0);

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { kt_report_to_json(report, &mut json) }, KtError::Ok);
    assert_eq!(take_json(json)["all_pass"], true);
    assert_eq!(unsafe { kt_trace_to_json(trace, &mut json) }, KtError::Ok);
    assert_eq!(take_json(json)["stop_reason"], "MAJORANT_GAP_TOL");
    assert_eq!(unsafe { kt_certificate_to_json(cert, &mut json) }, KtError::Ok);
    assert_eq!(take_json(json)["status"], "CERTIFIED_STRICT");

    unsafe {
        kt_report_free(report);
        kt_trace_free(trace);
        kt_certificate_free(cert);
        kt_system_free(system);
        kt_problem_free(problem);
    }
}

#[test]
fn rejected_and_error_paths() {
    let mut cert = ptr::null_mut();
    assert_eq!(
        unsafe { kt_certify(0.6, 1.0, 5.0, KtNorm::Max, 10, &mut cert) },
        KtError::Ok
    );
    let mut status = KtCertificateStatus::CertifiedStrict;
    assert_eq!(unsafe { kt_certificate_status(cert, &mut status) }, KtError::Ok);
    assert_eq!(status, KtCertificateStatus::Rejected);
    let mut t_star = 0.0;
    assert_eq!(unsafe { kt_certificate_t_star(cert, &mut t_star) }, KtError::Ok);
    assert!(t_star.is_nan());
    unsafe { kt_certificate_free(cert) };

    let name = CString::new("no-such-problem").unwrap();
    let mut problem = ptr::null_mut();
    assert_eq!(
        unsafe { kt_problem_builtin(name.as_ptr(), &mut problem) },
        KtError::UnknownProblem
    );
    assert!(problem.is_null());
    assert_eq!(
        unsafe { kt_problem_builtin(ptr::null(), &mut problem) },
        KtError::NullPointer
    );

    let bad = CString::new(r#"{"name": "scalar-sqrt", "bogus": 1}"#).unwrap();
    assert_eq!(
        unsafe { kt_problem_from_json(bad.as_ptr(), &mut problem) },
        KtError::InvalidInput
    );
    let json = CString::new(r#"{"name": "scalar-sqrt", "params": {"c": 3}, "x0": [1.5], "R": 1}"#).unwrap();
    assert_eq!(
        unsafe { kt_problem_from_json(json.as_ptr(), &mut problem) },
        KtError::Ok
    );

    let (mut system, mut cert) = (ptr::null_mut(), ptr::null_mut());
    assert_eq!(
        unsafe { kt_certify_problem(problem, 1e-6, 20, &mut system, &mut cert) },
        KtError::Ok
    );
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { kt_certificate_to_json(cert, &mut json) }, KtError::Ok);
    let warnings = take_json(json)["warnings"].to_string();
    assert!(warnings.contains("unsound"), "{warnings}");
    unsafe {
        kt_certificate_free(cert);
        kt_system_free(system);
        kt_problem_free(problem);
    }

    let mut trace = ptr::null_mut();
    assert_eq!(
        unsafe { kt_solve(ptr::null(), ptr::null(), 0.0, 0.0, 0, &mut trace) },
        KtError::NullPointer
    );
    unsafe {
        kt_problem_free(ptr::null_mut());
        kt_string_free(ptr::null_mut());
    }
}

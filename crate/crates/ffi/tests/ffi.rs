use std::ffi::{c_int, c_void, CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use noisy_sqp_ffi::*;

fn last_error() -> String {
    let p = nsqp_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn load(name: &str) -> *mut NsqpProblem {
    let name = CString::new(name).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { nsqp_problem_builtin(name.as_ptr(), &mut p) }, NsqpStatus::Ok);
    p
}

#[test]
fn solve_builtin_round_trip() {
    let p = load("hs28");
    let (mut n, mut m) = (0, 0);
    unsafe {
        assert_eq!(nsqp_problem_dims(p, &mut n, &mut m), NsqpStatus::Ok);
        assert_eq!((n, m), (3, 1));
        let mut opts = nsqp_options_default();
        opts.exact = 1;
        let mut r = ptr::null_mut();
        assert_eq!(nsqp_solve(p, &opts, &mut r), NsqpStatus::Ok);
        let (mut iters, mut evals, mut ok) = (0usize, 0u64, 0 as c_int);
        assert_eq!(nsqp_result_counts(r, &mut iters, &mut evals, &mut ok), NsqpStatus::Ok);
        assert!(iters > 0 && evals > 0);
        assert_eq!(ok, 1);
        let mut x = [0.0; 3];
        assert_eq!(nsqp_result_final_x(r, x.as_mut_ptr(), 3), NsqpStatus::Ok);
        assert!((x[0] - 0.5).abs() < 1e-4 && (x[1] + 0.5).abs() < 1e-4 && (x[2] - 0.5).abs() < 1e-4, "{x:?}");
        let (mut feas, mut stat) = (f64::NAN, f64::NAN);
        assert_eq!(nsqp_result_best_errors(r, &mut feas, &mut stat), NsqpStatus::Ok);
        assert!(feas <= 1e-6 && stat <= 1e-4);
        let mut st = NsqpRunStatus::NonFinite;
        assert_eq!(nsqp_result_status(r, &mut st), NsqpStatus::Ok);
        assert_ne!(st, NsqpRunStatus::NonFinite);
        nsqp_result_free(r);
        nsqp_problem_free(p);
    }
}

#[test]
fn short_buffer_is_rejected() {
    let p = load("hs28");
    unsafe {
        let mut r = ptr::null_mut();
        assert_eq!(nsqp_solve(p, ptr::null(), &mut r), NsqpStatus::Ok);
        let mut x = [0.0; 2];
        assert_eq!(nsqp_result_final_x(r, x.as_mut_ptr(), 2), NsqpStatus::InvalidArgument);
        assert!(last_error().contains("need 3"));
        nsqp_result_free(r);
        nsqp_problem_free(p);
    }
}

#[test]
fn errors_set_codes_and_messages() {
    let name = CString::new("no-such-problem").unwrap();
    let mut p = ptr::null_mut();
    unsafe {
        assert_eq!(nsqp_problem_builtin(name.as_ptr(), &mut p), NsqpStatus::UnknownProblem);
        assert!(last_error().contains("no-such-problem"));
        assert_eq!(nsqp_problem_builtin(ptr::null(), &mut p), NsqpStatus::NullPointer);
        assert_eq!(nsqp_solve(ptr::null(), ptr::null(), ptr::null_mut()), NsqpStatus::NullPointer);
        let bad = CString::new("{\"name\":1}").unwrap();
        assert_eq!(nsqp_problem_from_json(bad.as_ptr(), &mut p), NsqpStatus::InvalidArgument);
    }
    assert!(p.is_null());
    let q = load("unit-circle");
    assert!(nsqp_last_error_message().is_null());
    let mut opts = nsqp_options_default();
    opts.eps_f = -1.0;
    let mut r = ptr::null_mut();
    unsafe {
        assert_eq!(nsqp_solve(q, &opts, &mut r), NsqpStatus::InvalidArgument);
        nsqp_problem_free(q);
        nsqp_problem_free(ptr::null_mut());
        nsqp_result_free(ptr::null_mut());
    }
}

#[test]
fn json_problem_and_duplicate() {
    let text = CString::new(r#"{"name":"t","Q":[[1,0],[0,1]],"q":[0,0],"A":[[1,1]],"b":[1],"x0":[0,0]}"#).unwrap();
    let mut p = ptr::null_mut();
    let mut d = ptr::null_mut();
    let mut m = 0;
    unsafe {
        assert_eq!(nsqp_problem_from_json(text.as_ptr(), &mut p), NsqpStatus::Ok);
        assert_eq!(nsqp_problem_duplicate_last(p, &mut d), NsqpStatus::Ok);
        assert_eq!(nsqp_problem_dims(d, ptr::null_mut(), &mut m), NsqpStatus::Ok);
        assert_eq!(m, 2);
        let mut opts = nsqp_options_default();
        opts.eps_f = 1e-4;
        opts.eps_c = 1e-4;
        opts.variant = NsqpVariant::LineSearch;
        let mut r = ptr::null_mut();
        assert_eq!(nsqp_solve(d, &opts, &mut r), NsqpStatus::Ok);
        let mut x = [0.0; 2];
        assert_eq!(nsqp_result_final_x(r, x.as_mut_ptr(), 2), NsqpStatus::Ok);
        assert!((x[0] - 0.5).abs() < 0.05 && (x[1] - 0.5).abs() < 0.05, "{x:?}");
        nsqp_result_free(r);
        nsqp_problem_free(d);
        nsqp_problem_free(p);
    }
}

// min x₁ + x₂ s.t. x₁² + x₂² = 2, solution (−1, −1).
extern "C" fn circle(user: *mut c_void, x: *const f64, f: *mut f64, g: *mut f64, c: *mut f64, j: *mut f64) -> c_int {
    unsafe {
        *(user as *mut usize) += 1;
        let x = std::slice::from_raw_parts(x, 2);
        *f = x[0] + x[1];
        *g = 1.0;
        *g.add(1) = 1.0;
        *c = x[0] * x[0] + x[1] * x[1] - 2.0;
        *j = 2.0 * x[0];
        *j.add(1) = 2.0 * x[1];
    }
    0
}

extern "C" fn failing(_: *mut c_void, _: *const f64, _: *mut f64, _: *mut f64, _: *mut f64, _: *mut f64) -> c_int {
    1
}

#[test]
fn callback_problem() {
    let mut calls = 0usize;
    let x0 = [-0.5, -1.5];
    let mut p = ptr::null_mut();
    unsafe {
        let user = &mut calls as *mut usize as *mut c_void;
        assert_eq!(nsqp_problem_from_callback(2, 1, x0.as_ptr(), Some(circle), user, &mut p), NsqpStatus::Ok);
        let mut opts = nsqp_options_default();
        opts.exact = 1;
        let mut r = ptr::null_mut();
        assert_eq!(nsqp_solve(p, &opts, &mut r), NsqpStatus::Ok);
        let mut x = [0.0; 2];
        assert_eq!(nsqp_result_final_x(r, x.as_mut_ptr(), 2), NsqpStatus::Ok);
        assert!((x[0] + 1.0).abs() < 1e-4 && (x[1] + 1.0).abs() < 1e-4, "{x:?}");
        nsqp_result_free(r);
        nsqp_problem_free(p);
    }
    assert!(calls > 0);

    unsafe {
        assert_eq!(
            nsqp_problem_from_callback(2, 1, x0.as_ptr(), None, ptr::null_mut(), &mut p),
            NsqpStatus::NullPointer
        );
        assert_eq!(
            nsqp_problem_from_callback(2, 1, x0.as_ptr(), Some(failing), ptr::null_mut(), &mut p),
            NsqpStatus::Ok
        );
        let mut r = ptr::null_mut();
        assert_eq!(nsqp_solve(p, ptr::null(), &mut r), NsqpStatus::Ok);
        let mut st = NsqpRunStatus::BudgetIters;
        assert_eq!(nsqp_result_status(r, &mut st), NsqpStatus::Ok);
        assert_eq!(st, NsqpRunStatus::NonFinite);
        nsqp_result_free(r);
        nsqp_problem_free(p);
    }
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(nsqp_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/noisy_sqp.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in ["nsqp_solve", "nsqp_problem_free", "NSQP_STATUS_NULL_POINTER", "NsqpOptions"] {
        assert!(text.contains(sym), "{sym} missing from header");
    }
    let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-x", "c", "-std=c99", "-Wall", "-Werror"]).arg(&header).output()
    else {
        eprintln!("no C compiler, skipping syntax check");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

//! C ABI for the noisy-sqp solver.
//!
//! Every entry point returns an [`NsqpStatus`]. On failure a message is kept
//! per thread and can be read with [`nsqp_last_error_message`]. Handles are
//! opaque and must be released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use noisy_sqp::driver::{solve, Optimism, RunStatus, RunTrace, SolverParams, Variant};
use noisy_sqp::harness::{best_iterate, success, BestIterate};
use noisy_sqp::linalg::{Matrix, Vector};
use noisy_sqp::problems::{builtin, duplicate_last_constraint, parse_problem_json, ExactEvaluation, ProblemSpec};
use noisy_sqp::steps::Inexactness;

/// Return code of every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NsqpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownProblem = 3,
    SolverError = 4,
    Panic = 5,
}

/// How a run ended.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NsqpRunStatus {
    BudgetIters = 0,
    BudgetEvals = 1,
    EarlyStationary = 2,
    EarlyInfeasibleStationary = 3,
    DegenerateDirection = 4,
    LineSearchFailure = 5,
    TestUnsatisfiable = 6,
    NonFinite = 7,
}

impl From<RunStatus> for NsqpRunStatus {
    fn from(s: RunStatus) -> Self {
        match s {
            RunStatus::BudgetIters => Self::BudgetIters,
            RunStatus::BudgetEvals => Self::BudgetEvals,
            RunStatus::EarlyStationary => Self::EarlyStationary,
            RunStatus::EarlyInfeasibleStationary => Self::EarlyInfeasibleStationary,
            RunStatus::DegenerateDirection => Self::DegenerateDirection,
            RunStatus::LineSearchFailure => Self::LineSearchFailure,
            RunStatus::TestUnsatisfiable => Self::TestUnsatisfiable,
            RunStatus::NonFinite => Self::NonFinite,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NsqpVariant {
    Adaptive = 0,
    LineSearch = 1,
}

/// Solver options. Obtain defaults from [`nsqp_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct NsqpOptions {
    pub variant: NsqpVariant,
    /// Nonzero for the optimistic tests.
    pub optimistic: c_int,
    /// Nonzero to solve subproblems to tight tolerance.
    pub exact: c_int,
    /// Relative inexactness factor when `exact` is zero.
    pub kappa: f64,
    pub eps_f: f64,
    pub eps_c: f64,
    pub seed: u64,
    /// Zero keeps the preset budget.
    pub max_iters: usize,
    /// Zero keeps the preset budget.
    pub max_weighted_evals: u64,
}

/// Opaque problem handle.
pub struct NsqpProblem {
    spec: ProblemSpec,
}

/// Opaque result handle.
pub struct NsqpResult {
    trace: RunTrace,
    best: Option<BestIterate>,
    success: bool,
}

/// Evaluates `f`, `g` (length n), `c` (length m) and `J` (m×n, row-major) at
/// `x`. Returns zero on success. Called from several threads only if the
/// caller shares one problem between concurrent solves.
pub type NsqpEvalCallback = extern "C" fn(
    user_data: *mut c_void,
    x: *const f64,
    f: *mut f64,
    g: *mut f64,
    c: *mut f64,
    j: *mut f64,
) -> c_int;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn guard(f: impl FnOnce() -> Result<(), (NsqpStatus, String)>) -> NsqpStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NsqpStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            NsqpStatus::Panic
        }
    }
}

fn null(what: &str) -> (NsqpStatus, String) {
    (NsqpStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (NsqpStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (NsqpStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

unsafe fn put_problem(out: *mut *mut NsqpProblem, spec: ProblemSpec) {
    *out = Box::into_raw(Box::new(NsqpProblem { spec }));
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn nsqp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Static, NUL-terminated library version.
#[no_mangle]
pub extern "C" fn nsqp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Looks up a registry problem by name.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nsqp_problem_builtin(name: *const c_char, out: *mut *mut NsqpProblem) -> NsqpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let name = str_arg(name, "name")?;
        let spec = builtin(name).map_err(|e| (NsqpStatus::UnknownProblem, e.to_string()))?;
        put_problem(out, spec);
        Ok(())
    })
}

/// Parses a quadratic problem from its JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nsqp_problem_from_json(json: *const c_char, out: *mut *mut NsqpProblem) -> NsqpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(json, "json")?;
        let spec = parse_problem_json(text.as_bytes()).map_err(|e| (NsqpStatus::InvalidArgument, e.to_string()))?;
        put_problem(out, spec);
        Ok(())
    })
}

struct Callback {
    eval: NsqpEvalCallback,
    user_data: *mut c_void,
}

// The caller promises the callback may run on whichever thread solves.
unsafe impl Send for Callback {}
unsafe impl Sync for Callback {}

impl Callback {
    fn call(&self, x: &Vector, m: usize) -> ExactEvaluation {
        let n = x.len();
        let mut f = f64::NAN;
        let mut g = vec![f64::NAN; n];
        let mut c = vec![f64::NAN; m];
        let mut j = vec![f64::NAN; m * n];
        let rc = (self.eval)(self.user_data, x.as_ptr(), &mut f, g.as_mut_ptr(), c.as_mut_ptr(), j.as_mut_ptr());
        if rc != 0 {
            // The solver stops on non-finite values.
            f = f64::NAN;
        }
        ExactEvaluation {
            f,
            g: Vector::from_vec(g),
            c: Vector::from_vec(c),
            j: Matrix::from_row_slice(m, n, &j),
        }
    }
}

/// Builds a problem from a user callback. A nonzero return from the
/// callback ends the run with the non-finite status.
///
/// # Safety
/// `x0` must point to `n` doubles and `out` must be valid. `user_data` must
/// stay valid until the problem is freed.
#[no_mangle]
pub unsafe extern "C" fn nsqp_problem_from_callback(
    n: usize,
    m: usize,
    x0: *const f64,
    eval: Option<
        extern "C" fn(
            user_data: *mut c_void,
            x: *const f64,
            f: *mut f64,
            g: *mut f64,
            c: *mut f64,
            j: *mut f64,
        ) -> c_int,
    >,
    user_data: *mut c_void,
    out: *mut *mut NsqpProblem,
) -> NsqpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if x0.is_null() {
            return Err(null("x0"));
        }
        let eval = eval.ok_or_else(|| null("eval"))?;
        if n == 0 {
            return Err((NsqpStatus::InvalidArgument, "n must be positive".into()));
        }
        let x0 = Vector::from_column_slice(std::slice::from_raw_parts(x0, n));
        let cb = Callback { eval, user_data };
        let spec = ProblemSpec::new("callback", n, m, x0, Arc::new(move |x: &Vector| cb.call(x, m)));
        put_problem(out, spec);
        Ok(())
    })
}

/// Returns a new problem whose last constraint appears twice.
///
/// # Safety
/// `problem` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nsqp_problem_duplicate_last(
    problem: *const NsqpProblem,
    out: *mut *mut NsqpProblem,
) -> NsqpStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if p.spec.m == 0 {
            return Err((NsqpStatus::InvalidArgument, "problem has no constraints".into()));
        }
        put_problem(out, duplicate_last_constraint(&p.spec));
        Ok(())
    })
}

/// # Safety
/// `problem` must be a live handle; `n` and `m` may be null.
#[no_mangle]
pub unsafe extern "C" fn nsqp_problem_dims(problem: *const NsqpProblem, n: *mut usize, m: *mut usize) -> NsqpStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        if let Some(n) = n.as_mut() {
            *n = p.spec.n;
        }
        if let Some(m) = m.as_mut() {
            *m = p.spec.m;
        }
        Ok(())
    })
}

/// # Safety
/// `problem` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nsqp_problem_free(problem: *mut NsqpProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Optimistic adaptive solver at zero noise with relaxed subproblem solves.
#[no_mangle]
pub extern "C" fn nsqp_options_default() -> NsqpOptions {
    NsqpOptions {
        variant: NsqpVariant::Adaptive,
        optimistic: 1,
        exact: 0,
        kappa: 1e-2,
        eps_f: 0.0,
        eps_c: 0.0,
        seed: 0,
        max_iters: 0,
        max_weighted_evals: 0,
    }
}

fn params_from(o: &NsqpOptions) -> Result<SolverParams, (NsqpStatus, String)> {
    let bad = |msg: &str| (NsqpStatus::InvalidArgument, msg.to_string());
    if !(o.eps_f >= 0.0 && o.eps_f.is_finite() && o.eps_c >= 0.0 && o.eps_c.is_finite()) {
        return Err(bad("noise levels must be finite and nonnegative"));
    }
    if o.exact == 0 && !(o.kappa > 0.0 && o.kappa.is_finite()) {
        return Err(bad("kappa must be positive"));
    }
    let variant = match o.variant {
        NsqpVariant::Adaptive => Variant::Adaptive,
        NsqpVariant::LineSearch => Variant::LineSearch,
    };
    let optimism = if o.optimistic != 0 { Optimism::Optimistic } else { Optimism::Pessimistic };
    let inexactness = if o.exact != 0 { Inexactness::Exact } else { Inexactness::inexact(o.kappa) };
    let mut params = SolverParams::preset(variant, optimism, inexactness, o.eps_f, o.eps_c);
    if o.max_iters > 0 {
        params.budgets.max_iters = o.max_iters;
    }
    if o.max_weighted_evals > 0 {
        params.budgets.max_weighted_evals = o.max_weighted_evals;
    }
    params.validate().map_err(|e| (NsqpStatus::InvalidArgument, e.to_string()))?;
    Ok(params)
}

/// Runs the solver. `options` may be null for the defaults.
///
/// # Safety
/// `problem` must be a live handle, `options` null or valid, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn nsqp_solve(
    problem: *const NsqpProblem,
    options: *const NsqpOptions,
    out: *mut *mut NsqpResult,
) -> NsqpStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let opts = options.as_ref().copied().unwrap_or_else(|| nsqp_options_default());
        let params = params_from(&opts)?;
        let trace = solve(&p.spec, &params, opts.seed).map_err(|e| (NsqpStatus::SolverError, e.to_string()))?;
        let best = best_iterate(&trace, &p.spec, opts.eps_c, opts.eps_f);
        let ok = trace.status == RunStatus::EarlyStationary
            || best.is_some_and(|b| success(b.feas_err, b.stat_err, b.y_inf, &params.resolved_noise()));
        *out = Box::into_raw(Box::new(NsqpResult { trace, best, success: ok }));
        Ok(())
    })
}

/// # Safety
/// `result` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nsqp_result_free(result: *mut NsqpResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// # Safety
/// `result` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn nsqp_result_status(result: *const NsqpResult, out: *mut NsqpRunStatus) -> NsqpStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = r.trace.status.into();
        Ok(())
    })
}

/// Iteration count, weighted evaluation count and a success flag.
/// Any output pointer may be null.
///
/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nsqp_result_counts(
    result: *const NsqpResult,
    iters: *mut usize,
    weighted_evals: *mut u64,
    success: *mut c_int,
) -> NsqpStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        if let Some(i) = iters.as_mut() {
            *i = r.trace.records.len();
        }
        if let Some(w) = weighted_evals.as_mut() {
            *w = r.trace.counters.weighted_total;
        }
        if let Some(s) = success.as_mut() {
            *s = c_int::from(r.success);
        }
        Ok(())
    })
}

/// Copies the final iterate into `x`, which must hold `len ≥ n` doubles.
///
/// # Safety
/// `result` must be a live handle and `x` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn nsqp_result_final_x(result: *const NsqpResult, x: *mut f64, len: usize) -> NsqpStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        if x.is_null() {
            return Err(null("x"));
        }
        let src = r.trace.final_x.as_slice();
        if len < src.len() {
            return Err((NsqpStatus::InvalidArgument, format!("buffer holds {len}, need {}", src.len())));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), x, src.len());
        Ok(())
    })
}

/// Exact feasibility and stationarity errors at the best iterate. Fails
/// with `InvalidArgument` when no iterate could be evaluated.
///
/// # Safety
/// `result` must be a live handle; `feas` and `stat` may be null.
#[no_mangle]
pub unsafe extern "C" fn nsqp_result_best_errors(
    result: *const NsqpResult,
    feas: *mut f64,
    stat: *mut f64,
) -> NsqpStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        let b = r.best.ok_or((NsqpStatus::InvalidArgument, "no evaluable iterate".to_string()))?;
        if let Some(f) = feas.as_mut() {
            *f = b.feas_err;
        }
        if let Some(s) = stat.as_mut() {
            *s = b.stat_err;
        }
        Ok(())
    })
}

//! Independent checks of solver output.
//!
//! Nothing here calls into the step, merit or step-size code: every
//! inequality is recomputed from recorded trace data with dense linear
//! algebra and the problem definitions.

mod invariants;
mod scans;

pub use invariants::{assert_trace_invariants, Violation};
pub use scans::{
    cauchy_perturbation_scan, tangential_gap_scan, PerturbationReport, ScanPoint, DEFAULT_SCAN_EPS, SCAN_SEEDS,
};

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::linalg::{Matrix, Vector};
use crate::problems::{ProblemError, ProblemSpec};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("fixture does not meet the check's hypotheses: {0}")]
    FixtureInvalid(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// Machine-readable outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub check: String,
    pub params: Value,
    pub observations: Vec<Value>,
    pub pass: bool,
}

impl Report {
    pub fn new(check: impl Into<String>, params: Value) -> Self {
        Self { check: check.into(), params, observations: Vec::new(), pass: true }
    }

    pub fn observe(&mut self, obs: Value, ok: bool) {
        self.observations.push(obs);
        self.pass &= ok;
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports are plain data")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdErrors {
    pub grad: f64,
    pub jac: f64,
}

/// Largest absolute gap between central differences and the analytic `g`, `J`.
pub fn fd_check(problem: &ProblemSpec, x: &Vector, h: f64) -> Result<FdErrors, VerifyError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(VerifyError::InvalidArgument(format!("step h = {h} must be positive")));
    }
    let base = problem.evaluate(x)?;
    let mut fd_g = Vector::zeros(problem.n);
    let mut fd_j = Matrix::zeros(problem.m, problem.n);
    for i in 0..problem.n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        let (ep, em) = (problem.evaluate(&xp)?, problem.evaluate(&xm)?);
        fd_g[i] = (ep.f - em.f) / (2.0 * h);
        fd_j.set_column(i, &((&ep.c - &em.c) / (2.0 * h)));
    }
    Ok(FdErrors {
        grad: (&fd_g - &base.g).amax(),
        jac: (&fd_j - &base.j).amax(),
    })
}

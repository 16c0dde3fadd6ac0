//! Exact equality-constrained problems `min f(x) s.t. c(x) = 0`.
//!
//! A [`ProblemSpec`] only knows the exact quantities. Noise is layered on top
//! by [`crate::noise`], and the rank-deficient variants used in experiments
//! are produced with [`duplicate_last_constraint`].

mod builtin;
mod json;

pub use builtin::{builtin, builtin_names, builtin_registry};
pub use json::{parse_problem_json, quadratic_problem, QP_FILE_SUFFIX};

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::linalg::{is_finite_matrix, is_finite_vector, Matrix, Vector};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("parse error at line {line}, column {column}{}: {message}", field.as_ref().map(|f| format!(" (field `{f}`)")).unwrap_or_default())]
    Parse {
        line: usize,
        column: usize,
        field: Option<String>,
        message: String,
    },
    #[error("unknown problem `{0}`")]
    Unknown(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("cannot read problem file: {0}")]
    Io(#[from] std::io::Error),
}

/// Exact f, ∇f, c and the constraint Jacobian J = ∇cᵀ at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactEvaluation {
    pub f: f64,
    pub g: Vector,
    pub c: Vector,
    pub j: Matrix,
}

impl ExactEvaluation {
    pub fn is_finite(&self) -> bool {
        self.f.is_finite() && is_finite_vector(&self.g) && is_finite_vector(&self.c) && is_finite_matrix(&self.j)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktPoint {
    pub x: Vector,
    pub y: Vector,
}

pub type EvalFn = Arc<dyn Fn(&Vector) -> ExactEvaluation + Send + Sync>;

/// An exact problem together with its start point.
///
/// `m` counts duplicated constraints. The closure only produces the original
/// `m - duplicated` rows; duplicates are appended by [`ProblemSpec::evaluate`]
/// (and by the noisy oracle after noise has been applied).
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub x0: Vector,
    /// Expected exact Jacobian rank at `x0` is `m`.
    pub full_rank: bool,
    pub known_kkt: Option<KktPoint>,
    /// Fixed H_k for the tangential subproblem; identity when absent.
    pub hessian: Option<Matrix>,
    eval: EvalFn,
    duplicated: usize,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("m", &self.m)
            .field("duplicated", &self.duplicated)
            .field("full_rank", &self.full_rank)
            .finish()
    }
}

impl ProblemSpec {
    pub fn new(name: impl Into<String>, n: usize, m: usize, x0: Vector, eval: EvalFn) -> Self {
        assert!(n >= 1 && m >= 1, "problems need n >= 1 and m >= 1");
        assert_eq!(x0.len(), n, "start point has wrong length");
        Self {
            name: name.into(),
            n,
            m,
            x0,
            full_rank: true,
            known_kkt: None,
            hessian: None,
            eval,
            duplicated: 0,
        }
    }

    pub fn with_kkt(mut self, x: Vector, y: Vector) -> Self {
        self.known_kkt = Some(KktPoint { x, y });
        self
    }

    pub fn with_full_rank(mut self, full_rank: bool) -> Self {
        self.full_rank = full_rank;
        self
    }

    pub fn with_hessian(mut self, h: Matrix) -> Self {
        assert_eq!((h.nrows(), h.ncols()), (self.n, self.n));
        self.hessian = Some(h);
        self
    }

    pub fn with_start(mut self, x0: Vector) -> Self {
        assert_eq!(x0.len(), self.n);
        self.x0 = x0;
        self
    }

    /// Number of trailing rows that copy the last original constraint.
    pub fn duplicated(&self) -> usize {
        self.duplicated
    }

    pub fn base_m(&self) -> usize {
        self.m - self.duplicated
    }

    pub fn hessian_or_identity(&self) -> Matrix {
        self.hessian.clone().unwrap_or_else(|| Matrix::identity(self.n, self.n))
    }

    /// The original rows only, without duplicates.
    pub fn evaluate_base(&self, x: &Vector) -> Result<ExactEvaluation, ProblemError> {
        if x.len() != self.n {
            return Err(ProblemError::DimensionMismatch(format!(
                "`{}` expects {} variables, got {}",
                self.name,
                self.n,
                x.len()
            )));
        }
        Ok((self.eval)(x))
    }

    pub fn evaluate(&self, x: &Vector) -> Result<ExactEvaluation, ProblemError> {
        let mut ev = self.evaluate_base(x)?;
        let (c, j) = self.append_duplicates(&ev.c, &ev.j);
        ev.c = c;
        ev.j = j;
        Ok(ev)
    }

    /// Extends base-row constraint data with the duplicated tail.
    pub fn append_duplicates(&self, c: &Vector, j: &Matrix) -> (Vector, Matrix) {
        if self.duplicated == 0 {
            return (c.clone(), j.clone());
        }
        let base = c.len();
        let last = base - 1;
        let mut c_full = Vector::zeros(base + self.duplicated);
        let mut j_full = Matrix::zeros(base + self.duplicated, j.ncols());
        c_full.rows_mut(0, base).copy_from(c);
        j_full.view_mut((0, 0), (base, j.ncols())).copy_from(j);
        for r in base..base + self.duplicated {
            c_full[r] = c[last];
            j_full.set_row(r, &j.row(last));
        }
        (c_full, j_full)
    }
}

/// Adds one constraint identical to the last one. The feasible region is
/// unchanged but the Jacobian loses full row rank everywhere.
pub fn duplicate_last_constraint(problem: &ProblemSpec) -> ProblemSpec {
    let mut dup = problem.clone();
    dup.duplicated += 1;
    dup.m += 1;
    dup.full_rank = false;
    if !dup.name.ends_with("+dup") && problem.duplicated == 0 {
        dup.name = format!("{}+dup", problem.name);
    }
    if let Some(kkt) = &problem.known_kkt {
        let mut y = Vector::zeros(dup.m);
        y.rows_mut(0, kkt.y.len()).copy_from(&kkt.y);
        dup.known_kkt = Some(KktPoint { x: kkt.x.clone(), y });
    }
    dup
}

/// Resolves a registry name or a path to a `.qp.json` file.
pub fn load_problem(name_or_path: &str) -> Result<ProblemSpec, ProblemError> {
    let path = Path::new(name_or_path);
    if name_or_path.ends_with(".json") || path.is_file() {
        let text = std::fs::read(path)?;
        return parse_problem_json(&text);
    }
    builtin(name_or_path)
}

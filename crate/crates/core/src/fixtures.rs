//! Constructed problems for the early-termination exits.

use std::sync::Arc;

use crate::linalg::{Matrix, Vector};
use crate::noise::{EvalCounters, NoiseError, NoiseSpec, Oracle, Sample, UniformNoiseOracle, Want};
use crate::problems::{duplicate_last_constraint, ExactEvaluation, ProblemSpec};

/// `min ½‖x − p‖²` subject to `aᵀx = aᵀp`, started a distance
/// `offset·ε_c/‖a‖` off the constraint along `a`. The solution `p` has
/// multiplier zero and the start is within noise of it.
pub fn near_kkt_problem(eps_c: f64, offset: f64) -> ProblemSpec {
    let a = Vector::from_column_slice(&[1.0, -2.0, 2.0]);
    let p = Vector::from_column_slice(&[0.5, 1.0, -0.25]);
    let b = a.dot(&p);
    let x0 = &p + &a * (offset * eps_c / a.norm_squared());
    let (ac, pc) = (a.clone(), p.clone());
    let eval = move |x: &Vector| ExactEvaluation {
        f: 0.5 * (x - &pc).norm_squared(),
        g: x - &pc,
        c: Vector::from_element(1, ac.dot(x) - b),
        j: Matrix::from_row_slice(1, 3, ac.as_slice()),
    };
    ProblemSpec::new("near-kkt", 3, 1, x0, Arc::new(eval))
        .with_kkt(p, Vector::zeros(1))
        .with_hessian(Matrix::identity(3, 3))
}

/// `min x₂²` subject to two copies of `x₁² + 1 = 0`, which is infeasible
/// everywhere; started at `x₁ = ε_J/8` near the infeasible stationary point.
pub fn infeasible_stationary_problem(eps_j: f64) -> ProblemSpec {
    let eval = |x: &Vector| ExactEvaluation {
        f: x[1] * x[1],
        g: Vector::from_column_slice(&[0.0, 2.0 * x[1]]),
        c: Vector::from_element(1, x[0] * x[0] + 1.0),
        j: Matrix::from_row_slice(1, 2, &[2.0 * x[0], 0.0]),
    };
    let base = ProblemSpec::new(
        "infeasible-stationary",
        2,
        1,
        Vector::from_column_slice(&[eps_j / 8.0, 0.5]),
        Arc::new(eval),
    );
    duplicate_last_constraint(&base)
}

/// Wraps a uniform-noise oracle and projects every noisy Jacobian onto the
/// orthogonal complement of the noisy constraint values,
/// `J̄ ← (I − c̄c̄ᵀ/‖c̄‖²)J̄`, so that `J̄ᵀc̄ = 0` at every sample.
#[derive(Debug, Clone)]
pub struct ProjectedJacobianOracle {
    inner: UniformNoiseOracle,
}

impl ProjectedJacobianOracle {
    pub fn new(problem: ProblemSpec, spec: NoiseSpec, seed: u64) -> Result<Self, NoiseError> {
        Ok(Self { inner: UniformNoiseOracle::new(problem, spec, seed)? })
    }
}

impl Oracle for ProjectedJacobianOracle {
    fn problem(&self) -> &ProblemSpec {
        self.inner.problem()
    }

    fn noise(&self) -> &NoiseSpec {
        self.inner.noise()
    }

    fn counters(&self) -> EvalCounters {
        self.inner.counters()
    }

    fn sample(&mut self, x: &Vector, want: Want) -> Result<Sample, NoiseError> {
        let mut s = self.inner.sample(x, want)?;
        let c = match &s.values {
            Some(v) => v.c_bar.clone(),
            None => self.inner.exact(x)?.c,
        };
        if let Some(d) = s.derivatives.as_mut() {
            let cc = c.norm_squared();
            if cc > 0.0 {
                let proj = Matrix::identity(c.len(), c.len()) - &c * c.transpose() / cc;
                d.j_bar = proj * &d.j_bar;
            }
        }
        Ok(s)
    }
}

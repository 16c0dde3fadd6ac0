//! Plain MINRES (Paige–Saunders) for symmetric, possibly indefinite or
//! singular, operators. No preconditioning.
//!
//! The solver is exposed as a resumable state machine so that callers can
//! inspect every iterate: the tangential step needs to evaluate its
//! acceptance tests on each Krylov iterate, not only at convergence.

use super::{inf_norm, Vector};

/// Result of one MINRES advance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinresStep {
    /// A new iterate was produced.
    Advanced,
    /// The Lanczos process produced a zero vector: the current iterate is the
    /// minimum-residual solution over the whole reachable Krylov space.
    Breakdown,
}

#[derive(Debug, Clone)]
pub struct MinresState {
    x: Vector,
    r1: Vector,
    r2: Vector,
    y: Vector,
    w: Vector,
    w2: Vector,
    beta1: f64,
    beta: f64,
    oldb: f64,
    dbar: f64,
    epsln: f64,
    phibar: f64,
    cs: f64,
    sn: f64,
    anorm: f64,
    iterations: usize,
    exhausted: bool,
}

impl MinresState {
    /// Starts from the zero iterate, so the initial residual is `b` itself.
    pub fn new(b: &Vector) -> Self {
        let n = b.len();
        let beta1 = b.norm();
        Self {
            x: Vector::zeros(n),
            r1: b.clone(),
            r2: b.clone(),
            y: b.clone(),
            w: Vector::zeros(n),
            w2: Vector::zeros(n),
            beta1,
            beta: beta1,
            oldb: 0.0,
            dbar: 0.0,
            epsln: 0.0,
            phibar: beta1,
            cs: -1.0,
            sn: 0.0,
            anorm: 0.0,
            iterations: 0,
            exhausted: beta1 == 0.0,
        }
    }

    pub fn solution(&self) -> &Vector {
        &self.x
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Recurrence estimate of ‖b − A x‖₂.
    pub fn residual_estimate(&self) -> f64 {
        self.phibar
    }

    pub fn is_exhausted(&self) -> bool {
        self.exhausted
    }

    pub fn advance<F>(&mut self, apply: F) -> MinresStep
    where
        F: Fn(&Vector) -> Vector,
    {
        if self.exhausted {
            return MinresStep::Breakdown;
        }
        self.iterations += 1;

        let v = &self.y / self.beta;
        let mut y = apply(&v);
        if self.iterations >= 2 {
            y -= &self.r1 * (self.beta / self.oldb);
        }
        let alfa = v.dot(&y);
        y -= &self.r2 * (alfa / self.beta);
        std::mem::swap(&mut self.r1, &mut self.r2);
        self.r2.copy_from(&y);
        self.oldb = self.beta;
        self.beta = y.norm();
        self.y = y;
        self.anorm = self.anorm.max(alfa.abs()).max(self.beta).max(self.oldb);

        let oldeps = self.epsln;
        let delta = self.cs * self.dbar + self.sn * alfa;
        let gbar = self.sn * self.dbar - self.cs * alfa;
        self.epsln = self.sn * self.beta;
        self.dbar = -self.cs * self.beta;

        let gamma = gbar.hypot(self.beta).max(f64::EPSILON * self.anorm.max(f64::MIN_POSITIVE));
        self.cs = gbar / gamma;
        self.sn = self.beta / gamma;
        let phi = self.cs * self.phibar;
        self.phibar *= self.sn;

        let w1 = std::mem::replace(&mut self.w2, self.w.clone());
        self.w = (v - &w1 * oldeps - &self.w2 * delta) / gamma;
        self.x.axpy(phi, &self.w, 1.0);

        if self.beta <= f64::EPSILON * self.anorm || self.phibar <= f64::EPSILON * self.beta1 * 1e-3 {
            self.exhausted = true;
        }
        MinresStep::Advanced
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymSolveReport {
    pub solution: Vector,
    /// ‖A·solution − b‖_∞, recomputed explicitly.
    pub residual_inf_norm: f64,
    pub iterations: usize,
}

/// Runs MINRES until the explicit residual ‖Ax − b‖_∞ drops to `tol`, the
/// Lanczos process breaks down, or `max_iters` iterations have been taken.
pub fn minres_solve<F>(apply: F, b: &Vector, tol: f64, max_iters: usize) -> SymSolveReport
where
    F: Fn(&Vector) -> Vector,
{
    let mut state = MinresState::new(b);
    let residual = |x: &Vector| inf_norm(&(apply(x) - b));
    let mut res = residual(state.solution());
    while res > tol && state.iterations() < max_iters {
        if state.advance(&apply) == MinresStep::Breakdown {
            break;
        }
        res = residual(state.solution());
    }
    SymSolveReport {
        solution: state.solution().clone(),
        residual_inf_norm: res,
        iterations: state.iterations(),
    }
}

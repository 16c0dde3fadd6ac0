//! Perturbation scans: how far noisy normal and tangential steps drift from
//! their exact counterparts as the noise level shrinks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::{Report, VerifyError};
use crate::linalg::{dense_kkt_solve, smallest_singular_value, Matrix, Vector};
use crate::problems::ProblemSpec;

pub const DEFAULT_SCAN_EPS: [f64; 7] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8];
pub const SCAN_SEEDS: u64 = 20;

const SIGMA_JC: f64 = 1e2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanPoint {
    pub eps: f64,
    /// Largest error over the seeds.
    pub error: f64,
    /// `error / scale(ε)`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationReport {
    pub points: Vec<ScanPoint>,
    /// Error with every noise level at zero.
    pub zero_noise_error: f64,
    pub pass: bool,
}

impl PerturbationReport {
    pub fn to_report(&self, check: &str, problem: &str) -> Report {
        let mut r = Report::new(check, json!({ "problem": problem, "seeds": SCAN_SEEDS }));
        r.observe(json!({ "eps": 0.0, "error": self.zero_noise_error }), self.zero_noise_error == 0.0);
        for p in &self.points {
            r.observe(serde_json::to_value(p).expect("plain data"), true);
        }
        r.pass &= self.pass;
        r
    }
}

fn box_noise(rng: &mut ChaCha8Rng, len: usize, half_width: f64) -> Vector {
    if half_width == 0.0 {
        return Vector::zeros(len);
    }
    Vector::from_fn(len, |_, _| rng.gen_range(-half_width..=half_width))
}

fn perturb_jacobian(rng: &mut ChaCha8Rng, j: &Matrix, eps_j: f64) -> Matrix {
    let (m, n) = j.shape();
    let w = eps_j / ((m * n) as f64).sqrt();
    j + Matrix::from_column_slice(m, n, box_noise(rng, m * n, w).as_slice())
}

/// `ᾱᶜv̄ᶜ` with `v̄ᶜ = −J̄ᵀc̄` and `ᾱᶜ = min{σ_Jc, ‖J̄ᵀc̄‖²/‖J̄J̄ᵀc̄‖²}`.
fn cauchy_point(c: &Vector, j: &Matrix) -> Vector {
    let dir = -(j.transpose() * c);
    let jd = j * &dir;
    let step = if jd.norm_squared() == 0.0 {
        SIGMA_JC
    } else {
        SIGMA_JC.min(dir.norm_squared() / jd.norm_squared())
    };
    dir * step
}

/// Largest error of `compute` over the seeds at one noise level.
fn worst_over_seeds<F>(eps: f64, seed_base: u64, compute: F) -> Result<f64, VerifyError>
where
    F: Fn(&mut ChaCha8Rng, f64) -> Result<f64, VerifyError> + Sync,
{
    let errs: Result<Vec<f64>, VerifyError> = (0..SCAN_SEEDS)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed_base.wrapping_add(s).wrapping_add(eps.to_bits()));
            compute(&mut rng, eps)
        })
        .collect();
    Ok(errs?.into_iter().fold(0.0, f64::max))
}

/// Noisy versus exact Cauchy steps with `ε_c = ε_J = ε`. Passes when the
/// error ratio `‖v̄ᶜ − vᶜ‖/ε` stays within 10× of its value at `ε = 1e-5`
/// and the zero-noise error is exactly zero.
pub fn cauchy_perturbation_scan(
    problem: &ProblemSpec,
    x: &Vector,
    eps_list: &[f64],
) -> Result<PerturbationReport, VerifyError> {
    let e = problem.evaluate(x)?;
    let sigma_min = smallest_singular_value(&e.j);
    if e.j.nrows() > e.j.ncols() || sigma_min < 1e-3 {
        return Err(VerifyError::FixtureInvalid(format!("σ_min(J) = {sigma_min:e} < 1e-3")));
    }
    if (e.j.transpose() * &e.c).norm() < 1e-8 {
        return Err(VerifyError::FixtureInvalid("‖Jᵀc‖ vanishes at the fixture point".into()));
    }
    let exact = cauchy_point(&e.c, &e.j);
    let m = e.c.len();
    let compute = |rng: &mut ChaCha8Rng, eps: f64| {
        let c_bar = &e.c + box_noise(rng, m, eps / (m as f64).sqrt());
        let j_bar = perturb_jacobian(rng, &e.j, eps);
        Ok((cauchy_point(&c_bar, &j_bar) - &exact).norm())
    };
    let zero_noise_error = worst_over_seeds(0.0, 0, compute)?;
    let mut points = Vec::new();
    for &eps in eps_list {
        let error = worst_over_seeds(eps, 0, compute)?;
        points.push(ScanPoint { eps, error, ratio: error / eps });
    }
    let anchor = points.iter().find(|p| p.eps == 1e-5).or(points.last()).map(|p| p.ratio);
    let pass = zero_noise_error == 0.0
        && anchor.is_some_and(|a| points.iter().all(|p| p.ratio.is_finite() && p.ratio <= 10.0 * a));
    Ok(PerturbationReport { points, zero_noise_error, pass })
}

/// Exact versus noisy tangential steps at a feasible point with `v = 0`,
/// `ε_g = ε_J = ε` and exact subproblem solves. Passes when
/// `‖ū − u*‖/(ε_g + ε_J)` stays within a factor 10 of its value at the
/// largest ε and the zero-noise error is exactly zero.
pub fn tangential_gap_scan(
    problem: &ProblemSpec,
    x: &Vector,
    eps_list: &[f64],
) -> Result<PerturbationReport, VerifyError> {
    let e = problem.evaluate(x)?;
    let (m, n) = e.j.shape();
    if e.c.amax() > 1e-12 {
        return Err(VerifyError::FixtureInvalid(format!("point is not feasible, ‖c‖_∞ = {:e}", e.c.amax())));
    }
    if m >= n || smallest_singular_value(&e.j) < 1e-3 {
        return Err(VerifyError::FixtureInvalid("J needs full row rank and a nontrivial null space".into()));
    }
    let h = problem.hessian_or_identity();
    let solve = |g: &Vector, j: &Matrix| {
        dense_kkt_solve(&h, j, g).map(|s| s.u).map_err(|err| VerifyError::FixtureInvalid(err.to_string()))
    };
    let exact = solve(&e.g, &e.j)?;
    let compute = |rng: &mut ChaCha8Rng, eps: f64| {
        let g_bar = &e.g + box_noise(rng, n, eps / (n as f64).sqrt());
        let j_bar = perturb_jacobian(rng, &e.j, eps);
        Ok((solve(&g_bar, &j_bar)? - &exact).norm())
    };
    let zero_noise_error = worst_over_seeds(0.0, 1 << 32, compute)?;
    let mut points = Vec::new();
    for &eps in eps_list {
        let error = worst_over_seeds(eps, 1 << 32, compute)?;
        points.push(ScanPoint { eps, error, ratio: error / (2.0 * eps) });
    }
    let calibration = points
        .iter()
        .max_by(|a, b| a.eps.total_cmp(&b.eps))
        .map(|p| p.ratio);
    let pass = zero_noise_error == 0.0
        && calibration.is_some_and(|c| {
            c > 0.0 && points.iter().all(|p| p.ratio <= 10.0 * c && p.ratio >= c / 10.0)
        });
    Ok(PerturbationReport { points, zero_noise_error, pass })
}

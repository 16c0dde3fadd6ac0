//! Bounded-noise oracles.
//!
//! Perturbations are uniform and scaled so that the 2-norm bounds hold
//! deterministically: `e_f ~ U(±ε_f)`, each component of `e_g` is
//! `U(±ε_g/√n)`, of `e_c` is `U(±ε_c/√m)` and each entry of `e_J` is
//! `U(±ε_J/√(mn))`. The Frobenius bound on `e_J` dominates the spectral one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{Matrix, Vector};
use crate::problems::{ExactEvaluation, ProblemError, ProblemSpec};

#[derive(Debug, Error)]
pub enum NoiseError {
    #[error("invalid noise specification: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("non-finite exact evaluation")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub eps_f: f64,
    pub eps_g: f64,
    pub eps_c: f64,
    pub eps_j: f64,
    /// Optimistic feasibility threshold, `0 ≤ eps_o ≤ eps_c`.
    pub eps_o: f64,
}

impl NoiseSpec {
    pub fn new(eps_f: f64, eps_g: f64, eps_c: f64, eps_j: f64, eps_o: f64) -> Result<Self, NoiseError> {
        let spec = Self { eps_f, eps_g, eps_c, eps_j, eps_o };
        spec.validate()?;
        Ok(spec)
    }

    /// `(ε_f, ε_c)` with derivative levels from [`derive_gradient_noise`].
    /// `optimistic` selects `ε_o = ε_c`, otherwise `ε_o = 0`.
    pub fn from_levels(eps_f: f64, eps_c: f64, optimistic: bool) -> Result<Self, NoiseError> {
        let (eps_g, eps_j) = derive_gradient_noise(eps_f, eps_c);
        Self::new(eps_f, eps_g, eps_c, eps_j, if optimistic { eps_c } else { 0.0 })
    }

    pub fn zero() -> Self {
        Self { eps_f: 0.0, eps_g: 0.0, eps_c: 0.0, eps_j: 0.0, eps_o: 0.0 }
    }

    pub fn is_zero(&self) -> bool {
        self.eps_f == 0.0 && self.eps_g == 0.0 && self.eps_c == 0.0 && self.eps_j == 0.0
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        let all = [self.eps_f, self.eps_g, self.eps_c, self.eps_j, self.eps_o];
        if all.iter().any(|e| !e.is_finite() || *e < 0.0) {
            return Err(NoiseError::InvalidSpec(format!("bounds must be finite and nonnegative: {self:?}")));
        }
        if self.eps_o > self.eps_c {
            return Err(NoiseError::InvalidSpec(format!(
                "eps_o = {} exceeds eps_c = {}",
                self.eps_o, self.eps_c
            )));
        }
        Ok(())
    }
}

/// `(ε_g, ε_J) = (√ε_f, √ε_c)`.
pub fn derive_gradient_noise(eps_f: f64, eps_c: f64) -> (f64, f64) {
    (eps_f.sqrt(), eps_c.sqrt())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounters {
    pub function_evals: u64,
    pub gradient_evals: u64,
    pub weighted_total: u64,
}

impl EvalCounters {
    pub fn record(&mut self, want: Want) {
        if want.values() {
            self.function_evals += 1;
        }
        if want.derivatives() {
            self.gradient_evals += 1;
        }
        self.weighted_total = self.function_evals + 2 * self.gradient_evals;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Want {
    Values,
    Derivatives,
    Both,
}

impl Want {
    pub fn values(self) -> bool {
        matches!(self, Want::Values | Want::Both)
    }

    pub fn derivatives(self) -> bool {
        matches!(self, Want::Derivatives | Want::Both)
    }

    /// Weighted cost of one request.
    pub fn cost(self) -> u64 {
        self.values() as u64 + 2 * self.derivatives() as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisyValues {
    pub f_bar: f64,
    pub c_bar: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisyDerivatives {
    pub g_bar: Vector,
    pub j_bar: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisyEvaluation {
    pub f_bar: f64,
    pub g_bar: Vector,
    pub c_bar: Vector,
    pub j_bar: Matrix,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sample {
    pub values: Option<NoisyValues>,
    pub derivatives: Option<NoisyDerivatives>,
}

/// Source of noisy problem data for the solver. Implementations must count
/// every request in [`Oracle::counters`].
pub trait Oracle {
    fn problem(&self) -> &ProblemSpec;
    fn noise(&self) -> &NoiseSpec;
    fn counters(&self) -> EvalCounters;
    fn sample(&mut self, x: &Vector, want: Want) -> Result<Sample, NoiseError>;

    fn sample_values(&mut self, x: &Vector) -> Result<NoisyValues, NoiseError> {
        Ok(self.sample(x, Want::Values)?.values.expect("values requested"))
    }

    fn sample_derivatives(&mut self, x: &Vector) -> Result<NoisyDerivatives, NoiseError> {
        Ok(self.sample(x, Want::Derivatives)?.derivatives.expect("derivatives requested"))
    }

    fn sample_both(&mut self, x: &Vector) -> Result<NoisyEvaluation, NoiseError> {
        let s = self.sample(x, Want::Both)?;
        let (v, d) = (s.values.expect("values requested"), s.derivatives.expect("derivatives requested"));
        Ok(NoisyEvaluation { f_bar: v.f_bar, g_bar: d.g_bar, c_bar: v.c_bar, j_bar: d.j_bar })
    }

    /// Uncounted exact data, for diagnostics only.
    fn exact(&self, x: &Vector) -> Result<ExactEvaluation, NoiseError> {
        Ok(self.problem().evaluate(x)?)
    }
}

/// Uniform bounded noise around an exact problem.
#[derive(Debug, Clone)]
pub struct UniformNoiseOracle {
    problem: ProblemSpec,
    spec: NoiseSpec,
    seed: u64,
    rng: ChaCha8Rng,
    counters: EvalCounters,
    refresh: bool,
    duplicate_shares_noise: bool,
}

impl UniformNoiseOracle {
    pub fn new(problem: ProblemSpec, spec: NoiseSpec, seed: u64) -> Result<Self, NoiseError> {
        spec.validate()?;
        Ok(Self {
            problem,
            spec,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            counters: EvalCounters::default(),
            refresh: true,
            duplicate_shares_noise: true,
        })
    }

    /// With `refresh = false` the perturbation is a fixed function of
    /// `(seed, x)`, so repeated requests at one point agree.
    pub fn with_refresh(mut self, refresh: bool) -> Self {
        self.refresh = refresh;
        self
    }

    /// With `false`, duplicated constraint rows draw their own noise.
    pub fn with_duplicate_shares_noise(mut self, shared: bool) -> Self {
        self.duplicate_shares_noise = shared;
        self
    }

    fn point_rng(&self, x: &Vector) -> ChaCha8Rng {
        let mut h = self.seed ^ 0x9e37_79b9_7f4a_7c15;
        for xi in x.iter() {
            h = (h ^ xi.to_bits()).wrapping_mul(0x100_0000_01b3).rotate_left(29);
        }
        ChaCha8Rng::seed_from_u64(h)
    }
}

fn uniform(rng: &mut ChaCha8Rng, bound: f64) -> f64 {
    if bound == 0.0 {
        0.0
    } else {
        rng.gen_range(-bound..=bound)
    }
}

impl Oracle for UniformNoiseOracle {
    fn problem(&self) -> &ProblemSpec {
        &self.problem
    }

    fn noise(&self) -> &NoiseSpec {
        &self.spec
    }

    fn counters(&self) -> EvalCounters {
        self.counters
    }

    fn sample(&mut self, x: &Vector, want: Want) -> Result<Sample, NoiseError> {
        let exact = self.problem.evaluate_base(x)?;
        if !exact.is_finite() {
            return Err(NoiseError::NonFinite);
        }
        self.counters.record(want);

        let (n, m) = (self.problem.n, self.problem.m);
        let base = self.problem.base_m();
        let shared = self.duplicate_shares_noise;
        let spec = self.spec;
        let mut local;
        let rng = if self.refresh {
            &mut self.rng
        } else {
            local = self.point_rng(x);
            &mut local
        };

        let mut out = Sample::default();
        if want.values() {
            let f_bar = exact.f + uniform(rng, spec.eps_f);
            let bc = spec.eps_c / (m as f64).sqrt();
            let mut c_bar = exact.c.map(|ci| ci + uniform(rng, bc));
            let j_dummy = Matrix::zeros(base, n);
            c_bar = self.problem.append_duplicates(&c_bar, &j_dummy).0;
            if !shared {
                let last = exact.c[base - 1];
                for r in base..m {
                    c_bar[r] = last + uniform(rng, bc);
                }
            }
            out.values = Some(NoisyValues { f_bar, c_bar });
        }
        if want.derivatives() {
            let bg = spec.eps_g / (n as f64).sqrt();
            let g_bar = exact.g.map(|gi| gi + uniform(rng, bg));
            let bj = spec.eps_j / ((m * n) as f64).sqrt();
            let j_base = exact.j.map(|ji| ji + uniform(rng, bj));
            let mut j_bar = self.problem.append_duplicates(&Vector::zeros(base), &j_base).1;
            if !shared {
                for r in base..m {
                    for col in 0..n {
                        j_bar[(r, col)] = exact.j[(base - 1, col)] + uniform(rng, bj);
                    }
                }
            }
            out.derivatives = Some(NoisyDerivatives { g_bar, j_bar });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{builtin, duplicate_last_constraint};

    fn oracle(name: &str, spec: NoiseSpec, seed: u64) -> UniformNoiseOracle {
        UniformNoiseOracle::new(builtin(name).unwrap(), spec, seed).unwrap()
    }

    #[test]
    fn derived_levels() {
        assert_eq!(derive_gradient_noise(1e-4, 1e-4), (1e-2, 1e-2));
        assert_eq!(derive_gradient_noise(0.0, 0.0), (0.0, 0.0));
        let (g, j) = derive_gradient_noise(1e-8, 1e-2);
        assert!((g - 1e-4).abs() < 1e-18 && (j - 1e-1).abs() < 1e-15);
    }

    #[test]
    fn spec_validation() {
        assert!(NoiseSpec::new(0.1, 0.1, 0.1, 0.1, 0.2).is_err());
        assert!(NoiseSpec::new(-1.0, 0.0, 0.0, 0.0, 0.0).is_err());
        assert!(NoiseSpec::new(f64::NAN, 0.0, 0.0, 0.0, 0.0).is_err());
        assert!(NoiseSpec::from_levels(1e-2, 1e-2, true).is_ok());
    }

    #[test]
    fn zero_noise_is_exact() {
        let mut o = oracle("hs48", NoiseSpec::zero(), 1);
        let x = o.problem().x0.clone();
        let e = o.exact(&x).unwrap();
        let s = o.sample_both(&x).unwrap();
        assert_eq!(s.f_bar, e.f);
        assert_eq!(s.g_bar, e.g);
        assert_eq!(s.c_bar, e.c);
        assert_eq!(s.j_bar, e.j);
    }

    #[test]
    fn f_noise_bound_is_attained() {
        let spec = NoiseSpec::new(0.1, 0.0, 0.0, 0.0, 0.0).unwrap();
        let mut o = oracle("unit-circle", spec, 9);
        let x = o.problem().x0.clone();
        let f = o.exact(&x).unwrap().f;
        let max = (0..10_000)
            .map(|_| (o.sample_values(&x).unwrap().f_bar - f).abs())
            .fold(0.0, f64::max);
        assert!((0.09..=0.1).contains(&max), "{max}");
    }

    #[test]
    fn all_bounds_hold() {
        let spec = NoiseSpec::from_levels(1e-1, 1e-1, true).unwrap();
        for name in ["hs48", "quad-eq-20", "rank-deficient-start"] {
            let mut o = oracle(name, spec, 4);
            let x = o.problem().x0.clone();
            let e = o.exact(&x).unwrap();
            for _ in 0..200 {
                let s = o.sample_both(&x).unwrap();
                assert!((s.f_bar - e.f).abs() <= spec.eps_f);
                assert!((&s.g_bar - &e.g).norm() <= spec.eps_g);
                assert!((&s.c_bar - &e.c).norm() <= spec.eps_c);
                assert!((&s.j_bar - &e.j).norm() <= spec.eps_j);
            }
        }
    }

    #[test]
    fn seeded_streams_repeat() {
        let spec = NoiseSpec::from_levels(1e-2, 1e-2, false).unwrap();
        let mut a = oracle("hs28", spec, 42);
        let mut b = oracle("hs28", spec, 42);
        let x = a.problem().x0.clone();
        for _ in 0..5 {
            assert_eq!(a.sample_both(&x).unwrap(), b.sample_both(&x).unwrap());
        }
    }

    #[test]
    fn fresh_vs_fixed_noise() {
        let spec = NoiseSpec::from_levels(1e-2, 1e-2, false).unwrap();
        let mut fresh = oracle("hs28", spec, 1);
        let x = fresh.problem().x0.clone();
        assert_ne!(fresh.sample_values(&x).unwrap(), fresh.sample_values(&x).unwrap());
        let mut fixed = oracle("hs28", spec, 1).with_refresh(false);
        assert_eq!(fixed.sample_values(&x).unwrap(), fixed.sample_values(&x).unwrap());
    }

    #[test]
    fn counters_follow_requests() {
        let mut o = oracle("unit-circle", NoiseSpec::zero(), 0);
        let x = o.problem().x0.clone();
        o.sample_both(&x).unwrap();
        o.sample_values(&x).unwrap();
        o.sample_values(&x).unwrap();
        o.sample_derivatives(&x).unwrap();
        let c = o.counters();
        assert_eq!((c.function_evals, c.gradient_evals, c.weighted_total), (3, 2, 7));
        o.exact(&x).unwrap();
        assert_eq!(o.counters(), c);
    }

    #[test]
    fn duplicated_rows_share_noise() {
        let spec = NoiseSpec::from_levels(1e-1, 1e-1, true).unwrap();
        let p = duplicate_last_constraint(&builtin("unit-circle").unwrap());
        let mut o = UniformNoiseOracle::new(p.clone(), spec, 3).unwrap();
        let s = o.sample_both(&p.x0).unwrap();
        assert_eq!(s.c_bar[0], s.c_bar[1]);
        assert_eq!(s.j_bar.row(0), s.j_bar.row(1));

        let mut o = UniformNoiseOracle::new(p.clone(), spec, 3).unwrap().with_duplicate_shares_noise(false);
        let s = o.sample_both(&p.x0).unwrap();
        assert_ne!(s.c_bar[0], s.c_bar[1]);
        assert!((&s.c_bar - p.evaluate(&p.x0).unwrap().c).norm() <= spec.eps_c);
    }
}

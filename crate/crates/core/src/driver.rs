//! The main SQP loop.
//!
//! Each iteration samples `(f̄, c̄, ḡ, J̄)` once. When `‖c̄‖ ≤ ε_o` the normal
//! step is skipped and the tangential step must pass Termination Test 1; the
//! run stops early if the model reduction is at most `ε_o`. Otherwise a
//! normal step is computed first (or the run stops at an approximate
//! infeasible stationary point), the tangential step must pass Termination
//! Test 2 and the merit parameter is updated. The step size comes from the
//! adaptive rule or from the relaxed line search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::linalg::{inf_norm, matrix_inf_norm, quad_form, spectral_norm, Vector};
use crate::merit::{merit_value, model_reduction, tau_trial, TauState};
use crate::noise::{EvalCounters, NoiseError, NoiseSpec, NoisyEvaluation, Oracle, UniformNoiseOracle};
use crate::problems::{ExactEvaluation, ProblemSpec};
use crate::stepsize::{
    adaptive_alpha, epsilon_ak, line_search_alpha, update_chi_zeta, xi_update, AdaptiveParams, AdaptiveState,
    AlphaChoice, LineSearchError, LineSearchParams,
};
use crate::steps::{
    normal_step, tangential_step, Inexactness, StepBundle, StepError, Subproblem, TangentialConfig, TestOutcome,
    TestParams,
};

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("invalid solver parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Noise(#[from] NoiseError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Adaptive,
    LineSearch,
}

impl Variant {
    pub fn label(&self) -> &'static str {
        match self {
            Variant::Adaptive => "AdaSQP",
            Variant::LineSearch => "LSSQP",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimism {
    Optimistic,
    Pessimistic,
}

impl Optimism {
    pub fn label(&self) -> &'static str {
        match self {
            Optimism::Optimistic => "opt",
            Optimism::Pessimistic => "pes",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budgets {
    pub max_iters: usize,
    pub max_weighted_evals: u64,
}

impl Default for Budgets {
    fn default() -> Self {
        Self { max_iters: 1000, max_weighted_evals: 10_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Infeasible-stationary exit when `‖J̄ᵀc̄‖_∞ ≤ tol_jc·‖J̄‖_∞·‖c̄‖_∞`.
    pub tol_jc: f64,
    /// Degenerate-direction exit when `‖d̄‖_∞ ≤ tol_d`.
    pub tol_d: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { tol_jc: 1e-12, tol_d: 1e-14 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    /// `eps_o` is ignored here and resolved from `optimism`.
    pub noise: NoiseSpec,
    pub variant: Variant,
    pub optimism: Optimism,
    pub inexactness: Inexactness,
    pub tests: TestParams,
    pub tau0: f64,
    pub sigma_tau: f64,
    pub adaptive: AdaptiveParams,
    pub line_search: LineSearchParams,
    pub budgets: Budgets,
    pub tolerances: Tolerances,
    /// Store exact evaluations next to the noisy ones. Never read by the loop.
    pub record_exact: bool,
}

impl SolverParams {
    /// Default parameter set for noise levels `(ε_f, ε_c)` with derived
    /// derivative noise.
    pub fn preset(variant: Variant, optimism: Optimism, inexactness: Inexactness, eps_f: f64, eps_c: f64) -> Self {
        let (eps_g, eps_j) = crate::noise::derive_gradient_noise(eps_f, eps_c);
        Self {
            noise: NoiseSpec { eps_f, eps_g, eps_c, eps_j, eps_o: 0.0 },
            variant,
            optimism,
            inexactness,
            tests: TestParams::default(),
            tau0: 1.0,
            sigma_tau: 1e-2,
            adaptive: AdaptiveParams::default(),
            line_search: LineSearchParams::default(),
            budgets: Budgets::default(),
            tolerances: Tolerances::default(),
            record_exact: true,
        }
    }

    pub fn eps_o(&self) -> f64 {
        match self.optimism {
            Optimism::Optimistic => self.noise.eps_c,
            Optimism::Pessimistic => 0.0,
        }
    }

    pub fn resolved_noise(&self) -> NoiseSpec {
        NoiseSpec { eps_o: self.eps_o(), ..self.noise }
    }

    pub fn validate(&self) -> Result<(), DriverError> {
        let bad = |e: String| DriverError::InvalidParams(e);
        self.resolved_noise().validate().map_err(|e| bad(e.to_string()))?;
        self.tests.validate().map_err(|e| bad(e.to_string()))?;
        self.adaptive.validate().map_err(|e| bad(e.to_string()))?;
        self.line_search.validate().map_err(|e| bad(e.to_string()))?;
        if let Inexactness::Inexact { kappa_u, kappa_v } = self.inexactness {
            if !(kappa_u > 0.0 && kappa_v > 0.0 && kappa_u.is_finite() && kappa_v.is_finite()) {
                return Err(bad("kappa_u, kappa_v must be positive".into()));
            }
        }
        if !(self.tau0 > 0.0 && self.tau0.is_finite()) {
            return Err(bad("tau0 must be positive".into()));
        }
        if !(self.sigma_tau > 0.0 && self.sigma_tau < 1.0) {
            return Err(bad("sigma_tau in (0,1)".into()));
        }
        if !(self.tolerances.tol_jc >= 0.0 && self.tolerances.tol_d >= 0.0) {
            return Err(bad("tolerances must be nonnegative".into()));
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("params serialize");
        let digest = format!("{:x}", Sha256::digest(json.as_bytes()));
        digest[..16].to_string()
    }

    /// `AdaSQP-opt-exact` style label.
    pub fn label(&self) -> String {
        let exactness = match self.inexactness {
            Inexactness::Exact => "exact",
            Inexactness::Inexact { .. } => "inexact",
        };
        format!("{}-{}-{}", self.variant.label(), self.optimism.label(), exactness)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    BudgetIters,
    BudgetEvals,
    EarlyStationary,
    EarlyInfeasibleStationary,
    DegenerateDirection,
    LineSearchFailure,
    TestUnsatisfiable,
    /// The oracle produced NaN or ∞.
    NonFinite,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::BudgetIters => "budget_iters",
            RunStatus::BudgetEvals => "budget_evals",
            RunStatus::EarlyStationary => "early_stationary",
            RunStatus::EarlyInfeasibleStationary => "early_infeasible_stationary",
            RunStatus::DegenerateDirection => "degenerate_direction",
            RunStatus::LineSearchFailure => "line_search_failure",
            RunStatus::TestUnsatisfiable => "test_unsatisfiable",
            RunStatus::NonFinite => "non_finite",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        ALL_STATUSES.iter().copied().find(|st| st.as_str() == s)
    }

    pub fn is_early(&self) -> bool {
        matches!(self, RunStatus::EarlyStationary | RunStatus::EarlyInfeasibleStationary)
    }
}

const ALL_STATUSES: [RunStatus; 8] = [
    RunStatus::BudgetIters,
    RunStatus::BudgetEvals,
    RunStatus::EarlyStationary,
    RunStatus::EarlyInfeasibleStationary,
    RunStatus::DegenerateDirection,
    RunStatus::LineSearchFailure,
    RunStatus::TestUnsatisfiable,
    RunStatus::NonFinite,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `‖c̄‖ ≤ ε_o`.
    FeasibleBranch,
    InfeasibleBranch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchRecord {
    pub phi0: f64,
    pub phi_accepted: f64,
    pub relax: f64,
    pub backtracks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveRecord {
    /// Controller state after this iteration's updates.
    pub state: AdaptiveState,
    pub xi_trial: f64,
    pub choice: AlphaChoice,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub k: usize,
    pub x: Vector,
    pub noisy: NoisyEvaluation,
    pub exact: Option<ExactEvaluation>,
    pub branch: Branch,
    /// Absent when the iteration ended in an exit before a step was formed.
    pub bundle: Option<StepBundle>,
    pub tau_prev: f64,
    pub tau: f64,
    /// `Δl̄(x, τ̄ₖ, d̄ₖ)`.
    pub delta_l: Option<f64>,
    /// Absent on the final (exit) iteration.
    pub alpha: Option<f64>,
    pub adaptive: Option<AdaptiveRecord>,
    pub line_search: Option<LineSearchRecord>,
    pub counters_before: EvalCounters,
    pub counters_after: EvalCounters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub problem: String,
    pub label: String,
    pub records: Vec<IterRecord>,
    pub status: RunStatus,
    pub message: Option<String>,
    pub counters: EvalCounters,
    pub seed: u64,
    pub params_hash: String,
    pub final_x: Vector,
    /// `(L, Γ)` after clamping, adaptive runs only.
    pub lipschitz: Option<(f64, f64)>,
    pub eps_o: f64,
}

impl RunTrace {
    /// Iterates `x_0, …, x_K`, the last one being `final_x`.
    pub fn iterates(&self) -> Vec<&Vector> {
        let mut xs: Vec<&Vector> = self.records.iter().map(|r| &r.x).collect();
        if self.records.last().map(|r| r.alpha.is_some()).unwrap_or(true) {
            xs.push(&self.final_x);
        }
        xs
    }

    pub fn minres_iters(&self) -> usize {
        self.records.iter().filter_map(|r| r.bundle.as_ref()).map(|b| b.minres_iters).sum()
    }

    pub fn cg_iters(&self) -> usize {
        self.records.iter().filter_map(|r| r.bundle.as_ref()).map(|b| b.cg_iters).sum()
    }
}

/// Exit decision after the step has been assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegenerateDecision {
    Continue,
    Stop,
}

pub fn handle_degenerate(d_norm_inf: f64, tol_d: f64) -> DegenerateDecision {
    if d_norm_inf <= tol_d {
        DegenerateDecision::Stop
    } else {
        DegenerateDecision::Continue
    }
}

/// Runs the solver on `problem` with a uniform-noise oracle seeded by `seed`.
pub fn solve(problem: &ProblemSpec, params: &SolverParams, seed: u64) -> Result<RunTrace, DriverError> {
    params.validate()?;
    let mut oracle = UniformNoiseOracle::new(problem.clone(), params.resolved_noise(), seed)?;
    solve_with_oracle(&mut oracle, params, seed)
}

/// Finite-difference estimates of L (gradient) and Γ (Jacobian, spectral
/// norm) from noisy derivatives around `x0`.
fn estimate_lipschitz<O: Oracle + ?Sized>(
    oracle: &mut O,
    x0: &Vector,
    p: &AdaptiveParams,
    seed: u64,
) -> Result<(f64, f64), NoiseError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1195_c4f7_0001);
    let base = oracle.sample_derivatives(x0)?;
    let (mut l, mut gamma) = (0.0f64, 0.0f64);
    for _ in 0..p.lipschitz_directions {
        let mut dir = Vector::from_fn(x0.len(), |_, _| rng.gen_range(-1.0..1.0));
        let nrm = dir.norm();
        if nrm == 0.0 {
            continue;
        }
        dir /= nrm;
        let s = oracle.sample_derivatives(&(x0 + &dir * p.lipschitz_delta))?;
        l = l.max((&s.g_bar - &base.g_bar).norm() / p.lipschitz_delta);
        gamma = gamma.max(spectral_norm(&(&s.j_bar - &base.j_bar)) / p.lipschitz_delta);
    }
    Ok((l, gamma))
}

pub fn solve_with_oracle<O: Oracle + ?Sized>(
    oracle: &mut O,
    params: &SolverParams,
    seed: u64,
) -> Result<RunTrace, DriverError> {
    params.validate()?;
    let problem = oracle.problem().clone();
    let noise = *oracle.noise();
    let eps_o = params.eps_o();
    let h = problem.hessian_or_identity();
    let mut x = problem.x0.clone();
    let mut tau = TauState::new(params.tau0);
    let mut records = Vec::new();
    let mut message = None;

    let finish = |records: Vec<IterRecord>, status, message, counters, x: Vector, lipschitz| RunTrace {
        problem: problem.name.clone(),
        label: params.label(),
        records,
        status,
        message,
        counters,
        seed,
        params_hash: params.hash(),
        final_x: x,
        lipschitz,
        eps_o,
    };

    let mut adaptive = None;
    if params.variant == Variant::Adaptive {
        match estimate_lipschitz(oracle, &x, &params.adaptive, seed) {
            Ok((l, g)) => adaptive = Some(AdaptiveState::new(&params.adaptive, l, g, params.tau0)),
            Err(e) => {
                return Ok(finish(records, RunStatus::NonFinite, Some(e.to_string()), oracle.counters(), x, None));
            }
        }
    }
    let lipschitz = adaptive.map(|s| (s.l_est, s.gamma_est));

    let status = loop {
        let k = records.len();
        if k >= params.budgets.max_iters {
            break RunStatus::BudgetIters;
        }
        if oracle.counters().weighted_total >= params.budgets.max_weighted_evals {
            break RunStatus::BudgetEvals;
        }
        let counters_before = oracle.counters();
        let ev = match oracle.sample_both(&x) {
            Ok(ev) => ev,
            Err(e) => {
                message = Some(e.to_string());
                break RunStatus::NonFinite;
            }
        };
        let exact = if params.record_exact { problem.evaluate(&x).ok() } else { None };
        let sub = Subproblem { h: &h, g: &ev.g_bar, c: &ev.c_bar, j: &ev.j_bar };
        let c_norm = ev.c_bar.norm();
        let tau_prev = tau.tau;
        let branch = if c_norm <= eps_o { Branch::FeasibleBranch } else { Branch::InfeasibleBranch };
        let mut rec = IterRecord {
            k,
            x: x.clone(),
            noisy: ev.clone(),
            exact,
            branch,
            bundle: None,
            tau_prev,
            tau: tau_prev,
            delta_l: None,
            alpha: None,
            adaptive: None,
            line_search: None,
            counters_before,
            counters_after: counters_before,
        };
        let cfg = TangentialConfig {
            tau_prev,
            eps_o,
            eps_f: noise.eps_f,
            eps_c: noise.eps_c,
            inexactness: params.inexactness,
            max_iters: None,
        };

        let bundle = if branch == Branch::FeasibleBranch {
            let bundle = match tangential_step(&sub, &Vector::zeros(problem.n), &cfg, &params.tests, 0) {
                Ok(b) => b,
                Err(e) => {
                    message = Some(e.to_string());
                    rec.counters_after = oracle.counters();
                    records.push(rec);
                    break RunStatus::TestUnsatisfiable;
                }
            };
            let dl = model_reduction(tau_prev, &ev.g_bar, &ev.c_bar, &ev.j_bar, &bundle.d);
            rec.delta_l = Some(dl);
            rec.bundle = Some(bundle.clone());
            tau.keep(k);
            if dl <= eps_o {
                rec.counters_after = oracle.counters();
                records.push(rec);
                break RunStatus::EarlyStationary;
            }
            bundle
        } else {
            let tol_jc = params.tolerances.tol_jc * matrix_inf_norm(&ev.j_bar) * inf_norm(&ev.c_bar);
            let ns = match normal_step(
                &ev.c_bar,
                &ev.j_bar,
                &params.tests,
                params.inexactness,
                noise.eps_f,
                noise.eps_c,
                tol_jc,
            ) {
                Ok(ns) => ns,
                Err(StepError::ZeroInfeasibleStationarity) => {
                    rec.counters_after = oracle.counters();
                    records.push(rec);
                    break RunStatus::EarlyInfeasibleStationary;
                }
                Err(e) => {
                    message = Some(e.to_string());
                    rec.counters_after = oracle.counters();
                    records.push(rec);
                    break RunStatus::TestUnsatisfiable;
                }
            };
            let bundle = match tangential_step(&sub, &ns.v, &cfg, &params.tests, ns.cg_iters) {
                Ok(b) => b,
                Err(e) => {
                    message = Some(e.to_string());
                    rec.counters_after = oracle.counters();
                    records.push(rec);
                    break RunStatus::TestUnsatisfiable;
                }
            };
            match bundle.outcome {
                TestOutcome::Tt2Cond1 => {
                    let uhu = quad_form(&h, &bundle.u);
                    let curvature = uhu.max(params.tests.lambda_u * bundle.u.norm_squared());
                    let c_lin = (&ev.c_bar + &ev.j_bar * &bundle.v + &bundle.r).norm();
                    let trial = tau_trial(
                        ev.g_bar.dot(&bundle.d),
                        curvature,
                        c_norm,
                        c_lin,
                        params.tests.sigma_c,
                        params.tests.sigma_r,
                    );
                    tau.update(k, trial, params.sigma_tau);
                }
                _ => tau.keep(k),
            }
            rec.tau = tau.tau;
            rec.delta_l = Some(model_reduction(tau.tau, &ev.g_bar, &ev.c_bar, &ev.j_bar, &bundle.d));
            rec.bundle = Some(bundle.clone());
            bundle
        };
        let dl = rec.delta_l.expect("set above");

        if handle_degenerate(inf_norm(&bundle.d), params.tolerances.tol_d) == DegenerateDecision::Stop {
            rec.counters_after = oracle.counters();
            records.push(rec);
            break RunStatus::DegenerateDirection;
        }

        let alpha = match params.variant {
            Variant::Adaptive => {
                let st = adaptive.as_mut().expect("initialized for adaptive runs");
                let p = &params.adaptive;
                update_chi_zeta(st, p, &bundle.u, &bundle.v, &bundle.d, &h);
                let computed = xi_update(st, p, dl, tau.tau, &bundle.u, &bundle.v, &bundle.d)
                    .and_then(|xi_trial| {
                        adaptive_alpha(st, p, dl, tau.tau, &bundle.u, &bundle.v, &bundle.d).map(|c| (xi_trial, c))
                    });
                match computed {
                    Ok((xi_trial, choice)) => {
                        rec.adaptive = Some(AdaptiveRecord { state: *st, xi_trial, choice });
                        choice.alpha
                    }
                    Err(_) => {
                        rec.counters_after = oracle.counters();
                        records.push(rec);
                        break RunStatus::DegenerateDirection;
                    }
                }
            }
            Variant::LineSearch => {
                let ls = &params.line_search;
                let phi0 = merit_value(tau.tau, ev.f_bar, &ev.c_bar);
                let relax =
                    epsilon_ak(tau.tau, noise.eps_f, noise.eps_c, noise.eps_g, noise.eps_j, ls.alpha_u, bundle.d.norm());
                let t = tau.tau;
                let result = line_search_alpha(
                    |a| oracle.sample_values(&(&x + &bundle.d * a)).map(|s| merit_value(t, s.f_bar, &s.c_bar)),
                    phi0,
                    dl,
                    relax,
                    ls,
                );
                match result {
                    Ok(out) => {
                        rec.line_search = Some(LineSearchRecord {
                            phi0,
                            phi_accepted: out.phi,
                            relax,
                            backtracks: out.backtracks,
                        });
                        out.alpha
                    }
                    Err(e) => {
                        message = Some(match e {
                            LineSearchError::Exhausted(n) => format!("no acceptable step after {n} backtracks"),
                            LineSearchError::Eval(e) => e.to_string(),
                        });
                        rec.counters_after = oracle.counters();
                        records.push(rec);
                        break RunStatus::LineSearchFailure;
                    }
                }
            }
        };

        x.axpy(alpha, &bundle.d, 1.0);
        rec.alpha = Some(alpha);
        rec.counters_after = oracle.counters();
        records.push(rec);
    };

    Ok(finish(records, status, message, oracle.counters(), x, lipschitz))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::least_squares_multiplier;
    use crate::problems::builtin;

    fn kkt_errors(p: &ProblemSpec, x: &Vector) -> (f64, f64) {
        let e = p.evaluate(x).unwrap();
        let y = least_squares_multiplier(&e.j, &e.g);
        (inf_norm(&e.c), inf_norm(&(&e.g + e.j.transpose() * y)))
    }

    #[test]
    fn preset_values() {
        let p = SolverParams::preset(Variant::Adaptive, Optimism::Optimistic, Inexactness::inexact(1e-2), 1e-2, 1e-4);
        assert_eq!(p.noise.eps_g, 0.1);
        assert_eq!(p.eps_o(), 1e-4);
        assert_eq!(p.tests.lambda_u, 5e-9);
        assert_eq!(p.tests.sigma_jc, 1e2);
        assert_eq!(p.adaptive.theta, 1e4);
        assert_eq!(p.line_search.eta, 1e-3);
        assert_eq!(p.budgets.max_iters, 1000);
        assert!(p.validate().is_ok());
        let pes = SolverParams { optimism: Optimism::Pessimistic, ..p };
        assert_eq!(pes.eps_o(), 0.0);
        assert_ne!(pes.hash(), p.hash());
        assert_eq!(p.label(), "AdaSQP-opt-inexact");
    }

    #[test]
    fn degenerate_decision() {
        assert_eq!(handle_degenerate(0.0, 1e-14), DegenerateDecision::Stop);
        assert_eq!(handle_degenerate(1e-13, 1e-14), DegenerateDecision::Continue);
    }

    #[test]
    fn status_strings_round_trip() {
        for s in ALL_STATUSES {
            assert_eq!(RunStatus::parse(s.as_str()), Some(s));
        }
    }

    #[test]
    fn zero_noise_quad_linear_both_variants() {
        let p = builtin("quad-linear").unwrap();
        for variant in [Variant::Adaptive, Variant::LineSearch] {
            let mut params = SolverParams::preset(variant, Optimism::Optimistic, Inexactness::Exact, 0.0, 0.0);
            params.budgets.max_iters = 100;
            let trace = solve(&p, &params, 0).unwrap();
            let best = trace
                .iterates()
                .into_iter()
                .map(|x| kkt_errors(&p, x))
                .find(|(c, s)| *c <= 1e-8 && *s <= 1e-6);
            assert!(best.is_some(), "{variant:?}: {:?} after {}", trace.status, trace.records.len());
        }
    }

    #[test]
    fn iterate_update_identity() {
        let p = builtin("hs7").unwrap();
        let params = SolverParams::preset(Variant::LineSearch, Optimism::Optimistic, Inexactness::inexact(1e-2), 1e-2, 1e-2);
        let trace = solve(&p, &params, 3).unwrap();
        let xs = trace.iterates();
        for (i, r) in trace.records.iter().enumerate() {
            if let (Some(a), Some(b)) = (r.alpha, &r.bundle) {
                let step = xs[i + 1] - xs[i];
                assert!((step - &b.d * a).amax() <= 1e-15 * (1.0 + xs[i].amax()));
            }
        }
    }

    #[test]
    fn ground_truth_recording_does_not_change_iterates() {
        let p = builtin("hs48").unwrap();
        for variant in [Variant::Adaptive, Variant::LineSearch] {
            let on = SolverParams::preset(variant, Optimism::Pessimistic, Inexactness::inexact(1e-2), 1e-2, 1e-2);
            let off = SolverParams { record_exact: false, ..on };
            let (a, b) = (solve(&p, &on, 11).unwrap(), solve(&p, &off, 11).unwrap());
            assert_eq!(a.final_x, b.final_x);
            assert_eq!(a.status, b.status);
            assert!(a.records.iter().all(|r| r.exact.is_some()));
            assert!(b.records.iter().all(|r| r.exact.is_none()));
        }
    }

    #[test]
    fn budgets_are_respected() {
        let p = builtin("rosenbrock-sphere-4").unwrap();
        let mut params = SolverParams::preset(Variant::LineSearch, Optimism::Optimistic, Inexactness::Exact, 1e-1, 1e-1);
        params.budgets = Budgets { max_iters: 1000, max_weighted_evals: 50 };
        let trace = solve(&p, &params, 1).unwrap();
        if trace.status == RunStatus::BudgetEvals {
            let last = trace.records.last().unwrap();
            let last_cost = last.counters_after.weighted_total - last.counters_before.weighted_total;
            assert!(trace.counters.weighted_total <= 50 + last_cost);
        }
        params.budgets = Budgets { max_iters: 3, max_weighted_evals: 10_000 };
        let trace = solve(&p, &params, 1).unwrap();
        assert!(trace.records.len() <= 3);
    }

    #[test]
    fn tau_is_monotone() {
        let p = builtin("unit-sphere-5").unwrap();
        let params = SolverParams::preset(Variant::Adaptive, Optimism::Optimistic, Inexactness::inexact(1e-2), 1e-2, 1e-2);
        let trace = solve(&p, &params, 5).unwrap();
        assert!(trace.records.windows(2).all(|w| w[1].tau <= w[0].tau));
    }
}

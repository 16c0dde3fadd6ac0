//! Verification suites that need the solver: they run it, then hand the
//! traces to the independent checks in [`crate::verify`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::driver::{solve, solve_with_oracle, Optimism, RunStatus, SolverParams, Variant};
use crate::fixtures::{infeasible_stationary_problem, near_kkt_problem, ProjectedJacobianOracle};
use crate::linalg::{spectral_norm, Vector};
use crate::problems::{builtin, builtin_names, builtin_registry};
use crate::steps::Inexactness;
use crate::verify::{
    assert_trace_invariants, cauchy_perturbation_scan, fd_check, tangential_gap_scan, Report, VerifyError,
    DEFAULT_SCAN_EPS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    All,
    Fd,
    Scans,
    Invariants,
    Early,
}

impl Suite {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "all" => Some(Suite::All),
            "fd" => Some(Suite::Fd),
            "scans" => Some(Suite::Scans),
            "invariants" => Some(Suite::Invariants),
            "early" => Some(Suite::Early),
            _ => None,
        }
    }
}

pub const EARLY_SEEDS: u64 = 20;
pub const SWEEP_RUNS: usize = 100;

pub fn run_suite(suite: Suite) -> Vec<Report> {
    let mut out = Vec::new();
    let want = |s: Suite| suite == Suite::All || suite == s;
    if want(Suite::Fd) {
        out.push(fd_registry_report());
    }
    if want(Suite::Scans) {
        out.extend(perturbation_reports());
    }
    if want(Suite::Invariants) {
        out.push(invariant_sweep(SWEEP_RUNS, 0x1a7e));
    }
    if want(Suite::Early) {
        for eps in [1e-2, 1e-4] {
            for variant in [Variant::Adaptive, Variant::LineSearch] {
                out.push(early_stationary_report(variant, eps));
                out.push(infeasible_stationary_report(variant, eps));
            }
        }
    }
    out
}

/// Central differences against analytic derivatives at every registry start.
pub fn fd_registry_report() -> Report {
    let h = 1e-6;
    let mut r = Report::new("fd_check", json!({ "h": h }));
    for p in builtin_registry() {
        match fd_check(&p, &p.x0, h) {
            Ok(e) => {
                let ok = e.grad <= 1e-5 * (1.0 + p.evaluate(&p.x0).map(|v| v.g.amax()).unwrap_or(0.0)) && e.jac <= 1e-5;
                r.observe(json!({ "problem": p.name, "grad": e.grad, "jac": e.jac }), ok);
            }
            Err(e) => r.observe(json!({ "problem": p.name, "error": e.to_string() }), false),
        }
    }
    r
}

/// Cauchy scan at the quad-linear start and tangential scan at a feasible
/// quad-linear point.
pub fn perturbation_reports() -> Vec<Report> {
    let p = builtin("quad-linear").expect("registry problem");
    let feasible = Vector::from_column_slice(&[1.0, -1.0, 0.5, 0.5]);
    let as_report = |check: &str, r: Result<crate::verify::PerturbationReport, VerifyError>| match r {
        Ok(rep) => rep.to_report(check, &p.name),
        Err(e) => {
            let mut rep = Report::new(check, json!({ "problem": p.name }));
            rep.observe(json!({ "error": e.to_string() }), false);
            rep
        }
    };
    vec![
        as_report("cauchy_perturbation_scan", cauchy_perturbation_scan(&p, &p.x0, &DEFAULT_SCAN_EPS)),
        as_report("tangential_gap_scan", tangential_gap_scan(&p, &feasible, &DEFAULT_SCAN_EPS)),
    ]
}

/// Randomized problems × noise × variants × seeds, each trace re-checked.
pub fn invariant_sweep(runs: usize, seed: u64) -> Report {
    let names = builtin_names();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jobs: Vec<_> = (0..runs)
        .map(|i| {
            let name = names[rng.gen_range(0..names.len())];
            let eps = [0.0, 1e-8, 1e-4, 1e-2, 1e-1][rng.gen_range(0..5)];
            let variant = if i % 2 == 0 { Variant::Adaptive } else { Variant::LineSearch };
            let optimism = if rng.gen_bool(0.5) { Optimism::Optimistic } else { Optimism::Pessimistic };
            let exactness = if rng.gen_bool(0.5) { Inexactness::Exact } else { Inexactness::inexact(1e-2) };
            (name, eps, SolverParams::preset(variant, optimism, exactness, eps, eps), i as u64)
        })
        .collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|(name, eps, params, s)| {
            let p = builtin(name).expect("registry problem");
            let trace = solve(&p, params, *s).expect("valid preset");
            let violations = assert_trace_invariants(&trace, &p, params);
            json!({
                "problem": name,
                "eps": eps,
                "solver": params.label(),
                "seed": s,
                "status": trace.status.as_str(),
                "iters": trace.records.len(),
                "violations": violations,
            })
        })
        .collect();
    let mut r = Report::new("assert_trace_invariants", json!({ "runs": runs, "seed": seed }));
    for obs in results {
        let ok = obs["violations"].as_array().is_some_and(|v| v.is_empty());
        r.observe(obs, ok);
    }
    r
}

/// Optimistic runs on the near-KKT fixture must exit through the early
/// stationary test with exact `‖c‖₂ ≤ 2ε_c`.
pub fn early_stationary_report(variant: Variant, eps: f64) -> Report {
    let p = near_kkt_problem(eps, 0.25);
    let params = SolverParams::preset(variant, Optimism::Optimistic, Inexactness::inexact(1e-2), eps, eps);
    let mut r = Report::new(
        "early_stationary_exit",
        json!({ "solver": params.label(), "eps_f": eps, "eps_c": eps, "seeds": EARLY_SEEDS }),
    );
    for seed in 0..EARLY_SEEDS {
        let trace = solve(&p, &params, seed).expect("valid preset");
        let x = &trace.records.last().expect("at least one record").x;
        let c = p.evaluate(x).expect("fixture evaluates").c.norm();
        let ok = trace.status == RunStatus::EarlyStationary && c <= 2.0 * eps;
        r.observe(
            json!({ "seed": seed, "status": trace.status.as_str(), "iters": trace.records.len(), "c_norm": c, "bound": 2.0 * eps }),
            ok,
        );
    }
    r
}

/// Runs on the projected-Jacobian fixture must exit through the infeasible
/// stationary test with exact `‖Jᵀc‖₂ ≤ κ̂_c ε_J + (κ̂_J + ε_J) ε_c`, where
/// `κ̂_c = ‖c‖₂` and `κ̂_J = ‖J‖₂` are measured at the exit point.
pub fn infeasible_stationary_report(variant: Variant, eps_c: f64) -> Report {
    let params = SolverParams::preset(variant, Optimism::Optimistic, Inexactness::inexact(1e-2), eps_c, eps_c);
    let noise = params.resolved_noise();
    let p = infeasible_stationary_problem(noise.eps_j);
    let mut r = Report::new(
        "infeasible_stationary_exit",
        json!({ "solver": params.label(), "eps_c": eps_c, "eps_j": noise.eps_j, "seeds": EARLY_SEEDS }),
    );
    for seed in 0..EARLY_SEEDS {
        let mut oracle = ProjectedJacobianOracle::new(p.clone(), noise, seed).expect("valid noise");
        let trace = solve_with_oracle(&mut oracle, &params, seed).expect("valid preset");
        let x = &trace.records.last().expect("at least one record").x;
        let e = p.evaluate(x).expect("fixture evaluates");
        let lhs = (e.j.transpose() * &e.c).norm();
        let bound = e.c.norm() * noise.eps_j + (spectral_norm(&e.j) + noise.eps_j) * noise.eps_c;
        let ok = trace.status == RunStatus::EarlyInfeasibleStationary && lhs <= bound;
        r.observe(
            json!({ "seed": seed, "status": trace.status.as_str(), "jtc_norm": lhs, "bound": bound }),
            ok,
        );
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names() {
        assert_eq!(Suite::parse("all"), Some(Suite::All));
        assert_eq!(Suite::parse("nope"), None);
    }

    #[test]
    fn fd_report_passes() {
        assert!(fd_registry_report().pass);
    }

    #[test]
    fn small_sweep_is_clean() {
        let r = invariant_sweep(8, 1);
        assert!(r.pass, "{}", r.to_json());
    }
}

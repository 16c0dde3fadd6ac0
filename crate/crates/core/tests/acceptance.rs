use std::collections::BTreeMap;
use std::io::Write;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use noisy_sqp::driver::{solve, Budgets, Variant};
use noisy_sqp::harness::suite::{
    early_stationary_report, infeasible_stationary_report, invariant_sweep, perturbation_reports, EARLY_SEEDS,
    SWEEP_RUNS,
};
use noisy_sqp::harness::{
    best_iterate, performance_profile, run_grid, CostField, ExperimentConfig, LicqMode, RunRecord, VariantSpec,
};
use noisy_sqp::linalg::{cg_steihaug, minres_solve, Matrix, Vector};
use noisy_sqp::problems::{builtin, builtin_names, builtin_registry, ProblemSpec};
use noisy_sqp::steps::Inexactness;
use noisy_sqp::verify::Report;

/// Written straight to stdout so the line survives libtest's capture.
fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    let line = format!("criterion {id} {name}: {} ({detail})\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn full_rank_names() -> Vec<String> {
    builtin_registry().into_iter().filter(|p| p.full_rank).map(|p| p.name).collect()
}

fn failing(reports: &[Report]) -> Vec<String> {
    reports
        .iter()
        .filter(|r| !r.pass)
        .map(|r| serde_json::to_string(&r.to_json()).unwrap())
        .collect()
}

/// Dense KKT solution when f is quadratic and c is affine, recovered from
/// the oracle: `q = ∇f(0)`, `Q eᵢ = ∇f(eᵢ) − q`, `A = J`, `b = −c(0)`.
fn quadratic_kkt_oracle(p: &ProblemSpec) -> Option<(DVector<f64>, DVector<f64>)> {
    let (n, m) = (p.n, p.m);
    let at = |x: &Vector| p.evaluate(x).ok();
    let e0 = at(&Vector::zeros(n))?;
    let mut q_mat = DMatrix::zeros(n, n);
    for i in 0..n {
        let ei = at(&Vector::from_fn(n, |r, _| if r == i { 1.0 } else { 0.0 }))?;
        if (&ei.j - &e0.j).amax() > 0.0 {
            return None;
        }
        q_mat.set_column(i, &(&ei.g - &e0.g));
    }
    // Reject anything that is not quadratic-affine.
    let probe = Vector::from_fn(n, |i, _| 0.3 + 0.17 * i as f64);
    let ep = at(&probe)?;
    if (&ep.g - (&q_mat * &probe + &e0.g)).amax() > 1e-12 || (&ep.c - (&e0.j * &probe + &e0.c)).amax() > 1e-12 {
        return None;
    }
    let mut k = DMatrix::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(&q_mat);
    k.view_mut((0, n), (n, m)).copy_from(&e0.j.transpose());
    k.view_mut((n, 0), (m, n)).copy_from(&e0.j);
    let mut rhs = DVector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&(-&e0.g));
    rhs.rows_mut(n, m).copy_from(&(-&e0.c));
    let sol = k.full_piv_lu().solve(&rhs)?;
    Some((sol.rows(0, n).into_owned(), sol.rows(n, m).into_owned()))
}

#[test]
fn criterion_1_zero_noise_convergence() {
    let start = Instant::now();
    let mut problems_out = Vec::new();
    let mut oracle_checks = 0;
    for name in full_rank_names() {
        let p = builtin(&name).unwrap();
        let oracle = quadratic_kkt_oracle(&p).map(|(x, _)| x).or_else(|| p.known_kkt.as_ref().map(|k| k.x.clone()));
        for spec in VariantSpec::four(Inexactness::Exact) {
            let params = spec.params(0.0, 0.0, Budgets { max_iters: 500, max_weighted_evals: u64::MAX });
            let trace = solve(&p, &params, 0).unwrap();
            let best = best_iterate(&trace, &p, 0.0, 0.0);
            let label = params.label();
            let Some(b) = best else {
                problems_out.push(format!("{name}/{label}: no evaluable iterate"));
                continue;
            };
            if b.feas_err > 1e-8 || b.stat_err > 1e-6 {
                problems_out.push(format!("{name}/{label}: feas {:e} stat {:e}", b.feas_err, b.stat_err));
            }
            if let Some(x_star) = &oracle {
                oracle_checks += 1;
                let x = trace.iterates()[b.index];
                let dist = (x - x_star).amax();
                if dist > 1e-5 * (1.0 + x_star.amax()) {
                    problems_out.push(format!("{name}/{label}: {dist:e} from the KKT point"));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = problems_out.is_empty() && elapsed <= Duration::from_secs(10);
    verdict(
        1,
        "zero-noise convergence",
        pass,
        &format!("{oracle_checks} oracle checks, {:.2?}, failures {problems_out:?}", elapsed),
    );
    assert!(pass);
}

fn success_rates(records: &[RunRecord]) -> BTreeMap<String, (usize, usize)> {
    let mut rates = BTreeMap::new();
    for r in records {
        let e: &mut (usize, usize) = rates.entry(r.solver_label()).or_default();
        e.1 += 1;
        e.0 += usize::from(r.success);
    }
    rates
}

#[test]
fn criterion_2_noise_scaled_success() {
    let start = Instant::now();
    let mut rates = BTreeMap::new();
    for exactness in [Inexactness::Exact, Inexactness::inexact(1e-2)] {
        let cfg = ExperimentConfig {
            problems: full_rank_names(),
            noise_grid: vec![(1e-2, 1e-2), (1e-4, 1e-4)],
            variants: VariantSpec::four(exactness),
            seeds: (0..5).collect(),
            budgets: Budgets::default(),
            licq_mode: LicqMode::Original,
            output_dir: None,
        };
        rates.extend(success_rates(&run_grid(&cfg).unwrap()));
    }
    let elapsed = start.elapsed();
    let pass = rates.values().all(|&(ok, n)| ok * 5 >= n * 4) && elapsed <= Duration::from_secs(120);
    let detail: Vec<String> = rates.iter().map(|(k, (ok, n))| format!("{k} {ok}/{n}")).collect();
    verdict(2, "noise-scaled success", pass, &format!("{}, {:.2?}", detail.join(", "), elapsed));
    assert!(pass);
}

#[test]
fn criterion_3_early_termination_feasibility() {
    let mut reports = Vec::new();
    for eps in [1e-2, 1e-4] {
        for variant in [Variant::Adaptive, Variant::LineSearch] {
            reports.push(early_stationary_report(variant, eps));
        }
    }
    let bad = failing(&reports);
    let pass = bad.is_empty();
    verdict(3, "early-termination feasibility", pass, &format!("{} runs, failures {bad:?}", reports.len() as u64 * EARLY_SEEDS));
    assert!(pass);
}

#[test]
fn criterion_4_infeasible_stationary_bound() {
    let mut reports = Vec::new();
    for eps in [1e-2, 1e-4] {
        for variant in [Variant::Adaptive, Variant::LineSearch] {
            reports.push(infeasible_stationary_report(variant, eps));
        }
    }
    let bad = failing(&reports);
    let pass = bad.is_empty();
    verdict(4, "infeasible-stationary exit bound", pass, &format!("{} runs, failures {bad:?}", reports.len() as u64 * EARLY_SEEDS));
    assert!(pass);
}

#[test]
fn criterion_5_monotonicity_suite() {
    let r = invariant_sweep(SWEEP_RUNS, 0x5eed);
    let violations: usize = r
        .observations
        .iter()
        .map(|o| o["violations"].as_array().map_or(0, |v| v.len()))
        .sum();
    let pass = r.pass && r.observations.len() == SWEEP_RUNS && violations == 0;
    verdict(5, "monotonicity suite", pass, &format!("{} runs, {violations} violations", r.observations.len()));
    assert!(pass, "{}", r.to_json());
}

fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0)).qr().q()
}

/// `U diag(s) Vᵀ` with the given singular values, and its pseudo-inverse
/// `V diag(1/s) Uᵀ` from the same factors.
fn with_singular_values(rng: &mut ChaCha8Rng, m: usize, n: usize, s: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let u = random_orthogonal(rng, m);
    let v = random_orthogonal(rng, n);
    let mut d = DMatrix::zeros(m, n);
    let mut d_inv = DMatrix::zeros(n, m);
    for (i, &si) in s.iter().enumerate() {
        d[(i, i)] = si;
        d_inv[(i, i)] = 1.0 / si;
    }
    (&u * d * v.transpose(), &v * d_inv * u.transpose())
}

fn spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let q = random_orthogonal(rng, n);
    let l = DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| rng.gen_range(0.5..5.0)));
    let h = &q * l * q.transpose();
    (&h + h.transpose()) * 0.5
}

fn rel_inf(x: &DVector<f64>, oracle: &DVector<f64>) -> f64 {
    (x - oracle).amax() / oracle.amax().max(f64::MIN_POSITIVE)
}

#[test]
fn criterion_6_solver_vs_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_minres = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(1..=20);
        let m = rng.gen_range(0..=(25 - n).min(n));
        let h = spd(&mut rng, n);
        let s: Vec<f64> = (0..m).map(|_| rng.gen_range(0.5..2.0)).collect();
        let (j, _) = with_singular_values(&mut rng, m, n, &s);
        let mut k = DMatrix::zeros(n + m, n + m);
        k.view_mut((0, 0), (n, n)).copy_from(&h);
        k.view_mut((0, n), (n, m)).copy_from(&j.transpose());
        k.view_mut((n, 0), (m, n)).copy_from(&j);
        let b = DVector::from_fn(n + m, |_, _| rng.gen_range(-1.0..1.0));
        let oracle = k.clone().full_piv_lu().solve(&b).expect("nonsingular KKT");
        let rep = minres_solve(|x: &Vector| &k * x, &b, 1e-13 * b.amax(), 20 * (n + m));
        worst_minres = worst_minres.max(rel_inf(&rep.solution, &oracle));
    }

    let mut worst_cg = 0.0f64;
    for i in 0..100 {
        let (h, g, oracle): (Matrix, Vector, DVector<f64>) = if i % 2 == 0 {
            // Interior trust-region solution of an SPD model.
            let n = rng.gen_range(1..=25);
            let h = spd(&mut rng, n);
            let g = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            let sol = h.clone().full_piv_lu().solve(&(-&g)).unwrap();
            (h, g, sol)
        } else {
            // Normal-step form JᵀJ, Jᵀc, possibly rank deficient: the
            // minimum-norm least-squares step −J⁺c.
            let n = rng.gen_range(2..=20);
            let m = rng.gen_range(1..=(25 - n));
            let rank = rng.gen_range(1..=m.min(n));
            let s: Vec<f64> = (0..rank).map(|_| rng.gen_range(0.5..2.0)).collect();
            let (j, j_pinv) = with_singular_values(&mut rng, m, n, &s);
            let c = DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0));
            let sol = -j_pinv * &c;
            (j.transpose() * &j, j.transpose() * c, sol)
        };
        let tol = 1e-14 * g.amax();
        let out = cg_steihaug(|v: &Vector| &h * v, &g, 1e3, |_, r: &Vector| r.amax() <= tol, 10 * g.len());
        assert!(!out.hit_boundary);
        worst_cg = worst_cg.max(rel_inf(&out.v, &oracle));
    }
    let pass = worst_minres <= 1e-8 && worst_cg <= 1e-8;
    verdict(
        6,
        "solver-vs-oracle equivalence",
        pass,
        &format!("worst relative error MINRES {worst_minres:e}, CG-Steihaug {worst_cg:e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_7_perturbation_scaling() {
    let reports = perturbation_reports();
    let zero_exact = reports.iter().all(|r| r.observations.first().is_some_and(|o| o["error"] == 0.0));
    let bad = failing(&reports);
    let pass = bad.is_empty() && zero_exact && reports.len() == 2;
    verdict(7, "perturbation scaling", pass, &format!("{} scans, failures {bad:?}", reports.len()));
    assert!(pass);
}

#[test]
fn criterion_8_rank_deficient_progress() {
    let names: Vec<String> = builtin_names().iter().map(|s| s.to_string()).collect();
    let cfg = ExperimentConfig {
        problems: names,
        noise_grid: vec![(1e-4, 1e-4)],
        variants: VariantSpec::four(Inexactness::inexact(1e-2)),
        seeds: (0..5).collect(),
        budgets: Budgets::default(),
        licq_mode: LicqMode::Duplicated,
        output_dir: None,
    };
    let records = run_grid(&cfg).unwrap();
    let ok = records.iter().filter(|r| r.best_infeas_stat_err <= 1e-2).count();
    let pass = !records.is_empty() && ok * 5 >= records.len() * 4;
    verdict(8, "rank-deficient progress", pass, &format!("{ok}/{} instances", records.len()));
    assert!(pass);
}

fn record(problem: &str, variant: &str, evals: u64) -> RunRecord {
    RunRecord {
        problem: problem.into(),
        variant: variant.into(),
        optimism: "opt".into(),
        exactness: "exact".into(),
        eps_f: 0.0,
        eps_c: 0.0,
        seed: 0,
        licq_mode: "original".into(),
        status: "budget_iters".into(),
        iters: 1,
        weighted_evals: evals,
        minres_iters: 0,
        cg_iters: 0,
        best_feas_err: 0.0,
        best_stat_err: 0.0,
        best_infeas_stat_err: 0.0,
        terminated_early: false,
        success: true,
    }
}

#[test]
fn criterion_9_determinism_and_profile() {
    let dir = tempfile::tempdir().unwrap();
    let csv = |sub: &str| {
        let cfg = ExperimentConfig {
            problems: vec!["hs6".into(), "unit-circle".into(), "quad-eq-5".into()],
            noise_grid: vec![(1e-2, 1e-2), (1e-4, 1e-4)],
            variants: VariantSpec::four(Inexactness::inexact(1e-2)),
            seeds: vec![0, 1, 2],
            budgets: Budgets::default(),
            licq_mode: LicqMode::Original,
            output_dir: Some(dir.path().join(sub)),
        };
        run_grid(&cfg).unwrap();
        std::fs::read(dir.path().join(sub).join("results.csv")).unwrap()
    };
    let (a, b) = (csv("a"), csv("b"));
    let identical = a == b && !a.is_empty();

    let records = vec![record("p1", "A", 10), record("p2", "A", 20), record("p1", "B", 20), record("p2", "B", 10)];
    let table = performance_profile(&records, CostField::WeightedEvals).unwrap();
    let sa = table.solver_index(&records[0].solver_label()).unwrap();
    let (r1, r2) = (table.rho(sa, 1.0), table.rho(sa, 2.0));
    let profile_ok = r1 == 0.5 && r2 == 1.0;

    let pass = identical && profile_ok;
    verdict(
        9,
        "harness determinism and profile math",
        pass,
        &format!("{} CSV bytes identical: {identical}, rho_A(1) = {r1}, rho_A(2) = {r2}", a.len()),
    );
    assert!(pass);
}

//! Experiment grids: best-iterate selection, the success rule, concurrent
//! execution and CSV persistence.

mod profile;
pub mod suite;

pub use profile::{performance_profile, CostField, ProfileError, ProfileTable};

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::driver::{solve, Budgets, Optimism, RunStatus, RunTrace, SolverParams, Variant};
use crate::linalg::{inf_norm, least_squares_multiplier, Vector};
use crate::noise::NoiseSpec;
use crate::problems::{duplicate_last_constraint, load_problem, ProblemError, ProblemSpec};
use crate::steps::Inexactness;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LicqMode {
    #[default]
    Original,
    Duplicated,
}

impl LicqMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            LicqMode::Original => "original",
            LicqMode::Duplicated => "duplicated",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "original" => Some(LicqMode::Original),
            "duplicated" => Some(LicqMode::Duplicated),
            _ => None,
        }
    }

    pub fn apply(&self, p: ProblemSpec) -> ProblemSpec {
        match self {
            LicqMode::Original => p,
            LicqMode::Duplicated => duplicate_last_constraint(&p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub variant: Variant,
    pub optimism: Optimism,
    /// `"exact"` or `"inexact:{kappa}"`.
    #[serde(with = "exactness_label")]
    pub exactness: Inexactness,
}

mod exactness_label {
    use super::Inexactness;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(i: &Inexactness, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&i.label())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Inexactness, D::Error> {
        let s = String::deserialize(d)?;
        Inexactness::parse(&s).ok_or_else(|| D::Error::custom(format!("bad exactness `{s}`")))
    }
}

impl VariantSpec {
    /// `{AdaSQP, LSSQP} × {opt, pes}` at one exactness level.
    pub fn four(exactness: Inexactness) -> Vec<Self> {
        let mut out = Vec::new();
        for variant in [Variant::Adaptive, Variant::LineSearch] {
            for optimism in [Optimism::Optimistic, Optimism::Pessimistic] {
                out.push(VariantSpec { variant, optimism, exactness });
            }
        }
        out
    }

    pub fn params(&self, eps_f: f64, eps_c: f64, budgets: Budgets) -> SolverParams {
        let mut p = SolverParams::preset(self.variant, self.optimism, self.exactness, eps_f, eps_c);
        p.budgets = budgets;
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Registry names or paths to `.qp.json` files.
    pub problems: Vec<String>,
    /// `(ε_f, ε_c)` pairs; derivative noise is derived.
    pub noise_grid: Vec<(f64, f64)>,
    pub variants: Vec<VariantSpec>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default)]
    pub licq_mode: LicqMode,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.problems.is_empty() || self.variants.is_empty() || self.seeds.is_empty() || self.noise_grid.is_empty() {
            return bad("problems, noise_grid, variants and seeds must be nonempty");
        }
        if self.noise_grid.iter().any(|&(f, c)| !(f >= 0.0 && c >= 0.0 && f.is_finite() && c.is_finite())) {
            return bad("noise levels must be finite and nonnegative");
        }
        Ok(())
    }
}

/// One row of the results CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub problem: String,
    pub variant: String,
    pub optimism: String,
    pub exactness: String,
    pub eps_f: f64,
    pub eps_c: f64,
    pub seed: u64,
    pub licq_mode: String,
    pub status: String,
    pub iters: usize,
    pub weighted_evals: u64,
    pub minres_iters: usize,
    pub cg_iters: usize,
    pub best_feas_err: f64,
    pub best_stat_err: f64,
    pub best_infeas_stat_err: f64,
    pub terminated_early: bool,
    pub success: bool,
}

impl RunRecord {
    /// `AdaSQP-opt-exact` style solver label.
    pub fn solver_label(&self) -> String {
        format!("{}-{}-{}", self.variant, self.optimism, self.exactness)
    }

    fn sort_key(&self) -> (String, String, String, String, u64, u64, u64, String) {
        (
            self.problem.clone(),
            self.variant.clone(),
            self.optimism.clone(),
            self.exactness.clone(),
            self.eps_f.to_bits(),
            self.eps_c.to_bits(),
            self.seed,
            self.licq_mode.clone(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestIterate {
    pub index: usize,
    pub feas_err: f64,
    pub stat_err: f64,
    pub infeas_stat_err: f64,
    /// `‖y‖_∞` of the least-squares multiplier at the chosen iterate.
    pub y_inf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterateErrors {
    pub feas_err: f64,
    pub stat_err: f64,
    pub infeas_stat_err: f64,
    pub y_inf: f64,
}

/// Exact errors at `x` with the least-squares multiplier from exact data.
pub fn iterate_errors(problem: &ProblemSpec, x: &Vector) -> Result<IterateErrors, ProblemError> {
    let e = problem.evaluate(x)?;
    let y = least_squares_multiplier(&e.j, &e.g);
    Ok(IterateErrors {
        feas_err: inf_norm(&e.c),
        stat_err: inf_norm(&(&e.g + e.j.transpose() * &y)),
        infeas_stat_err: inf_norm(&(e.j.transpose() * &e.c)),
        y_inf: inf_norm(&y),
    })
}

/// Chooses among per-iterate errors: the least stationarity error among
/// iterates with `feas ≤ 2max{ε_c, ε_f}`, else the least feasibility error.
/// Ties go to the smaller index.
pub fn select_best(errors: &[IterateErrors], eps_c: f64, eps_f: f64) -> Option<BestIterate> {
    let bound = (2.0 * eps_c.max(eps_f)).max(SUCCESS_FEAS_FLOOR);
    let pick = |key: &dyn Fn(&IterateErrors) -> f64, filter: &dyn Fn(&IterateErrors) -> bool| {
        errors
            .iter()
            .enumerate()
            .filter(|(_, e)| filter(e))
            .fold(None::<(usize, f64)>, |best, (i, e)| match best {
                Some((_, b)) if b <= key(e) => best,
                _ => Some((i, key(e))),
            })
            .map(|(i, _)| i)
    };
    let index = pick(&|e| e.stat_err, &|e| e.feas_err <= bound).or_else(|| pick(&|e| e.feas_err, &|_| true))?;
    let e = errors[index];
    Some(BestIterate {
        index,
        feas_err: e.feas_err,
        stat_err: e.stat_err,
        infeas_stat_err: e.infeas_stat_err,
        y_inf: e.y_inf,
    })
}

/// Best iterate of a run, considering `x_0, …, x_K` (only up to the exit
/// iterate when the run terminated early).
pub fn best_iterate(trace: &RunTrace, problem: &ProblemSpec, eps_c: f64, eps_f: f64) -> Option<BestIterate> {
    let errors: Vec<IterateErrors> = trace
        .iterates()
        .into_iter()
        .filter_map(|x| iterate_errors(problem, x).ok())
        .collect();
    select_best(&errors, eps_c, eps_f)
}

/// Lower limits on the success thresholds so that zero-noise runs can
/// succeed in floating point.
pub const SUCCESS_FEAS_FLOOR: f64 = 1e-8;
pub const SUCCESS_STAT_FLOOR: f64 = 1e-6;

/// `‖c‖_∞ ≤ 2max{ε_c, ε_f}` and `‖∇f + Jᵀy‖_∞ ≤ 2(ε_g + ‖y‖_∞ε_J)`, each
/// bound floored at [`SUCCESS_FEAS_FLOOR`] / [`SUCCESS_STAT_FLOOR`].
pub fn success(feas_err: f64, stat_err: f64, y_inf: f64, eps: &NoiseSpec) -> bool {
    let feas_bound = (2.0 * eps.eps_c.max(eps.eps_f)).max(SUCCESS_FEAS_FLOOR);
    let stat_bound = (2.0 * (eps.eps_g + y_inf * eps.eps_j)).max(SUCCESS_STAT_FLOOR);
    feas_err <= feas_bound && stat_err <= stat_bound
}

/// A single run of the grid, summarized.
pub fn run_one(
    problem: &ProblemSpec,
    spec: &VariantSpec,
    eps_f: f64,
    eps_c: f64,
    seed: u64,
    budgets: Budgets,
    licq_mode: LicqMode,
) -> RunRecord {
    let params = spec.params(eps_f, eps_c, budgets);
    let base = RunRecord {
        problem: problem.name.clone(),
        variant: spec.variant.label().to_string(),
        optimism: spec.optimism.label().to_string(),
        exactness: spec.exactness.label(),
        eps_f,
        eps_c,
        seed,
        licq_mode: licq_mode.as_str().to_string(),
        status: String::new(),
        iters: 0,
        weighted_evals: 0,
        minres_iters: 0,
        cg_iters: 0,
        best_feas_err: f64::NAN,
        best_stat_err: f64::NAN,
        best_infeas_stat_err: f64::NAN,
        terminated_early: false,
        success: false,
    };
    let trace = match solve(problem, &params, seed) {
        Ok(t) => t,
        Err(e) => return RunRecord { status: format!("invalid: {e}"), ..base },
    };
    let best = best_iterate(&trace, problem, eps_c, eps_f);
    let noise = params.resolved_noise();
    let ok = trace.status == RunStatus::EarlyStationary
        || best.map(|b| success(b.feas_err, b.stat_err, b.y_inf, &noise)).unwrap_or(false);
    RunRecord {
        status: trace.status.as_str().to_string(),
        iters: trace.records.len(),
        weighted_evals: trace.counters.weighted_total,
        minres_iters: trace.minres_iters(),
        cg_iters: trace.cg_iters(),
        best_feas_err: best.map_or(f64::NAN, |b| b.feas_err),
        best_stat_err: best.map_or(f64::NAN, |b| b.stat_err),
        best_infeas_stat_err: best.map_or(f64::NAN, |b| b.infeas_stat_err),
        terminated_early: trace.status.is_early(),
        success: ok,
        ..base
    }
}

/// Runs every (problem × variant × noise × seed) combination concurrently and
/// returns the records in canonical order. Writes `results.csv` into
/// `output_dir` when one is configured.
pub fn run_grid(config: &ExperimentConfig) -> Result<Vec<RunRecord>, HarnessError> {
    config.validate()?;
    let problems: Vec<ProblemSpec> = config
        .problems
        .iter()
        .map(|p| load_problem(p).map(|s| config.licq_mode.apply(s)))
        .collect::<Result<_, _>>()?;

    let mut jobs = Vec::new();
    for p in &problems {
        for v in &config.variants {
            for &(eps_f, eps_c) in &config.noise_grid {
                for &seed in &config.seeds {
                    jobs.push((p, v, eps_f, eps_c, seed));
                }
            }
        }
    }
    let mut records: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(p, v, eps_f, eps_c, seed)| run_one(p, v, eps_f, eps_c, seed, config.budgets, config.licq_mode))
        .collect();
    records.sort_by_key(|r| r.sort_key());

    if let Some(dir) = &config.output_dir {
        fs::create_dir_all(dir)?;
        write_results_csv(&dir.join("results.csv"), &records)?;
    }
    Ok(records)
}

pub const CSV_COLUMNS: [&str; 18] = [
    "problem",
    "variant",
    "optimism",
    "exactness",
    "eps_f",
    "eps_c",
    "seed",
    "licq_mode",
    "status",
    "iters",
    "weighted_evals",
    "minres_iters",
    "cg_iters",
    "best_feas_err",
    "best_stat_err",
    "best_infeas_stat_err",
    "terminated_early",
    "success",
];

/// 17 significant digits, enough for an exact round trip.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

fn parse_float(s: &str) -> Result<f64, HarnessError> {
    match s {
        "nan" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s.parse().map_err(|_| HarnessError::Config(format!("bad float `{s}`"))),
    }
}

pub fn write_results<W: io::Write>(w: W, records: &[RunRecord]) -> Result<(), HarnessError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_COLUMNS)?;
    for r in records {
        out.write_record([
            r.problem.clone(),
            r.variant.clone(),
            r.optimism.clone(),
            r.exactness.clone(),
            format_float(r.eps_f),
            format_float(r.eps_c),
            r.seed.to_string(),
            r.licq_mode.clone(),
            r.status.clone(),
            r.iters.to_string(),
            r.weighted_evals.to_string(),
            r.minres_iters.to_string(),
            r.cg_iters.to_string(),
            format_float(r.best_feas_err),
            format_float(r.best_stat_err),
            format_float(r.best_infeas_stat_err),
            r.terminated_early.to_string(),
            r.success.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_results_csv(path: &Path, records: &[RunRecord]) -> Result<(), HarnessError> {
    write_results(fs::File::create(path)?, records)
}

pub fn read_results<R: io::Read>(r: R) -> Result<Vec<RunRecord>, HarnessError> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != CSV_COLUMNS {
        return Err(HarnessError::Config(format!("unexpected CSV header {headers:?}")));
    }
    let int = |s: &str| s.parse::<u64>().map_err(|_| HarnessError::Config(format!("bad integer `{s}`")));
    let flag = |s: &str| s.parse::<bool>().map_err(|_| HarnessError::Config(format!("bad flag `{s}`")));
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let f = |i: usize| row.get(i).unwrap_or("");
        out.push(RunRecord {
            problem: f(0).into(),
            variant: f(1).into(),
            optimism: f(2).into(),
            exactness: f(3).into(),
            eps_f: parse_float(f(4))?,
            eps_c: parse_float(f(5))?,
            seed: int(f(6))?,
            licq_mode: f(7).into(),
            status: f(8).into(),
            iters: int(f(9))? as usize,
            weighted_evals: int(f(10))?,
            minres_iters: int(f(11))? as usize,
            cg_iters: int(f(12))? as usize,
            best_feas_err: parse_float(f(13))?,
            best_stat_err: parse_float(f(14))?,
            best_infeas_stat_err: parse_float(f(15))?,
            terminated_early: flag(f(16))?,
            success: flag(f(17))?,
        });
    }
    Ok(out)
}

pub fn read_results_csv(path: &Path) -> Result<Vec<RunRecord>, HarnessError> {
    read_results(fs::File::open(path)?)
}

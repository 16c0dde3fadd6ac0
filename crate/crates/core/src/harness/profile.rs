//! Dolan–Moré performance profiles.
//!
//! For solver `s` on problem `p` with cost `t_{p,s}` (∞ on failure) the ratio
//! is `r_{p,s} = t_{p,s} / min_s t_{p,s}` and the profile is
//! `ρ_s(τ) = |{p : r_{p,s} ≤ τ}| / |P|`. Costs are floored at 1 so that runs
//! needing no Krylov iterations still produce finite ratios.

use std::collections::BTreeMap;
use std::io;

use thiserror::Error;

use super::{format_float, RunRecord};

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("a profile needs at least two solvers, found {0}")]
    TooFewSolvers(usize),
    #[error("a profile needs at least one problem")]
    NoProblems,
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostField {
    WeightedEvals,
    MinresIters,
}

impl CostField {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "evals" | "weighted_evals" => Some(CostField::WeightedEvals),
            "minres" | "minres_iters" => Some(CostField::MinresIters),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileTable {
    pub solvers: Vec<String>,
    pub problems: Vec<String>,
    /// `costs[p][s]`, `None` for failures.
    pub costs: Vec<Vec<Option<f64>>>,
    pub grid: Vec<f64>,
    /// `curves[s][i] = ρ_s(grid[i])`.
    pub curves: Vec<Vec<f64>>,
}

const GRID_POINTS: usize = 64;

impl ProfileTable {
    pub fn from_costs(
        solvers: Vec<String>,
        problems: Vec<String>,
        costs: Vec<Vec<Option<f64>>>,
    ) -> Result<Self, ProfileError> {
        if solvers.len() < 2 {
            return Err(ProfileError::TooFewSolvers(solvers.len()));
        }
        if problems.is_empty() {
            return Err(ProfileError::NoProblems);
        }
        let mut table = Self { solvers, problems, costs, grid: Vec::new(), curves: Vec::new() };
        let r_max = table
            .ratios()
            .iter()
            .flatten()
            .flatten()
            .fold(1.0f64, |a, &b| a.max(b));
        table.grid = if r_max <= 1.0 {
            vec![1.0]
        } else {
            let mut g: Vec<f64> =
                (0..GRID_POINTS).map(|i| r_max.powf(i as f64 / (GRID_POINTS - 1) as f64)).collect();
            g[GRID_POINTS - 1] = r_max;
            g
        };
        table.curves = (0..table.solvers.len())
            .map(|s| table.grid.iter().map(|&t| table.rho(s, t)).collect())
            .collect();
        Ok(table)
    }

    /// `ratios[p][s]`, `None` for failures.
    pub fn ratios(&self) -> Vec<Vec<Option<f64>>> {
        self.costs
            .iter()
            .map(|row| {
                let best = row.iter().flatten().fold(f64::INFINITY, |a, &b| a.min(b));
                row.iter().map(|c| c.map(|c| c / best)).collect()
            })
            .collect()
    }

    /// `ρ_s(τ)` evaluated exactly.
    pub fn rho(&self, solver: usize, tau: f64) -> f64 {
        let hits = self
            .ratios()
            .iter()
            .filter(|row| row[solver].is_some_and(|r| r <= tau))
            .count();
        hits as f64 / self.problems.len() as f64
    }

    pub fn solver_index(&self, label: &str) -> Option<usize> {
        self.solvers.iter().position(|s| s == label)
    }

    /// Header `tau` then one column per solver.
    pub fn write_curve_tsv<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "tau\t{}", self.solvers.join("\t"))?;
        for (i, t) in self.grid.iter().enumerate() {
            let vals: Vec<String> = self.curves.iter().map(|c| format_float(c[i])).collect();
            writeln!(w, "{}\t{}", format_float(*t), vals.join("\t"))?;
        }
        Ok(())
    }

    /// Per-problem costs; failures are empty cells.
    pub fn write_costs_tsv<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "problem\t{}", self.solvers.join("\t"))?;
        for (p, row) in self.problems.iter().zip(&self.costs) {
            let vals: Vec<String> = row.iter().map(|c| c.map(format_float).unwrap_or_default()).collect();
            writeln!(w, "{p}\t{}", vals.join("\t"))?;
        }
        Ok(())
    }
}

/// Groups records into solvers (variant, optimism, exactness) and problem
/// instances (problem, noise, seed, LICQ mode). Unsuccessful runs cost ∞.
pub fn performance_profile(records: &[RunRecord], cost: CostField) -> Result<ProfileTable, ProfileError> {
    let mut solvers: Vec<String> = records.iter().map(|r| r.solver_label()).collect();
    solvers.sort();
    solvers.dedup();
    let mut cells: BTreeMap<String, Vec<Option<f64>>> = BTreeMap::new();
    for r in records {
        let key = format!("{}|{}|{}|{}|{}", r.problem, format_float(r.eps_f), format_float(r.eps_c), r.seed, r.licq_mode);
        let s = solvers.iter().position(|x| *x == r.solver_label()).expect("collected above");
        let row = cells.entry(key).or_insert_with(|| vec![None; solvers.len()]);
        let raw = match cost {
            CostField::WeightedEvals => r.weighted_evals as f64,
            CostField::MinresIters => r.minres_iters as f64,
        };
        row[s] = r.success.then_some(raw.max(1.0));
    }
    let (problems, costs): (Vec<String>, Vec<_>) = cells.into_iter().unzip();
    ProfileTable::from_costs(solvers, problems, costs)
}

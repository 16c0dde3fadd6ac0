use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use noisy_sqp::driver::{solve, Optimism, SolverParams, Variant};
use noisy_sqp::harness::suite::{run_suite, Suite};
use noisy_sqp::harness::{
    best_iterate, performance_profile, read_results_csv, run_grid, success, CostField, ExperimentConfig,
};
use noisy_sqp::problems::load_problem;
use noisy_sqp::steps::Inexactness;

#[derive(Parser)]
#[command(name = "noisy-sqp", version, about = "Noise-aware SQP for equality-constrained problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Ada,
    Ls,
}

#[derive(Clone, Copy, ValueEnum)]
enum OptimismArg {
    Opt,
    Pes,
}

#[derive(Clone, Copy, ValueEnum)]
enum CostArg {
    Evals,
    Minres,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem and print a JSON summary.
    Solve {
        #[arg(long)]
        problem: String,
        #[arg(long, value_enum)]
        variant: VariantArg,
        #[arg(long, value_enum)]
        optimism: OptimismArg,
        #[arg(long)]
        eps_f: f64,
        #[arg(long)]
        eps_c: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Solve subproblems to 1e-10 instead of the noise-scaled thresholds.
        #[arg(long)]
        exact: bool,
        #[arg(long, default_value_t = 1e-2)]
        kappa: f64,
    },
    /// Run an experiment grid and write `results.csv` into DIR.
    Grid {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a performance profile from a results CSV.
    Profile {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "evals")]
        cost: CostArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run verification checks and print JSON reports.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Solve { problem, variant, optimism, eps_f, eps_c, seed, exact, kappa } => {
            let p = load_problem(&problem)?;
            let variant = match variant {
                VariantArg::Ada => Variant::Adaptive,
                VariantArg::Ls => Variant::LineSearch,
            };
            let optimism = match optimism {
                OptimismArg::Opt => Optimism::Optimistic,
                OptimismArg::Pes => Optimism::Pessimistic,
            };
            let inexactness = if exact { Inexactness::Exact } else { Inexactness::inexact(kappa) };
            let params = SolverParams::preset(variant, optimism, inexactness, eps_f, eps_c);
            let trace = solve(&p, &params, seed)?;
            let best = best_iterate(&trace, &p, eps_c, eps_f);
            let ok = best.is_some_and(|b| success(b.feas_err, b.stat_err, b.y_inf, &params.resolved_noise()));
            let summary = json!({
                "problem": p.name,
                "solver": params.label(),
                "seed": seed,
                "status": trace.status.as_str(),
                "message": trace.message,
                "iters": trace.records.len(),
                "weighted_evals": trace.counters.weighted_total,
                "minres_iters": trace.minres_iters(),
                "cg_iters": trace.cg_iters(),
                "best_index": best.map(|b| b.index),
                "best_feas_err": best.map(|b| b.feas_err),
                "best_stat_err": best.map(|b| b.stat_err),
                "success": ok || trace.status.as_str() == "early_stationary",
                "final_x": trace.final_x.as_slice(),
            });
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Grid { config, out } => {
            let mut cfg = ExperimentConfig::from_json(&fs::read_to_string(&config)?)?;
            cfg.output_dir = Some(out.clone());
            let records = run_grid(&cfg)?;
            let solved = records.iter().filter(|r| r.success).count();
            println!("{} runs, {solved} successful, written to {}", records.len(), out.join("results.csv").display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Profile { input, cost, out } => {
            let records = read_results_csv(&input)?;
            let cost = match cost {
                CostArg::Evals => CostField::WeightedEvals,
                CostArg::Minres => CostField::MinresIters,
            };
            let table = performance_profile(&records, cost)?;
            table.write_curve_tsv(fs::File::create(&out)?)?;
            let costs = out.with_extension("costs.tsv");
            table.write_costs_tsv(fs::File::create(&costs)?)?;
            println!("{} solvers over {} problems, written to {} and {}", table.solvers.len(), table.problems.len(), out.display(), costs.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { suite } => {
            let suite = Suite::parse(&suite).ok_or_else(|| format!("unknown suite `{suite}`"))?;
            let reports = run_suite(suite);
            println!("{}", serde_json::to_string_pretty(&reports)?);
            let failed = reports.iter().filter(|r| !r.pass).count();
            eprintln!("{} checks, {failed} failed", reports.len());
            Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}

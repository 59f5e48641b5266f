use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use cutoff_fd::estimates::{build_power_barrier, estimate_report};
use cutoff_fd::harness::{
    demo_config, operator_at, run_demo, run_h_refinement, run_k_sweep, solve_cell, StudyConfig, StudyResult, DEMOS,
};
use cutoff_fd::solver::{build_psi0_with, residual, PsiRequirement};
use cutoff_fd::DiscreteDomain;
use serde_json::json;

#[derive(Parser)]
#[command(name = "cutoff-fd", version, about = "Monotone finite-difference solver with cut-off regularisation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one (h, K) cell.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Mesh size (defaults to the first entry of the h schedule).
        #[arg(long)]
        h: Option<f64>,
        /// Cut-off level; `inf` solves the uncut equation.
        #[arg(long = "K")]
        k: Option<f64>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 1_000_000)]
        max_iters: usize,
        /// Per-node CSV of the solution and its residual.
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON solve report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Solve for every K at the first h of the schedule.
    SweepK {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (defaults to the config's).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve across the h schedule at the first K.
    ConvergeH {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the estimate report of a solve as JSON.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long = "K")]
        k: Option<f64>,
        /// Only run the sampled barrier checks.
        #[arg(long)]
        barrier_only: bool,
        /// Inner radius of the power barrier.
        #[arg(long, default_value_t = 0.5)]
        rho0: f64,
    },
    /// Run a canned study.
    Demo {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(DEMOS))]
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path) -> Result<StudyConfig> {
    StudyConfig::load(path).with_context(|| format!("loading {}", path.display()))
}

fn out_dir(cfg: &StudyConfig, out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| cfg.base_dir.join(&cfg.output.dir))
}

fn emit(result: &StudyResult, dir: &Path) -> Result<()> {
    result.write_to(dir)?;
    print!("{}", result.table());
    println!("wrote {}", dir.join("results.csv").display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Solve { config, h, k, tol, max_iters, out, report } => {
            let mut cfg = load(&config)?;
            cfg.study.tol = tol;
            cfg.study.max_iters = max_iters;
            let problem = cfg.problem()?;
            let h = h.unwrap_or(cfg.study.h[0]);
            let k = k.unwrap_or(cfg.study.k[0]);
            let cell = solve_cell(&cfg, &problem, h, k)?;
            let Some(rep) = cell.report else { bail!("{}", cell.row.status) };
            println!(
                "h = {h}, K = {k}: {} iterations, residual {:.3e}, sup|v| = {:.6}",
                rep.iterations, rep.final_residual, cell.row.sup_v
            );
            if let Some(path) = out {
                let op = operator_at(&problem.op, k)?;
                let r = residual(&op, &cell.dd, &rep.solution)?;
                cell.dd.write_csv(&rep.solution, &[("residual", &r.values)], File::create(&path)?)?;
            }
            if let Some(path) = report {
                serde_json::to_writer_pretty(File::create(&path)?, &json!({ "solve": rep, "row": cell.row }))?;
            }
        }
        Command::SweepK { config, out } => {
            let cfg = load(&config)?;
            let r = run_k_sweep(&cfg)?;
            if let Some(p) = r.uncut_p_sup {
                println!("uncut sup P_h[v] = {p:.6}");
            }
            emit(&r, &out_dir(&cfg, out))?;
        }
        Command::ConvergeH { config, out } => {
            let cfg = load(&config)?;
            emit(&run_h_refinement(&cfg)?, &out_dir(&cfg, out))?;
        }
        Command::Verify { config, h, k, barrier_only, rho0 } => {
            let cfg = load(&config)?;
            let problem = cfg.problem()?;
            let h = h.unwrap_or(cfg.study.h[0]);
            let op = &problem.op;
            let value = if barrier_only {
                let dd = DiscreteDomain::build(problem.domain.clone(), h, problem.dirs.clone())?;
                let req = PsiRequirement::uniform(problem.dirs.len(), op.delta, op.k0);
                let psi = build_psi0_with(&dd, &req)?;
                let power = build_power_barrier(&problem.dirs, op.delta, op.k0, rho0)?;
                json!({
                    "psi0": { "mu": psi.mu, "check": psi.check },
                    "power": { "alpha": power.alpha, "scale": power.scale, "check": power.check },
                })
            } else {
                let k = k.unwrap_or(cfg.study.k[0]);
                if k.is_infinite() {
                    bail!("the estimate report needs a finite K");
                }
                let cell = solve_cell(&cfg, &problem, h, k)?;
                let Some(rep) = cell.report else { bail!("{}", cell.row.status) };
                let cut = operator_at(op, k)?;
                serde_json::to_value(estimate_report(&cut, &cell.dd, &rep.solution, &problem.g, cfg.study.tol)?)?
            };
            println!("{}", serde_json::to_string_pretty(&value)?);
        }
        Command::Demo { name, out } => {
            let cfg = demo_config(&name)?;
            let dir = out.unwrap_or_else(|| cfg.output.dir.join(&name));
            let demo = run_demo(&name)?;
            for (i, r) in demo.results.iter().enumerate() {
                let sub = if demo.results.len() > 1 { dir.join(format!("{i}_{}", r.name)) } else { dir.clone() };
                emit(r, &sub)?;
                if let Some(est) = &r.estimates {
                    println!("{}", serde_json::to_string_pretty(est)?);
                }
            }
            print!("{}", demo.summary);
        }
    }
    Ok(())
}

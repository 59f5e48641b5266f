//! Studies over `(h, K)` schedules, canned demos and report files.

mod config;

pub use config::*;

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::directions::cutoff_p;
use crate::error::{Error, Result};
use crate::estimates::{estimate_report, interior_second_diff_report, EstimateReport};
use crate::lattice::{DiscreteDomain, GridFunction};
use crate::operators::{make_cutoff_operator, nonuniqueness_reference, OperatorSpec};
use crate::solver::{residual, solve, SolveOptions, SolveReport};

/// One solved `(h, K)` cell.
#[derive(Clone, Debug, Serialize)]
pub struct StudyRow {
    pub label: String,
    pub h: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub iters: usize,
    pub sup_v: f64,
    pub boundary_ratio: f64,
    pub wsd_max: f64,
    /// Normalized discrete `L_p` norm of the uncut residual `H_h[v]`.
    pub res_norm: f64,
    pub res_sup: f64,
    pub cutoff_defect: f64,
    pub g_count: usize,
    /// `sup P_h[v]` over `Ω^h` (with `p = δ`).
    pub p_sup: f64,
    /// Sup distance to the previous row's solution on the common lattice.
    pub distance: Option<f64>,
    pub exact_error: Option<f64>,
    pub wall_ms: f64,
    pub status: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct StudyResult {
    pub name: String,
    pub rows: Vec<StudyRow>,
    /// `sup P_h[v]` of the uncut solution, when computed.
    pub uncut_p_sup: Option<f64>,
    pub estimates: Option<EstimateReport>,
}

impl StudyResult {
    pub const CSV_HEADER: [&'static str; 16] = [
        "h",
        "K",
        "iters",
        "sup_v",
        "boundary_ratio",
        "wsd_max",
        "res_norm",
        "cutoff_defect",
        "wall_ms",
        "label",
        "res_sup",
        "g_count",
        "p_sup",
        "distance",
        "exact_error",
        "status",
    ];

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::CSV_HEADER)?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                format!("{}", r.h),
                format!("{}", r.k),
                r.iters.to_string(),
                format!("{:e}", r.sup_v),
                format!("{:e}", r.boundary_ratio),
                format!("{:e}", r.wsd_max),
                format!("{:e}", r.res_norm),
                format!("{:e}", r.cutoff_defect),
                format!("{:.3}", r.wall_ms),
                r.label.clone(),
                format!("{:e}", r.res_sup),
                r.g_count.to_string(),
                format!("{:e}", r.p_sup),
                opt(r.distance),
                opt(r.exact_error),
                r.status.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `results.csv` and `report.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_csv(std::fs::File::create(dir.join("results.csv"))?)?;
        serde_json::to_writer_pretty(std::fs::File::create(dir.join("report.json"))?, self)?;
        Ok(())
    }

    /// Fixed-width table for terminals.
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:>10} {:>8} {:>6} {:>11} {:>11} {:>11} {:>11} {:>11} {:>7} {:>11}  {}\n",
            "h", "K", "iters", "sup_v", "wsd_max", "res_norm", "res_sup", "distance", "|G|", "exact_err", "label"
        );
        let opt = |v: Option<f64>| v.map(|x| format!("{x:11.4e}")).unwrap_or_else(|| format!("{:>11}", "-"));
        for r in &self.rows {
            s += &format!(
                "{:>10.6} {:>8} {:>6} {:11.4e} {:11.4e} {:11.4e} {:11.4e} {} {:>7} {}  {}\n",
                r.h,
                r.k,
                r.iters,
                r.sup_v,
                r.wsd_max,
                r.res_norm,
                r.res_sup,
                opt(r.distance),
                r.g_count,
                opt(r.exact_error),
                if r.status == "ok" { r.label.clone() } else { format!("{} {}", r.label, r.status) }
            );
        }
        s
    }
}

/// The operator used at cut-off level `K` (`∞` gives the uncut operator).
pub fn operator_at(op: &OperatorSpec, k: f64) -> Result<OperatorSpec> {
    if k.is_infinite() {
        Ok(op.clone())
    } else {
        make_cutoff_operator(op, k)
    }
}

pub struct Cell {
    pub row: StudyRow,
    pub dd: DiscreteDomain,
    pub report: Option<SolveReport>,
}

fn p_sup(dd: &DiscreteDomain, v: &GridFunction, p: f64) -> f64 {
    dd.interior()
        .iter()
        .map(|&i| cutoff_p(&dd.discrete_hessian_vector(v, i), p))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Solves one `(h, K)` cell and measures everything the studies report.
pub fn solve_cell(cfg: &StudyConfig, problem: &Problem, h: f64, k: f64) -> Result<Cell> {
    let dd = DiscreteDomain::build(problem.domain.clone(), h, problem.dirs.clone())?;
    let op = operator_at(&problem.op, k)?;
    let opts = SolveOptions {
        tol: cfg.study.tol,
        max_iters: cfg.study.max_iters,
        method: cfg.study.method.into(),
        ..Default::default()
    };
    let start = Instant::now();
    let outcome = solve(&op, &dd, &problem.g, &opts);
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let p_norm = cfg.study.p_norm.unwrap_or(dd.dims() as f64);
    let mut row = StudyRow {
        label: String::new(),
        h,
        k,
        iters: 0,
        sup_v: f64::NAN,
        boundary_ratio: f64::NAN,
        wsd_max: f64::NAN,
        res_norm: f64::NAN,
        res_sup: f64::NAN,
        cutoff_defect: f64::NAN,
        g_count: 0,
        p_sup: f64::NAN,
        distance: None,
        exact_error: None,
        wall_ms,
        status: "ok".into(),
    };
    let report = match outcome {
        Ok(rep) => rep,
        Err(e) => {
            row.status = format!("failed: {e}");
            if let Error::NotConverged { iterations, .. } = e {
                row.iters = iterations;
            }
            return Ok(Cell { row, dd, report: None });
        }
    };
    let v = &report.solution;
    let uncut = residual(&problem.op, &dd, v)?;
    row.iters = report.iterations;
    row.sup_v = report.sup_bound_check.sup_v;
    row.res_norm = uncut.lp_norm(p_norm);
    row.res_sup = uncut.sup;
    row.p_sup = p_sup(&dd, v, problem.op.delta);
    if k.is_finite() {
        let est = estimate_report(&op, &dd, v, &problem.g, cfg.study.tol)?;
        row.boundary_ratio = est.boundary_ratio;
        row.wsd_max = est.weighted_second_diff_max;
        row.cutoff_defect = est.cutoff_identity_defect;
        row.g_count = est.g_count;
    } else {
        row.boundary_ratio = crate::estimates::boundary_estimate(v, &problem.g, &dd);
        row.wsd_max = interior_second_diff_report(v, &dd).weighted_max;
        row.cutoff_defect = 0.0;
    }
    if let Some(exact) = &problem.exact {
        row.exact_error = Some(
            (0..dd.len())
                .filter(|&i| dd.in_domain(i))
                .map(|i| (v.values[i] - exact.eval(&dd.point(i))).abs())
                .fold(0.0, f64::max),
        );
    }
    Ok(Cell { row, dd, report: Some(report) })
}

/// Sup of `|u − v|` over in-domain points present in both lattices.
pub fn common_lattice_distance(a: &DiscreteDomain, u: &GridFunction, b: &DiscreteDomain, v: &GridFunction) -> Option<f64> {
    let step_b = b.spacing();
    let mut best: Option<f64> = None;
    for i in 0..a.len() {
        if !a.in_domain(i) {
            continue;
        }
        let x = a.point(i);
        let coords: Vec<i64> = x.iter().map(|c| (c / step_b).round() as i64).collect();
        if coords.iter().zip(&x).any(|(c, xc)| (*c as f64 * step_b - xc).abs() > 1e-9 * step_b) {
            continue;
        }
        let Some(j) = b.index_of(&coords) else { continue };
        if !b.in_domain(j) {
            continue;
        }
        let d = (u.values[i] - v.values[j]).abs();
        best = Some(best.map_or(d, |x: f64| x.max(d)));
    }
    best
}

/// For fixed `h` (the first schedule entry), solves for every `K` and the
/// uncut problem; rows carry the distance to the previous `K`.
pub fn run_k_sweep(cfg: &StudyConfig) -> Result<StudyResult> {
    let problem = cfg.problem()?;
    let h = cfg.study.h[0];
    let uncut = solve_cell(cfg, &problem, h, f64::INFINITY)?;
    let uncut_p_sup = uncut.report.as_ref().map(|_| uncut.row.p_sup);
    let mut rows = Vec::new();
    let mut prev: Option<GridFunction> = None;
    let mut estimates = None;
    for &k in &cfg.study.k {
        let mut cell = solve_cell(cfg, &problem, h, k)?;
        cell.row.label = "k_sweep".into();
        if let Some(rep) = &cell.report {
            if let Some(p) = &prev {
                cell.row.distance = common_lattice_distance(&cell.dd, &rep.solution, &cell.dd, p);
            }
            if estimates.is_none() && k.is_finite() {
                estimates = Some(estimate_report(&operator_at(&problem.op, k)?, &cell.dd, &rep.solution, &problem.g, cfg.study.tol)?);
            }
        }
        prev = cell.report.map(|r| r.solution);
        rows.push(cell.row);
    }
    Ok(StudyResult { name: format!("{}_k_sweep", cfg.name.clone().unwrap_or_default()), rows, uncut_p_sup, estimates })
}

/// For fixed `K` (the first schedule entry), solves across the `h` schedule;
/// rows carry the distance to the previous level on the common lattice.
pub fn run_h_refinement(cfg: &StudyConfig) -> Result<StudyResult> {
    let problem = cfg.problem()?;
    let k = cfg.study.k[0];
    let mut rows = Vec::new();
    let mut prev: Option<(DiscreteDomain, GridFunction)> = None;
    for &h in &cfg.study.h {
        let mut cell = solve_cell(cfg, &problem, h, k)?;
        cell.row.label = "h_refinement".into();
        if let (Some(rep), Some((pdd, pv))) = (&cell.report, &prev) {
            cell.row.distance = common_lattice_distance(pdd, pv, &cell.dd, &rep.solution);
        }
        prev = cell.report.map(|r| (cell.dd, r.solution));
        rows.push(cell.row);
    }
    Ok(StudyResult { name: format!("{}_h_refinement", cfg.name.clone().unwrap_or_default()), rows, uncut_p_sup: None, estimates: None })
}

/// Sup residual of the exact (unmollified) operator on each reference
/// solution, per `h`.
pub fn run_nonuniqueness(cfg: &StudyConfig) -> Result<StudyResult> {
    let problem = cfg.problem()?;
    let mut rows = Vec::new();
    for (label, reference) in nonuniqueness_reference() {
        let mut prev_sup: Option<f64> = None;
        for &h in &cfg.study.h {
            let start = Instant::now();
            let dd = DiscreteDomain::build(problem.domain.clone(), h, problem.dirs.clone())?;
            let v = GridFunction::from_fn(&dd, reference);
            let r = residual(&problem.op, &dd, &v)?;
            let mut status = "ok".to_string();
            if let Some(p) = prev_sup {
                status = if r.sup == 0.0 && p == 0.0 { "ratio undefined (exact)".into() } else { format!("ratio {:.4}", p / r.sup) };
            }
            prev_sup = Some(r.sup);
            rows.push(StudyRow {
                label: label.to_string(),
                h,
                k: f64::INFINITY,
                iters: 0,
                sup_v: v.sup_abs_in_domain(&dd),
                boundary_ratio: crate::estimates::boundary_estimate(&v, &problem.g, &dd),
                wsd_max: interior_second_diff_report(&v, &dd).weighted_max,
                res_norm: r.lp_norm(cfg.study.p_norm.unwrap_or(1.0)),
                res_sup: r.sup,
                cutoff_defect: 0.0,
                g_count: 0,
                p_sup: p_sup(&dd, &v, problem.op.delta),
                distance: None,
                exact_error: None,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
                status,
            });
        }
    }
    Ok(StudyResult { name: "nonuniqueness".into(), rows, uncut_p_sup: None, estimates: None })
}

pub const DEMOS: [&str; 4] = ["eq12", "nonuniqueness", "bellman", "poisson"];

/// The canned configuration of a demo.
pub fn demo_config(name: &str) -> Result<StudyConfig> {
    let text = match name {
        "eq12" => include_str!("../../configs/eq12.toml"),
        "nonuniqueness" => include_str!("../../configs/nonuniqueness.toml"),
        "bellman" => include_str!("../../configs/bellman.toml"),
        "poisson" => include_str!("../../configs/poisson.toml"),
        _ => return Err(Error::Unknown { kind: "demo", name: name.to_string() }),
    };
    StudyConfig::from_toml_str(text)
}

pub struct DemoOutput {
    pub results: Vec<StudyResult>,
    pub summary: String,
}

fn ratios(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| w[0] / w[1]).collect()
}

pub fn run_demo(name: &str) -> Result<DemoOutput> {
    let cfg = demo_config(name)?;
    let mut summary = String::new();
    let results = match name {
        "poisson" => {
            let r = run_h_refinement(&cfg)?;
            let errs: Vec<f64> = r.rows.iter().filter_map(|r| r.exact_error).collect();
            summary += &format!("error ratios per h halving: {:?}\n", ratios(&errs));
            vec![r]
        }
        "bellman" => {
            let r = run_h_refinement(&cfg)?;
            let d: Vec<f64> = r.rows.iter().filter_map(|r| r.distance).collect();
            summary += &format!("successive sup distances: {d:?}\n");
            vec![r]
        }
        "nonuniqueness" => {
            let r = run_nonuniqueness(&cfg)?;
            for (label, _) in nonuniqueness_reference() {
                let sups: Vec<f64> = r.rows.iter().filter(|row| row.label == label).map(|row| row.res_sup).collect();
                summary += &format!("{label}: sup residuals {sups:?}\n");
            }
            vec![r]
        }
        "eq12" => {
            let sweep = run_k_sweep(&cfg)?;
            let norms: Vec<f64> = sweep.rows.iter().map(|r| r.res_norm).collect();
            summary += &format!("K-sweep residual norms: {norms:?}\n");
            if let Some(p) = sweep.uncut_p_sup {
                summary += &format!("uncut sup P_h[v] = {p:.4}\n");
            }
            let mut refine_cfg = cfg.clone();
            refine_cfg.study.h = vec![0.125, 1.0 / 12.0, 0.0625];
            refine_cfg.study.k = vec![8.0];
            let refine = run_h_refinement(&refine_cfg)?;
            let wsd: Vec<f64> = refine.rows.iter().map(|r| r.wsd_max).collect();
            summary += &format!("weighted second-difference sups at K = 8: {wsd:?}\n");
            vec![sweep, refine]
        }
        _ => unreachable!("checked by demo_config"),
    };
    Ok(DemoOutput { results, summary })
}

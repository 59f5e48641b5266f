//! Acceptance suite: one PASS/FAIL line per criterion, with wall time.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use cutoff_fd::directions::{cutoff_p, decompose_spd};
use cutoff_fd::estimates::build_power_barrier;
use cutoff_fd::harness::{
    demo_config, operator_at, run_demo, run_h_refinement, run_k_sweep, run_nonuniqueness, solve_cell,
};
use cutoff_fd::operators::{
    cutoff_operator, example_bellman, nonuniqueness_reference, slope_hull_check, CoefficientBox, FnKernel, Jet,
    LinearMember,
};
use cutoff_fd::solver::{
    build_psi0, build_psi0_with, comparison_check, residual, solve, transformed_operator, Initial, PsiRequirement,
    SolveOptions,
};
use cutoff_fd::{DirectionSet, DiscreteDomain, DomainSpec, Field, GridFunction, OperatorSpec};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn brute_force_cutoff(z: &[f64], p: f64) -> f64 {
    let n = z.len();
    (0..1u32 << n)
        .map(|mask| {
            (0..n)
                .map(|k| if mask & (1 << k) != 0 { 2.0 / p } else { p / 2.0 } * z[k])
                .sum::<f64>()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn cutoff_closed_form() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    // m = 2 gives four signed entries; the d = 2 set (eight entries) is checked too.
    for len in [4, 8] {
        for _ in 0..1000 {
            let z: Vec<f64> = (0..len).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let p = rng.gen_range(0.05..1.0);
            worst = worst.max((cutoff_p(&z, p) - brute_force_cutoff(&z, p)).abs());
        }
    }
    check(worst <= 1e-12, format!("max |closed form - enumeration| = {worst:.2e}"))
}

fn transform_identity() -> Outcome {
    let dirs = DirectionSet::standard(2, 0.25).map_err(|e| e.to_string())?;
    let dd = DiscreteDomain::build(DomainSpec::unit_ball(2), 0.1, dirs.clone()).map_err(|e| e.to_string())?;
    let n = dirs.len();
    let members = vec![
        LinearMember { a: vec![1.0; n], b: vec![0.3; n], c: 0.5, f: Field::Constant(0.2) },
        LinearMember {
            a: (0..n).map(|k| [2.0, 0.5, 1.0, 1.5][k % 4]).collect(),
            b: vec![-0.4; n],
            c: 0.0,
            f: Field::func(|x| x[0]),
        },
    ];
    let op = example_bellman(&dirs, members, 0.25, 0.5, 1.0).map_err(|e| e.to_string())?;
    let psi = build_psi0(&dd, &op).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_rel: f64 = 0.0;
    let mut worst_abs: f64 = 0.0;
    for _ in 0..20 {
        let u = GridFunction { values: (0..dd.len()).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        let lhs = transformed_operator(&op, &dd, &psi, &u);
        let v = GridFunction { values: u.values.iter().zip(&psi.values).map(|(a, b)| a * b).collect() };
        let rhs = residual(&op, &dd, &v).map_err(|e| e.to_string())?;
        for &i in dd.interior() {
            let diff = (lhs[i] - rhs.values[i]).abs();
            worst_abs = worst_abs.max(diff);
            worst_rel = worst_rel.max(diff / (1.0 + rhs.values[i].abs()));
        }
    }
    check(
        worst_rel <= 1e-10,
        format!("20 functions, {} nodes, max relative gap {worst_rel:.2e} (absolute {worst_abs:.2e})", dd.interior().len()),
    )
}

fn uniqueness_and_comparison() -> Outcome {
    let mut cfg = demo_config("eq12").map_err(|e| e.to_string())?;
    let problem = cfg.problem().map_err(|e| e.to_string())?;
    let h = 0.125;
    let k = cfg.study.k[0];
    cfg.study.tol = 1e-8;
    let tol = cfg.study.tol;
    let dd = DiscreteDomain::build(problem.domain.clone(), h, problem.dirs.clone()).map_err(|e| e.to_string())?;
    let op = operator_at(&problem.op, k).map_err(|e| e.to_string())?;
    let mut solutions = Vec::new();
    for seed in 0..10 {
        let opts = SolveOptions { tol, initial: Initial::Random { seed, amplitude: 5.0 }, ..Default::default() };
        solutions.push(solve(&op, &dd, &problem.g, &opts).map_err(|e| e.to_string())?.solution);
    }
    let spread = solutions[1..]
        .iter()
        .flat_map(|s| s.values.iter().zip(&solutions[0].values).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max);
    let v = &solutions[0];
    let psi = build_psi0(&dd, &op).map_err(|e| e.to_string())?;
    let margin = 1e-3;
    let u = GridFunction { values: v.values.iter().zip(&psi.values).map(|(a, p)| a - margin * p).collect() };
    let c = comparison_check(&op, &dd, &u, v).map_err(|e| e.to_string())?;
    check(
        spread <= 10.0 * tol && c.premises_hold && c.conclusion_holds,
        format!(
            "K = {k}: spread over 10 starts {spread:.2e}; comparison premises {} conclusion {}",
            c.premises_hold, c.conclusion_holds
        ),
    )
}

fn poisson_order() -> Outcome {
    let demo = run_demo("poisson").map_err(|e| e.to_string())?;
    let errs: Vec<f64> = demo.results[0].rows.iter().filter_map(|r| r.exact_error).collect();
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    check(
        ratios.len() == 3 && ratios.iter().all(|r| (3.5..=4.5).contains(r)),
        format!("error ratios {}", ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(", ")),
    )
}

fn barrier_suites() -> Outcome {
    let (delta, k0) = (1.0 / 3.0, 1.0);
    let dirs = DirectionSet::standard(3, delta).map_err(|e| e.to_string())?;
    let dd = DiscreteDomain::build(DomainSpec::unit_ball(3), 1.0 / 12.0, dirs.clone()).map_err(|e| e.to_string())?;
    let req = PsiRequirement::uniform(dirs.len(), delta, k0);
    let psi = build_psi0_with(&dd, &req).map_err(|e| e.to_string())?;
    let power = build_power_barrier(&dirs, delta, k0, 0.5).map_err(|e| e.to_string())?;
    check(
        psi.check.nodes >= 10_000
            && psi.check.violations == 0
            && power.check.samples >= 10_000
            && power.check.violations == 0,
        format!(
            "psi0: mu = {}, {} nodes, {} violations, worst {:.3}; power: alpha = {}, {} points, {} violations",
            psi.mu, psi.check.nodes, psi.check.violations, psi.check.worst, power.alpha, power.check.samples,
            power.check.violations
        ),
    )
}

fn cutoff_identity() -> Outcome {
    let mut cfg = demo_config("eq12").map_err(|e| e.to_string())?;
    cfg.study.tol = 1e-8;
    let problem = cfg.problem().map_err(|e| e.to_string())?;
    let cell = solve_cell(&cfg, &problem, 1.0 / 12.0, 1.0).map_err(|e| e.to_string())?;
    let r = &cell.row;
    check(
        r.status == "ok" && r.g_count > 0 && r.cutoff_defect <= 10.0 * cfg.study.tol,
        format!("|G| = {}, sup_G |P - K| = {:.2e} ({})", r.g_count, r.cutoff_defect, r.status),
    )
}

fn interior_bounds() -> Outcome {
    let mut cfg = demo_config("eq12").map_err(|e| e.to_string())?;
    cfg.study.h = vec![1.0 / 8.0, 1.0 / 12.0, 1.0 / 16.0];
    cfg.study.k = vec![8.0];
    let r = run_h_refinement(&cfg).map_err(|e| e.to_string())?;
    let wsd: Vec<f64> = r.rows.iter().map(|r| r.wsd_max).collect();
    let spread = wsd.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / wsd.iter().cloned().fold(f64::INFINITY, f64::min);
    let dist: Vec<f64> = r.rows.iter().filter_map(|r| r.distance).collect();
    check(
        wsd.len() == 3 && r.rows.iter().all(|r| r.status == "ok") && spread <= 2.0,
        format!(
            "weighted sups {}; max/min {spread:.3}; successive distances {}",
            wsd.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(", "),
            dist.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn k_sweep_decay() -> Outcome {
    let mut cfg = demo_config("eq12").map_err(|e| e.to_string())?;
    cfg.study.h = vec![1.0 / 12.0];
    // One level past 256, so the solution after it has a successor to compare with.
    cfg.study.k = (0..=9).map(|i| 2f64.powi(i)).collect();
    cfg.study.tol = 1e-8;
    let r = run_k_sweep(&cfg).map_err(|e| e.to_string())?;
    let psup = r.uncut_p_sup.ok_or("uncut solve failed")?;
    let trace: Vec<f64> = r.rows.iter().filter(|row| row.k <= 256.0).map(|row| row.res_norm).collect();
    let tail = &trace[trace.len() / 2..];
    let eventually = tail.windows(2).all(|w| w[1] <= w[0]);
    let ratio = trace[trace.len() - 1] / trace[0];
    let beyond: Vec<(f64, f64)> = r
        .rows
        .windows(2)
        .filter(|w| w[0].k > psup)
        .map(|w| (w[1].k, w[1].distance.unwrap_or(f64::INFINITY)))
        .collect();
    let stable = !beyond.is_empty() && beyond.iter().all(|(_, d)| *d <= 10.0 * cfg.study.tol);
    check(
        r.rows.iter().all(|row| row.status == "ok") && eventually && ratio <= 0.25 && stable,
        format!(
            "norms {}; final/initial {ratio:.2e}; uncut sup P = {psup:.2}; distances past it {:?}",
            trace.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(", "),
            beyond
        ),
    )
}

fn nonuniqueness_residuals() -> Outcome {
    let cfg = demo_config("nonuniqueness").map_err(|e| e.to_string())?;
    let r = run_nonuniqueness(&cfg).map_err(|e| e.to_string())?;
    let mut ok = r.rows.len() == 6;
    let mut parts = Vec::new();
    for (label, _) in nonuniqueness_reference() {
        let sups: Vec<f64> = r.rows.iter().filter(|row| row.label == label).map(|row| row.res_sup).collect();
        if sups.iter().all(|s| *s == 0.0) {
            // An exact discrete solution: nothing to decay and no ratio to form.
            parts.push(format!("{label}: residual exactly 0 at every h"));
        } else {
            let ratios: Vec<f64> = sups.windows(2).map(|w| w[0] / w[1]).collect();
            ok &= ratios.iter().all(|q| (1.5..=3.0).contains(q));
            parts.push(format!("{label}: sups {sups:.3?}, ratios {ratios:.3?}"));
        }
    }
    check(ok, parts.join("; "))
}

fn slope_audits() -> Outcome {
    let cfg = demo_config("eq12").map_err(|e| e.to_string())?;
    let problem = cfg.problem().map_err(|e| e.to_string())?;
    let dirs = problem.dirs.clone();
    let (lo, hi) = (vec![-1.0; 3], vec![1.0; 3]);
    let cut = cutoff_operator(&dirs, dirs.delta_hat());
    let p = slope_hull_check(&cut, 10_000, 3.0, (&lo, &hi), 1);
    let e = slope_hull_check(&problem.op, 10_000, 3.0, (&lo, &hi), 2);
    let n = dirs.len();
    let delta = 1.0 / 3.0;
    // Declares slopes in [δ, 1/δ] while the first entry really has slope 2/δ.
    let broken = OperatorSpec {
        name: "broken".into(),
        dirs: dirs.clone(),
        kernel: std::sync::Arc::new(FnKernel(move |z: &Jet, _: &[f64]| {
            z.second.iter().sum::<f64>() + (2.0 / delta - 1.0) * z.second[0]
        })),
        bounds: CoefficientBox::uniform(n, delta, 1.0 / delta, 0.0, 0.0),
        delta,
        k0: 0.0,
        h_bar: 0.0,
        lipschitz: None,
        omega: "none".into(),
        cutoff: None,
    };
    let b = slope_hull_check(&broken, 10_000, 3.0, (&lo, &hi), 3);
    check(
        p.violations == 0 && e.violations == 0 && b.violations > 0,
        format!(
            "cutoff P {}/{} violations, eq12 {}/{}, broken control {}/{}",
            p.violations, p.pairs, e.violations, e.pairs, b.violations, b.pairs
        ),
    )
}

fn decomposition() -> Outcome {
    let delta = 0.5;
    let dirs = DirectionSet::extended(3, 3, delta).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (lo, hi) = (delta / 4.0, 4.0 / delta);
    let mut worst_res: f64 = 0.0;
    let mut min_lambda = f64::INFINITY;
    for _ in 0..100 {
        let g = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
        let q = g.qr().q();
        let eig = DVector::from_fn(3, |_, _| rng.gen_range(lo..=hi));
        let a = &q * DMatrix::from_diagonal(&eig) * q.transpose();
        let a = (&a + a.transpose()) * 0.5;
        let dec = decompose_spd(&a, &dirs).map_err(|e| e.to_string())?;
        let mut rebuilt = DMatrix::zeros(3, 3);
        for (k, l) in dirs.vectors().iter().enumerate() {
            let l = DVector::from_column_slice(l);
            rebuilt += dec.lambdas[k] * &l * l.transpose();
        }
        worst_res = worst_res.max((rebuilt - &a).norm());
        min_lambda = min_lambda.min(dec.lambdas.iter().cloned().fold(f64::INFINITY, f64::min));
    }
    check(
        worst_res <= 1e-8 && min_lambda > 0.0,
        format!("100 matrices, max reconstruction error {worst_res:.2e}, min lambda {min_lambda:.3e}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Duration, fn() -> Outcome); 11] = [
        ("1 cut-off closed form", Duration::from_secs(1), cutoff_closed_form),
        ("2 transform identity", Duration::from_secs(5), transform_identity),
        ("3 uniqueness and comparison", Duration::from_secs(120), uniqueness_and_comparison),
        ("4 consistency order", Duration::from_secs(60), poisson_order),
        ("5 barrier suites", Duration::from_secs(30), barrier_suites),
        ("6 cut-off identity", Duration::from_secs(300), cutoff_identity),
        ("7 uniform interior bounds", Duration::from_secs(900), interior_bounds),
        ("8 K-sweep decay", Duration::from_secs(1200), k_sweep_decay),
        ("9 non-uniqueness residuals", Duration::from_secs(60), nonuniqueness_residuals),
        ("10 secant-slope audits", Duration::from_secs(30), slope_audits),
        ("11 decomposition", Duration::from_secs(60), decomposition),
    ];
    let mut failed = 0;
    for (name, budget, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if elapsed <= budget => (true, d),
            Ok(d) => (false, format!("{d}; over the {budget:?} budget")),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} [{name}] {:.2}s (budget {}s): {detail}",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("{} of 11 criteria passed", 11 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

//! Solution of the discrete Dirichlet problem `H_h[v] = 0` in `Ω^h`,
//! `v = g` on `∂_hΩ`, together with the `Ψ₀` barrier, the transformed
//! operator and comparison utilities.

use rayon::prelude::*;
use serde::Serialize;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::field::Field;
use crate::lattice::{DiscreteDomain, GridFunction, NodeKind, Shape};
use crate::linalg::{bicgstab, CsrMatrix, Ilu0};
use crate::operators::{CoefficientBox, Jet, OperatorSpec};

/// Coefficient ranges the barrier inequality must cover:
/// `Σ_j a_j Δ_j Ψ₀ + b Σ_j |δ_j Ψ₀| ≤ −1` for all `a_j ∈ [a_lo_j, a_hi_j]`.
#[derive(Clone, Debug, Serialize)]
pub struct PsiRequirement {
    pub a_lo: Vec<f64>,
    pub a_hi: Vec<f64>,
    pub b: f64,
}

impl PsiRequirement {
    /// The operator's own slope box.
    pub fn from_bounds(bounds: &CoefficientBox) -> Self {
        PsiRequirement { a_lo: bounds.a_lo.clone(), a_hi: bounds.a_hi.clone(), b: bounds.b_max }
    }

    /// `a_j ∈ [δ₁, δ₁^{-1}]` with first-difference weight `δ₁^{-1}`, where
    /// `δ₁ = min(δ, 1/b_max)` so the weight also covers the b-box.
    pub fn uniform(len: usize, delta: f64, b_max: f64) -> Self {
        let delta1 = if b_max > 0.0 { delta.min(1.0 / b_max) } else { delta };
        PsiRequirement { a_lo: vec![delta1; len], a_hi: vec![1.0 / delta1; len], b: 1.0 / delta1 }
    }

    /// Left side maximised over the coefficient corners.
    pub fn lhs(&self, first: &[f64], second: &[f64]) -> f64 {
        let mut s = 0.0;
        for (k, &t) in second.iter().enumerate() {
            s += (self.a_lo[k] * t).max(self.a_hi[k] * t);
        }
        if self.b > 0.0 {
            s += self.b * first.iter().map(|f| f.abs()).sum::<f64>();
        }
        s
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BarrierCheck {
    pub nodes: usize,
    /// Nodes times coefficient corners covered by the closed-form maximum.
    pub corner_cases: f64,
    pub violations: usize,
    /// Largest left side found (must be ≤ −1).
    pub worst: f64,
}

/// `Ψ₀(x) = 1 + cosh(μR) − cosh(μ|x − c|)` with `c` the centre of the
/// domain's bounding box and `R` twice the radius of the smallest ball about
/// `c` containing the domain.
#[derive(Clone, Debug, Serialize)]
pub struct PsiBarrier {
    pub mu: f64,
    pub big_r: f64,
    pub center: Vec<f64>,
    #[serde(skip)]
    pub values: Vec<f64>,
    #[serde(skip)]
    pos: Vec<usize>,
    #[serde(skip)]
    first: Vec<f64>,
    #[serde(skip)]
    second: Vec<f64>,
    n: usize,
    pub check: BarrierCheck,
}

impl PsiBarrier {
    /// `δ_{h,l_j}Ψ₀` at an interior node.
    pub fn first(&self, idx: usize) -> &[f64] {
        let p = self.pos[idx];
        &self.first[p * self.n..(p + 1) * self.n]
    }

    /// `Δ_{h,l_j}Ψ₀` at an interior node.
    pub fn second(&self, idx: usize) -> &[f64] {
        let p = self.pos[idx];
        &self.second[p * self.n..(p + 1) * self.n]
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    /// Re-checks the barrier inequality against another requirement.
    pub fn verify(&self, dd: &DiscreteDomain, req: &PsiRequirement) -> BarrierCheck {
        let worst: Vec<f64> = dd.interior().iter().map(|&i| req.lhs(self.first(i), self.second(i))).collect();
        summarize(&worst, self.n)
    }
}

fn summarize(lhs: &[f64], n: usize) -> BarrierCheck {
    BarrierCheck {
        nodes: lhs.len(),
        corner_cases: lhs.len() as f64 * 2f64.powi(n as i32),
        violations: lhs.iter().filter(|v| !(**v <= -1.0)).count(),
        worst: lhs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    }
}

fn enclosing_radius(dd: &DiscreteDomain) -> (Vec<f64>, f64) {
    match &dd.domain().shape {
        Shape::Ball { center, radius } => (center.clone(), *radius),
        _ => {
            let (lo, hi) = dd.domain().bounding_box();
            let center: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
            let r = lo.iter().zip(&hi).map(|(a, b)| 0.25 * (b - a) * (b - a)).sum::<f64>().sqrt();
            (center, r)
        }
    }
}

fn dist(a: &[f64], c: &[f64]) -> f64 {
    a.iter().zip(c).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `cosh(μ|y|) − cosh(μ|x|)` without cancellation.
fn cosh_gap(mu: f64, x: &[f64], y: &[f64], c: &[f64]) -> f64 {
    let (nx, ny) = (dist(x, c), dist(y, c));
    let sq = |p: &[f64]| p.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    let gap = if nx + ny > 0.0 { (sq(y) - sq(x)) / (nx + ny) } else { 0.0 };
    2.0 * (0.5 * mu * (nx + ny)).sinh() * (0.5 * mu * gap).sinh()
}

/// `Ψ₀` for a fixed `μ` with analytic differences at interior nodes.
pub fn psi0_with_mu(dd: &DiscreteDomain, mu: f64, req: &PsiRequirement) -> PsiBarrier {
    let (center, radius) = enclosing_radius(dd);
    let big_r = 2.0 * radius;
    let top = 1.0 + (mu * big_r).cosh();
    let values: Vec<f64> = (0..dd.len())
        .into_par_iter()
        .map(|i| top - (mu * dist(&dd.point(i), &center)).cosh())
        .collect();
    let n = dd.dirs().len();
    let mut pos = vec![usize::MAX; dd.len()];
    for (p, &i) in dd.interior().iter().enumerate() {
        pos[i] = p;
    }
    let h = dd.h();
    let per_node: Vec<(Vec<f64>, Vec<f64>)> = dd
        .interior()
        .par_iter()
        .map(|&i| {
            let x = dd.point(i);
            let dirs = dd.dirs();
            let gaps: Vec<f64> = (0..n)
                .map(|k| {
                    let y: Vec<f64> = x.iter().zip(dirs.vector(k)).map(|(a, l)| a + h * l).collect();
                    cosh_gap(mu, &x, &y, &center)
                })
                .collect();
            let first: Vec<f64> = gaps.iter().map(|g| -g / h).collect();
            let second: Vec<f64> = (0..n).map(|k| -(gaps[k] + gaps[dirs.opposite(k)]) / (h * h)).collect();
            (first, second)
        })
        .collect();
    let mut first = Vec::with_capacity(per_node.len() * n);
    let mut second = Vec::with_capacity(per_node.len() * n);
    for (f, s) in per_node {
        first.extend(f);
        second.extend(s);
    }
    let mut psi = PsiBarrier {
        mu,
        big_r,
        center,
        values,
        pos,
        first,
        second,
        n,
        check: BarrierCheck { nodes: 0, corner_cases: 0.0, violations: 0, worst: 0.0 },
    };
    psi.check = psi.verify(dd, req);
    psi
}

/// Doubles `μ` from 1 until the barrier inequality holds at every interior node.
pub fn build_psi0_with(dd: &DiscreteDomain, req: &PsiRequirement) -> Result<PsiBarrier> {
    if dd.interior().is_empty() {
        return Err(Error::EmptyInterior { h: dd.h(), inradius: dd.domain().inradius });
    }
    let (_, radius) = enclosing_radius(dd);
    let mut mu: f64 = 1.0;
    let mut best = f64::INFINITY;
    while mu <= 1048576.0 && mu * 2.0 * radius < 700.0 {
        let psi = psi0_with_mu(dd, mu, req);
        if psi.check.violations == 0 {
            return Ok(psi);
        }
        best = best.min(psi.check.worst);
        mu *= 2.0;
    }
    Err(Error::BarrierSearch(format!(
        "no μ up to {mu} satisfies the barrier inequality at h = {} (best worst-case left side {best:.3e}); retry with smaller h",
        dd.h()
    )))
}

/// `Ψ₀` covering the operator's declared slope box.
pub fn build_psi0(dd: &DiscreteDomain, op: &OperatorSpec) -> Result<PsiBarrier> {
    build_psi0_with(dd, &PsiRequirement::from_bounds(&op.bounds))
}

/// Checks the barrier inequality for arbitrary node values, with numerical
/// differences (used for negative controls).
pub fn check_barrier_values(dd: &DiscreteDomain, values: &GridFunction, req: &PsiRequirement) -> BarrierCheck {
    let lhs: Vec<f64> = dd
        .interior()
        .iter()
        .map(|&i| req.lhs(&dd.first_difference_vector(values, i), &dd.discrete_hessian_vector(values, i)))
        .collect();
    summarize(&lhs, dd.dirs().len())
}

/// Scratch-free evaluation of `H` at one node.
fn eval_node(op: &OperatorSpec, dd: &DiscreteDomain, v: &[f64], idx: usize, buf: &mut NodeBuf) -> f64 {
    fill_jet(dd, v, idx, buf);
    op.kernel.eval(&Jet::new(v[idx], &buf.first, &buf.second), &buf.x)
}

struct NodeBuf {
    x: Vec<f64>,
    first: Vec<f64>,
    second: Vec<f64>,
    grad: Vec<f64>,
}

impl NodeBuf {
    fn new(dd: &DiscreteDomain) -> Self {
        let n = dd.dirs().len();
        NodeBuf { x: vec![0.0; dd.dims()], first: vec![0.0; n], second: vec![0.0; n], grad: vec![0.0; 1 + 2 * n] }
    }
}

fn fill_jet(dd: &DiscreteDomain, v: &[f64], idx: usize, buf: &mut NodeBuf) {
    let h = dd.h();
    let dirs = dd.dirs();
    let c = v[idx];
    dd.point_into(idx, &mut buf.x);
    for k in 0..dirs.len() {
        let plus = v[dd.neighbor(idx, k)];
        let minus = v[dd.neighbor(idx, dirs.opposite(k))];
        buf.first[k] = (plus - c) / h;
        buf.second[k] = (plus - 2.0 * c + minus) / (h * h);
    }
}

/// Per-node residual `H_h[v]` on `Ω^h` (zero elsewhere) and its norms.
#[derive(Clone, Debug)]
pub struct Residual {
    pub values: Vec<f64>,
    pub sup: f64,
    cell_volume: f64,
}

impl Residual {
    /// `(Σ_{Ω^h} |r|^p · (h/q)^d)^{1/p}`: a Riemann sum for the `L_p` norm.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let s: f64 = self.values.iter().map(|r| r.abs().powf(p)).sum();
        (s * self.cell_volume).powf(1.0 / p)
    }
}

pub fn residual(op: &OperatorSpec, dd: &DiscreteDomain, v: &GridFunction) -> Result<Residual> {
    let vals: Vec<f64> = dd
        .interior()
        .par_iter()
        .map_init(|| NodeBuf::new(dd), |buf, &i| eval_node(op, dd, &v.values, i, buf))
        .collect();
    if let Some(p) = vals.iter().position(|r| !r.is_finite()) {
        return Err(Error::NonFinite { node: dd.interior()[p] });
    }
    let mut values = vec![0.0; dd.len()];
    let mut sup: f64 = 0.0;
    for (&i, r) in dd.interior().iter().zip(vals) {
        values[i] = r;
        sup = sup.max(r.abs());
    }
    Ok(Residual { values, sup, cell_volume: dd.cell_volume() })
}

/// `H̄_h[u](x)`: the operator for `u = v/Ψ₀`, evaluated through the
/// substitutions `Z'_0 = z'_0Ψ₀`, `Z'_j = z'_j T_jΨ₀ + z'_0 δ_jΨ₀`,
/// `Z''_j = z''_jΨ₀ + z'_j δ_jΨ₀ + z'_{−j} δ_{−j}Ψ₀ + z'_0 Δ_jΨ₀`.
pub fn transformed_operator(op: &OperatorSpec, dd: &DiscreteDomain, psi: &PsiBarrier, u: &GridFunction) -> Vec<f64> {
    let vals: Vec<f64> = dd
        .interior()
        .par_iter()
        .map_init(|| NodeBuf::new(dd), |buf, &i| transformed_at(op, dd, psi, &u.values, i, buf))
        .collect();
    let mut out = vec![0.0; dd.len()];
    for (&i, r) in dd.interior().iter().zip(vals) {
        out[i] = r;
    }
    out
}

fn transformed_at(op: &OperatorSpec, dd: &DiscreteDomain, psi: &PsiBarrier, u: &[f64], idx: usize, buf: &mut NodeBuf) -> f64 {
    fill_jet(dd, u, idx, buf);
    let dirs = dd.dirs();
    let n = dirs.len();
    let (dpsi, d2psi) = (psi.first(idx), psi.second(idx));
    let p0 = psi.values[idx];
    let z0 = u[idx];
    let mut zf = vec![0.0; n];
    let mut zs = vec![0.0; n];
    for j in 0..n {
        let o = dirs.opposite(j);
        let shifted = psi.values[dd.neighbor(idx, j)];
        zf[j] = buf.first[j] * shifted + z0 * dpsi[j];
        zs[j] = buf.second[j] * p0 + buf.first[j] * dpsi[j] + buf.first[o] * dpsi[o] + z0 * d2psi[j];
    }
    op.kernel.eval(&Jet::new(z0 * p0, &zf, &zs), &buf.x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Default)]
pub enum Method {
    /// Semismooth Newton with line search; Richardson sweeps as a fallback.
    #[default]
    Newton,
    /// Damped explicit sweeps `u ← u + τ_x H̄_h[u]` on the transformed unknown.
    Richardson,
}

#[derive(Clone, Debug, Default)]
pub enum Initial {
    /// `v⁰ = g` at every node.
    #[default]
    Boundary,
    /// `g` plus uniform noise in `[−amplitude, amplitude]` on `Ω^h`.
    Random { seed: u64, amplitude: f64 },
    Given(GridFunction),
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub method: Method,
    pub initial: Initial,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-8, max_iters: 1_000_000, method: Method::Newton, initial: Initial::Boundary }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SupBoundCheck {
    pub sup_v: f64,
    pub h_bar: f64,
    pub sup_g: f64,
    /// `sup|v| / (H̄ + sup|g|)`.
    pub measured_n: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub solution: GridFunction,
    pub method: Method,
    pub iterations: usize,
    pub final_residual: f64,
    /// Damping step `0.9/L_h` in `v` units (infinite `L_h` gives 0).
    pub tau: f64,
    pub psi_mu: f64,
    pub sup_bound_check: SupBoundCheck,
    pub trajectory: Vec<f64>,
    /// Sup-norm update sizes of the explicit sweeps, in `v` units.
    pub increments: Vec<f64>,
}

/// `L_h = c_max + Σ_k (2 a_hi_k/h² + b_max/h)`.
pub fn lipschitz_bound(bounds: &CoefficientBox, h: f64) -> f64 {
    let mut l = bounds.c_max;
    for a in &bounds.a_hi {
        l += 2.0 * a / (h * h);
        if bounds.b_max > 0.0 {
            l += bounds.b_max / h;
        }
    }
    l
}

fn initial_values(dd: &DiscreteDomain, g: &Field, initial: &Initial) -> Result<Vec<f64>> {
    let mut v: Vec<f64> = (0..dd.len()).into_par_iter().map(|i| g.eval(&dd.point(i))).collect();
    match initial {
        Initial::Boundary => {}
        Initial::Random { seed, amplitude } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            for &i in dd.interior() {
                v[i] += rng.gen_range(-amplitude..=*amplitude);
            }
        }
        Initial::Given(u) => {
            if u.values.len() != dd.len() {
                return Err(invalid("initial", "grid function size differs from the lattice"));
            }
            for &i in dd.interior() {
                v[i] = u.values[i];
            }
        }
    }
    Ok(v)
}

pub fn solve(op: &OperatorSpec, dd: &DiscreteDomain, g: &Field, opts: &SolveOptions) -> Result<SolveReport> {
    if !(opts.tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    if op.dirs.len() != dd.dirs().len() || op.dims() != dd.dims() {
        return Err(invalid("operator", "direction set differs from the lattice's"));
    }
    let psi = build_psi0(dd, op)?;
    let l_h = lipschitz_bound(&op.bounds, dd.h());
    let tau = if l_h.is_finite() { 0.9 / l_h } else { 0.0 };
    let mut v = initial_values(dd, g, &opts.initial)?;
    let mut trajectory = Vec::new();
    let mut increments = Vec::new();
    let iterations = match opts.method {
        Method::Richardson => {
            if tau == 0.0 {
                return Err(invalid("method", "explicit sweeps need finite coefficient bounds"));
            }
            richardson(op, dd, &psi, &mut v, tau, opts.tol, opts.max_iters, &mut trajectory, &mut increments)?
        }
        Method::Newton => newton(op, dd, &mut v, tau, opts, &mut trajectory, &mut increments)?,
    };
    let solution = GridFunction { values: v };
    let res = residual(op, dd, &solution)?;
    if res.sup > opts.tol {
        return Err(Error::NotConverged { iterations, residual: res.sup, trajectory });
    }
    let sup_v = solution.sup_abs_in_domain(dd);
    let sup_g = (0..dd.len())
        .filter(|&i| dd.in_domain(i))
        .map(|i| g.eval(&dd.point(i)).abs())
        .fold(0.0, f64::max);
    let denom = op.h_bar + sup_g;
    Ok(SolveReport {
        solution,
        method: opts.method,
        iterations,
        final_residual: res.sup,
        tau,
        psi_mu: psi.mu,
        sup_bound_check: SupBoundCheck {
            sup_v,
            h_bar: op.h_bar,
            sup_g,
            measured_n: if denom > 0.0 { sup_v / denom } else { 0.0 },
        },
        trajectory,
        increments,
    })
}

#[allow(clippy::too_many_arguments)]
fn richardson(
    op: &OperatorSpec,
    dd: &DiscreteDomain,
    psi: &PsiBarrier,
    v: &mut [f64],
    tau: f64,
    tol: f64,
    max_iters: usize,
    trajectory: &mut Vec<f64>,
    increments: &mut Vec<f64>,
) -> Result<usize> {
    let mut u = GridFunction { values: v.iter().zip(&psi.values).map(|(a, p)| a / p).collect() };
    let mut iters = 0;
    loop {
        let hbar = transformed_operator(op, dd, psi, &u);
        let mut sup: f64 = 0.0;
        for &i in dd.interior() {
            if !hbar[i].is_finite() {
                return Err(Error::NonFinite { node: i });
            }
            sup = sup.max(hbar[i].abs());
        }
        trajectory.push(sup);
        if sup <= tol {
            break;
        }
        if iters >= max_iters {
            return Err(Error::NotConverged { iterations: iters, residual: sup, trajectory: trajectory.clone() });
        }
        let mut inc: f64 = 0.0;
        for &i in dd.interior() {
            let step = tau / psi.values[i] * hbar[i];
            u.values[i] += step;
            inc = inc.max((step * psi.values[i]).abs());
        }
        increments.push(inc);
        iters += 1;
    }
    for &i in dd.interior() {
        v[i] = u.values[i] * psi.values[i];
    }
    Ok(iters)
}

/// Residual and Jacobian rows `(column, value)` over the interior ordering.
fn linearize(op: &OperatorSpec, dd: &DiscreteDomain, v: &[f64], pos: &[usize]) -> Result<(Vec<f64>, Vec<Vec<(usize, f64)>>)> {
    let h = dd.h();
    let dirs = dd.dirs();
    let n = dirs.len();
    let rows: Vec<(f64, Vec<(usize, f64)>)> = dd
        .interior()
        .par_iter()
        .map_init(
            || NodeBuf::new(dd),
            |buf, &i| {
                fill_jet(dd, v, i, buf);
                let NodeBuf { x, first, second, grad } = buf;
                let f = op.kernel.eval_grad(&Jet::new(v[i], first, second), x, grad);
                let mut diag = grad[0];
                let mut row = Vec::with_capacity(n + 1);
                for j in 0..n {
                    let gf = grad[1 + j];
                    let gs = grad[1 + n + j];
                    diag -= gf / h + 2.0 * gs / (h * h);
                    let w = gf / h + (gs + grad[1 + n + dirs.opposite(j)]) / (h * h);
                    let nb = dd.neighbor(i, j);
                    if pos[nb] != usize::MAX && w != 0.0 {
                        row.push((pos[nb], w));
                    }
                }
                row.push((pos[i], diag));
                (f, row)
            },
        )
        .collect();
    let mut f = Vec::with_capacity(rows.len());
    let mut jac = Vec::with_capacity(rows.len());
    for (k, (fi, row)) in rows.into_iter().enumerate() {
        if !fi.is_finite() {
            return Err(Error::NonFinite { node: dd.interior()[k] });
        }
        f.push(fi);
        jac.push(row);
    }
    Ok((f, jac))
}

fn interior_residual(op: &OperatorSpec, dd: &DiscreteDomain, v: &[f64]) -> Vec<f64> {
    dd.interior()
        .par_iter()
        .map_init(|| NodeBuf::new(dd), |buf, &i| eval_node(op, dd, v, i, buf))
        .collect()
}

fn sup_abs(r: &[f64]) -> f64 {
    r.iter().fold(0.0, |a, b| if b.is_nan() { f64::NAN } else { a.max(b.abs()) })
}

fn l2(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum::<f64>().sqrt()
}

const FALLBACK_SWEEPS: usize = 25;

fn newton(
    op: &OperatorSpec,
    dd: &DiscreteDomain,
    v: &mut [f64],
    tau: f64,
    opts: &SolveOptions,
    trajectory: &mut Vec<f64>,
    increments: &mut Vec<f64>,
) -> Result<usize> {
    let interior = dd.interior();
    let mut pos = vec![usize::MAX; dd.len()];
    for (p, &i) in interior.iter().enumerate() {
        pos[i] = p;
    }
    let mut iters = 0;
    let mut trial = v.to_vec();
    loop {
        let (f, rows) = linearize(op, dd, v, &pos)?;
        let sup = sup_abs(&f);
        trajectory.push(sup);
        if sup <= opts.tol {
            return Ok(iters);
        }
        if iters >= opts.max_iters || !sup.is_finite() {
            return Err(Error::NotConverged { iterations: iters, residual: sup, trajectory: trajectory.clone() });
        }
        iters += 1;
        let jac = CsrMatrix::from_rows(rows);
        let rhs: Vec<f64> = f.iter().map(|x| -x).collect();
        let mut dx = vec![0.0; f.len()];
        let solved = match Ilu0::new(&jac) {
            Some(ilu) => bicgstab(&jac, &ilu, &rhs, &mut dx, 1e-12, 2000) < 1e-6,
            None => false,
        };
        let merit = l2(&f);
        let mut accepted = false;
        if solved {
            let mut lambda = 1.0;
            while lambda >= 1.0 / 64.0 {
                trial.copy_from_slice(v);
                for (p, &i) in interior.iter().enumerate() {
                    trial[i] = v[i] + lambda * dx[p];
                }
                let ft = interior_residual(op, dd, &trial);
                if l2(&ft) <= (1.0 - 1e-4 * lambda) * merit || sup_abs(&ft) <= opts.tol {
                    v.copy_from_slice(&trial);
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
        }
        if !accepted {
            if tau == 0.0 {
                return Err(Error::NotConverged { iterations: iters, residual: sup, trajectory: trajectory.clone() });
            }
            for _ in 0..FALLBACK_SWEEPS {
                let r = interior_residual(op, dd, v);
                let mut inc: f64 = 0.0;
                for (p, &i) in interior.iter().enumerate() {
                    v[i] += tau * r[p];
                    inc = inc.max((tau * r[p]).abs());
                }
                increments.push(inc);
            }
            iters += FALLBACK_SWEEPS;
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonReport {
    /// `u ≤ v` on `∂_hΩ`.
    pub boundary_ordered: bool,
    /// `H_h[u] ≥ H_h[v]` on `Ω^h`.
    pub operator_ordered: bool,
    /// `u ≤ v` on `Ω̄`.
    pub conclusion_holds: bool,
    pub premises_hold: bool,
    /// Largest `u − v` over in-domain nodes.
    pub max_excess: f64,
    /// Premises hold but the conclusion fails.
    pub violated: bool,
}

pub fn comparison_check(op: &OperatorSpec, dd: &DiscreteDomain, u: &GridFunction, v: &GridFunction) -> Result<ComparisonReport> {
    let hu = residual(op, dd, u)?;
    let hv = residual(op, dd, v)?;
    let boundary_ordered = dd.boundary().iter().all(|&i| u.values[i] <= v.values[i]);
    let operator_ordered = dd.interior().iter().all(|&i| hu.values[i] >= hv.values[i]);
    let max_excess = (0..dd.len())
        .filter(|&i| dd.kind(i) != NodeKind::Outside)
        .map(|i| u.values[i] - v.values[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let conclusion_holds = max_excess <= 0.0;
    let premises_hold = boundary_ordered && operator_ordered;
    Ok(ComparisonReport {
        boundary_ordered,
        operator_ordered,
        conclusion_holds,
        premises_hold,
        max_excess,
        violated: premises_hold && !conclusion_holds,
    })
}

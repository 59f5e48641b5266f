//! Operators `H(z, x)` in pure-difference form, with declared coefficient
//! boxes, the cut-off composite `H_K = max(H, P − K)`, built-in examples and
//! secant-slope audits.
//!
//! The argument `z = (z', z'')` is carried by [`Jet`]: `z'_0` is the value,
//! `z'_{±k}` the first differences and `z''_{±k}` the second differences,
//! indexed like the direction set (`k < m` is `+k`, `m + k` is `−k`).

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::directions::{cutoff_p, norm, DirectionSet};
use crate::error::{invalid, Error, Result};
use crate::field::Field;

#[derive(Clone, Copy, Debug)]
pub struct Jet<'a> {
    pub value: f64,
    pub first: &'a [f64],
    pub second: &'a [f64],
}

impl<'a> Jet<'a> {
    pub fn new(value: f64, first: &'a [f64], second: &'a [f64]) -> Self {
        Jet { value, first, second }
    }
}

/// Layout of a gradient with respect to `z`: `[z'_0, z'_{±k}…, z''_{±k}…]`.
pub fn grad_len(dirs: &DirectionSet) -> usize {
    1 + 2 * dirs.len()
}

pub trait Kernel: Send + Sync {
    fn eval(&self, z: &Jet, x: &[f64]) -> f64;

    /// Value together with an element of the generalized gradient.
    ///
    /// The default uses forward differences, which for piecewise-linear
    /// kernels return exact one-sided slopes.
    fn eval_grad(&self, z: &Jet, x: &[f64], grad: &mut [f64]) -> f64 {
        let base = self.eval(z, x);
        let n = z.first.len();
        let mut first = z.first.to_vec();
        let mut second = z.second.to_vec();
        let step = |v: f64| 1e-7 * (1.0 + v.abs());
        let s = step(z.value);
        grad[0] = (self.eval(&Jet::new(z.value + s, &first, &second), x) - base) / s;
        for j in 0..n {
            let s = step(first[j]);
            let keep = first[j];
            first[j] += s;
            grad[1 + j] = (self.eval(&Jet::new(z.value, &first, &second), x) - base) / s;
            first[j] = keep;
        }
        for k in 0..n {
            let s = step(second[k]);
            let keep = second[k];
            second[k] += s;
            grad[1 + n + k] = (self.eval(&Jet::new(z.value, &first, &second), x) - base) / s;
            second[k] = keep;
        }
        base
    }
}

/// Declared secant-slope boxes: `∂H/∂z''_k ∈ [a_lo_k, a_hi_k]`,
/// `|∂H/∂z'_j| ≤ b_max`, `∂H/∂z'_0 ∈ [−c_max, 0]`.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct CoefficientBox {
    pub a_lo: Vec<f64>,
    pub a_hi: Vec<f64>,
    pub b_max: f64,
    pub c_max: f64,
}

impl CoefficientBox {
    pub fn uniform(len: usize, a_lo: f64, a_hi: f64, b_max: f64, c_max: f64) -> Self {
        CoefficientBox { a_lo: vec![a_lo; len], a_hi: vec![a_hi; len], b_max, c_max }
    }
    pub fn a_min(&self) -> f64 {
        self.a_lo.iter().cloned().fold(f64::INFINITY, f64::min)
    }
    pub fn a_max(&self) -> f64 {
        self.a_hi.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
    /// Smallest box containing both.
    pub fn hull(&self, other: &CoefficientBox) -> CoefficientBox {
        CoefficientBox {
            a_lo: self.a_lo.iter().zip(&other.a_lo).map(|(a, b)| a.min(*b)).collect(),
            a_hi: self.a_hi.iter().zip(&other.a_hi).map(|(a, b)| a.max(*b)).collect(),
            b_max: self.b_max.max(other.b_max),
            c_max: self.c_max.max(other.c_max),
        }
    }
    /// `[min, max]` of `⟨a, dz⟩` over the box, `dz` in gradient layout.
    pub fn pairing_range(&self, dz: &[f64]) -> (f64, f64) {
        let n = self.a_lo.len();
        let mut lo = 0.0;
        let mut hi = 0.0;
        let mut add = |d: f64, a: f64, b: f64| {
            if d != 0.0 {
                let (p, q) = (a * d, b * d);
                lo += p.min(q);
                hi += p.max(q);
            }
        };
        add(dz[0], -self.c_max, 0.0);
        for j in 0..n {
            add(dz[1 + j], -self.b_max, self.b_max);
        }
        for k in 0..n {
            add(dz[1 + n + k], self.a_lo[k], self.a_hi[k]);
        }
        (lo, hi)
    }
}

/// An operator together with the constants the theory attaches to it.
#[derive(Clone)]
pub struct OperatorSpec {
    pub name: String,
    pub dirs: DirectionSet,
    pub kernel: Arc<dyn Kernel>,
    pub bounds: CoefficientBox,
    /// Ellipticity constant `δ`; the cut-off uses `P` with coefficients in `[δ/2, 2/δ]`.
    pub delta: f64,
    /// Growth constant `K₀`.
    pub k0: f64,
    /// `H̄ = sup (|H(z', 0, x)| − K₀|z'|)`.
    pub h_bar: f64,
    /// Global Lipschitz constant in `z`, when one exists.
    pub lipschitz: Option<f64>,
    /// Modulus of continuity in `z'`, descriptive only.
    pub omega: String,
    /// Set on `H_K`: the cut-off level and the uncut operator.
    pub cutoff: Option<(f64, Arc<OperatorSpec>)>,
}

impl std::fmt::Debug for OperatorSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OperatorSpec")
            .field("name", &self.name)
            .field("delta", &self.delta)
            .field("k0", &self.k0)
            .field("h_bar", &self.h_bar)
            .field("cutoff", &self.cutoff.as_ref().map(|c| c.0))
            .finish()
    }
}

impl OperatorSpec {
    pub fn dims(&self) -> usize {
        self.dirs.dims()
    }

    #[inline]
    pub fn eval(&self, z: &Jet, x: &[f64]) -> f64 {
        self.kernel.eval(z, x)
    }

    pub fn eval_parts(&self, value: f64, first: &[f64], second: &[f64], x: &[f64]) -> f64 {
        self.kernel.eval(&Jet::new(value, first, second), x)
    }

    /// The uncut operator (itself unless this is a cut-off composite).
    pub fn uncut(&self) -> &OperatorSpec {
        match &self.cutoff {
            Some((_, base)) => base.uncut(),
            None => self,
        }
    }
}

/// Wraps a closure as a kernel.
pub struct FnKernel<F>(pub F);

impl<F> Kernel for FnKernel<F>
where
    F: Fn(&Jet, &[f64]) -> f64 + Send + Sync,
{
    fn eval(&self, z: &Jet, x: &[f64]) -> f64 {
        (self.0)(z, x)
    }
}

struct CutoffKernel {
    inner: Arc<dyn Kernel>,
    p: f64,
    level: f64,
}

impl Kernel for CutoffKernel {
    fn eval(&self, z: &Jet, x: &[f64]) -> f64 {
        self.inner.eval(z, x).max(cutoff_p(z.second, self.p) - self.level)
    }

    fn eval_grad(&self, z: &Jet, x: &[f64], grad: &mut [f64]) -> f64 {
        let inner = self.inner.eval_grad(z, x, grad);
        let cut = cutoff_p(z.second, self.p) - self.level;
        if inner >= cut {
            return inner;
        }
        let n = z.second.len();
        grad[..1 + n].iter_mut().for_each(|g| *g = 0.0);
        for (k, &t) in z.second.iter().enumerate() {
            grad[1 + n + k] = if t > 0.0 { 2.0 / self.p } else { self.p / 2.0 };
        }
        cut
    }
}

/// `H_K(z, x) = max(H(z, x), P(z'') − K)` with `P` over `[δ/2, 2δ^{-1}]`.
pub fn make_cutoff_operator(h: &OperatorSpec, k: f64) -> Result<OperatorSpec> {
    if !(k >= 0.0) {
        return Err(invalid("K", format!("{k} must be nonnegative")));
    }
    let n = h.dirs.len();
    let p_box = CoefficientBox::uniform(n, h.delta / 2.0, 2.0 / h.delta, 0.0, 0.0);
    Ok(OperatorSpec {
        name: format!("{}_cut{}", h.name, k),
        dirs: h.dirs.clone(),
        kernel: Arc::new(CutoffKernel { inner: h.kernel.clone(), p: h.delta, level: k }),
        bounds: h.bounds.hull(&p_box),
        delta: h.delta,
        k0: h.k0,
        h_bar: h.h_bar,
        lipschitz: h.lipschitz.map(|l| l.max(2.0 / h.delta * (n as f64).sqrt())),
        omega: h.omega.clone(),
        cutoff: Some((k, Arc::new(h.clone()))),
    })
}

/// The bare cut-off majorant `P` as an operator, with box `[p/2, 2/p]`.
pub fn cutoff_operator(dirs: &DirectionSet, p: f64) -> OperatorSpec {
    let n = dirs.len();
    OperatorSpec {
        name: "cutoff_p".into(),
        dirs: dirs.clone(),
        kernel: Arc::new(FnKernel(move |z: &Jet, _: &[f64]| cutoff_p(z.second, p))),
        bounds: CoefficientBox::uniform(n, p / 2.0, 2.0 / p, 0.0, 0.0),
        delta: p,
        k0: 0.0,
        h_bar: 0.0,
        lipschitz: Some(2.0 / p * (n as f64).sqrt()),
        omega: "none".into(),
        cutoff: None,
    }
}

/// Weights `w_k` with `Σ_k w_k l_k l_k^* = I` on the standard set, so that
/// `Σ_k w_k z''_k` is the Laplacian of the underlying Hessian.
fn isotropic_weights(dirs: &DirectionSet) -> Result<Vec<f64>> {
    let d = dirs.dims();
    if dirs.m() != d + d * (d - 1) {
        return Err(invalid("dirs", "isotropic weights need the standard direction set"));
    }
    let (axis, diag) = match d {
        1 => (0.5, 0.0),
        2 => (0.25, 0.5),
        _ => (0.25, 0.25),
    };
    Ok((0..dirs.len())
        .map(|k| {
            let l = dirs.vector(k);
            if l.iter().filter(|c| **c != 0.0).count() == 1 {
                axis
            } else {
                diag
            }
        })
        .collect())
}

struct PoissonKernel {
    weights: Vec<f64>,
    f: Field,
}

impl Kernel for PoissonKernel {
    fn eval(&self, z: &Jet, x: &[f64]) -> f64 {
        self.weights.iter().zip(z.second).map(|(w, s)| w * s).sum::<f64>() - self.f.eval(x)
    }
    fn eval_grad(&self, z: &Jet, x: &[f64], grad: &mut [f64]) -> f64 {
        let n = z.second.len();
        grad[..1 + n].iter_mut().for_each(|g| *g = 0.0);
        grad[1 + n..].copy_from_slice(&self.weights);
        self.eval(z, x)
    }
}

/// `Δu − f` written as `Σ_k w_k z''_k − f(x)` over every standard direction.
///
/// `f_sup` is `sup|f|` on the domain of interest (it becomes `H̄`).
pub fn example_poisson(dirs: &DirectionSet, f: Field, f_sup: f64) -> Result<OperatorSpec> {
    let weights = isotropic_weights(dirs)?;
    let lo = weights.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = weights.iter().cloned().fold(0.0, f64::max);
    let delta = lo.min(1.0 / hi);
    Ok(OperatorSpec {
        name: "poisson".into(),
        dirs: dirs.clone(),
        bounds: CoefficientBox { a_lo: weights.clone(), a_hi: weights.clone(), b_max: 0.0, c_max: 0.0 },
        kernel: Arc::new(PoissonKernel { weights, f }),
        delta,
        k0: 0.0,
        h_bar: f_sup,
        lipschitz: Some(hi * (dirs.len() as f64).sqrt()),
        omega: "none".into(),
        cutoff: None,
    })
}

struct Eq12Kernel {
    /// (`+`, `−` index of `(e_i+e_j)/2`, `+`, `−` index of `(e_i−e_j)/2`)
    pairs: Vec<[usize; 4]>,
    /// (`+`, `−` index of `e_i`)
    axes: Vec<[usize; 2]>,
    g_bar: Field,
    f: Field,
}

impl Eq12Kernel {
    fn parts<'a>(&'a self, z: &'a [f64]) -> impl Iterator<Item = (f64, f64)> + 'a {
        self.pairs.iter().map(move |p| (0.5 * (z[p[0]] + z[p[1]]), 0.5 * (z[p[2]] + z[p[3]])))
    }
}

impl Kernel for Eq12Kernel {
    fn eval(&self, z: &Jet, x: &[f64]) -> f64 {
        let g = self.g_bar.eval(x);
        let mixed: f64 = self.parts(z.second).map(|(p, m)| g.min((p - m).abs()) + 2.0 * (p + m)).sum();
        let axes: f64 = self.axes.iter().map(|a| 0.5 * (z.second[a[0]] + z.second[a[1]])).sum();
        mixed + axes - self.f.eval(x)
    }

    fn eval_grad(&self, z: &Jet, x: &[f64], grad: &mut [f64]) -> f64 {
        let n = z.second.len();
        grad.iter_mut().for_each(|g| *g = 0.0);
        let g = self.g_bar.eval(x);
        let mut total = -self.f.eval(x);
        for pair in &self.pairs {
            let (p, m) = (0.5 * (z.second[pair[0]] + z.second[pair[1]]), 0.5 * (z.second[pair[2]] + z.second[pair[3]]));
            let s = p - m;
            let slope = if s.abs() < g { s.signum() } else { 0.0 };
            total += g.min(s.abs()) + 2.0 * (p + m);
            for &i in &pair[..2] {
                grad[1 + n + i] = 0.5 * (2.0 + slope);
            }
            for &i in &pair[2..] {
                grad[1 + n + i] = 0.5 * (2.0 - slope);
            }
        }
        for a in &self.axes {
            total += 0.5 * (z.second[a[0]] + z.second[a[1]]);
            grad[1 + n + a[0]] = 0.5;
            grad[1 + n + a[1]] = 0.5;
        }
        total
    }
}

/// `Σ_{(i,j)} [Ḡ(x) ∧ |D_ij u| + 2(z''_{ij+} + z''_{ij−})] + Σ_i z''_{e_i} − f(x)`
/// over the pairs `(1,2), (2,3), (3,1)`: the three-dimensional mixed-derivative
/// equation `Σ Ḡ ∧ |D_ij u| + 3Δu − f = 0` in pure-difference form.
///
/// Each pure value is the average of its `±k` entries, so per signed entry the
/// slopes are `[1/2, 3/2]` on half-diagonals and `1/2` on axes; `δ = 1/3`.
/// `domain_box` bounds the region where `Ḡ ≥ 0` is checked and `sup|f|` taken.
pub fn example_eq12(dirs: &DirectionSet, g_bar: Field, f: Field, domain_box: (&[f64], &[f64])) -> Result<OperatorSpec> {
    if dirs.dims() != 3 {
        return Err(Error::UnsupportedDimension(dirs.dims()));
    }
    let (lo, hi) = domain_box;
    let (g_min, _) = g_bar.range_over(lo, hi);
    if g_min < 0.0 {
        return Err(Error::NegativeSample { field: "G_bar", value: g_min });
    }
    let opp = |k: usize| dirs.opposite(k);
    let mut pairs = Vec::new();
    for (i, j) in [(0, 1), (1, 2), (0, 2)] {
        let plus = dirs.half_diagonal(i, j, 1).ok_or_else(|| invalid("dirs", "missing half-diagonal"))?;
        let minus = dirs.half_diagonal(i, j, -1).ok_or_else(|| invalid("dirs", "missing half-diagonal"))?;
        pairs.push([plus, opp(plus), minus, opp(minus)]);
    }
    let axes: Vec<[usize; 2]> = (0..3).map(|i| [dirs.axis(i), opp(dirs.axis(i))]).collect();
    let n = dirs.len();
    let mut a_lo = vec![0.0; n];
    let mut a_hi = vec![0.0; n];
    for p in &pairs {
        for &i in p {
            a_lo[i] = 0.5;
            a_hi[i] = 1.5;
        }
    }
    for a in &axes {
        for &i in a {
            a_lo[i] = 0.5;
            a_hi[i] = 0.5;
        }
    }
    let touched = a_hi.iter().filter(|v| **v > 0.0).count();
    if touched != n {
        return Err(invalid("dirs", "eq12 expects exactly the standard three-dimensional set"));
    }
    let h_bar = f.sup_abs_over(lo, hi);
    Ok(OperatorSpec {
        name: "eq12".into(),
        dirs: dirs.clone(),
        kernel: Arc::new(Eq12Kernel { pairs, axes, g_bar, f }),
        bounds: CoefficientBox { a_lo, a_hi, b_max: 0.0, c_max: 0.0 },
        delta: 1.0 / 3.0,
        k0: 0.0,
        h_bar,
        lipschitz: Some(1.5 * (n as f64).sqrt()),
        omega: "none".into(),
        cutoff: None,
    })
}

/// Member `Σ a_k z''_k + Σ b_j z'_j − c z'_0 + f(x)` of a Bellman or Isaacs family.
#[derive(Clone, Debug)]
pub struct LinearMember {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: f64,
    pub f: Field,
}

impl LinearMember {
    fn eval(&self, z: &Jet, x: &[f64]) -> f64 {
        let second: f64 = self.a.iter().zip(z.second).map(|(a, s)| a * s).sum();
        let first: f64 = self.b.iter().zip(z.first).map(|(b, s)| b * s).sum();
        second + first - self.c * z.value + self.f.eval(x)
    }
    fn write_grad(&self, grad: &mut [f64]) {
        let n = self.a.len();
        grad[0] = -self.c;
        grad[1..1 + n].copy_from_slice(&self.b);
        grad[1 + n..].copy_from_slice(&self.a);
    }
}

struct IsaacsKernel {
    /// max over outer, min over inner
    families: Vec<Vec<LinearMember>>,
}

impl IsaacsKernel {
    fn active(&self, z: &Jet, x: &[f64]) -> (f64, usize, usize) {
        let mut best = (f64::NEG_INFINITY, 0, 0);
        for (i, fam) in self.families.iter().enumerate() {
            let mut low = (f64::INFINITY, 0);
            for (j, mem) in fam.iter().enumerate() {
                let v = mem.eval(z, x);
                if v < low.0 {
                    low = (v, j);
                }
            }
            if low.0 > best.0 {
                best = (low.0, i, low.1);
            }
        }
        best
    }
}

impl Kernel for IsaacsKernel {
    fn eval(&self, z: &Jet, x: &[f64]) -> f64 {
        self.active(z, x).0
    }
    fn eval_grad(&self, z: &Jet, x: &[f64], grad: &mut [f64]) -> f64 {
        let (v, i, j) = self.active(z, x);
        self.families[i][j].write_grad(grad);
        v
    }
}

/// `max_i min_j` of linear members (a Bellman operator when every inner list
/// has one member). Coefficients are validated against `[δ, δ^{-1}]`, `|b| ≤ b_max`,
/// `c ≥ 0`; `f_sup` bounds `sup|f|` over all members.
pub fn example_isaacs(
    dirs: &DirectionSet,
    families: Vec<Vec<LinearMember>>,
    delta: f64,
    b_max: f64,
    f_sup: f64,
) -> Result<OperatorSpec> {
    let n = dirs.len();
    if families.is_empty() || families.iter().any(Vec::is_empty) {
        return Err(invalid("coeff_sets", "empty family"));
    }
    let mut c_max: f64 = 0.0;
    let mut k0: f64 = 0.0;
    for mem in families.iter().flatten() {
        if mem.a.len() != n || mem.b.len() != n {
            return Err(invalid("coeff_sets", "coefficient vectors must have length 2m"));
        }
        for &a in &mem.a {
            if a < delta || a > 1.0 / delta {
                return Err(Error::CoefficientOutOfBox { value: a, lo: delta, hi: 1.0 / delta });
            }
        }
        for &b in &mem.b {
            if b.abs() > b_max {
                return Err(Error::CoefficientOutOfBox { value: b, lo: -b_max, hi: b_max });
            }
        }
        if mem.c < 0.0 {
            return Err(Error::CoefficientOutOfBox { value: mem.c, lo: 0.0, hi: f64::INFINITY });
        }
        c_max = c_max.max(mem.c);
        k0 = k0.max((mem.b.iter().map(|b| b * b).sum::<f64>() + mem.c * mem.c).sqrt());
    }
    let a_max = families.iter().flatten().flat_map(|m| m.a.iter().cloned()).fold(0.0, f64::max);
    let bellman = families.iter().all(|f| f.len() == 1);
    Ok(OperatorSpec {
        name: if bellman { "bellman".into() } else { "isaacs".into() },
        dirs: dirs.clone(),
        kernel: Arc::new(IsaacsKernel { families }),
        bounds: CoefficientBox::uniform(n, delta, 1.0 / delta, b_max, c_max),
        delta,
        k0,
        h_bar: f_sup,
        lipschitz: Some(((a_max * a_max + b_max * b_max) * n as f64 + c_max * c_max).sqrt()),
        omega: "linear".into(),
        cutoff: None,
    })
}

/// Bellman operator: maximum of the given linear members.
pub fn example_bellman(
    dirs: &DirectionSet,
    members: Vec<LinearMember>,
    delta: f64,
    b_max: f64,
    f_sup: f64,
) -> Result<OperatorSpec> {
    example_isaacs(dirs, members.into_iter().map(|m| vec![m]).collect(), delta, b_max, f_sup)
}

/// `sqrt(s + ε²) − ε`, or the plain square root when `ε = 0`.
fn soft_sqrt(s: f64, eps: f64) -> f64 {
    if eps > 0.0 {
        (s + eps * eps).sqrt() - eps
    } else {
        s.sqrt()
    }
}

struct NonUniquenessKernel {
    eps: f64,
    /// `Some(level)` adds the branch `2(z'')⁺ − (z'')⁻/2 − level`.
    second_branch: Option<f64>,
}

impl Kernel for NonUniquenessKernel {
    fn eval(&self, z: &Jet, _x: &[f64]) -> f64 {
        let s = 0.5 * (z.second[0] + z.second[1]);
        let main = s + soft_sqrt(12.0 * z.first[0].abs(), self.eps);
        match self.second_branch {
            Some(level) => main.max(2.0 * s.max(0.0) - 0.5 * (-s).max(0.0) - level),
            None => main,
        }
    }
}

/// Default mollification floor for solver use.
pub const NONUNIQUENESS_EPS: f64 = 1e-6;

/// One-dimensional `u'' + sqrt(12|u'|)` (first difference taken forward).
///
/// Both `0` and `1 − |x|³` solve it on `(−1, 1)` with zero boundary data.
/// With `eps > 0` the square root is replaced by `sqrt(s + ε²) − ε` so the
/// operator is Lipschitz; `eps = 0` is the exact operator for residual studies.
pub fn example_nonuniqueness(eps: f64) -> Result<OperatorSpec> {
    nonuniqueness_impl(eps, None)
}

/// `max(u'' + sqrt(12|u'|), 2(u'')⁺ − (u'')⁻/2 − 7)`, same reference pair.
pub fn example_nonuniqueness_max(eps: f64) -> Result<OperatorSpec> {
    nonuniqueness_impl(eps, Some(7.0))
}

fn nonuniqueness_impl(eps: f64, second_branch: Option<f64>) -> Result<OperatorSpec> {
    if eps < 0.0 {
        return Err(invalid("eps", "must be nonnegative"));
    }
    let dirs = DirectionSet::standard(1, 0.5)?;
    let b_max = if eps > 0.0 { 6.0 / eps } else { f64::INFINITY };
    let (a_lo, a_hi) = if second_branch.is_some() { (0.25, 1.0) } else { (0.5, 0.5) };
    Ok(OperatorSpec {
        name: if second_branch.is_some() { "nonuniqueness_max".into() } else { "nonuniqueness".into() },
        dirs: dirs.clone(),
        kernel: Arc::new(NonUniquenessKernel { eps, second_branch }),
        bounds: CoefficientBox::uniform(2, a_lo, a_hi, b_max, 0.0),
        delta: 0.25,
        // sqrt(12 s) ≤ s + 3
        k0: 1.0,
        h_bar: 3.0,
        lipschitz: (eps > 0.0).then_some(b_max + 2.0),
        omega: if eps > 0.0 { "Lipschitz (mollified)".into() } else { "sqrt(12 t)".into() },
        cutoff: None,
    })
}

/// The reference solutions `0` and `1 − |x|³` of the non-uniqueness example.
pub fn nonuniqueness_reference() -> [(&'static str, fn(&[f64]) -> f64); 2] {
    fn zero(_: &[f64]) -> f64 {
        0.0
    }
    fn cubic(x: &[f64]) -> f64 {
        1.0 - x[0].abs().powi(3)
    }
    [("zero", zero), ("one_minus_abs_cubed", cubic)]
}

#[derive(Clone, Debug, Serialize)]
pub struct SlopeReport {
    pub pairs: usize,
    pub violations: usize,
    pub worst_excess: f64,
}

/// Samples pairs `(z¹, x)`, `(z², x)` and checks
/// `min_a ⟨a, z¹ − z²⟩ ≤ H(z¹, x) − H(z², x) ≤ max_a ⟨a, z¹ − z²⟩` over the
/// declared box. Half of the pairs differ in one coordinate only, which makes
/// a single misdeclared slope visible.
pub fn slope_hull_check(
    op: &OperatorSpec,
    samples: usize,
    radius: f64,
    x_box: (&[f64], &[f64]),
    seed: u64,
) -> SlopeReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = op.dirs.len();
    let len = 1 + 2 * n;
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for s in 0..samples {
        let x: Vec<f64> = x_box.0.iter().zip(x_box.1).map(|(a, b)| rng.gen_range(*a..=*b)).collect();
        let z1: Vec<f64> = (0..len).map(|_| rng.gen_range(-radius..radius)).collect();
        let mut z2 = z1.clone();
        if s % 2 == 0 {
            let j = rng.gen_range(0..len);
            z2[j] = rng.gen_range(-radius..radius);
        } else {
            z2.iter_mut().for_each(|v| *v = rng.gen_range(-radius..radius));
        }
        let h1 = op.eval_parts(z1[0], &z1[1..1 + n], &z1[1 + n..], &x);
        let h2 = op.eval_parts(z2[0], &z2[1..1 + n], &z2[1 + n..], &x);
        let dz: Vec<f64> = z1.iter().zip(&z2).map(|(a, b)| a - b).collect();
        let (lo, hi) = op.bounds.pairing_range(&dz);
        let diff = h1 - h2;
        let tol = 1e-9 * (1.0 + h1.abs() + h2.abs());
        let excess = (lo - diff).max(diff - hi);
        if excess > tol {
            violations += 1;
            worst = worst.max(excess);
        }
    }
    SlopeReport { pairs: samples, violations, worst_excess: worst }
}

#[derive(Clone, Debug, Serialize)]
pub struct DominationReport {
    pub samples: usize,
    pub violations: usize,
    pub min_slack: f64,
}

/// Checks `H(z, x) ≤ P(z'') − (δ/2) Σ_k |z''_k| + K₀|z'| + H̄` at random points.
pub fn domination_check(
    op: &OperatorSpec,
    samples: usize,
    radius: f64,
    x_box: (&[f64], &[f64]),
    seed: u64,
) -> DominationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = op.dirs.len();
    let mut violations = 0;
    let mut min_slack = f64::INFINITY;
    for _ in 0..samples {
        let x: Vec<f64> = x_box.0.iter().zip(x_box.1).map(|(a, b)| rng.gen_range(*a..=*b)).collect();
        let zp: Vec<f64> = (0..=n).map(|_| rng.gen_range(-radius..radius)).collect();
        let z2: Vec<f64> = (0..n).map(|_| rng.gen_range(-radius..radius)).collect();
        let lhs = op.eval_parts(zp[0], &zp[1..], &z2, &x);
        let rhs = cutoff_p(&z2, op.delta) - 0.5 * op.delta * z2.iter().map(|v| v.abs()).sum::<f64>()
            + op.k0 * norm(&zp)
            + op.h_bar;
        let slack = rhs - lhs;
        min_slack = min_slack.min(slack);
        if slack < -1e-9 * (1.0 + lhs.abs()) {
            violations += 1;
        }
    }
    DominationReport { samples, violations, min_slack }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::directions::hessian_to_pure;
    use nalgebra::DMatrix;

    fn d3() -> DirectionSet {
        DirectionSet::standard(3, 1.0 / 3.0).unwrap()
    }

    fn cube() -> (Vec<f64>, Vec<f64>) {
        (vec![-1.0; 3], vec![1.0; 3])
    }

    fn eq12(g: f64, f: f64) -> OperatorSpec {
        let (lo, hi) = cube();
        example_eq12(&d3(), Field::Constant(g), Field::Constant(f), (&lo, &hi)).unwrap()
    }

    fn zeros(n: usize) -> Vec<f64> {
        vec![0.0; n]
    }

    #[test]
    fn eq12_examples() {
        let op = eq12(10.0, 0.0);
        let n = op.dirs.len();
        assert_eq!(op.eval_parts(0.0, &zeros(n), &zeros(n), &[0.0; 3]), 0.0);

        // u = x1 x2, Ḡ = 10, f = 1: 10 ∧ 1 + 3·0 − 1 = 0
        let op = eq12(10.0, 1.0);
        let hess = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let z = hessian_to_pure(&hess, &op.dirs);
        assert!(op.eval_parts(0.0, &zeros(n), &z, &[0.1, 0.2, 0.3]).abs() < 1e-14);
    }

    #[test]
    fn eq12_matches_hessian_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let op = eq12(0.7, 0.3);
        let n = op.dirs.len();
        for _ in 0..1000 {
            let mut h = DMatrix::<f64>::zeros(3, 3);
            for i in 0..3 {
                for j in i..3 {
                    let v = rng.gen_range(-3.0..3.0);
                    h[(i, j)] = v;
                    h[(j, i)] = v;
                }
            }
            let direct = 0.7f64.min(h[(0, 1)].abs())
                + 0.7f64.min(h[(1, 2)].abs())
                + 0.7f64.min(h[(2, 0)].abs())
                + 3.0 * h.trace()
                - 0.3;
            let z = hessian_to_pure(&h, &op.dirs);
            let pure = op.eval_parts(0.0, &zeros(n), &z, &[0.0; 3]);
            assert!((direct - pure).abs() < 1e-12, "{direct} vs {pure}");
        }
    }

    #[test]
    fn eq12_rejects_negative_g() {
        let (lo, hi) = cube();
        let err = example_eq12(&d3(), Field::Constant(-1.0), Field::Constant(0.0), (&lo, &hi)).unwrap_err();
        assert!(matches!(err, Error::NegativeSample { .. }));
    }

    #[test]
    fn eq12_pair_slopes_between_one_and_three() {
        let op = eq12(2.0, 0.0);
        let n = op.dirs.len();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = op.dirs.half_diagonal(0, 1, 1).unwrap();
        for _ in 0..1000 {
            let mut z: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            for k in 0..op.dirs.m() {
                z[k + op.dirs.m()] = z[k];
            }
            let mut w = z.clone();
            let t = rng.gen_range(-3.0..3.0);
            w[p] += t;
            w[op.dirs.opposite(p)] += t;
            if t.abs() < 1e-9 {
                continue;
            }
            let slope = (op.eval_parts(0.0, &zeros(n), &w, &[0.0; 3]) - op.eval_parts(0.0, &zeros(n), &z, &[0.0; 3])) / t;
            assert!((1.0 - 1e-12..=3.0 + 1e-12).contains(&slope), "{slope}");
        }
    }

    #[test]
    fn cutoff_composite() {
        let n = d3().len();
        let constant = OperatorSpec {
            name: "const".into(),
            dirs: d3(),
            kernel: Arc::new(FnKernel(|_: &Jet, _: &[f64]| -1.0)),
            bounds: CoefficientBox::uniform(n, 1.0 / 3.0, 3.0, 0.0, 0.0),
            delta: 1.0 / 3.0,
            k0: 0.0,
            h_bar: 1.0,
            lipschitz: Some(0.0),
            omega: "none".into(),
            cutoff: None,
        };
        let hk = make_cutoff_operator(&constant, 0.0).unwrap();
        assert_eq!(hk.eval_parts(0.0, &zeros(n), &zeros(n), &[0.0; 3]), 0.0);
        let hk = make_cutoff_operator(&constant, 1.5).unwrap();
        assert_eq!(hk.eval_parts(0.0, &zeros(n), &zeros(n), &[0.0; 3]), -1.0);
        let big = vec![5.0; n];
        let hk = make_cutoff_operator(&constant, 2.0).unwrap();
        let v = hk.eval_parts(0.0, &zeros(n), &big, &[0.0; 3]);
        assert!((v - (cutoff_p(&big, 1.0 / 3.0) - 2.0)).abs() < 1e-12);
        assert_eq!(hk.bounds.a_min(), 1.0 / 6.0);
        assert_eq!(hk.bounds.a_max(), 6.0);
        assert!(make_cutoff_operator(&constant, -1.0).is_err());
    }

    #[test]
    fn cutoff_dominates_and_agrees() {
        let op = eq12(3.0, 1.0);
        let hk = make_cutoff_operator(&op, 4.0).unwrap();
        let n = op.dirs.len();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let z: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let h = op.eval_parts(0.0, &zeros(n), &z, &[0.0; 3]);
            let p = cutoff_p(&z, op.delta) - 4.0;
            let k = hk.eval_parts(0.0, &zeros(n), &z, &[0.0; 3]);
            assert!(k >= h && k >= p);
            if p < h {
                assert_eq!(k, h);
            }
        }
    }

    #[test]
    fn domination_for_builtins() {
        let (lo, hi) = cube();
        let d1 = DirectionSet::standard(1, 0.5).unwrap();
        let members = vec![
            LinearMember { a: vec![1.0, 0.5], b: vec![0.5, -1.0], c: 2.0, f: Field::Constant(0.5) },
            LinearMember { a: vec![2.0, 1.0], b: vec![0.0, 0.3], c: 0.0, f: Field::Constant(-1.0) },
        ];
        let ops = vec![
            eq12(3.0, 1.0),
            example_bellman(&d1, members, 0.5, 1.0, 1.0).unwrap(),
            example_nonuniqueness(0.0).unwrap(),
            example_nonuniqueness_max(0.0).unwrap(),
            example_poisson(&d3(), Field::Constant(2.0), 2.0).unwrap(),
        ];
        for op in ops {
            let d = op.dims();
            let rep = domination_check(&op, 10_000, 5.0, (&lo[..d], &hi[..d]), 4);
            assert_eq!(rep.violations, 0, "{}: {rep:?}", op.name);
        }
        // the cut-off branch grows like P, so the composite itself is not dominated
        let hk = make_cutoff_operator(&eq12(3.0, 1.0), 1.0).unwrap();
        assert!(domination_check(&hk, 1000, 5.0, (&lo, &hi), 4).violations > 0);
    }

    #[test]
    fn bellman_examples() {
        let d1 = DirectionSet::standard(1, 0.5).unwrap();
        let members = vec![
            LinearMember { a: vec![0.5, 0.5], b: vec![0.0; 2], c: 0.0, f: Field::Constant(-1.0) },
            LinearMember { a: vec![1.0, 1.0], b: vec![0.0; 2], c: 0.0, f: Field::Constant(-1.0) },
        ];
        let op = example_bellman(&d1, members, 0.5, 0.0, 1.0).unwrap();
        assert_eq!(op.eval_parts(0.0, &[0.0; 2], &[0.0; 2], &[0.0]), -1.0);
        assert_eq!(op.eval_parts(0.0, &[0.0; 2], &[1.0; 2], &[0.0]), 1.0);

        let d2 = DirectionSet::standard(2, 0.5).unwrap();
        let lap = |f: f64| LinearMember { a: vec![1.0; 8], b: vec![0.0; 8], c: 0.0, f: Field::Constant(f) };
        let op = example_bellman(&d2, vec![lap(0.0), lap(-1.0)], 0.5, 0.0, 1.0).unwrap();
        let z = [0.3, -0.2, 0.1, 0.0, 0.3, -0.2, 0.1, 0.0];
        assert!((op.eval_parts(0.0, &[0.0; 8], &z, &[0.0; 2]) - z.iter().sum::<f64>()).abs() < 1e-14);

        let bad = vec![LinearMember { a: vec![5.0; 2], b: vec![0.0; 2], c: 0.0, f: Field::Constant(0.0) }];
        assert!(matches!(example_bellman(&d1, bad, 0.5, 0.0, 0.0), Err(Error::CoefficientOutOfBox { .. })));
    }

    #[test]
    fn nonuniqueness_pair_solves_sign_consistent_equation() {
        let op = example_nonuniqueness(0.0).unwrap();
        assert_eq!(op.eval_parts(0.0, &[0.0; 2], &[0.0; 2], &[0.0]), 0.0);
        // exact derivatives of 1 − |x|³: u'' = −6|x|, u' = −3x|x|
        for &x in &[-0.7, -0.2, 0.3, 0.9] {
            let up = -3.0 * x * f64::abs(x);
            let upp = -6.0 * f64::abs(x);
            assert!(op.eval_parts(0.0, &[up, -up], &[upp, upp], &[x]).abs() < 1e-12);
            let op2 = example_nonuniqueness_max(0.0).unwrap();
            assert!(op2.eval_parts(0.0, &[up, -up], &[upp, upp], &[x]).abs() < 1e-12);
        }
    }

    #[test]
    fn slope_audits() {
        let (lo, hi) = cube();
        let dirs = d3();
        let p = cutoff_operator(&dirs, dirs.delta_hat());
        assert_eq!(slope_hull_check(&p, 10_000, 3.0, (&lo, &hi), 1).violations, 0);
        assert_eq!(slope_hull_check(&eq12(2.0, 0.5), 10_000, 3.0, (&lo, &hi), 2).violations, 0);

        let n = dirs.len();
        let weights = vec![1.0; n];
        let linear = OperatorSpec {
            name: "linear".into(),
            dirs: dirs.clone(),
            kernel: Arc::new(FnKernel(move |z: &Jet, _: &[f64]| {
                z.second.iter().zip(&weights).map(|(a, b)| a * b).sum::<f64>() - 0.5 * z.value
            })),
            bounds: CoefficientBox::uniform(n, 0.5, 2.0, 0.0, 1.0),
            delta: 0.5,
            k0: 0.5,
            h_bar: 0.0,
            lipschitz: None,
            omega: "none".into(),
            cutoff: None,
        };
        assert_eq!(slope_hull_check(&linear, 2000, 3.0, (&lo, &hi), 3).violations, 0);

        let delta = 1.0 / 3.0;
        let hidden = OperatorSpec {
            name: "broken".into(),
            kernel: Arc::new(FnKernel(move |z: &Jet, _: &[f64]| {
                z.second.iter().sum::<f64>() + (2.0 / delta - 1.0) * z.second[0]
            })),
            bounds: CoefficientBox::uniform(n, delta, 1.0 / delta, 0.0, 0.0),
            ..linear
        };
        assert!(slope_hull_check(&hidden, 2000, 3.0, (&lo, &hi), 3).violations > 0);
    }

    #[test]
    fn monotone_in_value_for_builtins() {
        let (lo, hi) = cube();
        let d1 = DirectionSet::standard(1, 0.5).unwrap();
        let members = vec![LinearMember { a: vec![1.0, 1.0], b: vec![0.5, -0.5], c: 2.0, f: Field::Constant(0.0) }];
        let ops = vec![
            eq12(1.0, 0.0),
            example_bellman(&d1, members, 0.5, 1.0, 0.0).unwrap(),
            example_nonuniqueness(1e-3).unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for op in ops {
            let n = op.dirs.len();
            let d = op.dims();
            for _ in 0..500 {
                let first: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let second: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let (v1, v2) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
                let x = &lo[..d];
                let _ = &hi;
                let s = (op.eval_parts(v1, &first, &second, x) - op.eval_parts(v2, &first, &second, x)) / (v1 - v2);
                assert!(s <= 1e-12, "{}: slope {s}", op.name);
            }
        }
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        struct Fd<'a>(&'a dyn Kernel);
        impl Kernel for Fd<'_> {
            fn eval(&self, z: &Jet, x: &[f64]) -> f64 {
                self.0.eval(z, x)
            }
        }
        let hk = make_cutoff_operator(&eq12(1.5, 0.2), 1.0).unwrap();
        let n = hk.dirs.len();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let first: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let second: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let jet = Jet::new(0.3, &first, &second);
            let mut ga = vec![0.0; 1 + 2 * n];
            let mut gf = vec![0.0; 1 + 2 * n];
            let va = hk.kernel.eval_grad(&jet, &[0.0; 3], &mut ga);
            let vf = Fd(hk.kernel.as_ref()).eval_grad(&jet, &[0.0; 3], &mut gf);
            assert_eq!(va, vf);
            for (a, f) in ga.iter().zip(&gf) {
                assert!((a - f).abs() < 1e-5, "{a} vs {f}");
            }
        }
    }
}

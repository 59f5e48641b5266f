//! Discrete estimates measured on solved cut-off problems: the power barrier,
//! closeness to the boundary data, the set `G` where the cut-off branch is
//! forced, weighted interior second differences, the one-sided estimate and
//! a translation-continuity quotient.
//!
//! Constants that the theory leaves unspecified are measured, never assumed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::directions::{cutoff_p, DirectionSet};
use crate::error::{invalid, Error, Result};
use crate::field::Field;
use crate::lattice::{DiscreteDomain, GridFunction, NodeKind};
use crate::operators::OperatorSpec;

/// `ψ(x) = κ(|x − o|^{−α} − ρ₀^{−α})`.
#[derive(Clone, Debug, Serialize)]
pub struct PowerBarrier {
    pub alpha: f64,
    pub rho0: f64,
    /// Scale `κ ≥ 1`; the unscaled barrier is positive but far below 1 near `|x| = 3`.
    pub scale: f64,
    pub origin: Vec<f64>,
    pub delta: f64,
    pub k0: f64,
    #[serde(skip)]
    dirs: DirectionSet,
    pub check: PowerBarrierCheck,
}

#[derive(Clone, Debug, Serialize)]
pub struct PowerBarrierCheck {
    pub samples: usize,
    pub violations: usize,
    /// Smallest value of the left side (times the scale) over the samples.
    pub min_value: f64,
}

impl PowerBarrier {
    pub fn value(&self, x: &[f64]) -> f64 {
        let r = dist(x, &self.origin);
        self.scale * (r.powf(-self.alpha) - self.rho0.powf(-self.alpha))
    }

    /// Minimum over coefficient corners `a_k ∈ {δ/2, 2/δ}`, `b_k ∈ {±K₀}`,
    /// `c ∈ {0, K₀}` of `a_k D²_{l_k}ψ + b_k D_{l_k}ψ − cψ` at `x ≠ o`.
    pub fn corner_min(&self, x: &[f64]) -> f64 {
        self.scale * unscaled_corner_min(&self.dirs, self.alpha, self.rho0, self.delta, self.k0, &self.origin, x)
    }

    /// Re-samples the inequality on a fresh net.
    pub fn verify(&self, samples: usize, seed: u64) -> PowerBarrierCheck {
        let pts = sample_net(self.dirs.dims(), self.rho0, samples, seed);
        let mut check = PowerBarrierCheck { samples: pts.len(), violations: 0, min_value: f64::INFINITY };
        for p in &pts {
            let x: Vec<f64> = p.iter().zip(&self.origin).map(|(a, o)| a + o).collect();
            let v = self.corner_min(&x);
            check.min_value = check.min_value.min(v);
            if !(v >= 1.0) {
                check.violations += 1;
            }
        }
        check
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Written as `|x|^{−α−2}[A − c|x|²] + cρ₀^{−α}` so that tiny `|x|` gives
/// `+∞` instead of `∞ − ∞`.
fn unscaled_corner_min(dirs: &DirectionSet, alpha: f64, rho0: f64, delta: f64, k0: f64, origin: &[f64], x: &[f64]) -> f64 {
    let y: Vec<f64> = x.iter().zip(origin).map(|(a, o)| a - o).collect();
    let r2: f64 = y.iter().map(|v| v * v).sum();
    let (a_lo, a_hi) = (delta / 2.0, 2.0 / delta);
    let mut bracket = 0.0;
    for k in 0..dirs.len() {
        let l = dirs.vector(k);
        let xl: f64 = y.iter().zip(l).map(|(a, b)| a * b).sum();
        let ll: f64 = l.iter().map(|v| v * v).sum();
        // |x|^{α+2} D²_l ψ and |x|^{α+2} D_l ψ
        let d2 = alpha * ((alpha + 2.0) * xl * xl / r2 - ll);
        let d1 = -alpha * xl;
        bracket += (a_lo * d2).min(a_hi * d2) - k0 * d1.abs();
    }
    let scale = r2.sqrt().powf(-alpha - 2.0);
    // c = 0 and c = K₀
    let c0 = scale * bracket;
    let ck = if k0 > 0.0 { scale * (bracket - k0 * r2) + k0 * rho0.powf(-alpha) } else { c0 };
    c0.min(ck)
}

/// Unit vectors: an even angular grid plus every normalized `{-1, 0, 1}^d`
/// vector, where the corner minimum on a sphere tends to sit.
fn shell_directions(dims: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    match dims {
        1 => {}
        2 => {
            for j in 0..720 {
                let t = j as f64 * std::f64::consts::PI / 360.0;
                out.push(vec![t.cos(), t.sin()]);
            }
        }
        _ => {
            // Fibonacci sphere
            let n = 2000;
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            for j in 0..n {
                let z = 1.0 - 2.0 * (j as f64 + 0.5) / n as f64;
                let r = (1.0 - z * z).sqrt();
                let t = golden * j as f64;
                out.push(vec![r * t.cos(), r * t.sin(), z]);
            }
        }
    }
    for code in 0..3usize.pow(dims as u32) {
        let v: Vec<f64> = (0..dims).map(|i| ((code / 3usize.pow(i as u32)) % 3) as f64 - 1.0).collect();
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 0.0 {
            out.push(v.into_iter().map(|a| a / n).collect());
        }
    }
    out
}

/// Points relative to the origin: `n` in `ρ₀ ≤ |x| ≤ 3`, `n/10` in
/// `0 < |x| < ρ₀`, and the shell directions on both spheres `|x| = ρ₀, 3`.
fn sample_net(dims: usize, rho0: f64, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dir = |rng: &mut ChaCha8Rng| loop {
        let v: Vec<f64> = (0..dims).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n2: f64 = v.iter().map(|a| a * a).sum();
        if n2 > 1e-6 && n2 <= 1.0 {
            let n = n2.sqrt();
            return v.into_iter().map(|a| a / n).collect::<Vec<f64>>();
        }
    };
    let mut pts = Vec::with_capacity(n + n / 10);
    for _ in 0..n {
        let r = rng.gen_range(rho0..=3.0);
        let u = dir(&mut rng);
        pts.push(u.into_iter().map(|a| a * r).collect());
    }
    for u in shell_directions(dims) {
        for r in [rho0, 3.0] {
            pts.push(u.iter().map(|a| a * r).collect());
        }
    }
    for _ in 0..n / 10 {
        let r = rho0 * rng.gen_range(1e-3..1.0);
        let u = dir(&mut rng);
        pts.push(u.into_iter().map(|a| a * r).collect());
    }
    pts
}

/// Doubles `α` from 1 until the unscaled corner minimum is positive on the
/// sampling net, then fixes `κ` so the minimum is at least 2.
pub fn build_power_barrier(dirs: &DirectionSet, delta: f64, k0: f64, rho0: f64) -> Result<PowerBarrier> {
    build_power_barrier_at(dirs, delta, k0, rho0, vec![0.0; dirs.dims()], 10_000, 17)
}

pub fn build_power_barrier_at(
    dirs: &DirectionSet,
    delta: f64,
    k0: f64,
    rho0: f64,
    origin: Vec<f64>,
    samples: usize,
    seed: u64,
) -> Result<PowerBarrier> {
    if !(rho0 > 0.0 && rho0 <= 1.0) {
        return Err(invalid("rho0", "must lie in (0, 1]"));
    }
    if !(delta > 0.0 && delta <= 1.0) || k0 < 0.0 {
        return Err(invalid("delta", "need δ ∈ (0, 1] and K₀ ≥ 0"));
    }
    let pts = sample_net(dirs.dims(), rho0, samples, seed);
    let zero = vec![0.0; dirs.dims()];
    let mut alpha: f64 = 1.0;
    while alpha <= 1048576.0 {
        let min = pts
            .iter()
            .map(|x| unscaled_corner_min(dirs, alpha, rho0, delta, k0, &zero, x))
            .fold(f64::INFINITY, f64::min);
        if min > 0.0 && min.is_finite() {
            // a factor 2 of margin so points off the tuning net stay above 1
            let scale = (2.0 / min).max(1.0);
            if !scale.is_finite() {
                break;
            }
            let mut barrier =
                PowerBarrier { alpha, rho0, scale, origin, delta, k0, dirs: dirs.clone(), check: PowerBarrierCheck { samples: 0, violations: 0, min_value: 0.0 } };
            barrier.check = barrier.verify(samples, seed);
            return Ok(barrier);
        }
        alpha *= 2.0;
    }
    Err(Error::BarrierSearch(format!("no exponent α ≤ {alpha} gives a positive barrier (δ = {delta}, K₀ = {k0}, ρ₀ = {rho0})")))
}

/// `sup |v − g|/(ρ_Ω ∧ 1)` over in-domain nodes with `ρ_Ω > 0`.
pub fn boundary_estimate(v: &GridFunction, g: &Field, dd: &DiscreteDomain) -> f64 {
    (0..dd.len())
        .filter(|&i| dd.in_domain(i) && dd.rho(i) > 0.0)
        .map(|i| (v.values[i] - g.eval(&dd.point(i))).abs() / dd.rho(i).min(1.0))
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, Serialize)]
pub struct CutoffIdentityReport {
    pub k: f64,
    #[serde(skip)]
    pub g_nodes: Vec<usize>,
    pub g_count: usize,
    /// `sup_G |P_h[v] − K|`.
    pub defect: f64,
    /// Nodes of `G` where the uncut operator is not strictly below `P − K`.
    pub strict_branch_failures: usize,
    /// Nodes outside `G` violating the complementary inequality.
    pub complement_failures: usize,
}

fn jet_at(dd: &DiscreteDomain, v: &GridFunction, i: usize) -> (Vec<f64>, Vec<f64>) {
    (dd.first_difference_vector(v, i), dd.discrete_hessian_vector(v, i))
}

/// `G = {x ∈ Ω^h : (δ/2)Σ_{k=1}^m |Δ_k v| > H̄ + K + K₀(|v| + M_h)}` with
/// `M_h = Σ_k |δ_k v|`, the defect `sup_G |P_h[v] − K|` and the branch checks.
/// The constants are those of the uncut operator; `P` uses `p = δ`.
pub fn cutoff_identity_check(v: &GridFunction, op: &OperatorSpec, dd: &DiscreteDomain, k: f64) -> CutoffIdentityReport {
    let base = op.uncut();
    let m = dd.dirs().m();
    let mut rep = CutoffIdentityReport { k, g_nodes: Vec::new(), g_count: 0, defect: 0.0, strict_branch_failures: 0, complement_failures: 0 };
    for &i in dd.interior() {
        let (first, second) = jet_at(dd, v, i);
        let lhs = base.delta / 2.0 * second[..m].iter().map(|s| s.abs()).sum::<f64>();
        let m_h: f64 = first.iter().map(|s| s.abs()).sum();
        let rhs = base.h_bar + k + base.k0 * (v.values[i].abs() + m_h);
        let p = cutoff_p(&second, base.delta);
        if lhs > rhs {
            rep.g_nodes.push(i);
            rep.defect = rep.defect.max((p - k).abs());
            let h = base.eval_parts(v.values[i], &first, &second, &dd.point(i));
            if !(h < p - k) {
                rep.strict_branch_failures += 1;
            }
        } else if !(lhs <= rhs) {
            rep.complement_failures += 1;
        }
    }
    rep.g_count = rep.g_nodes.len();
    rep
}

#[derive(Clone, Debug, Serialize)]
pub struct SecondDiffReport {
    /// `sup_{Ω^h} (ρ_Ω − 2h)⁺ |Δ_{h,l_k} v|` for `k = 1..m`.
    pub weighted: Vec<f64>,
    pub weighted_max: f64,
    /// `sup_{Ω^h} Σ_k |δ_{h,l_k} v|`.
    pub m_bar: f64,
}

pub fn interior_second_diff_report(v: &GridFunction, dd: &DiscreteDomain) -> SecondDiffReport {
    let m = dd.dirs().m();
    let two_h = 2.0 * dd.h();
    let mut weighted = vec![0.0f64; m];
    let mut m_bar: f64 = 0.0;
    for &i in dd.interior() {
        let w = (dd.rho(i) - two_h).max(0.0);
        for (k, slot) in weighted.iter_mut().enumerate() {
            *slot = slot.max(w * dd.second_difference(v, i, k).abs());
        }
        m_bar = m_bar.max(dd.first_difference_vector(v, i).iter().map(|s| s.abs()).sum());
    }
    let weighted_max = weighted.iter().cloned().fold(0.0, f64::max);
    SecondDiffReport { weighted, weighted_max, m_bar }
}

/// `η_μ = s((ρ_Ω − μ)/μ)` with the quintic smoothstep `s`, so `η_μ = 0` outside
/// `Ω^μ` and `η_μ = 1` on `Ω^{2μ}`.
pub fn eta_mu(rho: f64, mu: f64) -> f64 {
    let t = ((rho - mu) / mu).clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

#[derive(Clone, Debug, Serialize)]
pub struct OneSidedReport {
    pub direction: usize,
    pub q_interior: usize,
    pub q_total: usize,
    /// `sup_Q ζ²[(Δ_r v)⁻]²`.
    pub lhs_sup: f64,
    /// `sup_{Q \ Q°} ζ²[(Δ_r v)⁻]²`.
    pub rim_sup: f64,
    pub eta_first: f64,
    pub eta_second: f64,
    pub w_bar: f64,
    /// Smallest `N` for which the estimate holds on this instance.
    pub empirical_n: f64,
}

/// Evaluates both sides of the one-sided estimate with `ζ = η_μ²` on
/// `Q° = {x ∈ Ω^h : |P_h[v](x) − K| ≤ tol, x + hΛ ⊂ Ω^h}`.
///
/// Returns `None` when `Q°` is empty.
pub fn one_sided_estimate_check(
    v: &GridFunction,
    dd: &DiscreteDomain,
    p: f64,
    k: f64,
    tol: f64,
    mu: f64,
    r: usize,
) -> Option<OneSidedReport> {
    let dirs = dd.dirs();
    let n = dirs.len();
    let interior = |i: usize| dd.kind(i) == NodeKind::Interior;
    let mut in_q = vec![0u8; dd.len()];
    let mut q_interior = 0;
    for &i in dd.interior() {
        if !(0..n).all(|j| interior(dd.neighbor(i, j))) {
            continue;
        }
        let z = dd.discrete_hessian_vector(v, i);
        if (cutoff_p(&z, p) - k).abs() <= tol {
            in_q[i] = 2;
            q_interior += 1;
        }
    }
    if q_interior == 0 {
        return None;
    }
    for &i in dd.interior() {
        if in_q[i] == 2 {
            for j in 0..n {
                let nb = dd.neighbor(i, j);
                if in_q[nb] == 0 {
                    in_q[nb] = 1;
                }
            }
        }
    }
    let eta: Vec<f64> = (0..dd.len()).map(|i| if dd.in_domain(i) { eta_mu(dd.rho(i), mu) } else { 0.0 }).collect();
    let eta_f = GridFunction { values: eta };
    let (mut eta_first, mut eta_second): (f64, f64) = (0.0, 0.0);
    for i in 0..dd.len() {
        if !dd.in_domain(i) {
            continue;
        }
        for j in 0..n {
            let (Some(a), Some(_)) = (dd.checked_neighbor(i, j), dd.checked_neighbor(i, dirs.opposite(j))) else {
                continue;
            };
            eta_first = eta_first.max(((eta_f.values[a] - eta_f.values[i]) / dd.h()).abs());
            eta_second = eta_second.max(dd.second_difference(&eta_f, i, j).abs());
        }
    }
    let (mut lhs_sup, mut rim_sup, mut w_bar): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let o = dirs.opposite(r);
    let mut q_total = 0;
    for i in 0..dd.len() {
        if in_q[i] == 0 {
            continue;
        }
        q_total += 1;
        let zeta = eta_f.values[i] * eta_f.values[i];
        let neg = (-dd.second_difference(v, i, r)).max(0.0);
        let val = zeta * zeta * neg * neg;
        lhs_sup = lhs_sup.max(val);
        if in_q[i] == 1 {
            rim_sup = rim_sup.max(val);
        }
        let (a, b) = (dd.first_difference(v, i, r), dd.first_difference(v, i, o));
        w_bar = w_bar.max(a * a + b * b);
    }
    let denom = (eta_second + eta_first * eta_first) * w_bar;
    let excess = (lhs_sup - rim_sup).max(0.0);
    let empirical_n = if excess == 0.0 { 0.0 } else if denom > 0.0 { excess / denom } else { f64::INFINITY };
    Some(OneSidedReport { direction: r, q_interior, q_total, lhs_sup, rim_sup, eta_first, eta_second, w_bar, empirical_n })
}

/// `max |v(x) − v(y)|/(|x − y| + h)` over lattice-neighbour pairs in `Ω̄`.
pub fn translation_quotient(v: &GridFunction, dd: &DiscreteDomain) -> f64 {
    let h = dd.h();
    let mut best: f64 = 0.0;
    for i in 0..dd.len() {
        if !dd.in_domain(i) {
            continue;
        }
        for k in 0..dd.dirs().len() {
            let Some(j) = dd.checked_neighbor(i, k) else { continue };
            if !dd.in_domain(j) {
                continue;
            }
            let len = h * dd.dirs().vector(k).iter().map(|a| a * a).sum::<f64>().sqrt();
            best = best.max((v.values[i] - v.values[j]).abs() / (len + h));
        }
    }
    best
}

#[derive(Clone, Debug, Serialize)]
pub struct EstimateReport {
    pub boundary_ratio: f64,
    pub g_count: usize,
    pub cutoff_identity_defect: f64,
    pub strict_branch_failures: usize,
    pub weighted_second_diffs: Vec<f64>,
    pub weighted_second_diff_max: f64,
    pub m_bar: f64,
    pub one_sided: Option<OneSidedReport>,
    pub translation_quotient: f64,
}

/// Every estimate for a solved cut-off problem `max(H, P − K) = 0`.
pub fn estimate_report(op: &OperatorSpec, dd: &DiscreteDomain, v: &GridFunction, g: &Field, tol: f64) -> Result<EstimateReport> {
    let k = op.cutoff.as_ref().map(|c| c.0).ok_or_else(|| invalid("operator", "estimates need a cut-off operator"))?;
    let cut = cutoff_identity_check(v, op, dd, k);
    let sd = interior_second_diff_report(v, dd);
    let one_sided = one_sided_estimate_check(v, dd, op.delta, k, 10.0 * tol, 2.0 * dd.h(), 0);
    Ok(EstimateReport {
        boundary_ratio: boundary_estimate(v, g, dd),
        g_count: cut.g_count,
        cutoff_identity_defect: cut.defect,
        strict_branch_failures: cut.strict_branch_failures,
        weighted_second_diffs: sd.weighted,
        weighted_second_diff_max: sd.weighted_max,
        m_bar: sd.m_bar,
        one_sided,
        translation_quotient: translation_quotient(v, dd),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::DomainSpec;
    use crate::operators::{example_poisson, make_cutoff_operator};

    #[test]
    fn power_barrier_standard_case() {
        let dirs = DirectionSet::standard(3, 1.0 / 3.0).unwrap();
        let b = build_power_barrier(&dirs, 1.0 / 3.0, 1.0, 0.5).unwrap();
        assert_eq!(b.check.violations, 0);
        assert!(b.check.min_value >= 1.0);
        assert!(b.value(&[0.5, 0.0, 0.0]).abs() < 1e-12 * b.scale);
        assert!(b.value(&[1.0, 0.0, 0.0]) < 0.0);
        assert!(b.value(&[0.1, 0.0, 0.0]) > 0.0);
        let again = b.verify(2000, 99);
        assert_eq!(again.violations, 0);
    }

    #[test]
    fn c_corner_helps_outside() {
        // with ψ < 0, the c = K₀ corner is no smaller than c = 0
        let dirs = DirectionSet::standard(2, 0.5).unwrap();
        let b = build_power_barrier(&dirs, 0.5, 1.0, 0.5).unwrap();
        let x = [3.0, 0.0];
        let no_c = unscaled_corner_min(&dirs, b.alpha, 0.5, 0.5, 0.0, &[0.0, 0.0], &x);
        let with_c = unscaled_corner_min(&dirs, b.alpha, 0.5, 0.5, 1.0, &[0.0, 0.0], &x);
        assert!(with_c <= no_c);
        assert!(b.value(&x) < 0.0);
    }

    #[test]
    fn eta_profile() {
        assert_eq!(eta_mu(0.05, 0.1), 0.0);
        assert_eq!(eta_mu(0.2, 0.1), 1.0);
        assert!((eta_mu(0.15, 0.1) - 0.5).abs() < 1e-12);
    }

    fn disc(h: f64) -> DiscreteDomain {
        DiscreteDomain::build(DomainSpec::unit_ball(2), h, DirectionSet::standard(2, 0.25).unwrap()).unwrap()
    }

    #[test]
    fn boundary_ratio_of_data_is_zero() {
        let dd = disc(0.1);
        let g = Field::func(|x| x[0] + x[1] * x[1]);
        let v = GridFunction::from_fn(&dd, |x| x[0] + x[1] * x[1]);
        assert_eq!(boundary_estimate(&v, &g, &dd), 0.0);
    }

    #[test]
    fn quadratic_weighted_sup_closed_form() {
        let dd = disc(0.1);
        // u = x1² + 3x2²: Δ_l u = 2⟨A l, l⟩, with A = diag(1, 3)
        let v = GridFunction::from_fn(&dd, |x| x[0] * x[0] + 3.0 * x[1] * x[1]);
        let rep = interior_second_diff_report(&v, &dd);
        let wmax = dd.interior().iter().map(|&i| (dd.rho(i) - 0.2).max(0.0)).fold(0.0, f64::max);
        for k in 0..dd.dirs().m() {
            let l = dd.dirs().vector(k);
            let exact = 2.0 * (l[0] * l[0] + 3.0 * l[1] * l[1]);
            assert!((rep.weighted[k] - wmax * exact).abs() < 1e-9, "{k}");
        }
    }

    #[test]
    fn near_boundary_kink_is_suppressed() {
        let dd = disc(0.1);
        let v = GridFunction::from_fn(&dd, |x| if x[0] * x[0] + x[1] * x[1] > 0.92 * 0.92 { 100.0 } else { 0.0 });
        let rep = interior_second_diff_report(&v, &dd);
        assert_eq!(rep.weighted_max, 0.0);
    }

    #[test]
    fn huge_k_leaves_g_empty() {
        let dd = disc(0.1);
        let op = example_poisson(dd.dirs(), Field::Constant(1.0), 1.0).unwrap();
        let hk = make_cutoff_operator(&op, 1e9).unwrap();
        let v = GridFunction::from_fn(&dd, |x| x[0] * x[0] - x[1] * x[1]);
        let rep = cutoff_identity_check(&v, &hk, &dd, 1e9);
        assert_eq!(rep.g_count, 0);
        assert_eq!(rep.defect, 0.0);
        assert_eq!(rep.complement_failures, 0);
    }

    #[test]
    fn one_sided_quadratic_needs_no_constant() {
        // P(Δ_h v) is the same at every node for a quadratic
        let dd = disc(0.1);
        let v = GridFunction::from_fn(&dd, |x| 0.5 * x[0] * x[0] - 0.25 * x[1] * x[1]);
        let i = dd.interior()[0];
        let p = cutoff_p(&dd.discrete_hessian_vector(&v, i), 0.25);
        let rep = one_sided_estimate_check(&v, &dd, 0.25, p, 1e-9, 0.2, 1).unwrap();
        assert!(rep.q_interior > 0);
        assert!(rep.empirical_n.is_finite());
        assert!(one_sided_estimate_check(&v, &dd, 0.25, p + 1.0, 1e-9, 0.2, 1).is_none());
    }

    #[test]
    fn translation_quotient_of_linear_function() {
        let dd = disc(0.1);
        let v = GridFunction::from_fn(&dd, |x| 2.0 * x[0]);
        let q = translation_quotient(&v, &dd);
        assert!(q > 0.0 && q < 2.0);
    }
}

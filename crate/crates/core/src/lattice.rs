//! Domains, their lattice discretization and the difference operators
//! `δ_{h,l}`, `Δ_{h,l}` acting on grid functions.
//!
//! Nodes live on `(h/q)·ℤ^d` where `q` is the lattice denominator of the
//! direction set, so every offset `h·l_k` is an integer lattice step. Storage
//! is a dense array over the bounding box of `Ω̄` padded by `q` layers.

use std::io::Write;
use std::sync::Arc;

use crate::directions::{norm, DirectionSet};
use crate::error::{invalid, Error, Result};

pub type Predicate = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

#[derive(Clone)]
pub enum Shape {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Predicate { inside: Predicate, lo: Vec<f64>, hi: Vec<f64> },
}

impl std::fmt::Debug for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Shape::Ball { center, radius } => write!(f, "Ball({center:?}, {radius})"),
            Shape::Box { lo, hi } => write!(f, "Box({lo:?}, {hi:?})"),
            Shape::Predicate { lo, hi, .. } => write!(f, "Predicate(bbox {lo:?}..{hi:?})"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DomainSpec {
    pub shape: Shape,
    /// `ρ(Ω)`, capped at 1.
    pub exterior_ball_radius: f64,
    pub diameter: f64,
    /// `μ(Ω)`: sup of `h` with a nonempty `Ω^h`.
    pub inradius: f64,
}

impl DomainSpec {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || center.is_empty() {
            return Err(invalid("radius", "ball needs a positive radius and a center"));
        }
        Ok(DomainSpec {
            shape: Shape::Ball { center, radius },
            exterior_ball_radius: 1.0,
            diameter: 2.0 * radius,
            inradius: radius,
        })
    }

    pub fn unit_ball(dims: usize) -> Self {
        Self::ball(vec![0.0; dims], 1.0).expect("valid unit ball")
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() || lo.iter().zip(&hi).any(|(a, b)| !(b > a)) {
            return Err(invalid("box", "need lo < hi componentwise"));
        }
        let widths: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| b - a).collect();
        let inradius = widths.iter().cloned().fold(f64::INFINITY, f64::min) / 2.0;
        let diameter = norm(&widths);
        Ok(DomainSpec {
            shape: Shape::Box { lo, hi },
            exterior_ball_radius: 1.0,
            diameter,
            inradius,
        })
    }

    /// A domain given by a membership oracle inside the box `lo..hi`.
    ///
    /// `ρ(Ω)` is the caller's declaration; `μ(Ω)` is estimated on a sampling grid.
    pub fn predicate(
        inside: Predicate,
        lo: Vec<f64>,
        hi: Vec<f64>,
        exterior_ball_radius: f64,
    ) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(invalid("box", "bounding box dimension mismatch"));
        }
        if !(exterior_ball_radius > 0.0 && exterior_ball_radius <= 1.0) {
            return Err(invalid("exterior_ball_radius", "must lie in (0, 1]"));
        }
        let widths: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| b - a).collect();
        let diameter = norm(&widths);
        let mut spec = DomainSpec {
            shape: Shape::Predicate { inside, lo: lo.clone(), hi },
            exterior_ball_radius,
            diameter,
            inradius: 0.0,
        };
        let n = match lo.len() {
            1 => 200,
            2 => 40,
            _ => 16,
        };
        let tol = diameter / 2000.0;
        let mut best: f64 = 0.0;
        let mut idx = vec![0usize; lo.len()];
        loop {
            let x: Vec<f64> =
                idx.iter().enumerate().map(|(i, &j)| lo[i] + widths[i] * (j as f64 + 0.5) / n as f64).collect();
            best = best.max(spec.rho_with_tol(&x, tol));
            let mut i = 0;
            while i < idx.len() {
                idx[i] += 1;
                if idx[i] < n {
                    break;
                }
                idx[i] = 0;
                i += 1;
            }
            if i == idx.len() {
                break;
            }
        }
        if best <= 0.0 {
            return Err(invalid("predicate", "no interior point found"));
        }
        spec.inradius = best;
        Ok(spec)
    }

    pub fn dims(&self) -> usize {
        match &self.shape {
            Shape::Ball { center, .. } => center.len(),
            Shape::Box { lo, .. } | Shape::Predicate { lo, .. } => lo.len(),
        }
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.shape {
            Shape::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            Shape::Box { lo, hi } | Shape::Predicate { lo, hi, .. } => (lo.clone(), hi.clone()),
        }
    }

    /// Center of the bounding box, used as the origin of the `Ψ₀` barrier.
    pub fn center(&self) -> Vec<f64> {
        let (lo, hi) = self.bounding_box();
        lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn contains_closed(&self, x: &[f64]) -> bool {
        const EPS: f64 = 1e-12;
        match &self.shape {
            Shape::Ball { center, radius } => dist(x, center) <= radius * (1.0 + EPS),
            Shape::Box { lo, hi } => {
                x.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| *v >= a - EPS && *v <= b + EPS)
            }
            Shape::Predicate { inside, .. } => inside(x),
        }
    }

    /// `ρ_Ω(x) = dist(x, ℝ^d \ Ω)`; zero outside `Ω`.
    pub fn rho(&self, x: &[f64]) -> f64 {
        self.rho_with_tol(x, 1e-9 * self.diameter.max(1.0))
    }

    pub fn rho_with_tol(&self, x: &[f64], tol: f64) -> f64 {
        match &self.shape {
            Shape::Ball { center, radius } => (radius - dist(x, center)).max(0.0),
            Shape::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (a, b))| (v - a).min(b - v))
                .fold(f64::INFINITY, f64::min)
                .max(0.0),
            Shape::Predicate { inside, .. } => {
                if !inside(x) {
                    return 0.0;
                }
                ray_rho(inside.as_ref(), x, tol, self.diameter)
            }
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Minimum exit distance along a fixed fan of rays, each refined by bisection.
fn ray_rho(inside: &(dyn Fn(&[f64]) -> bool + Send + Sync), x: &[f64], tol: f64, diameter: f64) -> f64 {
    let rays = ray_fan(x.len());
    let march = (diameter / 64.0).max(tol);
    let mut best = f64::INFINITY;
    let mut y = vec![0.0; x.len()];
    for dir in &rays {
        let at = |t: f64, y: &mut Vec<f64>| {
            for i in 0..x.len() {
                y[i] = x[i] + t * dir[i];
            }
        };
        let mut inside_t = 0.0;
        let mut t = march;
        loop {
            if t >= best {
                // only an exit before the current minimum matters
                t = best;
                at(t, &mut y);
                if inside(&y) {
                    t = f64::INFINITY;
                }
                break;
            }
            if t > 2.0 * diameter {
                t = f64::INFINITY;
                break;
            }
            at(t, &mut y);
            if !inside(&y) {
                break;
            }
            inside_t = t;
            t += march;
        }
        if !t.is_finite() {
            continue;
        }
        let (mut a, mut b) = (inside_t, t);
        while b - a > tol {
            let mid = 0.5 * (a + b);
            at(mid, &mut y);
            if inside(&y) {
                a = mid;
            } else {
                b = mid;
            }
        }
        best = best.min(a);
    }
    best
}

fn ray_fan(dims: usize) -> Vec<Vec<f64>> {
    match dims {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..64)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / 64.0;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            // Fibonacci sphere
            let n = 256;
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let t = golden * i as f64;
                    let mut v = vec![r * t.cos(), r * t.sin(), z];
                    v.resize(dims, 0.0);
                    v
                })
                .collect()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Outside,
    /// In `∂_hΩ = Ω̄ \ Ω^h`.
    Boundary,
    /// In `Ω^h`.
    Interior,
}

#[derive(Clone, Debug)]
pub struct DiscreteDomain {
    domain: DomainSpec,
    h: f64,
    dirs: DirectionSet,
    lo_idx: Vec<i64>,
    extent: Vec<usize>,
    strides: Vec<usize>,
    kinds: Vec<NodeKind>,
    rho: Vec<f64>,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    offsets: Vec<isize>,
}

impl DiscreteDomain {
    pub fn build(domain: DomainSpec, h: f64, dirs: DirectionSet) -> Result<Self> {
        let d = domain.dims();
        if dirs.dims() != d {
            return Err(invalid("dirs", "dimension differs from the domain"));
        }
        if !(h > 0.0) || h >= domain.inradius {
            return Err(Error::EmptyInterior { h, inradius: domain.inradius });
        }
        let q = dirs.lattice_denominator();
        let step = h / q as f64;
        let (lo, hi) = domain.bounding_box();
        let lo_idx: Vec<i64> = lo.iter().map(|v| (v / step - 1e-9).floor() as i64 - q).collect();
        let hi_idx: Vec<i64> = hi.iter().map(|v| (v / step + 1e-9).ceil() as i64 + q).collect();
        let extent: Vec<usize> = lo_idx.iter().zip(&hi_idx).map(|(a, b)| (b - a + 1) as usize).collect();
        let mut strides = vec![1usize; d];
        for i in 1..d {
            strides[i] = strides[i - 1] * extent[i - 1];
        }
        let total = strides[d - 1] * extent[d - 1];

        let mut kinds = vec![NodeKind::Outside; total];
        let mut rho = vec![0.0; total];
        let mut interior = Vec::new();
        let mut boundary = Vec::new();
        let rho_tol = h / 100.0;
        let mut x = vec![0.0; d];
        for idx in 0..total {
            coords_into(idx, &lo_idx, &extent, h, q, &mut x);
            if !domain.contains_closed(&x) {
                continue;
            }
            let r = domain.rho_with_tol(&x, rho_tol);
            rho[idx] = r;
            // relative slack keeps nodes with ρ = h exactly (up to rounding) in the strip
            if r > h * (1.0 + 1e-9) {
                kinds[idx] = NodeKind::Interior;
                interior.push(idx);
            } else {
                kinds[idx] = NodeKind::Boundary;
                boundary.push(idx);
            }
        }
        if interior.is_empty() {
            return Err(Error::EmptyInterior { h, inradius: domain.inradius });
        }
        let offsets = (0..dirs.len())
            .map(|k| {
                dirs.offset(k)
                    .iter()
                    .zip(&strides)
                    .map(|(&o, &s)| o as isize * s as isize)
                    .sum()
            })
            .collect();
        let dd = DiscreteDomain { domain, h, dirs, lo_idx, extent, strides, kinds, rho, interior, boundary, offsets };
        dd.check_stencil_closure()?;
        Ok(dd)
    }

    fn check_stencil_closure(&self) -> Result<()> {
        for &i in &self.interior {
            for k in 0..self.dirs.len() {
                let j = self.neighbor(i, k);
                if self.kinds[j] == NodeKind::Outside {
                    return Err(invalid("domain", "interior stencil leaves the closed domain"));
                }
            }
        }
        Ok(())
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn dirs(&self) -> &DirectionSet {
        &self.dirs
    }
    pub fn dims(&self) -> usize {
        self.extent.len()
    }
    /// Lattice spacing `h/q`.
    pub fn spacing(&self) -> f64 {
        self.h / self.dirs.lattice_denominator() as f64
    }
    /// Volume of one lattice cell, `(h/q)^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dims() as i32)
    }
    pub fn len(&self) -> usize {
        self.kinds.len()
    }
    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }
    pub fn kind(&self, idx: usize) -> NodeKind {
        self.kinds[idx]
    }
    pub fn rho(&self, idx: usize) -> f64 {
        self.rho[idx]
    }
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }
    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }
    pub fn in_domain(&self, idx: usize) -> bool {
        self.kinds[idx] != NodeKind::Outside
    }

    /// Index of `x + h·l_k`. Valid for every in-domain node.
    #[inline]
    pub fn neighbor(&self, idx: usize, k: usize) -> usize {
        (idx as isize + self.offsets[k]) as usize
    }

    /// Neighbor index if it stays inside the stored array.
    pub fn checked_neighbor(&self, idx: usize, k: usize) -> Option<usize> {
        let mut rest = idx;
        for (axis, &o) in self.dirs.offset(k).iter().enumerate() {
            let c = (rest % self.extent[axis]) as i64 + o;
            rest /= self.extent[axis];
            if c < 0 || c >= self.extent[axis] as i64 {
                return None;
            }
        }
        Some(self.neighbor(idx, k))
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dims()];
        coords_into(idx, &self.lo_idx, &self.extent, self.h, self.dirs.lattice_denominator(), &mut x);
        x
    }

    pub fn point_into(&self, idx: usize, x: &mut [f64]) {
        coords_into(idx, &self.lo_idx, &self.extent, self.h, self.dirs.lattice_denominator(), x);
    }

    /// Integer lattice coordinates in units of `h/q`.
    pub fn lattice_coords(&self, idx: usize) -> Vec<i64> {
        let mut rest = idx;
        self.extent
            .iter()
            .zip(&self.lo_idx)
            .map(|(&n, &lo)| {
                let c = (rest % n) as i64 + lo;
                rest /= n;
                c
            })
            .collect()
    }

    /// Array index of the lattice point with the given integer coordinates.
    pub fn index_of(&self, coords: &[i64]) -> Option<usize> {
        let mut idx = 0;
        for (axis, &c) in coords.iter().enumerate() {
            let local = c - self.lo_idx[axis];
            if local < 0 || local >= self.extent[axis] as i64 {
                return None;
            }
            idx += local as usize * self.strides[axis];
        }
        Some(idx)
    }

    /// `(u(x + h l_k) − u(x))/h`.
    #[inline]
    pub fn first_difference(&self, u: &GridFunction, idx: usize, k: usize) -> f64 {
        (u.values[self.neighbor(idx, k)] - u.values[idx]) / self.h
    }

    /// `(u(x + h l_k) − 2u(x) + u(x − h l_k))/h²`.
    #[inline]
    pub fn second_difference(&self, u: &GridFunction, idx: usize, k: usize) -> f64 {
        let plus = u.values[self.neighbor(idx, k)];
        let minus = u.values[self.neighbor(idx, self.dirs.opposite(k))];
        (plus - 2.0 * u.values[idx] + minus) / (self.h * self.h)
    }

    /// `δ_h u(x)` over all `2m` signed directions.
    pub fn first_difference_vector(&self, u: &GridFunction, idx: usize) -> Vec<f64> {
        (0..self.dirs.len()).map(|k| self.first_difference(u, idx, k)).collect()
    }

    /// `δ_h² u(x)` over all `2m` signed directions.
    pub fn discrete_hessian_vector(&self, u: &GridFunction, idx: usize) -> Vec<f64> {
        (0..self.dirs.len()).map(|k| self.second_difference(u, idx, k)).collect()
    }

    /// Writes the in-domain nodes as CSV: `x1..xd, value, rho, is_interior`.
    pub fn write_csv<W: Write>(&self, u: &GridFunction, extra: &[(&str, &[f64])], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=self.dims()).map(|i| format!("x{i}")).collect();
        header.extend(["value", "rho", "is_interior"].map(String::from));
        header.extend(extra.iter().map(|(name, _)| name.to_string()));
        w.write_record(&header)?;
        for idx in 0..self.len() {
            if !self.in_domain(idx) {
                continue;
            }
            let mut rec: Vec<String> = self.point(idx).iter().map(|v| format!("{v}")).collect();
            rec.push(format!("{}", u.values[idx]));
            rec.push(format!("{}", self.rho[idx]));
            rec.push(u8::from(self.kinds[idx] == NodeKind::Interior).to_string());
            for (_, vals) in extra {
                rec.push(format!("{}", vals[idx]));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn coords_into(idx: usize, lo_idx: &[i64], extent: &[usize], h: f64, q: i64, x: &mut [f64]) {
    let mut rest = idx;
    for axis in 0..extent.len() {
        let c = (rest % extent[axis]) as i64 + lo_idx[axis];
        rest /= extent[axis];
        x[axis] = (c as f64 * h) / q as f64;
    }
}

/// Node values over the whole stored array. Nodes outside `Ω̄` carry the
/// boundary function, which makes every stencil query total.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn from_fn(dd: &DiscreteDomain, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..dd.len()).map(|i| f(&dd.point(i))).collect();
        GridFunction { values }
    }

    /// `inner` on `Ω^h`, `g` on `∂_hΩ` and outside `Ω̄`.
    pub fn with_boundary(
        dd: &DiscreteDomain,
        inner: impl Fn(&[f64]) -> f64,
        g: impl Fn(&[f64]) -> f64,
    ) -> Self {
        let values = (0..dd.len())
            .map(|i| {
                let x = dd.point(i);
                if dd.kind(i) == NodeKind::Interior {
                    inner(&x)
                } else {
                    g(&x)
                }
            })
            .collect();
        GridFunction { values }
    }

    pub fn get(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn sup_abs_in_domain(&self, dd: &DiscreteDomain) -> f64 {
        (0..dd.len())
            .filter(|&i| dd.in_domain(i))
            .map(|i| self.values[i].abs())
            .fold(0.0, f64::max)
    }
}

//! Direction sets `Λ = {l_{±1}, …, l_{±m}}`, the cut-off majorant `P`, and the
//! rewrite of Hessians into pure second directional derivatives.
//!
//! Directions are stored with exact rational coordinates: every vector is an
//! integer numerator vector over the common denominator `q`, so the offsets
//! `h·l_k` land on the lattice `(h/q)·ℤ^d`. Index `k < m` is `+k`, index
//! `m + k` is `-k`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct DirectionSet {
    dims: usize,
    m: usize,
    q: i64,
    numerators: Vec<Vec<i64>>,
    vectors: Vec<Vec<f64>>,
    delta: f64,
    delta_hat: f64,
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn lcm(a: i64, b: i64) -> i64 {
    a / gcd(a, b) * b
}

impl DirectionSet {
    /// `{±e_i} ∪ {±(e_i ± e_j)/2 : i < j}` for `d ∈ {1, 2, 3}`, with `δ̂ = δ/4`.
    pub fn standard(dims: usize, delta: f64) -> Result<Self> {
        if !(1..=3).contains(&dims) {
            return Err(Error::UnsupportedDimension(dims));
        }
        check_delta(delta)?;
        Self::from_rationals(dims, standard_positive(dims), delta, delta / 4.0)
    }

    /// Standard set enlarged by every primitive integer vector `w` with
    /// `|w|_∞ ≤ radius`, scaled by `1/⌈radius·√d⌉` into the closed unit ball.
    ///
    /// Richer sets are needed to write badly conditioned matrices as
    /// positive combinations of `l_k l_k^*`; the solver itself only needs the
    /// standard set.
    pub fn extended(dims: usize, radius: i64, delta: f64) -> Result<Self> {
        if !(1..=3).contains(&dims) {
            return Err(Error::UnsupportedDimension(dims));
        }
        check_delta(delta)?;
        if radius < 1 {
            return Err(invalid("radius", "must be at least 1"));
        }
        let scale = ((radius as f64) * (dims as f64).sqrt()).ceil() as i64;
        let mut vecs = standard_positive(dims);
        let mut seen: Vec<(Vec<i64>, i64)> = vecs.iter().map(|(n, d)| reduce(n, *d)).collect();
        let mut w = vec![-radius; dims];
        loop {
            let first_nonzero = w.iter().find(|&&c| c != 0).copied();
            let g = w.iter().fold(0, |acc, &c| gcd(acc, c));
            if let Some(lead) = first_nonzero {
                if lead > 0 && g == 1 {
                    let key = reduce(&w, scale);
                    let neg: Vec<i64> = key.0.iter().map(|c| -c).collect();
                    if !seen.iter().any(|s| s.0 == key.0 && s.1 == key.1 || s.0 == neg && s.1 == key.1) {
                        seen.push(key);
                        vecs.push((w.clone(), scale));
                    }
                }
            }
            // odometer increment
            let mut i = 0;
            loop {
                if i == dims {
                    return Self::from_rationals(dims, vecs, delta, delta / 4.0);
                }
                w[i] += 1;
                if w[i] > radius {
                    w[i] = -radius;
                    i += 1;
                } else {
                    break;
                }
            }
        }
    }

    /// Builds a set from the `+k` half, each given as (integer numerators, denominator).
    pub fn from_rationals(
        dims: usize,
        positive: Vec<(Vec<i64>, i64)>,
        delta: f64,
        delta_hat: f64,
    ) -> Result<Self> {
        check_delta(delta)?;
        if !(delta_hat > 0.0 && delta_hat <= 1.0) {
            return Err(invalid("delta_hat", format!("{delta_hat} not in (0, 1]")));
        }
        if positive.is_empty() {
            return Err(invalid("vectors", "empty direction set"));
        }
        let q = positive.iter().fold(1, |acc, (_, d)| lcm(acc, *d));
        let m = positive.len();
        let mut numerators = Vec::with_capacity(2 * m);
        for (num, den) in &positive {
            if num.len() != dims || *den <= 0 {
                return Err(invalid("vectors", "wrong length or nonpositive denominator"));
            }
            numerators.push(num.iter().map(|c| c * (q / den)).collect::<Vec<_>>());
        }
        for k in 0..m {
            let neg = numerators[k].iter().map(|c| -c).collect();
            numerators.push(neg);
        }
        let vectors: Vec<Vec<f64>> = numerators
            .iter()
            .map(|n| n.iter().map(|&c| c as f64 / q as f64).collect())
            .collect();
        for v in &vectors {
            if norm(v) > 1.0 + 1e-12 {
                return Err(invalid("vectors", format!("{v:?} lies outside the unit ball")));
            }
        }
        let set = DirectionSet { dims, m, q, numerators, vectors, delta, delta_hat };
        if set.span_rank() < dims {
            return Err(invalid("vectors", "directions do not span R^d"));
        }
        Ok(set)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }
    /// Number of `±` pairs.
    pub fn m(&self) -> usize {
        self.m
    }
    /// Total number of signed directions, `2m`.
    pub fn len(&self) -> usize {
        2 * self.m
    }
    pub fn is_empty(&self) -> bool {
        self.m == 0
    }
    pub fn lattice_denominator(&self) -> i64 {
        self.q
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn delta_hat(&self) -> f64 {
        self.delta_hat
    }
    pub fn with_delta_hat(mut self, delta_hat: f64) -> Result<Self> {
        if !(delta_hat > 0.0 && delta_hat <= self.delta / 4.0) {
            return Err(invalid("delta_hat", format!("{delta_hat} not in (0, δ/4]")));
        }
        self.delta_hat = delta_hat;
        Ok(self)
    }
    pub fn vector(&self, k: usize) -> &[f64] {
        &self.vectors[k]
    }
    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }
    /// Lattice offset `q·l_k` in units of `h/q`.
    pub fn offset(&self, k: usize) -> &[i64] {
        &self.numerators[k]
    }
    pub fn opposite(&self, k: usize) -> usize {
        if k < self.m {
            k + self.m
        } else {
            k - self.m
        }
    }

    /// Index of the direction equal to `num/den`, if present.
    pub fn find(&self, num: &[i64], den: i64) -> Option<usize> {
        if self.q % den != 0 {
            return None;
        }
        let scaled: Vec<i64> = num.iter().map(|c| c * (self.q / den)).collect();
        self.numerators.iter().position(|n| *n == scaled)
    }

    /// Index of `e_i` (0-based axis).
    pub fn axis(&self, i: usize) -> usize {
        let mut e = vec![0; self.dims];
        e[i] = 1;
        self.find(&e, 1).expect("standard axes are always present")
    }

    /// Index of `(e_i + sign·e_j)/2`.
    pub fn half_diagonal(&self, i: usize, j: usize, sign: i64) -> Option<usize> {
        let mut e = vec![0; self.dims];
        e[i] = 1;
        e[j] += sign;
        self.find(&e, 2)
    }

    fn span_rank(&self) -> usize {
        let rows = self.vectors.len();
        let mat = DMatrix::from_fn(rows, self.dims, |r, c| self.vectors[r][c]);
        mat.rank(1e-10)
    }

    /// `Σ_k l_k l_k^*` over all signed directions.
    pub fn frame_operator(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.dims, self.dims);
        for v in &self.vectors {
            let l = DVector::from_column_slice(v);
            s += &l * l.transpose();
        }
        s
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta <= 1.0 {
        Ok(())
    } else {
        Err(invalid("delta", format!("{delta} not in (0, 1]")))
    }
}

fn reduce(num: &[i64], den: i64) -> (Vec<i64>, i64) {
    let g = num.iter().fold(den, |acc, &c| gcd(acc, c));
    (num.iter().map(|c| c / g).collect(), den / g)
}

fn standard_positive(dims: usize) -> Vec<(Vec<i64>, i64)> {
    let mut out = Vec::new();
    for i in 0..dims {
        let mut e = vec![0; dims];
        e[i] = 1;
        out.push((e, 1));
    }
    for i in 0..dims {
        for j in (i + 1)..dims {
            for sign in [1, -1] {
                let mut e = vec![0; dims];
                e[i] = 1;
                e[j] = sign;
                out.push((e, 2));
            }
        }
    }
    out
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// `max over a_k ∈ [p/2, 2/p]` of `Σ_k a_k z_k`, in closed form.
///
/// With `p = δ̂` this is the cut-off `𝒫`; the cut-off equation uses `p = δ`.
pub fn cutoff_p(z: &[f64], p: f64) -> f64 {
    let hi = 2.0 / p;
    let lo = p / 2.0;
    z.iter().map(|&t| if t > 0.0 { hi * t } else { lo * t }).sum()
}

/// A maximizing coefficient vector of [`cutoff_p`]; it is the gradient wherever
/// no entry of `z` vanishes.
pub fn cutoff_p_gradient(z: &[f64], p: f64) -> Vec<f64> {
    z.iter().map(|&t| if t > 0.0 { 2.0 / p } else { p / 2.0 }).collect()
}

/// `z''_k = ⟨u'' l_k, l_k⟩` for every signed direction.
pub fn hessian_to_pure(hess: &DMatrix<f64>, dirs: &DirectionSet) -> Vec<f64> {
    dirs.vectors()
        .iter()
        .map(|l| {
            let mut acc = 0.0;
            for i in 0..l.len() {
                for j in 0..l.len() {
                    acc += l[i] * l[j] * hess[(i, j)];
                }
            }
            acc
        })
        .collect()
}

/// Coefficients `λ_k` with `a = Σ_k λ_k l_k l_k^*`.
#[derive(Clone, Debug, Serialize)]
pub struct Decomposition {
    pub lambdas: Vec<f64>,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub residual: f64,
}

/// Frobenius tolerance on the reconstruction.
pub const DECOMPOSITION_TOLERANCE: f64 = 1e-8;

/// Writes `a ∈ S_{δ/4}` as a strictly positive combination of `l_k l_k^*`
/// with `λ_k = λ_{-k}`.
///
/// A uniform floor `t = λ_min(a)/(2·λ_max(Σ l l^*))` is split off first, the
/// remainder is fitted by nonnegative least squares, and `λ_k ≥ t > 0` follows.
pub fn decompose_spd(a: &DMatrix<f64>, dirs: &DirectionSet) -> Result<Decomposition> {
    let d = dirs.dims();
    if a.nrows() != d || a.ncols() != d {
        return Err(invalid("a", "dimension mismatch"));
    }
    if (a - a.transpose()).norm() > 1e-12 * (1.0 + a.norm()) {
        return Err(invalid("a", "matrix is not symmetric"));
    }
    let eig = SymmetricEigen::new(a.clone()).eigenvalues;
    let (emin, emax) = (eig.min(), eig.max());
    let (lo, hi) = (dirs.delta() / 4.0, 4.0 / dirs.delta());
    let slack = 1e-12 * hi;
    if emin < lo - slack || emax > hi + slack {
        return Err(Error::OutsideEllipticRange { min: emin, max: emax, lo, hi });
    }

    let frame = dirs.frame_operator();
    let frame_max = SymmetricEigen::new(frame.clone()).eigenvalues.max();
    let floor = emin / (2.0 * frame_max);
    let shifted = a - &frame * floor;

    // One unknown per ± pair; rows are the upper triangle, off-diagonals weighted
    // by √2 so the least-squares norm is the Frobenius norm.
    let m = dirs.m();
    let rows: Vec<(usize, usize)> = (0..d).flat_map(|i| (i..d).map(move |j| (i, j))).collect();
    let weight = |i: usize, j: usize| if i == j { 1.0 } else { std::f64::consts::SQRT_2 };
    let design = DMatrix::from_fn(rows.len(), m, |r, p| {
        let (i, j) = rows[r];
        let l = dirs.vector(p);
        2.0 * l[i] * l[j] * weight(i, j)
    });
    let rhs = DVector::from_fn(rows.len(), |r, _| {
        let (i, j) = rows[r];
        shifted[(i, j)] * weight(i, j)
    });
    let pair = nnls(&design, &rhs);

    let mut lambdas = vec![0.0; 2 * m];
    for p in 0..m {
        lambdas[p] = floor + pair[p];
        lambdas[p + m] = floor + pair[p];
    }
    let mut recon = DMatrix::zeros(d, d);
    for (k, l) in dirs.vectors().iter().enumerate() {
        let v = DVector::from_column_slice(l);
        recon += &v * v.transpose() * lambdas[k];
    }
    let residual = (a - recon).norm();
    if residual > DECOMPOSITION_TOLERANCE {
        return Err(Error::DecompositionInfeasible { residual, tolerance: DECOMPOSITION_TOLERANCE });
    }
    let lambda_lo = lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
    let lambda_hi = lambdas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(Decomposition { lambdas, lambda_lo, lambda_hi, residual })
}

/// Lawson–Hanson active-set nonnegative least squares.
fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-14 * a.norm().max(1.0) * b.norm().max(1.0);
    let solve_passive = |passive: &[bool]| -> DVector<f64> {
        let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let sub = DMatrix::from_fn(a.nrows(), idx.len(), |r, c| a[(r, idx[c])]);
        let sol = sub
            .svd(true, true)
            .solve(b, 1e-13)
            .expect("SVD with both factors computed");
        let mut full = DVector::zeros(n);
        for (c, &j) in idx.iter().enumerate() {
            full[j] = sol[c];
        }
        full
    };
    for _outer in 0..(3 * n + 10) {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else { break };
        if w[j] <= tol {
            break;
        }
        passive[j] = true;
        for _inner in 0..(3 * n + 10) {
            let s = solve_passive(&passive);
            let infeasible: Vec<usize> = (0..n).filter(|&i| passive[i] && s[i] <= 0.0).collect();
            if infeasible.is_empty() {
                x = s;
                break;
            }
            let alpha = infeasible
                .iter()
                .map(|&i| x[i] / (x[i] - s[i]))
                .fold(f64::INFINITY, f64::min);
            x = &x + (s - &x) * alpha;
            for i in 0..n {
                if passive[i] && x[i] <= 1e-15 {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
        }
    }
    x
}

#[derive(Serialize, Deserialize)]
struct DirectionSetRepr {
    dims: usize,
    m: usize,
    vectors: Vec<Vec<[i64; 2]>>,
    delta: f64,
    delta_hat: f64,
}

impl Serialize for DirectionSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let vectors = self
            .numerators
            .iter()
            .map(|n| {
                n.iter()
                    .map(|&c| {
                        let g = gcd(c, self.q).max(1);
                        [c / g, self.q / g]
                    })
                    .collect()
            })
            .collect();
        DirectionSetRepr {
            dims: self.dims,
            m: self.m,
            vectors,
            delta: self.delta,
            delta_hat: self.delta_hat,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DirectionSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = DirectionSetRepr::deserialize(d)?;
        if repr.vectors.len() != 2 * repr.m {
            return Err(D::Error::custom("expected 2m vectors"));
        }
        let positive = repr.vectors[..repr.m]
            .iter()
            .map(|v| {
                let den = v.iter().fold(1, |acc, p| lcm(acc, p[1]));
                (v.iter().map(|p| p[0] * (den / p[1])).collect(), den)
            })
            .collect();
        let set = DirectionSet::from_rationals(repr.dims, positive, repr.delta, repr.delta_hat)
            .map_err(D::Error::custom)?;
        for (k, v) in repr.vectors.iter().enumerate() {
            let exact: Vec<f64> = v.iter().map(|p| p[0] as f64 / p[1] as f64).collect();
            if exact != set.vectors[k] {
                return Err(D::Error::custom("vectors are not antipodally symmetric"));
            }
        }
        Ok(set)
    }
}

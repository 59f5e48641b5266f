//! Sparse matrices in CSR form, ILU(0) and BiCGSTAB, sized for the Newton
//! systems of the scheme (a few nonzeros per row, up to ~10⁵ rows).

#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(col, val)` lists; duplicate columns are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix { n, row_ptr, cols, vals }
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[p] * x[self.cols[p]];
            }
            y[i] = s;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .find(|&p| self.cols[p] == i)
                    .map_or(0.0, |p| self.vals[p])
            })
            .collect()
    }
}

/// Incomplete LU factorisation with the sparsity pattern of the matrix.
pub struct Ilu0 {
    lu: CsrMatrix,
    diag_pos: Vec<usize>,
}

impl Ilu0 {
    /// Fails (returns `None`) on a zero pivot.
    pub fn new(a: &CsrMatrix) -> Option<Self> {
        let mut lu = a.clone();
        let n = lu.n;
        let mut diag_pos = vec![usize::MAX; n];
        for i in 0..n {
            for p in lu.row_ptr[i]..lu.row_ptr[i + 1] {
                if lu.cols[p] == i {
                    diag_pos[i] = p;
                }
            }
            if diag_pos[i] == usize::MAX {
                return None;
            }
        }
        let mut where_in_row = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for p in start..end {
                where_in_row[lu.cols[p]] = p;
            }
            for p in start..end {
                let k = lu.cols[p];
                if k >= i {
                    continue;
                }
                let pivot = lu.vals[diag_pos[k]];
                let factor = lu.vals[p] / pivot;
                lu.vals[p] = factor;
                for q in diag_pos[k] + 1..lu.row_ptr[k + 1] {
                    let j = lu.cols[q];
                    let w = where_in_row[j];
                    if w != usize::MAX {
                        lu.vals[w] -= factor * lu.vals[q];
                    }
                }
            }
            for p in start..end {
                where_in_row[lu.cols[p]] = usize::MAX;
            }
            if lu.vals[diag_pos[i]] == 0.0 || !lu.vals[diag_pos[i]].is_finite() {
                return None;
            }
        }
        Some(Ilu0 { lu, diag_pos })
    }

    pub fn solve(&self, b: &[f64], x: &mut [f64]) {
        let lu = &self.lu;
        for i in 0..lu.n {
            let mut s = b[i];
            for p in lu.row_ptr[i]..self.diag_pos[i] {
                s -= lu.vals[p] * x[lu.cols[p]];
            }
            x[i] = s;
        }
        for i in (0..lu.n).rev() {
            let mut s = x[i];
            for p in self.diag_pos[i] + 1..lu.row_ptr[i + 1] {
                s -= lu.vals[p] * x[lu.cols[p]];
            }
            x[i] = s / lu.vals[self.diag_pos[i]];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Right-preconditioned BiCGSTAB. Returns the relative residual reached.
pub fn bicgstab(a: &CsrMatrix, pre: &Ilu0, b: &[f64], x: &mut [f64], rtol: f64, max_iter: usize) -> f64 {
    let n = a.n;
    let bnorm = norm2(b).max(f64::MIN_POSITIVE);
    let mut r = vec![0.0; n];
    a.mul_vec(x, &mut r);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    let r0 = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut phat = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut shat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut rel = norm2(&r) / bnorm;
    for _ in 0..max_iter {
        if rel <= rtol {
            break;
        }
        let rho_new = dot(&r0, &r);
        if rho_new == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        pre.solve(&p, &mut phat);
        a.mul_vec(&phat, &mut v);
        let denom = dot(&r0, &v);
        if denom == 0.0 {
            break;
        }
        alpha = rho / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm2(&s) / bnorm <= rtol {
            for i in 0..n {
                x[i] += alpha * phat[i];
            }
            rel = norm2(&s) / bnorm;
            break;
        }
        pre.solve(&s, &mut shat);
        a.mul_vec(&shat, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            break;
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * phat[i] + omega * shat[i];
            r[i] = s[i] - omega * t[i];
        }
        rel = norm2(&r) / bnorm;
        if omega == 0.0 {
            break;
        }
    }
    rel
}

//! Scalar data fields `ℝ^d → ℝ` used for coefficients, right-hand sides and
//! boundary data.

use std::path::Path;
use std::sync::Arc;

use evalexpr::{ContextWithMutableVariables, HashMapContext, Node, Value};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Field {
    Constant(f64),
    Expr(Arc<ExprField>),
    Cells(Arc<CellField>),
    Grid(Arc<GridSamples>),
    Func(ScalarFn),
}

impl std::fmt::Debug for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Field::Constant(c) => write!(f, "Constant({c})"),
            Field::Expr(e) => write!(f, "Expr({:?})", e.source),
            Field::Cells(c) => write!(f, "Cells(cell = {}, {} values)", c.cell, c.values.len()),
            Field::Grid(g) => write!(f, "Grid({} samples)", g.values.len()),
            Field::Func(_) => write!(f, "Func"),
        }
    }
}

impl Field {
    pub fn func(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Field::Func(Arc::new(f))
    }

    pub fn expr(source: &str) -> Result<Self> {
        Ok(Field::Expr(Arc::new(ExprField::parse(source)?)))
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Field::Constant(c) => *c,
            Field::Expr(e) => e.eval(x),
            Field::Cells(c) => c.eval(x),
            Field::Grid(g) => g.eval(x),
            Field::Func(f) => f(x),
        }
    }

    /// Extremes over the field's own samples when it has finitely many values,
    /// otherwise over a uniform probe grid on `lo..hi`.
    pub fn range_over(&self, lo: &[f64], hi: &[f64]) -> (f64, f64) {
        match self {
            Field::Constant(c) => (*c, *c),
            Field::Cells(c) => min_max(c.values.iter().copied()),
            Field::Grid(g) => min_max(g.values.iter().copied()),
            _ => {
                let n = match lo.len() {
                    1 => 401,
                    2 => 81,
                    _ => 25,
                };
                let mut pts = Vec::new();
                let mut idx = vec![0usize; lo.len()];
                loop {
                    let x: Vec<f64> = (0..lo.len())
                        .map(|i| lo[i] + (hi[i] - lo[i]) * idx[i] as f64 / (n - 1) as f64)
                        .collect();
                    pts.push(self.eval(&x));
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
                min_max(pts.into_iter())
            }
        }
    }

    pub fn sup_abs_over(&self, lo: &[f64], hi: &[f64]) -> f64 {
        let (a, b) = self.range_over(lo, hi);
        a.abs().max(b.abs())
    }
}

fn min_max(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
}

/// Closed-form expression in the variables `x1, x2, x3` (aliases `x, y, z`).
pub struct ExprField {
    source: String,
    tree: Node,
}

impl ExprField {
    pub fn parse(source: &str) -> Result<Self> {
        let tree = evalexpr::build_operator_tree(source).map_err(|e| Error::Expression(e.to_string()))?;
        let field = ExprField { source: source.to_string(), tree };
        // Probe once so unknown identifiers fail at parse time.
        field.try_eval(&[0.1, 0.2, 0.3])?;
        Ok(field)
    }

    fn try_eval(&self, x: &[f64]) -> Result<f64> {
        let mut ctx = HashMapContext::new();
        let names = [["x1", "x"], ["x2", "y"], ["x3", "z"]];
        for (i, pair) in names.iter().enumerate() {
            let v = x.get(i).copied().unwrap_or(0.0);
            for name in pair {
                ctx.set_value((*name).into(), Value::Float(v)).map_err(|e| Error::Expression(e.to_string()))?;
            }
        }
        ctx.set_value("pi".into(), Value::Float(std::f64::consts::PI))
            .map_err(|e| Error::Expression(e.to_string()))?;
        match self.tree.eval_with_context(&ctx) {
            Ok(Value::Float(v)) => Ok(v),
            Ok(Value::Int(v)) => Ok(v as f64),
            Ok(other) => Err(Error::Expression(format!("`{}` evaluated to {other:?}", self.source))),
            Err(e) => Err(Error::Expression(format!("`{}`: {e}", self.source))),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.try_eval(x).unwrap_or(f64::NAN)
    }
}

/// Piecewise-constant random field: independent uniform samples on the cells
/// of a fixed grid of side `cell`, drawn from a seeded generator.
pub struct CellField {
    cell: f64,
    lo: Vec<f64>,
    extent: Vec<usize>,
    values: Vec<f64>,
}

impl CellField {
    pub fn uniform(lo: &[f64], hi: &[f64], cell: f64, range: (f64, f64), seed: u64) -> Result<Self> {
        if !(cell > 0.0) || range.1 < range.0 {
            return Err(invalid("cell", "need a positive cell size and an ordered range"));
        }
        let extent: Vec<usize> = lo.iter().zip(hi).map(|(a, b)| ((b - a) / cell).ceil().max(1.0) as usize).collect();
        let total: usize = extent.iter().product();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..total)
            .map(|_| if range.1 > range.0 { rng.gen_range(range.0..range.1) } else { range.0 })
            .collect();
        Ok(CellField { cell, lo: lo.to_vec(), extent, values })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut idx = 0;
        let mut stride = 1;
        for (axis, &n) in self.extent.iter().enumerate() {
            let c = ((x[axis] - self.lo[axis]) / self.cell).floor();
            let c = (c.max(0.0) as usize).min(n - 1);
            idx += c * stride;
            stride *= n;
        }
        self.values[idx]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Samples on a regular grid read from CSV (`x1..xd, value`), evaluated by
/// nearest grid point.
pub struct GridSamples {
    axes: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl GridSamples {
    pub fn from_csv(path: &Path, dims: usize) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() < dims + 1 {
                return Err(invalid("csv", format!("row has {} columns, need {}", rec.len(), dims + 1)));
            }
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| invalid("csv", e.to_string()));
            let x = (0..dims).map(|i| parse(&rec[i])).collect::<Result<Vec<_>>>()?;
            rows.push((x, parse(&rec[dims])?));
        }
        let axes: Vec<Vec<f64>> = (0..dims)
            .map(|i| {
                let mut a: Vec<f64> = rows.iter().map(|r| r.0[i]).collect();
                a.sort_by(f64::total_cmp);
                a.dedup_by(|p, q| (*p - *q).abs() < 1e-12);
                a
            })
            .collect();
        let total: usize = axes.iter().map(Vec::len).product();
        if total != rows.len() {
            return Err(invalid("csv", "samples do not form a full regular grid"));
        }
        let mut values = vec![f64::NAN; total];
        for (x, v) in rows {
            let mut idx = 0;
            let mut stride = 1;
            for (axis, a) in axes.iter().enumerate() {
                let pos = a.iter().position(|c| (c - x[axis]).abs() < 1e-12).expect("coordinate on axis");
                idx += pos * stride;
                stride *= a.len();
            }
            values[idx] = v;
        }
        Ok(GridSamples { axes, values })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut idx = 0;
        let mut stride = 1;
        for (axis, a) in self.axes.iter().enumerate() {
            let pos = match a.binary_search_by(|c| c.total_cmp(&x[axis])) {
                Ok(p) => p,
                Err(0) => 0,
                Err(p) if p >= a.len() => a.len() - 1,
                Err(p) => {
                    if x[axis] - a[p - 1] <= a[p] - x[axis] {
                        p - 1
                    } else {
                        p
                    }
                }
            };
            idx += pos * stride;
            stride *= a.len();
        }
        self.values[idx]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn expressions() {
        let f = Field::expr("1 + x1 * x2 - math::sin(pi * x3)").unwrap();
        let v = f.eval(&[2.0, 3.0, 0.5]);
        assert!((v - 6.0).abs() < 1e-12);
        assert!(Field::expr("unknown_var + 1").is_err());
    }

    #[test]
    fn cells_are_piecewise_constant_and_seeded() {
        let a = CellField::uniform(&[-1.0, -1.0], &[1.0, 1.0], 0.25, (0.0, 10.0), 7).unwrap();
        let b = CellField::uniform(&[-1.0, -1.0], &[1.0, 1.0], 0.25, (0.0, 10.0), 7).unwrap();
        assert_eq!(a.values(), b.values());
        assert_eq!(a.eval(&[0.01, 0.01]), a.eval(&[0.2, 0.2]));
        assert!(a.values().iter().all(|v| (0.0..10.0).contains(v)));
    }

    #[test]
    fn csv_grid() {
        let mut tmp = tempfile::NamedTempFile::new().unwrap();
        writeln!(tmp, "x1,x2,value").unwrap();
        for i in 0..3 {
            for j in 0..2 {
                writeln!(tmp, "{},{},{}", i as f64 * 0.5, j as f64, i * 10 + j).unwrap();
            }
        }
        let g = GridSamples::from_csv(tmp.path(), 2).unwrap();
        assert_eq!(g.eval(&[0.45, 0.9]), 11.0);
        assert_eq!(g.eval(&[5.0, -3.0]), 20.0);
    }
}

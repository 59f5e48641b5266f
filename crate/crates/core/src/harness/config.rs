use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::directions::DirectionSet;
use crate::error::{invalid, Error, Result};
use crate::field::{CellField, Field, GridSamples};
use crate::lattice::DomainSpec;
use crate::operators::{
    example_eq12, example_isaacs, example_nonuniqueness, example_nonuniqueness_max, example_poisson, LinearMember,
    OperatorSpec, NONUNIQUENESS_EPS,
};
use crate::solver::Method;

/// A scalar field: a number, an expression string, or a table.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Number(f64),
    Expr(String),
    Table(FieldTable),
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldTable {
    /// Independent uniform values on the cells of a fixed grid.
    Cells { cell: f64, range: [f64; 2], seed: Option<u64> },
    /// Regular-grid samples `x1..xd, value`.
    Csv { path: PathBuf },
}

impl FieldSpec {
    pub fn build(&self, lo: &[f64], hi: &[f64], seed: u64, base: &Path) -> Result<Field> {
        match self {
            FieldSpec::Number(c) => Ok(Field::Constant(*c)),
            FieldSpec::Expr(s) => Field::expr(s),
            FieldSpec::Table(FieldTable::Cells { cell, range, seed: own }) => Ok(Field::Cells(Arc::new(
                CellField::uniform(lo, hi, *cell, (range[0], range[1]), own.unwrap_or(seed))?,
            ))),
            FieldSpec::Table(FieldTable::Csv { path }) => {
                Ok(Field::Grid(Arc::new(GridSamples::from_csv(&base.join(path), lo.len())?)))
            }
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct MemberConfig {
    /// `m` weights (mirrored onto `±k`) or `2m` weights.
    pub a: Vec<f64>,
    #[serde(default)]
    pub b: Vec<f64>,
    #[serde(default)]
    pub c: f64,
    #[serde(default = "zero_field")]
    pub f: FieldSpec,
}

fn zero_field() -> FieldSpec {
    FieldSpec::Number(0.0)
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorConfig {
    Eq12 {
        g_bar: FieldSpec,
        f: FieldSpec,
    },
    Bellman {
        delta: f64,
        #[serde(default)]
        b_max: f64,
        #[serde(default)]
        members: Vec<MemberConfig>,
        /// CSV rows `a_1..a_{2m}, b_1..b_{2m}, c, f` (constant `f`).
        members_csv: Option<PathBuf>,
    },
    Isaacs {
        delta: f64,
        #[serde(default)]
        b_max: f64,
        families: Vec<Vec<MemberConfig>>,
    },
    Nonuniqueness {
        #[serde(default = "default_eps")]
        eps: f64,
        #[serde(default)]
        with_max_branch: bool,
    },
    Poisson {
        f: FieldSpec,
    },
}

fn default_eps() -> f64 {
    NONUNIQUENESS_EPS
}

/// Overrides for the constants the theory attaches to an operator.
#[derive(Clone, Debug, Default, Deserialize, Serialize)]
pub struct Constants {
    pub delta: Option<f64>,
    pub k0: Option<f64>,
    pub h_bar: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainConfig {
    Ball {
        dims: usize,
        #[serde(default)]
        center: Option<Vec<f64>>,
        #[serde(default = "one")]
        radius: f64,
    },
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct DirectionsConfig {
    /// Ellipticity used for the direction set; defaults to the operator's.
    pub delta: Option<f64>,
    pub delta_hat: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct BoundaryConfig {
    pub g: FieldSpec,
    /// Known solution, for error tables.
    pub exact: Option<FieldSpec>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct ScheduleConfig {
    pub h: Vec<f64>,
    /// Cut-off levels; `inf` means the uncut operator.
    #[serde(rename = "K")]
    pub k: Vec<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub method: MethodName,
    /// Exponent of the residual norm; defaults to the dimension.
    pub p_norm: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_iters() -> usize {
    1_000_000
}

#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    #[default]
    Newton,
    Richardson,
}

impl From<MethodName> for Method {
    fn from(m: MethodName) -> Method {
        match m {
            MethodName::Newton => Method::Newton,
            MethodName::Richardson => Method::Richardson,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct OutputConfig {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_out() }
    }
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct StudyConfig {
    pub name: Option<String>,
    pub operator: OperatorConfig,
    #[serde(default)]
    pub constants: Constants,
    pub domain: DomainConfig,
    pub directions: Option<DirectionsConfig>,
    pub boundary: BoundaryConfig,
    pub study: ScheduleConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Everything needed to set up a discrete problem at any `h`.
#[derive(Clone, Debug)]
pub struct Problem {
    pub op: OperatorSpec,
    pub domain: DomainSpec,
    pub dirs: DirectionSet,
    pub g: Field,
    pub exact: Option<Field>,
}

impl StudyConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: StudyConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml_str(&std::fs::read_to_string(path)?)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.study;
        if s.h.is_empty() || s.k.is_empty() {
            return Err(Error::Config("h and K schedules must be nonempty".into()));
        }
        if s.h.iter().any(|h| !(*h > 0.0)) || s.h.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("h schedule must be positive and strictly decreasing".into()));
        }
        if s.k.iter().any(|k| !(*k >= 0.0)) || s.k.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("K schedule must be nonnegative and strictly increasing".into()));
        }
        if !(s.tol > 0.0) {
            return Err(Error::Config("tol must be positive".into()));
        }
        let inradius = self.domain_spec()?.inradius;
        if let Some(h) = s.h.iter().find(|h| **h >= inradius) {
            return Err(Error::Config(format!("h = {h} is not below the domain inradius {inradius}")));
        }
        Ok(())
    }

    pub fn dims(&self) -> usize {
        match &self.domain {
            DomainConfig::Ball { dims, .. } => *dims,
            DomainConfig::Box { lo, .. } => lo.len(),
        }
    }

    pub fn domain_spec(&self) -> Result<DomainSpec> {
        match &self.domain {
            DomainConfig::Ball { dims, center, radius } => {
                let c = center.clone().unwrap_or_else(|| vec![0.0; *dims]);
                if c.len() != *dims {
                    return Err(Error::Config("ball centre has the wrong dimension".into()));
                }
                DomainSpec::ball(c, *radius)
            }
            DomainConfig::Box { lo, hi } => DomainSpec::boxed(lo.clone(), hi.clone()),
        }
    }

    fn operator_delta(&self) -> f64 {
        let natural = match &self.operator {
            OperatorConfig::Eq12 { .. } => 1.0 / 3.0,
            OperatorConfig::Bellman { delta, .. } | OperatorConfig::Isaacs { delta, .. } => *delta,
            OperatorConfig::Nonuniqueness { .. } => 0.25,
            OperatorConfig::Poisson { .. } => match self.dims() {
                1 => 0.5,
                _ => 0.25,
            },
        };
        self.constants.delta.unwrap_or(natural)
    }

    pub fn problem(&self) -> Result<Problem> {
        let domain = self.domain_spec()?;
        let d = domain.dims();
        let dir_delta = self.directions.as_ref().and_then(|c| c.delta).unwrap_or_else(|| self.operator_delta());
        let mut dirs = DirectionSet::standard(d, dir_delta)?;
        if let Some(dh) = self.directions.as_ref().and_then(|c| c.delta_hat) {
            dirs = dirs.with_delta_hat(dh)?;
        }
        let (lo, hi) = domain.bounding_box();
        let seed = self.study.seed;
        let base = self.base_dir.as_path();
        let field = |f: &FieldSpec| f.build(&lo, &hi, seed, base);
        let mut op = match &self.operator {
            OperatorConfig::Eq12 { g_bar, f } => example_eq12(&dirs, field(g_bar)?, field(f)?, (&lo, &hi))?,
            OperatorConfig::Poisson { f } => {
                let f = field(f)?;
                let sup = f.sup_abs_over(&lo, &hi);
                example_poisson(&dirs, f, sup)?
            }
            OperatorConfig::Nonuniqueness { eps, with_max_branch } => {
                if d != 1 {
                    return Err(Error::UnsupportedDimension(d));
                }
                if *with_max_branch {
                    example_nonuniqueness_max(*eps)?
                } else {
                    example_nonuniqueness(*eps)?
                }
            }
            OperatorConfig::Bellman { delta, b_max, members, members_csv } => {
                let mut list = members
                    .iter()
                    .map(|m| member(m, &dirs, &field))
                    .collect::<Result<Vec<_>>>()?;
                if let Some(path) = members_csv {
                    list.extend(members_from_csv(&base.join(path), dirs.len())?);
                }
                let f_sup = list.iter().map(|m| m.f.sup_abs_over(&lo, &hi)).fold(0.0, f64::max);
                example_isaacs(&dirs, list.into_iter().map(|m| vec![m]).collect(), *delta, *b_max, f_sup)?
            }
            OperatorConfig::Isaacs { delta, b_max, families } => {
                let fams = families
                    .iter()
                    .map(|fam| fam.iter().map(|m| member(m, &dirs, &field)).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()?;
                let f_sup = fams.iter().flatten().map(|m| m.f.sup_abs_over(&lo, &hi)).fold(0.0, f64::max);
                example_isaacs(&dirs, fams, *delta, *b_max, f_sup)?
            }
        };
        if let Some(v) = self.constants.delta {
            op.delta = v;
        }
        if let Some(v) = self.constants.k0 {
            op.k0 = v;
        }
        if let Some(v) = self.constants.h_bar {
            op.h_bar = v;
        }
        let g = field(&self.boundary.g)?;
        let exact = self.boundary.exact.as_ref().map(field).transpose()?;
        Ok(Problem { op, domain, dirs, g, exact })
    }
}

fn member(m: &MemberConfig, dirs: &DirectionSet, field: &impl Fn(&FieldSpec) -> Result<Field>) -> Result<LinearMember> {
    let n = dirs.len();
    let a = mirror(&m.a, dirs.m(), "a")?;
    let b = if m.b.is_empty() { vec![0.0; n] } else { mirror(&m.b, dirs.m(), "b")? };
    Ok(LinearMember { a, b, c: m.c, f: field(&m.f)? })
}

fn mirror(w: &[f64], m: usize, name: &'static str) -> Result<Vec<f64>> {
    if w.len() == 2 * m {
        Ok(w.to_vec())
    } else if w.len() == m {
        Ok(w.iter().chain(w).copied().collect())
    } else {
        Err(invalid(name, format!("expected {m} or {} weights, got {}", 2 * m, w.len())))
    }
}

fn members_from_csv(path: &Path, n: usize) -> Result<Vec<LinearMember>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).comment(Some(b'#')).from_path(path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let vals = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|e| invalid("members_csv", e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != 2 * n + 2 {
            return Err(invalid("members_csv", format!("row has {} values, need {}", vals.len(), 2 * n + 2)));
        }
        out.push(LinearMember {
            a: vals[..n].to_vec(),
            b: vals[n..2 * n].to_vec(),
            c: vals[2 * n],
            f: Field::Constant(vals[2 * n + 1]),
        });
    }
    Ok(out)
}

//! Monotone finite-difference schemes for fully nonlinear elliptic equations
//! with a cut-off regularisation, plus the discrete estimates that go with them.

pub mod directions;
pub mod error;
pub mod estimates;
pub mod field;
pub mod harness;
pub mod lattice;
pub mod linalg;
pub mod operators;
pub mod solver;

pub use directions::DirectionSet;
pub use error::{Error, Result};
pub use field::Field;
pub use lattice::{DiscreteDomain, DomainSpec, GridFunction};
pub use operators::{make_cutoff_operator, CoefficientBox, Jet, Kernel, OperatorSpec};

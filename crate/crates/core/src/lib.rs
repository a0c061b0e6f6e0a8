//! Local series expansions of solutions of P-Q pairs
//! `Psi_x = P Psi`, `Psi_lambda = Q Psi` near a singular point `lambda = 0`
//! of the Q-equation.
//!
//! - [`series`]: truncated matrix Laurent series.
//! - [`expr`], [`model`]: the expression language and parametrized pairs.
//! - [`seed`]: frozen-x coefficient solves for irregular and regular points.
//! - [`propagation`]: x-evolution of the expansions, residual monitors and
//!   conservation laws.
//! - [`catalog`]: self-verifying example pairs.
//! - [`document`], [`report`]: model documents and run reports.

pub mod catalog;
pub mod document;
pub mod error;
pub mod expr;
pub mod integrate;
pub mod linalg;
pub mod model;
pub mod propagation;
pub mod report;
pub mod seed;
pub mod series;
pub mod tolerances;

pub use error::{Error, Result};
pub use expr::{parse_expression, Expr};
pub use model::{ModelSpec, PQPairModel};
pub use series::{ComplexMatrix, LaurentMatrixSeries};

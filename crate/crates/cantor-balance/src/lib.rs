//! Exact combinatorics of balanced clopen sets in the Cantor cube.

pub mod algebra;
pub mod balance;
pub mod cube;
pub mod dyadic;
pub mod error;
pub mod examples;
pub mod extension;
pub mod forcing;
pub mod harness;
pub mod measures;
pub mod ratio;
pub mod repair;

pub use algebra::{FiniteAlgebra, PieceFamily};
pub use balance::{BalanceReport, Violation, ViolationKind};
pub use cube::{CubeSet, Signs};
pub use dyadic::Dyadic;
pub use error::{Error, Result};

/// Exact rational scalar used for every threshold.
pub type Rational = num_rational::BigRational;

//! Algebra-plus-low-rank preconditioners for structured linear systems.
//!
//! A Toeplitz or Hankel matrix `A` is split as `A = P + R + E` where `P` lies in a
//! matrix algebra diagonalized by a fast transform, `R` has low rank and `E` is small.

pub mod algebras;
pub mod blackdot;
pub mod dense;
pub mod displacement;
pub mod error;
pub mod explicit;
pub mod oracle;
pub mod precond;
pub mod solvers;
pub mod structured;

pub type C64 = num_complex::Complex64;

pub use algebras::{AlgebraId, HartleyIndex, Transform, TrigKind};
pub use error::{Error, Result};
pub use precond::AlgebraPlusLowRank;
pub use structured::{StructureKind, StructuredMatrix, SymbolSpec};

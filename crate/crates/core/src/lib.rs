//! Schur complement low-rank (SLR) preconditioning for sparse symmetric systems.

pub mod analysis;
pub mod dense;
pub mod error;
pub mod factor;
pub mod krylov;
pub mod lanczos;
pub mod partition;
pub mod slr;
pub mod sparse;

pub use error::{Result, SlrError};
pub use sparse::{GridShape, SymSparseMatrix};

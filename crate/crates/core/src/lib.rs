//! Exact geometric realization of curvature models.
//!
//! Curvature models are realized as jets of pseudo-Riemannian metrics whose
//! curvature at the origin is the prescribed tensor, and those metrics are
//! then deformed by a formal Cauchy–Kovalevskaya recursion so that the
//! scalar curvature (and, for Hermitian and hyper models, the star-scalar
//! curvature) is constant through the truncation order. All arithmetic is
//! over exact rationals, so every verification is an equality.

pub mod ck;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod io;
pub mod realization;
pub mod scalar;
pub mod series;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::{QMatrix, Scalar};
pub use series::{Series, SeriesMatrix};

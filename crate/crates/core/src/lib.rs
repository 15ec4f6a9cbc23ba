//! Markov functions of symmetric positive definite Toeplitz matrices.
//!
//! Rational interpolants at quasi-optimal nodes approximate `f(A)` for Markov
//! functions `f`. The error is certified by a priori and residual bounds, and
//! the interpolant is evaluated in a Toeplitz-like (displacement generator)
//! matrix algebra.

pub mod approx;
pub mod elliptic;
pub mod error;
pub mod gen;
pub mod interp;
pub mod linalg;
pub mod markov;
pub mod matfun;
pub mod oracle;
pub mod tlalgebra;

pub use approx::{build_geometry, Geometry, NodeSet};
pub use error::{Error, Result};
pub use interp::{RationalInterpolant, RepKind, Representation};
pub use markov::{MarkovKind, MarkovSpec};
pub use matfun::{MatArg, MatFunResult, NewtonState};
pub use tlalgebra::{Solver, TLMatrix, ToeplitzInput};

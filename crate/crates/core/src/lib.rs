//! Adaptive finite element reconstruction of piecewise constant conductivities
//! from complete-electrode-model voltage data.
//!
//! The reconstruction minimizes a Tikhonov functional with a Modica-Mortola
//! phase-field penalty over P1 conductivities in a box `[c0, c1]`. Meshes are
//! adapted by newest vertex bisection driven by three residual indicators
//! (state, adjoint, variational inequality) with separate Dörfler marking.
//!
//! Module map:
//! - [`mesh`]: conforming triangulations, electrode tagging, bisection.
//! - [`cem`]: forward and adjoint complete electrode model solves.
//! - [`objective`]: double well, Modica-Mortola functional, objective and gradient.
//! - [`optimizer`]: majorization-minimization / Gauss-Newton solver.
//! - [`estimators`]: element indicators.
//! - [`marking`]: Dörfler marking.
//! - [`interp`]: Lagrange and star-average quasi-interpolation.
//! - [`experiments`]: phantoms, data synthesis, the adaptive loop and file IO.

pub mod cem;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod interp;
pub mod linalg;
pub mod marking;
pub mod mesh;
pub mod objective;
pub mod optimizer;
pub mod quadrature;

pub use error::{Error, Result};

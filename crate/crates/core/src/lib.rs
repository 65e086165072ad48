//! Numerical laboratory for the singularly perturbed biharmonic problem
//! 2Δ²u = −β_ε(u): finite-difference solvers, the planar radius-indexed
//! monotonicity diagnostics, blow-up classification, closed-form 1D
//! counterexample families, and the lattice-game model.

pub mod error;
pub mod fields;
pub mod forcing;
pub mod montecarlo;
pub mod numerics;
pub mod blowup;
pub mod counterexamples;
pub mod identity;
pub mod monotonicity;
pub mod solver;

pub use error::{Error, Result};

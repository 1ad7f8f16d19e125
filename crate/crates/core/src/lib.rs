//! Finite elements for weighted Φ-Laplace equations and obstacle problems.
//!
//! The crate is organised bottom-up:
//!
//! * [`nfunc`]: N-functions, conjugates, shifts, indices, the fields `A` and `V`;
//! * [`weight`]: weights and numerical Muckenhoupt-type diagnostics;
//! * [`mesh`]: conforming triangulations, patches, vertex stars;
//! * [`femcore`]: P1 spaces, weighted quadrature, modulars, assembly;
//! * [`interp`]: Scott–Zhang and positivity-preserving interpolants;
//! * [`solve`]: damped Newton and active-set solvers;
//! * [`study`]: manufactured solutions and convergence studies.

pub mod error;
pub mod femcore;
pub mod interp;
pub mod nfunc;
pub mod mesh;
pub mod quad;
pub mod solve;
pub mod study;
pub mod weight;

pub use error::{Error, Result};
pub use nfunc::NFunction;

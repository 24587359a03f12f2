//! Simulation and statistical verification toolkit for divergent perpetuities
//! and random difference equations in the contractive regime.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`] signed log-space arithmetic used wherever sums of
//!   exponentially large terms are formed;
//! * [`model`] concrete laws of the coefficient pair `(M, Q)`, the truncated
//!   mean `A(x)`, the normaliser `b_n` and a regime classifier;
//! * [`paths`] càdlàg step paths, finite point measures and their distances;
//! * [`simulate`] backward (perpetuity) and forward (Markov chain) paths;
//! * [`limitlaw`] Poisson random measures, extremal processes and the exact
//!   limit distribution functions;
//! * [`theorem21`] the deterministic functionals `F_n` and `G` together with
//!   condition checks and a convergence demonstration;
//! * [`verify`] Kolmogorov–Smirnov machinery and the verification suites.

pub mod error;
pub mod limitlaw;
pub mod model;
pub mod numerics;
mod parallel;
pub mod paths;
mod quad;
pub mod rng;
pub mod simulate;
pub mod theorem21;
pub mod verify;

pub use error::{Error, Result};

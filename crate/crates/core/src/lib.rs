//! Numerical laboratory for one-dimensional quasiperiodic Schrodinger
//! operators
//!
//! ```text
//!     (H(x) psi)(m) = psi(m + 1) + psi(m - 1) + lambda v(x + m alpha) psi(m)
//! ```
//!
//! where `v` is a 1-periodic, monotone, Lipschitz potential, `alpha` is an
//! irrational frequency and `lambda > 0` a coupling constant. The crate
//! provides the pieces needed to study localization of such operators at
//! desk scale:
//!
//! - [`arithmetic`]: continued fractions, torus norms, three-gap structure
//!   of rotation orbits, good denominator scales, Diophantine checks;
//! - [`potential`]: built-in monotone potentials (sawtooth, quadratic blend,
//!   piecewise linear) with declared slope bounds;
//! - [`operator`]: Dirichlet and periodic finite restrictions, breakpoint
//!   jump structure;
//! - [`spectral`]: Sturm-sequence eigenvalue solvers, eigenvalue curves in
//!   the phase, almost-invariance and repulsion measurements;
//! - [`cocycle`]: overflow-safe transfer matrices and characteristic
//!   determinants, Lyapunov exponents, Thouless formula;
//! - [`ids`]: integrated density of states tables and Lipschitz modulus;
//! - [`ldt`]: large-deviation statistics of `|P_n(x, E)|` over the phase;
//! - [`localization`]: box Green functions, regularity probes, eigenvectors
//!   and exponential decay fits.
//!
//! All computations are deterministic: parallel loops collect indexed
//! results and reduce them in a fixed order, so outputs do not depend on
//! thread count.

pub mod arithmetic;
pub mod cocycle;
pub mod dd;
pub mod error;
pub mod ids;
pub mod ldt;
pub mod localization;
pub mod numerics;
pub mod operator;
pub mod potential;
pub mod spectral;

pub use arithmetic::{ContinuedFraction, DiophantineParams, Frequency, GapStructure};
pub use error::{Error, Result};
pub use operator::{BoundaryCondition, FiniteRestriction};
pub use potential::{MonotonePotential, OperatorSpec};
pub use spectral::Spectrum;

//! Characteristic roots of two-lag linear delay differential equations
//!
//! ```text
//! x'(t) = alpha x(t) + beta x(t - tau1) + gamma x(t - tau2)
//! ```
//!
//! The roots of `s = alpha + beta e^{-s tau1} + gamma e^{-s tau2}` are computed
//! branch by branch from a double power series in two small quantities
//! (`sigma`, `mu`) built on the branch logarithm of the reduced second-lag
//! coefficient. Independent checks live alongside: damped Newton refinement,
//! a contour-integral evaluation of the series unknown, transfer-function
//! grids, Lambert W for the single-lag limit, and a method-of-steps integrator
//! for time-domain ground truth.
//!
//! Module map:
//!
//! * [`model`]: parameters, time rescaling, branch logarithms, per-branch inputs.
//! * [`combinatorics`]: partial Bell polynomials and their derivatives, Stirling
//!   numbers, rising factorials.
//! * [`series`]: the expansion coefficients and branch roots.
//! * [`lambert`]: Lambert W on every branch and the single-lag eigenvalue map.
//! * [`oracle`]: residuals, Newton refinement, contour integral, transfer grid.
//! * [`dynamics`]: time integration, spectral reconstruction, blowfly model and
//!   the Hopf crossing scan.
//! * [`exec`]: sequential / rayon execution switch for batch work.

// `!(x > 0.0)` is how argument checks reject NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod combinatorics;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod lambert;
pub mod model;
pub mod oracle;
pub mod series;

mod sum;

pub use error::{Error, Result};
pub use model::{ModelParams, ReducedParams, Truncation};
pub use series::Root;

/// Complex double used throughout.
pub type C64 = num_complex::Complex64;

//! Modified-carrying-simplex checks and heteroclinic-cycle classification for
//! three-species competitive Kolmogorov maps `T_i(x) = x_i f_i(x)`.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: the map family, its Jacobians and the row-sum conditions;
//! - [`linalg`]: 3×3 helpers, including eigenvalues via the characteristic cubic;
//! - [`simplex`]: grid certification of the simplex-existence hypotheses;
//! - [`fixed_points`]: fixed-point search and local stability;
//! - [`cycle`]: direction, `det θ` and global verdicts for the boundary cycle;
//! - [`orbit`]: forward/backward orbits and their diagnostics;
//! - [`ricker`]: the cyclic Ricker model's parameter regimes.

pub mod cycle;
pub mod error;
pub mod fixed_points;
pub mod linalg;
pub mod model;
pub mod orbit;
pub mod ricker;
pub mod simplex;
pub mod tolerances;

pub use error::{Error, Result};
pub use model::{JacobianBundle, KolmogorovModel, ModelKind, StateVector};
pub use tolerances::{Strict, Tolerances};

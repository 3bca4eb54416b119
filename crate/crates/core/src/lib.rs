//! Block-diagonal operators on sequence spaces with prescribed s-number decay.
//!
//! The crate builds finite models of the operators used to realise a
//! prescribed decay rate for approximation, Gelfand, Kolmogorov and
//! ideal-valued s-numbers, evaluates their s-numbers with closed-form
//! calculators, cross-checks those against brute-force width oracles, and
//! checks every claimed two-sided inequality on the resulting truncations.
//!
//! Module map:
//!
//! - [`sequences`]: decay sequences, the convex minorant, block index plans and β-tables.
//! - [`operators`]: block operators, dense truncations and analytic tail norms.
//! - [`snumbers`]: closed-form s-number and summing-norm calculators.
//! - [`oracle`]: optimisation oracles for widths, π₂ lower bounds, Auerbach bases
//!   and the projection perturbation.
//! - [`verify`]: certified interval assembly, claim checks and report emission.
//! - [`config`]: run configuration shared by the command-line front end.

pub mod config;
pub mod error;
pub mod linalg;
pub mod operators;
pub mod oracle;
pub mod rng;
pub mod sequences;
pub mod snumbers;
pub mod verify;

pub use error::{Error, Result};

/// Version string embedded into every emitted report.
pub const TOOL_VERSION: &str = concat!("snum ", env!("CARGO_PKG_VERSION"));

//! Effective resistance of resistive multigraph networks, computed three ways:
//!
//! - a dense solve of the grounded Laplacian ([`electric::effective_resistance`]),
//! - Thomson's minimum-energy flow, both from node voltages and from an
//!   independent minimization over cycle coordinates ([`electric::thomson_flow`],
//!   [`electric::min_energy_flow_oracle`]),
//! - the variance of a potential difference of the Gaussian free field
//!   ([`gff::FreeField::potential_difference_variance`]).
//!
//! On top of these, [`verify`] machine-checks the superadditivity
//! `Reff(R + Rbar) >= Reff(R) + Reff(Rbar)` through both the power chain and the
//! differential-entropy chain, the conditioning lemma for jointly Gaussian
//! vectors, and concavity, scaling and monotonicity of effective resistance.

pub mod cli;
pub mod electric;
mod error;
pub mod gaussian;
pub mod gff;
pub mod graph;
mod linalg;
pub mod verify;

pub use error::{Error, Result};

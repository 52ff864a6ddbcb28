//! Momentum-space entanglement between a single photon resonantly scattered
//! by a free two-level atom and the recoiling atom.
//!
//! The crate evaluates closed-form joint amplitudes ([`amplitude`]),
//! quantifies their correlation by the ratio of single-particle to
//! coincidence momentum widths ([`moments`]) and by the Schmidt number
//! ([`schmidt`]), and sweeps both over the control parameters ([`analysis`]).
//! The [`cli`] module drives everything from the `recoil-ent` binary.

// `!(x > y)` is used on purpose so NaN takes the rejection branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amplitude;
pub mod analysis;
pub mod cli;
pub mod error;
mod jacobi;
pub mod moments;
pub mod params;
pub mod schmidt;

pub use amplitude::{AmplitudeField, FieldKind};
pub use error::{Error, Result};
pub use params::{ControlParams, GridPolicy, GridSpec};
pub use schmidt::SchmidtSpectrum;

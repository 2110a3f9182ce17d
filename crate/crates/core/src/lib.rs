//! Dark-state dynamics, synthetic gauge potentials and non-Abelian holonomies
//! of a four-level tripod atom.
//!
//! Units throughout: `hbar = 1`, time in microseconds, length in micrometres,
//! energies as angular frequencies in rad/us.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod holonomy;
pub mod qmath;
pub mod reconstruct;
pub mod thermal;
pub mod tripod;
pub mod units;

pub use error::{Error, Result};

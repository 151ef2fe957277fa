//! Numerical laboratory for the circular Riesz gas with exponent `d - 1 < s < d`.
//!
//! The crate is organised bottom-up: [`potential`] evaluates the Riesz kernel
//! and its periodized version on the torus, [`torus`] holds configurations and
//! reference point processes, [`energy`] builds every energy functional on top
//! of those, [`sampler`] runs canonical Metropolis chains, [`oracle`] supplies
//! quadrature ground truth at tiny particle numbers and [`estimators`] turns
//! sample streams into reports with batch-means errors.
// negated float comparisons are how NaN inputs get rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod energy;
pub mod error;
pub mod estimators;
pub mod oracle;
pub mod potential;
pub mod quadrature;
pub mod sampler;
pub mod special;
pub mod stats;
pub mod summation;
pub mod torus;

pub use error::{Error, Result};
pub use potential::{PeriodizedPotential, RieszParams};


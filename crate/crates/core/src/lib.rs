//! Kinetic and mean-field models of muscle damage and immune response.
//!
//! Four cell populations (normal, damaged, macrophages, cytotoxic T
//! lymphocytes) interact through binary rules with multiplicative noise.
//! The crate provides the particle (DSMC) solver for the kinetic model, the
//! closed moment ODEs, a structure-preserving Fokker–Planck solver for the
//! mean-field limit, and distances to the inverse-Gamma quasi-equilibria.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dsmc;
pub mod error;
pub mod fp;
pub mod metrics;
pub mod micro;
pub mod moments;
pub mod params;
pub mod quadrature;

pub use error::{Error, Result};
pub use params::{MomentState, ParameterSet, PerPopulation, Population};

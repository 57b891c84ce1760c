//! Local times of integer-valued stationary processes.
//!
//! The crate simulates walks and dynamical-system digit processes, tracks
//! their local times at integer levels, and checks the associated limit
//! theorems numerically: Mittag-Leffler convergence of the scaled local
//! time, exponential deviation bands, logarithmic-average (almost sure)
//! limit laws, and the spectral picture of the twisted transfer operator.
//!
//! Interchangeable pieces (process generators, interval maps, experiments)
//! sit behind traits and are looked up by name in registries, so the CLI
//! and config files can select them at runtime.

// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distributions;
pub mod error;
pub mod harness;
pub mod limits;
pub mod localtime;
pub mod numeric;
pub mod processes;
pub mod transferop;

pub use error::{Error, Result};

//! Simulation and sliding-mode controller design for integro-differential
//! equations with discontinuous feedback.
//!
//! The crate is organised bottom-up: [`kernels`] holds memory kernels,
//! [`fields`] the discontinuous vector fields and their Filippov sets,
//! [`integrator`] the explicit Euler scheme for IDEs, [`smc_design`] the
//! controller synthesis for linear plants with distributed input delay,
//! [`equiv_control`] the Volterra machinery for the equivalent control,
//! [`heat`] the modal reduction of the controlled heat equation and
//! [`scenarios`] the catalogue of runnable examples.

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values;
// index loops mirror the quadrature formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod equiv_control;
pub mod error;
pub mod fields;
pub mod heat;
pub mod integrator;
pub mod kernels;
pub mod linalg;
pub mod scenarios;
pub mod signal;
pub mod smc_design;

pub use error::{Error, Result};
pub use fields::{
    FeedbackLaw, FilippovSet, InputSet, PiecewiseAffineField, SelectionPolicy, SlidingStatus,
    SolutionKind, SwitchingSurface,
};
pub use integrator::{HistoryMode, SimConfig, Trajectory};
pub use kernels::{ExpTerm, Kernel};
pub use linalg::{Mat, Vector};
pub use signal::Signal;
pub use smc_design::{DesignResult, LinearIdePlant};

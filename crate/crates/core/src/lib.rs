//! Analysis toolkit for one-way steering of two-qubit states with loss.
//!
//! The crate is organized around the stages of a loss-aware steering
//! experiment:
//!
//! - [`qstate`]: density-matrix representation, Werner-family utilities,
//!   Bloch/correlation decomposition and canonical form, Uhlmann fidelity,
//!   and the vacuum-extended lossy embedding.
//! - [`criteria`]: sufficient nonsteerability conditions for restricted
//!   projective measurements and for arbitrary POVMs, the noise construction
//!   behind the POVM extension, ensemble data for bound plots, and the
//!   combined one-way verdict.
//! - [`steering_game`]: the n-setting steering test: measurement presets,
//!   the steering parameter, the detection-efficiency-dependent cheating
//!   bound, and a hidden-state-model feasibility check.
//! - [`expsim`]: count-level simulation of a tunable two-qubit source with
//!   per-arm loss, dark counts, and Poisson statistics; Klyshko heralding
//!   efficiency estimation.
//! - [`tomo`]: state reconstruction from coincidence counts and Monte Carlo
//!   uncertainty propagation for downstream estimators.

pub mod criteria;
pub mod error;
pub mod expsim;
pub mod lp;
pub mod qstate;
pub mod sphere;
pub mod steering_game;
pub mod tomo;

pub use error::{Result, SteerError};

//! Numerical laboratory for 2D compressible non-resistive MHD on a
//! half-plane strip (periodic in x, wall at y = 0, truncated above).
//!
//! The crate provides two explicit solvers (viscous with scaled
//! viscosity `eps`, and ideal), a conormal-derivative calculus with the
//! weighted norms used to monitor near-wall regularity, residual
//! diagnostics for the structural identities that recover normal
//! derivatives, and a sweep harness that measures how the viscous
//! solutions approach the ideal one as `eps` shrinks.

// validation guards are written `!(v > 0.0)` so that NaN fails them
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod config;
pub mod conormal;
pub mod diagnostics;
pub mod dynamics;
pub mod experiments;
pub mod grid;
pub mod state;

pub use grid::{Field, Grid, GridError, GridSpec};
pub use state::{InitialDataSpec, PhysicalParams, State, StateError};

//! Thermal tracer particle (TTP) dynamics in prescribed fluid fields.
//!
//! A TTP moves with the local fluid velocity plus a relative velocity whose
//! magnitude is locked to `beta * v_th` and whose direction `n` stays tangent
//! to the local isobaric surface of the kinetic pressure. The direction
//! precesses as `dn/dt = Omega x n` with `Omega = b x db/dt`, `b` being the
//! unit normal of the isobaric surface.
//!
//! Modules:
//! - [`fields`]: prescribed fluid fields (analytic and gridded providers).
//! - [`kinetics`]: the constraint system, `Omega` by two routes, and the state ODE.
//! - [`integrate`]: norm-preserving RK4 trajectory integration with invariant monitoring.
//! - [`ensemble`]: tangent-circle ensembles and their velocity moments.
//! - [`verify`]: identity sweeps, tangency-drift and convergence studies.
//! - [`config`] and [`cli`]: sectioned run configuration and the command-line runner.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod fields;
pub mod integrate;
pub mod kinetics;
pub mod linalg;
pub mod verify;

pub use error::{Result, TtpError};
pub use fields::{FieldProvider, FluidSample};
pub use kinetics::TtpState;
pub use linalg::{Mat3, Vec3};

//! Stationary resistive MHD in two dimensions: exact-penalty finite
//! elements, Newton with Reynolds continuation, and adjoint-based estimates
//! of the error in linear quantities of interest.
//!
//! [`runner::run_case`] turns a [`config::RunConfig`] into table rows;
//! the modules below it can also be used directly (see `examples/hartmann.rs`).

#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod fem;
pub mod mesh;
pub mod linalg;
pub mod forms;
pub mod cases;
pub mod estimator;
pub mod solvers;
pub mod config;
pub mod runner;
pub mod verify;

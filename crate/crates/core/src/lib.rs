//! Numerical toolkit for the leaf geometry of foliations.
//!
//! The crate is organised bottom-up:
//!
//! - [`metric_space`]: finite pointed metric spaces, Hausdorff distance and
//!   bounds on the pointed Gromov-Hausdorff distance.
//! - [`jet`], [`tensor`], [`chart`], [`calculus`]: local tensor calculus on a
//!   coordinate chart (Christoffel symbols, curvature and its covariant
//!   derivatives, tensor norms, convergence defects).
//! - [`geodesics`]: geodesic integration, exponential map, leafwise distance,
//!   normal coordinates and injectivity-radius estimation.
//! - [`foliation`]: the built-in example foliations, holonomy return maps and
//!   holonomy covers.
//! - [`experiments`]: leaf sampling, volumes and the end-to-end convergence
//!   experiments driven by the `leafscope` CLI.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod calculus;
pub mod chart;
pub mod error;
pub mod experiments;
pub mod foliation;
pub mod geodesics;
pub mod jet;
pub mod metric_space;
pub mod metrics;
pub mod par;
pub mod tensor;

pub use error::{Error, Result};

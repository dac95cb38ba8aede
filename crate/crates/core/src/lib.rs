//! Equivariant mollification of de Rham currents and of low-regularity Riemannian metrics.
//!
//! The crate is organized bottom-up: [`kernel`] supplies the mollifier and its quadrature,
//! [`ball`] the diffeomorphism onto the unit ball and the shift maps `s_y`, [`currents`] and
//! [`metric`] the two smoothing pipelines, [`curvature`] and [`distance`] the quantities they
//! are checked against, and [`scenario`] / [`experiment`] the built-in test spaces and the
//! experiment runner behind the `eqmollify` binary.

pub mod ball;
pub mod chart;
pub mod config;
pub mod currents;
pub mod curvature;
pub mod diffeo;
pub mod distance;
pub mod error;
pub mod experiment;
pub mod group;
pub mod kernel;
pub mod metric;
pub mod quadrature;
pub mod scenario;

pub use error::{Error, Result};

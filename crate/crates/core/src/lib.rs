//! Distributed shape derivatives of PDE-constrained functionals on 2D triangular meshes.
//!
//! Each example problem provides a state solve, an adjoint solve, a material
//! derivative and a tensor representation of its shape derivative; the
//! [`validation`] module checks all of them against finite differences on
//! transported meshes.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod data;
pub mod elliptic;
pub mod error;
pub mod fem;
pub mod flow;
pub mod io;
pub mod mesh;
pub mod parabolic;
pub mod pipeline;
pub mod problem;
pub mod report;
pub mod shape;
pub mod tensor;
pub mod validation;

pub use error::{Error, Result};

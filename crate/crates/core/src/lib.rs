#![cfg_attr(not(feature = "std"), no_std)]
//! Numerics for physics-informed geometry-aware neural operators.
//!
//! Everything here is allocation-only: a differentiation engine, the two
//! families of variable domains, Gaussian-process boundary data, the model
//! zoo, PDE losses, the training loop and the Monte-Carlo oracle. File
//! formats and the command line live in the `pigano` crate.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod autodiff;
pub mod data;
pub mod error;
pub mod geometry;
pub mod models;
pub mod oracle;
pub mod physics;
pub mod stochastic;
pub mod training;

pub use error::{Error, Result};

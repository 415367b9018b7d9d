//! Core algorithms for the `capsule` safe-RL pipeline.
//!
//! Everything in this crate is pure computation over `f64` buffers: a minimal
//! MLP substrate with analytic gradients, the heteroscedastic control-affine
//! ensemble dynamics model, the uncertainty-margined CBF quadratic program,
//! the compensator network, trust-region policy optimization, and the two
//! built-in control-affine environments. No IO, no clocks, no threads; all
//! randomness flows through explicitly seeded [`rng::Stream`] values, so every
//! result is a deterministic function of its inputs.
//!
//! File formats, configuration, CSV output, and the CLI live in the companion
//! `capsule-harness` crate. This crate is `no_std`-compatible (with `alloc`);
//! the default `std` feature only switches float intrinsics and enables
//! `std::error::Error` integration downstream.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod compensator;
pub mod ensemble;
pub mod env;
pub mod error;
pub mod filter;
pub mod math;
pub mod nn;
pub mod rng;
pub mod trpo;

pub use error::{CoreError, Result};

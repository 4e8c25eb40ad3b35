//! Core algorithms for multi-objective Bayesian optimization over discrete
//! architecture search spaces.
//!
//! Everything in this crate is pure computation: Gaussian-process regression
//! with an ARD Matérn-5/2 kernel, hyperparameter inference (MAP and NUTS under
//! a sparse axis-aligned subspace prior), Pareto/hypervolume machinery, the
//! qNEHVI acquisition function, scrambled Sobol sequences, and synthetic
//! benchmark problems. IO, persistence, and campaign orchestration live in the
//! companion `mobo-cli` crate.
//!
//! The crate is `no_std`-compatible (requires `alloc`); the `std` feature is
//! on by default and the optional `parallel` feature enables rayon-based
//! parallelism for embarrassingly parallel fits.
//!
//! Conventions used throughout:
//! - all objectives are minimized; maximization is handled by the caller
//!   through a sign/reflection transform,
//! - model inputs live in the unit hypercube `[0, 1]^d`,
//! - every randomized routine takes an explicit seed and is deterministic
//!   given it.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod acquisition;
pub mod diagnostics;
pub mod gp;
pub mod inference;
pub mod linalg;
pub(crate) mod math;
pub mod nuts;
pub mod pareto;
pub mod seedstream;
pub mod sobol;
pub mod space;
pub mod synthetic;

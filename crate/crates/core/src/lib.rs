//! Tabular reinforcement-learning numerics built around interpolations
//! between two discount factors.
//!
//! The central object is the expansion of a high-discount quantity (value
//! function, Q-function, visitation distribution, policy gradient) as a
//! power series in the discount gap `gamma' - gamma`, with every series
//! coefficient computable from low-discount building blocks. The crate
//! provides:
//!
//! * [`mdp`] — tabular MDPs, policies, policy-induced chains, the
//!   absorbing-chain decomposition and a seeded random-MDP generator;
//! * [`exact`] — closed-form linear-algebra oracles for values, Q-values,
//!   visitation distributions, mixture weights, truncated expansions of all
//!   of them, residual bounds, and the analytic update-weight schedules;
//! * [`sampling`] — seeded trajectory simulation and the Monte-Carlo
//!   estimators of the expansions (random geometric times, truncated
//!   variance-reduced variants, noise-injection bases);
//! * [`gradients`] — exact softmax policy gradients, the full/first/second
//!   partial-gradient decomposition, weighted sample updates and a small
//!   tabular training loop;
//! * [`bounds`] — the finite-sample error-propagation bound for phased
//!   TD-style estimation of truncated expansions, plus an empirical
//!   coverage checker.
//!
//! Everything is deterministic given explicit seeds; see [`seed`] for the
//! splitting rule used to derive child seeds.

// The numeric kernels index several tables by the same state/action index;
// iterator rewrites obscure them.
#![allow(clippy::needless_range_loop)]

pub mod bounds;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod gradients;
pub mod io;
pub mod linalg;
pub mod mdp;
pub mod sampling;
pub mod seed;

pub use error::{Error, Result};

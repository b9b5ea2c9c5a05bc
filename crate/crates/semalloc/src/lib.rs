//! Budgeted semantic transmission as posterior alignment.
//!
//! A transmitter holds a pool of typed observations and spends a per-round
//! budget of them so that a receiver's inductive width posterior converges
//! to the transmitter's own. The library provides:
//!
//! - inductive logical probability primitives (degree of confirmation,
//!   cont-information, log-Pochhammer symbols) in [`inductive`],
//! - exact and Stirling-approximated width posteriors plus distribution
//!   distances in [`posterior`],
//! - the single-round optimizer: truncated water-filling, bounded-error
//!   integer rounding, and a brute-force oracle in [`allocation`],
//! - transmitter policies (water-filling long/greedy plans, cont-greedy
//!   selection, random baselines, candidate-pool selection) in
//!   [`strategies`],
//! - receiver state and m-ary MAP hypothesis selection in [`receiver`],
//! - a seeded, reproducible experiment harness with CSV metrics in
//!   [`harness`] and its flat-file configuration in [`config`].

pub mod allocation;
pub mod config;
pub mod error;
pub mod harness;
pub mod inductive;
pub mod math;
pub mod oracle;
pub mod posterior;
pub mod receiver;
pub mod strategies;

pub use error::{Error, Result};

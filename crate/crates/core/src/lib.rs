//! Core of the multi-agent controller tuning toolkit.
//!
//! Everything here is pure computation over value types: plant vector
//! fields, controller laws, scenario draws, fixed-step simulation, step
//! response metrics, Riccati-based LQR baselines, the agent message
//! protocol, deterministic rule-based agents and the tuning loop itself.
//! Nothing touches the filesystem, the network or the clock, so the crate
//! builds with `#![no_std]` plus `alloc`; the `std` feature exists for
//! downstream crates and changes nothing here.
#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]
// `!(x > 0.0)` style guards are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod analysis;
pub mod backends;
pub mod buffer;
pub mod context;
pub mod controller;
pub mod error;
pub mod heuristics;
pub mod lqr;
pub mod metrics;
pub mod orchestrator;
pub mod plant;
pub mod prompt;
pub mod protocol;
pub mod scenario;
pub mod sim;

pub use error::Error;

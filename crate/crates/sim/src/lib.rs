//! Deterministic discrete-event simulator for the badge firmware core.
//!
//! Virtual time is kept in integer nanoseconds. A run is fully determined by
//! its [`scenario::Scenario`]: the same scenario always processes the same
//! events in the same order and writes byte-identical metrics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bridge;
pub mod event;
pub mod experiments;
pub mod faults;
pub mod golden;
pub mod hub;
pub mod link;
pub mod metrics;
pub mod oscillator;
pub mod scenario;
pub mod signals;
pub mod world;

pub use scenario::Scenario;
pub use world::{Outcome, SimError, World};

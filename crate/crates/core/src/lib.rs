//! Discrete-event simulator for a switch-coordinated rack of flash storage
//! servers.

// `!(x > 0.0)` is used on purpose in validation so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod packet;
pub mod switch;
pub mod flash;
pub mod sched;
pub mod gc;
pub mod traffic;
pub mod config;
pub mod metrics;
pub mod wear;
pub mod rack;
pub mod par;
pub mod harness;

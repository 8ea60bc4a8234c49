//! Self-stabilizing leader election on directed rings, in the population
//! protocol model with a uniformly random scheduler.
//!
//! The crate bundles everything needed to study the protocol end to end:
//!
//! * [`state`] / [`step`] — the agent state domain and the pairwise
//!   transition function, driven purely by the scheduler;
//! * [`fj`] — an oracle-assisted bullet/shield baseline for time comparisons;
//! * [`engine`] — directed-ring topology, seeded scheduler, run loop with
//!   event counters and per-bullet lifetime tracking, and initial
//!   configuration families;
//! * [`predicates`] — executable membership tests for the nested
//!   configuration classes the protocol converges through;
//! * [`verifier`] — exhaustive small-ring checking: class closure, local
//!   transition properties, and output-safety certification by reachability;
//! * [`bench`] — seeded convergence-time sweeps with power-law fitting.

pub mod bench;
pub mod engine;
pub mod fj;
pub mod predicates;
pub mod state;
pub mod step;
pub mod verifier;

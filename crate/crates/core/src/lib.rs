//! Energy-optimal sharing of one uplink band between federated-learning
//! devices (FDMA model uploads) and random-access devices (ALOHA or slotted
//! ALOHA).
//!
//! * [`model`]: parameters, protocol selector, Shannon rate.
//! * [`fl`]: FL upload time, energy and the latency budget.
//! * [`ra`]: random-access success probability, throughput and energy.
//! * [`optimizer`]: attempt-rate selection and the bandwidth-share search.
//! * [`sim`]: Monte Carlo cross-check of the random-access analysis.

// `!(x <= y)` is used on purpose so that NaN lands on the rejecting side.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod fl;
pub mod model;
pub mod optimizer;
pub mod ra;
pub mod search;
pub mod sim;

pub use model::{shannon_rate, BandwidthShare, ParamError, Protocol, Showcase, SystemParams};
pub use optimizer::{solve, Binding, Constraint, Solution, SolveError, SolveOptions};
pub use ra::{RaPoint, ThroughputPeak};
pub use sim::{SimConfig, SimStats};

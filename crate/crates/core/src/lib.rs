//! Queuing analysis and simulation for a baseband server pool shared by
//! several remote radio heads (RRHs) with frame-based admission.
//!
//! The crate is `no_std` (it needs `alloc`). It covers:
//!
//! * [`config`]: system parameters, stability predicates and the
//!   proportional per-RRH server split.
//! * [`markov`]: the per-RRH discrete-time chain observed at frame
//!   boundaries, and its stationary and post-arrival occupancy laws.
//! * [`latency`]: the exact queuing-time law (an atom at zero plus Erlang
//!   terms), its convolution with service time and frame alignment, and
//!   percentiles.
//! * [`savings`]: long-term provisioning and short-term expected savings.
//! * [`sim`]: a frame-based discrete-event simulator of the whole pool,
//!   used as ground truth for everything above.
//!
//! Time is measured in resource-time units throughout. Arrival rates are
//! per frame and the service rate is per unit time, so `service_rate *
//! frame_duration` is the expected number of completions per busy server
//! per frame.
#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod config;
pub mod error;
pub mod latency;
pub mod markov;
pub mod quadrature;
pub mod savings;
pub mod sim;
pub mod special;

pub use config::{per_rrh_servers, stability_check, StabilityReport, SystemConfig, Tolerances};
pub use error::{Error, Result};
pub use latency::{
    percentile, queuing_time_cdf, queuing_time_mixture, system_time_cdf, total_time_cdf, DelayKind,
    ErlangTerm, LatencyCdf, LatencyMixture,
};
pub use markov::{
    build_transition_matrix, post_arrival_distribution, stationary_distribution,
    OccupancyDistribution, OccupancyKind, TransitionMatrix,
};
pub use savings::{
    analyze_pool, long_term_min_servers, long_term_savings, short_term_expected_savings,
    PoolAnalysis, RrhAnalysis, SavingsPolicy, SavingsReport,
};
pub use sim::{
    empirical_percentile, required_servers_by_simulation, simulate, DelaySamples, ServerPolicy,
    SimulationConfig, SimulationResult,
};

//! Discrete-cycle simulator for LPWAN uplink routing with a centralized
//! epsilon-greedy learner.
//!
//! A network is a gateway (node 0) plus battery-powered stations that each
//! deliver one payload per duty cycle over a parent-assignment tree. The
//! crate models the radio channel, per-state energy drain, and the bandit
//! loop that searches the RSSI-constrained routing space for the tree
//! minimizing the bottleneck station's average consumption.
//!
//! Modules:
//! - [`model`] — node ids, deployments, routing vectors, RSSI vectors
//! - [`channel`] — path loss, power selection, stochastic link outcomes
//! - [`energy`] — per-cycle time-in-state accounting and joule totals
//! - [`routing_space`] — counting, enumerating, and sampling feasible trees
//! - [`simulator`] — K-cycle measurement of a fixed routing
//! - [`learner`] — the epsilon-greedy controller and the single-hop baseline
//! - [`metrics`] — bottleneck series, saving ratio, lifetime estimates
//! - [`config`] — JSON experiment configuration
//! - [`report`] — CSV writers with atomic file output
//!
//! With the `parallel` feature (default) batch helpers fan out over rayon;
//! without it they fall back to sequential loops with identical results.

pub mod channel;
pub mod config;
pub mod energy;
pub mod learner;
pub mod metrics;
pub mod model;
pub mod presets;
pub mod report;
pub mod routing_space;
pub mod seeds;
pub mod simulator;
pub mod validation;

pub use model::{Deployment, NodeId, RadioParams, RoutingVector, RssiVector, GATEWAY};
pub use simulator::MeasurementResult;

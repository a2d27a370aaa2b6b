//! Weighted-sum-rate precoder design for a two-user multi-antenna downlink
//! with cooperative rate-splitting, where user 1 relays the decoded common
//! stream to user 2 in a second time slot.
//!
//! The crate is organized bottom-up:
//!
//! - [`scenario`]: problem instances (channels, powers, noise, QoS targets);
//! - [`kernel`]: closed-form SINRs, rates, MSEs, MMSE equalizers and weights;
//! - [`qcqp`] and [`subproblem`]: the convex precoder/common-rate subproblem
//!   for fixed equalizers and weights, solved by a log-barrier
//!   interior-point method;
//! - [`ao`]: the alternating-optimization loop and the time-split search;
//! - [`scheme`]: the seven transmission schemes as masks on one solver;
//! - [`region`]: weight sweeps, Pareto frontiers, time-sharing hulls;
//! - [`oracle`]: brute-force references used to check the optimizer;
//! - [`experiment`]: config files, batch runs, CSV outputs and reports.

pub mod ao;
pub mod error;
pub mod experiment;
pub mod kernel;
pub mod kv;
pub mod oracle;
pub mod qcqp;
pub mod region;
pub mod scenario;
pub mod scheme;
pub mod subproblem;

pub use error::{CrsError, Result};
pub use kernel::{CommonRateSplit, Equalizers, MseWeights, PrecoderSet, RateReport};
pub use scenario::{ChannelGeometry, Scenario, User};

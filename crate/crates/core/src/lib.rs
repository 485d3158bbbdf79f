//! Joint handover and beam tracking for a mobile user in a millimeter-wave
//! multi-BS network.
//!
//! The crate is organised bottom-up:
//!
//! - [`scene`]: synthetic urban geometry, random street obstacles, BS sites,
//!   the UE trajectory and a LOS + first-order image-source path tracer.
//! - [`channel`]: planar-array steering vectors, sparse multipath channel
//!   assembly and the SNR link budget.
//! - [`beamforming`]: codebooks, exhaustive beam training, spatial
//!   neighbourhoods and the threshold-driven tracking sweep.
//! - [`env`]: the per-slot decision process (keep / track / hand over),
//!   throughput and reward accounting, episode traces.
//! - [`agent`]: deep Q-learning, tabular Q-learning and policy checkpoints.
//! - [`baselines`]: multi-connectivity and rate-driven learned handover.
//! - [`metrics`]: aggregation over realizations, confidence intervals and
//!   method comparison.
//! - [`scenario`]: JSON scenario descriptors and scene files tying it together.

pub mod agent;
pub mod baselines;
pub mod beamforming;
pub mod channel;
pub mod env;
pub mod metrics;
pub mod rng;
pub mod scenario;
pub mod scene;

pub use channel::Direction;

//! System-level simulation of 5G NR downlink spatial multiplexing with
//! dual-polarized antenna arrays.
//!
//! A gNB with a dual-polarized planar array sends up to two streams to a UE,
//! one per polarization subarray. Streams share one HARQ process id but are
//! acknowledged and retransmitted independently; the UE reports a rank
//! indicator that decides whether the next transmission uses one or two
//! streams.
//!
//! - [`antenna`]: arrays, polarization subarrays, beam steering and beam ids.
//! - [`channel`]: UMi large-scale parameters shared per node pair and
//!   per-subarray-pair fading with cross-polar leakage.
//! - [`phy`]: SINR, error model, HARQ combining, CQI and rank indicator.
//! - [`mac`]: MCS tables, transport block sizing, HARQ processes, scheduler.
//! - [`engine`]: the slot loop, RLC queueing, statistics and sweeps.
//! - [`report`]: summaries and CSV output.

pub mod antenna;
pub mod channel;
pub mod engine;
pub mod error;
pub mod mac;
pub mod phy;
pub mod report;
pub mod rng;

pub use antenna::{ArrayConfig, BeamConfId, BeamId, Direction, ElementPattern, SubarrayPartition};
pub use channel::{ChannelConfig, ChannelMatrixEntry, ChannelModel, ChannelParams, NodePairKey};
pub use engine::{run, sweep, ScenarioConfig, Simulation, StatsRecord, SweepTable};
pub use error::{Error, Result};
pub use mac::{DciInfo, DlHarqInfo, TbInfo};
pub use phy::{HarqAck, RiConfig, RiDecision, RiMode};

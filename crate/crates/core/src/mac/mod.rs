//! Downlink MAC: per-stream transport blocks carried in a single DCI, HARQ
//! process management with independent per-stream retransmissions, and the
//! slot scheduler.

pub mod harq;
pub mod scheduler;
pub mod tables;

pub use harq::{HarqProcess, HarqProcessPool, StreamOutcome, StreamState, TbOutcome};
pub use scheduler::{Scheduler, SchedulerConfig, SchedulerMode, UeSchedInfo};
pub use tables::{mcs_for_cqi, mcs_table2, tbs_bytes, McsEntry};

use crate::antenna::BeamConfId;
use crate::phy::{HarqAck, Rnti};

/// Number of spatial streams a DCI can carry.
pub const MAX_STREAMS: usize = 2;
/// Highest redundancy version.
pub const MAX_RV: u8 = 3;

/// Transport block descriptor of one stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TbInfo {
    pub mcs: u8,
    /// New data indicator: set for the first transmission of a block.
    pub ndi: bool,
    pub rv: u8,
    pub tbs_bytes: u32,
}

impl TbInfo {
    pub fn new_data(mcs: u8, tbs_bytes: u32) -> Self {
        Self {
            mcs,
            ndi: true,
            rv: 0,
            tbs_bytes,
        }
    }

    /// Descriptor of the next retransmission, or `None` after the last RV.
    pub fn next_retx(&self) -> Option<Self> {
        (self.rv < MAX_RV).then(|| Self {
            ndi: false,
            rv: self.rv + 1,
            ..*self
        })
    }
}

/// One downlink grant. All streams share one HARQ process id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DciInfo {
    pub rnti: Rnti,
    pub slot: u64,
    pub sym_start: u8,
    pub num_sym: u8,
    /// One flag per PRB (RBG size 1).
    pub rbg_mask: Vec<bool>,
    pub harq_process_id: u8,
    pub tb_per_stream: [Option<TbInfo>; MAX_STREAMS],
    pub beam_conf: BeamConfId,
}

impl DciInfo {
    pub fn n_prb(&self) -> u32 {
        self.rbg_mask.iter().filter(|&&b| b).count() as u32
    }

    /// Scheduled streams in ascending order.
    pub fn streams(&self) -> impl Iterator<Item = (usize, &TbInfo)> {
        self.tb_per_stream
            .iter()
            .enumerate()
            .filter_map(|(s, tb)| tb.as_ref().map(|tb| (s, tb)))
    }

    pub fn num_streams(&self) -> usize {
        self.streams().count()
    }

    pub fn is_retransmission(&self) -> bool {
        self.streams().any(|(_, tb)| !tb.ndi)
    }
}

/// HARQ feedback for one DCI: one entry per scheduled stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DlHarqInfo {
    pub rnti: Rnti,
    pub harq_process_id: u8,
    pub ack_per_stream: Vec<(usize, HarqAck)>,
}

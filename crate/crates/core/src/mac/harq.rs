//! HARQ processes with one shared id and independent per-stream state.

use super::{DlHarqInfo, TbInfo, MAX_STREAMS};
use crate::error::{Error, Result};
use crate::phy::{HarqAck, HarqSoftState, Rnti};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamState {
    /// Sent; waiting for the UE's ACK/NACK.
    AwaitingFeedback,
    /// NACKed; `tb` already describes the next redundancy version.
    PendingRetx { since_slot: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamHarq {
    pub tb: TbInfo,
    pub state: StreamState,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HarqProcess {
    pub streams: [Option<StreamHarq>; MAX_STREAMS],
    pub soft: HarqSoftState,
    /// Allocation shape reused by retransmissions.
    pub n_prb: u32,
    pub num_sym: u8,
}

impl HarqProcess {
    pub fn in_use(&self) -> bool {
        self.streams.iter().any(Option::is_some)
    }

    pub fn pending_since(&self) -> Option<u64> {
        self.streams
            .iter()
            .flatten()
            .filter_map(|s| match s.state {
                StreamState::PendingRetx { since_slot } => Some(since_slot),
                StreamState::AwaitingFeedback => None,
            })
            .min()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TbOutcome {
    Delivered,
    Retransmit { next_rv: u8 },
    /// NACK after the last redundancy version; the block is dropped.
    Lost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamOutcome {
    pub stream: usize,
    pub outcome: TbOutcome,
}

/// The HARQ processes of one UE.
#[derive(Debug, Clone, PartialEq)]
pub struct HarqProcessPool {
    rnti: Rnti,
    processes: Vec<HarqProcess>,
}

impl HarqProcessPool {
    pub fn new(rnti: Rnti, size: usize) -> Self {
        Self {
            rnti,
            processes: vec![HarqProcess::default(); size],
        }
    }

    pub fn size(&self) -> usize {
        self.processes.len()
    }

    pub fn in_use_count(&self) -> usize {
        self.processes.iter().filter(|p| p.in_use()).count()
    }

    pub fn process(&self, pid: u8) -> Option<&HarqProcess> {
        self.processes.get(pid as usize)
    }

    pub fn process_mut(&mut self, pid: u8) -> Option<&mut HarqProcess> {
        self.processes.get_mut(pid as usize)
    }

    pub fn free_process(&self) -> Option<u8> {
        self.processes
            .iter()
            .position(|p| !p.in_use())
            .map(|i| i as u8)
    }

    pub fn has_pending_retx(&self) -> bool {
        self.processes.iter().any(|p| p.pending_since().is_some())
    }

    /// Process whose retransmission has waited longest.
    pub fn oldest_pending(&self) -> Option<u8> {
        self.processes
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.pending_since().map(|since| (since, i)))
            .min()
            .map(|(_, i)| i as u8)
    }

    /// Occupy `pid` with freshly scheduled new-data blocks.
    pub fn start(
        &mut self,
        pid: u8,
        tbs: [Option<TbInfo>; MAX_STREAMS],
        n_prb: u32,
        num_sym: u8,
    ) -> Result<()> {
        let rnti = self.rnti;
        let p = self
            .processes
            .get_mut(pid as usize)
            .ok_or(Error::UnknownHarqProcess { rnti, pid })?;
        debug_assert!(!p.in_use());
        p.streams = tbs.map(|tb| {
            tb.map(|tb| StreamHarq {
                tb,
                state: StreamState::AwaitingFeedback,
            })
        });
        p.soft = HarqSoftState::default();
        p.n_prb = n_prb;
        p.num_sym = num_sym;
        Ok(())
    }

    /// Take the pending streams of `pid` for retransmission. Returns the
    /// blocks to resend, indexed by stream.
    pub fn take_retx(&mut self, pid: u8) -> Option<[Option<TbInfo>; MAX_STREAMS]> {
        let p = self.processes.get_mut(pid as usize)?;
        let mut out = [None; MAX_STREAMS];
        for (s, slot) in p.streams.iter_mut().enumerate() {
            if let Some(st) = slot {
                if matches!(st.state, StreamState::PendingRetx { .. }) {
                    st.state = StreamState::AwaitingFeedback;
                    out[s] = Some(st.tb);
                }
            }
        }
        out.iter().any(Option::is_some).then_some(out)
    }

    /// Apply the UE's per-stream ACK/NACK to a process.
    ///
    /// ACKed streams close; NACKed streams become pending with the next
    /// redundancy version, or are dropped after the last one. The process id
    /// is released once no stream remains open.
    pub fn process_harq_feedback(
        &mut self,
        feedback: &DlHarqInfo,
        now_slot: u64,
    ) -> Result<Vec<StreamOutcome>> {
        let pid = feedback.harq_process_id;
        let unknown = Error::UnknownHarqProcess {
            rnti: self.rnti,
            pid,
        };
        let p = match self.processes.get_mut(pid as usize) {
            Some(p) if p.in_use() => p,
            _ => return Err(unknown),
        };
        let awaiting: Vec<usize> = p
            .streams
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s, Some(st) if st.state == StreamState::AwaitingFeedback))
            .map(|(i, _)| i)
            .collect();
        let reported: Vec<usize> = feedback.ack_per_stream.iter().map(|&(s, _)| s).collect();
        if reported != awaiting {
            let stream = reported
                .iter()
                .chain(awaiting.iter())
                .find(|s| !(reported.contains(s) && awaiting.contains(s)))
                .copied()
                .unwrap_or(0);
            return Err(Error::FeedbackMismatch { stream });
        }

        let mut outcomes = Vec::with_capacity(feedback.ack_per_stream.len());
        for &(stream, ack) in &feedback.ack_per_stream {
            let slot = &mut p.streams[stream];
            let st = slot.as_mut().expect("checked above");
            let outcome = match ack {
                HarqAck::Ack => {
                    *slot = None;
                    TbOutcome::Delivered
                }
                HarqAck::Nack => match st.tb.next_retx() {
                    Some(next) => {
                        st.tb = next;
                        st.state = StreamState::PendingRetx {
                            since_slot: now_slot,
                        };
                        TbOutcome::Retransmit { next_rv: next.rv }
                    }
                    None => {
                        *slot = None;
                        TbOutcome::Lost
                    }
                },
            };
            outcomes.push(StreamOutcome { stream, outcome });
        }
        if !p.in_use() {
            *p = HarqProcess::default();
        }
        Ok(outcomes)
    }
}

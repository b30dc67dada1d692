//! Round-robin downlink scheduler with rank-driven stream selection.
//!
//! Each slot the scheduler first serves pending retransmissions (only the
//! failed streams, same HARQ id, same MCS and size), then hands the remaining
//! data symbols to new data. The number of streams for new data follows the
//! UE's last reported rank, except before its first CQI report, when only the
//! first subarray is used.

use std::collections::BTreeMap;

use super::harq::{HarqProcessPool, StreamOutcome};
use super::tables::{mcs_for_cqi, tbs_bytes};
use super::{DciInfo, DlHarqInfo, TbInfo, MAX_STREAMS};
use crate::antenna::{BeamConfId, BeamId};
use crate::error::{Error, Result};
use crate::phy::{DlCqiInfo, Rnti};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchedulerMode {
    /// One UE per slot for new data.
    Tdma,
    /// UEs with equal beam configuration share the same symbols; different
    /// configurations get disjoint symbol ranges.
    Ofdma,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerConfig {
    pub n_prb: u32,
    pub first_data_symbol: u8,
    pub data_symbols: u8,
    pub overhead: f64,
    pub harq_processes: usize,
    /// MCS used before any CQI has been received.
    pub initial_mcs: u8,
    pub mode: SchedulerMode,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            n_prb: 106,
            first_data_symbol: 1,
            data_symbols: 12,
            overhead: 0.04,
            harq_processes: 20,
            initial_mcs: 0,
            mode: SchedulerMode::Tdma,
        }
    }
}

/// What the scheduler knows about one UE.
#[derive(Debug, Clone, PartialEq)]
pub struct UeSchedInfo {
    pub rnti: Rnti,
    /// Streams both ends can support.
    pub max_streams: u8,
    pub last_ri: u8,
    pub last_cqi_per_stream: [Option<u8>; MAX_STREAMS],
    pub bootstrap_done: bool,
    /// Stream with the better CQI, used when the rank is 1.
    pub preferred_stream: usize,
    /// gNB beam used for each stream toward this UE.
    pub beams: [Option<BeamId>; MAX_STREAMS],
}

impl UeSchedInfo {
    pub fn new(rnti: Rnti, max_streams: u8, beams: [Option<BeamId>; MAX_STREAMS]) -> Self {
        Self {
            rnti,
            max_streams: max_streams.clamp(1, MAX_STREAMS as u8),
            last_ri: 1,
            last_cqi_per_stream: [None; MAX_STREAMS],
            bootstrap_done: false,
            preferred_stream: 0,
            beams,
        }
    }

    /// Streams to use for the next new-data transmission.
    pub fn new_data_streams(&self) -> Vec<usize> {
        if !self.bootstrap_done {
            return vec![0];
        }
        let rank = self.last_ri.min(self.max_streams);
        if rank >= 2 {
            return vec![0, 1];
        }
        let both_known = self.last_cqi_per_stream.iter().all(Option::is_some);
        if both_known {
            vec![self.preferred_stream]
        } else {
            vec![0]
        }
    }

    /// MCS for a stream, falling back to the other stream's CQI when this one
    /// has never been reported.
    pub fn mcs_for_stream(&self, stream: usize, initial_mcs: u8) -> u8 {
        let cqi = self.last_cqi_per_stream[stream]
            .or_else(|| self.last_cqi_per_stream.iter().flatten().copied().max());
        cqi.map(mcs_for_cqi).unwrap_or(initial_mcs)
    }
}

/// Beam configuration of a UE for the given set of streams.
pub fn beam_conf_of(ue: &UeSchedInfo, streams: &[usize]) -> Option<BeamConfId> {
    let pick = |s: usize| streams.contains(&s).then(|| ue.beams[s]).flatten();
    BeamConfId::new(pick(0), pick(1))
}

/// Apply a CQI/RI report to the UE's scheduling state.
pub fn update_ue_from_cqi(ue: &mut UeSchedInfo, report: &DlCqiInfo) {
    ue.last_ri = report.ri;
    for (s, cqi) in report.wb_cqi.iter().enumerate().take(MAX_STREAMS) {
        if let Some(c) = cqi {
            ue.last_cqi_per_stream[s] = Some(*c);
        }
    }
    ue.bootstrap_done = true;
    ue.preferred_stream = match ue.last_cqi_per_stream {
        [Some(a), Some(b)] if b > a => 1,
        [None, Some(_)] => 1,
        _ => 0,
    };
}

#[derive(Debug, Clone)]
struct NewDataCandidate {
    ue: usize,
    streams: Vec<usize>,
    mcs: [u8; MAX_STREAMS],
    beam_conf: BeamConfId,
    pid: u8,
}

/// gNB-side scheduler state for all attached UEs.
#[derive(Debug, Clone)]
pub struct Scheduler {
    config: SchedulerConfig,
    ues: Vec<UeSchedInfo>,
    pools: Vec<HarqProcessPool>,
    rr_next: usize,
}

impl Scheduler {
    pub fn new(config: SchedulerConfig) -> Self {
        Self {
            config,
            ues: Vec::new(),
            pools: Vec::new(),
            rr_next: 0,
        }
    }

    pub fn config(&self) -> &SchedulerConfig {
        &self.config
    }

    pub fn add_ue(&mut self, info: UeSchedInfo) {
        self.pools
            .push(HarqProcessPool::new(info.rnti, self.config.harq_processes));
        self.ues.push(info);
    }

    fn index_of(&self, rnti: Rnti) -> Result<usize> {
        self.ues
            .iter()
            .position(|u| u.rnti == rnti)
            .ok_or(Error::UnknownRnti(rnti))
    }

    pub fn ue(&self, rnti: Rnti) -> Result<&UeSchedInfo> {
        Ok(&self.ues[self.index_of(rnti)?])
    }

    pub fn ue_mut(&mut self, rnti: Rnti) -> Result<&mut UeSchedInfo> {
        let i = self.index_of(rnti)?;
        Ok(&mut self.ues[i])
    }

    pub fn pool(&self, rnti: Rnti) -> Result<&HarqProcessPool> {
        Ok(&self.pools[self.index_of(rnti)?])
    }

    pub fn pool_mut(&mut self, rnti: Rnti) -> Result<&mut HarqProcessPool> {
        let i = self.index_of(rnti)?;
        Ok(&mut self.pools[i])
    }

    pub fn update_ue_from_cqi(&mut self, report: &DlCqiInfo) -> Result<()> {
        let i = self.index_of(report.rnti)?;
        update_ue_from_cqi(&mut self.ues[i], report);
        Ok(())
    }

    pub fn process_harq_feedback(
        &mut self,
        feedback: &DlHarqInfo,
        now_slot: u64,
    ) -> Result<Vec<StreamOutcome>> {
        let i = self.index_of(feedback.rnti)?;
        self.pools[i].process_harq_feedback(feedback, now_slot)
    }

    fn rr_order(&self) -> impl Iterator<Item = usize> + '_ {
        let n = self.ues.len();
        (0..n).map(move |k| (self.rr_next + k) % n)
    }

    fn mask(&self, start: u32, len: u32) -> Vec<bool> {
        (0..self.config.n_prb)
            .map(|p| p >= start && p < start + len)
            .collect()
    }

    /// Smallest PRB count whose blocks hold `buffer` bytes, capped at
    /// `max_prb`. `None` if some stream would get an empty block.
    fn prbs_for_buffer(
        &self,
        streams: &[usize],
        mcs: &[u8; MAX_STREAMS],
        buffer: u64,
        max_prb: u32,
        num_sym: u8,
    ) -> Option<u32> {
        let size = |p: u32| -> Option<u64> {
            let mut total = 0u64;
            for &s in streams {
                let t = tbs_bytes(mcs[s], p, num_sym as u32, self.config.overhead).ok()?;
                if t == 0 {
                    return None;
                }
                total += t as u64;
            }
            Some(total)
        };
        let mut lo = 1;
        let mut hi = max_prb;
        size(hi)?;
        if size(hi)? < buffer {
            return Some(hi);
        }
        // Block size is non-decreasing in the PRB count.
        while lo < hi {
            let mid = (lo + hi) / 2;
            match size(mid) {
                Some(s) if s >= buffer => hi = mid,
                _ => lo = mid + 1,
            }
        }
        Some(lo)
    }

    /// Produce this slot's grants. `buffers` gives queued bytes per RNTI.
    pub fn schedule_slot(&mut self, slot: u64, buffers: &BTreeMap<Rnti, u64>) -> Vec<DciInfo> {
        let mut dcis = Vec::new();
        let mut sym_cursor = self.config.first_data_symbol;
        let sym_end = self.config.first_data_symbol + self.config.data_symbols;

        // Retransmissions first. A UE gets at most one grant per slot.
        let order: Vec<usize> = self.rr_order().collect();
        let mut served = vec![false; self.ues.len()];
        for &u in &order {
            let Some(pid) = self.pools[u].oldest_pending() else {
                continue;
            };
            let proc = self.pools[u].process(pid).expect("valid pid");
            let (n_prb, num_sym) = (proc.n_prb, proc.num_sym);
            if sym_cursor + num_sym > sym_end {
                continue;
            }
            let tbs = self.pools[u].take_retx(pid).expect("pending");
            let streams: Vec<usize> = (0..MAX_STREAMS).filter(|&s| tbs[s].is_some()).collect();
            let beam_conf =
                beam_conf_of(&self.ues[u], &streams).expect("UE has a beam for every stream");
            dcis.push(DciInfo {
                rnti: self.ues[u].rnti,
                slot,
                sym_start: sym_cursor,
                num_sym,
                rbg_mask: self.mask(0, n_prb),
                harq_process_id: pid,
                tb_per_stream: tbs,
                beam_conf,
            });
            sym_cursor += num_sym;
            served[u] = true;
        }

        let free_sym = sym_end - sym_cursor;
        if free_sym == 0 {
            return dcis;
        }

        // New data: UEs with queued bytes, nothing waiting for a
        // retransmission, and a free HARQ process.
        let mut candidates = Vec::new();
        for &u in &order {
            let ue = &self.ues[u];
            if buffers.get(&ue.rnti).copied().unwrap_or(0) == 0 {
                continue;
            }
            let pool = &self.pools[u];
            if served[u] || pool.has_pending_retx() {
                continue;
            }
            let Some(pid) = pool.free_process() else {
                continue;
            };
            let streams = ue.new_data_streams();
            let mut mcs = [0u8; MAX_STREAMS];
            for &s in &streams {
                mcs[s] = ue.mcs_for_stream(s, self.config.initial_mcs);
            }
            let Some(beam_conf) = beam_conf_of(ue, &streams) else {
                continue;
            };
            candidates.push(NewDataCandidate {
                ue: u,
                streams,
                mcs,
                beam_conf,
                pid,
            });
        }
        if candidates.is_empty() {
            return dcis;
        }

        let groups: Vec<Vec<NewDataCandidate>> = match self.config.mode {
            SchedulerMode::Tdma => vec![vec![candidates[0].clone()]],
            SchedulerMode::Ofdma => {
                let mut groups: Vec<(BeamConfId, Vec<NewDataCandidate>)> = Vec::new();
                for c in candidates {
                    match groups.iter_mut().find(|(b, _)| *b == c.beam_conf) {
                        Some((_, g)) => g.push(c),
                        None => groups.push((c.beam_conf, vec![c])),
                    }
                }
                groups.into_iter().map(|(_, g)| g).collect()
            }
        };

        let n_groups = groups.len().min(free_sym as usize);
        let base = free_sym as usize / n_groups;
        let extra = free_sym as usize % n_groups;
        let mut served_first = None;
        for (gi, group) in groups.into_iter().take(n_groups).enumerate() {
            let num_sym = (base + usize::from(gi < extra)) as u8;
            let k = group.len() as u32;
            let share = self.config.n_prb / k;
            let mut prb_cursor = 0u32;
            for (ci, cand) in group.into_iter().enumerate() {
                let max_prb = share + u32::from((ci as u32) < self.config.n_prb % k);
                if max_prb == 0 {
                    continue;
                }
                let ue = &self.ues[cand.ue];
                let buffer = buffers.get(&ue.rnti).copied().unwrap_or(0);
                let Some(n_prb) =
                    self.prbs_for_buffer(&cand.streams, &cand.mcs, buffer, max_prb, num_sym)
                else {
                    continue;
                };
                let mut tbs = [None; MAX_STREAMS];
                for &s in &cand.streams {
                    let size = tbs_bytes(cand.mcs[s], n_prb, num_sym as u32, self.config.overhead)
                        .expect("validated arguments");
                    tbs[s] = Some(TbInfo::new_data(cand.mcs[s], size));
                }
                self.pools[cand.ue]
                    .start(cand.pid, tbs, n_prb, num_sym)
                    .expect("free process");
                dcis.push(DciInfo {
                    rnti: ue.rnti,
                    slot,
                    sym_start: sym_cursor,
                    num_sym,
                    rbg_mask: self.mask(prb_cursor, n_prb),
                    harq_process_id: cand.pid,
                    tb_per_stream: tbs,
                    beam_conf: cand.beam_conf,
                });
                served_first.get_or_insert(cand.ue);
                prb_cursor += max_prb;
            }
            sym_cursor += num_sym;
        }
        if let Some(u) = served_first {
            self.rr_next = (u + 1) % self.ues.len();
        }
        dcis
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::antenna::Direction;
    use crate::phy::HarqAck;

    fn beam(az: f64) -> Option<BeamId> {
        Some(BeamId::from_direction(Direction::new(az, 100.0)))
    }

    fn ue(rnti: Rnti) -> UeSchedInfo {
        UeSchedInfo::new(rnti, 2, [beam(0.0), beam(0.0)])
    }

    fn report(rnti: Rnti, ri: u8, cqi: &[Option<u8>]) -> DlCqiInfo {
        DlCqiInfo {
            rnti,
            wb_cqi: cqi.to_vec(),
            ri,
        }
    }

    fn buffers(entries: &[(Rnti, u64)]) -> BTreeMap<Rnti, u64> {
        entries.iter().copied().collect()
    }

    #[test]
    fn bootstrap_uses_first_subarray() {
        let mut s = Scheduler::new(SchedulerConfig::default());
        s.add_ue(ue(1));
        let d = s.schedule_slot(0, &buffers(&[(1, 1_000_000)]));
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].num_streams(), 1);
        assert!(d[0].tb_per_stream[0].is_some());
        assert_eq!(d[0].tb_per_stream[0].unwrap().mcs, 0);
    }

    #[test]
    fn rank_two_uses_both_streams_with_own_mcs() {
        let mut s = Scheduler::new(SchedulerConfig::default());
        s.add_ue(ue(1));
        s.update_ue_from_cqi(&report(1, 2, &[Some(15), Some(11)])).unwrap();
        let d = s.schedule_slot(5, &buffers(&[(1, 10_000_000)]));
        assert_eq!(d.len(), 1);
        let t0 = d[0].tb_per_stream[0].unwrap();
        let t1 = d[0].tb_per_stream[1].unwrap();
        assert_eq!(t0.mcs, 27);
        assert_eq!(t1.mcs, mcs_for_cqi(11));
        assert_ne!(t0.tbs_bytes, t1.tbs_bytes);
        assert_eq!(t0.tbs_bytes, tbs_bytes(27, d[0].n_prb(), 12, 0.04).unwrap());
    }

    #[test]
    fn rank_one_prefers_better_stream() {
        let mut s = Scheduler::new(SchedulerConfig::default());
        s.add_ue(ue(1));
        s.update_ue_from_cqi(&report(1, 2, &[Some(12), Some(12)])).unwrap();
        s.update_ue_from_cqi(&report(1, 1, &[Some(9), Some(13)])).unwrap();
        let d = s.schedule_slot(5, &buffers(&[(1, 10_000_000)]));
        assert!(d[0].tb_per_stream[0].is_none());
        assert_eq!(d[0].tb_per_stream[1].unwrap().mcs, mcs_for_cqi(13));
    }

    #[test]
    fn cqi_update_rules() {
        let mut u = ue(1);
        update_ue_from_cqi(&mut u, &report(1, 2, &[Some(10), Some(10)]));
        assert!(u.bootstrap_done);
        assert_eq!(u.new_data_streams(), vec![0, 1]);
        assert_eq!(u.preferred_stream, 0);
        update_ue_from_cqi(&mut u, &report(1, 1, &[Some(7), Some(12)]));
        assert_eq!(u.preferred_stream, 1);
        update_ue_from_cqi(&mut u, &report(1, 1, &[Some(12), Some(12)]));
        assert_eq!(u.preferred_stream, 0);
        let mut s = Scheduler::new(SchedulerConfig::default());
        assert_eq!(
            s.update_ue_from_cqi(&report(9, 1, &[Some(1)])),
            Err(Error::UnknownRnti(9))
        );
    }

    #[test]
    fn single_stream_ue_never_gets_two() {
        let mut s = Scheduler::new(SchedulerConfig::default());
        s.add_ue(UeSchedInfo::new(1, 1, [beam(0.0), None]));
        s.update_ue_from_cqi(&report(1, 2, &[Some(15)])).unwrap();
        let d = s.schedule_slot(3, &buffers(&[(1, 1_000_000)]));
        assert_eq!(d[0].num_streams(), 1);
    }

    #[test]
    fn retransmission_blocks_new_data() {
        let mut s = Scheduler::new(SchedulerConfig::default());
        s.add_ue(ue(1));
        s.update_ue_from_cqi(&report(1, 2, &[Some(15), Some(15)])).unwrap();
        let b = buffers(&[(1, 10_000_000)]);
        let first = s.schedule_slot(0, &b).remove(0);
        let fb = DlHarqInfo {
            rnti: 1,
            harq_process_id: first.harq_process_id,
            ack_per_stream: vec![(0, HarqAck::Ack), (1, HarqAck::Nack)],
        };
        s.process_harq_feedback(&fb, 1).unwrap();
        let d = s.schedule_slot(1, &b);
        assert_eq!(d.len(), 1);
        let r = &d[0];
        assert_eq!(r.harq_process_id, first.harq_process_id);
        assert!(r.tb_per_stream[0].is_none());
        let tb = r.tb_per_stream[1].unwrap();
        let orig = first.tb_per_stream[1].unwrap();
        assert_eq!((tb.ndi, tb.rv, tb.mcs, tb.tbs_bytes), (false, 1, orig.mcs, orig.tbs_bytes));
        assert_eq!(r.n_prb(), first.n_prb());
    }

    #[test]
    fn small_buffer_gets_few_prbs() {
        let mut s = Scheduler::new(SchedulerConfig::default());
        s.add_ue(ue(1));
        s.update_ue_from_cqi(&report(1, 1, &[Some(15)])).unwrap();
        let d = s.schedule_slot(0, &buffers(&[(1, 1000)]));
        let n = d[0].n_prb();
        assert!(n < 106);
        assert!(tbs_bytes(27, n, 12, 0.04).unwrap() >= 1000);
        assert!(tbs_bytes(27, n - 1, 12, 0.04).unwrap() < 1000);
    }

    #[test]
    fn no_data_no_grant() {
        let mut s = Scheduler::new(SchedulerConfig::default());
        s.add_ue(ue(1));
        assert!(s.schedule_slot(0, &buffers(&[])).is_empty());
        assert!(s.schedule_slot(0, &buffers(&[(1, 0)])).is_empty());
    }

    #[test]
    fn harq_pool_exhaustion_skips_ue() {
        let mut s = Scheduler::new(SchedulerConfig {
            harq_processes: 2,
            ..SchedulerConfig::default()
        });
        s.add_ue(ue(1));
        let b = buffers(&[(1, 10_000_000)]);
        assert_eq!(s.schedule_slot(0, &b).len(), 1);
        assert_eq!(s.schedule_slot(1, &b).len(), 1);
        assert!(s.schedule_slot(2, &b).is_empty());
    }

    #[test]
    fn tdma_round_robin() {
        let mut s = Scheduler::new(SchedulerConfig::default());
        s.add_ue(ue(1));
        s.add_ue(ue(2));
        let b = buffers(&[(1, 10_000_000), (2, 10_000_000)]);
        let served: Vec<Rnti> = (0..4).map(|t| s.schedule_slot(t, &b)[0].rnti).collect();
        assert_eq!(served, vec![1, 2, 1, 2]);
    }

    #[test]
    fn ofdma_groups_by_beam_conf() {
        let mut s = Scheduler::new(SchedulerConfig {
            mode: SchedulerMode::Ofdma,
            ..SchedulerConfig::default()
        });
        s.add_ue(UeSchedInfo::new(1, 2, [beam(0.0), beam(0.0)]));
        s.add_ue(UeSchedInfo::new(2, 2, [beam(0.0), beam(0.0)]));
        s.add_ue(UeSchedInfo::new(3, 2, [beam(40.0), beam(40.0)]));
        let b = buffers(&[(1, 10_000_000), (2, 10_000_000), (3, 10_000_000)]);
        let d = s.schedule_slot(0, &b);
        assert_eq!(d.len(), 3);
        for x in &d {
            for y in &d {
                let overlap = x.sym_start < y.sym_start + y.num_sym
                    && y.sym_start < x.sym_start + x.num_sym;
                if overlap {
                    assert_eq!(x.beam_conf, y.beam_conf);
                }
            }
        }
        let same: Vec<_> = d.iter().filter(|x| x.rnti != 3).collect();
        assert_eq!(same[0].sym_start, same[1].sym_start);
        assert!(same[0]
            .rbg_mask
            .iter()
            .zip(&same[1].rbg_mask)
            .all(|(a, b)| !(a & b)));
    }
}

//! Slot-driven simulation of one gNB serving up to eight UEs in the downlink.
//!
//! Each slot: due HARQ feedback and CQI/RI reports reach the gNB, the channel
//! refreshes expired parameters, CBR packets enter the RLC queues, the
//! scheduler issues grants, and every scheduled stream is propagated,
//! combined with earlier redundancy versions and decoded. Runs are
//! single-threaded; independent runs of a sweep execute in parallel.

pub mod config;
pub mod rlc;
pub mod stats;

use std::collections::{BTreeMap, VecDeque};

use rayon::prelude::*;

pub use config::{prb_count, Scenario, ScenarioConfig, TrafficConfig, MAX_UES};
pub use rlc::{CompletedPacket, RlcRxReassembly, RlcTxQueue, Segment};
pub use stats::{Aggregate, HarqStats, MeanStd, StatsRecord, SweepTable};

use crate::antenna::{build_subarrays, BeamId, Direction, SubarrayPartition};
use crate::channel::{rx_psd, ChannelModel, ChannelTraceRow, LinkEnd, LinkGeometry, NodeId};
use crate::error::{Error, Result};
use crate::mac::{DciInfo, DlHarqInfo, Scheduler, TbOutcome, UeSchedInfo, MAX_STREAMS};
use crate::phy::{
    build_cqi_report, compute_ri, compute_stream_sinr, decode_tb, noise_power_dbm,
    split_tx_power, DlCqiInfo, ErrorModel, HarqAck, Rnti, StreamSinrReport,
};
use crate::rng::{Purpose, RngStreams, SimRng};

pub const GNB_NODE: NodeId = 0;

/// One row per decoded stream.
#[derive(Debug, Clone, PartialEq)]
pub struct PhyTraceRow {
    pub slot: u64,
    pub rnti: Rnti,
    pub stream: usize,
    pub sinr_db: f64,
    pub cqi: u8,
    pub ri: u8,
    pub ack: HarqAck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MacOutcome {
    Ack,
    Nack,
    /// NACK on the last redundancy version.
    Lost,
}

/// One row per transmitted transport block.
#[derive(Debug, Clone, PartialEq)]
pub struct MacTraceRow {
    pub slot: u64,
    pub rnti: Rnti,
    pub harq_pid: u8,
    pub stream: usize,
    pub ndi: bool,
    pub rv: u8,
    pub mcs: u8,
    pub tbs_bytes: u32,
    pub outcome: MacOutcome,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Traces {
    pub phy: Vec<PhyTraceRow>,
    pub mac: Vec<MacTraceRow>,
    pub channel: Vec<ChannelTraceRow>,
}

struct UeState {
    rnti: Rnti,
    node: NodeId,
    geometry: LinkGeometry,
    /// gNB toward UE.
    departure: Direction,
    /// gNB partitions steered toward this UE.
    gnb_parts: Vec<SubarrayPartition>,
    ue_parts: Vec<SubarrayPartition>,
    tx_queue: RlcTxQueue,
    rx: RlcRxReassembly,
    decode_rng: SimRng,
    next_packet: u64,
    arrivals_s: Vec<f64>,
    in_flight: BTreeMap<(u8, usize), Vec<Segment>>,
}

#[derive(Default)]
struct Counters {
    tx_bytes: u64,
    tx_packets: u64,
    rx_bytes: u64,
    rx_packets: u64,
    delivered_segment_bytes: u64,
    lost_bytes: u64,
    delay_sum_s: f64,
    jitter_sum_s: f64,
    jitter_samples: u64,
    last_delay_s: Option<f64>,
    harq: HarqStats,
}

/// A configured run. Constructing it validates the configuration; it can be
/// moved to another thread before calling [`Simulation::run`].
pub struct Simulation {
    config: ScenarioConfig,
    channel: ChannelModel,
    scheduler: Scheduler,
    error_model: ErrorModel,
    noise_dbm: f64,
    ues: Vec<UeState>,
    feedback: VecDeque<(u64, DlHarqInfo)>,
    reports: VecDeque<(u64, DlCqiInfo)>,
    counters: Counters,
    ri_trace: Vec<u8>,
    traces: Option<Traces>,
}

fn sum_bytes(segments: &[Segment]) -> u64 {
    segments.iter().map(|s| u64::from(s.bytes)).sum()
}

impl Simulation {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let streams = RngStreams::new(config.rng_run);
        let channel = ChannelModel::new(config.channel_config(), streams);
        let mut scheduler = Scheduler::new(config.scheduler_config());
        let gnb_pos = [0.0, 0.0, config.gnb_height_m];
        let gnb_template = build_subarrays(&config.gnb_array);
        let ue_template = build_subarrays(&config.ue_array);
        let max_streams = gnb_template.len().min(ue_template.len()).min(MAX_STREAMS);
        if max_streams == 0 {
            return Err(Error::Config("arrays need at least one polarization".into()));
        }

        let mut ues = Vec::with_capacity(config.num_ues);
        for i in 0..config.num_ues {
            let offset = i as f64 - (config.num_ues as f64 - 1.0) / 2.0;
            let az = (offset * config.ue_spacing_deg).to_radians();
            let ue_pos = [
                config.distance_m * az.cos(),
                config.distance_m * az.sin(),
                config.ue_height_m,
            ];
            let departure = Direction::between(gnb_pos, ue_pos);
            let arrival = Direction::between(ue_pos, gnb_pos);
            let mut gnb_parts = gnb_template.clone();
            for p in &mut gnb_parts {
                p.steer(departure, &config.gnb_array);
            }
            let mut ue_parts = ue_template.clone();
            for p in &mut ue_parts {
                p.steer(arrival, &config.ue_array);
            }
            let rnti = (i + 1) as Rnti;
            let node = (i + 1) as NodeId;
            let beam = BeamId::from_direction(departure);
            let mut beams = [None; MAX_STREAMS];
            for b in beams.iter_mut().take(max_streams) {
                *b = Some(beam);
            }
            scheduler.add_ue(UeSchedInfo::new(rnti, max_streams as u8, beams));
            ues.push(UeState {
                rnti,
                node,
                geometry: LinkGeometry {
                    distance_2d_m: config.distance_m,
                    h_bs_m: config.gnb_height_m,
                    h_ut_m: config.ue_height_m,
                },
                departure,
                gnb_parts,
                ue_parts,
                tx_queue: RlcTxQueue::default(),
                rx: RlcRxReassembly::default(),
                decode_rng: streams.stream(Purpose::Decode, u64::from(rnti), 0),
                next_packet: 0,
                arrivals_s: Vec::new(),
                in_flight: BTreeMap::new(),
            });
        }

        Ok(Self {
            noise_dbm: noise_power_dbm(config.bandwidth_hz(), config.noise_figure_db),
            error_model: config.error_model(),
            channel,
            scheduler,
            ues,
            feedback: VecDeque::new(),
            reports: VecDeque::new(),
            counters: Counters::default(),
            ri_trace: Vec::new(),
            traces: None,
            config,
        })
    }

    /// Record PHY, MAC and channel traces. Tracing draws no random numbers.
    pub fn with_traces(mut self) -> Self {
        self.traces = Some(Traces::default());
        self.channel.enable_trace();
        self
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn run(self) -> Result<StatsRecord> {
        self.run_traced().map(|(s, _)| s)
    }

    pub fn run_traced(mut self) -> Result<(StatsRecord, Traces)> {
        for slot in 0..self.config.num_slots() {
            self.step(slot)?;
        }
        self.finish()
    }

    fn step(&mut self, slot: u64) -> Result<()> {
        self.handle_feedback(slot)?;
        while self.reports.front().is_some_and(|(due, _)| *due <= slot) {
            let (_, report) = self.reports.pop_front().expect("non-empty");
            self.scheduler.update_ue_from_cqi(&report)?;
        }
        self.channel.update_channel(slot);
        self.generate_traffic(slot);
        self.ri_trace
            .push(self.scheduler.ue(self.ues[0].rnti)?.last_ri);

        let buffers: BTreeMap<Rnti, u64> = self
            .ues
            .iter()
            .map(|u| (u.rnti, u.tx_queue.queued_bytes()))
            .collect();
        let dcis = self.scheduler.schedule_slot(slot, &buffers);
        for dci in &dcis {
            self.transmit(slot, dci)?;
        }
        Ok(())
    }

    fn handle_feedback(&mut self, slot: u64) -> Result<()> {
        while self.feedback.front().is_some_and(|(due, _)| *due <= slot) {
            let (_, fb) = self.feedback.pop_front().expect("non-empty");
            let outcomes = self.scheduler.process_harq_feedback(&fb, slot)?;
            let ue = self.ue_index(fb.rnti)?;
            for o in outcomes {
                if o.outcome == TbOutcome::Lost {
                    self.counters.harq.lost_tbs += 1;
                    if let Some(segs) =
                        self.ues[ue].in_flight.remove(&(fb.harq_process_id, o.stream))
                    {
                        self.counters.lost_bytes += sum_bytes(&segs);
                    }
                }
            }
        }
        Ok(())
    }

    fn ue_index(&self, rnti: Rnti) -> Result<usize> {
        self.ues
            .iter()
            .position(|u| u.rnti == rnti)
            .ok_or(Error::UnknownRnti(rnti))
    }

    fn generate_traffic(&mut self, slot: u64) {
        let t = &self.config.traffic;
        if t.offered_rate_bps == 0.0 {
            return;
        }
        let now = slot as f64 * self.config.slot_duration_s();
        let interval = f64::from(t.packet_bytes) * 8.0 / t.offered_rate_bps;
        let stop = self.config.traffic_stop_s();
        for ue in &mut self.ues {
            loop {
                let at = t.start_s + ue.next_packet as f64 * interval;
                if at > now || at >= stop {
                    break;
                }
                ue.tx_queue.enqueue(ue.next_packet, t.packet_bytes);
                ue.arrivals_s.push(at);
                ue.next_packet += 1;
                self.counters.tx_packets += 1;
                self.counters.tx_bytes += u64::from(t.packet_bytes);
            }
        }
    }

    fn transmit(&mut self, slot: u64, dci: &DciInfo) -> Result<()> {
        let u = self.ue_index(dci.rnti)?;
        let pid = dci.harq_process_id;
        let streams: Vec<usize> = dci.streams().map(|(s, _)| s).collect();

        for (s, tb) in dci.streams() {
            if tb.ndi {
                let segs = self.ues[u].tx_queue.dequeue(tb.tbs_bytes);
                self.ues[u].in_flight.insert((pid, s), segs);
                self.counters.harq.new_tbs += 1;
            } else {
                self.counters.harq.retx_tbs += 1;
            }
        }

        let params = self.channel.get_channel_params(
            GNB_NODE,
            self.ues[u].node,
            self.ues[u].geometry,
            slot,
        )?;
        let pathloss = self.channel.pathloss_db(&params)?;
        let partitions = (self.ues[u].gnb_parts.len(), self.ues[u].ue_parts.len());
        let power = split_tx_power(self.config.gnb_power_dbm, streams.len())?;

        let mut sinrs = Vec::with_capacity(streams.len());
        for &s in &streams {
            let entry = self.channel.get_channel_matrix(&params, s, s, partitions)?;
            let other = streams.iter().copied().find(|&o| o != s);
            let cross_entry = match other {
                Some(o) => Some(self.channel.get_channel_matrix(&params, o, s, partitions)?),
                None => None,
            };
            let ue = &self.ues[u];
            let tx = LinkEnd {
                node: GNB_NODE,
                array: &self.config.gnb_array,
                partition: &ue.gnb_parts[s],
            };
            let rx = LinkEnd {
                node: ue.node,
                array: &self.config.ue_array,
                partition: &ue.ue_parts[s],
            };
            let interferer_end = other.map(|o| LinkEnd {
                node: GNB_NODE,
                array: &self.config.gnb_array,
                partition: &ue.gnb_parts[o],
            });
            let interferer = interferer_end.as_ref().zip(cross_entry.as_deref());
            let sample = rx_psd(power, &tx, &rx, &entry, interferer, pathloss, ue.departure)?;
            let sinr = compute_stream_sinr(
                sample.rx_power_dbm_co,
                sample.rx_power_dbm_cross,
                self.noise_dbm,
                self.config.rho,
            )?;
            sinrs.push((s, sinr));
        }

        let delivered_at = (slot + 1) as f64 * self.config.slot_duration_s();
        let mut acks = Vec::with_capacity(streams.len());
        for &(s, sinr) in &sinrs {
            let tb = dci.tb_per_stream[s].expect("scheduled stream");
            let effective = {
                let pool = self.scheduler.pool_mut(dci.rnti)?;
                let proc = pool
                    .process_mut(pid)
                    .ok_or(Error::UnknownHarqProcess { rnti: dci.rnti, pid })?;
                if tb.ndi {
                    proc.soft.reset(s);
                }
                proc.soft.harq_combine(s, sinr)?
            };
            let ack = decode_tb(&tb, effective, &self.error_model, &mut self.ues[u].decode_rng)?;
            match ack {
                HarqAck::Ack => {
                    self.counters.harq.acks += 1;
                    let segs = self.ues[u].in_flight.remove(&(pid, s)).unwrap_or_default();
                    self.deliver(u, &segs, delivered_at);
                }
                HarqAck::Nack => self.counters.harq.nacks += 1,
            }
            acks.push((s, ack));
            if let Some(tr) = self.traces.as_mut() {
                tr.mac.push(MacTraceRow {
                    slot,
                    rnti: dci.rnti,
                    harq_pid: pid,
                    stream: s,
                    ndi: tb.ndi,
                    rv: tb.rv,
                    mcs: tb.mcs,
                    tbs_bytes: tb.tbs_bytes,
                    outcome: match ack {
                        HarqAck::Ack => MacOutcome::Ack,
                        HarqAck::Nack if tb.next_retx().is_none() => MacOutcome::Lost,
                        HarqAck::Nack => MacOutcome::Nack,
                    },
                });
            }
        }
        self.feedback.push_back((
            slot + self.config.harq_feedback_delay_slots,
            DlHarqInfo {
                rnti: dci.rnti,
                harq_process_id: pid,
                ack_per_stream: acks.clone(),
            },
        ));

        let measured: Vec<StreamSinrReport> = sinrs
            .iter()
            .map(|&(s, sinr_db)| StreamSinrReport {
                stream_index: s,
                sinr_db,
                slot,
            })
            .collect();
        let decision = compute_ri(&self.config.ri_config, &measured)?;
        let cqis: Vec<(usize, u8)> = sinrs
            .iter()
            .map(|&(s, sinr)| (s, self.error_model.compute_cqi(sinr)))
            .collect();
        if let Some(tr) = self.traces.as_mut() {
            for (&(s, sinr), (&(_, cqi), &(_, ack))) in sinrs.iter().zip(cqis.iter().zip(&acks)) {
                tr.phy.push(PhyTraceRow {
                    slot,
                    rnti: dci.rnti,
                    stream: s,
                    sinr_db: sinr,
                    cqi,
                    ri: decision.ri,
                    ack,
                });
            }
        }
        self.reports.push_back((
            slot + self.config.cqi_delay_slots,
            build_cqi_report(dci.rnti, decision, &cqis),
        ));
        Ok(())
    }

    fn deliver(&mut self, u: usize, segs: &[Segment], at_s: f64) {
        let size = self.config.traffic.packet_bytes;
        self.counters.delivered_segment_bytes += sum_bytes(segs);
        let done = self.ues[u].rx.receive(segs, |_| size);
        for p in done {
            let delay = at_s - self.ues[u].arrivals_s[p.packet_id as usize];
            let c = &mut self.counters;
            c.rx_packets += 1;
            c.rx_bytes += u64::from(p.size);
            c.delay_sum_s += delay;
            if let Some(prev) = c.last_delay_s {
                c.jitter_sum_s += (delay - prev).abs();
                c.jitter_samples += 1;
            }
            c.last_delay_s = Some(delay);
        }
    }

    fn finish(mut self) -> Result<(StatsRecord, Traces)> {
        let in_flight: u64 = self
            .ues
            .iter()
            .flat_map(|u| u.in_flight.values())
            .map(|s| sum_bytes(s))
            .sum();
        let queued: u64 = self.ues.iter().map(|u| u.tx_queue.queued_bytes()).sum();
        let c = &self.counters;
        let accounted = c.delivered_segment_bytes + in_flight + c.lost_bytes + queued;
        if accounted != c.tx_bytes {
            return Err(Error::Conservation(format!(
                "generated {} B but delivered {} + in flight {in_flight} + lost {} + queued {queued} = {accounted} B",
                c.tx_bytes, c.delivered_segment_bytes, c.lost_bytes
            )));
        }
        let interval = self.config.sim_duration_s - self.config.traffic.start_s;
        let mean_ri = if self.ri_trace.is_empty() {
            0.0
        } else {
            self.ri_trace.iter().map(|&r| f64::from(r)).sum::<f64>() / self.ri_trace.len() as f64
        };
        let stats = StatsRecord {
            distance_m: self.config.distance_m,
            rng_run: self.config.rng_run,
            tx_bytes: c.tx_bytes,
            rx_bytes: c.rx_bytes,
            tx_packets: c.tx_packets,
            rx_packets: c.rx_packets,
            throughput_mbps: c.rx_bytes as f64 * 8.0 / interval / 1e6,
            mean_delay_ms: if c.rx_packets > 0 {
                c.delay_sum_s / c.rx_packets as f64 * 1e3
            } else {
                0.0
            },
            mean_jitter_ms: if c.jitter_samples > 0 {
                c.jitter_sum_s / c.jitter_samples as f64 * 1e3
            } else {
                0.0
            },
            ri_trace: std::mem::take(&mut self.ri_trace),
            mean_ri,
            harq: c.harq,
            delivered_segment_bytes: c.delivered_segment_bytes,
            in_flight_bytes: in_flight,
            lost_bytes: c.lost_bytes,
            queued_bytes: queued,
        };
        let mut traces = self.traces.take().unwrap_or_default();
        traces.channel = self.channel.take_trace();
        Ok((stats, traces))
    }
}

/// Run one configured scenario to completion.
pub fn run(config: ScenarioConfig) -> Result<StatsRecord> {
    Simulation::new(config)?.run()
}

/// Run every (distance, run) combination of `base` in parallel. Records are
/// ordered by distance (in the order given) and then by run.
pub fn sweep(base: &ScenarioConfig, distances: &[f64], rng_runs: &[u64]) -> Result<SweepTable> {
    if distances.is_empty() || rng_runs.is_empty() {
        return Err(Error::Config(
            "a sweep needs at least one distance and one run".into(),
        ));
    }
    let jobs: Vec<ScenarioConfig> = distances
        .iter()
        .flat_map(|&d| {
            rng_runs.iter().map(move |&r| ScenarioConfig {
                distance_m: d,
                rng_run: r,
                ..base.clone()
            })
        })
        .collect();
    for job in &jobs {
        job.validate()?;
    }
    let records = jobs
        .into_par_iter()
        .map(run)
        .collect::<Result<Vec<_>>>()?;
    let aggregates = distances
        .iter()
        .map(|&d| {
            let members: Vec<&StatsRecord> =
                records.iter().filter(|r| r.distance_m == d).collect();
            Aggregate::of(d, &members)
        })
        .collect();
    Ok(SweepTable {
        records,
        aggregates,
    })
}

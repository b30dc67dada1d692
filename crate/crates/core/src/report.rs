//! Text summary and CSV output. Numbers are formatted with `.` decimals
//! regardless of locale.

use std::fmt::Write as _;

use crate::channel::ChannelTraceRow;
use crate::engine::{MacOutcome, MacTraceRow, PhyTraceRow, StatsRecord, SweepTable};
use crate::phy::HarqAck;

pub const RESULTS_HEADER: &str =
    "distance_m,rng_run,thr_mbps,delay_ms,jitter_ms,tx_bytes,rx_bytes,mean_ri";

fn record_row(r: &StatsRecord) -> String {
    format!(
        "{},{},{:.6},{:.6},{:.6},{},{},{:.6}",
        r.distance_m,
        r.rng_run,
        r.throughput_mbps,
        r.mean_delay_ms,
        r.mean_jitter_ms,
        r.tx_bytes,
        r.rx_bytes,
        r.mean_ri
    )
}

/// Results of a single run.
pub fn results_csv_single(r: &StatsRecord) -> String {
    format!("{RESULTS_HEADER}\n{}\n", record_row(r))
}

/// Per-run rows followed by one `mean` row per distance.
pub fn results_csv(table: &SweepTable) -> String {
    let mut s = String::new();
    s.push_str(RESULTS_HEADER);
    s.push('\n');
    for r in &table.records {
        s.push_str(&record_row(r));
        s.push('\n');
    }
    for a in &table.aggregates {
        let _ = writeln!(
            s,
            "{},mean,{:.6},{:.6},{:.6},{:.1},{:.1},{:.6}",
            a.distance_m,
            a.throughput_mbps.mean,
            a.delay_ms.mean,
            a.jitter_ms.mean,
            a.tx_bytes.mean,
            a.rx_bytes.mean,
            a.mean_ri.mean
        );
    }
    s
}

pub fn summary_single(r: &StatsRecord) -> String {
    format!(
        "Distance: {} m, RNG run: {}\n\
         TX bytes: {}\n\
         RX bytes: {}\n\
         Throughput: {:.3} Mbps\n\
         Mean delay: {:.3} ms\n\
         Mean jitter: {:.3} ms\n\
         Mean RI: {:.3}\n",
        r.distance_m,
        r.rng_run,
        r.tx_bytes,
        r.rx_bytes,
        r.throughput_mbps,
        r.mean_delay_ms,
        r.mean_jitter_ms,
        r.mean_ri
    )
}

pub fn summary_sweep(table: &SweepTable) -> String {
    let mut s = String::new();
    for a in &table.aggregates {
        let _ = writeln!(
            s,
            "Distance: {} m ({} runs)\n  TX bytes: {:.0}\n  RX bytes: {:.0}\n  \
             Throughput: {:.3} +/- {:.3} Mbps\n  Mean delay: {:.3} ms\n  \
             Mean jitter: {:.3} ms\n  Mean RI: {:.3}",
            a.distance_m,
            a.runs,
            a.tx_bytes.mean,
            a.rx_bytes.mean,
            a.throughput_mbps.mean,
            a.throughput_mbps.std,
            a.delay_ms.mean,
            a.jitter_ms.mean,
            a.mean_ri.mean
        );
    }
    s
}

fn ack_str(a: HarqAck) -> &'static str {
    match a {
        HarqAck::Ack => "ACK",
        HarqAck::Nack => "NACK",
    }
}

pub fn phy_trace_csv(rows: &[PhyTraceRow]) -> String {
    let mut s = String::from("slot,rnti,stream,sinr_db,cqi,ri,ack\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{:.4},{},{},{}",
            r.slot,
            r.rnti,
            r.stream,
            r.sinr_db,
            r.cqi,
            r.ri,
            ack_str(r.ack)
        );
    }
    s
}

pub fn mac_trace_csv(rows: &[MacTraceRow]) -> String {
    let mut s = String::from("slot,rnti,harq_pid,stream,ndi,rv,mcs,tbs_bytes,outcome\n");
    for r in rows {
        let outcome = match r.outcome {
            MacOutcome::Ack => "ACK",
            MacOutcome::Nack => "NACK",
            MacOutcome::Lost => "LOST",
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.slot,
            r.rnti,
            r.harq_pid,
            r.stream,
            u8::from(r.ndi),
            r.rv,
            r.mcs,
            r.tbs_bytes,
            outcome
        );
    }
    s
}

pub fn channel_trace_csv(rows: &[ChannelTraceRow]) -> String {
    let mut s =
        String::from("slot,node_pair,tx_part,rx_part,los,shadowing_db,xpd_db,co_db,cross_db\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{:.4},{:.4},{:.4},{:.4}",
            r.slot,
            r.pair,
            r.tx_partition,
            r.rx_partition,
            u8::from(r.los),
            r.shadowing_db,
            r.xpd_db,
            r.co_db,
            r.cross_db
        );
    }
    s
}

use std::collections::BTreeMap;

use proptest::prelude::*;

use nrmimo_core::antenna::{BeamId, Direction};
use nrmimo_core::engine::{RlcTxQueue, Segment};
use nrmimo_core::mac::{
    mcs_for_cqi, tbs_bytes, DlHarqInfo, Scheduler, SchedulerConfig, SchedulerMode, UeSchedInfo,
};
use nrmimo_core::phy::{
    compute_ri, compute_stream_sinr, db_to_linear, split_tx_power, DlCqiInfo, ErrorModel,
    HarqAck, HarqSoftState, RiConfig, StreamSinrReport,
};

fn sinr_report(stream_index: usize, sinr_db: f64) -> StreamSinrReport {
    StreamSinrReport {
        stream_index,
        sinr_db,
        slot: 0,
    }
}

proptest! {
    #[test]
    fn power_split_conserves(total in -20.0f64..50.0) {
        let one = split_tx_power(total, 1).unwrap();
        prop_assert_eq!(one, total);
        let half = db_to_linear(split_tx_power(total, 2).unwrap());
        prop_assert!((2.0 * half - db_to_linear(total)).abs() <= 1e-12 * db_to_linear(total));
    }

    #[test]
    fn sinr_non_increasing_in_rho(co in -120.0f64..-40.0, cross in -150.0f64..-40.0, noise in -110.0f64..-80.0, r1 in 0.0f64..=1.0, r2 in 0.0f64..=1.0) {
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let a = compute_stream_sinr(co, cross, noise, lo).unwrap();
        let b = compute_stream_sinr(co, cross, noise, hi).unwrap();
        prop_assert!(b <= a + 1e-12);
        let snr = compute_stream_sinr(co, cross, noise, 0.0).unwrap();
        prop_assert!((snr - (co - noise)).abs() < 1e-9);
    }

    #[test]
    fn perfect_xpd_two_streams_cost_3_db(total in 0.0f64..46.0, loss in 60.0f64..160.0, noise in -100.0f64..-85.0) {
        let one = compute_stream_sinr(split_tx_power(total, 1).unwrap() - loss, -300.0, noise, 1.0).unwrap();
        let two = compute_stream_sinr(split_tx_power(total, 2).unwrap() - loss, -300.0, noise, 1.0).unwrap();
        prop_assert!((one - two - 10.0 * 2f64.log10()).abs() < 1e-6);
    }

    #[test]
    fn adaptive_ri_table(t1 in -10.0f64..25.0, t2 in -10.0f64..25.0, a in -20.0f64..40.0, b in -20.0f64..40.0) {
        let cfg = RiConfig::adaptive(t1, t2).unwrap();
        let one = compute_ri(&cfg, &[sinr_report(0, a)]).unwrap();
        prop_assert_eq!(one.ri, if a >= t1 { 2 } else { 1 });
        prop_assert!(!one.report_both_cqis);
        let two = compute_ri(&cfg, &[sinr_report(0, a), sinr_report(1, b)]).unwrap();
        let keep = a >= t2 && b >= t2;
        prop_assert_eq!(two.ri, if keep { 2 } else { 1 });
        prop_assert_eq!(two.report_both_cqis, !keep);
    }

    #[test]
    fn combining_strictly_increases(sinrs in prop::collection::vec(-10.0f64..30.0, 1..=4)) {
        let mut soft = HarqSoftState::default();
        let mut prev = f64::NEG_INFINITY;
        let mut oracle = 0.0;
        for s in sinrs {
            let got = soft.harq_combine(1, s).unwrap();
            oracle += db_to_linear(s);
            prop_assert!(got > prev);
            prop_assert!((got - 10.0 * oracle.log10()).abs() < 1e-9);
            prev = got;
        }
    }

    #[test]
    fn bler_and_cqi_monotone(s1 in -15.0f64..40.0, s2 in -15.0f64..40.0, mcs in 0u8..27) {
        let m = ErrorModel::default();
        let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
        prop_assert!(m.bler(hi, mcs).unwrap() <= m.bler(lo, mcs).unwrap());
        prop_assert!(m.bler(lo, mcs + 1).unwrap() >= m.bler(lo, mcs).unwrap());
        prop_assert!(m.compute_cqi(hi) >= m.compute_cqi(lo));
        let cqi = m.compute_cqi(lo);
        if cqi > 0 {
            prop_assert!(m.bler(lo, mcs_for_cqi(cqi)).unwrap() <= 0.1 + 1e-12);
        }
    }

    #[test]
    fn tbs_monotone(mcs in 0u8..27, prb in 1u32..273, sym in 1u32..14) {
        let base = tbs_bytes(mcs, prb, sym, 0.04).unwrap();
        prop_assert!(tbs_bytes(mcs + 1, prb, sym, 0.04).unwrap() >= base);
        prop_assert!(tbs_bytes(mcs, prb + 1, sym, 0.04).unwrap() >= base);
        prop_assert!(tbs_bytes(mcs, prb, sym + 1, 0.04).unwrap() >= base);
    }

    #[test]
    fn rlc_segmentation_conserves_bytes(packets in prop::collection::vec(1u32..3000, 0..50), tbs in prop::collection::vec(1u32..20_000, 1..20)) {
        let mut q = RlcTxQueue::default();
        let total: u64 = packets.iter().map(|&p| u64::from(p)).sum();
        for (i, &p) in packets.iter().enumerate() {
            q.enqueue(i as u64, p);
        }
        let mut sent: Vec<Segment> = Vec::new();
        for t in tbs {
            let segs = q.dequeue(t);
            prop_assert!(segs.iter().map(|s| s.bytes).sum::<u32>() <= t);
            sent.extend(segs);
        }
        let sent_bytes: u64 = sent.iter().map(|s| u64::from(s.bytes)).sum();
        prop_assert_eq!(sent_bytes + q.queued_bytes(), total);
        let mut per_packet: BTreeMap<u64, u32> = BTreeMap::new();
        for s in &sent {
            *per_packet.entry(s.packet_id).or_default() += s.bytes;
        }
        for (id, b) in per_packet {
            prop_assert!(b <= packets[id as usize]);
        }
    }

    /// Random feedback against the scheduler: checks the DCI invariants.
    #[test]
    fn scheduler_invariants(seed_acks in prop::collection::vec(any::<bool>(), 400), cqis in prop::collection::vec((0u8..=15, 0u8..=15, 1u8..=2), 20), ofdma in any::<bool>()) {
        let mode = if ofdma { SchedulerMode::Ofdma } else { SchedulerMode::Tdma };
        let mut s = Scheduler::new(SchedulerConfig { mode, ..SchedulerConfig::default() });
        let beam_a = Some(BeamId::from_direction(Direction::new(0.0, 100.0)));
        let beam_b = Some(BeamId::from_direction(Direction::new(30.0, 100.0)));
        s.add_ue(UeSchedInfo::new(1, 2, [beam_a, beam_a]));
        s.add_ue(UeSchedInfo::new(2, 2, [beam_a, beam_a]));
        s.add_ue(UeSchedInfo::new(3, 2, [beam_b, beam_b]));
        let buffers: BTreeMap<u16, u64> = [(1, 5_000_000), (2, 5_000_000), (3, 5_000_000)].into_iter().collect();
        let mut acks = seed_acks.into_iter().cycle();
        let mut first_new: BTreeMap<u16, bool> = BTreeMap::new();
        let mut sent: BTreeMap<(u16, u8, usize), (u8, u32)> = BTreeMap::new();
        let mut pending: Vec<(u64, DlHarqInfo)> = Vec::new();
        for slot in 0..200u64 {
            let due: Vec<DlHarqInfo> = pending.iter().filter(|(d, _)| *d <= slot).map(|(_, f)| f.clone()).collect();
            pending.retain(|(d, _)| *d > slot);
            for f in due {
                s.process_harq_feedback(&f, slot).unwrap();
            }
            if slot % 10 == 5 {
                let (a, b, ri) = cqis[(slot / 10) as usize % cqis.len()];
                for rnti in 1..=3 {
                    s.update_ue_from_cqi(&DlCqiInfo { rnti, wb_cqi: vec![Some(a), Some(b)], ri }).unwrap();
                }
            }
            let had_pending: BTreeMap<u16, bool> = (1..=3).map(|r| (r, s.pool(r).unwrap().has_pending_retx())).collect();
            let dcis = s.schedule_slot(slot, &buffers);
            for d in &dcis {
                prop_assert!(d.num_streams() >= 1);
                let new = !d.is_retransmission();
                if new {
                    prop_assert!(!had_pending[&d.rnti], "new data while a retransmission was pending");
                    if first_new.insert(d.rnti, true).is_none() {
                        prop_assert!(d.tb_per_stream[0].is_some() && d.tb_per_stream[1].is_none());
                    }
                }
                for (st, tb) in d.streams() {
                    prop_assert!(tb.rv <= 3);
                    prop_assert_eq!(tb.ndi, tb.rv == 0);
                    prop_assert_eq!(tb.tbs_bytes, tbs_bytes(tb.mcs, d.n_prb(), u32::from(d.num_sym), 0.04).unwrap());
                    let key = (d.rnti, d.harq_process_id, st);
                    if tb.ndi {
                        sent.insert(key, (tb.mcs, tb.tbs_bytes));
                    } else {
                        prop_assert_eq!(sent[&key], (tb.mcs, tb.tbs_bytes));
                    }
                }
                prop_assert!(s.pool(d.rnti).unwrap().in_use_count() <= 20);
                let ack_per_stream = d.streams().map(|(st, _)| (st, if acks.next().unwrap() { HarqAck::Ack } else { HarqAck::Nack })).collect();
                pending.push((slot + 4, DlHarqInfo { rnti: d.rnti, harq_process_id: d.harq_process_id, ack_per_stream }));
            }
            for x in &dcis {
                for y in &dcis {
                    let overlap = x.sym_start < y.sym_start + y.num_sym && y.sym_start < x.sym_start + x.num_sym;
                    if overlap && !std::ptr::eq(x, y) {
                        prop_assert_eq!(x.beam_conf, y.beam_conf);
                        prop_assert!(x.rbg_mask.iter().zip(&y.rbg_mask).all(|(a, b)| !(a & b)));
                    }
                }
                prop_assert!(x.sym_start >= 1 && x.sym_start + x.num_sym <= 13);
            }
        }
    }
}

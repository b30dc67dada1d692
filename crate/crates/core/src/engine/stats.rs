//! Run statistics and their aggregation across random runs.

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HarqStats {
    /// Transport blocks sent for the first time.
    pub new_tbs: u64,
    pub retx_tbs: u64,
    pub acks: u64,
    pub nacks: u64,
    /// Blocks dropped after the last redundancy version.
    pub lost_tbs: u64,
}

/// Outcome of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsRecord {
    pub distance_m: f64,
    pub rng_run: u64,
    /// Bytes handed to the RLC queue by the traffic source.
    pub tx_bytes: u64,
    /// Bytes of packets received completely.
    pub rx_bytes: u64,
    pub tx_packets: u64,
    pub rx_packets: u64,
    pub throughput_mbps: f64,
    pub mean_delay_ms: f64,
    pub mean_jitter_ms: f64,
    /// Rank in force at the scheduler for the first UE, one entry per slot.
    pub ri_trace: Vec<u8>,
    pub mean_ri: f64,
    pub harq: HarqStats,
    /// Bytes of segments decoded at the UE, whether or not their packet
    /// completed.
    pub delivered_segment_bytes: u64,
    pub in_flight_bytes: u64,
    pub lost_bytes: u64,
    pub queued_bytes: u64,
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = if v.len() > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

/// Statistics of all runs at one distance.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub distance_m: f64,
    pub runs: usize,
    pub throughput_mbps: MeanStd,
    pub delay_ms: MeanStd,
    pub jitter_ms: MeanStd,
    pub tx_bytes: MeanStd,
    pub rx_bytes: MeanStd,
    pub mean_ri: MeanStd,
}

impl Aggregate {
    pub fn of(distance_m: f64, records: &[&StatsRecord]) -> Self {
        let col = |f: fn(&StatsRecord) -> f64| MeanStd::of(records.iter().map(|r| f(r)));
        Self {
            distance_m,
            runs: records.len(),
            throughput_mbps: col(|r| r.throughput_mbps),
            delay_ms: col(|r| r.mean_delay_ms),
            jitter_ms: col(|r| r.mean_jitter_ms),
            tx_bytes: col(|r| r.tx_bytes as f64),
            rx_bytes: col(|r| r.rx_bytes as f64),
            mean_ri: col(|r| r.mean_ri),
        }
    }
}

/// Records of a sweep ordered by (distance, run), plus one aggregate per
/// distance.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub records: Vec<StatsRecord>,
    pub aggregates: Vec<Aggregate>,
}

impl SweepTable {
    pub fn aggregate_at(&self, distance_m: f64) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.distance_m == distance_m)
    }
}

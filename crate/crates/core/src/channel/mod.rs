//! Channel state split into per-node-pair parameters and per-subarray-pair
//! matrices.
//!
//! Long-term state (LOS condition, shadowing, cross-polarization
//! discrimination) is drawn once per pair of nodes as a [`ChannelParams`] and
//! shared, by reference, by every [`ChannelMatrixEntry`] between those nodes.
//! Each (TX partition, RX partition) pair gets its own small-scale fading,
//! drawn independently given the shared parameters.
//!
//! Small-scale fading is flat and block-constant over a coherence window: one
//! co-polar and one cross-polar coefficient per subarray pair.

mod umi;

pub use umi::{breakpoint_distance_m, los_probability, shadowing_std_db};

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::antenna::{array_gain, ArrayConfig, Direction, SubarrayPartition};
use crate::error::{Error, Result};
use crate::rng::{Purpose, RngStreams, SimRng};

pub type NodeId = u32;

/// XPD values at or above this are treated as perfect polarization isolation.
pub const XPD_CAP_DB: f64 = 200.0;
/// Received power reported when a term is exactly zero.
pub const POWER_FLOOR_DBM: f64 = -300.0;

/// Unordered pair of distinct nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodePairKey {
    lo: NodeId,
    hi: NodeId,
}

impl NodePairKey {
    pub fn new(a: NodeId, b: NodeId) -> Result<Self> {
        if same_node_guard(a, b) == Guard::Deny {
            return Err(Error::SameNode(a));
        }
        Ok(Self {
            lo: a.min(b),
            hi: a.max(b),
        })
    }

    pub fn nodes(&self) -> (NodeId, NodeId) {
        (self.lo, self.hi)
    }
}

impl fmt::Display for NodePairKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.lo, self.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Guard {
    Allow,
    Deny,
}

/// There is no model for the channel between arrays of the same node.
pub fn same_node_guard(tx_node: NodeId, rx_node: NodeId) -> Guard {
    if tx_node == rx_node {
        Guard::Deny
    } else {
        Guard::Allow
    }
}

/// Geometry of a base-station / terminal link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub distance_2d_m: f64,
    pub h_bs_m: f64,
    pub h_ut_m: f64,
}

impl LinkGeometry {
    pub fn distance_3d_m(&self) -> f64 {
        self.distance_2d_m.hypot(self.h_bs_m - self.h_ut_m)
    }
}

/// How cross-polarization discrimination is drawn for a node pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XpdModel {
    /// Gaussian in dB, separate statistics for LOS and NLOS.
    Gaussian {
        los_mean_db: f64,
        los_std_db: f64,
        nlos_mean_db: f64,
        nlos_std_db: f64,
    },
    Fixed(f64),
    /// No leakage between polarizations.
    Isolation,
}

impl Default for XpdModel {
    fn default() -> Self {
        XpdModel::Gaussian {
            los_mean_db: 9.0,
            los_std_db: 3.0,
            nlos_mean_db: 8.0,
            nlos_std_db: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub fc_ghz: f64,
    pub coherence_slots: u64,
    pub xpd: XpdModel,
    pub rician_k_db: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            fc_ghz: 3.5,
            coherence_slots: 100,
            xpd: XpdModel::default(),
            rician_k_db: 10.0,
        }
    }
}

/// Long-term channel state shared by every subarray pair between two nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    pub key: NodePairKey,
    pub geometry: LinkGeometry,
    pub los: bool,
    pub shadowing_db: f64,
    pub xpd_db: f64,
    pub generated_at: u64,
}

impl ChannelParams {
    pub fn distance_2d_m(&self) -> f64 {
        self.geometry.distance_2d_m
    }

    pub fn distance_3d_m(&self) -> f64 {
        self.geometry.distance_3d_m()
    }
}

/// Identifies one subarray pair between two nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MatrixKey {
    pub pair: NodePairKey,
    pub tx_partition: usize,
    pub rx_partition: usize,
}

/// Fading of one subarray pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrixEntry {
    pub key: MatrixKey,
    pub params: Arc<ChannelParams>,
    pub co_polar_gain: Complex64,
    pub cross_polar_gain: Complex64,
    pub small_scale_fading_db: f64,
}

/// Received power of one stream and of the leakage from the other stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationSample {
    pub stream: usize,
    pub rx_power_dbm_co: f64,
    pub rx_power_dbm_cross: f64,
}

/// One row of the optional channel trace, recorded when an entry is drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTraceRow {
    pub slot: u64,
    pub pair: NodePairKey,
    pub tx_partition: usize,
    pub rx_partition: usize,
    pub los: bool,
    pub shadowing_db: f64,
    pub xpd_db: f64,
    pub co_db: f64,
    pub cross_db: f64,
}

/// Owns the parameter and matrix caches of one simulation run.
#[derive(Debug)]
pub struct ChannelModel {
    config: ChannelConfig,
    streams: RngStreams,
    params: BTreeMap<NodePairKey, Arc<ChannelParams>>,
    matrices: BTreeMap<MatrixKey, Arc<ChannelMatrixEntry>>,
    rngs: BTreeMap<(Purpose, u64, u64), SimRng>,
    trace: Option<Vec<ChannelTraceRow>>,
}

impl ChannelModel {
    pub fn new(config: ChannelConfig, streams: RngStreams) -> Self {
        Self {
            config,
            streams,
            params: BTreeMap::new(),
            matrices: BTreeMap::new(),
            rngs: BTreeMap::new(),
            trace: None,
        }
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.config
    }

    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn take_trace(&mut self) -> Vec<ChannelTraceRow> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn cached_params(&self) -> impl Iterator<Item = &Arc<ChannelParams>> {
        self.params.values()
    }

    pub fn cached_matrices(&self) -> impl Iterator<Item = &Arc<ChannelMatrixEntry>> {
        self.matrices.values()
    }

    fn rng(&mut self, purpose: Purpose, a: u64, b: u64) -> &mut SimRng {
        let streams = self.streams;
        self.rngs
            .entry((purpose, a, b))
            .or_insert_with(|| streams.stream(purpose, a, b))
    }

    /// Shared parameters for a node pair, drawn on first use.
    pub fn get_channel_params(
        &mut self,
        node_a: NodeId,
        node_b: NodeId,
        geometry: LinkGeometry,
        now_slot: u64,
    ) -> Result<Arc<ChannelParams>> {
        let key = NodePairKey::new(node_a, node_b)?;
        if let Some(p) = self.params.get(&key) {
            return Ok(Arc::clone(p));
        }
        let params = Arc::new(self.draw_params(key, geometry, now_slot));
        self.params.insert(key, Arc::clone(&params));
        Ok(params)
    }

    fn draw_params(&mut self, key: NodePairKey, geometry: LinkGeometry, now: u64) -> ChannelParams {
        let xpd_model = self.config.xpd;
        let rng = self.rng(Purpose::ChannelParams, key.lo as u64, key.hi as u64);
        let los = rng.random::<f64>() < los_probability(geometry.distance_2d_m);
        let shadowing_db = shadowing_std_db(los) * rng.sample::<f64, _>(StandardNormal);
        let xpd_db = match xpd_model {
            XpdModel::Gaussian {
                los_mean_db,
                los_std_db,
                nlos_mean_db,
                nlos_std_db,
            } => {
                let (mean, std) = if los {
                    (los_mean_db, los_std_db)
                } else {
                    (nlos_mean_db, nlos_std_db)
                };
                (mean + std * rng.sample::<f64, _>(StandardNormal)).clamp(0.0, XPD_CAP_DB)
            }
            XpdModel::Fixed(v) => v.clamp(0.0, XPD_CAP_DB),
            XpdModel::Isolation => XPD_CAP_DB,
        };
        ChannelParams {
            key,
            geometry,
            los,
            shadowing_db,
            xpd_db,
            generated_at: now,
        }
    }

    /// Fading for one subarray pair, drawn on first use.
    pub fn get_channel_matrix(
        &mut self,
        params: &Arc<ChannelParams>,
        tx_partition: usize,
        rx_partition: usize,
        partitions: (usize, usize),
    ) -> Result<Arc<ChannelMatrixEntry>> {
        if tx_partition >= partitions.0 {
            return Err(Error::PartitionOutOfRange {
                index: tx_partition,
                count: partitions.0,
            });
        }
        if rx_partition >= partitions.1 {
            return Err(Error::PartitionOutOfRange {
                index: rx_partition,
                count: partitions.1,
            });
        }
        match self.params.get(&params.key) {
            Some(current) if Arc::ptr_eq(current, params) => {}
            _ => {
                return Err(Error::KeyMismatch(format!(
                    "parameters of pair {} are not the current ones",
                    params.key
                )))
            }
        }
        let key = MatrixKey {
            pair: params.key,
            tx_partition,
            rx_partition,
        };
        if let Some(e) = self.matrices.get(&key) {
            if Arc::ptr_eq(&e.params, params) {
                return Ok(Arc::clone(e));
            }
        }
        let entry = Arc::new(self.draw_matrix(key, params));
        self.matrices.insert(key, Arc::clone(&entry));
        if let Some(trace) = self.trace.as_mut() {
            trace.push(ChannelTraceRow {
                slot: params.generated_at,
                pair: key.pair,
                tx_partition,
                rx_partition,
                los: params.los,
                shadowing_db: params.shadowing_db,
                xpd_db: params.xpd_db,
                co_db: power_db(entry.co_polar_gain.norm_sqr()),
                cross_db: power_db(entry.cross_polar_gain.norm_sqr()),
            });
        }
        Ok(entry)
    }

    fn draw_matrix(&mut self, key: MatrixKey, params: &Arc<ChannelParams>) -> ChannelMatrixEntry {
        let k_lin = 10f64.powf(self.config.rician_k_db / 10.0);
        let pair_word = ((key.pair.lo as u64) << 32) | key.pair.hi as u64;
        let part_word = ((key.tx_partition as u64) << 32) | key.rx_partition as u64;
        let rng = self.rng(Purpose::ChannelMatrix, pair_word, part_word);
        let half = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid std");
        let scatter = Complex64::new(half.sample(rng), half.sample(rng));
        let co = if params.los {
            let phase = rng.random::<f64>() * std::f64::consts::TAU;
            Complex64::from_polar((k_lin / (k_lin + 1.0)).sqrt(), phase)
                + scatter * (1.0 / (k_lin + 1.0)).sqrt()
        } else {
            scatter
        };
        let cross_phase = rng.random::<f64>() * std::f64::consts::TAU;
        let cross = if params.xpd_db >= XPD_CAP_DB {
            Complex64::new(0.0, 0.0)
        } else {
            let ratio = 10f64.powf(-params.xpd_db / 10.0);
            Complex64::from_polar(ratio.sqrt() * co.norm(), cross_phase)
        };
        ChannelMatrixEntry {
            key,
            params: Arc::clone(params),
            co_polar_gain: co,
            cross_polar_gain: cross,
            small_scale_fading_db: power_db(co.norm_sqr()),
        }
    }

    /// Redraw parameters older than the coherence window and drop every
    /// matrix entry that depended on them. Returns the refreshed pairs.
    pub fn update_channel(&mut self, now_slot: u64) -> Vec<NodePairKey> {
        let coherence = self.config.coherence_slots.max(1);
        let stale: Vec<(NodePairKey, LinkGeometry)> = self
            .params
            .values()
            .filter(|p| now_slot.saturating_sub(p.generated_at) >= coherence)
            .map(|p| (p.key, p.geometry))
            .collect();
        for (key, geometry) in &stale {
            let fresh = Arc::new(self.draw_params(*key, *geometry, now_slot));
            self.params.insert(*key, fresh);
            self.matrices.retain(|k, _| k.pair != *key);
        }
        stale.into_iter().map(|(k, _)| k).collect()
    }

    /// Pathloss of a cached pair with this model's carrier.
    pub fn pathloss_db(&self, params: &ChannelParams) -> Result<f64> {
        pathloss_db(
            params,
            self.config.fc_ghz,
            params.geometry.h_bs_m,
            params.geometry.h_ut_m,
        )
    }
}

fn power_db(linear: f64) -> f64 {
    if linear > 0.0 {
        (10.0 * linear.log10()).max(POWER_FLOOR_DBM)
    } else {
        POWER_FLOOR_DBM
    }
}

/// UMi street-canyon pathloss for the pair's geometry and LOS state.
pub fn pathloss_db(params: &ChannelParams, fc_ghz: f64, h_bs_m: f64, h_ut_m: f64) -> Result<f64> {
    umi::pathloss_db(
        params.los,
        params.distance_2d_m(),
        params.geometry.distance_2d_m.hypot(h_bs_m - h_ut_m),
        fc_ghz,
        h_bs_m,
        h_ut_m,
    )
}

/// One end of a link: a node and one of its subarrays.
#[derive(Debug, Clone, Copy)]
pub struct LinkEnd<'a> {
    pub node: NodeId,
    pub array: &'a ArrayConfig,
    pub partition: &'a SubarrayPartition,
}

fn check_key(entry: &ChannelMatrixEntry, tx: &LinkEnd, rx: &LinkEnd) -> Result<()> {
    let pair = NodePairKey::new(tx.node, rx.node)?;
    let want = MatrixKey {
        pair,
        tx_partition: tx.partition.partition_index(),
        rx_partition: rx.partition.partition_index(),
    };
    if entry.key != want {
        return Err(Error::KeyMismatch(format!(
            "entry {:?} used for link {:?}",
            entry.key, want
        )));
    }
    Ok(())
}

fn dbm_from_linear(mw: f64) -> f64 {
    power_db(mw)
}

/// Received power on `rx` of the stream sent from `tx`, plus the leakage of
/// the stream sent from `interferer` (another subarray of the same TX node)
/// through its cross-polar coefficient.
///
/// `departure` is the direction from the TX node toward the RX node; both
/// ends use their current beamforming weights.
pub fn rx_psd(
    tx_power_dbm_per_stream: f64,
    tx: &LinkEnd,
    rx: &LinkEnd,
    entry: &ChannelMatrixEntry,
    interferer: Option<(&LinkEnd, &ChannelMatrixEntry)>,
    pathloss_db: f64,
    departure: Direction,
) -> Result<PropagationSample> {
    check_key(entry, tx, rx)?;
    let arrival = Direction::new(departure.azimuth_deg + 180.0, 180.0 - departure.zenith_deg);
    let rx_gain = array_gain(rx.partition, rx.partition.weights(), arrival, rx.array);
    let shadowing = entry.params.shadowing_db;

    let budget = |end: &LinkEnd, gain: Complex64| -> f64 {
        let tx_gain = array_gain(end.partition, end.partition.weights(), departure, end.array);
        let db = tx_power_dbm_per_stream + tx_gain + rx_gain - pathloss_db - shadowing;
        10f64.powf(db / 10.0) * gain.norm_sqr()
    };

    let co = budget(tx, entry.co_polar_gain);
    let cross = match interferer {
        Some((end, cross_entry)) => {
            if end.node != tx.node {
                return Err(Error::KeyMismatch(
                    "interfering subarray belongs to another node".into(),
                ));
            }
            check_key(cross_entry, end, rx)?;
            if !Arc::ptr_eq(&cross_entry.params, &entry.params) {
                return Err(Error::KeyMismatch(
                    "co and cross entries use different channel parameters".into(),
                ));
            }
            budget(end, cross_entry.cross_polar_gain)
        }
        None => 0.0,
    };
    Ok(PropagationSample {
        stream: tx.partition.partition_index(),
        rx_power_dbm_co: dbm_from_linear(co),
        rx_power_dbm_cross: dbm_from_linear(cross),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::antenna::{build_subarrays, ElementPattern};
    use approx::assert_abs_diff_eq;

    fn geom(d: f64) -> LinkGeometry {
        LinkGeometry {
            distance_2d_m: d,
            h_bs_m: 10.0,
            h_ut_m: 1.5,
        }
    }

    fn model(xpd: XpdModel) -> ChannelModel {
        ChannelModel::new(
            ChannelConfig {
                xpd,
                ..ChannelConfig::default()
            },
            RngStreams::new(1),
        )
    }

    #[test]
    fn guard() {
        assert_eq!(same_node_guard(0, 0), Guard::Deny);
        assert_eq!(same_node_guard(0, 1), Guard::Allow);
        assert_eq!(same_node_guard(1, 0), Guard::Allow);
        let mut m = model(XpdModel::default());
        assert_eq!(
            m.get_channel_params(3, 3, geom(10.0), 0),
            Err(Error::SameNode(3))
        );
        assert_eq!(m.cached_params().count(), 0);
    }

    #[test]
    fn params_cache_and_symmetry() {
        let mut m = model(XpdModel::default());
        let a = m.get_channel_params(0, 1, geom(10.0), 0).unwrap();
        let b = m.get_channel_params(0, 1, geom(10.0), 0).unwrap();
        let c = m.get_channel_params(1, 0, geom(10.0), 0).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert!(Arc::ptr_eq(&a, &c));
        assert!(a.los, "10 m is always line of sight");
        assert!(a.xpd_db >= 0.0);
    }

    #[test]
    fn matrix_cache_and_range() {
        let mut m = model(XpdModel::default());
        let p = m.get_channel_params(0, 1, geom(50.0), 0).unwrap();
        let e1 = m.get_channel_matrix(&p, 0, 1, (2, 2)).unwrap();
        let e2 = m.get_channel_matrix(&p, 0, 1, (2, 2)).unwrap();
        assert!(Arc::ptr_eq(&e1, &e2));
        assert!(matches!(
            m.get_channel_matrix(&p, 2, 0, (2, 2)),
            Err(Error::PartitionOutOfRange { index: 2, count: 2 })
        ));
        assert!(m.get_channel_matrix(&p, 0, 1, (2, 1)).is_err());
    }

    #[test]
    fn isolation_zeroes_cross() {
        let mut m = model(XpdModel::Isolation);
        let p = m.get_channel_params(0, 1, geom(50.0), 0).unwrap();
        for tx in 0..2 {
            for rx in 0..2 {
                let e = m.get_channel_matrix(&p, tx, rx, (2, 2)).unwrap();
                assert!(e.cross_polar_gain.norm() <= 1e-10);
            }
        }
    }

    #[test]
    fn cross_bounded_by_xpd_at_generation() {
        let mut m = model(XpdModel::default());
        for node in 1..200u32 {
            let p = m.get_channel_params(0, node, geom(150.0), 0).unwrap();
            let e = m.get_channel_matrix(&p, 0, 1, (2, 2)).unwrap();
            let ratio = e.cross_polar_gain.norm_sqr() / e.co_polar_gain.norm_sqr();
            assert!(ratio <= 10f64.powf(-p.xpd_db / 10.0) * (1.0 + 1e-9));
        }
    }

    #[test]
    fn update_respects_coherence() {
        let mut m = model(XpdModel::default());
        let p = m.get_channel_params(0, 1, geom(200.0), 0).unwrap();
        for tx in 0..2 {
            for rx in 0..2 {
                m.get_channel_matrix(&p, tx, rx, (2, 2)).unwrap();
            }
        }
        assert!(m.update_channel(50).is_empty());
        assert_eq!(m.cached_matrices().count(), 4);

        let refreshed = m.update_channel(100);
        assert_eq!(refreshed, vec![p.key]);
        assert_eq!(m.cached_matrices().count(), 0);
        let q = m.get_channel_params(0, 1, geom(200.0), 100).unwrap();
        assert!(!Arc::ptr_eq(&p, &q));
        assert_eq!(q.generated_at, 100);
        assert_ne!(p.shadowing_db, q.shadowing_db);
    }

    #[test]
    fn rx_psd_additive_budget() {
        let mut m = model(XpdModel::Isolation);
        let cfg = ArrayConfig::new(1, 1, vec![0.0, 90.0], ElementPattern::Isotropic).unwrap();
        let parts = build_subarrays(&cfg);
        let p = m.get_channel_params(0, 1, geom(10.0), 0).unwrap();
        let mut e = (*m.get_channel_matrix(&p, 0, 0, (2, 2)).unwrap()).clone();
        e.co_polar_gain = Complex64::new(0.0, 1.0);
        let mut params = (*p).clone();
        params.shadowing_db = 0.0;
        e.params = Arc::new(params);
        let tx = LinkEnd {
            node: 0,
            array: &cfg,
            partition: &parts[0],
        };
        let rx = LinkEnd {
            node: 1,
            array: &cfg,
            partition: &parts[0],
        };
        let s = rx_psd(30.0, &tx, &rx, &e, None, 80.0, Direction::boresight()).unwrap();
        assert_abs_diff_eq!(s.rx_power_dbm_co, -50.0, epsilon = 1e-9);
        assert_eq!(s.rx_power_dbm_cross, POWER_FLOOR_DBM);
    }

    #[test]
    fn rx_psd_rejects_mismatched_key() {
        let mut m = model(XpdModel::default());
        let cfg = ArrayConfig::ue_default();
        let parts = build_subarrays(&cfg);
        let p = m.get_channel_params(0, 1, geom(10.0), 0).unwrap();
        let e = m.get_channel_matrix(&p, 1, 0, (2, 2)).unwrap();
        let tx = LinkEnd {
            node: 0,
            array: &cfg,
            partition: &parts[0],
        };
        let rx = LinkEnd {
            node: 1,
            array: &cfg,
            partition: &parts[0],
        };
        assert!(matches!(
            rx_psd(30.0, &tx, &rx, &e, None, 80.0, Direction::boresight()),
            Err(Error::KeyMismatch(_))
        ));
    }

    #[test]
    fn isolation_cross_floor() {
        let mut m = model(XpdModel::Isolation);
        let cfg = ArrayConfig::ue_default();
        let parts = build_subarrays(&cfg);
        let p = m.get_channel_params(0, 1, geom(10.0), 0).unwrap();
        let co = m.get_channel_matrix(&p, 0, 0, (2, 2)).unwrap();
        let cross = m.get_channel_matrix(&p, 1, 0, (2, 2)).unwrap();
        let tx0 = LinkEnd {
            node: 0,
            array: &cfg,
            partition: &parts[0],
        };
        let tx1 = LinkEnd {
            node: 0,
            array: &cfg,
            partition: &parts[1],
        };
        let rx = LinkEnd {
            node: 1,
            array: &cfg,
            partition: &parts[0],
        };
        let s = rx_psd(
            27.0,
            &tx0,
            &rx,
            &co,
            Some((&tx1, &cross)),
            70.0,
            Direction::boresight(),
        )
        .unwrap();
        assert_eq!(s.rx_power_dbm_cross, POWER_FLOOR_DBM);
        assert!(s.rx_power_dbm_co > POWER_FLOOR_DBM);
    }
}

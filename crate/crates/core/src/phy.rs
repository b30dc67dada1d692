//! Per-stream link abstraction: SINR, error model, HARQ combining, CQI and
//! rank indicator computation.
//!
//! The error model is a Q-function BLER curve per MCS. For each MCS the
//! threshold is placed so that BLER is 10% at the SINR where the MCS's
//! spectral efficiency equals 85% of the Shannon capacity.

use rand::Rng;
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};
use crate::mac::tables::{mcs_entry, mcs_for_cqi, mcs_table2, MAX_CQI};
use crate::mac::TbInfo;

pub type Rnti = u16;

/// Thermal noise density in dBm/Hz.
pub const THERMAL_NOISE_DBM_HZ: f64 = -174.0;

/// Initial transmission plus redundancy versions 1..=3.
pub const MAX_TRANSMISSIONS: u8 = 4;

pub fn noise_power_dbm(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    THERMAL_NOISE_DBM_HZ + 10.0 * bandwidth_hz.log10() + noise_figure_db
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Per-stream transmit power when the total is shared by `n_active_streams`.
pub fn split_tx_power(total_dbm: f64, n_active_streams: usize) -> Result<f64> {
    match n_active_streams {
        1 | 2 => Ok(total_dbm - linear_to_db(n_active_streams as f64)),
        n => Err(Error::InvalidStreamCount(n)),
    }
}

/// SINR of one stream. `rho` scales how much of the other stream's
/// cross-polar leakage the receiver fails to suppress.
pub fn compute_stream_sinr(
    co_dbm: f64,
    cross_from_other_stream_dbm: f64,
    noise_dbm: f64,
    rho: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::OutOfRange {
            name: "rho",
            value: rho,
            range: "[0, 1]",
        });
    }
    let interference = if rho == 0.0 {
        0.0
    } else {
        rho * db_to_linear(cross_from_other_stream_dbm)
    };
    Ok(linear_to_db(
        db_to_linear(co_dbm) / (db_to_linear(noise_dbm) + interference),
    ))
}

/// Gaussian tail probability.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

pub fn q_inverse(p: f64) -> f64 {
    std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// SINR-threshold BLER curves for every MCS of the table.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorModel {
    sigma_db: f64,
    thresholds_db: Vec<f64>,
}

impl ErrorModel {
    pub const DEFAULT_SIGMA_DB: f64 = 0.5;
    pub const CALIBRATION_BLER: f64 = 0.1;
    pub const SHANNON_FRACTION: f64 = 0.85;

    pub fn new(sigma_db: f64, shannon_fraction: f64) -> Self {
        let offset = sigma_db * q_inverse(Self::CALIBRATION_BLER);
        let thresholds_db = mcs_table2()
            .iter()
            .map(|e| {
                let snr = 2f64.powf(e.spectral_efficiency / shannon_fraction) - 1.0;
                linear_to_db(snr) - offset
            })
            .collect();
        Self {
            sigma_db,
            thresholds_db,
        }
    }

    pub fn sigma_db(&self) -> f64 {
        self.sigma_db
    }

    /// SINR (dB) at which the MCS fails half of the time.
    pub fn threshold_db(&self, mcs: u8) -> Result<f64> {
        self.thresholds_db
            .get(mcs as usize)
            .copied()
            .ok_or(Error::InvalidMcs(mcs))
    }

    pub fn bler(&self, effective_sinr_db: f64, mcs: u8) -> Result<f64> {
        let t = self.threshold_db(mcs)?;
        Ok(q_function((effective_sinr_db - t) / self.sigma_db))
    }

    /// Highest CQI whose MCS decodes with at most 10% BLER; 0 if none.
    pub fn compute_cqi(&self, sinr_db: f64) -> u8 {
        (1..=MAX_CQI)
            .rev()
            .find(|&cqi| {
                self.bler(sinr_db, mcs_for_cqi(cqi))
                    .map(|b| b <= Self::CALIBRATION_BLER)
                    .unwrap_or(false)
            })
            .unwrap_or(0)
    }
}

impl Default for ErrorModel {
    fn default() -> Self {
        Self::new(Self::DEFAULT_SIGMA_DB, Self::SHANNON_FRACTION)
    }
}

/// Soft-combining state of the transport blocks of one HARQ process.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HarqSoftState {
    accumulated_linear: [f64; 2],
    transmissions: [u8; 2],
}

impl HarqSoftState {
    pub fn reset(&mut self, stream: usize) {
        self.accumulated_linear[stream] = 0.0;
        self.transmissions[stream] = 0;
    }

    pub fn transmissions(&self, stream: usize) -> u8 {
        self.transmissions[stream]
    }

    pub fn accumulated_db(&self, stream: usize) -> f64 {
        linear_to_db(self.accumulated_linear[stream])
    }

    /// Add one (re)transmission received at `new_sinr_db` and return the
    /// combined SINR used for decoding.
    pub fn harq_combine(&mut self, stream: usize, new_sinr_db: f64) -> Result<f64> {
        if stream > 1 {
            return Err(Error::InvalidStreamCount(stream + 1));
        }
        if self.transmissions[stream] >= MAX_TRANSMISSIONS {
            return Err(Error::HarqExhausted {
                stream,
                max: MAX_TRANSMISSIONS,
            });
        }
        self.accumulated_linear[stream] += db_to_linear(new_sinr_db);
        self.transmissions[stream] += 1;
        Ok(self.accumulated_db(stream))
    }
}

/// SINR measured on one stream that carried data in a slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamSinrReport {
    pub stream_index: usize,
    pub sinr_db: f64,
    pub slot: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiMode {
    Fixed,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiConfig {
    pub mode: RiMode,
    pub fixed_ri: u8,
    pub threshold1_db: f64,
    pub threshold2_db: f64,
}

impl RiConfig {
    pub fn fixed(ri: u8) -> Result<Self> {
        let cfg = Self {
            mode: RiMode::Fixed,
            fixed_ri: ri,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn adaptive(threshold1_db: f64, threshold2_db: f64) -> Result<Self> {
        let cfg = Self {
            mode: RiMode::Adaptive,
            fixed_ri: 1,
            threshold1_db,
            threshold2_db,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.fixed_ri) {
            return Err(Error::OutOfRange {
                name: "fixed_ri",
                value: self.fixed_ri as f64,
                range: "{1, 2}",
            });
        }
        for (name, v) in [
            ("threshold1_db", self.threshold1_db),
            ("threshold2_db", self.threshold2_db),
        ] {
            if !v.is_finite() {
                return Err(Error::OutOfRange {
                    name,
                    value: v,
                    range: "finite",
                });
            }
        }
        Ok(())
    }
}

impl Default for RiConfig {
    fn default() -> Self {
        Self {
            mode: RiMode::Adaptive,
            fixed_ri: 1,
            threshold1_db: 7.0,
            threshold2_db: 12.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RiDecision {
    pub ri: u8,
    /// Set when falling back from two streams to one.
    pub report_both_cqis: bool,
}

/// Rank indicator from the SINRs of the streams that carried data.
pub fn compute_ri(config: &RiConfig, active: &[StreamSinrReport]) -> Result<RiDecision> {
    match active.len() {
        0 => return Err(Error::NoActiveStream),
        1 | 2 => {}
        n => return Err(Error::InvalidStreamCount(n)),
    }
    Ok(match config.mode {
        RiMode::Fixed => RiDecision {
            ri: config.fixed_ri,
            report_both_cqis: false,
        },
        RiMode::Adaptive if active.len() == 1 => RiDecision {
            ri: if active[0].sinr_db >= config.threshold1_db {
                2
            } else {
                1
            },
            report_both_cqis: false,
        },
        RiMode::Adaptive => {
            let keep = active.iter().all(|s| s.sinr_db >= config.threshold2_db);
            RiDecision {
                ri: if keep { 2 } else { 1 },
                report_both_cqis: !keep,
            }
        }
    })
}

/// Wideband CQI report. `wb_cqi[i]` belongs to stream `i`; `None` marks a
/// stream that carried no data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DlCqiInfo {
    pub rnti: Rnti,
    pub wb_cqi: Vec<Option<u8>>,
    pub ri: u8,
}

pub fn build_cqi_report(rnti: Rnti, ri: RiDecision, per_stream_cqi: &[(usize, u8)]) -> DlCqiInfo {
    let len = per_stream_cqi.iter().map(|&(s, _)| s + 1).max().unwrap_or(0);
    let mut wb_cqi = vec![None; len];
    for &(stream, cqi) in per_stream_cqi {
        wb_cqi[stream] = Some(cqi);
    }
    DlCqiInfo {
        rnti,
        wb_cqi,
        ri: ri.ri,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HarqAck {
    Ack,
    Nack,
}

/// Decode one stream's transport block at its combined SINR.
pub fn decode_tb<R: Rng + ?Sized>(
    tb: &TbInfo,
    effective_sinr_db: f64,
    model: &ErrorModel,
    rng: &mut R,
) -> Result<HarqAck> {
    mcs_entry(tb.mcs)?;
    let bler = model.bler(effective_sinr_db, tb.mcs)?;
    Ok(if rng.random::<f64>() < bler {
        HarqAck::Nack
    } else {
        HarqAck::Ack
    })
}

//! NR modulation-and-coding and CQI tables (256QAM variants).

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McsEntry {
    pub index: u8,
    /// Bits per modulation symbol.
    pub modulation_order: u8,
    /// Target code rate times 1024.
    pub code_rate_x1024: f64,
    /// Information bits per resource element.
    pub spectral_efficiency: f64,
}

const fn mcs(index: u8, modulation_order: u8, code_rate_x1024: f64, se: f64) -> McsEntry {
    McsEntry {
        index,
        modulation_order,
        code_rate_x1024,
        spectral_efficiency: se,
    }
}

static MCS_TABLE2: [McsEntry; 28] = [
    mcs(0, 2, 120.0, 0.2344),
    mcs(1, 2, 193.0, 0.3770),
    mcs(2, 2, 308.0, 0.6016),
    mcs(3, 2, 449.0, 0.8770),
    mcs(4, 2, 602.0, 1.1758),
    mcs(5, 4, 378.0, 1.4766),
    mcs(6, 4, 434.0, 1.6953),
    mcs(7, 4, 490.0, 1.9141),
    mcs(8, 4, 553.0, 2.1602),
    mcs(9, 4, 616.0, 2.4063),
    mcs(10, 4, 658.0, 2.5703),
    mcs(11, 6, 466.0, 2.7305),
    mcs(12, 6, 517.0, 3.0293),
    mcs(13, 6, 567.0, 3.3223),
    mcs(14, 6, 616.0, 3.6094),
    mcs(15, 6, 666.0, 3.9023),
    mcs(16, 6, 719.0, 4.2129),
    mcs(17, 6, 772.0, 4.5234),
    mcs(18, 6, 822.0, 4.8164),
    mcs(19, 6, 873.0, 5.1152),
    mcs(20, 8, 682.5, 5.3320),
    mcs(21, 8, 711.0, 5.5547),
    mcs(22, 8, 754.0, 5.8906),
    mcs(23, 8, 797.0, 6.2266),
    mcs(24, 8, 841.0, 6.5703),
    mcs(25, 8, 885.0, 6.9141),
    mcs(26, 8, 916.5, 7.1602),
    mcs(27, 8, 948.0, 7.4063),
];

/// Spectral efficiency of CQI 1..=15 (index 0 is "out of range").
static CQI_TABLE2_SE: [f64; 16] = [
    0.0, 0.1523, 0.3770, 0.8770, 1.4766, 1.9141, 2.4063, 2.7305, 3.3223, 3.9023, 4.5234,
    5.1152, 5.5547, 6.2266, 6.9141, 7.4063,
];

pub const MAX_CQI: u8 = 15;

/// The 28 usable entries of the 256QAM MCS table.
pub fn mcs_table2() -> &'static [McsEntry] {
    &MCS_TABLE2
}

pub fn mcs_entry(mcs: u8) -> Result<&'static McsEntry> {
    MCS_TABLE2.get(mcs as usize).ok_or(Error::InvalidMcs(mcs))
}

pub fn cqi_spectral_efficiency(cqi: u8) -> Option<f64> {
    CQI_TABLE2_SE.get(cqi as usize).copied()
}

/// MCS used for a reported CQI: the highest MCS whose spectral efficiency
/// does not exceed the CQI's. CQI 0 and CQI 1 map to MCS 0.
pub fn mcs_for_cqi(cqi: u8) -> u8 {
    let se = cqi_spectral_efficiency(cqi.min(MAX_CQI)).unwrap_or(0.0);
    MCS_TABLE2
        .iter()
        .rev()
        .find(|e| e.spectral_efficiency <= se + 1e-9)
        .map(|e| e.index)
        .unwrap_or(0)
}

/// Transport block size in bytes for a per-stream allocation.
pub fn tbs_bytes(mcs: u8, n_prb: u32, n_data_sym: u32, overhead: f64) -> Result<u32> {
    let entry = mcs_entry(mcs)?;
    if n_prb == 0 {
        return Err(Error::InvalidTbsArgs("at least one PRB is needed".into()));
    }
    if !(1..=14).contains(&n_data_sym) {
        return Err(Error::InvalidTbsArgs(format!(
            "data symbols must be in [1, 14], got {n_data_sym}"
        )));
    }
    if !(0.0..1.0).contains(&overhead) {
        return Err(Error::InvalidTbsArgs(format!(
            "overhead must be in [0, 1), got {overhead}"
        )));
    }
    let bits = entry.spectral_efficiency * (n_prb * 12 * n_data_sym) as f64 * (1.0 - overhead);
    Ok((bits / 8.0).floor() as u32)
}

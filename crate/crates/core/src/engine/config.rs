//! Scenario configuration, its defaults, and the `key = value` file format.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::antenna::ArrayConfig;
use crate::channel::{ChannelConfig, XpdModel};
use crate::error::{Error, Result};
use crate::mac::{SchedulerConfig, SchedulerMode};
use crate::phy::{ErrorModel, RiConfig, RiMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    UMi,
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "umi" | "umi-streetcanyon" => Ok(Scenario::UMi),
            _ => Err(Error::Config(format!("unknown scenario '{s}' (supported: UMi)"))),
        }
    }
}

/// Downlink constant-bit-rate packet source.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficConfig {
    pub packet_bytes: u32,
    /// Zero disables the source.
    pub offered_rate_bps: f64,
    pub start_s: f64,
    /// `None` means "until the end of the run".
    pub stop_s: Option<f64>,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            packet_bytes: 1000,
            offered_rate_bps: 250e6,
            start_s: 0.0,
            stop_s: None,
        }
    }
}

/// Maximum transmission bandwidth configuration (PRBs) for FR1 carriers.
pub fn prb_count(bandwidth_mhz: u32, numerology: u8) -> Option<u32> {
    let table: &[(u32, u32)] = match numerology {
        0 => &[(5, 25), (10, 52), (15, 79), (20, 106), (25, 133), (30, 160), (40, 216), (50, 270)],
        1 => &[
            (5, 11),
            (10, 24),
            (15, 38),
            (20, 51),
            (25, 65),
            (30, 78),
            (40, 106),
            (50, 133),
            (60, 162),
            (80, 217),
            (90, 245),
            (100, 273),
        ],
        2 => &[
            (10, 11),
            (15, 18),
            (20, 24),
            (25, 31),
            (30, 38),
            (40, 51),
            (50, 65),
            (60, 79),
            (80, 107),
            (90, 121),
            (100, 135),
        ],
        _ => return None,
    };
    table
        .iter()
        .find(|&&(bw, _)| bw == bandwidth_mhz)
        .map(|&(_, n)| n)
}

/// Everything that defines one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub distance_m: f64,
    pub scenario: Scenario,
    pub fc_ghz: f64,
    pub bandwidth_mhz: u32,
    pub numerology: u8,
    pub n_prb: u32,
    pub gnb_power_dbm: f64,
    pub gnb_height_m: f64,
    pub ue_height_m: f64,
    pub gnb_array: ArrayConfig,
    pub ue_array: ArrayConfig,
    pub ri_config: RiConfig,
    pub rho: f64,
    pub rng_run: u64,
    pub sim_duration_s: f64,
    pub traffic: TrafficConfig,
    pub noise_figure_db: f64,
    pub data_symbols: u8,
    pub overhead: f64,
    /// Slots between a transmission and the gNB acting on its ACK/NACK.
    pub harq_feedback_delay_slots: u64,
    /// Slots between a measurement and the gNB acting on its CQI/RI report.
    pub cqi_delay_slots: u64,
    pub harq_processes: usize,
    pub initial_mcs: u8,
    pub coherence_slots: u64,
    pub xpd: XpdModel,
    pub rician_k_db: f64,
    pub bler_sigma_db: f64,
    pub scheduler_mode: SchedulerMode,
    pub num_ues: usize,
    /// Azimuth separation between consecutive UEs as seen from the gNB.
    pub ue_spacing_deg: f64,
    pub mcs_table: u8,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            distance_m: 10.0,
            scenario: Scenario::UMi,
            fc_ghz: 3.5,
            bandwidth_mhz: 20,
            numerology: 0,
            n_prb: 106,
            gnb_power_dbm: 30.0,
            gnb_height_m: 10.0,
            ue_height_m: 1.5,
            gnb_array: ArrayConfig::gnb_default(),
            ue_array: ArrayConfig::ue_default(),
            ri_config: RiConfig::default(),
            rho: 0.0,
            rng_run: 1,
            sim_duration_s: 2.0,
            traffic: TrafficConfig::default(),
            noise_figure_db: 7.0,
            data_symbols: 12,
            overhead: 0.04,
            harq_feedback_delay_slots: 1,
            cqi_delay_slots: 2,
            harq_processes: 20,
            initial_mcs: 0,
            coherence_slots: 100,
            xpd: XpdModel::default(),
            rician_k_db: 10.0,
            bler_sigma_db: ErrorModel::DEFAULT_SIGMA_DB,
            scheduler_mode: SchedulerMode::Tdma,
            num_ues: 1,
            ue_spacing_deg: 0.0,
            mcs_table: 2,
        }
    }
}

pub const MAX_UES: usize = 8;

fn out_of_range(name: &'static str, value: f64, range: &'static str) -> Error {
    Error::OutOfRange { name, value, range }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for '{key}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid value '{value}' for '{key}'"))),
    }
}

impl ScenarioConfig {
    pub fn slot_duration_s(&self) -> f64 {
        1e-3 / f64::from(1u32 << self.numerology)
    }

    pub fn num_slots(&self) -> u64 {
        (self.sim_duration_s / self.slot_duration_s()).round() as u64
    }

    pub fn bandwidth_hz(&self) -> f64 {
        f64::from(self.bandwidth_mhz) * 1e6
    }

    pub fn traffic_stop_s(&self) -> f64 {
        self.traffic
            .stop_s
            .unwrap_or(self.sim_duration_s)
            .min(self.sim_duration_s)
    }

    pub fn channel_config(&self) -> ChannelConfig {
        ChannelConfig {
            fc_ghz: self.fc_ghz,
            coherence_slots: self.coherence_slots,
            xpd: self.xpd,
            rician_k_db: self.rician_k_db,
        }
    }

    pub fn scheduler_config(&self) -> SchedulerConfig {
        SchedulerConfig {
            n_prb: self.n_prb,
            first_data_symbol: 1,
            data_symbols: self.data_symbols,
            overhead: self.overhead,
            harq_processes: self.harq_processes,
            initial_mcs: self.initial_mcs,
            mode: self.scheduler_mode,
        }
    }

    pub fn error_model(&self) -> ErrorModel {
        ErrorModel::new(self.bler_sigma_db, ErrorModel::SHANNON_FRACTION)
    }

    pub fn validate(&self) -> Result<()> {
        let finite_pos = |name, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(out_of_range(name, v, "(0, inf)"))
            }
        };
        finite_pos("distance_m", self.distance_m)?;
        finite_pos("sim_duration_s", self.sim_duration_s)?;
        if !(self.traffic.offered_rate_bps >= 0.0 && self.traffic.offered_rate_bps.is_finite()) {
            return Err(out_of_range(
                "offered_rate_bps",
                self.traffic.offered_rate_bps,
                "[0, inf)",
            ));
        }
        if !(0.5..=100.0).contains(&self.fc_ghz) {
            return Err(out_of_range("fc_ghz", self.fc_ghz, "[0.5, 100]"));
        }
        if !(self.gnb_height_m > 1.0 && self.ue_height_m > 1.0) {
            return Err(Error::Config("antenna heights must exceed 1 m".into()));
        }
        match prb_count(self.bandwidth_mhz, self.numerology) {
            Some(n) if n == self.n_prb => {}
            Some(n) => {
                return Err(Error::Config(format!(
                    "n_prb {} does not match {} MHz at numerology {} ({n} PRBs)",
                    self.n_prb, self.bandwidth_mhz, self.numerology
                )))
            }
            None => {
                return Err(Error::Config(format!(
                    "unsupported bandwidth {} MHz at numerology {}",
                    self.bandwidth_mhz, self.numerology
                )))
            }
        }
        self.ri_config.validate()?;
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(out_of_range("rho", self.rho, "[0, 1]"));
        }
        if self.traffic.packet_bytes == 0 {
            return Err(Error::Config("packet_bytes must be at least 1".into()));
        }
        let stop = self.traffic_stop_s();
        if !(self.traffic.start_s >= 0.0 && self.traffic.start_s < stop) {
            return Err(Error::Config(format!(
                "traffic start {} s must lie in [0, {stop})",
                self.traffic.start_s
            )));
        }
        if !(1..=13).contains(&self.data_symbols) {
            return Err(out_of_range(
                "data_symbols",
                f64::from(self.data_symbols),
                "[1, 13]",
            ));
        }
        if !(0.0..1.0).contains(&self.overhead) {
            return Err(out_of_range("overhead", self.overhead, "[0, 1)"));
        }
        if self.harq_feedback_delay_slots == 0 || self.cqi_delay_slots == 0 {
            return Err(Error::Config("feedback delays must be at least one slot".into()));
        }
        if !(1..=256).contains(&self.harq_processes) {
            return Err(out_of_range(
                "harq_processes",
                self.harq_processes as f64,
                "[1, 256]",
            ));
        }
        if self.initial_mcs > 27 {
            return Err(Error::InvalidMcs(self.initial_mcs));
        }
        if self.coherence_slots == 0 {
            return Err(Error::Config("coherence_slots must be at least 1".into()));
        }
        if !(self.bler_sigma_db > 0.0 && self.bler_sigma_db.is_finite()) {
            return Err(out_of_range("bler_sigma_db", self.bler_sigma_db, "(0, inf)"));
        }
        if !(1..=MAX_UES).contains(&self.num_ues) {
            return Err(out_of_range("num_ues", self.num_ues as f64, "[1, 8]"));
        }
        if self.mcs_table != 2 {
            return Err(Error::Config(format!(
                "MCS table {} is not supported (only table 2)",
                self.mcs_table
            )));
        }
        Ok(())
    }

    /// Apply one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "distance_m" => self.distance_m = parse(key, v)?,
            "scenario" => self.scenario = v.parse()?,
            "fc_ghz" => self.fc_ghz = parse(key, v)?,
            "bandwidth_mhz" => {
                self.bandwidth_mhz = parse(key, v)?;
                if let Some(n) = prb_count(self.bandwidth_mhz, self.numerology) {
                    self.n_prb = n;
                }
            }
            "numerology" => {
                self.numerology = parse(key, v)?;
                if let Some(n) = prb_count(self.bandwidth_mhz, self.numerology) {
                    self.n_prb = n;
                }
            }
            "n_prb" => self.n_prb = parse(key, v)?,
            "gnb_power_dbm" => self.gnb_power_dbm = parse(key, v)?,
            "gnb_height_m" => self.gnb_height_m = parse(key, v)?,
            "ue_height_m" => self.ue_height_m = parse(key, v)?,
            "ri_scheme" => {
                self.ri_config.mode = match v.to_ascii_lowercase().as_str() {
                    "fixed" => RiMode::Fixed,
                    "adaptive" => RiMode::Adaptive,
                    _ => return Err(Error::Config(format!("invalid ri_scheme '{v}'"))),
                }
            }
            "fixed_ri" => self.ri_config.fixed_ri = parse(key, v)?,
            "threshold1_db" => self.ri_config.threshold1_db = parse(key, v)?,
            "threshold2_db" => self.ri_config.threshold2_db = parse(key, v)?,
            "rho" => self.rho = parse(key, v)?,
            "rng_run" => self.rng_run = parse(key, v)?,
            "sim_duration_s" | "duration_s" => self.sim_duration_s = parse(key, v)?,
            "packet_bytes" => self.traffic.packet_bytes = parse(key, v)?,
            "offered_rate_bps" => self.traffic.offered_rate_bps = parse(key, v)?,
            "traffic_start_s" => self.traffic.start_s = parse(key, v)?,
            "traffic_stop_s" => self.traffic.stop_s = Some(parse(key, v)?),
            "noise_figure_db" => self.noise_figure_db = parse(key, v)?,
            "data_symbols" => self.data_symbols = parse(key, v)?,
            "overhead" => self.overhead = parse(key, v)?,
            "harq_feedback_delay_slots" => self.harq_feedback_delay_slots = parse(key, v)?,
            "cqi_delay_slots" => self.cqi_delay_slots = parse(key, v)?,
            "harq_processes" => self.harq_processes = parse(key, v)?,
            "initial_mcs" => self.initial_mcs = parse(key, v)?,
            "coherence_slots" => self.coherence_slots = parse(key, v)?,
            "xpd_model" => {
                self.xpd = match v.to_ascii_lowercase().as_str() {
                    "gaussian" => XpdModel::default(),
                    "isolation" => XpdModel::Isolation,
                    other => match other.strip_prefix("fixed:") {
                        Some(db) => XpdModel::Fixed(parse(key, db)?),
                        None => return Err(Error::Config(format!("invalid xpd_model '{v}'"))),
                    },
                }
            }
            "rician_k_db" => self.rician_k_db = parse(key, v)?,
            "bler_sigma_db" => self.bler_sigma_db = parse(key, v)?,
            "scheduler" => {
                self.scheduler_mode = match v.to_ascii_lowercase().as_str() {
                    "tdma" => SchedulerMode::Tdma,
                    "ofdma" => SchedulerMode::Ofdma,
                    _ => return Err(Error::Config(format!("invalid scheduler '{v}'"))),
                }
            }
            "num_ues" => self.num_ues = parse(key, v)?,
            "ue_spacing_deg" => self.ue_spacing_deg = parse(key, v)?,
            "mcs_table" => self.mcs_table = parse(key, v)?,
            "gnb_downtilt_deg" => {
                let mut o = self.gnb_array.orientation();
                o.downtilt_deg = parse(key, v)?;
                self.gnb_array = self.gnb_array.clone().with_orientation(o);
            }
            "enable_isolation" => {
                if parse_bool(key, v)? {
                    self.xpd = XpdModel::Isolation;
                }
            }
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Parse a config file: one `key = value` per line, `#` starts a comment.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_config_str(text)?;
        Ok(cfg)
    }

    pub fn apply_config_str(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", i + 1))
            })?;
            self.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    /// The settable scalar fields in config-file syntax.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let scheme = match self.ri_config.mode {
            RiMode::Fixed => "fixed",
            RiMode::Adaptive => "adaptive",
        };
        let xpd = match self.xpd {
            XpdModel::Gaussian { .. } => "gaussian".to_string(),
            XpdModel::Fixed(v) => format!("fixed:{v}"),
            XpdModel::Isolation => "isolation".to_string(),
        };
        let sched = match self.scheduler_mode {
            SchedulerMode::Tdma => "tdma",
            SchedulerMode::Ofdma => "ofdma",
        };
        let stop = self
            .traffic
            .stop_s
            .map(|v| format!("traffic_stop_s = {v}\n"))
            .unwrap_or_default();
        let _ = write!(
            s,
            "distance_m = {}\nscenario = UMi\nfc_ghz = {}\nbandwidth_mhz = {}\nnumerology = {}\n\
             n_prb = {}\ngnb_power_dbm = {}\ngnb_height_m = {}\nue_height_m = {}\n\
             ri_scheme = {scheme}\nfixed_ri = {}\nthreshold1_db = {}\nthreshold2_db = {}\n\
             rho = {}\nrng_run = {}\nsim_duration_s = {}\npacket_bytes = {}\n\
             offered_rate_bps = {}\ntraffic_start_s = {}\n{stop}noise_figure_db = {}\n\
             data_symbols = {}\noverhead = {}\nharq_feedback_delay_slots = {}\n\
             cqi_delay_slots = {}\nharq_processes = {}\ninitial_mcs = {}\n\
             coherence_slots = {}\nxpd_model = {xpd}\nrician_k_db = {}\nbler_sigma_db = {}\n\
             scheduler = {sched}\nnum_ues = {}\nue_spacing_deg = {}\nmcs_table = {}\n\
             gnb_downtilt_deg = {}\n",
            self.distance_m,
            self.fc_ghz,
            self.bandwidth_mhz,
            self.numerology,
            self.n_prb,
            self.gnb_power_dbm,
            self.gnb_height_m,
            self.ue_height_m,
            self.ri_config.fixed_ri,
            self.ri_config.threshold1_db,
            self.ri_config.threshold2_db,
            self.rho,
            self.rng_run,
            self.sim_duration_s,
            self.traffic.packet_bytes,
            self.traffic.offered_rate_bps,
            self.traffic.start_s,
            self.noise_figure_db,
            self.data_symbols,
            self.overhead,
            self.harq_feedback_delay_slots,
            self.cqi_delay_slots,
            self.harq_processes,
            self.initial_mcs,
            self.coherence_slots,
            self.rician_k_db,
            self.bler_sigma_db,
            self.num_ues,
            self.ue_spacing_deg,
            self.mcs_table,
            self.gnb_array.orientation().downtilt_deg,
        );
        s
    }
}

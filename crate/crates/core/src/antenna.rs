//! Dual-polarized uniform planar arrays split into per-polarization subarrays.
//!
//! An `M x N` panel carries `P` co-located elements per lattice position, one
//! per polarization. All elements sharing a polarization slant form one
//! [`SubarrayPartition`], which is driven by its own RF chain and beamforming
//! vector and therefore carries one spatial stream.
//!
//! Element positions lie on the local y-z plane (the array faces local +x).
//! Element `k` of a partition sits at column `k / M`, row `k % M`
//! (column-major), i.e. at `(y, z) = (col * dh, row * dv)` in wavelengths.
//! Angles follow the usual spherical convention: zenith 0 points up, 90 is the
//! horizon, azimuth 0 is local boresight.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Peak gain of the 3GPP directional element, dBi.
pub const DIRECTIONAL_MAX_GAIN_DBI: f64 = 8.0;
const DIRECTIONAL_BEAMWIDTH_DEG: f64 = 65.0;
const DIRECTIONAL_SLA_DB: f64 = 30.0;
const DIRECTIONAL_AMAX_DB: f64 = 30.0;

/// Floor used instead of `-inf` for nulls of the array response.
pub const GAIN_FLOOR_DB: f64 = -300.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementPattern {
    Isotropic,
    /// Single sector element with 65 degree beamwidth and 8 dBi peak gain.
    Directional3gpp,
}

impl ElementPattern {
    /// Element power gain in dB at a local direction.
    pub fn gain_db(self, zenith_deg: f64, azimuth_deg: f64) -> f64 {
        match self {
            ElementPattern::Isotropic => 0.0,
            ElementPattern::Directional3gpp => {
                let vertical = -(12.0 * ((zenith_deg - 90.0) / DIRECTIONAL_BEAMWIDTH_DEG).powi(2))
                    .min(DIRECTIONAL_SLA_DB);
                let horizontal = -(12.0 * (azimuth_deg / DIRECTIONAL_BEAMWIDTH_DEG).powi(2))
                    .min(DIRECTIONAL_AMAX_DB);
                DIRECTIONAL_MAX_GAIN_DBI - (-(vertical + horizontal)).min(DIRECTIONAL_AMAX_DB)
            }
        }
    }
}

/// Mechanical orientation of a panel.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Orientation {
    pub bearing_deg: f64,
    pub downtilt_deg: f64,
}

/// A propagation direction in spherical coordinates (degrees).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    pub azimuth_deg: f64,
    pub zenith_deg: f64,
}

impl Direction {
    pub fn new(azimuth_deg: f64, zenith_deg: f64) -> Self {
        Self {
            azimuth_deg,
            zenith_deg,
        }
    }

    /// Local boresight of an unrotated panel.
    pub fn boresight() -> Self {
        Self::new(0.0, 90.0)
    }

    /// Direction from `from` to `to`, both given as `(x, y, z)` in meters.
    pub fn between(from: [f64; 3], to: [f64; 3]) -> Self {
        let dx = to[0] - from[0];
        let dy = to[1] - from[1];
        let dz = to[2] - from[2];
        let horizontal = dx.hypot(dy);
        Self {
            azimuth_deg: dy.atan2(dx).to_degrees(),
            zenith_deg: horizontal.atan2(dz).to_degrees(),
        }
    }

    /// Rotate a global direction into the local frame of a panel.
    pub fn to_local(self, orientation: Orientation) -> Direction {
        if orientation.bearing_deg == 0.0 && orientation.downtilt_deg == 0.0 {
            return self;
        }
        let theta = self.zenith_deg.to_radians();
        let dphi = (self.azimuth_deg - orientation.bearing_deg).to_radians();
        let beta = orientation.downtilt_deg.to_radians();
        let cos_local = (beta.cos() * theta.cos() + beta.sin() * dphi.cos() * theta.sin())
            .clamp(-1.0, 1.0);
        let x = beta.cos() * theta.sin() * dphi.cos() - beta.sin() * theta.cos();
        let y = dphi.sin() * theta.sin();
        Direction {
            azimuth_deg: y.atan2(x).to_degrees(),
            zenith_deg: cos_local.acos().to_degrees(),
        }
    }
}

/// Shape, spacing, element type and polarizations of a planar array.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayConfig {
    rows: usize,
    cols: usize,
    dv: f64,
    dh: f64,
    element_pattern: ElementPattern,
    orientation: Orientation,
    pol_slant_angles: Vec<f64>,
}

impl ArrayConfig {
    /// `rows` elements per column and `cols` columns for every polarization;
    /// one slant angle per polarization (at most two). Spacings default to
    /// half a wavelength.
    pub fn new(
        rows: usize,
        cols: usize,
        pol_slant_angles: Vec<f64>,
        element_pattern: ElementPattern,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArray(format!(
                "array needs at least one element, got {rows}x{cols}"
            )));
        }
        if !(1..=2).contains(&pol_slant_angles.len()) {
            return Err(Error::InvalidArray(format!(
                "polarization count must be 1 or 2, got {}",
                pol_slant_angles.len()
            )));
        }
        if pol_slant_angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidArray("slant angles must be finite".into()));
        }
        Ok(Self {
            rows,
            cols,
            dv: 0.5,
            dh: 0.5,
            element_pattern,
            orientation: Orientation::default(),
            pol_slant_angles,
        })
    }

    pub fn with_spacing(mut self, dv: f64, dh: f64) -> Result<Self> {
        if !(dv > 0.0 && dh > 0.0 && dv.is_finite() && dh.is_finite()) {
            return Err(Error::InvalidArray(format!(
                "element spacing must be strictly positive, got dv={dv} dh={dh}"
            )));
        }
        self.dv = dv;
        self.dh = dh;
        Ok(self)
    }

    pub fn with_orientation(mut self, orientation: Orientation) -> Self {
        self.orientation = orientation;
        self
    }

    /// 2x2 dual-polarized (+45/-45) panel of directional elements.
    pub fn gnb_default() -> Self {
        Self::new(2, 2, vec![45.0, -45.0], ElementPattern::Directional3gpp)
            .expect("static configuration")
    }

    /// 1x1 dual-polarized (+45/-45) isotropic element pair.
    pub fn ue_default() -> Self {
        Self::new(1, 1, vec![45.0, -45.0], ElementPattern::Isotropic)
            .expect("static configuration")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn polarizations(&self) -> usize {
        self.pol_slant_angles.len()
    }

    pub fn spacing(&self) -> (f64, f64) {
        (self.dv, self.dh)
    }

    pub fn element_pattern(&self) -> ElementPattern {
        self.element_pattern
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn pol_slant_angles(&self) -> &[f64] {
        &self.pol_slant_angles
    }

    pub fn elements_per_partition(&self) -> usize {
        self.rows * self.cols
    }

    /// Position `(y, z)` in wavelengths of element `k` within a partition.
    pub fn element_position(&self, k: usize) -> (f64, f64) {
        let col = k / self.rows;
        let row = k % self.rows;
        (col as f64 * self.dh, row as f64 * self.dv)
    }

    fn phase(&self, k: usize, local: Direction) -> f64 {
        let (y, z) = self.element_position(k);
        let theta = local.zenith_deg.to_radians();
        let phi = local.azimuth_deg.to_radians();
        2.0 * PI * (y * theta.sin() * phi.sin() + z * theta.cos())
    }
}

/// All elements of one polarization, with their beamforming vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SubarrayPartition {
    partition_index: usize,
    pol_slant_deg: f64,
    weights: Vec<Complex64>,
}

impl SubarrayPartition {
    pub fn partition_index(&self) -> usize {
        self.partition_index
    }

    pub fn pol_slant_deg(&self) -> f64 {
        self.pol_slant_deg
    }

    pub fn num_elements(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    /// Replace the beamforming vector. It must have one entry per element and
    /// unit Euclidean norm.
    pub fn set_weights(&mut self, weights: Vec<Complex64>) -> Result<()> {
        if weights.len() != self.weights.len() {
            return Err(Error::InvalidArray(format!(
                "expected {} weights, got {}",
                self.weights.len(),
                weights.len()
            )));
        }
        let norm = weights.iter().map(|w| w.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArray(format!(
                "beamforming vector norm is {norm}, expected 1"
            )));
        }
        self.weights = weights;
        Ok(())
    }

    /// Point this partition's beam at `direction`.
    pub fn steer(&mut self, direction: Direction, config: &ArrayConfig) {
        self.weights = steering_weights(self, direction, config);
    }
}

/// Split an array into one partition per polarization, each starting with
/// uniform in-phase weights.
pub fn build_subarrays(config: &ArrayConfig) -> Vec<SubarrayPartition> {
    let n = config.elements_per_partition();
    let w = Complex64::new(1.0 / (n as f64).sqrt(), 0.0);
    config
        .pol_slant_angles
        .iter()
        .enumerate()
        .map(|(i, &slant)| SubarrayPartition {
            partition_index: i,
            pol_slant_deg: slant,
            weights: vec![w; n],
        })
        .collect()
}

/// Vertical and horizontal field components of a slanted element
/// (local direction, degrees).
pub fn element_field(
    zenith_deg: f64,
    azimuth_deg: f64,
    slant_deg: f64,
    pattern: ElementPattern,
) -> (f64, f64) {
    let amplitude = 10f64.powf(pattern.gain_db(zenith_deg, azimuth_deg) / 20.0);
    let slant = slant_deg.to_radians();
    (amplitude * slant.cos(), amplitude * slant.sin())
}

/// Conjugate phase-alignment weights for `direction` (global frame).
pub fn steering_weights(
    partition: &SubarrayPartition,
    direction: Direction,
    config: &ArrayConfig,
) -> Vec<Complex64> {
    let n = partition.num_elements();
    let local = direction.to_local(config.orientation);
    let scale = 1.0 / (n as f64).sqrt();
    (0..n)
        .map(|k| Complex64::from_polar(scale, config.phase(k, local)))
        .collect()
}

/// Gain in dB of a weighted partition toward `direction` (global frame),
/// including the element pattern.
pub fn array_gain(
    partition: &SubarrayPartition,
    weights: &[Complex64],
    direction: Direction,
    config: &ArrayConfig,
) -> f64 {
    let local = direction.to_local(config.orientation);
    let response: Complex64 = weights
        .iter()
        .enumerate()
        .map(|(k, w)| w.conj() * Complex64::from_polar(1.0, config.phase(k, local)))
        .sum();
    let (f_theta, f_phi) = element_field(
        local.zenith_deg,
        local.azimuth_deg,
        partition.pol_slant_deg,
        config.element_pattern,
    );
    let power = response.norm_sqr() * (f_theta * f_theta + f_phi * f_phi);
    if power > 0.0 {
        (10.0 * power.log10()).max(GAIN_FLOOR_DB)
    } else {
        GAIN_FLOOR_DB
    }
}

/// Steering direction quantized to 0.01 degree, used to compare beams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BeamId {
    azimuth_centideg: i32,
    elevation_centideg: i32,
}

impl BeamId {
    pub fn from_direction(direction: Direction) -> Self {
        let mut az = (direction.azimuth_deg * 100.0).round() as i64;
        az = (az + 18_000).rem_euclid(36_000) - 18_000;
        let el = ((direction.zenith_deg * 100.0).round() as i64).clamp(0, 18_000);
        Self {
            azimuth_centideg: az as i32,
            elevation_centideg: el as i32,
        }
    }

    pub fn azimuth_deg(&self) -> f64 {
        self.azimuth_centideg as f64 / 100.0
    }

    pub fn elevation_deg(&self) -> f64 {
        self.elevation_centideg as f64 / 100.0
    }
}

/// The beam used on each of the (up to two) streams toward one UE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BeamConfId {
    beam_per_stream: [Option<BeamId>; 2],
}

impl BeamConfId {
    /// Returns `None` when no stream carries a beam.
    pub fn new(stream0: Option<BeamId>, stream1: Option<BeamId>) -> Option<Self> {
        (stream0.is_some() || stream1.is_some()).then_some(Self {
            beam_per_stream: [stream0, stream1],
        })
    }

    pub fn beam(&self, stream: usize) -> Option<BeamId> {
        self.beam_per_stream.get(stream).copied().flatten()
    }
}

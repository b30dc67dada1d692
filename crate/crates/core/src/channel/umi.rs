//! Urban Micro street-canyon large-scale propagation.

use crate::error::{Error, Result};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;
const ENVIRONMENT_HEIGHT_M: f64 = 1.0;

pub const SHADOWING_STD_LOS_DB: f64 = 4.0;
pub const SHADOWING_STD_NLOS_DB: f64 = 7.82;

/// Probability of line of sight at a horizontal distance.
pub fn los_probability(distance_2d_m: f64) -> f64 {
    if distance_2d_m <= 18.0 {
        1.0
    } else {
        let r = 18.0 / distance_2d_m;
        r + (-distance_2d_m / 36.0).exp() * (1.0 - r)
    }
}

pub fn shadowing_std_db(los: bool) -> f64 {
    if los {
        SHADOWING_STD_LOS_DB
    } else {
        SHADOWING_STD_NLOS_DB
    }
}

/// Breakpoint distance in meters.
pub fn breakpoint_distance_m(fc_ghz: f64, h_bs_m: f64, h_ut_m: f64) -> f64 {
    4.0 * (h_bs_m - ENVIRONMENT_HEIGHT_M) * (h_ut_m - ENVIRONMENT_HEIGHT_M) * fc_ghz * 1e9
        / SPEED_OF_LIGHT
}

fn los_pathloss(d2d: f64, d3d: f64, fc_ghz: f64, h_bs: f64, h_ut: f64) -> f64 {
    let bp = breakpoint_distance_m(fc_ghz, h_bs, h_ut);
    if d2d <= bp {
        32.4 + 21.0 * d3d.log10() + 20.0 * fc_ghz.log10()
    } else {
        32.4 + 40.0 * d3d.log10() + 20.0 * fc_ghz.log10()
            - 9.5 * (bp * bp + (h_bs - h_ut).powi(2)).log10()
    }
}

/// Pathloss in dB. NLOS is lower-bounded by the LOS value at the same
/// geometry.
pub fn pathloss_db(
    los: bool,
    distance_2d_m: f64,
    distance_3d_m: f64,
    fc_ghz: f64,
    h_bs_m: f64,
    h_ut_m: f64,
) -> Result<f64> {
    if !(0.5..=100.0).contains(&fc_ghz) {
        return Err(Error::OutOfRange {
            name: "fc_ghz",
            value: fc_ghz,
            range: "[0.5, 100]",
        });
    }
    if !(distance_3d_m >= 1.0) {
        return Err(Error::OutOfRange {
            name: "distance_3d_m",
            value: distance_3d_m,
            range: ">= 1",
        });
    }
    if !(distance_2d_m >= 0.0) || distance_2d_m > distance_3d_m {
        return Err(Error::OutOfRange {
            name: "distance_2d_m",
            value: distance_2d_m,
            range: "[0, distance_3d_m]",
        });
    }
    if !(h_bs_m > ENVIRONMENT_HEIGHT_M && h_ut_m > ENVIRONMENT_HEIGHT_M) {
        return Err(Error::OutOfRange {
            name: "antenna height",
            value: h_bs_m.min(h_ut_m),
            range: "> 1 m",
        });
    }
    let los_pl = los_pathloss(distance_2d_m, distance_3d_m, fc_ghz, h_bs_m, h_ut_m);
    if los {
        return Ok(los_pl);
    }
    let nlos_pl =
        35.3 * distance_3d_m.log10() + 22.4 + 21.3 * fc_ghz.log10() - 0.3 * (h_ut_m - 1.5);
    Ok(los_pl.max(nlos_pl))
}

//! Solar position and incidence geometry.
//!
//! Position follows the low-precision almanac of Michalsky (1988): mean
//! longitude and anomaly, ecliptic longitude, declination and right
//! ascension, then the hour angle from local mean sidereal time. Hour angle
//! is therefore apparent solar time (equation of time included). Refraction
//! is not applied.
//!
//! Azimuth convention for panels: 0 = facing due south, positive towards
//! west, negative towards east. All angles are radians.

use std::f64::consts::{FRAC_PI_2, PI};

use chrono::{DateTime, Datelike, Timelike, Utc};

use crate::error::{Error, Result};
use crate::ingest::StationMeta;

/// Total solar irradiance at one astronomical unit, W/m².
pub const SOLAR_CONSTANT: f64 = 1361.1;

const FIRST_YEAR: i32 = 1950;
const LAST_YEAR: i32 = 2100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolarPosition {
    pub declination: f64,
    /// Zero at solar noon, positive in the afternoon.
    pub hour_angle: f64,
    pub elevation: f64,
    pub zenith: f64,
    /// `(r0 / r)^2`, the inverse-square distance correction.
    pub eccentricity_factor: f64,
}

impl SolarPosition {
    /// Elevation from declination, hour angle and latitude:
    /// `sin e = sin φ sin δ + cos φ cos δ cos h`.
    pub fn from_angles(
        declination: f64,
        hour_angle: f64,
        latitude: f64,
        eccentricity_factor: f64,
    ) -> Self {
        let sin_e = latitude.sin() * declination.sin()
            + latitude.cos() * declination.cos() * hour_angle.cos();
        let elevation = sin_e.clamp(-1.0, 1.0).asin();
        Self {
            declination,
            hour_angle,
            elevation,
            zenith: FRAC_PI_2 - elevation,
            eccentricity_factor,
        }
    }

    pub fn cos_zenith(&self) -> f64 {
        self.zenith.cos()
    }

    /// Apparent solar time in hours, 12 at solar noon.
    pub fn apparent_solar_time(&self) -> f64 {
        12.0 + self.hour_angle.to_degrees() / 15.0
    }

    pub fn is_daylight(&self) -> bool {
        self.elevation > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanelOrientation {
    pub tilt: f64,
    pub azimuth: f64,
}

impl PanelOrientation {
    pub fn new(tilt: f64, azimuth: f64) -> Result<Self> {
        if !(0.0..=FRAC_PI_2 + 1e-12).contains(&tilt) || !azimuth.is_finite() {
            return Err(Error::Domain(format!(
                "tilt {tilt} rad outside [0, pi/2] or non-finite azimuth"
            )));
        }
        Ok(Self {
            tilt: tilt.min(FRAC_PI_2),
            azimuth,
        })
    }

    pub fn from_degrees(tilt_deg: f64, azimuth_deg: f64) -> Result<Self> {
        Self::new(tilt_deg.to_radians(), azimuth_deg.to_radians())
    }

    pub fn horizontal() -> Self {
        Self {
            tilt: 0.0,
            azimuth: 0.0,
        }
    }
}

fn julian_day(time: DateTime<Utc>) -> f64 {
    let secs = time.timestamp() as f64 + f64::from(time.timestamp_subsec_nanos()) * 1e-9;
    secs / 86_400.0 + 2_440_587.5
}

pub fn solar_position(time: DateTime<Utc>, site: &StationMeta) -> Result<SolarPosition> {
    if !(FIRST_YEAR..=LAST_YEAR).contains(&time.year()) {
        return Err(Error::Range(format!(
            "{time} outside the {FIRST_YEAR}-{LAST_YEAR} validity window"
        )));
    }
    if !site.latitude.is_finite() || !site.longitude.is_finite() {
        return Err(Error::Domain("non-finite site coordinates".into()));
    }
    // Days since J2000.0.
    let n = julian_day(time) - 2_451_545.0;
    let hour = f64::from(time.num_seconds_from_midnight()) / 3600.0
        + f64::from(time.timestamp_subsec_nanos()) * 1e-9 / 3600.0;

    let mean_long = (280.460 + 0.985_647_4 * n).rem_euclid(360.0);
    let mean_anom = (357.528 + 0.985_600_3 * n).rem_euclid(360.0).to_radians();
    let ecl_long = (mean_long + 1.915 * mean_anom.sin() + 0.020 * (2.0 * mean_anom).sin())
        .rem_euclid(360.0)
        .to_radians();
    let obliquity = (23.439 - 0.000_000_4 * n).to_radians();

    let right_ascension = (obliquity.cos() * ecl_long.sin())
        .atan2(ecl_long.cos())
        .rem_euclid(2.0 * PI);
    let declination = (obliquity.sin() * ecl_long.sin()).asin();

    let gmst = (6.697_375 + 0.065_709_824_2 * n + hour).rem_euclid(24.0);
    let lmst = (gmst + site.longitude / 15.0).rem_euclid(24.0);
    let mut hour_angle = (lmst * 15.0).to_radians() - right_ascension;
    hour_angle = (hour_angle + PI).rem_euclid(2.0 * PI) - PI;

    let distance = 1.000_14 - 0.016_71 * mean_anom.cos() - 0.000_14 * (2.0 * mean_anom).cos();
    let eccentricity_factor = 1.0 / (distance * distance);

    Ok(SolarPosition::from_angles(
        declination,
        hour_angle,
        site.latitude.to_radians(),
        eccentricity_factor,
    ))
}

/// Cosine of the angle between the sun's rays and the panel normal.
pub fn cos_incidence(pos: &SolarPosition, site: &StationMeta, panel: &PanelOrientation) -> f64 {
    let (sd, cd) = pos.declination.sin_cos();
    let (sp, cp) = site.latitude.to_radians().sin_cos();
    let (sb, cb) = panel.tilt.sin_cos();
    let (sg, cg) = panel.azimuth.sin_cos();
    let (sh, ch) = pos.hour_angle.sin_cos();
    let c = sd * sp * cb - sd * cp * sb * cg
        + cd * cp * cb * ch
        + cd * sp * sb * cg * ch
        + cd * sb * sg * sh;
    c.clamp(-1.0, 1.0)
}

/// Extraterrestrial irradiance on a horizontal plane, W/m².
pub fn extraterrestrial_horizontal(pos: &SolarPosition, solar_constant: f64) -> f64 {
    solar_constant * pos.eccentricity_factor * pos.cos_zenith().max(0.0)
}

/// Extraterrestrial irradiance normal to the sun's rays, W/m².
pub fn extraterrestrial_normal(pos: &SolarPosition, solar_constant: f64) -> f64 {
    solar_constant * pos.eccentricity_factor
}

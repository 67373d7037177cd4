//! Spherical azimuthal-equidistant projection centred on Ireland.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EARTH_RADIUS_KM: f64 = 6371.0088;
pub const CENTER_LAT: f64 = 53.5;
pub const CENTER_LON: f64 = -8.0;

const LAT_RANGE: (f64, f64) = (50.0, 57.0);
const LON_RANGE: (f64, f64) = (-12.0, -4.0);

/// Planar coordinates in kilometres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarPoint {
    pub east: f64,
    pub north: f64,
}

impl PlanarPoint {
    pub const fn new(east: f64, north: f64) -> Self {
        Self { east, north }
    }

    pub fn distance(&self, other: &Self) -> f64 {
        (self.east - other.east).hypot(self.north - other.north)
    }
}

fn in_box(lat: f64, lon: f64) -> bool {
    (LAT_RANGE.0..=LAT_RANGE.1).contains(&lat) && (LON_RANGE.0..=LON_RANGE.1).contains(&lon)
}

pub fn project(lat: f64, lon: f64) -> Result<PlanarPoint> {
    if !in_box(lat, lon) {
        return Err(Error::Domain(format!(
            "({lat}, {lon}) outside the supported box [{}, {}]N x [{}, {}]E",
            LAT_RANGE.0, LAT_RANGE.1, LON_RANGE.0, LON_RANGE.1
        )));
    }
    let (p0, l0) = (CENTER_LAT.to_radians(), CENTER_LON.to_radians());
    let (p, l) = (lat.to_radians(), lon.to_radians());
    let dl = l - l0;
    let cos_c = p0.sin() * p.sin() + p0.cos() * p.cos() * dl.cos();
    let c = cos_c.clamp(-1.0, 1.0).acos();
    let k = if c < 1e-12 { 1.0 } else { c / c.sin() };
    Ok(PlanarPoint {
        east: EARTH_RADIUS_KM * k * p.cos() * dl.sin(),
        north: EARTH_RADIUS_KM * k * (p0.cos() * p.sin() - p0.sin() * p.cos() * dl.cos()),
    })
}

/// Inverse projection, returning `(lat, lon)` in degrees.
pub fn unproject(pt: PlanarPoint) -> Result<(f64, f64)> {
    if !pt.east.is_finite() || !pt.north.is_finite() {
        return Err(Error::Domain("non-finite planar point".into()));
    }
    let (p0, l0) = (CENTER_LAT.to_radians(), CENTER_LON.to_radians());
    let rho = pt.east.hypot(pt.north);
    if rho < 1e-12 {
        return Ok((CENTER_LAT, CENTER_LON));
    }
    let c = rho / EARTH_RADIUS_KM;
    let (sc, cc) = c.sin_cos();
    let lat = (cc * p0.sin() + pt.north * sc * p0.cos() / rho)
        .clamp(-1.0, 1.0)
        .asin();
    let lon = l0 + (pt.east * sc).atan2(rho * p0.cos() * cc - pt.north * p0.sin() * sc);
    let (lat, lon) = (lat.to_degrees(), lon.to_degrees());
    if !in_box(lat, lon) {
        return Err(Error::Domain(format!(
            "({:.3}, {:.3}) km maps outside the supported box",
            pt.east, pt.north
        )));
    }
    Ok((lat, lon))
}

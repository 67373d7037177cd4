//! Split of global horizontal irradiance into beam and diffuse parts.
//!
//! The diffuse fraction comes from a logistic regression on five predictors
//! (clearness index, apparent solar time, solar altitude, daily clearness
//! index and persistence). Coefficients are loaded from a key-value profile;
//! the bundled `brl-2010` profile is the global fit of Ridley, Boland and
//! Lauret (2010).

use std::path::Path;

use chrono::{DateTime, Utc};

use crate::error::{Error, Result};
use crate::ingest::{day_start, StationMeta};
use crate::solargeom::{self, SolarPosition, SOLAR_CONSTANT};

const BRL_2010: &str = include_str!("../data/brl-2010.profile");

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrradianceComponents {
    pub ghi: f64,
    pub dni: f64,
    pub dhi: f64,
    pub bhi: f64,
    pub zenith: f64,
}

impl IrradianceComponents {
    pub fn night(zenith: f64) -> Self {
        Self {
            ghi: 0.0,
            dni: 0.0,
            dhi: 0.0,
            bhi: 0.0,
            zenith,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffuseFractionInputs {
    pub clearness_index: f64,
    /// Hours.
    pub apparent_solar_time: f64,
    /// Radians.
    pub elevation: f64,
    pub daily_kt: f64,
    pub persistence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticCoefficients {
    pub intercept: f64,
    pub kt: f64,
    pub ast: f64,
    /// Applied to the solar altitude in degrees.
    pub altitude_deg: f64,
    pub daily_kt: f64,
    pub persistence: f64,
}

impl LogisticCoefficients {
    pub fn brl_2010() -> Self {
        Self::parse(BRL_2010).expect("bundled profile parses")
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut vals: [Option<f64>; 6] = [None; 6];
        const KEYS: [&str; 6] = [
            "intercept",
            "kt",
            "ast",
            "altitude_deg",
            "daily_kt",
            "persistence",
        ];
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("profile line {}: expected key = value", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            let slot = KEYS
                .iter()
                .position(|key| *key == k)
                .ok_or_else(|| Error::Config(format!("profile line {}: unknown key '{k}'", n + 1)))?;
            let v: f64 = v
                .parse()
                .map_err(|_| Error::Config(format!("profile line {}: bad number '{v}'", n + 1)))?;
            vals[slot] = Some(v);
        }
        let get = |i: usize| vals[i].ok_or_else(|| Error::Config(format!("profile lacks '{}'", KEYS[i])));
        let c = Self {
            intercept: get(0)?,
            kt: get(1)?,
            ast: get(2)?,
            altitude_deg: get(3)?,
            daily_kt: get(4)?,
            persistence: get(5)?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.intercept,
            self.kt,
            self.ast,
            self.altitude_deg,
            self.daily_kt,
            self.persistence,
        ];
        if all.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Config("non-finite logistic coefficient".into()))
        }
    }

    pub fn linear_predictor(&self, x: &DiffuseFractionInputs) -> f64 {
        self.intercept
            + self.kt * x.clearness_index
            + self.ast * x.apparent_solar_time
            + self.altitude_deg * x.elevation.to_degrees()
            + self.daily_kt * x.daily_kt
            + self.persistence * x.persistence
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionSettings {
    /// Beyond this zenith all GHI is diffuse. Radians.
    pub zenith_cap: f64,
    pub solar_constant: f64,
}

impl Default for DecompositionSettings {
    fn default() -> Self {
        Self {
            zenith_cap: 85f64.to_radians(),
            solar_constant: SOLAR_CONSTANT,
        }
    }
}

/// Daily clearness index and persistence for one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DayContext {
    pub daily_kt: f64,
    pub persistence: f64,
}

pub fn clearness_index(ghi: f64, g0h: f64) -> f64 {
    if g0h <= 0.0 {
        0.0
    } else {
        (ghi / g0h).clamp(0.0, 1.0)
    }
}

pub fn diffuse_fraction(inputs: &DiffuseFractionInputs, coeffs: &LogisticCoefficients) -> Result<f64> {
    coeffs.validate()?;
    let x = DiffuseFractionInputs {
        clearness_index: inputs.clearness_index.clamp(0.0, 1.0),
        persistence: inputs.persistence.clamp(0.0, 1.0),
        daily_kt: inputs.daily_kt.clamp(0.0, 1.0),
        ..*inputs
    };
    let d = 1.0 / (1.0 + coeffs.linear_predictor(&x).exp());
    Ok(d.clamp(f64::EPSILON, 1.0 - f64::EPSILON))
}

pub fn decompose(
    ghi: f64,
    pos: &SolarPosition,
    ctx: &DayContext,
    coeffs: &LogisticCoefficients,
    settings: &DecompositionSettings,
) -> Result<IrradianceComponents> {
    if !(ghi >= 0.0) {
        return Err(Error::Domain(format!("ghi {ghi} is negative")));
    }
    if ghi == 0.0 {
        return Ok(IrradianceComponents::night(pos.zenith));
    }
    if pos.zenith >= settings.zenith_cap {
        return Ok(IrradianceComponents {
            ghi,
            dni: 0.0,
            dhi: ghi,
            bhi: 0.0,
            zenith: pos.zenith,
        });
    }
    let g0h = solargeom::extraterrestrial_horizontal(pos, settings.solar_constant);
    let inputs = DiffuseFractionInputs {
        clearness_index: clearness_index(ghi, g0h),
        apparent_solar_time: pos.apparent_solar_time(),
        elevation: pos.elevation,
        daily_kt: ctx.daily_kt,
        persistence: ctx.persistence,
    };
    let d = diffuse_fraction(&inputs, coeffs)?;
    let cos_z = pos.cos_zenith();
    let dni_cap = solargeom::extraterrestrial_normal(pos, settings.solar_constant);
    let mut dhi = d * ghi;
    let mut bhi = ghi - dhi;
    let mut dni = bhi / cos_z;
    if dni > dni_cap {
        dni = dni_cap;
        bhi = dni * cos_z;
        dhi = ghi - bhi;
    }
    Ok(IrradianceComponents {
        ghi,
        dni,
        dhi,
        bhi,
        zenith: pos.zenith,
    })
}

/// Decomposes a GHI series at one site. `times` must be increasing.
pub fn decompose_series(
    times: &[DateTime<Utc>],
    ghi: &[f64],
    site: &StationMeta,
    coeffs: &LogisticCoefficients,
    settings: &DecompositionSettings,
) -> Result<Vec<(SolarPosition, IrradianceComponents)>> {
    if times.len() != ghi.len() {
        return Err(Error::Input("times and ghi differ in length".into()));
    }
    let positions = times
        .iter()
        .map(|t| solargeom::solar_position(*t, site))
        .collect::<Result<Vec<_>>>()?;
    let ctx = day_contexts(times, ghi, &positions, settings.solar_constant);
    positions
        .iter()
        .zip(ghi)
        .zip(&ctx)
        .map(|((p, g), c)| Ok((*p, decompose(*g, p, c, coeffs, settings)?)))
        .collect()
}

/// Daily clearness index (per UTC day) and persistence for every instant.
pub fn day_contexts(
    times: &[DateTime<Utc>],
    ghi: &[f64],
    positions: &[SolarPosition],
    solar_constant: f64,
) -> Vec<DayContext> {
    let g0h: Vec<f64> = positions
        .iter()
        .map(|p| solargeom::extraterrestrial_horizontal(p, solar_constant))
        .collect();
    let kt: Vec<f64> = ghi.iter().zip(&g0h).map(|(g, e)| clearness_index(*g, *e)).collect();

    let mut daily = vec![0.0; ghi.len()];
    let mut start = 0;
    while start < times.len() {
        let day = day_start(times[start]);
        let end = start + times[start..].partition_point(|t| day_start(*t) == day);
        let (sg, se) = (start..end)
            .filter(|&i| g0h[i] > 0.0)
            .fold((0.0, 0.0), |(a, b), i| (a + ghi[i], b + g0h[i]));
        let k = if se > 0.0 { (sg / se).clamp(0.0, 1.0) } else { 0.0 };
        daily[start..end].iter_mut().for_each(|d| *d = k);
        start = end;
    }

    let daylight = |i: usize| g0h[i] > 0.0;
    (0..ghi.len())
        .map(|i| {
            let prev = (i > 0 && daylight(i - 1)).then(|| kt[i - 1]);
            let next = (i + 1 < ghi.len() && daylight(i + 1)).then(|| kt[i + 1]);
            let persistence = match (prev, next) {
                (Some(a), Some(b)) => 0.5 * (a + b),
                (Some(a), None) | (None, Some(a)) => a,
                (None, None) => kt[i],
            };
            DayContext {
                daily_kt: daily[i],
                persistence,
            }
        })
        .collect()
}

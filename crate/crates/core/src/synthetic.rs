//! Synthetic station data: clear-sky irradiance modulated by a spatially
//! and temporally correlated cloud field. Used for the bundled dataset,
//! examples and tests.

use chrono::{DateTime, Duration, NaiveDate, Utc};
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::ingest::{IrradianceSeries, Resolution, Sample, StationMeta};
use crate::solargeom::{self, SolarPosition};
use crate::stgp::fit::day_origin;
use crate::stgp::simulate::{interpolate, simulate_field};
use crate::stgp::{build_mesh, project, Hyperparameters, MeshSettings, SpdeOperator};

/// Haurwitz clear-sky GHI, W/m².
pub fn clear_sky_ghi(pos: &SolarPosition) -> f64 {
    let c = pos.cos_zenith();
    if c <= 0.0 {
        0.0
    } else {
        1098.0 * c * (-0.057 / c).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSettings {
    pub first_day: NaiveDate,
    pub days: usize,
    pub resolution: Resolution,
    pub seed: u64,
    /// Cloud field on its own latent scale.
    pub cloud: Hyperparameters,
    /// Fraction of samples dropped as missing.
    pub missing_fraction: f64,
    /// Relative white noise on each sample.
    pub noise: f64,
}

impl Default for SyntheticSettings {
    fn default() -> Self {
        Self {
            first_day: NaiveDate::from_ymd_opt(2024, 6, 20).expect("valid date"),
            days: 2,
            resolution: Resolution::ONE_MINUTE,
            seed: 42,
            cloud: Hyperparameters {
                sigma: 1.0,
                range: 150.0,
                rho: 0.97,
                sigma_eps: 0.1,
                beta0: 0.0,
            },
            missing_fraction: 0.002,
            noise: 0.03,
        }
    }
}

/// Clear-sky index from the latent cloud value, in about [0.15, 1.1].
fn clear_sky_index(f: f64) -> f64 {
    0.15 + 0.95 / (1.0 + (-(2.0 * f + 1.0)).exp())
}

/// One series per station. The cloud field lives on 10-minute steps and is
/// interpolated linearly in time to finer resolutions.
pub fn generate(stations: &[StationMeta], settings: &SyntheticSettings) -> Result<Vec<IrradianceSeries>> {
    if stations.len() < 3 {
        return Err(Error::Input("synthetic data needs at least 3 stations".into()));
    }
    if settings.days == 0 {
        return Err(Error::Input("synthetic data needs at least one day".into()));
    }
    if settings.resolution.minutes() > 10 || 10 % settings.resolution.minutes() != 0 {
        return Err(Error::Resolution(format!(
            "synthetic resolution {} must divide 10 minutes",
            settings.resolution
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let points = stations
        .iter()
        .map(|s| project(s.latitude, s.longitude))
        .collect::<Result<Vec<_>>>()?;
    let mesh = build_mesh(&points, &MeshSettings::default())?;
    let op = SpdeOperator::assemble(&mesh)?;
    let coarse_steps = settings.days * 144 + 1;
    let field = simulate_field(&op, &settings.cloud, coarse_steps, &mut rng)?;
    let at_sites: Vec<Vec<f64>> = points
        .iter()
        .map(|&p| field.iter().map(|f| interpolate(&mesh, f, p)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;

    let start = day_origin(settings.first_day);
    let step = settings.resolution.minutes() as usize;
    let fine_steps = settings.days * settings.resolution.steps_per_day();
    stations
        .iter()
        .zip(&at_sites)
        .map(|(site, cloud)| {
            let samples = (0..fine_steps)
                .map(|k| {
                    let minute = k * step;
                    let time = start + Duration::minutes(minute as i64);
                    let (i, frac) = (minute / 10, (minute % 10) as f64 / 10.0);
                    let f = cloud[i] * (1.0 - frac) + cloud[i + 1] * frac;
                    let pos = solargeom::solar_position(time, site)?;
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let ghi = (clear_sky_index(f) * clear_sky_ghi(&pos) * (1.0 + settings.noise * z)).max(0.0);
                    let drop = rng.random::<f64>() < settings.missing_fraction;
                    Ok(Sample {
                        time,
                        ghi: (!drop).then(|| (ghi * 10.0).round() / 10.0),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            IrradianceSeries::new(site.clone(), settings.resolution, samples)
        })
        .collect()
}

/// Clear-sky day with alternating cloud-edge enhancement and shading
/// between 10:00 and 14:00 UTC, the profile that makes averaging hide
/// clipping.
pub fn spiky_clear_sky_day(site: &StationMeta, day: NaiveDate, resolution: Resolution) -> Result<Vec<(DateTime<Utc>, f64)>> {
    let start = day_origin(day);
    (0..resolution.steps_per_day())
        .map(|k| {
            let time = start + Duration::seconds(k as i64 * resolution.seconds());
            let pos = solargeom::solar_position(time, site)?;
            let minute = k as i64 * i64::from(resolution.minutes());
            let factor = if (600..840).contains(&minute) {
                match (minute / 10) % 3 {
                    0 => 1.35,
                    1 => 0.45,
                    _ => 1.0,
                }
            } else {
                1.0
            };
            Ok((time, factor * clear_sky_ghi(&pos)))
        })
        .collect()
}

/// Random daily profile for clipping studies: clear-sky shape with
/// piecewise-constant cloud factors on 10-minute steps.
pub fn random_profile<R: Rng + ?Sized>(
    site: &StationMeta,
    day: NaiveDate,
    rng: &mut R,
) -> Result<Vec<(DateTime<Utc>, f64)>> {
    let start = day_origin(day);
    (0..144)
        .map(|k| {
            let time = start + Duration::minutes(10 * k);
            let pos = solargeom::solar_position(time, site)?;
            let factor = rng.random_range(0.1..1.4);
            Ok((time, factor * clear_sky_ghi(&pos)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stations() -> Vec<StationMeta> {
        vec![
            StationMeta::new("a", "A", 53.0, -8.0).unwrap(),
            StationMeta::new("b", "B", 54.0, -7.0).unwrap(),
            StationMeta::new("c", "C", 52.2, -9.5).unwrap(),
        ]
    }

    #[test]
    fn clear_sky_zero_at_night_and_bounded() {
        let site = &stations()[0];
        let night = solargeom::solar_position("2024-06-20T00:00:00Z".parse().unwrap(), site).unwrap();
        assert_eq!(clear_sky_ghi(&night), 0.0);
        let noon = solargeom::solar_position("2024-06-20T12:30:00Z".parse().unwrap(), site).unwrap();
        let g = clear_sky_ghi(&noon);
        assert!(g > 700.0 && g < 1000.0, "{g}");
    }

    #[test]
    fn generation_is_deterministic() {
        let settings = SyntheticSettings {
            days: 1,
            resolution: Resolution::TEN_MINUTES,
            ..SyntheticSettings::default()
        };
        let a = generate(&stations(), &settings).unwrap();
        let b = generate(&stations(), &settings).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].len(), 144);
        assert!(a.iter().all(|s| s.samples().iter().flat_map(|x| x.ghi).all(|g| g >= 0.0)));
    }
}

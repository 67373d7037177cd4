//! PV power from plane-of-array irradiance with a linear performance-ratio
//! model, inverter overload clipping and Monte Carlo uncertainty bands.

use std::path::Path;

use chrono::{DateTime, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::decomposition::{decompose_series, DecompositionSettings, LogisticCoefficients};
use crate::error::{Error, Result};
use crate::ingest::{Resolution, StationMeta};
use crate::solargeom::PanelOrientation;
use crate::stgp::Prediction;
use crate::transposition::{poa, SkyModel};

pub const DEFAULT_PERFORMANCE_RATIO: f64 = 0.85;
pub const DEFAULT_INVERTER_EFFICIENCY: f64 = 0.96;
/// Monte Carlo draws behind each uncertainty band.
pub const DEFAULT_DRAWS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PvSystem {
    pub panel_count: u32,
    pub panel_stc_watts: f64,
    pub orientation: PanelOrientation,
    pub inverter_ac_limit: f64,
    pub performance_ratio: f64,
    pub inverter_efficiency: f64,
}

/// On-disk description of a PV system (TOML key-value file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PvSystemFile {
    pub panel_count: u32,
    pub panel_stc_watts: f64,
    pub tilt_deg: f64,
    /// Degrees from due south, positive towards west.
    pub azimuth_deg: f64,
    pub inverter_ac_limit_w: f64,
    #[serde(default = "default_pr")]
    pub performance_ratio: f64,
    #[serde(default = "default_eta")]
    pub inverter_efficiency: f64,
}

fn default_pr() -> f64 {
    DEFAULT_PERFORMANCE_RATIO
}

fn default_eta() -> f64 {
    DEFAULT_INVERTER_EFFICIENCY
}

impl PvSystem {
    pub fn new(
        panel_count: u32,
        panel_stc_watts: f64,
        orientation: PanelOrientation,
        inverter_ac_limit: f64,
        performance_ratio: f64,
        inverter_efficiency: f64,
    ) -> Result<Self> {
        let sys = Self {
            panel_count,
            panel_stc_watts,
            orientation,
            inverter_ac_limit,
            performance_ratio,
            inverter_efficiency,
        };
        sys.validate()?;
        Ok(sys)
    }

    pub fn validate(&self) -> Result<()> {
        if self.panel_count == 0 {
            return Err(Error::Config("panel_count must be positive".into()));
        }
        if !(self.panel_stc_watts > 0.0 && self.panel_stc_watts.is_finite()) {
            return Err(Error::Config(format!(
                "panel_stc_watts {} must be positive",
                self.panel_stc_watts
            )));
        }
        if !(self.inverter_ac_limit > 0.0 && self.inverter_ac_limit.is_finite()) {
            return Err(Error::Config(format!(
                "inverter AC limit {} must be positive",
                self.inverter_ac_limit
            )));
        }
        for (name, v) in [
            ("performance_ratio", self.performance_ratio),
            ("inverter_efficiency", self.inverter_efficiency),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("{name} {v} outside (0, 1]")));
            }
        }
        Ok(())
    }

    /// Installed panel capacity at standard test conditions, W.
    pub fn dc_capacity(&self) -> f64 {
        f64::from(self.panel_count) * self.panel_stc_watts
    }

    pub fn dc_ac_ratio(&self) -> f64 {
        self.dc_capacity() / self.inverter_ac_limit
    }

    pub fn from_file_spec(spec: &PvSystemFile) -> Result<Self> {
        let orientation = PanelOrientation::from_degrees(spec.tilt_deg, spec.azimuth_deg)
            .map_err(|e| Error::Config(e.to_string()))?;
        Self::new(
            spec.panel_count,
            spec.panel_stc_watts,
            orientation,
            spec.inverter_ac_limit_w,
            spec.performance_ratio,
            spec.inverter_efficiency,
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let spec: PvSystemFile =
            toml::from_str(text).map_err(|e| Error::Config(format!("PV system file: {e}")))?;
        Self::from_file_spec(&spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// DC output of the array for an effective plane-of-array irradiance.
pub fn dc_power(g_ef: f64, sys: &PvSystem) -> f64 {
    sys.dc_capacity() * (g_ef.max(0.0) / 1000.0) * sys.performance_ratio
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcPower {
    pub p_unclipped: f64,
    pub p_ac: f64,
    pub clipped: f64,
}

pub fn ac_power(p_dc: f64, sys: &PvSystem) -> AcPower {
    let p_unclipped = p_dc.max(0.0) * sys.inverter_efficiency;
    let p_ac = p_unclipped.min(sys.inverter_ac_limit);
    AcPower {
        p_unclipped,
        p_ac,
        clipped: p_unclipped - p_ac,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSample {
    pub time: DateTime<Utc>,
    pub p_dc: f64,
    pub p_ac: f64,
    pub p_unclipped: f64,
    pub clipped: f64,
}

impl PowerSample {
    pub fn from_dc(time: DateTime<Utc>, p_dc: f64, sys: &PvSystem) -> Self {
        let ac = ac_power(p_dc, sys);
        Self {
            time,
            p_dc,
            p_ac: ac.p_ac,
            p_unclipped: ac.p_unclipped,
            clipped: ac.clipped,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerSeries {
    pub resolution: Resolution,
    pub samples: Vec<PowerSample>,
}

impl PowerSeries {
    /// Power for a series of plane-of-array irradiances.
    pub fn from_poa(
        times: &[DateTime<Utc>],
        g_ef: &[f64],
        resolution: Resolution,
        sys: &PvSystem,
    ) -> Result<Self> {
        if times.len() != g_ef.len() {
            return Err(Error::Input("times and irradiance differ in length".into()));
        }
        let samples = times
            .iter()
            .zip(g_ef)
            .map(|(&t, &g)| PowerSample::from_dc(t, dc_power(g, sys), sys))
            .collect();
        let series = Self { resolution, samples };
        series.check()?;
        Ok(series)
    }

    /// Timestamps must sit on the resolution grid and increase; gaps are
    /// allowed.
    pub fn check(&self) -> Result<()> {
        let step = self.resolution.seconds();
        for s in &self.samples {
            if !self.resolution.is_aligned(s.time) {
                return Err(Error::Input(format!(
                    "{} is not on the {} grid",
                    s.time, self.resolution
                )));
            }
        }
        for w in self.samples.windows(2) {
            let dt = (w[1].time - w[0].time).num_seconds();
            if dt <= 0 || dt % step != 0 {
                return Err(Error::Input(format!(
                    "spacing of {dt} s between {} and {} does not match {}",
                    w[0].time, w[1].time, self.resolution
                )));
            }
        }
        Ok(())
    }

    /// Bin means of the unclipped power, clipped afterwards, as an inverter
    /// logging at the coarser resolution would see them. Absent samples in a
    /// bin count as zero power so that energy is conserved.
    pub fn average_to(&self, target: Resolution, sys: &PvSystem) -> Result<Self> {
        self.check()?;
        if target.minutes() % self.resolution.minutes() != 0 {
            return Err(Error::Resolution(format!(
                "{target} is not a multiple of {}",
                self.resolution
            )));
        }
        let width = target.seconds();
        let per_bin = f64::from(target.minutes() / self.resolution.minutes());
        let mut bins: Vec<(DateTime<Utc>, f64, f64)> = Vec::new();
        for s in &self.samples {
            let start = DateTime::<Utc>::from_timestamp(s.time.timestamp().div_euclid(width) * width, 0)
                .ok_or_else(|| Error::Range(format!("{} cannot be binned", s.time)))?;
            if bins.last().map(|b| b.0) != Some(start) {
                bins.push((start, 0.0, 0.0));
            }
            let b = bins.last_mut().expect("bin pushed above");
            b.1 += s.p_dc;
            b.2 += s.p_unclipped;
        }
        let samples = bins
            .into_iter()
            .map(|(time, dc, unclipped)| {
                let p_dc = dc / per_bin;
                let p_unclipped = unclipped / per_bin;
                let p_ac = p_unclipped.min(sys.inverter_ac_limit);
                PowerSample {
                    time,
                    p_dc,
                    p_ac,
                    p_unclipped,
                    clipped: p_unclipped - p_ac,
                }
            })
            .collect();
        Ok(Self {
            resolution: target,
            samples,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClippingReport {
    pub energy_lost_wh: f64,
    pub potential_energy_wh: f64,
    pub delivered_energy_wh: f64,
    pub loss_fraction: f64,
}

pub fn clipping_report(series: &PowerSeries) -> Result<ClippingReport> {
    series.check()?;
    let dt = series.resolution.hours();
    let (lost, potential, delivered) = series.samples.iter().fold((0.0, 0.0, 0.0), |acc, s| {
        (acc.0 + s.clipped * dt, acc.1 + s.p_unclipped * dt, acc.2 + s.p_ac * dt)
    });
    Ok(ClippingReport {
        energy_lost_wh: lost,
        potential_energy_wh: potential,
        delivered_energy_wh: delivered,
        loss_fraction: if potential > 0.0 { lost / potential } else { 0.0 },
    })
}

/// AC output over the system potential `dc_capacity × inverter_efficiency`.
/// The denominator is the array potential, not the inverter limit.
pub fn normalized_output(series: &PowerSeries, sys: &PvSystem) -> Vec<f64> {
    let potential = sys.dc_capacity() * sys.inverter_efficiency;
    series.samples.iter().map(|s| s.p_ac / potential).collect()
}

/// Linear-interpolation percentile (type 7) of unsorted data, `q` in [0, 1].
pub fn percentile(values: &mut [f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let h = q.clamp(0.0, 1.0) * (values.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(values.len() - 1);
    values[lo] + (h - lo as f64) * (values[hi] - values[lo])
}

#[derive(Debug, Clone, PartialEq)]
pub struct PvSimSettings {
    pub draws: usize,
    pub seed: u64,
    pub sky: SkyModel,
    pub coefficients: LogisticCoefficients,
    pub decomposition: DecompositionSettings,
}

impl Default for PvSimSettings {
    fn default() -> Self {
        Self {
            draws: DEFAULT_DRAWS,
            seed: 0,
            sky: SkyModel::default(),
            coefficients: LogisticCoefficients::brl_2010(),
            decomposition: DecompositionSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PvSimulation {
    /// Power along the posterior median irradiance path.
    pub median: PowerSeries,
    /// Plane-of-array irradiance along the median path, W/m².
    pub poa_median: Vec<f64>,
    pub ac_lo95: Vec<f64>,
    pub ac_hi95: Vec<f64>,
}

/// AC power for one GHI path at one site.
pub fn power_from_ghi(
    times: &[DateTime<Utc>],
    ghi: &[f64],
    resolution: Resolution,
    sys: &PvSystem,
    site: &StationMeta,
    settings: &PvSimSettings,
) -> Result<(PowerSeries, Vec<f64>)> {
    let comps = decompose_series(times, ghi, site, &settings.coefficients, &settings.decomposition)?;
    let g_ef: Vec<f64> = comps
        .iter()
        .map(|(pos, c)| poa(c, pos, &sys.orientation, &settings.sky, site).g_total)
        .collect();
    let series = PowerSeries::from_poa(times, &g_ef, resolution, sys)?;
    Ok((series, g_ef))
}

fn grid_resolution(predictions: &[Prediction]) -> Result<Resolution> {
    let Some(first) = predictions.windows(2).next() else {
        return Ok(Resolution::from_minutes(60)?);
    };
    let dt = (first[1].time - first[0].time).num_seconds();
    if dt <= 0 || dt % 60 != 0 {
        return Err(Error::Input(format!("prediction spacing {dt} s is not whole minutes")));
    }
    let res = Resolution::from_minutes(u32::try_from(dt / 60).map_err(|_| Error::Input("spacing too large".into()))?)?;
    if predictions.windows(2).any(|w| (w[1].time - w[0].time).num_seconds() != dt) {
        return Err(Error::Input("predictions are not on a uniform time grid".into()));
    }
    Ok(res)
}

/// Runs GHI → components → plane of array → DC → AC on the posterior median
/// and on Monte Carlo draws of the log-scale irradiance, returning the median
/// path and 95% bands of AC power. Draws are independent per timestamp
/// unless `joint_draws` (log-scale, one row per draw) is supplied.
pub fn simulate_pv(
    predictions: &[Prediction],
    joint_draws: Option<&[Vec<f64>]>,
    sys: &PvSystem,
    site: &StationMeta,
    settings: &PvSimSettings,
) -> Result<PvSimulation> {
    sys.validate()?;
    let resolution = grid_resolution(predictions)?;
    let times: Vec<DateTime<Utc>> = predictions.iter().map(|p| p.time).collect();
    let median_ghi: Vec<f64> = predictions.iter().map(|p| p.median_wm2).collect();
    let (median, poa_median) = power_from_ghi(&times, &median_ghi, resolution, sys, site, settings)?;

    let back = |v: f64| (v.exp() - 1.0).max(0.0);
    let paths: Vec<Vec<f64>> = match joint_draws {
        Some(rows) => {
            if rows.iter().any(|r| r.len() != predictions.len()) {
                return Err(Error::Input("joint draws do not match the prediction grid".into()));
            }
            rows.iter().map(|r| r.iter().map(|&v| back(v)).collect()).collect()
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
            (0..settings.draws)
                .map(|_| {
                    predictions
                        .iter()
                        .map(|p| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            back(p.mean_log + p.sd_log * z)
                        })
                        .collect()
                })
                .collect()
        }
    };

    let mut ac_by_time = vec![Vec::with_capacity(paths.len()); predictions.len()];
    for ghi in &paths {
        let (series, _) = power_from_ghi(&times, ghi, resolution, sys, site, settings)?;
        for (slot, s) in ac_by_time.iter_mut().zip(&series.samples) {
            slot.push(s.p_ac);
        }
    }
    let (ac_lo95, ac_hi95) = if paths.is_empty() {
        let ac: Vec<f64> = median.samples.iter().map(|s| s.p_ac).collect();
        (ac.clone(), ac)
    } else {
        ac_by_time
            .iter_mut()
            .map(|v| (percentile(v, 0.025), percentile(v, 0.975)))
            .unzip()
    };
    Ok(PvSimulation {
        median,
        poa_median,
        ac_lo95,
        ac_hi95,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, TimeZone};
    use proptest::prelude::*;

    fn system(ratio: f64) -> PvSystem {
        PvSystem::new(
            7,
            400.0,
            PanelOrientation::from_degrees(35.0, 0.0).unwrap(),
            2800.0 / ratio,
            0.85,
            0.96,
        )
        .unwrap()
    }

    fn series(values: &[f64], minutes: u32, sys: &PvSystem) -> PowerSeries {
        let t0 = Utc.with_ymd_and_hms(2024, 6, 1, 0, 0, 0).unwrap();
        PowerSeries {
            resolution: Resolution::from_minutes(minutes).unwrap(),
            samples: values
                .iter()
                .enumerate()
                .map(|(i, &p)| PowerSample::from_dc(t0 + Duration::minutes(i as i64 * minutes as i64), p, sys))
                .collect(),
        }
    }

    #[test]
    fn dc_power_arithmetic() {
        let mut sys = system(1.2);
        assert_eq!(dc_power(0.0, &sys), 0.0);
        assert!((dc_power(500.0, &sys) - 1190.0).abs() < 1e-9);
        sys.performance_ratio = 1.0;
        assert!((dc_power(1000.0, &sys) - sys.dc_capacity()).abs() < 1e-9);
    }

    #[test]
    fn ac_power_clips_above_limit() {
        let mut sys = system(1.2);
        sys.inverter_efficiency = 1.0;
        let low = ac_power(0.5 * sys.inverter_ac_limit, &sys);
        assert_eq!(low.clipped, 0.0);
        let high = ac_power(1.5 * sys.inverter_ac_limit, &sys);
        assert!((high.clipped - 0.5 * sys.inverter_ac_limit).abs() < 1e-9);
        assert_eq!(high.p_ac, sys.inverter_ac_limit);
    }

    #[test]
    fn constant_overload_loses_one_sixth() {
        let mut sys = system(1.2);
        sys.inverter_efficiency = 1.0;
        let s = series(&[1.2 * sys.inverter_ac_limit; 6], 10, &sys);
        let r = clipping_report(&s).unwrap();
        assert!((r.loss_fraction - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn no_overload_no_loss() {
        let sys = system(1.2);
        let r = clipping_report(&series(&[100.0, 500.0, 0.0], 10, &sys)).unwrap();
        assert_eq!(r.loss_fraction, 0.0);
        let empty = clipping_report(&series(&[0.0; 4], 10, &sys)).unwrap();
        assert_eq!(empty.loss_fraction, 0.0);
    }

    #[test]
    fn mixed_spacing_rejected() {
        let sys = system(1.2);
        let mut s = series(&[1.0, 2.0, 3.0], 10, &sys);
        s.samples[2].time = s.samples[1].time + Duration::minutes(5);
        assert!(matches!(clipping_report(&s), Err(Error::Input(_))));
    }

    #[test]
    fn normalized_output_at_limit() {
        let mut sys = system(1.2);
        sys.inverter_efficiency = 1.0;
        let s = series(&[0.0, 10.0 * sys.dc_capacity()], 10, &sys);
        let n = normalized_output(&s, &sys);
        assert_eq!(n[0], 0.0);
        assert!((n[1] - 1.0 / 1.2).abs() < 1e-12);
    }

    #[test]
    fn parses_system_file() {
        let sys = PvSystem::parse(
            "panel_count = 7\npanel_stc_watts = 400\ntilt_deg = 35\nazimuth_deg = 0\ninverter_ac_limit_w = 2450\n",
        )
        .unwrap();
        assert_eq!(sys.performance_ratio, DEFAULT_PERFORMANCE_RATIO);
        assert!((sys.dc_ac_ratio() - 2800.0 / 2450.0).abs() < 1e-12);
        assert!(matches!(PvSystem::parse("panel_count = 0"), Err(Error::Config(_))));
        assert!(matches!(
            PvSystem::parse("panel_count = 7\npanel_stc_watts = 400\ntilt_deg = 35\nazimuth_deg = 0\ninverter_ac_limit_w = 2450\nperformance_ratio = 1.5\n"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn percentile_type7() {
        let mut v = vec![4.0, 1.0, 3.0, 2.0];
        assert_eq!(percentile(&mut v, 0.0), 1.0);
        assert_eq!(percentile(&mut v, 1.0), 4.0);
        assert!((percentile(&mut v, 0.5) - 2.5).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn clipping_identity_and_bookkeeping(values in prop::collection::vec(0.0f64..6000.0, 1..60)) {
            let sys = system(1.3);
            let s = series(&values, 10, &sys);
            for p in &s.samples {
                prop_assert_eq!(p.p_ac + p.clipped, p.p_unclipped);
                prop_assert!(p.clipped >= 0.0);
            }
            let r = clipping_report(&s).unwrap();
            prop_assert!((r.energy_lost_wh + r.delivered_energy_wh - r.potential_energy_wh).abs()
                <= 1e-9 * r.potential_energy_wh.max(1.0));
            for n in normalized_output(&s, &sys) {
                prop_assert!((0.0..=1.0).contains(&n));
            }
        }

        #[test]
        fn ac_power_monotone(a in 0.0f64..8000.0, b in 0.0f64..8000.0) {
            let sys = system(1.2);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (x, y) = (ac_power(lo, &sys), ac_power(hi, &sys));
            prop_assert!(x.p_ac <= y.p_ac && x.clipped <= y.clipped);
        }

        #[test]
        fn averaging_never_increases_loss(values in prop::collection::vec(0.0f64..6000.0, 6..72), k in prop::sample::select(vec![2u32, 3, 6, 12])) {
            let sys = system(1.3);
            let s = series(&values, 10, &sys);
            let coarse = s.average_to(Resolution::from_minutes(10 * k).unwrap(), &sys).unwrap();
            let fine = clipping_report(&s).unwrap();
            let avg = clipping_report(&coarse).unwrap();
            prop_assert!(avg.energy_lost_wh <= fine.energy_lost_wh + 1e-9 * fine.potential_energy_wh.max(1.0));
        }
    }
}

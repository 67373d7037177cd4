use chrono::{DateTime, Duration, NaiveDate, Utc};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use solmap::ingest::{Resolution, StationMeta};
use solmap::pvsim::{clipping_report, power_from_ghi, simulate_pv, PowerSeries, PvSimSettings, PvSystem};
use solmap::solargeom::PanelOrientation;
use solmap::stgp::{PlanarPoint, Prediction};
use solmap::synthetic::{random_profile, spiky_clear_sky_day};

fn site() -> StationMeta {
    StationMeta::new("s", "Site", 53.35, -6.25).unwrap()
}

fn system(tilt_deg: f64, dc_ac: f64) -> PvSystem {
    PvSystem::new(
        7,
        400.0,
        PanelOrientation::from_degrees(tilt_deg, 0.0).unwrap(),
        2800.0 / dc_ac,
        0.85,
        0.96,
    )
    .unwrap()
}

fn losses(profile: &[(DateTime<Utc>, f64)], sys: &PvSystem) -> (f64, f64) {
    let (times, ghi): (Vec<_>, Vec<_>) = profile.iter().copied().unzip();
    let (fine, _) = power_from_ghi(&times, &ghi, Resolution::TEN_MINUTES, sys, &site(), &PvSimSettings::default()).unwrap();
    let hourly = fine.average_to(Resolution::HOURLY, sys).unwrap();
    let a = clipping_report(&fine).unwrap();
    let b = clipping_report(&hourly).unwrap();
    assert!((a.potential_energy_wh - b.potential_energy_wh).abs() <= 1e-6 * (1.0 + a.potential_energy_wh));
    (a.loss_fraction, b.loss_fraction)
}

#[test]
fn hourly_averaging_never_reveals_more_clipping() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let sys = system(35.0, 1.3);
    let first = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap();
    for _ in 0..1000 {
        let day = first + Duration::days(rng.random_range(0..366));
        let profile = random_profile(&site(), day, &mut rng).unwrap();
        let (fine, hourly) = losses(&profile, &sys);
        assert!(hourly <= fine + 1e-12, "{day}: hourly {hourly} > 10-min {fine}");
    }
}

#[test]
fn spiky_day_hides_clipping_when_averaged() {
    let day = NaiveDate::from_ymd_opt(2024, 6, 20).unwrap();
    let profile = spiky_clear_sky_day(&site(), day, Resolution::TEN_MINUTES).unwrap();
    let (fine, hourly) = losses(&profile, &system(35.0, 1.3));
    assert!(fine > 0.0);
    assert!(hourly < fine, "hourly {hourly} vs 10-min {fine}");
}

#[test]
fn constant_overload_loses_one_sixth() {
    let sys = system(35.0, 1.0);
    let t0 = DateTime::parse_from_rfc3339("2024-06-20T10:00:00Z").unwrap().to_utc();
    let times: Vec<_> = (0..6).map(|k| t0 + Duration::minutes(10 * k)).collect();
    let limit = sys.inverter_ac_limit;
    let p_dc = 1.2 * limit / sys.inverter_efficiency;
    let g = 1000.0 * p_dc / (sys.dc_capacity() * sys.performance_ratio);
    let series = PowerSeries::from_poa(&times, &[g; 6], Resolution::TEN_MINUTES, &sys).unwrap();
    let r = clipping_report(&series).unwrap();
    assert!((r.loss_fraction - 1.0 / 6.0).abs() < 1e-12);
    assert!((r.energy_lost_wh - 0.2 * limit).abs() < 1e-9);
}

#[test]
fn darkness_produces_no_power_and_no_loss() {
    let sys = system(35.0, 1.3);
    let t0 = DateTime::parse_from_rfc3339("2024-06-20T00:00:00Z").unwrap().to_utc();
    let times: Vec<_> = (0..24).map(|h| t0 + Duration::hours(h)).collect();
    let (series, poa) = power_from_ghi(&times, &[0.0; 24], Resolution::HOURLY, &sys, &site(), &PvSimSettings::default()).unwrap();
    assert!(poa.iter().all(|&g| g == 0.0));
    assert!(series.samples.iter().all(|s| s.p_ac == 0.0 && s.clipped == 0.0));
    assert_eq!(clipping_report(&series).unwrap().loss_fraction, 0.0);
}

fn predictions(sd_log: f64) -> Vec<Prediction> {
    let t0 = DateTime::parse_from_rfc3339("2024-06-20T06:00:00Z").unwrap().to_utc();
    (0..12)
        .map(|h| {
            let mean = (200.0 + 60.0 * h as f64).ln_1p();
            Prediction::from_log(PlanarPoint::new(0.0, 0.0), t0 + Duration::hours(h), mean, sd_log)
        })
        .collect()
}

#[test]
fn zero_spread_collapses_the_bands() {
    let sys = system(35.0, 1.3);
    let sim = simulate_pv(&predictions(0.0), None, &sys, &site(), &PvSimSettings::default()).unwrap();
    for ((s, lo), hi) in sim.median.samples.iter().zip(&sim.ac_lo95).zip(&sim.ac_hi95) {
        assert!((s.p_ac - lo).abs() < 1e-9 && (s.p_ac - hi).abs() < 1e-9);
    }
}

#[test]
fn bands_widen_with_log_spread() {
    // A flat panel sees GHI itself, so power is monotone in irradiance.
    let sys = system(0.0, 1.0);
    let settings = PvSimSettings { draws: 400, ..PvSimSettings::default() };
    let width = |sd: f64| {
        let sim = simulate_pv(&predictions(sd), None, &sys, &site(), &settings).unwrap();
        sim.ac_lo95.iter().zip(&sim.ac_hi95).map(|(l, h)| h - l).collect::<Vec<_>>()
    };
    let (narrow, wide) = (width(0.1), width(0.4));
    for (n, w) in narrow.iter().zip(&wide) {
        assert!(w + 1e-9 >= *n, "{w} < {n}");
    }
    assert!(wide.iter().sum::<f64>() > narrow.iter().sum::<f64>());
}

//! Error metrics, empirical coverage, leave-one-station-out cross-validation
//! and comparison against external gridded series.
//!
//! Sign convention: `mbe = mean(pred − obs)`, positive when the model
//! over-predicts, and `me = −mbe`.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::{DateTime, NaiveDate, Utc};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{StationMeta, TransformedSeries};
use crate::parallel::parallel_map;
use crate::stgp::predict::predict_at;
use crate::stgp::{build_mesh, fit_day, project, DayData, FitSettings, MeshSettings, Prediction, PredictionKind};

/// Observations at or below this many W/m² are left out of MAPE.
pub const DEFAULT_MAPE_THRESHOLD: f64 = 10.0;

/// One prediction paired with its observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedValue {
    pub pred: f64,
    /// 95% interval, when the predictor provides one.
    pub interval: Option<(f64, f64)>,
    pub obs: f64,
}

impl PairedValue {
    pub fn from_prediction(p: &Prediction, obs: f64) -> Self {
        Self {
            pred: p.median_wm2,
            interval: Some((p.lo95_wm2, p.hi95_wm2)),
            obs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricReport {
    pub rmse: f64,
    pub mae: f64,
    pub mbe: f64,
    pub me: f64,
    /// Percent; `None` when no observation exceeds the threshold.
    pub mape: Option<f64>,
    /// `None` when no pair carries an interval.
    pub coverage95: Option<f64>,
    pub n_pairs: usize,
    pub mape_threshold: f64,
}

/// Scores the pairs whose prediction and observation are both finite.
pub fn compute_metrics(pairs: &[PairedValue], mape_threshold: f64) -> Result<MetricReport> {
    let kept: Vec<&PairedValue> = pairs
        .iter()
        .filter(|p| p.pred.is_finite() && p.obs.is_finite())
        .collect();
    if kept.is_empty() {
        return Err(Error::Input("no complete prediction/observation pairs".into()));
    }
    let n = kept.len() as f64;
    let (mut se, mut ae, mut be) = (0.0, 0.0, 0.0);
    let (mut pe, mut pe_n) = (0.0, 0usize);
    let (mut hit, mut with_interval) = (0usize, 0usize);
    for p in &kept {
        let d = p.pred - p.obs;
        se += d * d;
        ae += d.abs();
        be += d;
        if p.obs > mape_threshold {
            pe += d.abs() / p.obs;
            pe_n += 1;
        }
        if let Some((lo, hi)) = p.interval {
            with_interval += 1;
            if lo <= p.obs && p.obs <= hi {
                hit += 1;
            }
        }
    }
    let mbe = be / n;
    Ok(MetricReport {
        rmse: (se / n).sqrt(),
        mae: ae / n,
        mbe,
        me: -mbe,
        mape: (pe_n > 0).then(|| 100.0 * pe / pe_n as f64),
        coverage95: (with_interval > 0).then(|| hit as f64 / with_interval as f64),
        n_pairs: kept.len(),
        mape_threshold,
    })
}

/// Fits a day model on training stations and predicts at one site.
pub trait DayFitter: Sync {
    fn predict_day(
        &self,
        train: &[TransformedSeries],
        day: NaiveDate,
        site: &StationMeta,
        times: &[DateTime<Utc>],
    ) -> Result<Vec<Prediction>>;
}

/// The spatio-temporal model with a mesh built from the training stations
/// and the target site.
#[derive(Debug, Clone, PartialEq)]
pub struct StgpDayFitter {
    pub mesh: MeshSettings,
    pub fit: FitSettings,
    pub kind: PredictionKind,
}

impl Default for StgpDayFitter {
    fn default() -> Self {
        Self {
            mesh: MeshSettings::default(),
            fit: FitSettings::default(),
            kind: PredictionKind::Observation,
        }
    }
}

impl DayFitter for StgpDayFitter {
    fn predict_day(
        &self,
        train: &[TransformedSeries],
        day: NaiveDate,
        site: &StationMeta,
        times: &[DateTime<Utc>],
    ) -> Result<Vec<Prediction>> {
        let data = DayData::from_series(train, day)?;
        let target = project(site.latitude, site.longitude)?;
        let mut points = data.station_points();
        points.push(target);
        let mesh = build_mesh(&points, &self.mesh)?;
        let model = fit_day(&data, &mesh, &self.fit, None)?;
        let at: Vec<_> = times.iter().map(|&t| (target, t)).collect();
        predict_at(&model, &mesh, &at, self.kind)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvFold {
    pub held_out_station: String,
    pub train_stations: Vec<String>,
    pub predictions: Vec<Prediction>,
    /// Observed GHI, W/m², aligned with `predictions`.
    pub observations: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldFailure {
    pub station: String,
    pub day: NaiveDate,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub folds: Vec<CvFold>,
    /// Station id and its report; `None` when no day of the fold succeeded.
    pub per_station: Vec<(String, Option<MetricReport>)>,
    pub pooled: Option<MetricReport>,
    pub failures: Vec<FoldFailure>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvSettings {
    pub mape_threshold: f64,
    pub jobs: usize,
}

impl Default for CvSettings {
    fn default() -> Self {
        Self {
            mape_threshold: DEFAULT_MAPE_THRESHOLD,
            jobs: 1,
        }
    }
}

impl CvFold {
    pub fn pairs(&self) -> Vec<PairedValue> {
        self.predictions
            .iter()
            .zip(&self.observations)
            .map(|(p, &o)| PairedValue::from_prediction(p, o))
            .collect()
    }
}

/// Leave-one-station-out cross-validation over `days` (log-scale input).
/// Every station is held out once; the remaining stations are fitted day by
/// day and the held-out site is predicted at its observed times.
pub fn loso_cv(
    dataset: &[TransformedSeries],
    days: &[NaiveDate],
    fitter: &dyn DayFitter,
    settings: &CvSettings,
) -> Result<CvReport> {
    if dataset.len() < 3 {
        return Err(Error::Input(format!(
            "cross-validation needs at least 3 stations, got {}",
            dataset.len()
        )));
    }
    let mut seen = std::collections::HashSet::new();
    for s in dataset {
        if !seen.insert(s.station.station_id.as_str()) {
            return Err(Error::Input(format!("duplicate station {}", s.station.station_id)));
        }
    }

    let tasks: Vec<(usize, NaiveDate)> = (0..dataset.len())
        .flat_map(|k| days.iter().map(move |&d| (k, d)))
        .collect();
    let results = parallel_map(&tasks, settings.jobs, |&(k, day)| {
        let held = &dataset[k];
        let train: Vec<TransformedSeries> = dataset
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != k)
            .map(|(_, s)| s.clone())
            .collect();
        let start = crate::stgp::fit::day_origin(day);
        let end = start + chrono::Duration::days(1);
        let (times, obs): (Vec<DateTime<Utc>>, Vec<f64>) = held
            .samples
            .iter()
            .filter(|s| s.time >= start && s.time < end)
            .filter_map(|s| s.value.map(|v| (s.time, (v.exp() - 1.0).max(0.0))))
            .unzip();
        if times.is_empty() {
            return Ok((Vec::new(), Vec::new()));
        }
        fitter
            .predict_day(&train, day, &held.station, &times)
            .map(|p| (p, obs))
    });

    let mut folds: Vec<CvFold> = dataset
        .iter()
        .enumerate()
        .map(|(k, s)| CvFold {
            held_out_station: s.station.station_id.clone(),
            train_stations: dataset
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != k)
                .map(|(_, t)| t.station.station_id.clone())
                .collect(),
            predictions: Vec::new(),
            observations: Vec::new(),
        })
        .collect();
    let mut failures = Vec::new();
    for (&(k, day), r) in tasks.iter().zip(results) {
        match r {
            Ok((p, o)) => {
                folds[k].predictions.extend(p);
                folds[k].observations.extend(o);
            }
            Err(e) => failures.push(FoldFailure {
                station: folds[k].held_out_station.clone(),
                day,
                message: e.to_string(),
            }),
        }
    }
    let per_station = folds
        .iter()
        .map(|f| {
            let r = compute_metrics(&f.pairs(), settings.mape_threshold).ok();
            (f.held_out_station.clone(), r)
        })
        .collect();
    let all: Vec<PairedValue> = folds.iter().flat_map(|f| f.pairs()).collect();
    let pooled = compute_metrics(&all, settings.mape_threshold).ok();
    Ok(CvReport {
        folds,
        per_station,
        pooled,
        failures,
    })
}

/// A timestamped estimate with an optional 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedEstimate {
    pub time: DateTime<Utc>,
    pub value: f64,
    pub interval: Option<(f64, f64)>,
}

/// Scores model and external series against observations on the timestamps
/// all three share. Returns `(model report, external report)`.
pub fn compare_external(
    model: &[TimedEstimate],
    external: &[TimedEstimate],
    obs: &[(DateTime<Utc>, f64)],
    mape_threshold: f64,
) -> Result<(MetricReport, MetricReport)> {
    let ext: BTreeMap<DateTime<Utc>, &TimedEstimate> = external.iter().map(|e| (e.time, e)).collect();
    let ob: BTreeMap<DateTime<Utc>, f64> = obs.iter().copied().filter(|(_, v)| v.is_finite()).collect();
    let mut mp = Vec::new();
    let mut ep = Vec::new();
    for m in model {
        if let (Some(e), Some(&o)) = (ext.get(&m.time), ob.get(&m.time)) {
            if m.value.is_finite() && e.value.is_finite() {
                mp.push(PairedValue {
                    pred: m.value,
                    interval: m.interval,
                    obs: o,
                });
                ep.push(PairedValue {
                    pred: e.value,
                    interval: e.interval,
                    obs: o,
                });
            }
        }
    }
    if mp.is_empty() {
        return Err(Error::Alignment(
            "model, external and observed series share no timestamps".into(),
        ));
    }
    Ok((
        compute_metrics(&mp, mape_threshold)?,
        compute_metrics(&ep, mape_threshold)?,
    ))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| crate::ingest::MISSING.to_string(), |x| format!("{x:.6}"))
}

/// One row per labelled report: Station, RMSE, MAE, MAPE, MBE, coverage,
/// followed by ME and the pair count.
pub fn write_report_csv<W: Write>(rows: &[(String, Option<MetricReport>)], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["station", "rmse", "mae", "mape", "mbe", "coverage95", "me", "n_pairs"])?;
    for (label, r) in rows {
        let rec = match r {
            Some(r) => vec![
                label.clone(),
                format!("{:.6}", r.rmse),
                format!("{:.6}", r.mae),
                fmt_opt(r.mape),
                format!("{:.6}", r.mbe),
                fmt_opt(r.coverage95),
                format!("{:.6}", r.me),
                r.n_pairs.to_string(),
            ],
            None => {
                let mut v = vec![label.clone()];
                v.extend(std::iter::repeat_n(crate::ingest::MISSING.to_string(), 6));
                v.push("0".into());
                v
            }
        };
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// `key value` lines for machine reading.
pub fn write_report_text<W: Write>(label: &str, r: &MetricReport, mut w: W) -> Result<()> {
    writeln!(w, "[{label}]")?;
    writeln!(w, "rmse {:.6}", r.rmse)?;
    writeln!(w, "mae {:.6}", r.mae)?;
    writeln!(w, "mbe {:.6}", r.mbe)?;
    writeln!(w, "me {:.6}", r.me)?;
    writeln!(w, "mape {}", fmt_opt(r.mape))?;
    writeln!(w, "coverage95 {}", fmt_opt(r.coverage95))?;
    writeln!(w, "n_pairs {}", r.n_pairs)?;
    writeln!(w, "mape_threshold {:.6}", r.mape_threshold)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn pair(pred: f64, obs: f64) -> PairedValue {
        PairedValue {
            pred,
            interval: Some((pred - 1.0, pred + 1.0)),
            obs,
        }
    }

    #[test]
    fn hand_arithmetic() {
        let r = compute_metrics(&[pair(2.0, 1.0), pair(4.0, 2.0)], 0.5).unwrap();
        assert!((r.rmse - 2.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(r.mae, 1.5);
        assert_eq!(r.mbe, 1.5);
        assert_eq!(r.me, -1.5);
        assert_eq!(r.mape, Some(100.0));
        assert_eq!(r.coverage95, Some(0.5));
    }

    #[test]
    fn perfect_prediction_zero_error() {
        let r = compute_metrics(&[pair(5.0, 5.0), pair(50.0, 50.0)], 10.0).unwrap();
        assert_eq!((r.rmse, r.mae, r.mbe), (0.0, 0.0, 0.0));
        assert_eq!(r.mape, Some(0.0));
        assert_eq!(r.coverage95, Some(1.0));
    }

    #[test]
    fn empty_and_missing() {
        assert!(compute_metrics(&[], 10.0).is_err());
        assert!(compute_metrics(&[pair(f64::NAN, 1.0)], 10.0).is_err());
        let r = compute_metrics(&[pair(f64::NAN, 1.0), pair(1.0, 1.0)], 10.0).unwrap();
        assert_eq!(r.n_pairs, 1);
        assert_eq!(r.mape, None);
    }

    #[test]
    fn external_alignment() {
        let t = |h| Utc.with_ymd_and_hms(2024, 6, 1, h, 0, 0).unwrap();
        let est = |h, v| TimedEstimate {
            time: t(h),
            value: v,
            interval: None,
        };
        let obs = vec![(t(10), 100.0), (t(11), 200.0)];
        let model = vec![est(10, 110.0), est(11, 190.0), est(12, 5.0)];
        let external = vec![est(10, 100.0), est(11, 200.0)];
        let (m, e) = compare_external(&model, &external, &obs, 10.0).unwrap();
        assert_eq!(m.n_pairs, 2);
        assert_eq!(e.rmse, 0.0);
        let (a, b) = compare_external(&external, &external, &obs, 10.0).unwrap();
        assert_eq!(a, b);
        let far = vec![est(20, 1.0)];
        assert!(matches!(
            compare_external(&far, &external, &obs, 10.0),
            Err(Error::Alignment(_))
        ));
    }

    #[test]
    fn csv_layout() {
        let r = compute_metrics(&[pair(2.0, 1.0)], 10.0).unwrap();
        let mut buf = Vec::new();
        write_report_csv(&[("a".into(), Some(r)), ("b".into(), None)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "station,rmse,mae,mape,mbe,coverage95,me,n_pairs");
        assert!(lines[1].starts_with("a,1.000000,1.000000,NA,1.000000,1.000000"));
        assert_eq!(lines[2], "b,NA,NA,NA,NA,NA,NA,0");
    }

    proptest! {
        #[test]
        fn invariants(v in prop::collection::vec((0.0f64..1000.0, 0.0f64..1000.0, 0.0f64..50.0), 1..80)) {
            let pairs: Vec<PairedValue> = v.iter().map(|&(p, o, w)| PairedValue {
                pred: p, interval: Some((p - w, p + w)), obs: o,
            }).collect();
            let r = compute_metrics(&pairs, 10.0).unwrap();
            prop_assert!(r.rmse >= r.mae - 1e-12);
            prop_assert_eq!(r.mbe, -r.me);
            let c = r.coverage95.unwrap();
            prop_assert!((0.0..=1.0).contains(&c));

            let mut rev = pairs.clone();
            rev.reverse();
            let r2 = compute_metrics(&rev, 10.0).unwrap();
            prop_assert!((r.rmse - r2.rmse).abs() < 1e-9 && (r.mae - r2.mae).abs() < 1e-9);
            prop_assert_eq!(r.coverage95, r2.coverage95);

            let g = |x: f64| (x / 100.0).exp() - 1.0;
            let mapped: Vec<PairedValue> = pairs.iter().map(|p| PairedValue {
                pred: g(p.pred),
                interval: p.interval.map(|(lo, hi)| (g(lo), g(hi))),
                obs: g(p.obs),
            }).collect();
            prop_assert_eq!(compute_metrics(&mapped, 10.0).unwrap().coverage95, r.coverage95);
        }
    }
}

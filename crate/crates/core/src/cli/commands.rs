//! Batch commands behind the `solmap` binary. Every command writes plain
//! CSV or text files and is deterministic given its configuration and seed.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{DateTime, NaiveDate, NaiveTime, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::ingest::{
    aggregate, format_timestamp, parse_station_csv, parse_timestamp, read_stations_file, to_log_scale,
    write_series_csv, write_stations, ColumnMap, IrradianceSeries, ParseDiagnostics, Resolution,
    StationMeta, TransformedSeries, MISSING,
};
use crate::metrics::{
    compare_external, loso_cv, write_report_csv, write_report_text, CvSettings, StgpDayFitter,
    TimedEstimate,
};
use crate::parallel::parallel_map;
use crate::pvsim::{clipping_report, simulate_pv, PvSimSettings, PvSystem};
use crate::stgp::artifact::{load_model, save_model};
use crate::stgp::fit::day_origin;
use crate::stgp::predict::{joint_draws, predict_at};
use crate::stgp::{
    build_mesh, fit_day, project, unproject, DayData, DayModelPosterior, Mesh, PlanarPoint, Prediction,
    PredictionKind, Target,
};
use crate::synthetic::{generate, SyntheticSettings};
use crate::transposition::{SkyModel, SkyVariant};

/// How a command finished when it did not fail outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Some days or folds failed; the rest were written.
    Partial,
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 2,
        Error::Schema(_)
        | Error::EmptyInput(_)
        | Error::DuplicateTimestamp(_)
        | Error::Resolution(_)
        | Error::Domain(_)
        | Error::Range(_)
        | Error::Input(_)
        | Error::Coverage { .. }
        | Error::GridCoverage { .. }
        | Error::Alignment(_)
        | Error::Format(_)
        | Error::Mesh(_)
        | Error::Io(_)
        | Error::Csv(_) => 3,
        _ => 1,
    }
}

fn fmt(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        MISSING.to_string()
    }
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

/// Raw station data as configured.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub stations: Vec<StationMeta>,
    pub series: Vec<IrradianceSeries>,
    pub diagnostics: Vec<ParseDiagnostics>,
}

pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let stations = read_stations_file(&cfg.paths.stations)?;
    let mut series = Vec::with_capacity(stations.len());
    let mut diagnostics = Vec::with_capacity(stations.len());
    for st in &stations {
        let path = cfg.paths.data_dir.join(format!("{}.csv", st.station_id));
        let parsed = parse_station_csv(&path, &ColumnMap::default(), Some(st))?;
        series.push(parsed.series);
        diagnostics.push(parsed.diagnostics);
    }
    Ok(Dataset {
        stations,
        series,
        diagnostics,
    })
}

/// Station series at the model resolution.
pub fn model_series(data: &Dataset, resolution: Resolution, min_fraction: f64) -> Result<Vec<IrradianceSeries>> {
    data.series
        .iter()
        .map(|s| {
            if s.resolution() == resolution {
                Ok(s.clone())
            } else {
                aggregate(s, resolution, min_fraction)
            }
        })
        .collect()
}

fn log_series(series: &[IrradianceSeries]) -> Result<Vec<TransformedSeries>> {
    series.iter().map(to_log_scale).collect()
}

/// Days with at least one sample in any series, restricted to the range.
pub fn select_days(series: &[IrradianceSeries], from: Option<NaiveDate>, to: Option<NaiveDate>) -> Vec<NaiveDate> {
    let days: BTreeSet<NaiveDate> = series
        .iter()
        .flat_map(|s| s.samples().iter().map(|x| x.time.date_naive()))
        .collect();
    days.into_iter()
        .filter(|d| from.is_none_or(|f| *d >= f) && to.is_none_or(|t| *d <= t))
        .collect()
}

fn station_mesh(cfg: &RunConfig, stations: &[StationMeta]) -> Result<Mesh> {
    let points = stations
        .iter()
        .map(|s| project(s.latitude, s.longitude))
        .collect::<Result<Vec<_>>>()?;
    build_mesh(&points, &cfg.mesh)
}

pub fn resolution_dir(resolution: Resolution) -> String {
    resolution.to_string()
}

pub fn cmd_ingest(cfg: &RunConfig, resolution: Resolution, out: &mut dyn Write) -> Result<Outcome> {
    let data = load_dataset(cfg)?;
    let series = model_series(&data, resolution, cfg.min_fraction)?;
    let dir = cfg.paths.output_dir.join("ingest").join(resolution_dir(resolution));
    fs::create_dir_all(&dir)?;
    let mut report = csv::Writer::from_path(dir.join("report.csv"))?;
    report.write_record([
        "station_id",
        "raw_rows",
        "raw_missing",
        "unparseable_rows",
        "clamped_negative",
        "bins",
        "missing_bins",
    ])?;
    for ((st, s), d) in data.stations.iter().zip(&series).zip(&data.diagnostics) {
        write_series_csv(s, fs::File::create(dir.join(format!("{}.csv", st.station_id)))?)?;
        report.write_record([
            st.station_id.clone(),
            d.rows.to_string(),
            d.missing.to_string(),
            d.unparseable_rows.to_string(),
            d.clamped_negative.to_string(),
            s.len().to_string(),
            s.missing_count().to_string(),
        ])?;
    }
    report.flush()?;
    writeln!(out, "ingested {} station(s) at {resolution} into {}", series.len(), dir.display())?;
    Ok(Outcome::Success)
}

pub fn model_dir(cfg: &RunConfig, resolution: Resolution) -> PathBuf {
    cfg.paths.output_dir.join("models").join(resolution_dir(resolution))
}

pub fn artifact_path(cfg: &RunConfig, resolution: Resolution, day: NaiveDate) -> PathBuf {
    model_dir(cfg, resolution).join(format!("{day}.solmap"))
}

struct DayOutcome {
    day: NaiveDate,
    result: Result<DayModelPosterior>,
    observations: usize,
    seconds: f64,
}

pub fn cmd_fit(
    cfg: &RunConfig,
    resolution: Resolution,
    from: Option<NaiveDate>,
    to: Option<NaiveDate>,
    force: bool,
    out: &mut dyn Write,
) -> Result<Outcome> {
    let data = load_dataset(cfg)?;
    let series = model_series(&data, resolution, cfg.min_fraction)?;
    let days = select_days(&series, from, to);
    if days.is_empty() {
        writeln!(out, "nothing to do: no data days in the requested range")?;
        return Ok(Outcome::Success);
    }
    let conflicts: Vec<PathBuf> = days
        .iter()
        .map(|&d| artifact_path(cfg, resolution, d))
        .filter(|p| p.exists())
        .collect();
    if !conflicts.is_empty() && !force {
        let list: Vec<String> = conflicts.iter().map(|p| p.display().to_string()).collect();
        return Err(Error::Config(format!(
            "refusing to overwrite existing outputs without --force: {}",
            list.join(", ")
        )));
    }
    let logs = log_series(&series)?;
    let mesh = station_mesh(cfg, &data.stations)?;
    let dir = model_dir(cfg, resolution);
    fs::create_dir_all(&dir)?;

    let outcomes = parallel_map(&days, cfg.jobs, |&day| {
        let clock = Instant::now();
        let mut observations = 0;
        let result = DayData::from_series(&logs, day).and_then(|d| {
            observations = d.observations.len();
            let model = fit_day(&d, &mesh, &cfg.fit, None)?;
            save_model(&artifact_path(cfg, resolution, day), &mesh, &model)?;
            Ok(model)
        });
        DayOutcome {
            day,
            result,
            observations,
            seconds: clock.elapsed().as_secs_f64(),
        }
    });

    let mut manifest = csv::Writer::from_path(dir.join("manifest.csv"))?;
    manifest.write_record([
        "day",
        "status",
        "converged",
        "iterations",
        "log_posterior",
        "sigma",
        "range_km",
        "rho",
        "sigma_eps",
        "beta0",
        "nodes",
        "observations",
        "artifact",
        "message",
    ])?;
    let mut failed = 0;
    for o in &outcomes {
        let file = format!("{}.solmap", o.day);
        let row = match &o.result {
            Ok(m) => vec![
                o.day.to_string(),
                "ok".into(),
                m.diagnostics.converged.to_string(),
                m.diagnostics.iterations.to_string(),
                fmt(m.diagnostics.log_posterior),
                fmt(m.hyper.sigma),
                fmt(m.hyper.range),
                fmt(m.hyper.rho),
                fmt(m.hyper.sigma_eps),
                fmt(m.hyper.beta0),
                m.node_count.to_string(),
                o.observations.to_string(),
                file,
                String::new(),
            ],
            Err(e) => {
                failed += 1;
                let mut r = vec![o.day.to_string(), "failed".into(), "false".into()];
                r.extend(std::iter::repeat_n(MISSING.to_string(), 7));
                r.extend([mesh.node_count().to_string(), o.observations.to_string(), String::new(), e.to_string()]);
                r
            }
        };
        manifest.write_record(&row)?;
        eprintln!("fit {}: {:.3} s", o.day, o.seconds);
    }
    manifest.flush()?;
    writeln!(
        out,
        "fitted {} of {} day(s) at {resolution}; manifest in {}",
        days.len() - failed,
        days.len(),
        dir.display()
    )?;
    Ok(if failed > 0 { Outcome::Partial } else { Outcome::Success })
}

/// Rectangular grid in the planar projection, cell centres spaced `cell_km`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lat_min: f64,
    pub lon_min: f64,
    pub lat_max: f64,
    pub lon_max: f64,
    pub cell_km: f64,
}

impl GridSpec {
    pub fn parse(bbox: &str, cell_km: f64) -> Result<Self> {
        let v: Vec<f64> = bbox
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("bbox '{bbox}': {e}")))?;
        let [lat_min, lon_min, lat_max, lon_max] = v[..] else {
            return Err(Error::Config(format!("bbox '{bbox}' needs lat_min,lon_min,lat_max,lon_max")));
        };
        if !(lat_min < lat_max && lon_min < lon_max) {
            return Err(Error::Config(format!("bbox '{bbox}' is empty")));
        }
        if !(cell_km > 0.0 && cell_km.is_finite()) {
            return Err(Error::Config(format!("cell size {cell_km} km must be positive")));
        }
        Ok(Self {
            lat_min,
            lon_min,
            lat_max,
            lon_max,
            cell_km,
        })
    }

    /// Cell centres, south to north then west to east.
    pub fn cells(&self) -> Result<Vec<PlanarPoint>> {
        let sw = project(self.lat_min, self.lon_min)?;
        let ne = project(self.lat_max, self.lon_max)?;
        let nx = ((ne.east - sw.east) / self.cell_km).ceil().max(1.0) as usize;
        let ny = ((ne.north - sw.north) / self.cell_km).ceil().max(1.0) as usize;
        let mut out = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                out.push(PlanarPoint::new(
                    sw.east + (i as f64 + 0.5) * self.cell_km,
                    sw.north + (j as f64 + 0.5) * self.cell_km,
                ));
            }
        }
        Ok(out)
    }
}

/// Time indices from `HH:MM` strings; all steps of the day when empty.
pub fn time_indices(model: &DayModelPosterior, times: &[String]) -> Result<Vec<usize>> {
    if times.is_empty() {
        return Ok((0..model.time_count).collect());
    }
    times
        .iter()
        .map(|s| {
            let t = NaiveTime::parse_from_str(s.trim(), "%H:%M")
                .map_err(|e| Error::Config(format!("time '{s}': {e}")))?;
            let instant = day_origin(model.day) + (t - NaiveTime::MIN);
            model.time_index(instant)
        })
        .collect()
}

const PREDICTION_HEADER: [&str; 8] = ["lat", "lon", "time", "median_wm2", "mean_log", "sd_log", "lo95_wm2", "hi95_wm2"];

fn prediction_row(p: &Prediction) -> Result<Vec<String>> {
    let (lat, lon) = unproject(p.location)?;
    Ok(vec![
        fmt(lat),
        fmt(lon),
        format_timestamp(p.time),
        fmt(p.median_wm2),
        fmt(p.mean_log),
        fmt(p.sd_log),
        fmt(p.lo95_wm2),
        fmt(p.hi95_wm2),
    ])
}

fn write_predictions(path: &Path, preds: &[Prediction]) -> Result<()> {
    create_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(PREDICTION_HEADER)?;
    for p in preds {
        w.write_record(prediction_row(p)?)?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_predict_grid(
    model_path: &Path,
    grid: &GridSpec,
    times: &[String],
    kind: PredictionKind,
    output: &Path,
    out: &mut dyn Write,
) -> Result<Outcome> {
    let (mesh, model) = load_model(model_path)?;
    let cells = grid.cells()?;
    let outside: Vec<String> = cells
        .iter()
        .enumerate()
        .filter(|(_, c)| !mesh.contains(**c))
        .map(|(k, c)| {
            let (lat, lon) = unproject(*c).unwrap_or((f64::NAN, f64::NAN));
            format!("#{k} ({lat:.4}, {lon:.4})")
        })
        .collect();
    if !outside.is_empty() {
        return Err(Error::GridCoverage {
            count: outside.len(),
            cells: outside.join("; "),
        });
    }
    let indices = time_indices(&model, times)?;
    let targets: Vec<Target> = indices
        .iter()
        .flat_map(|&t| cells.iter().map(move |&point| Target { point, time_index: t }))
        .collect();
    let preds = crate::stgp::predict(&model, &mesh, &targets, kind)?;
    write_predictions(output, &preds)?;
    writeln!(out, "wrote {} grid predictions to {}", preds.len(), output.display())?;
    Ok(Outcome::Success)
}

pub fn cmd_predict_point(
    model_path: &Path,
    lat: f64,
    lon: f64,
    times: &[String],
    kind: PredictionKind,
    output: &Path,
    out: &mut dyn Write,
) -> Result<Outcome> {
    let (mesh, model) = load_model(model_path)?;
    let point = project(lat, lon)?;
    let targets: Vec<Target> = time_indices(&model, times)?
        .into_iter()
        .map(|time_index| Target { point, time_index })
        .collect();
    let preds = crate::stgp::predict(&model, &mesh, &targets, kind)?;
    write_predictions(output, &preds)?;
    writeln!(out, "wrote {} point predictions to {}", preds.len(), output.display())?;
    Ok(Outcome::Success)
}

pub fn cmd_cv(
    cfg: &RunConfig,
    resolution: Resolution,
    from: Option<NaiveDate>,
    to: Option<NaiveDate>,
    out: &mut dyn Write,
) -> Result<Outcome> {
    let data = load_dataset(cfg)?;
    let series = model_series(&data, resolution, cfg.min_fraction)?;
    let days = select_days(&series, from, to);
    if days.is_empty() {
        writeln!(out, "nothing to do: no data days in the requested range")?;
        return Ok(Outcome::Success);
    }
    let logs = log_series(&series)?;
    let fitter = StgpDayFitter {
        mesh: cfg.mesh,
        fit: cfg.fit,
        kind: PredictionKind::Observation,
    };
    let settings = CvSettings {
        mape_threshold: cfg.metrics.mape_threshold,
        jobs: cfg.jobs,
    };
    let report = loso_cv(&logs, &days, &fitter, &settings)?;

    let dir = cfg.paths.output_dir.join("cv").join(resolution_dir(resolution));
    fs::create_dir_all(&dir)?;
    write_report_csv(&report.per_station, fs::File::create(dir.join("per_station.csv"))?)?;
    write_report_csv(&[("pooled".to_string(), report.pooled)], fs::File::create(dir.join("pooled.csv"))?)?;

    let mut preds = csv::Writer::from_path(dir.join("predictions.csv"))?;
    preds.write_record(["station_id", "time", "observed_wm2", "median_wm2", "lo95_wm2", "hi95_wm2"])?;
    for f in &report.folds {
        for (p, o) in f.predictions.iter().zip(&f.observations) {
            preds.write_record([
                f.held_out_station.clone(),
                format_timestamp(p.time),
                fmt(*o),
                fmt(p.median_wm2),
                fmt(p.lo95_wm2),
                fmt(p.hi95_wm2),
            ])?;
        }
    }
    preds.flush()?;

    let mut fails = csv::Writer::from_path(dir.join("failures.csv"))?;
    fails.write_record(["station_id", "day", "message"])?;
    for f in &report.failures {
        fails.write_record([f.station.clone(), f.day.to_string(), f.message.clone()])?;
    }
    fails.flush()?;

    let mut text = fs::File::create(dir.join("report.txt"))?;
    for (id, r) in &report.per_station {
        if let Some(r) = r {
            write_report_text(id, r, &mut text)?;
        }
    }
    if let Some(r) = &report.pooled {
        write_report_text("pooled", r, &mut text)?;
    }
    writeln!(text, "[failures]\ncount {}", report.failures.len())?;

    writeln!(
        out,
        "cross-validated {} station(s) over {} day(s); {} fold-day failure(s); reports in {}",
        report.folds.len(),
        days.len(),
        report.failures.len(),
        dir.display()
    )?;
    if report.pooled.is_none() {
        return Err(Error::Input("no fold produced any prediction".into()));
    }
    Ok(if report.failures.is_empty() { Outcome::Success } else { Outcome::Partial })
}

/// Where `pv` takes its irradiance from.
#[derive(Debug, Clone, PartialEq)]
pub enum IrradianceSource {
    /// A fitted day model; predictions at the site carry uncertainty.
    Model { path: PathBuf, joint: bool },
    /// A measured or external GHI series (columns `timestamp,ghi_wm2`).
    Csv(PathBuf),
}

pub fn sky_model(cfg: &RunConfig) -> Result<SkyModel> {
    let variant = match cfg.pv.sky.as_str() {
        "anisotropic" => SkyVariant::Anisotropic,
        "isotropic" => SkyVariant::Isotropic,
        other => return Err(Error::Config(format!("unknown sky model '{other}'"))),
    };
    SkyModel::new(variant, cfg.pv.albedo).map_err(|e| Error::Config(e.to_string()))
}

fn csv_predictions(path: &Path, site: &StationMeta, day: Option<NaiveDate>) -> Result<Vec<Prediction>> {
    let parsed = parse_station_csv(path, &ColumnMap::default(), Some(site))?;
    let point = project(site.latitude, site.longitude)?;
    parsed
        .series
        .samples()
        .iter()
        .filter(|s| day.is_none_or(|d| s.time.date_naive() == d))
        .map(|s| {
            let g = s
                .ghi
                .ok_or_else(|| Error::Input(format!("missing irradiance at {}", format_timestamp(s.time))))?;
            Ok(Prediction::from_log(point, s.time, g.ln_1p(), 0.0))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_pv(
    cfg: &RunConfig,
    site: &StationMeta,
    day: Option<NaiveDate>,
    source: &IrradianceSource,
    system: Option<&Path>,
    seed: u64,
    output_stem: &Path,
    out: &mut dyn Write,
) -> Result<Outcome> {
    let system_path = system
        .map(Path::to_path_buf)
        .or_else(|| cfg.pv.system.clone())
        .ok_or_else(|| Error::Config("no PV system file given (pv.system or --system)".into()))?;
    let sys = PvSystem::from_file(&system_path)?;
    let settings = PvSimSettings {
        draws: cfg.pv.draws,
        seed,
        sky: sky_model(cfg)?,
        ..PvSimSettings::default()
    };
    let point = project(site.latitude, site.longitude)?;
    let (preds, draws) = match source {
        IrradianceSource::Model { path, joint } => {
            let (mesh, model) = load_model(path)?;
            if day.is_some_and(|d| d != model.day) {
                return Err(Error::Input(format!("model {} is for {}, not the requested day", path.display(), model.day)));
            }
            let at: Vec<(PlanarPoint, DateTime<Utc>)> =
                (0..model.time_count).map(|t| (point, model.time_of(t))).collect();
            let preds = predict_at(&model, &mesh, &at, PredictionKind::Observation)?;
            let draws = if *joint {
                let targets: Vec<Target> = (0..model.time_count).map(|t| Target { point, time_index: t }).collect();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Some(joint_draws(&model, &mesh, &targets, PredictionKind::Observation, cfg.pv.draws, &mut rng)?)
            } else {
                None
            };
            (preds, draws)
        }
        IrradianceSource::Csv(path) => (csv_predictions(path, site, day)?, None),
    };
    if preds.is_empty() {
        return Err(Error::Input("no irradiance samples for the requested day".into()));
    }
    let sim = simulate_pv(&preds, draws.as_deref(), &sys, site, &settings)?;
    let native = clipping_report(&sim.median)?;
    let hourly = clipping_report(&sim.median.average_to(Resolution::HOURLY, &sys)?)?;

    let csv_path = output_stem.with_extension("csv");
    create_parent(&csv_path)?;
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["timestamp", "p_dc_w", "p_ac_w", "clipped_w", "lo95_w", "hi95_w", "ghi_wm2", "poa_wm2"])?;
    for (k, s) in sim.median.samples.iter().enumerate() {
        w.write_record([
            format_timestamp(s.time),
            fmt(s.p_dc),
            fmt(s.p_ac),
            fmt(s.clipped),
            fmt(sim.ac_lo95[k]),
            fmt(sim.ac_hi95[k]),
            fmt(preds[k].median_wm2),
            fmt(sim.poa_median[k]),
        ])?;
    }
    w.flush()?;

    let summary_path = output_stem.with_extension("summary.txt");
    let mut f = fs::File::create(&summary_path)?;
    writeln!(f, "site {}", site.station_id)?;
    writeln!(f, "resolution {}", sim.median.resolution)?;
    writeln!(f, "dc_capacity_w {}", fmt(sys.dc_capacity()))?;
    writeln!(f, "inverter_ac_limit_w {}", fmt(sys.inverter_ac_limit))?;
    writeln!(f, "dc_ac_ratio {}", fmt(sys.dc_ac_ratio()))?;
    writeln!(f, "potential_energy_wh {}", fmt(native.potential_energy_wh))?;
    writeln!(f, "delivered_energy_wh {}", fmt(native.delivered_energy_wh))?;
    writeln!(f, "energy_lost_wh {}", fmt(native.energy_lost_wh))?;
    writeln!(f, "loss_fraction_native {}", fmt(native.loss_fraction))?;
    writeln!(f, "loss_fraction_hourly {}", fmt(hourly.loss_fraction))?;
    writeln!(f, "draws {}", draws.as_ref().map_or(settings.draws, Vec::len))?;
    writeln!(f, "joint_draws {}", draws.is_some())?;
    writeln!(f, "seed {seed}")?;
    writeln!(
        out,
        "PV power for {} written to {} (clipping loss {:.4}% native, {:.4}% hourly)",
        site.station_id,
        csv_path.display(),
        100.0 * native.loss_fraction,
        100.0 * hourly.loss_fraction
    )?;
    Ok(Outcome::Success)
}

/// Reads `timestamp,value[,lo95,hi95]` with `NA` for missing values.
pub fn read_timed_csv(path: &Path) -> Result<Vec<TimedEstimate>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = |n: &str| headers.iter().position(|h| h == n);
    let (Some(tc), Some(vc)) = (col("timestamp"), col("value")) else {
        return Err(Error::Schema(format!("{}: needs timestamp and value columns", path.display())));
    };
    let (lc, hc) = (col("lo95"), col("hi95"));
    let num = |s: Option<&str>| s.filter(|v| *v != MISSING && !v.is_empty()).and_then(|v| v.parse::<f64>().ok());
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let time = rec
            .get(tc)
            .and_then(parse_timestamp)
            .ok_or_else(|| Error::Schema(format!("{}: bad timestamp on line {}", path.display(), line + 2)))?;
        let value = num(rec.get(vc)).unwrap_or(f64::NAN);
        let interval = match (lc.and_then(|c| num(rec.get(c))), hc.and_then(|c| num(rec.get(c)))) {
            (Some(l), Some(h)) => Some((l, h)),
            _ => None,
        };
        out.push(TimedEstimate { time, value, interval });
    }
    Ok(out)
}

pub fn cmd_compare(
    cfg: &RunConfig,
    model: &Path,
    external: &Path,
    observed: &Path,
    output: &Path,
    out: &mut dyn Write,
) -> Result<Outcome> {
    let m = read_timed_csv(model)?;
    let e = read_timed_csv(external)?;
    let o: Vec<(DateTime<Utc>, f64)> = read_timed_csv(observed)?.iter().map(|x| (x.time, x.value)).collect();
    let (rm, re) = compare_external(&m, &e, &o, cfg.metrics.mape_threshold)?;
    create_parent(output)?;
    write_report_csv(
        &[("model".to_string(), Some(rm)), ("external".to_string(), Some(re))],
        fs::File::create(output)?,
    )?;
    writeln!(
        out,
        "compared {} shared timestamps: model rmse {:.3}, external rmse {:.3}",
        rm.n_pairs, rm.rmse, re.rmse
    )?;
    Ok(Outcome::Success)
}

/// Stations of the bundled synthetic dataset.
pub const SYNTH_STATIONS: [&str; 6] = ["valentia", "malin_head", "johnstown_castle", "mace_head", "mullingar", "moore_park"];

/// Irish station coordinates shipped with the crate.
pub const IRELAND_STATIONS: &str = include_str!("../../data/ireland_stations.csv");

pub const EXAMPLE_PV_SYSTEM: &str = "panel_count = 7
panel_stc_watts = 400.0
tilt_deg = 35.0
azimuth_deg = 0.0
inverter_ac_limit_w = 2450.0
performance_ratio = 0.85
inverter_efficiency = 0.96
";

/// Writes a synthetic dataset (station list, one 1-minute CSV per station,
/// an example PV system and a run configuration) into `dir`.
pub fn cmd_synth(
    dir: &Path,
    ids: &[String],
    first_day: NaiveDate,
    days: usize,
    seed: u64,
    out: &mut dyn Write,
) -> Result<Outcome> {
    let all = crate::ingest::read_stations(IRELAND_STATIONS.as_bytes())?;
    let stations = ids
        .iter()
        .map(|id| {
            all.iter()
                .find(|s| &s.station_id == id)
                .cloned()
                .ok_or_else(|| Error::Config(format!("unknown station '{id}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    let settings = SyntheticSettings {
        first_day,
        days,
        seed,
        ..SyntheticSettings::default()
    };
    let series = generate(&stations, &settings)?;
    fs::create_dir_all(dir)?;
    write_stations(&stations, fs::File::create(dir.join("stations.csv"))?)?;
    for s in &series {
        write_series_csv(s, fs::File::create(dir.join(format!("{}.csv", s.station().station_id)))?)?;
    }
    fs::write(dir.join("pv_system.toml"), EXAMPLE_PV_SYSTEM)?;
    fs::write(
        dir.join("config.toml"),
        format!(
            "resolution = \"hourly\"\nseed = {seed}\njobs = 2\n\n[paths]\nstations = \"stations.csv\"\ndata_dir = \".\"\noutput_dir = \"out\"\n\n[pv]\nsystem = \"pv_system.toml\"\n"
        ),
    )?;
    writeln!(out, "wrote {} synthetic station(s) over {days} day(s) to {}", series.len(), dir.display())?;
    Ok(Outcome::Success)
}

/// Looks a station up in the configured list.
pub fn find_station(cfg: &RunConfig, id: &str) -> Result<StationMeta> {
    read_stations_file(&cfg.paths.stations)?
        .into_iter()
        .find(|s| s.station_id == id)
        .ok_or_else(|| Error::Config(format!("station '{id}' not in {}", cfg.paths.stations.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_cells_count() {
        let g = GridSpec::parse("53.0,-8.0,53.25,-7.6", 10.0).unwrap();
        let cells = g.cells().unwrap();
        assert_eq!(cells.len(), 3 * 3);
        assert!(GridSpec::parse("53,-8,52,-7", 10.0).is_err());
        assert!(GridSpec::parse("53,-8,54", 10.0).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::Input("x".into())), 3);
        assert_eq!(exit_code(&Error::Conditioning("x".into())), 1);
    }
}

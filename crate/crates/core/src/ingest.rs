//! Station irradiance files: parsing, temporal aggregation and the
//! `ln(ghi + 1)` transform used by the spatio-temporal model.
//!
//! Timestamps are UTC throughout. Missing values are `None`; a zero is a
//! real (night-time) observation and is never used as a missing marker.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, TimeZone, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MISSING: &str = "NA";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationMeta {
    pub station_id: String,
    pub name: String,
    /// Degrees north.
    pub latitude: f64,
    /// Degrees east.
    pub longitude: f64,
}

impl StationMeta {
    pub fn new(
        station_id: impl Into<String>,
        name: impl Into<String>,
        latitude: f64,
        longitude: f64,
    ) -> Result<Self> {
        if !latitude.is_finite() || !(-90.0..=90.0).contains(&latitude) {
            return Err(Error::Domain(format!("latitude {latitude} outside [-90, 90]")));
        }
        if !longitude.is_finite() || !(-180.0..=180.0).contains(&longitude) {
            return Err(Error::Domain(format!(
                "longitude {longitude} outside [-180, 180]"
            )));
        }
        Ok(Self {
            station_id: station_id.into(),
            name: name.into(),
            latitude,
            longitude,
        })
    }
}

/// Sampling interval in whole minutes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Resolution(u32);

impl Resolution {
    pub const ONE_MINUTE: Resolution = Resolution(1);
    pub const TEN_MINUTES: Resolution = Resolution(10);
    pub const HOURLY: Resolution = Resolution(60);

    pub fn from_minutes(minutes: u32) -> Result<Self> {
        if minutes == 0 || 1440 % minutes != 0 {
            return Err(Error::Resolution(format!(
                "{minutes} min does not divide a day"
            )));
        }
        Ok(Self(minutes))
    }

    pub fn minutes(self) -> u32 {
        self.0
    }

    pub fn seconds(self) -> i64 {
        i64::from(self.0) * 60
    }

    pub fn hours(self) -> f64 {
        f64::from(self.0) / 60.0
    }

    pub fn steps_per_day(self) -> usize {
        (1440 / self.0) as usize
    }

    pub fn is_aligned(self, t: DateTime<Utc>) -> bool {
        t.timestamp().rem_euclid(self.seconds()) == 0
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            60 => write!(f, "hourly"),
            m => write!(f, "{m}min"),
        }
    }
}

impl std::str::FromStr for Resolution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "hourly" | "60min" | "1h" => Ok(Self::HOURLY),
            "10min" => Ok(Self::TEN_MINUTES),
            "1min" => Ok(Self::ONE_MINUTE),
            other => other
                .strip_suffix("min")
                .and_then(|m| m.parse::<u32>().ok())
                .ok_or_else(|| Error::Resolution(format!("unknown resolution '{other}'")))
                .and_then(Self::from_minutes),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub time: DateTime<Utc>,
    /// W/m², `None` when missing.
    pub ghi: Option<f64>,
}

/// GHI observations for one station at one resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct IrradianceSeries {
    station: StationMeta,
    resolution: Resolution,
    samples: Vec<Sample>,
}

impl IrradianceSeries {
    pub fn new(station: StationMeta, resolution: Resolution, samples: Vec<Sample>) -> Result<Self> {
        for pair in samples.windows(2) {
            if pair[1].time == pair[0].time {
                return Err(Error::DuplicateTimestamp(pair[0].time));
            }
            if pair[1].time < pair[0].time {
                return Err(Error::Input(format!(
                    "timestamps not increasing at {}",
                    pair[1].time
                )));
            }
        }
        for s in &samples {
            if !resolution.is_aligned(s.time) {
                return Err(Error::Resolution(format!(
                    "{} is not aligned to the {resolution} grid",
                    s.time
                )));
            }
            if let Some(v) = s.ghi {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Domain(format!("ghi {v} at {} is not >= 0", s.time)));
                }
            }
        }
        Ok(Self {
            station,
            resolution,
            samples,
        })
    }

    pub fn station(&self) -> &StationMeta {
        &self.station
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn missing_count(&self) -> usize {
        self.samples.iter().filter(|s| s.ghi.is_none()).count()
    }

    /// Samples falling on `[start, end)`.
    pub fn window(&self, start: DateTime<Utc>, end: DateTime<Utc>) -> &[Sample] {
        let lo = self.samples.partition_point(|s| s.time < start);
        let hi = self.samples.partition_point(|s| s.time < end);
        &self.samples[lo..hi]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogSample {
    pub time: DateTime<Utc>,
    /// `ln(ghi + 1)`, `None` when missing.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformedSeries {
    pub station: StationMeta,
    pub resolution: Resolution,
    pub samples: Vec<LogSample>,
}

/// Column names of a station CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMap {
    pub timestamp: String,
    pub ghi: String,
    pub station_id: String,
    pub latitude: String,
    pub longitude: String,
    /// Sampling interval; inferred from the timestamps when absent.
    pub resolution: Option<Resolution>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            timestamp: "timestamp".into(),
            ghi: "ghi_wm2".into(),
            station_id: "station_id".into(),
            latitude: "lat".into(),
            longitude: "lon".into(),
            resolution: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseDiagnostics {
    pub rows: usize,
    pub missing: usize,
    pub unparseable_rows: usize,
    pub clamped_negative: usize,
    pub messages: Vec<String>,
}

impl ParseDiagnostics {
    pub fn count(&self) -> usize {
        self.messages.len()
    }
}

#[derive(Debug, Clone)]
pub struct ParsedSeries {
    pub series: IrradianceSeries,
    pub diagnostics: ParseDiagnostics,
}

pub fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    let raw = raw.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(raw) {
        return Some(t.with_timezone(&Utc));
    }
    const NAIVE: [&str; 4] = [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ];
    let raw = raw.trim_end_matches('Z');
    NAIVE
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(raw, f).ok())
        .map(|n| Utc.from_utc_datetime(&n))
}

pub fn format_timestamp(t: DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

pub fn parse_station_csv(
    path: &Path,
    schema: &ColumnMap,
    station: Option<&StationMeta>,
) -> Result<ParsedSeries> {
    let file = std::fs::File::open(path)?;
    parse_station_reader(file, &path.display().to_string(), schema, station)
}

/// Parses a station CSV from any reader. `origin` only labels errors.
///
/// Station metadata comes from `station` when given, otherwise from the
/// `station_id`/`lat`/`lon` columns of the first data row.
pub fn parse_station_reader<R: Read>(
    reader: R,
    origin: &str,
    schema: &ColumnMap,
    station: Option<&StationMeta>,
) -> Result<ParsedSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Schema(format!("{origin}: unreadable header: {e}")))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let ts_col = col(&schema.timestamp).ok_or_else(|| {
        Error::Schema(format!("{origin}: missing column '{}'", schema.timestamp))
    })?;
    let ghi_col = col(&schema.ghi)
        .ok_or_else(|| Error::Schema(format!("{origin}: missing column '{}'", schema.ghi)))?;
    let meta_cols = (
        col(&schema.station_id),
        col(&schema.latitude),
        col(&schema.longitude),
    );
    if station.is_none() && !matches!(meta_cols, (Some(_), Some(_), Some(_))) {
        return Err(Error::Schema(format!(
            "{origin}: no station metadata columns and no sidecar entry"
        )));
    }

    let mut diag = ParseDiagnostics::default();
    let mut samples: Vec<Sample> = Vec::new();
    let mut embedded: Option<StationMeta> = None;
    for (line, record) in rdr.records().enumerate() {
        let line = line + 2;
        diag.rows += 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                diag.unparseable_rows += 1;
                diag.messages.push(format!("line {line}: {e}"));
                continue;
            }
        };
        let Some(time) = record.get(ts_col).and_then(parse_timestamp) else {
            diag.unparseable_rows += 1;
            diag.messages.push(format!("line {line}: bad timestamp"));
            continue;
        };
        if station.is_none() && embedded.is_none() {
            if let (Some(i), Some(la), Some(lo)) = meta_cols {
                let lat = record.get(la).and_then(|v| v.parse::<f64>().ok());
                let lon = record.get(lo).and_then(|v| v.parse::<f64>().ok());
                if let (Some(id), Some(lat), Some(lon)) = (record.get(i), lat, lon) {
                    embedded = Some(StationMeta::new(id, id, lat, lon)?);
                }
            }
        }
        let raw = record.get(ghi_col).unwrap_or("");
        let ghi = if raw.eq_ignore_ascii_case(MISSING) || raw.is_empty() {
            diag.missing += 1;
            diag.messages.push(format!("line {line}: missing ghi"));
            None
        } else {
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() && v < 0.0 => {
                    diag.clamped_negative += 1;
                    diag.messages
                        .push(format!("line {line}: negative ghi {v} clamped to 0"));
                    Some(0.0)
                }
                Ok(v) if v.is_finite() => Some(v),
                _ => {
                    diag.missing += 1;
                    diag.messages
                        .push(format!("line {line}: unparseable ghi '{raw}'"));
                    None
                }
            }
        };
        samples.push(Sample { time, ghi });
    }
    if samples.is_empty() {
        return Err(Error::EmptyInput(origin.to_string()));
    }
    samples.sort_by_key(|s| s.time);
    if let Some(dup) = samples.windows(2).find(|w| w[0].time == w[1].time) {
        return Err(Error::DuplicateTimestamp(dup[0].time));
    }
    let station = match station {
        Some(s) => s.clone(),
        None => embedded.ok_or_else(|| {
            Error::Schema(format!("{origin}: station metadata columns unparseable"))
        })?,
    };
    let resolution = match schema.resolution {
        Some(r) => r,
        None => infer_resolution(&samples)?,
    };
    let series = IrradianceSeries::new(station, resolution, samples)?;
    Ok(ParsedSeries {
        series,
        diagnostics: diag,
    })
}

/// Largest whole-minute step dividing every timestamp offset.
fn infer_resolution(samples: &[Sample]) -> Result<Resolution> {
    fn gcd(a: i64, b: i64) -> i64 {
        if b == 0 {
            a.abs()
        } else {
            gcd(b, a % b)
        }
    }
    let step = samples
        .iter()
        .map(|s| s.time.timestamp())
        .fold(0i64, |g, t| gcd(g, t.rem_euclid(86_400)));
    // A lone midnight sample (or all-midnight data) says nothing finer than a day.
    let step = if step == 0 { 86_400 } else { step };
    if step % 60 != 0 {
        return Err(Error::Resolution(format!(
            "timestamps are not on a whole-minute grid (step {step} s)"
        )));
    }
    let mut minutes = (step / 60) as u32;
    // Snap to the largest divisor of a day that divides the observed step.
    while 1440 % minutes != 0 {
        minutes -= 1;
    }
    Resolution::from_minutes(minutes.min(60))
}

/// Reads a sidecar stations file with columns `station_id,name,lat,lon`.
pub fn read_stations_file(path: &Path) -> Result<Vec<StationMeta>> {
    let file = std::fs::File::open(path)?;
    read_stations(file)
}

pub fn read_stations<R: Read>(reader: R) -> Result<Vec<StationMeta>> {
    #[derive(Deserialize)]
    struct Row {
        station_id: String,
        #[serde(default)]
        name: String,
        lat: f64,
        lon: f64,
    }
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out: Vec<StationMeta> = Vec::new();
    for row in rdr.deserialize::<Row>() {
        let row = row.map_err(|e| Error::Schema(format!("stations file: {e}")))?;
        if out.iter().any(|s| s.station_id == row.station_id) {
            return Err(Error::Input(format!(
                "station id '{}' listed twice",
                row.station_id
            )));
        }
        let name = if row.name.is_empty() {
            row.station_id.clone()
        } else {
            row.name
        };
        out.push(StationMeta::new(row.station_id, name, row.lat, row.lon)?);
    }
    Ok(out)
}

pub fn write_stations<W: Write>(stations: &[StationMeta], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["station_id", "name", "lat", "lon"])?;
    for s in stations {
        w.write_record([
            s.station_id.clone(),
            s.name.clone(),
            s.latitude.to_string(),
            s.longitude.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `timestamp,ghi_wm2,station_id,lat,lon` with `NA` for missing.
pub fn write_series_csv<W: Write>(series: &IrradianceSeries, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["timestamp", "ghi_wm2", "station_id", "lat", "lon"])?;
    let st = series.station();
    let (lat, lon) = (st.latitude.to_string(), st.longitude.to_string());
    for s in series.samples() {
        let v = s.ghi.map_or_else(|| MISSING.to_string(), |v| v.to_string());
        w.write_record([
            format_timestamp(s.time).as_str(),
            v.as_str(),
            st.station_id.as_str(),
            lat.as_str(),
            lon.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Bin means over `[bin_start, bin_start + target)`.
///
/// A bin is reported missing when fewer than `min_fraction` of its expected
/// samples are present. Gaps in the input count as missing samples.
pub fn aggregate(
    series: &IrradianceSeries,
    target: Resolution,
    min_fraction: f64,
) -> Result<IrradianceSeries> {
    let src = series.resolution();
    if target.minutes() % src.minutes() != 0 {
        return Err(Error::Resolution(format!(
            "{target} is not a multiple of {src}"
        )));
    }
    if !(min_fraction > 0.0 && min_fraction <= 1.0) {
        return Err(Error::Config(format!(
            "min_fraction {min_fraction} outside (0, 1]"
        )));
    }
    let per_bin = (target.minutes() / src.minutes()) as f64;
    let width = target.seconds();
    let mut bins: Vec<(i64, f64, usize)> = Vec::new();
    for s in series.samples() {
        let start = s.time.timestamp().div_euclid(width) * width;
        if bins.last().map(|b| b.0) != Some(start) {
            bins.push((start, 0.0, 0));
        }
        if let Some(v) = s.ghi {
            let b = bins.last_mut().expect("bin pushed above");
            b.1 += v;
            b.2 += 1;
        }
    }
    let samples = bins
        .into_iter()
        .map(|(start, sum, n)| {
            let ghi = (n > 0 && n as f64 / per_bin >= min_fraction).then(|| sum / n as f64);
            Sample {
                time: Utc.timestamp_opt(start, 0).single().expect("valid bin start"),
                ghi,
            }
        })
        .collect();
    IrradianceSeries::new(series.station().clone(), target, samples)
}

pub fn to_log_scale(series: &IrradianceSeries) -> Result<TransformedSeries> {
    let samples = series
        .samples()
        .iter()
        .map(|s| {
            let value = s.ghi.map(log1p_irradiance).transpose()?;
            Ok(LogSample {
                time: s.time,
                value,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TransformedSeries {
        station: series.station().clone(),
        resolution: series.resolution(),
        samples,
    })
}

pub fn from_log_scale(series: &TransformedSeries) -> Result<IrradianceSeries> {
    let samples = series
        .samples
        .iter()
        .map(|s| Sample {
            time: s.time,
            ghi: s.value.map(|v| v.exp_m1().max(0.0)),
        })
        .collect();
    IrradianceSeries::new(series.station.clone(), series.resolution, samples)
}

pub fn log1p_irradiance(ghi: f64) -> Result<f64> {
    if !(ghi >= 0.0) {
        return Err(Error::Domain(format!("ghi {ghi} is negative")));
    }
    Ok(ghi.ln_1p())
}

/// Groups a set of series by station id.
pub fn index_by_station(series: &[IrradianceSeries]) -> HashMap<&str, &IrradianceSeries> {
    series
        .iter()
        .map(|s| (s.station().station_id.as_str(), s))
        .collect()
}

/// Midnight UTC at the start of the day containing `t`.
pub fn day_start(t: DateTime<Utc>) -> DateTime<Utc> {
    t.with_hour(0)
        .and_then(|t| t.with_minute(0))
        .and_then(|t| t.with_second(0))
        .and_then(|t| t.with_nanosecond(0))
        .expect("midnight exists in UTC")
}

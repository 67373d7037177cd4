use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Parser, Subcommand, ValueEnum};

use solmap::cli::commands::{self, GridSpec, IrradianceSource};
use solmap::cli::config::parse_model_resolution;
use solmap::cli::{exit_code, Outcome, RunConfig, SCHEMA};
use solmap::ingest::{Resolution, StationMeta};
use solmap::stgp::PredictionKind;
use solmap::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "solmap", version, about = "Spatio-temporal solar irradiance mapping and PV clipping analysis")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Model resolution, overriding the configuration.
    #[arg(long, global = true, value_parser = ["hourly", "10min"])]
    resolution: Option<String>,
    /// Worker threads, overriding the configuration.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Random seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    force: bool,
    /// Print the annotated configuration schema and exit.
    #[arg(long)]
    print_schema: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    /// Latent surface, without observation noise.
    Surface,
    /// New observation, with observation noise.
    Observation,
}

impl From<Kind> for PredictionKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Surface => PredictionKind::Surface,
            Kind::Observation => PredictionKind::Observation,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse station files, aggregate to the model resolution and write them out.
    Ingest,
    /// Fit one model per day and write artifacts plus a manifest.
    Fit {
        #[arg(long)]
        from: Option<NaiveDate>,
        #[arg(long)]
        to: Option<NaiveDate>,
    },
    /// Predict on a regular grid from one day model.
    PredictGrid {
        #[arg(long)]
        model: PathBuf,
        /// lat_min,lon_min,lat_max,lon_max in degrees.
        #[arg(long, allow_hyphen_values = true)]
        bbox: String,
        #[arg(long, default_value_t = 10.0)]
        cell_km: f64,
        /// Comma-separated HH:MM times; every step of the day when omitted.
        #[arg(long, value_delimiter = ',')]
        times: Vec<String>,
        #[arg(long, value_enum, default_value_t = Kind::Surface)]
        kind: Kind,
        /// Output CSV; defaults to <output_dir>/grids/<model name>.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predict at one location from one day model.
    PredictPoint {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        lat: f64,
        #[arg(long, allow_hyphen_values = true)]
        lon: f64,
        #[arg(long, value_delimiter = ',')]
        times: Vec<String>,
        #[arg(long, value_enum, default_value_t = Kind::Observation)]
        kind: Kind,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Leave-one-station-out cross-validation.
    Cv {
        #[arg(long)]
        from: Option<NaiveDate>,
        #[arg(long)]
        to: Option<NaiveDate>,
    },
    /// PV power and clipping losses at a site.
    Pv {
        /// Station id from the stations file.
        #[arg(long)]
        site: Option<String>,
        #[arg(long, allow_hyphen_values = true, requires = "lon")]
        lat: Option<f64>,
        #[arg(long, allow_hyphen_values = true, requires = "lat")]
        lon: Option<f64>,
        #[arg(long)]
        day: Option<NaiveDate>,
        /// Day model artifact supplying irradiance with uncertainty.
        #[arg(long, conflicts_with = "irradiance")]
        model: Option<PathBuf>,
        /// GHI series CSV (timestamp,ghi_wm2) instead of a model.
        #[arg(long)]
        irradiance: Option<PathBuf>,
        /// PV system file, overriding the configuration.
        #[arg(long)]
        system: Option<PathBuf>,
        /// Draw whole days jointly from the space-time posterior.
        #[arg(long)]
        joint: bool,
        /// Output path stem; `.csv` and `.summary.txt` are appended.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score model and external series against observations.
    Compare {
        #[arg(long)]
        model_series: PathBuf,
        #[arg(long)]
        external: PathBuf,
        #[arg(long)]
        observed: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic station dataset.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',')]
        stations: Vec<String>,
        #[arg(long, default_value = "2024-06-20")]
        first_day: NaiveDate,
        #[arg(long, default_value_t = 2)]
        days: usize,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config is required for this command".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(r) = &cli.resolution {
        cfg.resolution = r.clone();
    }
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn default_output(cfg: &RunConfig, sub: &str, model: &Path, suffix: &str) -> PathBuf {
    let stem = model.file_stem().map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned());
    cfg.paths.output_dir.join(sub).join(format!("{stem}{suffix}"))
}

fn run(cli: Cli, out: &mut dyn Write) -> Result<Outcome> {
    if cli.print_schema {
        write!(out, "{SCHEMA}")?;
        return Ok(Outcome::Success);
    }
    let Some(command) = &cli.command else {
        return Err(Error::Config("no subcommand given (see --help)".into()));
    };
    if let Command::Synth {
        out: dir,
        stations,
        first_day,
        days,
    } = command
    {
        let ids: Vec<String> = if stations.is_empty() {
            commands::SYNTH_STATIONS.iter().map(|s| s.to_string()).collect()
        } else {
            stations.clone()
        };
        return commands::cmd_synth(dir, &ids, *first_day, *days, cli.seed.unwrap_or(42), out);
    }
    let cfg = load_config(&cli)?;
    let resolution: Resolution = parse_model_resolution(&cfg.resolution)?;
    match command {
        Command::Ingest => commands::cmd_ingest(&cfg, resolution, out),
        Command::Fit { from, to } => commands::cmd_fit(&cfg, resolution, *from, *to, cli.force, out),
        Command::PredictGrid {
            model,
            bbox,
            cell_km,
            times,
            kind,
            out: path,
        } => {
            let grid = GridSpec::parse(bbox, *cell_km)?;
            let path = path.clone().unwrap_or_else(|| default_output(&cfg, "grids", model, ".csv"));
            commands::cmd_predict_grid(model, &grid, times, (*kind).into(), &path, out)
        }
        Command::PredictPoint {
            model,
            lat,
            lon,
            times,
            kind,
            out: path,
        } => {
            let path = path
                .clone()
                .unwrap_or_else(|| default_output(&cfg, "points", model, &format!("_{lat}_{lon}.csv")));
            commands::cmd_predict_point(model, *lat, *lon, times, (*kind).into(), &path, out)
        }
        Command::Cv { from, to } => commands::cmd_cv(&cfg, resolution, *from, *to, out),
        Command::Pv {
            site,
            lat,
            lon,
            day,
            model,
            irradiance,
            system,
            joint,
            out: stem,
        } => {
            let station = match (site, lat, lon) {
                (Some(id), _, _) => commands::find_station(&cfg, id)?,
                (None, Some(la), Some(lo)) => StationMeta::new("site", "site", *la, *lo)?,
                _ => return Err(Error::Config("pv needs --site or --lat/--lon".into())),
            };
            let source = match (model, irradiance) {
                (Some(p), None) => IrradianceSource::Model {
                    path: p.clone(),
                    joint: *joint,
                },
                (None, Some(p)) => IrradianceSource::Csv(p.clone()),
                _ => return Err(Error::Config("pv needs exactly one of --model or --irradiance".into())),
            };
            let label = day.map_or_else(|| "all".to_string(), |d| d.to_string());
            let stem = stem.clone().unwrap_or_else(|| {
                cfg.paths
                    .output_dir
                    .join("pv")
                    .join(format!("{}_{label}_{}", station.station_id, cfg.resolution))
            });
            commands::cmd_pv(&cfg, &station, *day, &source, system.as_deref(), cfg.seed, &stem, out)
        }
        Command::Compare {
            model_series,
            external,
            observed,
            out: path,
        } => {
            let path = path
                .clone()
                .unwrap_or_else(|| cfg.paths.output_dir.join("compare").join("report.csv"));
            commands::cmd_compare(&cfg, model_series, external, observed, &path, out)
        }
        Command::Synth { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout();
    match run(cli, &mut stdout) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => {
            eprintln!("warning: some days or folds failed; see the written reports");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

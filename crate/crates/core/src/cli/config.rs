//! Run configuration read from a TOML file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Resolution;
use crate::metrics::DEFAULT_MAPE_THRESHOLD;
use crate::pvsim::DEFAULT_DRAWS;
use crate::stgp::{FitSettings, MeshSettings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Station list with columns station_id,name,lat,lon.
    pub stations: PathBuf,
    /// Directory holding one `<station_id>.csv` per station.
    pub data_dir: PathBuf,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PvConfig {
    /// PV system description file.
    pub system: Option<PathBuf>,
    pub draws: usize,
    pub albedo: f64,
    /// `anisotropic` or `isotropic`.
    pub sky: String,
}

impl Default for PvConfig {
    fn default() -> Self {
        Self {
            system: None,
            draws: DEFAULT_DRAWS,
            albedo: 0.2,
            sky: "anisotropic".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub mape_threshold: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            mape_threshold: DEFAULT_MAPE_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    /// `hourly` or `10min`.
    #[serde(default = "default_resolution")]
    pub resolution: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    /// Minimum fraction of present samples for an aggregated bin.
    #[serde(default = "default_min_fraction")]
    pub min_fraction: f64,
    #[serde(default)]
    pub mesh: MeshSettings,
    #[serde(default)]
    pub fit: FitSettings,
    #[serde(default)]
    pub pv: PvConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
}

fn default_resolution() -> String {
    "hourly".into()
}

fn default_jobs() -> usize {
    1
}

fn default_min_fraction() -> f64 {
    0.5
}

/// Annotated template printed by `--print-schema`.
pub const SCHEMA: &str = r#"# solmap run configuration (TOML). Relative paths resolve against the
# directory of this file.

resolution = "hourly"     # "hourly" or "10min"
seed = 42                 # Monte Carlo seed
jobs = 1                  # worker threads
min_fraction = 0.5        # present-sample fraction needed for an aggregated bin

[paths]
stations = "stations.csv" # columns station_id,name,lat,lon
data_dir = "."            # one <station_id>.csv per station (timestamp,ghi_wm2)
output_dir = "out"

[mesh]                    # km
inner_max_edge = 38.0
outer_max_edge = 110.0
buffer = 150.0

[fit]
max_iter = 200
grad_tol = 1e-5
restarts = 3

[fit.priors]
rho_precision = 0.15      # Gaussian precision on 2*atanh(rho)
noise_shape = 1.0         # Gamma prior on the noise precision
noise_rate = 5e-5
beta0_precision = 1e-6

[fit.priors.pc]           # P(range < range0) = p_range, P(sigma > sigma0) = p_sigma
range0 = 100.0
p_range = 0.5
sigma0 = 1.5
p_sigma = 0.05

[pv]
system = "pv_system.toml" # optional
draws = 200
albedo = 0.2
sky = "anisotropic"       # or "isotropic"

[metrics]
mape_threshold = 10.0     # W/m2; smaller observations are left out of MAPE
"#;

impl RunConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let abs = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        cfg.paths.stations = abs(&cfg.paths.stations);
        cfg.paths.data_dir = abs(&cfg.paths.data_dir);
        cfg.paths.output_dir = abs(&cfg.paths.output_dir);
        cfg.pv.system = cfg.pv.system.as_deref().map(abs);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    pub fn resolution(&self) -> Result<Resolution> {
        parse_model_resolution(&self.resolution)
    }

    /// Checks referenced paths and numeric settings.
    pub fn validate(&self) -> Result<()> {
        self.resolution()?;
        if !self.paths.stations.is_file() {
            return Err(Error::Config(format!(
                "stations file {} does not exist",
                self.paths.stations.display()
            )));
        }
        if !self.paths.data_dir.is_dir() {
            return Err(Error::Config(format!(
                "data directory {} does not exist",
                self.paths.data_dir.display()
            )));
        }
        if let Some(p) = &self.pv.system {
            if !p.is_file() {
                return Err(Error::Config(format!("PV system file {} does not exist", p.display())));
            }
        }
        if !(self.min_fraction > 0.0 && self.min_fraction <= 1.0) {
            return Err(Error::Config(format!("min_fraction {} outside (0, 1]", self.min_fraction)));
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        if !matches!(self.pv.sky.as_str(), "anisotropic" | "isotropic") {
            return Err(Error::Config(format!("unknown sky model '{}'", self.pv.sky)));
        }
        self.mesh.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.fit.priors.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}

/// Model resolutions are hourly or 10 minutes.
pub fn parse_model_resolution(s: &str) -> Result<Resolution> {
    let r: Resolution = s.parse().map_err(|e: Error| Error::Config(e.to_string()))?;
    if r != Resolution::HOURLY && r != Resolution::TEN_MINUTES {
        return Err(Error::Config(format!("resolution must be hourly or 10min, got {s}")));
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_template_parses() {
        let cfg = RunConfig::parse(SCHEMA, Path::new("/base")).unwrap();
        assert_eq!(cfg.paths.data_dir, Path::new("/base/."));
        assert_eq!(cfg.resolution().unwrap(), Resolution::HOURLY);
        assert_eq!(cfg.mesh, MeshSettings::default());
        assert_eq!(cfg.fit, FitSettings::default());
    }

    #[test]
    fn rejects_unknown_keys_and_resolutions() {
        let bad = "[paths]\nstations='a'\ndata_dir='b'\noutput_dir='c'\nfoo=1\n";
        assert!(matches!(RunConfig::parse(bad, Path::new(".")), Err(Error::Config(_))));
        assert!(parse_model_resolution("1min").is_err());
        assert!(parse_model_resolution("10min").is_ok());
    }
}

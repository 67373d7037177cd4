//! Spatio-temporal mapping of solar irradiance from sparse ground stations.
//!
//! The crate fits one latent Gaussian model per day (Matérn field built from
//! an SPDE mesh, AR(1) in time, Gaussian noise on the `ln(ghi + 1)` scale),
//! predicts irradiance with uncertainty anywhere inside the mesh, converts
//! horizontal irradiance to the plane of a PV array and simulates AC power
//! with inverter clipping bookkeeping.
//!
//! Module map:
//!
//! * [`ingest`]: station CSV parsing, aggregation, log transform
//! * [`solargeom`]: solar position and incidence geometry
//! * [`decomposition`]: GHI split into beam and diffuse parts
//! * [`transposition`]: plane-of-array irradiance
//! * [`stgp`]: mesh, sparse precisions, model fitting and prediction
//! * [`pvsim`]: DC/AC power and clipping losses
//! * [`metrics`]: error metrics, coverage and leave-one-station-out CV
//! * [`cli`]: run configuration and the batch commands of the binary

pub mod cli;
pub mod decomposition;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod parallel;
pub mod pvsim;
pub mod solargeom;
pub mod stgp;
pub mod synthetic;
pub mod transposition;

pub use error::{Error, Result};

//! Spatio-temporal Gaussian model: planar projection, mesh and finite
//! elements, sparse precisions, per-day fitting and prediction.

pub mod artifact;
pub mod fem;
pub mod fit;
pub mod marginal;
pub mod mesh;
pub mod optim;
pub mod precision;
pub mod predict;
pub mod prior;
pub mod projection;
pub mod simulate;
pub mod sparse;

pub use fem::SpdeOperator;
pub use fit::{fit_day, DayData, DayModelPosterior, FitSettings, Observation};
pub use mesh::{build_mesh, Mesh, MeshSettings};
pub use precision::{ar1_precision, spde_precision, st_precision, Hyperparameters};
pub use predict::{predict, Prediction, PredictionKind, Target};
pub use prior::{pc_prior_logdensity, PcPriorSettings, PriorSettings};
pub use projection::{project, unproject, PlanarPoint};

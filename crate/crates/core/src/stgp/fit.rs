//! Per-day model fitting.
//!
//! Observation model: `y = β0 + u(x, t) + ε` with `u ~ N(0, (Q_t ⊗ Q_s)⁻¹)`,
//! `ε ~ N(0, σ_ε²)`. The latent vector is `x = (u, β0)` with `u` in
//! time-major order (`t·n + node`) and the intercept last. Hyperparameters
//! are set to their posterior mode; the latent conditional at the mode is
//! exact because everything is Gaussian.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use chrono::{DateTime, NaiveDate, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use super::fem::SpdeOperator;
use super::marginal::{MarginalProblem, MAX_DENSE_OBSERVATIONS};
use super::mesh::Mesh;
use super::optim::{minimize, BfgsSettings};
use super::precision::{Hyperparameters, MAX_LATENT_DIM};
use super::prior::PriorSettings;
use super::projection::{project, PlanarPoint};
use super::sparse::{CholeskyFactor, CscMatrix, Ordering, SelectedInverse, SymbolicCholesky};
use crate::error::{Error, Result};
use crate::ingest::{Resolution, TransformedSeries};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub point: PlanarPoint,
    pub time_index: usize,
    /// `ln(ghi + 1)`.
    pub value: f64,
}

/// Observations of one UTC day on a fixed time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DayData {
    pub day: NaiveDate,
    pub resolution: Resolution,
    pub time_count: usize,
    pub observations: Vec<Observation>,
}

pub fn day_origin(day: NaiveDate) -> DateTime<Utc> {
    Utc.from_utc_datetime(&day.and_hms_opt(0, 0, 0).expect("midnight exists"))
}

impl DayData {
    /// Collects the non-missing samples of `day` from every series. Series
    /// must share one resolution.
    pub fn from_series(series: &[TransformedSeries], day: NaiveDate) -> Result<Self> {
        let resolution = series
            .first()
            .map(|s| s.resolution)
            .ok_or_else(|| Error::Input("no station series".into()))?;
        if let Some(s) = series.iter().find(|s| s.resolution != resolution) {
            return Err(Error::Input(format!(
                "station {} has resolution {} but {resolution} was expected",
                s.station.station_id, s.resolution
            )));
        }
        let start = day_origin(day);
        let step = resolution.seconds();
        let time_count = resolution.steps_per_day();
        let mut observations = Vec::new();
        for s in series {
            let point = project(s.station.latitude, s.station.longitude)?;
            for smp in &s.samples {
                let offset = (smp.time - start).num_seconds();
                if offset < 0 || offset % step != 0 {
                    continue;
                }
                let idx = (offset / step) as usize;
                if idx >= time_count {
                    continue;
                }
                if let Some(value) = smp.value {
                    observations.push(Observation {
                        point,
                        time_index: idx,
                        value,
                    });
                }
            }
        }
        let data = Self {
            day,
            resolution,
            time_count,
            observations,
        };
        data.check()?;
        Ok(data)
    }

    /// Fitting preconditions: at least two stations with two or more
    /// observed times each.
    pub fn check(&self) -> Result<()> {
        let mut per_site: HashMap<(u64, u64), usize> = HashMap::new();
        for o in &self.observations {
            if o.time_index >= self.time_count || !o.value.is_finite() {
                return Err(Error::Input(format!(
                    "observation at time index {} (value {}) outside the day grid",
                    o.time_index, o.value
                )));
            }
            *per_site
                .entry((o.point.east.to_bits(), o.point.north.to_bits()))
                .or_default() += 1;
        }
        let usable = per_site.values().filter(|&&c| c >= 2).count();
        if usable < 2 {
            return Err(Error::Input(format!(
                "day {} has {usable} station(s) with at least 2 observations; need 2",
                self.day
            )));
        }
        Ok(())
    }

    pub fn time_of(&self, index: usize) -> DateTime<Utc> {
        day_origin(self.day) + chrono::Duration::seconds(index as i64 * self.resolution.seconds())
    }

    pub fn station_points(&self) -> Vec<PlanarPoint> {
        let mut pts: Vec<PlanarPoint> = Vec::new();
        for o in &self.observations {
            if !pts.contains(&o.point) {
                pts.push(o.point);
            }
        }
        pts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitSettings {
    pub priors: PriorSettings,
    pub max_iter: usize,
    pub grad_tol: f64,
    /// Extra attempts from perturbed starting points when the first fails.
    pub restarts: usize,
}

impl Default for FitSettings {
    fn default() -> Self {
        let b = BfgsSettings::default();
        Self {
            priors: PriorSettings::default(),
            max_iter: b.max_iter,
            grad_tol: b.grad_tol,
            restarts: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub evaluations: usize,
    pub grad_norm: f64,
    pub converged: bool,
    pub log_posterior: f64,
    pub restarts_used: usize,
}

/// Unconstrained hyperparameters `(log κ, log σ, 2·atanh ρ, log σ_ε)`.
pub type Theta = [f64; 4];

pub fn theta_from_hyper(h: &Hyperparameters) -> Theta {
    [
        h.kappa().ln(),
        h.sigma.ln(),
        2.0 * h.rho.atanh(),
        h.sigma_eps.ln(),
    ]
}

pub fn hyper_from_theta(theta: &Theta, beta0: f64) -> Hyperparameters {
    Hyperparameters {
        sigma: theta[1].exp(),
        range: Hyperparameters::range_from_kappa(theta[0].exp()),
        rho: (theta[2] / 2.0).tanh(),
        sigma_eps: theta[3].exp(),
        beta0,
    }
}

/// Starting point: range half the station-network diameter, σ the sample
/// standard deviation, ρ = 0.8, σ_ε 30% of the standard deviation.
pub fn default_init(data: &DayData) -> Hyperparameters {
    let pts = data.station_points();
    let diameter = pts
        .iter()
        .flat_map(|a| pts.iter().map(move |b| a.distance(b)))
        .fold(0.0, f64::max);
    let m = data.observations.len() as f64;
    let mean = data.observations.iter().map(|o| o.value).sum::<f64>() / m;
    let var = data
        .observations
        .iter()
        .map(|o| (o.value - mean).powi(2))
        .sum::<f64>()
        / (m - 1.0).max(1.0);
    let sd = var.sqrt().max(1e-2);
    Hyperparameters {
        sigma: sd,
        range: (diameter / 2.0).max(1.0),
        rho: 0.8,
        sigma_eps: 0.3 * sd,
        beta0: mean,
    }
}

// Temporal basis indices; spatial bases are ordered (C, G, G C⁻¹ G).
const END: usize = 0;
const MID: usize = 1;
const OFF: usize = 2;

type Entries = Vec<(usize, f64)>;

/// Fixed-structure representation of one day's posterior precision as a
/// linear combination of constant matrices.
pub struct DayProblem {
    n: usize,
    t: usize,
    dim: usize,
    y: Vec<f64>,
    /// Rows of `B = [A, 1]`.
    rows: Vec<Vec<(usize, f64)>>,
    pattern: CscMatrix,
    pat_row: Vec<usize>,
    pat_col: Vec<usize>,
    basis: [[Entries; 3]; 3],
    btb: Entries,
    intercept_pos: usize,
    bty: Vec<f64>,
    symbolic: Arc<SymbolicCholesky>,
    sel_pos: Vec<usize>,
    mass: Vec<f64>,
    k_pattern: CscMatrix,
    k_diag_pos: Vec<usize>,
    k_symbolic: Arc<SymbolicCholesky>,
    priors: PriorSettings,
}

/// Result of one evaluation of the negative log posterior.
pub struct Evaluation {
    pub neg_log_post: f64,
    pub grad: [f64; 4],
    pub mean: Vec<f64>,
    pub factor: CholeskyFactor,
    pub values: Vec<f64>,
}

fn ar1_coefficients(rho: f64, t: usize) -> ([f64; 3], [f64; 3]) {
    if t == 1 {
        return ([1.0, 0.0, 0.0], [0.0; 3]);
    }
    let q = 1.0 - rho * rho;
    let coef = [1.0 / q, (1.0 + rho * rho) / q, -rho / q];
    let dq = [2.0 * rho / (q * q), 4.0 * rho / (q * q), -(1.0 + rho * rho) / (q * q)];
    (coef, dq)
}

impl DayProblem {
    pub fn new(data: &DayData, mesh: &Mesh, op: &SpdeOperator, priors: &PriorSettings) -> Result<Self> {
        priors.validate()?;
        data.check()?;
        let n = op.n();
        let t = data.time_count;
        let dim = n
            .checked_mul(t)
            .and_then(|v| v.checked_add(1))
            .filter(|&d| d <= MAX_LATENT_DIM)
            .ok_or_else(|| Error::Size(format!("latent dimension {n} x {t} too large")))?;
        let icpt = dim - 1;

        let mut located: HashMap<(u64, u64), Vec<(usize, f64)>> = HashMap::new();
        let mut rows = Vec::with_capacity(data.observations.len());
        for o in &data.observations {
            let key = (o.point.east.to_bits(), o.point.north.to_bits());
            let w = match located.get(&key) {
                Some(w) => w.clone(),
                None => {
                    let w = mesh.locate(o.point).ok_or(Error::Coverage {
                        east: o.point.east,
                        north: o.point.north,
                    })?;
                    located.insert(key, w.clone());
                    w
                }
            };
            let mut row: Vec<(usize, f64)> =
                w.iter().map(|&(i, v)| (o.time_index * n + i, v)).collect();
            row.push((icpt, 1.0));
            rows.push(row);
        }
        let y: Vec<f64> = data.observations.iter().map(|o| o.value).collect();

        // Temporal bases.
        let mut pt: [Vec<(usize, usize)>; 3] = Default::default();
        for k in 0..t {
            if k == 0 || k == t - 1 {
                pt[END].push((k, k));
            } else {
                pt[MID].push((k, k));
            }
            if k + 1 < t {
                pt[OFF].push((k, k + 1));
                pt[OFF].push((k + 1, k));
            }
        }
        let spatial = [op.mass_matrix(), op.stiffness.clone(), op.g_cinv_g()];

        let mut trip: Vec<(usize, usize, f64)> = Vec::new();
        for pts in &pt {
            for &(a, b) in pts {
                for s in &spatial {
                    trip.extend(s.triplets().map(|(i, j, _)| (a * n + i, b * n + j, 0.0)));
                }
            }
        }
        for row in &rows {
            for &(i, _) in row {
                for &(j, _) in row {
                    trip.push((i, j, 0.0));
                }
            }
        }
        for k in 0..dim {
            trip.push((k, icpt, 0.0));
            trip.push((icpt, k, 0.0));
        }
        let pattern = CscMatrix::from_triplets(dim, dim, &trip);
        drop(trip);
        let mut pat_row = Vec::with_capacity(pattern.nnz());
        let mut pat_col = Vec::with_capacity(pattern.nnz());
        for (i, j, _) in pattern.triplets() {
            pat_row.push(i);
            pat_col.push(j);
        }

        let pos = |i: usize, j: usize| pattern.position(i, j).expect("entry inside pattern");
        let mut basis: [[Entries; 3]; 3] = Default::default();
        for (x, pts) in pt.iter().enumerate() {
            for (yk, s) in spatial.iter().enumerate() {
                let list = &mut basis[x][yk];
                for &(a, b) in pts {
                    list.extend(s.triplets().map(|(i, j, v)| (pos(a * n + i, b * n + j), v)));
                }
            }
        }
        let mut btb = Vec::new();
        let mut bty = vec![0.0; dim];
        for (row, &yv) in rows.iter().zip(&y) {
            for &(i, wi) in row {
                bty[i] += wi * yv;
                for &(j, wj) in row {
                    btb.push((pos(i, j), wi * wj));
                }
            }
        }
        let intercept_pos = pos(icpt, icpt);

        let symbolic = Arc::new(SymbolicCholesky::new(&pattern, Ordering::AmdKeepLast(1))?);
        let sel_pos = (0..pattern.nnz())
            .map(|p| {
                symbolic
                    .l_position(pat_row[p], pat_col[p])
                    .expect("pattern entries lie inside the factor")
            })
            .collect();

        let k_pattern = op.stiffness.clone();
        let k_diag_pos = (0..n)
            .map(|i| {
                k_pattern
                    .position(i, i)
                    .ok_or_else(|| Error::Mesh(format!("stiffness lacks diagonal entry {i}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let k_symbolic = Arc::new(SymbolicCholesky::new(&k_pattern, Ordering::Amd)?);

        Ok(Self {
            n,
            t,
            dim,
            y,
            rows,
            pattern,
            pat_row,
            pat_col,
            basis,
            btb,
            intercept_pos,
            bty,
            symbolic,
            sel_pos,
            mass: op.mass.clone(),
            k_pattern,
            k_diag_pos,
            k_symbolic,
            priors: *priors,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn observation_count(&self) -> usize {
        self.y.len()
    }

    fn coefficients(&self, theta: &Theta) -> ([f64; 3], [f64; 3], f64) {
        let kappa = theta[0].exp();
        let sigma = theta[1].exp();
        let rho = (theta[2] / 2.0).tanh();
        let s = 1.0 / (4.0 * PI * sigma * sigma);
        let cy = [s * kappa * kappa, 2.0 * s, s / (kappa * kappa)];
        let (cx, _) = ar1_coefficients(rho, self.t);
        (cx, cy, (-2.0 * theta[3]).exp())
    }

    /// Values of the posterior precision on the fixed pattern.
    pub fn posterior_values(&self, theta: &Theta) -> Vec<f64> {
        let (cx, cy, tau) = self.coefficients(theta);
        let mut v = vec![0.0; self.pattern.nnz()];
        for x in 0..3 {
            for yk in 0..3 {
                let c = cx[x] * cy[yk];
                if c == 0.0 {
                    continue;
                }
                for &(p, b) in &self.basis[x][yk] {
                    v[p] += c * b;
                }
            }
        }
        for &(p, b) in &self.btb {
            v[p] += tau * b;
        }
        v[self.intercept_pos] += self.priors.beta0_precision;
        v
    }

    /// Prior precision of the latent vector.
    pub fn prior_precision(&self, theta: &Theta) -> CscMatrix {
        let (cx, cy, _) = self.coefficients(theta);
        let mut v = vec![0.0; self.pattern.nnz()];
        for x in 0..3 {
            for yk in 0..3 {
                for &(p, b) in &self.basis[x][yk] {
                    v[p] += cx[x] * cy[yk] * b;
                }
            }
        }
        v[self.intercept_pos] += self.priors.beta0_precision;
        let mut q = self.pattern.clone();
        q.values_mut().copy_from_slice(&v);
        q
    }

    pub fn posterior_precision(&self, theta: &Theta) -> CscMatrix {
        let mut q = self.pattern.clone();
        q.values_mut().copy_from_slice(&self.posterior_values(theta));
        q
    }

    /// Observation design `B = [A, 1]` as a dense row list.
    pub fn design_rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn observations(&self) -> &[f64] {
        &self.y
    }

    /// Latent conditional mean at θ together with the precision factor
    /// and values.
    pub fn conditional(&self, theta: &Theta) -> Result<(Vec<f64>, CholeskyFactor, Vec<f64>)> {
        let (_, _, tau) = self.coefficients(theta);
        let values = self.posterior_values(theta);
        let factor = self.symbolic.factor(&values)?;
        let rhs: Vec<f64> = self.bty.iter().map(|v| tau * v).collect();
        let mean = factor.solve(&rhs);
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::Conditioning("non-finite posterior mean".into()));
        }
        Ok((mean, factor, values))
    }

    /// Negative log posterior of θ (up to a constant) and its gradient.
    pub fn evaluate(&self, theta: &Theta) -> Result<Evaluation> {
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite hyperparameters".into()));
        }
        let (n, t) = (self.n as f64, self.t as f64);
        let m = self.y.len() as f64;
        let kappa = theta[0].exp();
        let rho = (theta[2] / 2.0).tanh();
        let (cx, cy, tau) = self.coefficients(theta);
        let (_, dcx_drho) = ar1_coefficients(rho, self.t);
        let drho = (1.0 - rho * rho) / 2.0;

        let values = self.posterior_values(theta);
        let factor = self.symbolic.factor(&values)?;
        let logdet_post = factor.log_det();
        let rhs: Vec<f64> = self.bty.iter().map(|v| tau * v).collect();
        let mean = factor.solve(&rhs);
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::Conditioning("non-finite posterior mean".into()));
        }

        let mut rss = 0.0;
        for (row, &yv) in self.rows.iter().zip(&self.y) {
            let fit: f64 = row.iter().map(|&(i, w)| w * mean[i]).sum();
            rss += (yv - fit).powi(2);
        }

        // K = κ²C + G gives log|Q_s| and its κ-derivative.
        let mut kv = self.k_pattern.values().to_vec();
        for (i, &p) in self.k_diag_pos.iter().enumerate() {
            kv[p] += kappa * kappa * self.mass[i];
        }
        let kf = self.k_symbolic.factor(&kv)?;
        let kdiag = kf.selected_inverse().diag();
        let s = cy[1] / 2.0;
        let log_c: f64 = self.mass.iter().map(|c| c.ln()).sum();
        let logdet_qs = n * s.ln() - 2.0 * n * theta[0] + 2.0 * kf.log_det() - log_c;
        let dlogdet_qs = -2.0 * n
            + 4.0 * kappa * kappa * self.mass.iter().zip(&kdiag).map(|(c, d)| c * d).sum::<f64>();
        let logdet_qt = if self.t > 1 { -(t - 1.0) * (1.0 - rho * rho).ln() } else { 0.0 };
        let logdet_prior = n * logdet_qt + t * logdet_qs + self.priors.beta0_precision.ln();

        // Traces against the posterior covariance and quadratic forms in μ.
        let sel = factor.selected_inverse();
        let sig = sel.raw();
        let mut tr = [[0.0; 3]; 3];
        let mut qf = [[0.0; 3]; 3];
        for x in 0..3 {
            for yk in 0..3 {
                let (mut a, mut b) = (0.0, 0.0);
                for &(p, v) in &self.basis[x][yk] {
                    a += v * sig[self.sel_pos[p]];
                    b += v * mean[self.pat_row[p]] * mean[self.pat_col[p]];
                }
                tr[x][yk] = a;
                qf[x][yk] = b;
            }
        }
        let tr_btb: f64 = self.btb.iter().map(|&(p, v)| v * sig[self.sel_pos[p]]).sum();
        let mut quad_prior = self.priors.beta0_precision * mean[self.dim - 1].powi(2);
        for x in 0..3 {
            for yk in 0..3 {
                quad_prior += cx[x] * cy[yk] * qf[x][yk];
            }
        }

        let loglik = -0.5 * m * (2.0 * PI).ln() + 0.5 * m * tau.ln() + 0.5 * logdet_prior
            - 0.5 * logdet_post
            - 0.5 * quad_prior
            - 0.5 * tau * rss;

        let both = |x: usize, yk: usize| tr[x][yk] + qf[x][yk];
        let dcy_dlk = [2.0 * cy[0], 0.0, -2.0 * cy[2]];
        let mut g = [0.0; 4];
        g[0] = 0.5 * t * dlogdet_qs;
        g[1] = -t * n;
        g[2] = if self.t > 1 { 0.5 * n * (t - 1.0) * rho } else { 0.0 };
        for x in 0..3 {
            for yk in 0..3 {
                g[0] -= 0.5 * cx[x] * dcy_dlk[yk] * both(x, yk);
                g[1] += cx[x] * cy[yk] * both(x, yk);
                g[2] -= 0.5 * dcx_drho[x] * drho * cy[yk] * both(x, yk);
            }
        }
        g[3] = -m + tau * rss + tau * tr_btb;

        let (lp, gp) = self.priors.log_density(theta);
        let f = -(loglik + lp);
        let grad = [-(g[0] + gp[0]), -(g[1] + gp[1]), -(g[2] + gp[2]), -(g[3] + gp[3])];
        if !f.is_finite() {
            return Err(Error::Conditioning("non-finite log posterior".into()));
        }
        Ok(Evaluation {
            neg_log_post: f,
            grad,
            mean,
            factor,
            values,
        })
    }
}

/// Fitted model for one day: hyperparameter mode plus the Gaussian
/// conditional of the latent vector at that mode.
#[derive(Debug)]
pub struct DayModelPosterior {
    pub hyper: Hyperparameters,
    pub theta: Theta,
    pub latent_mean: Vec<f64>,
    pub latent_precision: CscMatrix,
    pub day: NaiveDate,
    pub resolution: Resolution,
    pub time_count: usize,
    pub node_count: usize,
    pub diagnostics: FitDiagnostics,
    factor: OnceLock<Result<Arc<CholeskyFactor>, String>>,
    covariance: OnceLock<Result<Arc<SelectedInverse>, String>>,
}

impl Clone for DayModelPosterior {
    fn clone(&self) -> Self {
        Self {
            hyper: self.hyper,
            theta: self.theta,
            latent_mean: self.latent_mean.clone(),
            latent_precision: self.latent_precision.clone(),
            day: self.day,
            resolution: self.resolution,
            time_count: self.time_count,
            node_count: self.node_count,
            diagnostics: self.diagnostics,
            factor: OnceLock::new(),
            covariance: OnceLock::new(),
        }
    }
}

impl PartialEq for DayModelPosterior {
    fn eq(&self, other: &Self) -> bool {
        self.hyper == other.hyper
            && self.theta == other.theta
            && self.latent_mean == other.latent_mean
            && self.latent_precision == other.latent_precision
            && self.day == other.day
            && self.resolution == other.resolution
            && self.time_count == other.time_count
            && self.node_count == other.node_count
            && self.diagnostics == other.diagnostics
    }
}

impl DayModelPosterior {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        hyper: Hyperparameters,
        theta: Theta,
        latent_mean: Vec<f64>,
        latent_precision: CscMatrix,
        day: NaiveDate,
        resolution: Resolution,
        time_count: usize,
        node_count: usize,
        diagnostics: FitDiagnostics,
    ) -> Result<Self> {
        let dim = node_count * time_count + 1;
        if latent_mean.len() != dim
            || latent_precision.nrows() != dim
            || latent_precision.ncols() != dim
        {
            return Err(Error::Format(format!(
                "latent dimension mismatch: expected {dim}, mean {} and precision {}x{}",
                latent_mean.len(),
                latent_precision.nrows(),
                latent_precision.ncols()
            )));
        }
        if latent_mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite latent mean".into()));
        }
        hyper.validate()?;
        Ok(Self {
            hyper,
            theta,
            latent_mean,
            latent_precision,
            day,
            resolution,
            time_count,
            node_count,
            diagnostics,
            factor: OnceLock::new(),
            covariance: OnceLock::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.latent_mean.len()
    }

    pub fn intercept_index(&self) -> usize {
        self.dim() - 1
    }

    /// Cholesky factor of the posterior precision, computed once.
    pub fn factor(&self) -> Result<Arc<CholeskyFactor>> {
        self.factor
            .get_or_init(|| {
                let sym = SymbolicCholesky::new(&self.latent_precision, Ordering::AmdKeepLast(1))
                    .map_err(|e| e.to_string())?;
                Arc::new(sym)
                    .factor(self.latent_precision.values())
                    .map(Arc::new)
                    .map_err(|e| e.to_string())
            })
            .clone()
            .map_err(Error::Conditioning)
    }

    /// Posterior covariance on the filled factor pattern, computed once.
    pub fn covariance(&self) -> Result<Arc<SelectedInverse>> {
        let factor = self.factor()?;
        self.covariance
            .get_or_init(|| Ok(Arc::new(factor.selected_inverse())))
            .clone()
            .map_err(Error::Conditioning)
    }

    /// Posterior variance of `w' x`.
    pub fn variance(&self, w: &[(usize, f64)]) -> Result<f64> {
        if let Some(Ok(cov)) = self.covariance.get() {
            return cov.quad_form(w);
        }
        let mut rhs = vec![0.0; self.dim()];
        for &(i, v) in w {
            rhs[i] += v;
        }
        let x = self.factor()?.solve(&rhs);
        Ok(w.iter().map(|&(i, v)| v * x[i]).sum())
    }

    pub fn time_of(&self, index: usize) -> DateTime<Utc> {
        day_origin(self.day) + chrono::Duration::seconds(index as i64 * self.resolution.seconds())
    }

    /// Time-grid index of an instant inside this model's day.
    pub fn time_index(&self, time: DateTime<Utc>) -> Result<usize> {
        let offset = (time - day_origin(self.day)).num_seconds();
        let step = self.resolution.seconds();
        if offset < 0 || offset % step != 0 || (offset / step) as usize >= self.time_count {
            return Err(Error::Range(format!(
                "{time} is not on the {} grid of {}",
                self.resolution, self.day
            )));
        }
        Ok((offset / step) as usize)
    }
}

/// Fits the day model by maximising the marginal posterior of θ.
pub fn fit_day(
    data: &DayData,
    mesh: &Mesh,
    settings: &FitSettings,
    init: Option<Hyperparameters>,
) -> Result<DayModelPosterior> {
    let op = SpdeOperator::assemble(mesh)?;
    let problem = DayProblem::new(data, mesh, &op, &settings.priors)?;
    let dense = if data.observations.len() <= MAX_DENSE_OBSERVATIONS {
        Some(MarginalProblem::new(data, mesh, &op, &settings.priors)?)
    } else {
        None
    };
    let init = init.unwrap_or_else(|| default_init(data));
    init.validate()?;
    let theta0 = theta_from_hyper(&init);
    let bfgs = BfgsSettings {
        max_iter: settings.max_iter,
        grad_tol: settings.grad_tol,
        ..BfgsSettings::default()
    };
    let objective = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
        let th: Theta = x.try_into().expect("four hyperparameters");
        match &dense {
            Some(d) => d.evaluate(&th).map(|(f, g)| (f, g.to_vec())),
            None => problem.evaluate(&th).map(|e| (e.neg_log_post, e.grad.to_vec())),
        }
    };

    const PERTURB: [[f64; 4]; 3] = [
        [0.5, -0.3, -0.8, 0.5],
        [-0.5, 0.3, 0.8, -0.5],
        [1.0, -0.6, -1.5, 1.0],
    ];
    let mut best: Option<(super::optim::OptimResult, usize)> = None;
    let mut total_iter = 0;
    for attempt in 0..=settings.restarts.min(PERTURB.len()) {
        let start: Vec<f64> = if attempt == 0 {
            theta0.to_vec()
        } else {
            theta0.iter().zip(&PERTURB[attempt - 1]).map(|(a, b)| a + b).collect()
        };
        let r = match minimize(objective, &start, &bfgs) {
            Ok(r) => r,
            Err(e) if attempt == 0 && settings.restarts == 0 => return Err(e),
            Err(_) => continue,
        };
        total_iter += r.iterations;
        let better = best.as_ref().is_none_or(|(b, _)| {
            (r.converged && !b.converged) || (r.converged == b.converged && r.f < b.f)
        });
        let done = r.converged;
        if better {
            best = Some((r, attempt));
        }
        if done {
            break;
        }
    }
    let (res, attempt) = best.ok_or_else(|| {
        Error::Conditioning("objective could not be evaluated from any starting point".into())
    })?;
    if !res.converged {
        return Err(Error::Fit {
            iterations: total_iter,
            grad_norm: res.grad_norm(),
            last: res.x,
        });
    }
    let theta: Theta = res.x.as_slice().try_into().expect("four hyperparameters");
    let (mean, factor, values) = problem.conditional(&theta)?;
    let beta0 = mean[problem.dim - 1];
    let mut precision = problem.pattern.clone();
    precision.values_mut().copy_from_slice(&values);
    let model = DayModelPosterior::new(
        hyper_from_theta(&theta, beta0),
        theta,
        mean,
        precision,
        data.day,
        data.resolution,
        data.time_count,
        op.n(),
        FitDiagnostics {
            iterations: total_iter,
            evaluations: res.evaluations,
            grad_norm: res.grad_norm(),
            converged: true,
            log_posterior: -res.f,
            restarts_used: attempt,
        },
    )?;
    let _ = model.factor.set(Ok(Arc::new(factor)));
    Ok(model)
}

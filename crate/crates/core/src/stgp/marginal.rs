//! Marginal likelihood of the hyperparameters in observation space.
//!
//! With `u` and `β0` integrated out, `y ~ N(0, K)` where
//! `K = σ² R ⊙ S + σ_ε² I + v0 11ᵀ`, `R` the AR(1) correlation between
//! observation times, `S` the spatial correlation between observation
//! sites implied by the finite element precision and `v0` the intercept
//! prior variance. The observation count of one day is small next to the
//! latent dimension, so dense linear algebra here is much cheaper than
//! factorising the space-time precision at every optimiser step.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::fem::SpdeOperator;
use super::fit::{DayData, Theta};
use super::mesh::Mesh;
use super::prior::PriorSettings;
use crate::error::{Error, Result};

/// Observations largest problem accepted for the dense likelihood.
pub const MAX_DENSE_OBSERVATIONS: usize = 6000;

pub struct MarginalProblem {
    t: usize,
    /// `(site, time, value)` per observation.
    obs: Vec<(usize, usize, f64)>,
    /// Interpolation weights of the distinct sites, `k × n`.
    weights: DMatrix<f64>,
    mass: DVector<f64>,
    stiffness: DMatrix<f64>,
    priors: PriorSettings,
}

impl MarginalProblem {
    pub fn new(data: &DayData, mesh: &Mesh, op: &SpdeOperator, priors: &PriorSettings) -> Result<Self> {
        priors.validate()?;
        data.check()?;
        let m = data.observations.len();
        if m > MAX_DENSE_OBSERVATIONS {
            return Err(Error::Size(format!(
                "{m} observations exceed the dense likelihood limit of {MAX_DENSE_OBSERVATIONS}"
            )));
        }
        let n = op.n();
        let sites = data.station_points();
        let mut weights = DMatrix::zeros(sites.len(), n);
        for (k, &p) in sites.iter().enumerate() {
            let w = mesh.locate(p).ok_or(Error::Coverage {
                east: p.east,
                north: p.north,
            })?;
            for (i, v) in w {
                weights[(k, i)] += v;
            }
        }
        let obs = data
            .observations
            .iter()
            .map(|o| {
                let s = sites.iter().position(|p| *p == o.point).expect("site collected above");
                (s, o.time_index, o.value)
            })
            .collect();
        let mut stiffness = DMatrix::zeros(n, n);
        for (i, j, v) in op.stiffness.triplets() {
            stiffness[(i, j)] += v;
        }
        Ok(Self {
            t: data.time_count,
            obs,
            weights,
            mass: DVector::from_column_slice(&op.mass),
            stiffness,
            priors: *priors,
        })
    }

    pub fn observation_count(&self) -> usize {
        self.obs.len()
    }

    /// Spatial correlation between sites and its derivative in `log κ`.
    fn spatial(&self, kappa: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let k2 = kappa * kappa;
        let mut k = self.stiffness.clone();
        for i in 0..k.nrows() {
            k[(i, i)] += k2 * self.mass[i];
        }
        let chol = k
            .cholesky()
            .ok_or_else(|| Error::Conditioning("spatial operator is not positive definite".into()))?;
        let v = chol.solve(&self.weights.transpose());
        let cv = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| self.mass[i] * v[(i, j)]);
        let u = chol.solve(&cv);
        let s0 = v.transpose() * &cv;
        let scale = 4.0 * PI * k2;
        let ds = (&s0 * 2.0 - cv.transpose() * &u * (4.0 * k2)) * scale;
        Ok((s0 * scale, ds))
    }

    fn temporal(&self, rho: f64) -> (Vec<f64>, Vec<f64>) {
        let drho = (1.0 - rho * rho) / 2.0;
        let r = (0..self.t).map(|d| rho.powi(d as i32)).collect();
        let dr = (0..self.t)
            .map(|d| if d == 0 { 0.0 } else { d as f64 * rho.powi(d as i32 - 1) * drho })
            .collect();
        (r, dr)
    }

    /// Negative log marginal posterior of θ and its gradient. Equals the
    /// sparse latent formulation exactly, constants included.
    pub fn evaluate(&self, theta: &Theta) -> Result<(f64, [f64; 4])> {
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite hyperparameters".into()));
        }
        let kappa = theta[0].exp();
        let sig2 = (2.0 * theta[1]).exp();
        let rho = (theta[2] / 2.0).tanh();
        let eps2 = (2.0 * theta[3]).exp();
        let v0 = 1.0 / self.priors.beta0_precision;
        let m = self.obs.len();

        let (s, ds) = self.spatial(kappa)?;
        let (r, dr) = self.temporal(rho);
        let lag = |i: usize, j: usize| self.obs[i].1.abs_diff(self.obs[j].1);

        let mut k0 = DMatrix::from_fn(m, m, |i, j| {
            sig2 * r[lag(i, j)] * s[(self.obs[i].0, self.obs[j].0)]
        });
        for i in 0..m {
            k0[(i, i)] += eps2;
        }
        let chol = k0
            .cholesky()
            .ok_or_else(|| Error::Conditioning("observation covariance is not positive definite".into()))?;
        let logdet0: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let y = DVector::from_iterator(m, self.obs.iter().map(|o| o.2));
        let ones = DVector::from_element(m, 1.0);
        let a = chol.solve(&ones);
        let b = chol.solve(&y);
        let c = a.sum();
        let ay = a.dot(&y);
        let denom = 1.0 + v0 * c;
        let logdet = logdet0 + denom.ln();
        let quad = y.dot(&b) - v0 * ay * ay / denom;
        let mut kinv = chol.inverse();
        kinv.ger(-v0 / denom, &a, &a, 1.0);
        let alpha = &b - &a * (v0 * ay / denom);

        let loglik = -0.5 * (m as f64 * (2.0 * PI).ln() + logdet + quad);
        let mut g = [0.0; 4];
        for j in 0..m {
            let (sj, _, _) = self.obs[j];
            for i in 0..m {
                let w = 0.5 * (alpha[i] * alpha[j] - kinv[(i, j)]);
                let si = self.obs[i].0;
                let d = lag(i, j);
                g[0] += w * sig2 * r[d] * ds[(si, sj)];
                g[1] += w * 2.0 * sig2 * r[d] * s[(si, sj)];
                g[2] += w * sig2 * dr[d] * s[(si, sj)];
            }
            g[3] += (alpha[j] * alpha[j] - kinv[(j, j)]) * eps2;
        }

        let (lp, gp) = self.priors.log_density(theta);
        let f = -(loglik + lp);
        if !f.is_finite() {
            return Err(Error::Conditioning("non-finite log posterior".into()));
        }
        Ok((f, std::array::from_fn(|k| -(g[k] + gp[k]))))
    }
}

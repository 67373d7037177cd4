//! Precision matrices for the spatial (SPDE, ν = 1), temporal (AR(1)) and
//! separable space-time components.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::fem::SpdeOperator;
use super::sparse::CscMatrix;
use crate::error::{Error, Result};

/// Largest latent dimension accepted by the space-time assembly.
pub const MAX_LATENT_DIM: usize = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    /// Marginal spatial standard deviation on the log scale.
    pub sigma: f64,
    /// Effective range in km (correlation ≈ 0.13).
    pub range: f64,
    pub rho: f64,
    pub sigma_eps: f64,
    pub beta0: f64,
}

impl Hyperparameters {
    pub fn kappa(&self) -> f64 {
        8f64.sqrt() / self.range
    }

    pub fn range_from_kappa(kappa: f64) -> f64 {
        8f64.sqrt() / kappa
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.sigma > 0.0
            && self.sigma.is_finite()
            && self.range > 0.0
            && self.range.is_finite()
            && self.rho.abs() < 1.0
            && self.sigma_eps > 0.0
            && self.sigma_eps.is_finite()
            && self.beta0.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid hyperparameters {self:?}")))
        }
    }
}

/// Scale `1 / (4π σ² κ²)` that gives marginal variance σ² for ν = 1 in 2-D.
pub fn spde_scale(sigma: f64, kappa: f64) -> f64 {
    1.0 / (4.0 * PI * sigma * sigma * kappa * kappa)
}

/// `Q_s = τ² (κ⁴ C + 2κ² G + G C⁻¹ G)` with τ² = 1/(4π σ² κ²).
pub fn spde_precision(op: &SpdeOperator, sigma: f64, range: f64) -> Result<CscMatrix> {
    if !(sigma > 0.0 && sigma.is_finite() && range > 0.0 && range.is_finite()) {
        return Err(Error::Domain(format!(
            "spatial parameters need sigma > 0 and range > 0, got {sigma}, {range}"
        )));
    }
    let kappa = 8f64.sqrt() / range;
    let tau2 = spde_scale(sigma, kappa);
    let k2 = kappa * kappa;
    let c = op.mass_matrix().scaled(tau2 * k2 * k2);
    let g = op.stiffness.scaled(2.0 * tau2 * k2);
    let m2 = op.g_cinv_g().scaled(tau2);
    Ok(c.add(&g).add(&m2))
}

/// Precision of a stationary AR(1) with unit marginal variance.
pub fn ar1_precision(t: usize, rho: f64) -> Result<CscMatrix> {
    if !(rho.abs() < 1.0) {
        return Err(Error::Domain(format!("AR(1) coefficient {rho} not in (-1, 1)")));
    }
    if t == 0 {
        return Err(Error::Domain("AR(1) needs at least one time".into()));
    }
    let s = 1.0 / (1.0 - rho * rho);
    let mut trip = Vec::with_capacity(3 * t);
    for i in 0..t {
        let d = if i == 0 || i == t - 1 { 1.0 } else { 1.0 + rho * rho };
        trip.push((i, i, if t == 1 { 1.0 } else { d * s }));
        if i + 1 < t {
            trip.push((i, i + 1, -rho * s));
            trip.push((i + 1, i, -rho * s));
        }
    }
    Ok(CscMatrix::from_triplets(t, t, &trip))
}

/// `Q_t ⊗ Q_s`; latent index of node `i` at time `t` is `t·n + i`.
pub fn st_precision(qt: &CscMatrix, qs: &CscMatrix) -> Result<CscMatrix> {
    let dim = qt
        .nrows()
        .checked_mul(qs.nrows())
        .filter(|&d| d <= MAX_LATENT_DIM)
        .ok_or_else(|| {
            Error::Size(format!(
                "space-time dimension {} x {} exceeds {MAX_LATENT_DIM}",
                qt.nrows(),
                qs.nrows()
            ))
        })?;
    debug_assert!(dim > 0);
    qt.kron(qs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stgp::mesh::Mesh;
    use crate::stgp::projection::PlanarPoint;

    #[test]
    fn kappa_bookkeeping() {
        let h = Hyperparameters {
            sigma: 1.0,
            range: 150.0,
            rho: 0.5,
            sigma_eps: 0.1,
            beta0: 0.0,
        };
        assert_eq!(h.kappa(), 8f64.sqrt() / 150.0);
    }

    #[test]
    fn ar1_white_noise_is_identity() {
        let q = ar1_precision(5, 0.0).unwrap();
        assert_eq!(q.to_dense(), CscMatrix::identity(5).to_dense());
    }

    #[test]
    fn ar1_rejects_unit_root() {
        assert!(matches!(ar1_precision(3, 1.0), Err(Error::Domain(_))));
        assert!(matches!(ar1_precision(3, -1.2), Err(Error::Domain(_))));
    }

    #[test]
    fn single_time_kron_returns_spatial() {
        let m = Mesh::regular(PlanarPoint::new(0.0, 0.0), 3, 3, 10.0);
        let op = SpdeOperator::assemble(&m).unwrap();
        let qs = spde_precision(&op, 1.0, 30.0).unwrap();
        let q = st_precision(&ar1_precision(1, 0.7).unwrap(), &qs).unwrap();
        assert_eq!(q.to_dense(), qs.to_dense());
    }

    #[test]
    fn spde_precision_rejects_bad_parameters() {
        let m = Mesh::regular(PlanarPoint::new(0.0, 0.0), 2, 2, 10.0);
        let op = SpdeOperator::assemble(&m).unwrap();
        assert!(spde_precision(&op, 0.0, 10.0).is_err());
        assert!(spde_precision(&op, 1.0, -1.0).is_err());
    }
}

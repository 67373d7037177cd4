//! Draws from the space-time prior, used for synthetic data and tests.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::fem::SpdeOperator;
use super::mesh::Mesh;
use super::precision::{spde_precision, Hyperparameters};
use super::projection::PlanarPoint;
use super::sparse::{Ordering, SymbolicCholesky};
use crate::error::{Error, Result};

/// Latent field at mesh nodes for `t` consecutive times, from the AR(1)
/// recursion `x_t = ρ x_{t−1} + √(1−ρ²) ξ_t` with `ξ_t ~ N(0, Q_s⁻¹)`.
pub fn simulate_field<R: Rng + ?Sized>(
    op: &SpdeOperator,
    hyper: &Hyperparameters,
    t: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    hyper.validate()?;
    let qs = spde_precision(op, hyper.sigma, hyper.range)?;
    let sym = Arc::new(SymbolicCholesky::new(&qs, Ordering::Amd)?);
    let f = sym.factor(qs.values())?;
    let n = op.n();
    let innov = (1.0 - hyper.rho * hyper.rho).sqrt();
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(t);
    for _ in 0..t {
        let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let xi = f.sample_transform(&z);
        let x = match out.last() {
            None => xi,
            Some(prev) => prev
                .iter()
                .zip(&xi)
                .map(|(p, e)| hyper.rho * p + innov * e)
                .collect(),
        };
        out.push(x);
    }
    Ok(out)
}

/// Piecewise-linear interpolation of a nodal field.
pub fn interpolate(mesh: &Mesh, field: &[f64], point: PlanarPoint) -> Result<f64> {
    let w = mesh.locate(point).ok_or(Error::Coverage {
        east: point.east,
        north: point.north,
    })?;
    Ok(w.iter().map(|&(i, v)| v * field[i]).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lag_one_correlation_close_to_rho() {
        let mesh = Mesh::regular(PlanarPoint::new(0.0, 0.0), 8, 8, 10.0);
        let op = SpdeOperator::assemble(&mesh).unwrap();
        let h = Hyperparameters {
            sigma: 1.0,
            range: 30.0,
            rho: 0.7,
            sigma_eps: 0.1,
            beta0: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = simulate_field(&op, &h, 400, &mut rng).unwrap();
        let node = 40;
        let s: Vec<f64> = x.iter().map(|v| v[node]).collect();
        let m = s.iter().sum::<f64>() / s.len() as f64;
        let var: f64 = s.iter().map(|v| (v - m).powi(2)).sum();
        let cov: f64 = s.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
        assert!((cov / var - 0.7).abs() < 0.1);
    }
}

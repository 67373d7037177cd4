//! Posterior predictions at arbitrary points of the mesh and day grid.

use chrono::{DateTime, Utc};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::fem::SpdeOperator;
use super::fit::{DayData, DayModelPosterior, DayProblem, Theta};
use super::marginal::{MarginalProblem, MAX_DENSE_OBSERVATIONS};
use super::sparse::CholeskyFactor;
use super::mesh::Mesh;
use super::prior::PriorSettings;
use super::projection::PlanarPoint;
use crate::error::{Error, Result};

/// 97.5% standard normal quantile.
pub const Z975: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictionKind {
    /// Latent surface `β0 + u`, as used for maps.
    Surface,
    /// A new observation, adding the noise variance σ_ε².
    Observation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub point: PlanarPoint,
    pub time_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub location: PlanarPoint,
    pub time: DateTime<Utc>,
    pub mean_log: f64,
    pub sd_log: f64,
    pub median_wm2: f64,
    pub lo95_wm2: f64,
    pub hi95_wm2: f64,
}

impl Prediction {
    /// Back-transforms a log-scale Gaussian by its quantiles.
    pub fn from_log(location: PlanarPoint, time: DateTime<Utc>, mean_log: f64, sd_log: f64) -> Self {
        let back = |v: f64| (v.exp() - 1.0).max(0.0);
        Self {
            location,
            time,
            mean_log,
            sd_log,
            median_wm2: back(mean_log),
            lo95_wm2: back(mean_log - Z975 * sd_log),
            hi95_wm2: back(mean_log + Z975 * sd_log),
        }
    }
}

/// Sparse weights of the linear functional `β0 + u(point, t)`.
pub fn target_weights(mesh: &Mesh, node_count: usize, target: &Target) -> Result<Vec<(usize, f64)>> {
    let w = mesh.locate(target.point).ok_or(Error::Coverage {
        east: target.point.east,
        north: target.point.north,
    })?;
    let mut out: Vec<(usize, f64)> = w
        .into_iter()
        .map(|(i, v)| (target.time_index * node_count + i, v))
        .collect();
    out.push((usize::MAX, 1.0));
    Ok(out)
}

fn check_model_mesh(model: &DayModelPosterior, mesh: &Mesh) -> Result<()> {
    if mesh.node_count() != model.node_count {
        return Err(Error::Input(format!(
            "mesh has {} nodes but the model was fitted on {}",
            mesh.node_count(),
            model.node_count
        )));
    }
    Ok(())
}

fn check_time(model: &DayModelPosterior, t: usize) -> Result<()> {
    if t >= model.time_count {
        return Err(Error::Range(format!(
            "time index {t} outside the {}-step day grid",
            model.time_count
        )));
    }
    Ok(())
}

const SOLVE_TARGET_LIMIT: usize = 200;

pub fn predict(
    model: &DayModelPosterior,
    mesh: &Mesh,
    targets: &[Target],
    kind: PredictionKind,
) -> Result<Vec<Prediction>> {
    check_model_mesh(model, mesh)?;
    // Per-target solves beat a full selected inverse for short target lists.
    if targets.len() > SOLVE_TARGET_LIMIT {
        model.covariance()?;
    }
    let icpt = model.intercept_index();
    let noise = match kind {
        PredictionKind::Surface => 0.0,
        PredictionKind::Observation => model.hyper.sigma_eps.powi(2),
    };
    targets
        .iter()
        .map(|tg| {
            check_time(model, tg.time_index)?;
            let w: Vec<(usize, f64)> = target_weights(mesh, model.node_count, tg)?
                .into_iter()
                .map(|(i, v)| (if i == usize::MAX { icpt } else { i }, v))
                .collect();
            let mean: f64 = w.iter().map(|&(i, v)| v * model.latent_mean[i]).sum();
            let var = model.variance(&w)?.max(0.0) + noise;
            Ok(Prediction::from_log(
                tg.point,
                model.time_of(tg.time_index),
                mean,
                var.sqrt(),
            ))
        })
        .collect()
}

/// Predictions at instants rather than grid indices.
pub fn predict_at(
    model: &DayModelPosterior,
    mesh: &Mesh,
    points: &[(PlanarPoint, DateTime<Utc>)],
    kind: PredictionKind,
) -> Result<Vec<Prediction>> {
    let targets = points
        .iter()
        .map(|&(point, time)| {
            Ok(Target {
                point,
                time_index: model.time_index(time)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    predict(model, mesh, &targets, kind)
}

/// Joint draws of the log-scale values at `targets` from the latent
/// posterior, one row per draw. Observation draws add independent noise.
pub fn joint_draws<R: Rng + ?Sized>(
    model: &DayModelPosterior,
    mesh: &Mesh,
    targets: &[Target],
    kind: PredictionKind,
    draws: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    check_model_mesh(model, mesh)?;
    let pf = model.factor()?;
    let icpt = model.intercept_index();
    let weights = targets
        .iter()
        .map(|tg| {
            check_time(model, tg.time_index)?;
            Ok(target_weights(mesh, model.node_count, tg)?
                .into_iter()
                .map(|(i, v)| (if i == usize::MAX { icpt } else { i }, v))
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let sigma_eps = model.hyper.sigma_eps;
    Ok((0..draws)
        .map(|_| {
            let z: Vec<f64> = (0..model.dim()).map(|_| StandardNormal.sample(rng)).collect();
            let dx = pf.sample_transform(&z);
            weights
                .iter()
                .map(|w| {
                    let v: f64 = w.iter().map(|&(i, c)| c * (model.latent_mean[i] + dx[i])).sum();
                    match kind {
                        PredictionKind::Surface => v,
                        PredictionKind::Observation => {
                            let e: f64 = StandardNormal.sample(rng);
                            v + sigma_eps * e
                        }
                    }
                })
                .collect()
        })
        .collect())
}

fn solve_variance(factor: &CholeskyFactor, dim: usize, w: &[(usize, f64)]) -> f64 {
    let mut rhs = vec![0.0; dim];
    for &(i, v) in w {
        rhs[i] += v;
    }
    let x = factor.solve(&rhs);
    w.iter().map(|&(i, v)| v * x[i]).sum()
}

/// Symmetric eigen-decomposition of a small matrix by cyclic Jacobi sweeps.
/// Returns eigenvalues and column eigenvectors (`vecs[row][col]`).
fn jacobi_eigen(mut a: [[f64; 4]; 4]) -> ([f64; 4], [[f64; 4]; 4]) {
    let mut v = [[0.0; 4]; 4];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _ in 0..100 {
        let off: f64 = (0..4)
            .flat_map(|i| (0..4).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-24 {
            break;
        }
        for p in 0..4 {
            for q in p + 1..4 {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..4 {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..4 {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ([a[0][0], a[1][1], a[2][2], a[3][3]], v)
}

/// Predictions averaged over a 5×5×5 grid of hyperparameter values placed
/// along the three principal axes of largest posterior spread, weighted by
/// the unnormalised hyperparameter posterior. Returns log-scale mixture
/// moments through the usual back-transform.
pub fn predict_integrated(
    data: &DayData,
    mesh: &Mesh,
    model: &DayModelPosterior,
    priors: &PriorSettings,
    targets: &[Target],
    kind: PredictionKind,
) -> Result<Vec<Prediction>> {
    check_model_mesh(model, mesh)?;
    let op = SpdeOperator::assemble(mesh)?;
    let problem = DayProblem::new(data, mesh, &op, priors)?;
    let dense = (data.observations.len() <= MAX_DENSE_OBSERVATIONS)
        .then(|| MarginalProblem::new(data, mesh, &op, priors))
        .transpose()?;
    let objective = |th: &Theta| -> Result<(f64, [f64; 4])> {
        match &dense {
            Some(d) => d.evaluate(th),
            None => problem.evaluate(th).map(|e| (e.neg_log_post, e.grad)),
        }
    };
    let mode = model.theta;
    let f0 = objective(&mode)?.0;

    // Hessian by central differences of the analytic gradient.
    let h = 1e-4;
    let mut hess = [[0.0; 4]; 4];
    for k in 0..4 {
        let mut a = mode;
        let mut b = mode;
        a[k] += h;
        b[k] -= h;
        let ga = objective(&a)?.1;
        let gb = objective(&b)?.1;
        for j in 0..4 {
            hess[j][k] = (ga[j] - gb[j]) / (2.0 * h);
        }
    }
    for i in 0..4 {
        for j in 0..i {
            let s = 0.5 * (hess[i][j] + hess[j][i]);
            hess[i][j] = s;
            hess[j][i] = s;
        }
    }
    let (vals, vecs) = jacobi_eigen(hess);
    if vals.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Conditioning(format!(
            "hyperparameter Hessian not positive definite at the mode: {vals:?}"
        )));
    }
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let axes = &order[..3];

    let weights_by_target: Vec<Vec<(usize, f64)>> = targets
        .iter()
        .map(|tg| {
            check_time(model, tg.time_index)?;
            Ok(target_weights(mesh, model.node_count, tg)?
                .into_iter()
                .map(|(i, v)| (if i == usize::MAX { problem.dim() - 1 } else { i }, v))
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut wsum = 0.0;
    let mut m1 = vec![0.0; targets.len()];
    let mut m2 = vec![0.0; targets.len()];
    const Z: [f64; 5] = [-2.0, -1.0, 0.0, 1.0, 2.0];
    for &z0 in &Z {
        for &z1 in &Z {
            for &z2 in &Z {
                let mut th: Theta = mode;
                for (z, &ax) in [z0, z1, z2].iter().zip(axes) {
                    let scale = z / vals[ax].sqrt();
                    for (k, t) in th.iter_mut().enumerate() {
                        *t += scale * vecs[k][ax];
                    }
                }
                let Ok((f, _)) = objective(&th) else {
                    continue;
                };
                let w = (-(f - f0)).exp();
                if !(w > 0.0) || !w.is_finite() {
                    continue;
                }
                let (cond_mean, factor, _) = problem.conditional(&th)?;
                let cov = (targets.len() > SOLVE_TARGET_LIMIT).then(|| factor.selected_inverse());
                let noise = match kind {
                    PredictionKind::Surface => 0.0,
                    PredictionKind::Observation => (2.0 * th[3]).exp(),
                };
                for (k, tw) in weights_by_target.iter().enumerate() {
                    let mean: f64 = tw.iter().map(|&(i, v)| v * cond_mean[i]).sum();
                    let var = match &cov {
                        Some(c) => c.quad_form(tw)?,
                        None => solve_variance(&factor, problem.dim(), tw),
                    };
                    let var = var.max(0.0) + noise;
                    m1[k] += w * mean;
                    m2[k] += w * (var + mean * mean);
                }
                wsum += w;
            }
        }
    }
    if !(wsum > 0.0) {
        return Err(Error::Conditioning("integration grid carries no weight".into()));
    }
    Ok(targets
        .iter()
        .enumerate()
        .map(|(k, tg)| {
            let mean = m1[k] / wsum;
            let var = (m2[k] / wsum - mean * mean).max(0.0);
            Prediction::from_log(tg.point, model.time_of(tg.time_index), mean, var.sqrt())
        })
        .collect())
}

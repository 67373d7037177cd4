//! Hyperpriors: penalised-complexity priors on the Matérn range and
//! standard deviation, plus weak priors on the remaining parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PcPriorSettings {
    /// `P(range < range0) = p_range`.
    pub range0: f64,
    pub p_range: f64,
    /// `P(sigma > sigma0) = p_sigma`.
    pub sigma0: f64,
    pub p_sigma: f64,
}

impl Default for PcPriorSettings {
    fn default() -> Self {
        Self {
            range0: 100.0,
            p_range: 0.5,
            sigma0: 1.5,
            p_sigma: 0.05,
        }
    }
}

impl PcPriorSettings {
    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| p > 0.0 && p < 1.0;
        if self.range0 > 0.0
            && self.range0.is_finite()
            && self.sigma0 > 0.0
            && self.sigma0.is_finite()
            && prob(self.p_range)
            && prob(self.p_sigma)
        {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid PC-prior settings {self:?}")))
        }
    }

    pub fn lambda_range(&self) -> f64 {
        -self.p_range.ln() * self.range0
    }

    pub fn lambda_sigma(&self) -> f64 {
        -self.p_sigma.ln() / self.sigma0
    }
}

/// Log density of the range, `λ r⁻² exp(−λ / r)` (two spatial dimensions).
pub fn range_logdensity(range: f64, s: &PcPriorSettings) -> f64 {
    let l = s.lambda_range();
    l.ln() - 2.0 * range.ln() - l / range
}

/// Log density of the standard deviation, `λ exp(−λ σ)`.
pub fn sigma_logdensity(sigma: f64, s: &PcPriorSettings) -> f64 {
    let l = s.lambda_sigma();
    l.ln() - l * sigma
}

/// Joint PC log density of `(range, sigma)` on their natural scales.
pub fn pc_prior_logdensity(range: f64, sigma: f64, settings: &PcPriorSettings) -> Result<f64> {
    settings.validate()?;
    if !(range > 0.0 && sigma > 0.0 && range.is_finite() && sigma.is_finite()) {
        return Err(Error::Domain(format!(
            "PC prior needs positive range and sigma, got {range}, {sigma}"
        )));
    }
    Ok(range_logdensity(range, settings) + sigma_logdensity(sigma, settings))
}

/// Full hyperprior on the unconstrained scale used by the optimiser.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorSettings {
    pub pc: PcPriorSettings,
    /// Precision of the Gaussian prior on `2·atanh(ρ)`.
    pub rho_precision: f64,
    /// Gamma(shape, rate) prior on the noise precision `1/σ_ε²`.
    pub noise_shape: f64,
    pub noise_rate: f64,
    /// Precision of the Gaussian prior on the intercept.
    pub beta0_precision: f64,
}

impl Default for PriorSettings {
    fn default() -> Self {
        Self {
            pc: PcPriorSettings::default(),
            rho_precision: 0.15,
            noise_shape: 1.0,
            noise_rate: 5e-5,
            beta0_precision: 1e-6,
        }
    }
}

impl PriorSettings {
    pub fn validate(&self) -> Result<()> {
        self.pc.validate()?;
        let pos = |x: f64| x > 0.0 && x.is_finite();
        if pos(self.rho_precision)
            && pos(self.noise_shape)
            && pos(self.noise_rate)
            && pos(self.beta0_precision)
        {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid prior settings {self:?}")))
        }
    }

    /// Log prior density and gradient at `θ = (log κ, log σ, 2·atanh ρ, log σ_ε)`,
    /// up to an additive constant.
    pub fn log_density(&self, theta: &[f64; 4]) -> (f64, [f64; 4]) {
        let [log_kappa, log_sigma, eta, log_eps] = *theta;
        let range = 8f64.sqrt() * (-log_kappa).exp();
        let sigma = log_sigma.exp();
        let lr = self.pc.lambda_range();
        let ls = self.pc.lambda_sigma();
        let tau = (-2.0 * log_eps).exp();

        // Densities of log r and log σ carry a Jacobian factor r and σ.
        let f_range = lr.ln() - range.ln() - lr / range;
        let f_sigma = ls.ln() + log_sigma - ls * sigma;
        let f_rho = -0.5 * self.rho_precision * eta * eta;
        let f_noise = self.noise_shape * (-2.0 * log_eps) - self.noise_rate * tau;

        let grad = [
            1.0 - lr / range,
            1.0 - ls * sigma,
            -self.rho_precision * eta,
            -2.0 * (self.noise_shape - self.noise_rate * tau),
        ];
        (f_range + f_sigma + f_rho + f_noise, grad)
    }
}

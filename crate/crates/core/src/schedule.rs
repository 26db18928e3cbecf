//! Discretized variance-preserving noise schedule.
//!
//! Per-step rates ramp linearly from `beta_min` (index 0) to `beta_max`
//! (index `T-1`), capped at [`BETA_CAP`]. Index `t` carries the DDPM
//! quantities `alpha_t = 1 - beta_t`, `alpha_bar_t = prod_{s<=t} alpha_s`,
//! the marginal scale `a_t = sqrt(alpha_bar_t)` and the marginal standard
//! deviation `sigma_t = sqrt(1 - alpha_bar_t)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::GraphState;

/// Upper bound on any per-step rate so that `alpha_t` stays positive.
pub const BETA_CAP: f64 = 0.999;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    steps: usize,
    beta_min: f64,
    beta_max: f64,
    betas: Vec<f64>,
    step_alphas: Vec<f64>,
    cum_alphas: Vec<f64>,
    marginal_scale: Vec<f64>,
    marginal_std: Vec<f64>,
}

impl NoiseSchedule {
    pub fn new(steps: usize, beta_min: f64, beta_max: f64) -> Result<Self> {
        if steps < 2 {
            return Err(Error::Config(format!("schedule needs at least 2 steps, got {steps}")));
        }
        if !(beta_min.is_finite() && beta_max.is_finite()) || beta_min <= 0.0 {
            return Err(Error::Config(format!(
                "beta_min must be a positive finite rate, got {beta_min}"
            )));
        }
        if beta_max <= beta_min {
            return Err(Error::Config(format!(
                "beta_max ({beta_max}) must exceed beta_min ({beta_min})"
            )));
        }
        if beta_min >= BETA_CAP {
            return Err(Error::Config(format!(
                "beta_min ({beta_min}) must be below the per-step cap {BETA_CAP}"
            )));
        }

        let span = (steps - 1) as f64;
        let betas: Vec<f64> = (0..steps)
            .map(|t| (beta_min + (beta_max - beta_min) * t as f64 / span).min(BETA_CAP))
            .collect();
        let step_alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let cum_alphas: Vec<f64> = step_alphas
            .iter()
            .scan(1.0, |acc, a| {
                *acc *= a;
                Some(*acc)
            })
            .collect();
        let marginal_scale = cum_alphas.iter().map(|c| c.sqrt()).collect();
        let marginal_std = cum_alphas.iter().map(|c| (1.0 - c).sqrt()).collect();

        Ok(Self {
            steps,
            beta_min,
            beta_max,
            betas,
            step_alphas,
            cum_alphas,
            marginal_scale,
            marginal_std,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn beta_min(&self) -> f64 {
        self.beta_min
    }

    pub fn beta_max(&self) -> f64 {
        self.beta_max
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn step_alphas(&self) -> &[f64] {
        &self.step_alphas
    }

    pub fn cum_alphas(&self) -> &[f64] {
        &self.cum_alphas
    }

    pub fn marginal_scales(&self) -> &[f64] {
        &self.marginal_scale
    }

    pub fn marginal_stds(&self) -> &[f64] {
        &self.marginal_std
    }

    pub fn check_index(&self, t: usize) -> Result<()> {
        if t >= self.steps {
            return Err(Error::Usage(format!(
                "time index {t} out of range for a {}-step schedule",
                self.steps
            )));
        }
        Ok(())
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t]
    }

    pub fn step_alpha(&self, t: usize) -> f64 {
        self.step_alphas[t]
    }

    pub fn cum_alpha(&self, t: usize) -> f64 {
        self.cum_alphas[t]
    }

    /// `a_t = sqrt(alpha_bar_t)`
    pub fn scale(&self, t: usize) -> f64 {
        self.marginal_scale[t]
    }

    /// `sigma_t = sqrt(1 - alpha_bar_t)`
    pub fn sigma(&self, t: usize) -> f64 {
        self.marginal_std[t]
    }

    /// `g(t) = sqrt(beta_t)`
    pub fn diffusion_coefficient(&self, t: usize) -> Result<f64> {
        self.check_index(t)?;
        Ok(self.betas[t].sqrt())
    }

    /// DDPM posterior variance `beta_{t+1} (1 - alpha_bar_t) / (1 - alpha_bar_{t+1})`
    /// for the transition from index `t + 1` to `t`.
    pub fn posterior_variance(&self, t: usize) -> f64 {
        self.betas[t + 1] * (1.0 - self.cum_alphas[t]) / (1.0 - self.cum_alphas[t + 1])
    }

    /// Forward marginal draw `a_t * g0 + sigma_t * noise` with caller-supplied
    /// standard-normal `noise`.
    pub fn forward_perturb(&self, g0: &GraphState, t: usize, noise: &GraphState) -> Result<GraphState> {
        self.check_index(t)?;
        g0.check_same_shape(noise)?;
        let (a, s) = (self.scale(t), self.sigma(t));
        let data = g0
            .as_slice()
            .iter()
            .zip(noise.as_slice())
            .map(|(x, z)| a * x + s * z)
            .collect();
        GraphState::from_free(g0.n_nodes(), g0.n_features(), data)
    }
}

//! Guided ancestral sampling.
//!
//! Each chain starts from a standard normal state at the last index and walks
//! down to index 0. After every reverse step a controller proposes a
//! direction and the state is moved by `k_t` along it. The final state is
//! replaced by its Tweedie denoise unless `final_denoise` is off.
//!
//! Ancestral noise and controller draws come from separate streams of the
//! chain's generator, so `k = 0` reproduces the unguided chain bit for bit.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::Reward;
use crate::guidance::{control, ControllerConfig};
use crate::prior::{eps_from_score, ScoreModel};
use crate::rng::{standard_normal_state, stream, CONTROL_STREAM, NOISE_STREAM};
use crate::state::GraphState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub controller: ControllerConfig,
    pub add_ancestral_noise: bool,
    pub record_trajectory: bool,
    /// Replace the last state by its posterior-mean denoise.
    pub final_denoise: bool,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            controller: ControllerConfig::default(),
            add_ancestral_noise: true,
            record_trajectory: false,
            final_denoise: true,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn new(controller: ControllerConfig, seed: u64) -> Self {
        Self {
            controller,
            seed,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// States from the initial draw down to index 0, when recording.
    pub states: Option<Vec<GraphState>>,
    /// Best reward seen by the controller at each guided step, in sampling
    /// order. Empty for unguided chains.
    pub rewards: Vec<f64>,
    pub reward_evals_total: usize,
    /// State at index 0 after guidance, before the final denoise.
    pub raw_final: GraphState,
    pub final_state: GraphState,
    pub final_denoised: bool,
}

/// One reverse transition from index `t + 1` to `t`.
pub fn reverse_step<R: Rng + ?Sized>(
    g_next: &GraphState,
    t: usize,
    model: &dyn ScoreModel,
    rng: &mut R,
    add_noise: bool,
) -> Result<GraphState> {
    let schedule = model.schedule();
    if t + 1 >= schedule.steps() {
        return Err(Error::Usage(format!(
            "reverse step from index {} is outside a {}-step schedule",
            t + 1,
            schedule.steps()
        )));
    }
    let alpha = schedule.step_alpha(t + 1);
    let sigma = schedule.sigma(t + 1);
    let eps = eps_from_score(&model.score(g_next, t + 1)?, sigma);
    let mut out = g_next.clone();
    out.axpy(-(1.0 - alpha) / sigma, &eps);
    out.scale(1.0 / alpha.sqrt());
    if add_noise && t > 0 {
        let z = standard_normal_state(g_next.n_nodes(), g_next.n_features(), rng);
        out.axpy(schedule.posterior_variance(t).sqrt(), &z);
    }
    Ok(out)
}

/// Runs one chain. `reward = None` gives the unguided sampler.
pub fn guided_sample(model: &dyn ScoreModel, reward: Option<&dyn Reward>, cfg: &SamplerConfig) -> Result<Trajectory> {
    if reward.is_some() {
        cfg.controller.validate()?;
    }
    let schedule = model.schedule();
    let (n, f) = model.shape();
    let mut noise_rng = stream(cfg.seed, NOISE_STREAM);
    let mut control_rng = stream(cfg.seed, CONTROL_STREAM);

    let mut g = standard_normal_state(n, f, &mut noise_rng);
    let mut states = cfg.record_trajectory.then(|| vec![g.clone()]);
    let mut rewards = Vec::new();
    let mut evals = 0;

    for t in (0..schedule.steps() - 1).rev() {
        g = reverse_step(&g, t, model, &mut noise_rng, cfg.add_ancestral_noise).map_err(|e| e.at_step(t))?;
        if let Some(reward) = reward {
            let signal = control(&g, t, model, reward, &cfg.controller, &mut control_rng).map_err(|e| e.at_step(t))?;
            g.axpy(cfg.controller.step_size(schedule, t), &signal.direction);
            evals += signal.reward_evals;
            rewards.push(signal.best_reward);
        }
        g.ensure_finite("sampler state").map_err(|e| e.at_step(t))?;
        if let Some(s) = states.as_mut() {
            s.push(g.clone());
        }
    }

    let final_state = if cfg.final_denoise {
        model.denoise(&g, 0).map_err(|e| e.at_step(0))?
    } else {
        g.clone()
    };
    Ok(Trajectory {
        states,
        rewards,
        reward_evals_total: evals,
        raw_final: g,
        final_state,
        final_denoised: cfg.final_denoise,
    })
}

/// Results of [`batch_sample`], ordered by chain index.
#[derive(Debug)]
pub struct BatchOutput {
    pub chains: Vec<Result<Trajectory>>,
}

impl BatchOutput {
    pub fn trajectories(&self) -> impl Iterator<Item = &Trajectory> {
        self.chains.iter().filter_map(|c| c.as_ref().ok())
    }

    pub fn errors(&self) -> impl Iterator<Item = (usize, &Error)> {
        self.chains
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.as_ref().err().map(|e| (i, e)))
    }

    pub fn finals(&self) -> Vec<GraphState> {
        self.trajectories().map(|t| t.final_state.clone()).collect()
    }

    pub fn reward_evals_total(&self) -> usize {
        self.trajectories().map(|t| t.reward_evals_total).sum()
    }

    /// All trajectories, or the first chain error.
    pub fn into_result(self) -> Result<Vec<Trajectory>> {
        self.chains.into_iter().collect()
    }
}

/// Runs `n_chains` independent chains seeded `base_seed + index`.
pub fn batch_sample(
    model: &dyn ScoreModel,
    reward: Option<&dyn Reward>,
    cfg: &SamplerConfig,
    n_chains: usize,
    base_seed: u64,
) -> Result<BatchOutput> {
    if n_chains == 0 {
        return Err(Error::Config("n_chains must be at least 1".into()));
    }
    let chains: Vec<Result<Trajectory>> = (0..n_chains)
        .into_par_iter()
        .map(|i| {
            let cfg = SamplerConfig {
                seed: base_seed.wrapping_add(i as u64),
                ..cfg.clone()
            };
            guided_sample(model, reward, &cfg)
        })
        .collect();
    for (i, c) in chains.iter().enumerate() {
        if let Err(e) = c {
            log::error!("chain {i} failed: {e}");
        }
    }
    Ok(BatchOutput { chains })
}

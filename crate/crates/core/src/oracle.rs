//! Reference computations that the analytic code is checked against:
//! finite-difference gradients, Monte-Carlo statistics of the controllers and
//! the closed-form Gaussian posterior.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::Reward;
use crate::guidance::{control, ControllerConfig};
use crate::prior::{GaussianPrior, ScoreModel};
use crate::rng::stream;
use crate::state::GraphState;

pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Above this magnitude of `f(g)` the central difference is refined by one
/// Richardson extrapolation.
pub const RICHARDSON_SCALE: f64 = 1e3;

pub const MIN_ESTIMATOR_SAMPLES: usize = 100;

const CHUNK: usize = 512;

/// Central-difference gradient of `f` at `g` over every free coordinate.
pub fn finite_diff_grad(f: impl Fn(&GraphState) -> f64, g: &GraphState, h: f64) -> Result<GraphState> {
    let f0 = f(g);
    if !f0.is_finite() {
        return Err(Error::Numerical(format!("function is {f0} at the base point")));
    }
    let mut x = g.clone();
    let mut central = |i: usize, h: f64| -> Result<f64> {
        let orig = x.as_slice()[i];
        x.as_mut_slice()[i] = orig + h;
        let up = f(&x);
        x.as_mut_slice()[i] = orig - h;
        let down = f(&x);
        x.as_mut_slice()[i] = orig;
        if !(up.is_finite() && down.is_finite()) {
            return Err(Error::Numerical(format!("function is not finite near coordinate {i}")));
        }
        Ok((up - down) / (2.0 * h))
    };
    let refine = f0.abs() > RICHARDSON_SCALE;
    let mut out = g.zeros_like();
    for i in 0..g.dim() {
        let coarse = central(i, h)?;
        out.as_mut_slice()[i] = if refine {
            let fine = central(i, h / 2.0)?;
            (4.0 * fine - coarse) / 3.0
        } else {
            coarse
        };
    }
    Ok(out)
}

/// `||a - b|| / max(||a||, ||b||)`, or 0 when both are below `1e-12`.
pub fn relative_error(a: &GraphState, b: &GraphState) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale < 1e-12 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorStats {
    pub mean_direction: GraphState,
    pub cosine_to_reference: f64,
    /// Per-coordinate variance of the direction, averaged over coordinates.
    pub empirical_variance: f64,
    pub n_samples: usize,
}

struct Moments {
    count: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(dim: usize) -> Self {
        Self {
            count: 0.0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.count += 1.0;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let delta = v - *m;
            *m += delta / self.count;
            *s += delta * (v - *m);
        }
    }

    fn merge(mut self, other: Moments) -> Self {
        let total = self.count + other.count;
        if other.count == 0.0 {
            return self;
        }
        for i in 0..self.mean.len() {
            let delta = other.mean[i] - self.mean[i];
            self.m2[i] += other.m2[i] + delta * delta * self.count * other.count / total;
            self.mean[i] += delta * other.count / total;
        }
        self.count = total;
        self
    }
}

/// Runs the configured controller `n_samples` times at `(g, t)` and
/// summarizes the directions. Sample `i` draws from stream `i` of `seed`, and
/// partial moments are merged in chunk order, so the result does not depend
/// on the thread count.
#[allow(clippy::too_many_arguments)]
pub fn estimator_stats(
    model: &dyn ScoreModel,
    reward: &dyn Reward,
    g: &GraphState,
    t: usize,
    cfg: &ControllerConfig,
    n_samples: usize,
    seed: u64,
    reference: &GraphState,
) -> Result<EstimatorStats> {
    if n_samples < MIN_ESTIMATOR_SAMPLES {
        return Err(Error::Usage(format!(
            "estimator statistics need at least {MIN_ESTIMATOR_SAMPLES} samples, got {n_samples}"
        )));
    }
    g.check_same_shape(reference)?;
    let chunks: Vec<Result<Moments>> = (0..n_samples.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut m = Moments::new(g.dim());
            for i in c * CHUNK..((c + 1) * CHUNK).min(n_samples) {
                let mut rng = stream(seed, i as u64);
                let s = control(g, t, model, reward, cfg, &mut rng)?;
                m.push(s.direction.as_slice());
            }
            Ok(m)
        })
        .collect();
    let mut total = Moments::new(g.dim());
    for c in chunks {
        total = total.merge(c?);
    }
    let variance = total.m2.iter().sum::<f64>() / (total.count - 1.0) / g.dim() as f64;
    let mean_direction = GraphState::from_free(g.n_nodes(), g.n_features(), total.mean)?;
    Ok(EstimatorStats {
        cosine_to_reference: mean_direction.cosine(reference),
        mean_direction,
        empirical_variance: variance,
        n_samples,
    })
}

/// Exact posterior of `G_0` under the prior `N(m, s^2 I)` and the likelihood
/// `exp(-||G_0 - y||^2 / (2 gamma))`: returns the mean and the per-coordinate
/// variance.
pub fn gaussian_posterior(prior: &GaussianPrior, y: &GraphState, gamma: f64) -> Result<(GraphState, f64)> {
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(Error::Config(format!("gamma must be positive, got {gamma}")));
    }
    prior.mean().check_same_shape(y)?;
    let s2 = prior.std().powi(2);
    let mut mean = y * (s2 / (s2 + gamma));
    mean.axpy(gamma / (s2 + gamma), prior.mean());
    Ok((mean, s2 * gamma / (s2 + gamma)))
}

/// Random state with adjacency entries uniform on (0, 1) and standard normal
/// features, the regime where relaxed rewards are evaluated.
pub fn random_relaxed_state<R: Rng + ?Sized>(n: usize, f: usize, rng: &mut R) -> GraphState {
    let mut g = crate::rng::standard_normal_state(n, f, rng);
    for v in g.edges_mut() {
        *v = rng.random::<f64>();
    }
    g
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::graphs::LinearReward;
    use crate::guidance::{ControllerKind, MuRule};
    use crate::rng::seeded;
    use crate::schedule::NoiseSchedule;

    #[test]
    fn finite_differences_of_simple_functions() {
        let mut rng = seeded(0);
        let c = crate::rng::standard_normal_state(4, 2, &mut rng);
        let g = crate::rng::standard_normal_state(4, 2, &mut rng);
        let lin = finite_diff_grad(|x| c.dot(x), &g, DEFAULT_FD_STEP).unwrap();
        assert!((&lin - &c).norm() < 1e-9);
        let constant = finite_diff_grad(|_| 3.0, &g, DEFAULT_FD_STEP).unwrap();
        assert_eq!(constant.norm(), 0.0);
        let big = finite_diff_grad(|x| 1e6 * x.norm_sq(), &g, DEFAULT_FD_STEP).unwrap();
        assert!(relative_error(&big, &(&g * 2e6)) < 1e-8);
        assert!(finite_diff_grad(|_| f64::NAN, &g, DEFAULT_FD_STEP).is_err());
    }

    #[test]
    fn posterior_fusion() {
        let s = Arc::new(NoiseSchedule::new(10, 0.01, 0.2).unwrap());
        let prior = GaussianPrior::new(GraphState::zeros(3, 1), 1.0, s).unwrap();
        let y = crate::rng::standard_normal_state(3, 1, &mut seeded(1));
        let (mean, var) = gaussian_posterior(&prior, &y, 1.0).unwrap();
        assert!((&mean - &(&y * 0.5)).norm() < 1e-15);
        assert_eq!(var, 0.5);
        let (far, _) = gaussian_posterior(&prior, &y, 1e12).unwrap();
        assert!(far.norm() < 1e-10);
        let (near, _) = gaussian_posterior(&prior, &y, 1e-12).unwrap();
        assert!((&near - &y).norm() < 1e-10);
        assert!(gaussian_posterior(&prior, &y, 0.0).is_err());
    }

    #[test]
    fn estimator_stats_are_reproducible_and_thread_independent() {
        let s = Arc::new(NoiseSchedule::new(20, 0.01, 0.2).unwrap());
        let prior = GaussianPrior::new(GraphState::zeros(4, 1), 1.0, s).unwrap();
        let c = crate::rng::standard_normal_state(4, 1, &mut seeded(2));
        let reward = LinearReward::new(c.clone());
        let g = GraphState::zeros(4, 1);
        let cfg = ControllerConfig::new(ControllerKind::TwoPoint, 1.0).with_mu(0.01, MuRule::Constant);
        let run = || estimator_stats(&prior, &reward, &g, 5, &cfg, 1500, 9, &c).unwrap();
        let a = run();
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(run);
        assert_eq!(a, single);
        assert!(a.cosine_to_reference > 0.9);
        assert!(estimator_stats(&prior, &reward, &g, 5, &cfg, 99, 9, &c).is_err());
    }
}

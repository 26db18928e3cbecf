//! Control laws that turn a reward on the denoised estimate into a guidance
//! direction for the current noisy state.
//!
//! The gradient controller differentiates `r(denoise(G_t))` through the
//! denoiser. The zeroth-order controllers only evaluate the reward at
//! denoised perturbations `denoise(G_t + mu_t U)` with Gaussian directions `U`
//! drawn in the free coordinates.
//!
//! Directions are returned unscaled; the sampler multiplies them by the step
//! size from [`ControllerConfig::step_size`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::Reward;
use crate::prior::ScoreModel;
use crate::rng::standard_normal_state;
use crate::schedule::NoiseSchedule;
use crate::state::GraphState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Gradient,
    OnePoint,
    TwoPoint,
    BestOfN,
    MultiPoint,
}

impl ControllerKind {
    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::Gradient => "gradient",
            ControllerKind::OnePoint => "one_point",
            ControllerKind::TwoPoint => "two_point",
            ControllerKind::BestOfN => "best_of_n",
            ControllerKind::MultiPoint => "multi_point",
        }
    }
}

/// How the smoothing radius follows the noise level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuRule {
    /// `mu_t = mu0`.
    Constant,
    /// `mu_t = mu0 * sigma_t`.
    #[default]
    ProportionalToSigma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    pub kind: ControllerKind,
    /// Guidance step size.
    pub k: f64,
    /// Temperature; only used when `scale_by_g` is set.
    pub lambda: f64,
    pub mu0: f64,
    pub mu_rule: MuRule,
    pub n_candidates: usize,
    /// Scale of the one- and two-point estimators.
    pub phi: f64,
    /// Multiply `k` by `sqrt(beta_t) / lambda` at every step.
    pub scale_by_g: bool,
    /// Ramp `k` linearly from 0 at the noisiest step to its full value at the
    /// last step.
    pub k_ramp: bool,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            kind: ControllerKind::BestOfN,
            k: 1.0,
            lambda: 1.0,
            mu0: 1.0,
            mu_rule: MuRule::ProportionalToSigma,
            n_candidates: 8,
            phi: 1.0,
            scale_by_g: false,
            k_ramp: false,
        }
    }
}

impl ControllerConfig {
    pub fn new(kind: ControllerKind, k: f64) -> Self {
        Self {
            kind,
            k,
            ..Self::default()
        }
    }

    pub fn with_mu(mut self, mu0: f64, rule: MuRule) -> Self {
        self.mu0 = mu0;
        self.mu_rule = rule;
        self
    }

    pub fn with_candidates(mut self, n: usize) -> Self {
        self.n_candidates = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        if !(self.k.is_finite() && self.k >= 0.0) {
            return Err(Error::Config(format!("k must be finite and >= 0, got {}", self.k)));
        }
        positive("lambda", self.lambda)?;
        positive("phi", self.phi)?;
        if self.kind != ControllerKind::Gradient {
            positive("mu0", self.mu0)?;
        }
        if matches!(self.kind, ControllerKind::BestOfN | ControllerKind::MultiPoint) && self.n_candidates == 0 {
            return Err(Error::Config("n_candidates must be at least 1".into()));
        }
        Ok(())
    }

    pub fn mu(&self, schedule: &NoiseSchedule, t: usize) -> f64 {
        match self.mu_rule {
            MuRule::Constant => self.mu0,
            MuRule::ProportionalToSigma => self.mu0 * schedule.sigma(t),
        }
    }

    /// Effective guidance step size at index `t`.
    pub fn step_size(&self, schedule: &NoiseSchedule, t: usize) -> f64 {
        let mut k = self.k;
        if self.scale_by_g {
            k *= schedule.beta(t).sqrt() / self.lambda;
        }
        if self.k_ramp {
            let last = schedule.steps() - 1;
            k *= (last - t.min(last)) as f64 / last as f64;
        }
        k
    }

    /// Reward evaluations one control step consumes.
    pub fn evals_per_step(&self) -> usize {
        match self.kind {
            ControllerKind::Gradient | ControllerKind::OnePoint => 1,
            ControllerKind::TwoPoint => 2,
            ControllerKind::BestOfN => self.n_candidates,
            ControllerKind::MultiPoint => self.n_candidates + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlSignal {
    pub direction: GraphState,
    pub reward_evals: usize,
    /// Largest reward seen this step (the base reward for the gradient path).
    pub best_reward: f64,
}

/// Standard normal on every free coordinate.
pub fn sample_direction<R: Rng + ?Sized>(n: usize, f: usize, rng: &mut R) -> GraphState {
    standard_normal_state(n, f, rng)
}

fn checked_reward(reward: &dyn Reward, g: &GraphState) -> Result<f64> {
    let value = reward.eval(g);
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::RewardEvaluation {
            reward: reward.name().to_string(),
            value,
        })
    }
}

fn perturbed_reward(
    g: &GraphState,
    t: usize,
    model: &dyn ScoreModel,
    reward: &dyn Reward,
    mu: f64,
    u: &GraphState,
) -> Result<f64> {
    let mut x = g.clone();
    x.axpy(mu, u);
    Ok(reward.eval(&model.denoise(&x, t)?))
}

pub fn gradient_control(
    g: &GraphState,
    t: usize,
    model: &dyn ScoreModel,
    reward: &dyn Reward,
) -> Result<ControlSignal> {
    if !reward.differentiable() {
        return Err(Error::Unsupported(format!(
            "reward `{}` has no analytic gradient; use a zeroth-order controller",
            reward.name()
        )));
    }
    let g0 = model.denoise(g, t)?;
    let (value, grad) = reward.value_and_grad(&g0)?;
    if !value.is_finite() {
        return Err(Error::RewardEvaluation {
            reward: reward.name().to_string(),
            value,
        });
    }
    let direction = model.denoiser_vjp(g, t, &grad)?;
    direction.ensure_finite("gradient control direction")?;
    Ok(ControlSignal {
        direction,
        reward_evals: 1,
        best_reward: value,
    })
}

pub fn zo_one_point<R: Rng + ?Sized>(
    g: &GraphState,
    t: usize,
    model: &dyn ScoreModel,
    reward: &dyn Reward,
    cfg: &ControllerConfig,
    rng: &mut R,
) -> Result<ControlSignal> {
    let mu = cfg.mu(model.schedule(), t);
    let mut u = sample_direction(g.n_nodes(), g.n_features(), rng);
    let value = perturbed_reward(g, t, model, reward, mu, &u)?;
    if !value.is_finite() {
        return Err(Error::RewardEvaluation {
            reward: reward.name().to_string(),
            value,
        });
    }
    u.scale(cfg.phi * value / mu);
    Ok(ControlSignal {
        direction: u,
        reward_evals: 1,
        best_reward: value,
    })
}

pub fn zo_two_point<R: Rng + ?Sized>(
    g: &GraphState,
    t: usize,
    model: &dyn ScoreModel,
    reward: &dyn Reward,
    cfg: &ControllerConfig,
    rng: &mut R,
) -> Result<ControlSignal> {
    let mu = cfg.mu(model.schedule(), t);
    let mut u = sample_direction(g.n_nodes(), g.n_features(), rng);
    let base = checked_reward(reward, &model.denoise(g, t)?)?;
    let value = perturbed_reward(g, t, model, reward, mu, &u)?;
    if !value.is_finite() {
        return Err(Error::RewardEvaluation {
            reward: reward.name().to_string(),
            value,
        });
    }
    u.scale(cfg.phi * (value - base) / mu);
    Ok(ControlSignal {
        direction: u,
        reward_evals: 2,
        best_reward: value.max(base),
    })
}

/// Picks the candidate direction whose denoised perturbation scores highest.
/// Ties go to the lowest index; non-finite rewards never win unless every
/// candidate is non-finite.
pub fn zo_best_of_n<R: Rng + ?Sized>(
    g: &GraphState,
    t: usize,
    model: &dyn ScoreModel,
    reward: &dyn Reward,
    cfg: &ControllerConfig,
    rng: &mut R,
) -> Result<ControlSignal> {
    let mu = cfg.mu(model.schedule(), t);
    let mut best: Option<(f64, GraphState)> = None;
    for i in 0..cfg.n_candidates {
        let u = sample_direction(g.n_nodes(), g.n_features(), rng);
        let mut value = perturbed_reward(g, t, model, reward, mu, &u)?;
        if !value.is_finite() {
            log::warn!(
                "best-of-N candidate {i} at step {t}: reward `{}` returned {value}",
                reward.name()
            );
            value = f64::NEG_INFINITY;
        }
        if best.as_ref().is_none_or(|(b, _)| value > *b) {
            best = Some((value, u));
        }
    }
    let (best_reward, direction) = best.ok_or_else(|| Error::Config("n_candidates must be at least 1".into()))?;
    Ok(ControlSignal {
        direction,
        reward_evals: cfg.n_candidates,
        best_reward,
    })
}

pub fn zo_multi_point<R: Rng + ?Sized>(
    g: &GraphState,
    t: usize,
    model: &dyn ScoreModel,
    reward: &dyn Reward,
    cfg: &ControllerConfig,
    rng: &mut R,
) -> Result<ControlSignal> {
    let mu = cfg.mu(model.schedule(), t);
    let mut u = sample_direction(g.n_nodes(), g.n_features(), rng);
    let base = checked_reward(reward, &model.denoise(g, t)?)?;
    let mut direction = g.zeros_like();
    let mut kept = 0usize;
    let mut best_reward = f64::NEG_INFINITY;
    for i in 0..cfg.n_candidates {
        if i > 0 {
            u = sample_direction(g.n_nodes(), g.n_features(), rng);
        }
        let value = perturbed_reward(g, t, model, reward, mu, &u)?;
        if !value.is_finite() {
            log::warn!(
                "multi-point candidate {i} at step {t}: reward `{}` returned {value}; dropped",
                reward.name()
            );
            continue;
        }
        best_reward = best_reward.max(value);
        direction.axpy(value - base, &u);
        kept += 1;
    }
    if kept > 0 {
        direction.scale(1.0 / (kept as f64 * mu));
    }
    Ok(ControlSignal {
        direction,
        reward_evals: cfg.n_candidates + 1,
        best_reward,
    })
}

/// Runs the controller selected by `cfg.kind`.
pub fn control<R: Rng + ?Sized>(
    g: &GraphState,
    t: usize,
    model: &dyn ScoreModel,
    reward: &dyn Reward,
    cfg: &ControllerConfig,
    rng: &mut R,
) -> Result<ControlSignal> {
    match cfg.kind {
        ControllerKind::Gradient => gradient_control(g, t, model, reward),
        ControllerKind::OnePoint => zo_one_point(g, t, model, reward, cfg, rng),
        ControllerKind::TwoPoint => zo_two_point(g, t, model, reward, cfg, rng),
        ControllerKind::BestOfN => zo_best_of_n(g, t, model, reward, cfg, rng),
        ControllerKind::MultiPoint => zo_multi_point(g, t, model, reward, cfg, rng),
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::graphs::LinearReward;
    use crate::prior::{EmpiricalMixturePrior, GaussianPrior};
    use crate::rng::seeded;

    struct Constant(f64);

    impl Reward for Constant {
        fn name(&self) -> &str {
            "constant"
        }
        fn eval(&self, _g: &GraphState) -> f64 {
            self.0
        }
    }

    fn gaussian(n: usize, f: usize) -> GaussianPrior {
        let schedule = Arc::new(NoiseSchedule::new(50, 1e-3, 0.2).unwrap());
        GaussianPrior::new(GraphState::zeros(n, f), 1.0, schedule).unwrap()
    }

    fn cfg(kind: ControllerKind) -> ControllerConfig {
        ControllerConfig::new(kind, 1.0)
            .with_mu(0.1, MuRule::Constant)
            .with_candidates(4)
    }

    #[test]
    fn constant_reward_zeroes_difference_estimators() {
        let model = gaussian(4, 1);
        let g = sample_direction(4, 1, &mut seeded(0));
        for kind in [ControllerKind::TwoPoint, ControllerKind::MultiPoint] {
            let s = control(&g, 10, &model, &Constant(3.0), &cfg(kind), &mut seeded(1)).unwrap();
            assert_eq!(s.direction.norm(), 0.0);
        }
        let s = control(
            &g,
            10,
            &model,
            &Constant(3.0),
            &cfg(ControllerKind::BestOfN),
            &mut seeded(1),
        )
        .unwrap();
        assert!(s.direction.norm() > 0.0);
        let s = control(
            &g,
            10,
            &model,
            &Constant(3.0),
            &cfg(ControllerKind::OnePoint),
            &mut seeded(1),
        )
        .unwrap();
        let u = sample_direction(4, 1, &mut seeded(1));
        assert_eq!(s.direction, &u * (3.0 / 0.1));
    }

    #[test]
    fn single_candidate_best_of_n_returns_the_draw() {
        let model = gaussian(3, 0);
        let g = GraphState::zeros(3, 0);
        let s = control(
            &g,
            5,
            &model,
            &Constant(0.0),
            &cfg(ControllerKind::BestOfN).with_candidates(1),
            &mut seeded(7),
        )
        .unwrap();
        assert_eq!(s.direction, sample_direction(3, 0, &mut seeded(7)));
        assert_eq!(s.reward_evals, 1);
    }

    #[test]
    fn two_point_equals_single_candidate_multi_point() {
        let model = gaussian(4, 2);
        let g = sample_direction(4, 2, &mut seeded(3));
        let r = LinearReward::new(sample_direction(4, 2, &mut seeded(4)));
        let a = control(&g, 20, &model, &r, &cfg(ControllerKind::TwoPoint), &mut seeded(9)).unwrap();
        let b = control(
            &g,
            20,
            &model,
            &r,
            &cfg(ControllerKind::MultiPoint).with_candidates(1),
            &mut seeded(9),
        )
        .unwrap();
        assert!((&a.direction - &b.direction).norm() <= 1e-12 * a.direction.norm());
    }

    #[test]
    fn gradient_of_linear_reward_through_gaussian_denoiser() {
        let model = gaussian(4, 1);
        let c = sample_direction(4, 1, &mut seeded(5));
        let r = LinearReward::new(c.clone());
        let g = sample_direction(4, 1, &mut seeded(6));
        let t = 30;
        let s = gradient_control(&g, t, &model, &r).unwrap();
        let expected = &c * model.denoiser_gain(t);
        assert!((&s.direction - &expected).norm() < 1e-12);

        let atom = EmpiricalMixturePrior::new(vec![c.clone()], Arc::new(model.schedule().clone())).unwrap();
        assert_eq!(gradient_control(&g, t, &atom, &r).unwrap().direction.norm(), 0.0);
    }

    #[test]
    fn gradient_controller_rejects_non_differentiable_rewards() {
        let model = gaussian(3, 0);
        let err = gradient_control(&GraphState::zeros(3, 0), 3, &model, &Constant(1.0)).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
    }

    #[test]
    fn non_finite_rewards() {
        let model = gaussian(3, 0);
        let g = GraphState::zeros(3, 0);
        let nan = Constant(f64::NAN);
        for kind in [ControllerKind::OnePoint, ControllerKind::TwoPoint] {
            assert!(matches!(
                control(&g, 3, &model, &nan, &cfg(kind), &mut seeded(0)),
                Err(Error::RewardEvaluation { .. })
            ));
        }
        let s = control(&g, 3, &model, &nan, &cfg(ControllerKind::BestOfN), &mut seeded(0)).unwrap();
        assert_eq!(s.best_reward, f64::NEG_INFINITY);
        assert_eq!(s.direction, sample_direction(3, 0, &mut seeded(0)));
    }

    #[test]
    fn step_size_options() {
        let s = NoiseSchedule::new(11, 0.04, 0.25).unwrap();
        let mut c = ControllerConfig::new(ControllerKind::Gradient, 2.0);
        assert_eq!(c.step_size(&s, 3), 2.0);
        c.scale_by_g = true;
        c.lambda = 4.0;
        assert!((c.step_size(&s, 0) - 2.0 * 0.2 / 4.0).abs() < 1e-15);
        c.scale_by_g = false;
        c.k_ramp = true;
        assert_eq!(c.step_size(&s, 0), 2.0);
        assert_eq!(c.step_size(&s, 10), 0.0);
        assert_eq!(c.step_size(&s, 5), 1.0);
    }

    #[test]
    fn validation() {
        assert!(ControllerConfig::new(ControllerKind::Gradient, -1.0)
            .validate()
            .is_err());
        assert!(cfg(ControllerKind::MultiPoint).with_candidates(0).validate().is_err());
        assert!(cfg(ControllerKind::TwoPoint)
            .with_mu(0.0, MuRule::Constant)
            .validate()
            .is_err());
        assert!(ControllerConfig::new(ControllerKind::Gradient, 0.0)
            .with_mu(0.0, MuRule::Constant)
            .validate()
            .is_ok());
    }

    #[test]
    fn reproducible_under_fixed_seed() {
        let model = gaussian(4, 1);
        let g = sample_direction(4, 1, &mut seeded(2));
        let r = LinearReward::new(sample_direction(4, 1, &mut seeded(8)));
        for kind in [
            ControllerKind::OnePoint,
            ControllerKind::BestOfN,
            ControllerKind::MultiPoint,
        ] {
            let a = control(&g, 7, &model, &r, &cfg(kind), &mut seeded(11)).unwrap();
            let b = control(&g, 7, &model, &r, &cfg(kind), &mut seeded(11)).unwrap();
            assert_eq!(a, b);
        }
    }
}

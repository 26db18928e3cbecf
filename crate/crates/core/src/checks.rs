//! Self-check suites run by `graphsteer oracle-check`.
//!
//! Each suite compares library code against an oracle from [`crate::oracle`]
//! and reports one [`CheckResult`] per assertion.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::datasets::DatasetFamily;
use crate::graphs::fairness::{FairnessReward, SensitiveAttributes};
use crate::graphs::observation::{LinkObservationReward, ObservationMask, ObservationMode};
use crate::graphs::rewards::{CountReward, CountStat, LinearReward, LossVariant, QuadraticReward, Reward};
use crate::guidance::{gradient_control, ControllerConfig, ControllerKind, MuRule};
use crate::oracle::{
    estimator_stats, finite_diff_grad, gaussian_posterior, random_relaxed_state, relative_error, DEFAULT_FD_STEP,
};
use crate::prior::{EmpiricalMixturePrior, GaussianPrior, ScoreModel};
use crate::rng::{seeded, standard_normal_state, ChainRng};
use crate::schedule::NoiseSchedule;
use crate::state::GraphState;

pub const GRADIENT_TOLERANCE: f64 = 1e-4;
pub const GRADIENT_POINTS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleSuite {
    Gradients,
    Estimators,
    Posterior,
}

impl OracleSuite {
    pub const ALL: [OracleSuite; 3] = [OracleSuite::Gradients, OracleSuite::Estimators, OracleSuite::Posterior];

    pub fn name(self) -> &'static str {
        match self {
            OracleSuite::Gradients => "gradients",
            OracleSuite::Estimators => "estimators",
            OracleSuite::Posterior => "posterior",
        }
    }
}

impl fmt::Display for OracleSuite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OracleSuite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OracleSuite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown oracle suite `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {}: {}", self.name, self.detail)
    }
}

pub fn run_suite(suite: OracleSuite, seed: u64) -> Result<Vec<CheckResult>> {
    match suite {
        OracleSuite::Gradients => gradient_suite(seed),
        OracleSuite::Estimators => estimator_suite(seed),
        OracleSuite::Posterior => posterior_suite(seed),
    }
}

/// Every differentiable reward shipped by the library, on `n` nodes with
/// `f` features.
pub fn differentiable_rewards(n: usize, f: usize, rng: &mut ChainRng) -> Result<Vec<Box<dyn Reward>>> {
    let z = SensitiveAttributes::balanced(n, rng)?;
    let truth = DatasetFamily::Er { n, p: 0.4 }.sample(f, rng);
    let obs = ObservationMask::sample_entries(&truth, 0.5, rng)?;
    let mut rewards: Vec<Box<dyn Reward>> = Vec::new();
    for (stat, bound) in [
        (CountStat::EdgeCount, 6.0),
        (CountStat::TriangleCount, 2.0),
        (CountStat::MaxDegree, 1.0),
    ] {
        for loss in [LossVariant::L2, LossVariant::OneSidedHinge] {
            rewards.push(Box::new(CountReward::new(stat, bound, loss)));
        }
    }
    rewards.push(Box::new(FairnessReward::new(z)?));
    rewards.push(Box::new(LinkObservationReward::new(
        obs.clone(),
        ObservationMode::AllEntries,
        false,
    )));
    rewards.push(Box::new(LinkObservationReward::new(
        obs,
        ObservationMode::EdgesOnly,
        false,
    )));
    rewards.push(Box::new(LinearReward::new(standard_normal_state(n, f, rng))));
    rewards.push(Box::new(QuadraticReward::new(standard_normal_state(n, f, rng))));
    Ok(rewards)
}

fn worst_gradient_error(
    points: usize,
    rng: &mut ChainRng,
    mut point: impl FnMut(&mut ChainRng) -> GraphState,
    analytic: impl Fn(&GraphState) -> Result<GraphState>,
    value: impl Fn(&GraphState) -> f64,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let g = point(rng);
        let fd = finite_diff_grad(&value, &g, DEFAULT_FD_STEP)?;
        worst = worst.max(relative_error(&analytic(&g)?, &fd));
    }
    Ok(worst)
}

fn gradient_check(name: String, worst: f64) -> CheckResult {
    CheckResult::new(
        name,
        worst <= GRADIENT_TOLERANCE,
        format!("max relative error {worst:.2e} over {GRADIENT_POINTS} points"),
    )
}

/// Mixture of `m` random graphs on `n` nodes with `f` features.
pub fn random_mixture(
    n: usize,
    f: usize,
    m: usize,
    schedule: Arc<NoiseSchedule>,
    rng: &mut ChainRng,
) -> Result<EmpiricalMixturePrior> {
    let atoms = (0..m).map(|_| DatasetFamily::Er { n, p: 0.4 }.sample(f, rng)).collect();
    EmpiricalMixturePrior::new(atoms, schedule)
}

fn gradient_suite(seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = seeded(seed);
    let (n, f) = (6, 2);
    let mut out = Vec::new();
    for reward in differentiable_rewards(n, f, &mut rng)? {
        let worst = worst_gradient_error(
            GRADIENT_POINTS,
            &mut rng,
            |r| random_relaxed_state(n, f, r),
            |g| reward.grad(g),
            |g| reward.eval(g),
        )?;
        out.push(gradient_check(format!("reward {}", reward.name()), worst));
    }

    let schedule = Arc::new(NoiseSchedule::new(200, 5e-4, 0.1)?);
    let mixture = random_mixture(n, f, 8, schedule.clone(), &mut rng)?;
    let gaussian = GaussianPrior::new(standard_normal_state(n, f, &mut rng), 0.7, schedule.clone())?;
    let target = standard_normal_state(n, f, &mut rng);
    let quadratic = QuadraticReward::new(target);
    let edges = CountReward::new(CountStat::EdgeCount, 6.0, LossVariant::L2);
    let models: [(&str, &dyn ScoreModel); 2] = [("mixture", &mixture), ("gaussian", &gaussian)];
    let rewards: [&dyn Reward; 2] = [&quadratic, &edges];
    for (label, model) in models {
        for t in [40usize, 120] {
            let sigma = schedule.sigma(t);
            let a = schedule.scale(t);
            let worst = worst_gradient_error(
                GRADIENT_POINTS,
                &mut rng,
                |r| {
                    let g0 = random_relaxed_state(n, f, r);
                    let z = standard_normal_state(n, f, r);
                    &(&g0 * a) + &(&z * sigma)
                },
                |g| model.score(g, t),
                |g| match label {
                    "mixture" => mixture.log_density(g, t).unwrap_or(f64::NAN),
                    _ => {
                        let var = a * a * gaussian.std().powi(2) + sigma * sigma;
                        -(g - &(gaussian.mean() * a)).norm_sq() / (2.0 * var)
                    }
                },
            )?;
            out.push(gradient_check(format!("score {label} t={t}"), worst));
            for reward in rewards {
                let worst = worst_gradient_error(
                    GRADIENT_POINTS,
                    &mut rng,
                    |r| {
                        let g0 = random_relaxed_state(n, f, r);
                        let z = standard_normal_state(n, f, r);
                        &(&g0 * a) + &(&z * sigma)
                    },
                    |g| gradient_control(g, t, model, reward).map(|s| s.direction),
                    |g| model.denoise(g, t).map(|d| reward.eval(&d)).unwrap_or(f64::NAN),
                )?;
                out.push(gradient_check(
                    format!("guidance gradient {label}/{} t={t}", reward.name()),
                    worst,
                ));
            }
        }
    }
    Ok(out)
}

/// The smooth-reward estimator problem used by the estimator suite and the
/// benchmark command: a unit Gaussian prior on 8 nodes with one feature
/// (36 free coordinates), a linear reward and a random evaluation point.
pub struct EstimatorProblem {
    pub prior: GaussianPrior,
    pub reward: LinearReward,
    pub point: GraphState,
    pub t: usize,
    /// Analytic gradient of `r(denoise(g))` at `point`.
    pub reference: GraphState,
}

impl EstimatorProblem {
    pub fn new(seed: u64) -> Result<Self> {
        let mut rng = seeded(seed);
        let schedule = Arc::new(NoiseSchedule::new(200, 5e-4, 0.1)?);
        let prior = GaussianPrior::new(GraphState::zeros(8, 1), 1.0, schedule)?;
        let reward = LinearReward::new(standard_normal_state(8, 1, &mut rng));
        let point = standard_normal_state(8, 1, &mut rng);
        let t = 60;
        let reference = gradient_control(&point, t, &prior, &reward)?.direction;
        Ok(Self {
            prior,
            reward,
            point,
            t,
            reference,
        })
    }

    pub fn stats(&self, cfg: &ControllerConfig, samples: usize, seed: u64) -> Result<crate::oracle::EstimatorStats> {
        estimator_stats(
            &self.prior,
            &self.reward,
            &self.point,
            self.t,
            cfg,
            samples,
            seed,
            &self.reference,
        )
    }

    /// Mean cosine between the best-of-N direction and the ascent direction.
    pub fn best_of_n_alignment(&self, n: usize, trials: usize, seed: u64) -> Result<f64> {
        let cfg = zo_config(ControllerKind::BestOfN, 1e-2).with_candidates(n);
        let mut total = 0.0;
        for i in 0..trials {
            let mut rng = crate::rng::stream(seed, i as u64);
            let s = crate::guidance::zo_best_of_n(&self.point, self.t, &self.prior, &self.reward, &cfg, &mut rng)?;
            total += s.direction.cosine(&self.reference);
        }
        Ok(total / trials as f64)
    }
}

/// Controller with a constant smoothing radius `mu`.
pub fn zo_config(kind: ControllerKind, mu: f64) -> ControllerConfig {
    ControllerConfig::new(kind, 1.0).with_mu(mu, MuRule::Constant)
}

fn estimator_suite(seed: u64) -> Result<Vec<CheckResult>> {
    let p = EstimatorProblem::new(seed)?;
    let mut out = Vec::new();
    for (kind, n) in [(ControllerKind::TwoPoint, 1), (ControllerKind::MultiPoint, 4)] {
        let s = p.stats(&zo_config(kind, 1e-2).with_candidates(n), 20_000, seed + 1)?;
        out.push(CheckResult::new(
            format!("{} mean direction", kind.name()),
            s.cosine_to_reference >= 0.99,
            format!("cosine {:.4} (>= 0.99)", s.cosine_to_reference),
        ));
    }
    let var = |kind, n| -> Result<f64> {
        Ok(p.stats(&zo_config(kind, 1e-2).with_candidates(n), 4_000, seed + 2)?
            .empirical_variance)
    };
    let one = var(ControllerKind::OnePoint, 1)?;
    let two = var(ControllerKind::TwoPoint, 1)?;
    let m4 = var(ControllerKind::MultiPoint, 4)?;
    let m16 = var(ControllerKind::MultiPoint, 16)?;
    out.push(CheckResult::new(
        "variance ordering",
        one > two && two >= m4 && m4 > m16 && m16 <= two / 8.0,
        format!("one {one:.3e} > two {two:.3e} >= multi4 {m4:.3e} > multi16 {m16:.3e}"),
    ));
    let align: Vec<f64> = [2, 8, 32]
        .into_iter()
        .map(|n| p.best_of_n_alignment(n, 500, seed + 3))
        .collect::<Result<_>>()?;
    out.push(CheckResult::new(
        "best-of-N alignment grows with N",
        align[0] < align[1] && align[1] < align[2],
        format!("mean cosine {:.3} < {:.3} < {:.3}", align[0], align[1], align[2]),
    ));
    Ok(out)
}

fn posterior_suite(seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = seeded(seed);
    let schedule = Arc::new(NoiseSchedule::new(200, 5e-4, 0.1)?);
    let mut out = Vec::new();
    let unit = GaussianPrior::new(GraphState::zeros(5, 1), 1.0, schedule.clone())?;
    let y = standard_normal_state(5, 1, &mut rng);

    let (mean, var) = gaussian_posterior(&unit, &y, 1.0)?;
    let err = (&mean - &(&y * 0.5)).norm();
    out.push(CheckResult::new(
        "equal precision fusion",
        err < 1e-12 && (var - 0.5).abs() < 1e-15,
        format!("|mean - y/2| = {err:.1e}, var = {var}"),
    ));
    let (loose, _) = gaussian_posterior(&unit, &y, 1e12)?;
    out.push(CheckResult::new(
        "uninformative likelihood keeps the prior mean",
        loose.norm() < 1e-9,
        format!("|mean| = {:.1e}", loose.norm()),
    ));
    let (tight, _) = gaussian_posterior(&unit, &y, 1e-12)?;
    let err = (&tight - &y).norm();
    out.push(CheckResult::new(
        "hard likelihood pins the target",
        err < 1e-9,
        format!("|mean - y| = {err:.1e}"),
    ));

    // The Tweedie denoiser of a Gaussian prior is the posterior mean of G_0
    // given one Gaussian observation a_t G_0 + sigma_t Z, i.e. a fusion with
    // target g / a_t and gamma = (sigma_t / a_t)^2.
    let prior = GaussianPrior::new(standard_normal_state(5, 1, &mut rng), 0.8, schedule.clone())?;
    let mut worst: f64 = 0.0;
    for t in [10, 80, 150] {
        let g = standard_normal_state(5, 1, &mut rng);
        let a = schedule.scale(t);
        let gamma = (schedule.sigma(t) / a).powi(2);
        let (fused, _) = gaussian_posterior(&prior, &(&g * (1.0 / a)), gamma)?;
        worst = worst.max(relative_error(&prior.denoise(&g, t)?, &fused));
    }
    out.push(CheckResult::new(
        "Tweedie denoiser equals Gaussian fusion",
        worst < 1e-10,
        format!("max relative error {worst:.1e}"),
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in OracleSuite::ALL {
            assert_eq!(s.name().parse::<OracleSuite>().unwrap(), s);
        }
        assert!("nope".parse::<OracleSuite>().is_err());
    }

    #[test]
    fn posterior_suite_passes() {
        for r in run_suite(OracleSuite::Posterior, 0).unwrap() {
            assert!(r.passed, "{r}");
        }
    }
}

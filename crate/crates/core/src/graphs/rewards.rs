//! Reward contract and the structural constraint rewards.
//!
//! A reward scores a clean graph estimate; larger is better. Constraint
//! rewards are negated losses. Differentiable rewards return gradients with
//! respect to free coordinates (see [`crate::state`]).

use serde::{Deserialize, Serialize};

use super::fairness::{FairnessReward, SensitiveAttributes};
use super::observation::{LinkObservationReward, ObservationMask, ObservationMode};
use super::stats;
use crate::error::{Error, Result};
use crate::state::GraphState;

/// Default temperature of the soft maximum used by the differentiable
/// max-degree losses.
pub const DEFAULT_DEGREE_TEMPERATURE: f64 = 10.0;

pub trait Reward: Send + Sync {
    fn name(&self) -> &str;

    fn eval(&self, g: &GraphState) -> f64;

    fn differentiable(&self) -> bool {
        false
    }

    /// Value and free-coordinate gradient in one pass.
    fn value_and_grad(&self, _g: &GraphState) -> Result<(f64, GraphState)> {
        Err(Error::Unsupported(format!(
            "reward `{}` has no analytic gradient; use a zeroth-order controller",
            self.name()
        )))
    }

    fn grad(&self, g: &GraphState) -> Result<GraphState> {
        self.value_and_grad(g).map(|(_, grad)| grad)
    }
}

impl<R: Reward + ?Sized> Reward for Box<R> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn eval(&self, g: &GraphState) -> f64 {
        (**self).eval(g)
    }
    fn differentiable(&self) -> bool {
        (**self).differentiable()
    }
    fn value_and_grad(&self, g: &GraphState) -> Result<(f64, GraphState)> {
        (**self).value_and_grad(g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    EdgeCount,
    TriangleCount,
    MaxDegree,
    ForceStar,
    Fairness,
    LinkObservation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossVariant {
    #[default]
    L2,
    OneSidedHinge,
    QuantizedL2,
    QuantizedHinge,
}

impl LossVariant {
    pub fn is_quantized(self) -> bool {
        matches!(self, LossVariant::QuantizedL2 | LossVariant::QuantizedHinge)
    }

    fn is_hinge(self) -> bool {
        matches!(self, LossVariant::OneSidedHinge | LossVariant::QuantizedHinge)
    }

    /// Negated loss of a statistic against a bound.
    fn reward(self, stat: f64, bound: f64) -> f64 {
        if self.is_hinge() {
            -(stat - bound).max(0.0)
        } else {
            -(stat - bound).powi(2)
        }
    }

    /// d reward / d stat
    fn slope(self, stat: f64, bound: f64) -> f64 {
        if self.is_hinge() {
            if stat > bound {
                -1.0
            } else {
                0.0
            }
        } else {
            -2.0 * (stat - bound)
        }
    }
}

#[derive(Debug, Clone)]
pub enum ConstraintAux {
    None,
    Fairness(SensitiveAttributes),
    Link {
        obs: ObservationMask,
        mode: ObservationMode,
    },
}

#[derive(Debug, Clone)]
pub struct ConstraintSpec {
    pub kind: ConstraintKind,
    pub bound: f64,
    pub loss: LossVariant,
    pub aux: ConstraintAux,
}

impl ConstraintSpec {
    pub fn count(kind: ConstraintKind, bound: f64, loss: LossVariant) -> Self {
        Self {
            kind,
            bound,
            loss,
            aux: ConstraintAux::None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ConstraintKind::EdgeCount | ConstraintKind::TriangleCount | ConstraintKind::MaxDegree => {
                if !(self.bound >= 0.0 && self.bound.is_finite()) {
                    return Err(Error::Config(format!(
                        "count-constraint bound must be finite and >= 0, got {}",
                        self.bound
                    )));
                }
            }
            ConstraintKind::Fairness => {
                if !matches!(self.aux, ConstraintAux::Fairness(_)) {
                    return Err(Error::Config("fairness constraint needs sensitive attributes".into()));
                }
            }
            ConstraintKind::LinkObservation => {
                if !matches!(self.aux, ConstraintAux::Link { .. }) {
                    return Err(Error::Config("link constraint needs an observation mask".into()));
                }
            }
            ConstraintKind::ForceStar => {}
        }
        Ok(())
    }
}

/// Builds the reward for a constraint.
pub fn constraint_reward(spec: &ConstraintSpec) -> Result<Box<dyn Reward>> {
    spec.validate()?;
    Ok(match (&spec.kind, &spec.aux) {
        (ConstraintKind::EdgeCount, _) => Box::new(CountReward::new(CountStat::EdgeCount, spec.bound, spec.loss)),
        (ConstraintKind::TriangleCount, _) => {
            Box::new(CountReward::new(CountStat::TriangleCount, spec.bound, spec.loss))
        }
        (ConstraintKind::MaxDegree, _) => Box::new(CountReward::new(CountStat::MaxDegree, spec.bound, spec.loss)),
        (ConstraintKind::ForceStar, _) => Box::new(StarReward),
        (ConstraintKind::Fairness, ConstraintAux::Fairness(z)) => {
            let r = FairnessReward::new(z.clone())?;
            Box::new(if spec.loss.is_quantized() { r.exact() } else { r })
        }
        (ConstraintKind::LinkObservation, ConstraintAux::Link { obs, mode }) => {
            Box::new(LinkObservationReward::new(obs.clone(), *mode, spec.loss.is_quantized()))
        }
        _ => unreachable!("validated above"),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountStat {
    EdgeCount,
    TriangleCount,
    MaxDegree,
}

/// `-(stat(A) - bound)^2` or `-max(stat(A) - bound, 0)`, optionally on the
/// quantized adjacency.
#[derive(Debug, Clone)]
pub struct CountReward {
    stat: CountStat,
    bound: f64,
    loss: LossVariant,
    tau: f64,
    name: String,
}

impl CountReward {
    pub fn new(stat: CountStat, bound: f64, loss: LossVariant) -> Self {
        let name = format!("{stat:?}/{loss:?}").to_lowercase();
        Self {
            stat,
            bound,
            loss,
            tau: DEFAULT_DEGREE_TEMPERATURE,
            name,
        }
    }

    pub fn with_degree_temperature(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    fn statistic(&self, a: &GraphState) -> f64 {
        match self.stat {
            CountStat::EdgeCount => stats::edge_count(a),
            CountStat::TriangleCount => stats::triangle_count(a),
            CountStat::MaxDegree if self.loss.is_quantized() => stats::max_degree(a),
            CountStat::MaxDegree => stats::soft_max_degree(a, self.tau).0,
        }
    }
}

impl Reward for CountReward {
    fn name(&self) -> &str {
        &self.name
    }

    fn eval(&self, g: &GraphState) -> f64 {
        let s = if self.loss.is_quantized() {
            self.statistic(&stats::quantize(g, 0.5))
        } else {
            self.statistic(g)
        };
        self.loss.reward(s, self.bound)
    }

    fn differentiable(&self) -> bool {
        !self.loss.is_quantized()
    }

    fn value_and_grad(&self, g: &GraphState) -> Result<(f64, GraphState)> {
        if self.loss.is_quantized() {
            return Err(Error::Unsupported(format!(
                "reward `{}` quantizes its input and has no gradient",
                self.name
            )));
        }
        let n = g.n_nodes();
        let (stat, mut grad) = match self.stat {
            CountStat::EdgeCount => {
                let mut grad = g.zeros_like();
                grad.edges_mut().fill(2.0);
                (stats::edge_count(g), grad)
            }
            CountStat::TriangleCount => {
                let a = g.dense_adjacency();
                let a2 = stats::matmul(n, &a, &a);
                let stat = a2.iter().zip(&a).map(|(x, y)| x * y).sum();
                // d tr(A^3) / dA_ij = 3 (A^2)_ji per entry
                let per_entry: Vec<f64> = a2.iter().map(|v| 3.0 * v).collect();
                let zeros = vec![0.0; n * g.n_features()];
                (
                    stat,
                    GraphState::from_matrix_gradient(n, g.n_features(), &zeros, &per_entry),
                )
            }
            CountStat::MaxDegree => {
                let (stat, w) = stats::soft_max_degree(g, self.tau);
                let mut grad = g.zeros_like();
                for ((i, j), v) in crate::state::pairs(n).zip(grad.edges_mut()) {
                    *v = w[i] + w[j];
                }
                (stat, grad)
            }
        };
        grad.scale(self.loss.slope(stat, self.bound));
        Ok((self.loss.reward(stat, self.bound), grad))
    }
}

/// Negated distance to the nearest star on the quantized graph:
/// edges not incident to the hub plus the hub's missing spokes.
#[derive(Debug, Clone, Copy, Default)]
pub struct StarReward;

pub fn star_reward() -> StarReward {
    StarReward
}

impl StarReward {
    pub fn penalty(a: &GraphState) -> f64 {
        let n = a.n_nodes();
        let Some(c) = stats::hub(a) else { return 0.0 };
        let deg = a.degrees();
        stats::edges_over_star(a) + ((n - 1) as f64 - deg[c])
    }
}

impl Reward for StarReward {
    fn name(&self) -> &str {
        "force_star"
    }

    fn eval(&self, g: &GraphState) -> f64 {
        -StarReward::penalty(&stats::quantize(g, 0.5))
    }
}

/// `<C, G>` over free coordinates.
#[derive(Debug, Clone)]
pub struct LinearReward {
    pub direction: GraphState,
}

impl LinearReward {
    pub fn new(direction: GraphState) -> Self {
        Self { direction }
    }
}

impl Reward for LinearReward {
    fn name(&self) -> &str {
        "linear"
    }

    fn eval(&self, g: &GraphState) -> f64 {
        self.direction.dot(g)
    }

    fn differentiable(&self) -> bool {
        true
    }

    fn value_and_grad(&self, g: &GraphState) -> Result<(f64, GraphState)> {
        g.check_same_shape(&self.direction)?;
        Ok((self.eval(g), self.direction.clone()))
    }
}

/// `-||G - target||^2 / scale`
#[derive(Debug, Clone)]
pub struct QuadraticReward {
    pub target: GraphState,
    pub scale: f64,
}

impl QuadraticReward {
    pub fn new(target: GraphState) -> Self {
        Self { target, scale: 1.0 }
    }
}

impl Reward for QuadraticReward {
    fn name(&self) -> &str {
        "quadratic"
    }

    fn eval(&self, g: &GraphState) -> f64 {
        -g.dist_sq(&self.target) / self.scale
    }

    fn differentiable(&self) -> bool {
        true
    }

    fn value_and_grad(&self, g: &GraphState) -> Result<(f64, GraphState)> {
        g.check_same_shape(&self.target)?;
        let mut grad = g - &self.target;
        grad.scale(-2.0 / self.scale);
        Ok((self.eval(g), grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::stats::fixtures::*;

    #[test]
    fn edge_count_rewards() {
        let l2 = constraint_reward(&ConstraintSpec::count(ConstraintKind::EdgeCount, 6.0, LossVariant::L2)).unwrap();
        assert_eq!(l2.eval(&complete(3)), 0.0);
        let hinge = constraint_reward(&ConstraintSpec::count(
            ConstraintKind::EdgeCount,
            6.0,
            LossVariant::OneSidedHinge,
        ))
        .unwrap();
        assert_eq!(hinge.eval(&complete(4)), -6.0);
        assert_eq!(hinge.eval(&complete(3)), 0.0);
    }

    #[test]
    fn quantized_variants_refuse_gradients() {
        let r = constraint_reward(&ConstraintSpec::count(
            ConstraintKind::TriangleCount,
            0.0,
            LossVariant::QuantizedL2,
        ))
        .unwrap();
        assert!(!r.differentiable());
        assert!(matches!(r.grad(&complete(3)), Err(Error::Unsupported(_))));
        // quantization happens before the statistic
        let mut g = complete(3);
        for v in g.edges_mut() {
            *v = 0.51;
        }
        assert_eq!(r.eval(&g), -36.0);
    }

    #[test]
    fn negative_bound_is_rejected() {
        let spec = ConstraintSpec::count(ConstraintKind::EdgeCount, -1.0, LossVariant::L2);
        assert!(matches!(constraint_reward(&spec), Err(Error::Config(_))));
    }

    #[test]
    fn star_reward_values() {
        assert_eq!(star_reward().eval(&star(5)), 0.0);
        assert_eq!(star_reward().eval(&complete(3)), -1.0);
        assert_eq!(star_reward().eval(&GraphState::zeros(1, 0)), 0.0);
        assert!(!star_reward().differentiable());
    }

    #[test]
    fn star_penalty_of_k3_is_the_minimum_over_hubs() {
        // Enumerate all hub choices: edges not touching the hub plus missing spokes.
        let g = complete(3);
        let best = (0..3)
            .map(|c| {
                let surplus = crate::state::pairs(3)
                    .filter(|&(i, j)| g.adj(i, j) != 0.0 && i != c && j != c)
                    .count();
                let missing = (0..3).filter(|&j| j != c && g.adj(c, j) == 0.0).count();
                surplus + missing
            })
            .min()
            .unwrap();
        assert_eq!(best, 1);
        assert_eq!(StarReward::penalty(&g), best as f64);
    }
}

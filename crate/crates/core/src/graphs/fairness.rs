//! Dyadic-parity fairness: metrics on {0,1} graphs and a differentiable
//! density-gap reward.
//!
//! `rho_same` is the edge density over node pairs inside a sensitive group,
//! `rho_cross` the density over pairs spanning the two groups.
//! `delta_dp = |rho_same - rho_cross|`; `delta_dp_node` averages the same gap
//! computed from each node's own neighborhood. A node that is alone in its
//! group has no same-group peers; its same-group density is taken as 0.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::rewards::Reward;
use super::stats;
use crate::error::{Error, Result};
use crate::state::{pairs, GraphState};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensitiveAttributes {
    z: Vec<u8>,
}

impl SensitiveAttributes {
    pub fn new(z: Vec<u8>) -> Result<Self> {
        if let Some(bad) = z.iter().find(|&&v| v > 1) {
            return Err(Error::Config(format!(
                "sensitive attributes must be 0 or 1, found {bad}"
            )));
        }
        Ok(Self { z })
    }

    /// Uniform random assignment with both groups nonempty (`n >= 2`).
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config("need at least two nodes for two groups".into()));
        }
        let mut z: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
        if z.iter().all(|&v| v == z[0]) {
            let flip = rng.random_range(0..n);
            z[flip] ^= 1;
        }
        Ok(Self { z })
    }

    /// Half the nodes (rounded down) in group 1, positions shuffled.
    pub fn balanced<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config("need at least two nodes for two groups".into()));
        }
        let mut z: Vec<u8> = (0..n).map(|i| u8::from(i < n / 2)).collect();
        z.shuffle(rng);
        Ok(Self { z })
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.z
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn group_sizes(&self) -> (usize, usize) {
        let ones = self.z.iter().filter(|&&v| v == 1).count();
        (self.z.len() - ones, ones)
    }

    pub fn flipped(&self) -> Self {
        Self {
            z: self.z.iter().map(|v| 1 - v).collect(),
        }
    }

    fn same(&self, i: usize, j: usize) -> bool {
        self.z[i] == self.z[j]
    }

    /// Number of same-group and cross-group unordered pairs.
    pub fn pair_counts(&self) -> (usize, usize) {
        let (n0, n1) = self.group_sizes();
        (n0 * n0.saturating_sub(1) / 2 + n1 * n1.saturating_sub(1) / 2, n0 * n1)
    }

    pub fn check_defined(&self, n: usize) -> Result<()> {
        if self.z.len() != n {
            return Err(Error::Shape {
                expected: format!("{n} sensitive attributes"),
                got: self.z.len().to_string(),
            });
        }
        let (n0, n1) = self.group_sizes();
        if n0 == 0 || n1 == 0 {
            return Err(Error::UndefinedMetric("a sensitive group is empty".into()));
        }
        if self.pair_counts().0 == 0 {
            return Err(Error::UndefinedMetric("no same-group node pairs".into()));
        }
        Ok(())
    }
}

/// Returns `(delta_dp, delta_dp_node)`.
pub fn fairness_metrics(a: &GraphState, z: &SensitiveAttributes) -> Result<(f64, f64)> {
    let n = a.n_nodes();
    z.check_defined(n)?;
    let (same_pairs, cross_pairs) = z.pair_counts();
    let (mut same, mut cross) = (0.0, 0.0);
    let mut node_same = vec![0.0; n];
    let mut node_cross = vec![0.0; n];
    for ((i, j), &v) in pairs(n).zip(a.edges()) {
        if v == 0.0 {
            continue;
        }
        if z.same(i, j) {
            same += v;
            node_same[i] += v;
            node_same[j] += v;
        } else {
            cross += v;
            node_cross[i] += v;
            node_cross[j] += v;
        }
    }
    let dp = (same / same_pairs as f64 - cross / cross_pairs as f64).abs();

    let (n0, n1) = z.group_sizes();
    let node_gap: f64 = (0..n)
        .map(|i| {
            let (own, other) = if z.as_slice()[i] == 0 { (n0, n1) } else { (n1, n0) };
            let same_rate = if own > 1 { node_same[i] / (own - 1) as f64 } else { 0.0 };
            (same_rate - node_cross[i] / other as f64).abs()
        })
        .sum();
    Ok((dp, node_gap / n as f64))
}

/// `-(rho_same - rho_cross)^2` on the continuous adjacency (differentiable),
/// or on the quantized adjacency (the exact variant, no gradient).
#[derive(Debug, Clone)]
pub struct FairnessReward {
    z: SensitiveAttributes,
    exact: bool,
    same_weight: f64,
    cross_weight: f64,
}

impl FairnessReward {
    pub fn new(z: SensitiveAttributes) -> Result<Self> {
        z.check_defined(z.len())?;
        let (s, c) = z.pair_counts();
        Ok(Self {
            z,
            exact: false,
            same_weight: 1.0 / s as f64,
            cross_weight: 1.0 / c as f64,
        })
    }

    /// Quantize before measuring; not differentiable.
    pub fn exact(mut self) -> Self {
        self.exact = true;
        self
    }

    fn coefficient(&self, i: usize, j: usize) -> f64 {
        if self.z.same(i, j) {
            self.same_weight
        } else {
            -self.cross_weight
        }
    }

    fn gap(&self, a: &GraphState) -> f64 {
        pairs(a.n_nodes())
            .zip(a.edges())
            .map(|((i, j), v)| self.coefficient(i, j) * v)
            .sum()
    }
}

impl Reward for FairnessReward {
    fn name(&self) -> &str {
        if self.exact {
            "fairness_exact"
        } else {
            "fairness"
        }
    }

    fn eval(&self, g: &GraphState) -> f64 {
        let gap = if self.exact {
            self.gap(&stats::quantize(g, 0.5))
        } else {
            self.gap(g)
        };
        -gap * gap
    }

    fn differentiable(&self) -> bool {
        !self.exact
    }

    fn value_and_grad(&self, g: &GraphState) -> Result<(f64, GraphState)> {
        if self.exact {
            return Err(Error::Unsupported("exact fairness reward quantizes its input".into()));
        }
        if g.n_nodes() != self.z.len() {
            return Err(Error::Shape {
                expected: format!("{} nodes", self.z.len()),
                got: g.n_nodes().to_string(),
            });
        }
        let gap = self.gap(g);
        let mut grad = g.zeros_like();
        for ((i, j), v) in pairs(g.n_nodes()).zip(grad.edges_mut()) {
            *v = -2.0 * gap * self.coefficient(i, j);
        }
        Ok((-gap * gap, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::stats::fixtures::from_edges;
    use crate::rng::seeded;

    fn halves(n: usize) -> SensitiveAttributes {
        SensitiveAttributes::new((0..n).map(|i| u8::from(i >= n / 2)).collect()).unwrap()
    }

    #[test]
    fn complete_bipartite_across_groups_is_maximally_unfair() {
        let z = halves(6);
        let edges: Vec<_> = (0..3).flat_map(|i| (3..6).map(move |j| (i, j))).collect();
        let (dp, node) = fairness_metrics(&from_edges(6, &edges), &z).unwrap();
        assert_eq!(dp, 1.0);
        assert_eq!(node, 1.0);
    }

    #[test]
    fn empty_graph_is_fair() {
        let z = halves(6);
        assert_eq!(fairness_metrics(&GraphState::zeros(6, 0), &z).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn disjoint_group_cliques() {
        let z = halves(6);
        let g = from_edges(6, &[(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)]);
        assert_eq!(fairness_metrics(&g, &z).unwrap().0, 1.0);
    }

    #[test]
    fn empty_group_is_undefined() {
        let z = SensitiveAttributes::new(vec![0; 5]).unwrap();
        assert!(matches!(
            fairness_metrics(&GraphState::zeros(5, 0), &z),
            Err(Error::UndefinedMetric(_))
        ));
        assert!(FairnessReward::new(z).is_err());
    }

    #[test]
    fn metrics_are_invariant_to_group_relabeling() {
        let mut rng = seeded(1);
        for _ in 0..20 {
            let z = SensitiveAttributes::random(9, &mut rng).unwrap();
            let mut g = GraphState::zeros(9, 0);
            for v in g.edges_mut() {
                *v = f64::from(rng.random_bool(0.4));
            }
            assert_eq!(
                fairness_metrics(&g, &z).unwrap(),
                fairness_metrics(&g, &z.flipped()).unwrap()
            );
        }
    }

    #[test]
    fn balanced_continuous_graph_has_zero_surrogate() {
        let z = halves(6);
        let mut g = GraphState::zeros(6, 0);
        for v in g.edges_mut() {
            *v = 0.3;
        }
        let r = FairnessReward::new(z).unwrap();
        assert!(r.eval(&g).abs() < 1e-15);
    }

    #[test]
    fn raising_a_cross_entry_helps_a_same_dense_graph() {
        let z = halves(6);
        let g = from_edges(6, &[(0, 1), (0, 2), (1, 2), (3, 4)]);
        let r = FairnessReward::new(z).unwrap();
        let grad = r.grad(&g).unwrap();
        let cross = crate::state::pair_index(6, 0, 4);
        assert!(grad.edges()[cross] > 0.0);
        let mut g2 = g.clone();
        g2.set_adj(0, 4, 0.5);
        assert!(r.eval(&g2) > r.eval(&g));
    }
}

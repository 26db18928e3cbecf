//! Partially observed adjacency matrices for link prediction.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::rewards::Reward;
use super::stats;
use crate::error::{Error, Result};
use crate::state::{pair_count, GraphState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationMode {
    /// Every observed entry, edges and non-edges.
    #[default]
    AllEntries,
    /// Only observed entries whose value is 1.
    EdgesOnly,
}

/// Observed entries of a symmetric {0,1} adjacency, stored per unordered pair
/// so the mask is symmetric with a false diagonal by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationMask {
    n: usize,
    mask: Vec<bool>,
    values: Vec<f64>,
}

impl ObservationMask {
    pub fn new(n: usize, mask: Vec<bool>, values: Vec<f64>) -> Result<Self> {
        let p = pair_count(n);
        if mask.len() != p || values.len() != p {
            return Err(Error::Shape {
                expected: format!("{p} pair entries"),
                got: format!("mask {}, values {}", mask.len(), values.len()),
            });
        }
        if values.iter().zip(&mask).any(|(&v, &m)| m && v != 0.0 && v != 1.0) {
            return Err(Error::Config("observed values must be 0 or 1".into()));
        }
        Ok(Self { n, mask, values })
    }

    /// Observe a random `fraction` of all node pairs of `g` (edges and non-edges).
    pub fn sample_entries<R: Rng + ?Sized>(g: &GraphState, fraction: f64, rng: &mut R) -> Result<Self> {
        let idx: Vec<usize> = (0..g.edges().len()).collect();
        Self::sample_from(g, idx, fraction, rng)
    }

    /// Observe a random `fraction` of the existing edges of `g`.
    pub fn sample_edges<R: Rng + ?Sized>(g: &GraphState, fraction: f64, rng: &mut R) -> Result<Self> {
        let idx: Vec<usize> = (0..g.edges().len()).filter(|&k| g.edges()[k] > 0.5).collect();
        Self::sample_from(g, idx, fraction, rng)
    }

    fn sample_from<R: Rng + ?Sized>(
        g: &GraphState,
        mut candidates: Vec<usize>,
        fraction: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::Config(format!(
                "observed fraction must lie in [0,1], got {fraction}"
            )));
        }
        let q = stats::quantize(g, 0.5);
        candidates.shuffle(rng);
        let take = (fraction * candidates.len() as f64).round() as usize;
        let mut mask = vec![false; q.edges().len()];
        for &k in &candidates[..take] {
            mask[k] = true;
        }
        Ok(Self {
            n: g.n_nodes(),
            mask,
            values: q.edges().to_vec(),
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Observed pair indices under `mode`.
    pub fn observed(&self, mode: ObservationMode) -> impl Iterator<Item = usize> + '_ {
        (0..self.mask.len())
            .filter(move |&k| self.mask[k] && (mode == ObservationMode::AllEntries || self.values[k] == 1.0))
    }

    pub fn observed_count(&self, mode: ObservationMode) -> usize {
        self.observed(mode).count()
    }
}

/// `-sum_{observed (i,j), both orders} (A_ij - v_ij)^2`.
#[derive(Debug, Clone)]
pub struct LinkObservationReward {
    obs: ObservationMask,
    mode: ObservationMode,
    quantized: bool,
    observed: Vec<usize>,
}

impl LinkObservationReward {
    pub fn new(obs: ObservationMask, mode: ObservationMode, quantized: bool) -> Self {
        let observed: Vec<usize> = obs.observed(mode).collect();
        if observed.is_empty() {
            log::warn!("link-observation mask observes no entries; the reward is constant 0");
        }
        Self {
            obs,
            mode,
            quantized,
            observed,
        }
    }

    pub fn mode(&self) -> ObservationMode {
        self.mode
    }

    fn loss(&self, a: &GraphState) -> f64 {
        let e = a.edges();
        2.0 * self
            .observed
            .iter()
            .map(|&k| (e[k] - self.obs.values[k]).powi(2))
            .sum::<f64>()
    }
}

impl Reward for LinkObservationReward {
    fn name(&self) -> &str {
        match (self.mode, self.quantized) {
            (ObservationMode::AllEntries, false) => "link_observation",
            (ObservationMode::EdgesOnly, false) => "link_observation_edges",
            (ObservationMode::AllEntries, true) => "link_observation_exact",
            (ObservationMode::EdgesOnly, true) => "link_observation_edges_exact",
        }
    }

    fn eval(&self, g: &GraphState) -> f64 {
        if self.quantized {
            -self.loss(&stats::quantize(g, 0.5))
        } else {
            -self.loss(g)
        }
    }

    fn differentiable(&self) -> bool {
        !self.quantized
    }

    fn value_and_grad(&self, g: &GraphState) -> Result<(f64, GraphState)> {
        if self.quantized {
            return Err(Error::Unsupported(
                "exact link-observation reward quantizes its input".into(),
            ));
        }
        if g.n_nodes() != self.obs.n {
            return Err(Error::Shape {
                expected: format!("{} nodes", self.obs.n),
                got: g.n_nodes().to_string(),
            });
        }
        let mut grad = g.zeros_like();
        let e = g.edges();
        let ge = grad.edges_mut();
        for &k in &self.observed {
            ge[k] = -4.0 * (e[k] - self.obs.values[k]);
        }
        Ok((self.eval(g), grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::stats::fixtures::*;
    use crate::rng::seeded;

    #[test]
    fn matching_graph_scores_zero_and_a_missing_edge_costs_two() {
        let g = complete(4);
        let obs = ObservationMask::sample_entries(&g, 1.0, &mut seeded(0)).unwrap();
        let r = LinkObservationReward::new(obs.clone(), ObservationMode::AllEntries, false);
        assert_eq!(r.eval(&g), 0.0);

        let mut single = vec![false; 6];
        single[0] = true;
        let one = ObservationMask::new(4, single, g.edges().to_vec()).unwrap();
        let r = LinkObservationReward::new(one, ObservationMode::AllEntries, false);
        let mut missing = g.clone();
        missing.set_adj(0, 1, 0.0);
        assert_eq!(r.eval(&missing), -2.0);
    }

    #[test]
    fn edges_only_ignores_observed_non_edges() {
        let g = star(5);
        let obs = ObservationMask::sample_entries(&g, 1.0, &mut seeded(1)).unwrap();
        assert_eq!(obs.observed_count(ObservationMode::AllEntries), 10);
        assert_eq!(obs.observed_count(ObservationMode::EdgesOnly), 4);
        let r = LinkObservationReward::new(obs, ObservationMode::EdgesOnly, false);
        assert_eq!(r.eval(&complete(5)), 0.0);
    }

    #[test]
    fn sample_edges_observes_only_existing_edges() {
        let g = complete(6);
        let obs = ObservationMask::sample_edges(&g, 0.5, &mut seeded(4)).unwrap();
        assert_eq!(obs.observed_count(ObservationMode::AllEntries), 8);
        assert!(obs
            .observed(ObservationMode::AllEntries)
            .all(|k| obs.values()[k] == 1.0));
    }

    #[test]
    fn empty_mask_is_constant_zero() {
        let obs = ObservationMask::new(3, vec![false; 3], vec![0.0; 3]).unwrap();
        let r = LinkObservationReward::new(obs, ObservationMode::AllEntries, false);
        assert_eq!(r.eval(&complete(3)), 0.0);
    }
}

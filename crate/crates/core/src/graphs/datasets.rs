//! Synthetic graph families used as reference datasets for empirical priors.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::fairness::SensitiveAttributes;
use super::stats;
use crate::error::{Error, Result};
use crate::state::{pairs, GraphState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetFamily {
    /// Two planted blocks of `n_per_block` nodes: nodes `0..n_per_block` form
    /// block 0, the rest block 1.
    Sbm2 {
        n_per_block: usize,
        p_in: f64,
        p_out: f64,
    },
    /// Node 0 is a hub adjacent to every other node; the remaining nodes form
    /// an Erdos-Renyi graph with edge probability `p`.
    EgoEr {
        n: usize,
        p: f64,
    },
    Er {
        n: usize,
        p: f64,
    },
}

impl DatasetFamily {
    pub fn n_nodes(&self) -> usize {
        match *self {
            DatasetFamily::Sbm2 { n_per_block, .. } => 2 * n_per_block,
            DatasetFamily::EgoEr { n, .. } | DatasetFamily::Er { n, .. } => n,
        }
    }

    fn validate(&self) -> Result<()> {
        let probs: &[f64] = match self {
            DatasetFamily::Sbm2 { p_in, p_out, .. } => &[*p_in, *p_out],
            DatasetFamily::EgoEr { p, .. } | DatasetFamily::Er { p, .. } => &[*p],
        };
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Config(format!("edge probability {p} is outside [0, 1]")));
        }
        if self.n_nodes() == 0 {
            return Err(Error::Config("graphs need at least one node".into()));
        }
        Ok(())
    }

    /// Community labels of the planted blocks (SBM only).
    pub fn block_labels(&self) -> Option<SensitiveAttributes> {
        match *self {
            DatasetFamily::Sbm2 { n_per_block, .. } => Some(
                SensitiveAttributes::new((0..2 * n_per_block).map(|i| u8::from(i >= n_per_block)).collect())
                    .expect("labels are 0/1"),
            ),
            _ => None,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n_features: usize, rng: &mut R) -> GraphState {
        let n = self.n_nodes();
        let mut g = GraphState::zeros(n, n_features);
        for ((i, j), v) in pairs(n).zip(g.edges_mut()) {
            let p = match *self {
                DatasetFamily::Sbm2 {
                    n_per_block,
                    p_in,
                    p_out,
                } => {
                    if (i < n_per_block) == (j < n_per_block) {
                        p_in
                    } else {
                        p_out
                    }
                }
                DatasetFamily::EgoEr { p, .. } => {
                    if i == 0 {
                        1.0
                    } else {
                        p
                    }
                }
                DatasetFamily::Er { p, .. } => p,
            };
            *v = f64::from(u8::from(rng.random_bool(p)));
        }
        set_degree_features(&mut g);
        g
    }
}

/// One-hot degree buckets: node `i` gets a 1 in column `min(deg_i, F - 1)`.
pub fn set_degree_features(g: &mut GraphState) {
    let f = g.n_features();
    if f == 0 {
        return;
    }
    let deg = g.degrees();
    let x = g.features_mut();
    x.fill(0.0);
    for (i, d) in deg.into_iter().enumerate() {
        let bucket = (d.round().max(0.0) as usize).min(f - 1);
        x[i * f + bucket] = 1.0;
    }
}

pub fn generate_dataset<R: Rng + ?Sized>(
    family: &DatasetFamily,
    n_features: usize,
    count: usize,
    rng: &mut R,
) -> Result<Vec<GraphState>> {
    family.validate()?;
    if count == 0 {
        return Err(Error::Config("dataset count must be at least 1".into()));
    }
    Ok((0..count).map(|_| family.sample(n_features, rng)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatKind {
    EdgeCount,
    TriangleCount,
    MaxDegree,
}

impl StatKind {
    pub fn of(self, a: &GraphState) -> f64 {
        match self {
            StatKind::EdgeCount => stats::edge_count(a),
            StatKind::TriangleCount => stats::triangle_count(a),
            StatKind::MaxDegree => stats::max_degree(a),
        }
    }
}

/// Lower-tail empirical quantile of a statistic with linear interpolation
/// between order statistics (position `p/100 * (n-1)`).
pub fn percentile_bound(dataset: &[GraphState], stat: StatKind, percentile: f64) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::Usage("percentile of an empty dataset".into()));
    }
    if !(0.0..=100.0).contains(&percentile) {
        return Err(Error::Config(format!(
            "percentile must lie in [0, 100], got {percentile}"
        )));
    }
    let mut values: Vec<f64> = dataset.iter().map(|g| stat.of(&stats::quantize(g, 0.5))).collect();
    values.sort_by(f64::total_cmp);
    let pos = percentile / 100.0 * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(values[lo] + (values[hi] - values[lo]) * (pos - lo as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::validity::is_valid_egonet;
    use crate::rng::seeded;

    #[test]
    fn ego_graphs_are_always_valid_egonets() {
        let mut rng = seeded(2);
        let data = generate_dataset(&DatasetFamily::EgoEr { n: 8, p: 0.3 }, 3, 200, &mut rng).unwrap();
        assert!(data.iter().all(is_valid_egonet));
    }

    #[test]
    fn sbm_without_cross_edges_splits_in_two() {
        let mut rng = seeded(3);
        let fam = DatasetFamily::Sbm2 {
            n_per_block: 5,
            p_in: 1.0,
            p_out: 0.0,
        };
        for g in generate_dataset(&fam, 0, 20, &mut rng).unwrap() {
            for (i, j) in pairs(10) {
                assert_eq!(g.adj(i, j) == 1.0, (i < 5) == (j < 5));
            }
        }
    }

    #[test]
    fn degree_features_are_one_hot() {
        let mut rng = seeded(4);
        let g = DatasetFamily::Er { n: 7, p: 0.5 }.sample(3, &mut rng);
        let deg = g.degrees();
        for i in 0..7 {
            let row = &g.features()[i * 3..i * 3 + 3];
            assert_eq!(row.iter().sum::<f64>(), 1.0);
            assert_eq!(row[(deg[i] as usize).min(2)], 1.0);
        }
    }

    #[test]
    fn rejects_invalid_parameters() {
        let mut rng = seeded(0);
        assert!(generate_dataset(&DatasetFamily::Er { n: 4, p: 1.5 }, 0, 1, &mut rng).is_err());
        assert!(generate_dataset(&DatasetFamily::Er { n: 4, p: 0.5 }, 0, 0, &mut rng).is_err());
    }

    #[test]
    fn percentile_edge_cases() {
        let mut rng = seeded(5);
        let g = DatasetFamily::Er { n: 6, p: 0.5 }.sample(0, &mut rng);
        let same = vec![g.clone(); 7];
        assert_eq!(
            percentile_bound(&same, StatKind::EdgeCount, 10.0).unwrap(),
            stats::edge_count(&g)
        );
        let data = generate_dataset(&DatasetFamily::Er { n: 6, p: 0.5 }, 0, 30, &mut rng).unwrap();
        let max = data.iter().map(stats::max_degree).fold(0.0, f64::max);
        assert_eq!(percentile_bound(&data, StatKind::MaxDegree, 100.0).unwrap(), max);
        assert!(percentile_bound(&[], StatKind::EdgeCount, 10.0).is_err());
    }
}

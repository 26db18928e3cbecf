//! Experiment-level evaluation of generated graph sets.
//!
//! Distributional distances use the squared MMD between per-graph histograms
//! (degree, clustering coefficient) under the kernel
//! `exp(-TV(x, y)^2 / 2)`, as a biased V-statistic. Uniqueness uses a 1-WL
//! color-refinement hash, which can merge non-isomorphic graphs.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graphs::fairness::{fairness_metrics, SensitiveAttributes};
use crate::graphs::observation::{ObservationMask, ObservationMode};
use crate::graphs::rewards::{ConstraintAux, ConstraintKind, ConstraintSpec};
use crate::graphs::{stats, validity};
use crate::state::{pairs, GraphState};

pub const KERNEL_SIGMA: f64 = 1.0;
pub const CLUSTERING_BINS: usize = 100;
pub const WL_ROUNDS: usize = 3;

fn quantized(samples: &[GraphState]) -> Vec<GraphState> {
    samples.iter().map(|g| stats::quantize(g, 0.5)).collect()
}

fn nonempty(samples: &[GraphState], what: &str) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::Usage(format!("{what} set is empty")));
    }
    Ok(())
}

/// Whether a {0,1} graph satisfies the hard form of `spec`.
pub fn satisfies(a: &GraphState, spec: &ConstraintSpec) -> Result<bool> {
    Ok(match (&spec.kind, &spec.aux) {
        (ConstraintKind::EdgeCount, _) => stats::edge_count(a) <= spec.bound,
        (ConstraintKind::TriangleCount, _) => stats::triangle_count(a) <= spec.bound,
        (ConstraintKind::MaxDegree, _) => stats::max_degree(a) <= spec.bound,
        (ConstraintKind::ForceStar, _) => validity::is_star(a),
        (ConstraintKind::Fairness, ConstraintAux::Fairness(z)) => fairness_metrics(a, z)?.0 <= spec.bound,
        (ConstraintKind::LinkObservation, ConstraintAux::Link { obs, mode }) => {
            obs.observed(*mode).all(|k| a.edges()[k] == obs.values()[k])
        }
        _ => {
            return Err(Error::Config(format!(
                "{:?} constraint is missing its payload",
                spec.kind
            )))
        }
    })
}

/// Fraction of samples (quantized at 0.5) that satisfy the constraint.
pub fn val_c(samples: &[GraphState], spec: &ConstraintSpec) -> Result<f64> {
    nonempty(samples, "sample")?;
    let mut ok = 0usize;
    for a in quantized(samples) {
        ok += usize::from(satisfies(&a, spec)?);
    }
    Ok(ok as f64 / samples.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistStat {
    DegreeHist,
    ClusteringHist,
}

impl HistStat {
    pub const ALL: [HistStat; 2] = [HistStat::DegreeHist, HistStat::ClusteringHist];

    pub fn name(self) -> &'static str {
        match self {
            HistStat::DegreeHist => "degree",
            HistStat::ClusteringHist => "clustering",
        }
    }
}

/// Normalized histogram of a {0,1} graph's statistic. Degree histograms have
/// one bin per degree value; clustering histograms [`CLUSTERING_BINS`] bins on
/// [0, 1].
pub fn histogram(a: &GraphState, stat: HistStat) -> Vec<f64> {
    let n = a.n_nodes();
    let mut h = match stat {
        HistStat::DegreeHist => {
            let mut h = vec![0.0; n.max(1)];
            for d in a.degrees() {
                h[(d.round() as usize).min(n.max(1) - 1)] += 1.0;
            }
            h
        }
        HistStat::ClusteringHist => {
            let mut h = vec![0.0; CLUSTERING_BINS];
            for c in stats::clustering_coefficients(a) {
                h[((c * CLUSTERING_BINS as f64) as usize).min(CLUSTERING_BINS - 1)] += 1.0;
            }
            h
        }
    };
    if n > 0 {
        h.iter_mut().for_each(|v| *v /= n as f64);
    }
    h
}

fn total_variation(x: &[f64], y: &[f64]) -> f64 {
    let len = x.len().max(y.len());
    let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    0.5 * (0..len).map(|i| (at(x, i) - at(y, i)).abs()).sum::<f64>()
}

fn kernel(x: &[f64], y: &[f64]) -> f64 {
    let tv = total_variation(x, y);
    (-tv * tv / (2.0 * KERNEL_SIGMA * KERNEL_SIGMA)).exp()
}

/// Mean kernel value over all pairs, summed in sorted order so the result does
/// not depend on which set comes first.
fn mean_kernel(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut values: Vec<f64> = a.iter().flat_map(|x| b.iter().map(move |y| kernel(x, y))).collect();
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

/// Squared MMD between two graph sets under `stat`. Clamped at 0 against
/// rounding.
pub fn mmd(set_a: &[GraphState], set_b: &[GraphState], stat: HistStat) -> Result<f64> {
    nonempty(set_a, "first")?;
    nonempty(set_b, "second")?;
    let ha: Vec<Vec<f64>> = quantized(set_a).iter().map(|g| histogram(g, stat)).collect();
    let hb: Vec<Vec<f64>> = quantized(set_b).iter().map(|g| histogram(g, stat)).collect();
    let value = (mean_kernel(&ha, &ha) + mean_kernel(&hb, &hb)) - 2.0 * mean_kernel(&ha, &hb);
    Ok(value.max(0.0))
}

/// `mmd(reference, unconstrained) - mmd(reference, constrained)`.
pub fn delta_mmd(
    reference: &[GraphState],
    unconstrained: &[GraphState],
    constrained: &[GraphState],
    stat: HistStat,
) -> Result<f64> {
    Ok(mmd(reference, unconstrained, stat)? - mmd(reference, constrained, stat)?)
}

/// Per-statistic MMD differences and their mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaMmd {
    pub by_stat: BTreeMap<String, f64>,
    pub mean: f64,
}

pub fn delta_mmd_all(
    reference: &[GraphState],
    unconstrained: &[GraphState],
    constrained: &[GraphState],
) -> Result<DeltaMmd> {
    let mut by_stat = BTreeMap::new();
    for stat in HistStat::ALL {
        by_stat.insert(
            stat.name().to_string(),
            delta_mmd(reference, unconstrained, constrained, stat)?,
        );
    }
    let mean = by_stat.values().sum::<f64>() / by_stat.len() as f64;
    Ok(DeltaMmd { by_stat, mean })
}

/// Mean over samples of the fraction of observed entries reproduced.
pub fn observation_accuracy(samples: &[GraphState], obs: &ObservationMask, mode: ObservationMode) -> Result<f64> {
    nonempty(samples, "sample")?;
    let observed: Vec<usize> = obs.observed(mode).collect();
    if observed.is_empty() {
        return Err(Error::DegenerateConstraint(
            "the observation mask covers no entries".into(),
        ));
    }
    let mut total = 0.0;
    for a in quantized(samples) {
        if a.n_nodes() != obs.n_nodes() {
            return Err(Error::Shape {
                expected: format!("{} nodes", obs.n_nodes()),
                got: a.n_nodes().to_string(),
            });
        }
        let hits = observed.iter().filter(|&&k| a.edges()[k] == obs.values()[k]).count();
        total += hits as f64 / observed.len() as f64;
    }
    Ok(total / samples.len() as f64)
}

/// Permutation-invariant digest of a {0,1} graph's adjacency by 1-WL color
/// refinement: initial colors are degrees, refined [`WL_ROUNDS`] times.
pub fn wl_hash(a: &GraphState) -> String {
    let n = a.n_nodes();
    let mut neighbors = vec![Vec::new(); n];
    for ((i, j), &v) in pairs(n).zip(a.edges()) {
        if v > 0.5 {
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
    }
    let mut colors: Vec<[u8; 32]> = neighbors
        .iter()
        .map(|nb| Sha256::digest(nb.len().to_le_bytes()).into())
        .collect();
    for _ in 0..WL_ROUNDS {
        colors = (0..n)
            .map(|i| {
                let mut nb: Vec<&[u8; 32]> = neighbors[i].iter().map(|&j| &colors[j]).collect();
                nb.sort();
                let mut h = Sha256::new();
                h.update(colors[i]);
                for c in nb {
                    h.update(c);
                }
                h.finalize().into()
            })
            .collect();
    }
    colors.sort();
    let mut h = Sha256::new();
    h.update(n.to_le_bytes());
    for c in &colors {
        h.update(c);
    }
    hex::encode(h.finalize())
}

/// Fraction of samples whose WL hash is absent from the reference set.
pub fn pct_unique(samples: &[GraphState], reference: &[GraphState]) -> Result<f64> {
    nonempty(samples, "sample")?;
    let known: HashSet<String> = reference.iter().map(wl_hash).collect();
    let novel = samples.iter().filter(|g| !known.contains(&wl_hash(g))).count();
    Ok(novel as f64 / samples.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Population standard deviation.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessSummary {
    pub delta_dp: MeanStd,
    pub delta_dp_node: MeanStd,
}

pub fn fairness_summary(samples: &[GraphState], z: &SensitiveAttributes) -> Result<FairnessSummary> {
    nonempty(samples, "sample")?;
    let mut dp = Vec::with_capacity(samples.len());
    let mut node = Vec::with_capacity(samples.len());
    for a in quantized(samples) {
        let (d, dn) = fairness_metrics(&a, z)?;
        dp.push(d);
        node.push(dn);
    }
    Ok(FairnessSummary {
        delta_dp: MeanStd::of(&dp),
        delta_dp_node: MeanStd::of(&node),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_samples: usize,
    pub val_c: f64,
    /// Mean over statistics; present when a reference and an unconstrained
    /// set were supplied.
    pub delta_mmd: Option<f64>,
    pub delta_mmd_by_stat: BTreeMap<String, f64>,
    pub accuracy: Option<f64>,
    /// Present when a reference set was supplied.
    pub pct_unique: Option<f64>,
    pub fairness_summary: Option<FairnessSummary>,
    pub aux_counts: BTreeMap<String, f64>,
}

/// Inputs to [`evaluate`] beyond the samples and the constraint.
#[derive(Debug, Clone, Copy, Default)]
pub struct EvalContext<'a> {
    pub reference: Option<&'a [GraphState]>,
    pub unconstrained: Option<&'a [GraphState]>,
    /// Community labels for the SBM validity fraction.
    pub communities: Option<&'a SensitiveAttributes>,
}

pub fn evaluate(samples: &[GraphState], spec: &ConstraintSpec, ctx: EvalContext<'_>) -> Result<EvalReport> {
    nonempty(samples, "sample")?;
    spec.validate()?;
    let q = quantized(samples);
    let count = q.len() as f64;

    let (delta_mmd, delta_mmd_by_stat) = match (ctx.reference, ctx.unconstrained) {
        (Some(r), Some(u)) => {
            let d = delta_mmd_all(r, u, &q)?;
            (Some(d.mean), d.by_stat)
        }
        _ => (None, BTreeMap::new()),
    };
    let accuracy = match &spec.aux {
        ConstraintAux::Link { obs, mode } => Some(observation_accuracy(&q, obs, *mode)?),
        _ => None,
    };
    let fairness = match &spec.aux {
        ConstraintAux::Fairness(z) => Some(fairness_summary(&q, z)?),
        _ => None,
    };

    let mut aux = BTreeMap::new();
    let stars = q.iter().filter(|a| validity::is_star(a)).count() as f64;
    let egonets = q.iter().filter(|a| validity::is_valid_egonet(a)).count() as f64;
    aux.insert("pct_stars".to_string(), stars / count);
    aux.insert("pct_valid_egonets".to_string(), egonets / count);
    let over: Vec<f64> = q.iter().map(stats::edges_over_star).collect();
    let over = MeanStd::of(&over);
    aux.insert("edges_over_star_mean".to_string(), over.mean);
    aux.insert("edges_over_star_std".to_string(), over.std);
    if let Some(z) = ctx.communities {
        let mut valid = 0usize;
        for a in &q {
            valid += usize::from(validity::sbm_valid(a, z)?);
        }
        aux.insert("pct_valid_sbm".to_string(), valid as f64 / count);
    }

    Ok(EvalReport {
        n_samples: q.len(),
        val_c: val_c(&q, spec)?,
        delta_mmd,
        delta_mmd_by_stat,
        accuracy,
        pct_unique: ctx.reference.map(|r| pct_unique(&q, r)).transpose()?,
        fairness_summary: fairness,
        aux_counts: aux,
    })
}

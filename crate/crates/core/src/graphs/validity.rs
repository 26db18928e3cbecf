//! Structural validity predicates on {0,1} graphs.

use serde::{Deserialize, Serialize};

use super::fairness::SensitiveAttributes;
use super::stats;
use crate::error::{Error, Result};
use crate::state::{pairs, GraphState};

/// Ratio by which intra-community density must exceed inter-community density.
pub const SBM_DENSITY_RATIO: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityRecord {
    pub is_star: bool,
    pub is_valid_egonet: bool,
    /// Present only when community labels were supplied.
    pub sbm_valid: Option<bool>,
}

impl ValidityRecord {
    pub fn sbm_valid(&self) -> Result<bool> {
        self.sbm_valid
            .ok_or_else(|| Error::Usage("SBM validity needs community labels".into()))
    }
}

/// One node, or connected with `n - 1` edges that all share an endpoint.
pub fn is_star(a: &GraphState) -> bool {
    let n = a.n_nodes();
    if n <= 1 {
        return true;
    }
    stats::undirected_edges(a) == n - 1 && universal_node(a).is_some()
}

fn universal_node(a: &GraphState) -> Option<usize> {
    let n = a.n_nodes();
    let mut deg = vec![0usize; n];
    for ((i, j), &v) in pairs(n).zip(a.edges()) {
        if v != 0.0 {
            deg[i] += 1;
            deg[j] += 1;
        }
    }
    deg.iter().position(|&d| d == n - 1)
}

/// One node, or some node adjacent to all others.
pub fn is_valid_egonet(a: &GraphState) -> bool {
    a.n_nodes() <= 1 || universal_node(a).is_some()
}

/// Estimated intra-community density at least [`SBM_DENSITY_RATIO`] times the
/// inter-community density, with `labels` giving each node's community.
pub fn sbm_valid(a: &GraphState, labels: &SensitiveAttributes) -> Result<bool> {
    labels.check_defined(a.n_nodes())?;
    let (intra_pairs, inter_pairs) = labels.pair_counts();
    let z = labels.as_slice();
    let (mut intra, mut inter) = (0.0, 0.0);
    for ((i, j), &v) in pairs(a.n_nodes()).zip(a.edges()) {
        if z[i] == z[j] {
            intra += v;
        } else {
            inter += v;
        }
    }
    Ok(intra / intra_pairs as f64 >= SBM_DENSITY_RATIO * (inter / inter_pairs as f64))
}

pub fn validity_checks(a: &GraphState, labels: Option<&SensitiveAttributes>) -> Result<ValidityRecord> {
    Ok(ValidityRecord {
        is_star: is_star(a),
        is_valid_egonet: is_valid_egonet(a),
        sbm_valid: labels.map(|z| sbm_valid(a, z)).transpose()?,
    })
}

//! Structural statistics on (possibly continuous) adjacency blocks.
//!
//! Counts follow the matrix conventions used for constraint bounds:
//! `1^T A 1` counts each undirected edge twice and `tr(A^3)` counts each
//! triangle six times.

use crate::state::{pairs, GraphState};

/// `1^T A 1`
pub fn edge_count(g: &GraphState) -> f64 {
    2.0 * g.edges().iter().sum::<f64>()
}

pub(crate) fn matmul(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

/// Dense `A^2`.
pub fn adjacency_squared(g: &GraphState) -> Vec<f64> {
    let a = g.dense_adjacency();
    matmul(g.n_nodes(), &a, &a)
}

/// `tr(A^3) = sum_ij (A^2)_ij A_ji`
pub fn triangle_count(g: &GraphState) -> f64 {
    let n = g.n_nodes();
    let a = g.dense_adjacency();
    let a2 = matmul(n, &a, &a);
    a2.iter().zip(&a).map(|(x, y)| x * y).sum()
}

/// Largest row sum.
pub fn max_degree(g: &GraphState) -> f64 {
    g.degrees().into_iter().fold(0.0, f64::max)
}

/// Log-sum-exp soft maximum of the degrees at temperature `tau`, and the
/// soft-argmax weights (its gradient with respect to each degree).
pub fn soft_max_degree(g: &GraphState, tau: f64) -> (f64, Vec<f64>) {
    let deg = g.degrees();
    if deg.is_empty() {
        return (0.0, Vec::new());
    }
    let max = deg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = deg.iter().map(|d| (tau * (d - max)).exp()).collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    (max + total.ln() / tau, w)
}

/// Entrywise `1(A_ij > threshold)` on the adjacency; features pass through.
pub fn quantize(g: &GraphState, threshold: f64) -> GraphState {
    let mut out = g.clone();
    for v in out.edges_mut() {
        *v = if *v > threshold { 1.0 } else { 0.0 };
    }
    out
}

/// Number of undirected edges of a {0,1} graph.
pub fn undirected_edges(g: &GraphState) -> usize {
    g.edges().iter().filter(|&&v| v != 0.0).count()
}

/// Node with the largest degree, lowest index on ties.
pub fn hub(g: &GraphState) -> Option<usize> {
    let deg = g.degrees();
    let mut best: Option<(usize, f64)> = None;
    for (i, d) in deg.into_iter().enumerate() {
        if best.is_none_or(|(_, bd)| d > bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
}

/// Edges not incident to the hub (surplus over the best-matching star).
pub fn edges_over_star(g: &GraphState) -> f64 {
    let Some(c) = hub(g) else { return 0.0 };
    pairs(g.n_nodes())
        .zip(g.edges())
        .filter(|((i, j), &v)| v != 0.0 && *i != c && *j != c)
        .count() as f64
}

/// Local clustering coefficient of every node of a {0,1} graph.
pub fn clustering_coefficients(g: &GraphState) -> Vec<f64> {
    let n = g.n_nodes();
    let a = g.dense_adjacency();
    let a2 = matmul(n, &a, &a);
    let deg = g.degrees();
    (0..n)
        .map(|i| {
            let k = deg[i];
            if k < 2.0 {
                return 0.0;
            }
            // (A^3)_ii = 2 * triangles through i
            let closed: f64 = (0..n).map(|j| a2[i * n + j] * a[j * n + i]).sum();
            closed / (k * (k - 1.0))
        })
        .collect()
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;

    fn brute_triangles(g: &GraphState) -> usize {
        let n = g.n_nodes();
        let mut count = 0;
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    if g.adj(i, j) != 0.0 && g.adj(j, k) != 0.0 && g.adj(i, k) != 0.0 {
                        count += 1;
                    }
                }
            }
        }
        count
    }

    #[test]
    fn edge_counts() {
        assert_eq!(edge_count(&complete(3)), 6.0);
        assert_eq!(edge_count(&GraphState::zeros(5, 0)), 0.0);
        assert_eq!(edge_count(&star(5)), 8.0);
    }

    #[test]
    fn triangle_counts() {
        assert_eq!(triangle_count(&complete(3)), 6.0);
        assert_eq!(triangle_count(&cycle(4)), 0.0);
        let k4 = complete(4);
        assert_eq!(brute_triangles(&k4), 4);
        assert_eq!(triangle_count(&k4), 24.0);
    }

    #[test]
    fn max_degrees() {
        assert_eq!(max_degree(&star(5)), 4.0);
        assert_eq!(max_degree(&GraphState::zeros(4, 0)), 0.0);
        assert_eq!(max_degree(&complete(4)), 3.0);
    }

    #[test]
    fn quantize_boundaries() {
        let mut g = GraphState::zeros(4, 0);
        for v in g.edges_mut() {
            *v = 0.6;
        }
        assert!(quantize(&g, 0.5).edges().iter().all(|&v| v == 1.0));
        for v in g.edges_mut() {
            *v = 0.4;
        }
        assert!(quantize(&g, 0.5).edges().iter().all(|&v| v == 0.0));
        for v in g.edges_mut() {
            *v = 0.5;
        }
        assert!(quantize(&g, 0.5).edges().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn soft_max_degree_bounds_hard_max() {
        let g = star(6);
        let (s, w) = soft_max_degree(&g, 10.0);
        assert!(s >= 5.0 && s <= 5.0 + (6f64).ln() / 10.0);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w[0] > 0.99);
    }

    #[test]
    fn clustering_of_complete_and_star() {
        assert!(clustering_coefficients(&complete(5))
            .iter()
            .all(|&c| (c - 1.0).abs() < 1e-12));
        assert!(clustering_coefficients(&star(5)).iter().all(|&c| c == 0.0));
    }

    #[test]
    fn edges_over_star_counts_surplus_only() {
        assert_eq!(edges_over_star(&star(5)), 0.0);
        assert_eq!(edges_over_star(&complete(3)), 1.0);
        assert_eq!(edges_over_star(&complete(4)), 3.0);
    }

    fn arb_graph() -> impl Strategy<Value = GraphState> {
        (1usize..=12).prop_flat_map(|n| {
            proptest::collection::vec(any::<bool>(), crate::state::pair_count(n)).prop_map(move |bits| {
                let mut g = GraphState::zeros(n, 0);
                for (v, b) in g.edges_mut().iter_mut().zip(bits) {
                    *v = if b { 1.0 } else { 0.0 };
                }
                g
            })
        })
    }

    proptest! {
        #[test]
        fn trace_formula_counts_each_triangle_six_times(g in arb_graph()) {
            prop_assert_eq!(triangle_count(&g), 6.0 * brute_triangles(&g) as f64);
        }

        #[test]
        fn quantize_is_idempotent_and_monotone(
            vals in proptest::collection::vec(-1.0f64..2.0, 15),
            lo in 0.0f64..1.0,
            gap in 0.0f64..1.0,
        ) {
            let g = GraphState::from_free(6, 0, vals).unwrap();
            let q = quantize(&g, lo);
            prop_assert_eq!(quantize(&q, lo), q.clone());
            let q_hi = quantize(&g, lo + gap);
            for (h, l) in q_hi.edges().iter().zip(q.edges()) {
                prop_assert!(h <= l);
            }
        }
    }
}

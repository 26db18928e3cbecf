//! The diffused variable: node features plus a symmetric, hollow adjacency.
//!
//! A [`GraphState`] stores only its free coordinates: the `N x F` feature
//! block (row-major) followed by the strict upper triangle of the adjacency
//! (row-major over `i < j`). Symmetry and the zero diagonal therefore hold by
//! construction, and every vector operation (noise, scores, gradients,
//! directions) acts on the same `d = N*F + N(N-1)/2` coordinates.
//!
//! Gradients throughout the crate are taken with respect to these free
//! coordinates. For an off-diagonal pair this is the sum of the two mirrored
//! matrix-entry partials, see [`GraphState::from_matrix_gradient`].

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphState {
    n: usize,
    f: usize,
    data: Vec<f64>,
}

/// Number of unordered node pairs `N(N-1)/2`.
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Index of the pair `(i, j)`, `i < j`, in row-major upper-triangle order.
#[inline]
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// Iterates `(i, j)` with `i < j` in storage order.
pub fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

impl GraphState {
    pub fn zeros(n: usize, f: usize) -> Self {
        Self {
            n,
            f,
            data: vec![0.0; n * f + pair_count(n)],
        }
    }

    /// Builds a state from its free-coordinate vector.
    pub fn from_free(n: usize, f: usize, data: Vec<f64>) -> Result<Self> {
        let expected = n * f + pair_count(n);
        if data.len() != expected {
            return Err(Error::Shape {
                expected: format!("{expected} free coordinates (N={n}, F={f})"),
                got: data.len().to_string(),
            });
        }
        Ok(Self { n, f, data })
    }

    /// Builds a state from a feature block and a dense row-major adjacency.
    /// The adjacency must be exactly symmetric with a zero diagonal.
    pub fn from_dense(n: usize, f: usize, features: &[f64], adjacency: &[f64]) -> Result<Self> {
        if features.len() != n * f {
            return Err(Error::Shape {
                expected: format!("{} feature entries", n * f),
                got: features.len().to_string(),
            });
        }
        if adjacency.len() != n * n {
            return Err(Error::Shape {
                expected: format!("{} adjacency entries", n * n),
                got: adjacency.len().to_string(),
            });
        }
        let mut data = Vec::with_capacity(n * f + pair_count(n));
        data.extend_from_slice(features);
        for i in 0..n {
            if adjacency[i * n + i] != 0.0 {
                return Err(Error::Usage(format!("adjacency diagonal entry ({i},{i}) is nonzero")));
            }
        }
        for (i, j) in pairs(n) {
            let (u, l) = (adjacency[i * n + j], adjacency[j * n + i]);
            if u != l {
                return Err(Error::Usage(format!("adjacency is not symmetric at ({i},{j})")));
            }
            data.push(u);
        }
        Ok(Self { n, f, data })
    }

    /// Converts a gradient expressed per matrix entry (entries treated as
    /// independent) into the free-coordinate gradient: `g_ij = G_ij + G_ji`.
    /// Diagonal entries of `grad_adjacency` are ignored.
    pub fn from_matrix_gradient(n: usize, f: usize, grad_features: &[f64], grad_adjacency: &[f64]) -> Self {
        debug_assert_eq!(grad_features.len(), n * f);
        debug_assert_eq!(grad_adjacency.len(), n * n);
        let mut data = Vec::with_capacity(n * f + pair_count(n));
        data.extend_from_slice(grad_features);
        data.extend(pairs(n).map(|(i, j)| grad_adjacency[i * n + j] + grad_adjacency[j * n + i]));
        Self { n, f, data }
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn n_features(&self) -> usize {
        self.f
    }

    /// Free dimension `d`.
    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn features(&self) -> &[f64] {
        &self.data[..self.n * self.f]
    }

    pub fn features_mut(&mut self) -> &mut [f64] {
        let nf = self.n * self.f;
        &mut self.data[..nf]
    }

    /// Upper-triangle adjacency entries in storage order.
    pub fn edges(&self) -> &[f64] {
        &self.data[self.n * self.f..]
    }

    pub fn edges_mut(&mut self) -> &mut [f64] {
        let nf = self.n * self.f;
        &mut self.data[nf..]
    }

    pub fn adj(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Less => self.edges()[pair_index(self.n, i, j)],
            std::cmp::Ordering::Greater => self.edges()[pair_index(self.n, j, i)],
        }
    }

    /// Sets the undirected entry `(i, j)`; both mirrored entries change.
    pub fn set_adj(&mut self, i: usize, j: usize, value: f64) {
        assert!(i != j, "diagonal adjacency entries are fixed at zero");
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        let idx = pair_index(self.n, lo, hi);
        self.edges_mut()[idx] = value;
    }

    pub fn dense_adjacency(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for ((i, j), &v) in pairs(n).zip(self.edges()) {
            out[i * n + j] = v;
            out[j * n + i] = v;
        }
        out
    }

    /// Row sums of the adjacency.
    pub fn degrees(&self) -> Vec<f64> {
        let mut deg = vec![0.0; self.n];
        for ((i, j), &v) in pairs(self.n).zip(self.edges()) {
            deg[i] += v;
            deg[j] += v;
        }
        deg
    }

    pub fn check_same_shape(&self, other: &GraphState) -> Result<()> {
        if self.n != other.n || self.f != other.f {
            return Err(Error::Shape {
                expected: format!("N={}, F={}", self.n, self.f),
                got: format!("N={}, F={}", other.n, other.f),
            });
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::Numerical(format!("{what} contains non-finite entries")))
        }
    }

    /// Inner product over free coordinates.
    pub fn dot(&self, other: &GraphState) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist_sq(&self, other: &GraphState) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &GraphState) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for a in &mut self.data {
            *a *= alpha;
        }
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> GraphState {
        GraphState {
            n: self.n,
            f: self.f,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Same shape, all zeros.
    pub fn zeros_like(&self) -> GraphState {
        GraphState::zeros(self.n, self.f)
    }

    pub fn cosine(&self, other: &GraphState) -> f64 {
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            0.0
        } else {
            self.dot(other) / denom
        }
    }
}

impl Add for &GraphState {
    type Output = GraphState;

    fn add(self, rhs: &GraphState) -> GraphState {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub for &GraphState {
    type Output = GraphState;

    fn sub(self, rhs: &GraphState) -> GraphState {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl Mul<f64> for &GraphState {
    type Output = GraphState;

    fn mul(self, rhs: f64) -> GraphState {
        let mut out = self.clone();
        out.scale(rhs);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_index_matches_enumeration() {
        for n in 0..9 {
            for (k, (i, j)) in pairs(n).enumerate() {
                assert_eq!(pair_index(n, i, j), k);
            }
            assert_eq!(pairs(n).count(), pair_count(n));
        }
    }

    #[test]
    fn dense_round_trip_is_symmetric_and_hollow() {
        let mut g = GraphState::zeros(4, 2);
        g.set_adj(0, 3, 0.7);
        g.set_adj(2, 1, -1.5);
        let a = g.dense_adjacency();
        for i in 0..4 {
            assert_eq!(a[i * 4 + i], 0.0);
            for j in 0..4 {
                assert_eq!(a[i * 4 + j], a[j * 4 + i]);
            }
        }
        let back = GraphState::from_dense(4, 2, g.features(), &a).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn from_dense_rejects_asymmetry_and_diagonal() {
        let mut a = vec![0.0; 9];
        a[1] = 1.0;
        assert!(matches!(GraphState::from_dense(3, 0, &[], &a), Err(Error::Usage(_))));
        let mut b = vec![0.0; 9];
        b[4] = 1.0;
        assert!(matches!(GraphState::from_dense(3, 0, &[], &b), Err(Error::Usage(_))));
        assert!(matches!(
            GraphState::from_dense(3, 1, &[0.0], &[0.0; 9]),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn matrix_gradient_sums_mirrored_entries() {
        let ga = vec![0.0, 1.0, 2.0, 3.0, 0.0, 4.0, 5.0, 6.0, 0.0];
        let g = GraphState::from_matrix_gradient(3, 0, &[], &ga);
        assert_eq!(g.edges(), &[1.0 + 3.0, 2.0 + 5.0, 4.0 + 6.0]);
    }

    #[test]
    fn degrees_are_row_sums() {
        let mut g = GraphState::zeros(3, 0);
        g.set_adj(0, 1, 1.0);
        g.set_adj(0, 2, 0.5);
        assert_eq!(g.degrees(), vec![1.5, 1.0, 0.5]);
    }
}

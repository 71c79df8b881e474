use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest innovation count for which the tensor Gauss-Hermite rule is built.
pub const TENSOR_MAX_DIM: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ShockKind {
    Monomial,
    GaussHermite { level: usize },
}

impl Default for ShockKind {
    fn default() -> Self {
        Self::Monomial
    }
}

/// Quadrature rule for expectations over independent standard normal
/// innovations `(e, e_1, ..., e_N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShockRule {
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl ShockRule {
    pub fn dim(&self) -> usize {
        self.nodes.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Single node at zero: the deterministic (certainty-equivalent) rule.
    pub fn zero(dim: usize) -> Self {
        Self {
            nodes: vec![vec![0.0; dim]],
            weights: vec![1.0],
        }
    }

    /// Degree-3 monomial rule with `2 * dim` nodes at `±sqrt(dim) e_i`.
    pub fn monomial(dim: usize) -> Self {
        let r = (dim as f64).sqrt();
        let w = 1.0 / (2 * dim) as f64;
        let mut nodes = Vec::with_capacity(2 * dim);
        for i in 0..dim {
            for s in [1.0, -1.0] {
                let mut node = vec![0.0; dim];
                node[i] = s * r;
                nodes.push(node);
            }
        }
        Self {
            nodes,
            weights: vec![w; 2 * dim],
        }
    }

    /// Tensor product of `level`-point probabilists' Gauss-Hermite rules.
    pub fn gauss_hermite(dim: usize, level: usize) -> Result<Self> {
        if dim > TENSOR_MAX_DIM {
            return Err(Error::InvalidArgument(format!(
                "tensor Gauss-Hermite rule limited to {TENSOR_MAX_DIM} innovations (got {dim}); use the monomial rule"
            )));
        }
        if level == 0 {
            return Err(Error::InvalidArgument("Gauss-Hermite level must be at least 1".into()));
        }
        let (x, w) = hermite_1d(level);
        let total = level.pow(dim as u32);
        let mut nodes = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        let mut idx = vec![0usize; dim];
        for _ in 0..total {
            nodes.push(idx.iter().map(|&i| x[i]).collect());
            weights.push(idx.iter().map(|&i| w[i]).product());
            for digit in idx.iter_mut().rev() {
                *digit += 1;
                if *digit < level {
                    break;
                }
                *digit = 0;
            }
        }
        Ok(Self { nodes, weights })
    }

    pub fn build(dim: usize, kind: ShockKind) -> Result<Self> {
        match kind {
            ShockKind::Monomial => Ok(Self::monomial(dim)),
            ShockKind::GaussHermite { level } => Self::gauss_hermite(dim, level),
        }
    }

    /// `sum_q w_q f(node_q)`.
    pub fn expect<F: FnMut(&[f64]) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(n, w)| w * f(n)).sum()
    }
}

/// Golub-Welsch nodes and weights for the standard normal density.
fn hermite_1d(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        jacobi[(k, k - 1)] = b;
        jacobi[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // symmetrise to remove eigen-solver round-off
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (pairs[j].0 - pairs[i].0);
        let w = 0.5 * (pairs[i].1 + pairs[j].1);
        pairs[i] = (-x, w);
        pairs[j] = (x, w);
    }
    if n % 2 == 1 {
        pairs[n / 2].0 = 0.0;
    }
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    pairs.into_iter().map(|(x, w)| (x, w / total)).unzip()
}

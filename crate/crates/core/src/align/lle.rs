use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{dot, norm};

/// Row-sparse square matrix: row `i` lists `(column, value)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseWeights {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseWeights {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .iter()
            .find(|(c, _)| *c == j)
            .map_or(0.0, |(_, v)| *v)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, self.n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                out[(i, j)] = v;
            }
        }
        out
    }
}

/// Cosine-nearest `k` rows to row `i`, ties by ascending index.
fn cosine_neighbors(rows: &[Vec<f64>], norms: &[f64], i: usize, k: usize) -> Vec<usize> {
    let mut scored: Vec<(usize, f64)> = (0..rows.len())
        .filter(|&j| j != i)
        .map(|j| (j, dot(&rows[i], &rows[j]) / (norms[i] * norms[j])))
        .collect();
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    scored.truncate(k);
    scored.into_iter().map(|(j, _)| j).collect()
}

/// Locally linear reconstruction weights.
///
/// Row `i` is supported on the `k` cosine-nearest neighbors of point `i` and
/// holds the affine weights minimizing `||p_i - Σ_j w_j p_j||²`. The local
/// Gram matrix gets `reg * trace(G) / k` added to its diagonal.
pub fn lle_weights(points: &DMatrix<f64>, k: usize, reg: f64) -> Result<SparseWeights> {
    let n = points.nrows();
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!(
            "k must lie in 1..{n}, got {k}"
        )));
    }
    if !(reg >= 0.0 && reg.is_finite()) {
        return Err(Error::InvalidArgument(format!("reg must be >= 0, got {reg}")));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite point coordinate".into()));
    }
    let rows: Vec<Vec<f64>> = points.row_iter().map(|r| r.iter().copied().collect()).collect();
    let norms: Vec<f64> = rows.iter().map(|r| norm(r)).collect();
    if let Some(i) = norms.iter().position(|n| *n == 0.0) {
        return Err(Error::InvalidArgument(format!(
            "point {i} is the zero vector; cosine neighbors are undefined"
        )));
    }

    let solved: Result<Vec<Vec<(usize, f64)>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let nbrs = cosine_neighbors(&rows, &norms, i, k);
            let w = local_weights(&rows, i, &nbrs, reg)?;
            Ok(nbrs.into_iter().zip(w).collect())
        })
        .collect();
    Ok(SparseWeights { n, rows: solved? })
}

fn local_weights(rows: &[Vec<f64>], i: usize, nbrs: &[usize], reg: f64) -> Result<Vec<f64>> {
    let k = nbrs.len();
    let m = rows[i].len();
    let z = DMatrix::from_fn(k, m, |a, c| rows[nbrs[a]][c] - rows[i][c]);
    let mut gram = &z * z.transpose();
    let shift = reg * gram.trace() / k as f64;
    for a in 0..k {
        gram[(a, a)] += shift;
    }
    let chol = gram
        .clone()
        .cholesky()
        .ok_or(Error::SingularSystem { row: i })?;
    // Cholesky succeeds on numerically singular PSD matrices; reject tiny
    // pivots relative to the largest one.
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(*d), hi.max(*d)));
    if !(lo > 1e-7 * hi) {
        return Err(Error::SingularSystem { row: i });
    }
    let w = chol.solve(&DVector::from_element(k, 1.0));
    let total = w.sum();
    if total == 0.0 || !total.is_finite() {
        return Err(Error::SingularSystem { row: i });
    }
    Ok(w.iter().map(|v| v / total).collect())
}

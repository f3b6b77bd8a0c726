//! Low rank alignment of two point sets.
//!
//! Each set gets a reconstruction matrix `R` (nuclear-norm regularized via
//! ADMM, or classic LLE weights). The joint coordinates `F` minimize
//!
//! ```text
//! (1 - mu) * Σ_side ||F_side - R_side F_side||² + mu * Σ_ab C_ab ||F_a - F_b||²
//! ```
//!
//! over orthonormal `F`, i.e. the bottom eigenvectors of
//! `(1 - mu) * blockdiag(M_X, M_Y) + mu * L`, where `M = (I - R)ᵀ(I - R)` and
//! `L` is the Laplacian of the bipartite correspondence graph.

mod lle;
mod low_rank;

use std::collections::HashMap;
use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub use lle::{lle_weights, SparseWeights};
pub use low_rank::{default_lambda, low_rank_objective, low_rank_weights, AdmmParams, LowRankWeights};

/// Eigenvalues at or below this fraction of the spectral maximum are treated
/// as null directions and skipped.
pub const NULL_EIGEN_RATIO: f64 = 1e-9;

/// Sparse `n1 x n2` coupling between the rows of X and the rows of Y.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl CorrespondenceMatrix {
    /// Validates and stores `(row, col, value)` entries; zero values are
    /// dropped and duplicates rejected.
    pub fn new(rows: usize, cols: usize, entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        let mut entries: Vec<_> = entries.into_iter().filter(|e| e.2 != 0.0).collect();
        for &(i, j, v) in &entries {
            if i >= rows || j >= cols {
                return Err(Error::Dimension(format!(
                    "entry ({i}, {j}) outside {rows}x{cols}"
                )));
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!(
                    "correspondence entry ({i}, {j}) = {v} outside [0, 1]"
                )));
            }
        }
        entries.sort_by_key(|e| (e.0, e.1));
        if entries.windows(2).any(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::InvalidArgument("duplicate correspondence entry".into()));
        }
        if entries.is_empty() {
            return Err(Error::EmptyCorrespondence);
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(n, n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries
            .binary_search_by_key(&(i, j), |e| (e.0, e.1))
            .map_or(0.0, |k| self.entries[k].2)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut c = DMatrix::zeros(self.rows, self.cols);
        for &(i, j, v) in &self.entries {
            c[(i, j)] = v;
        }
        c
    }
}

/// Ones wherever a row token of A equals a column token of B, plus every
/// listed `(label in A, label in B)` latent pair.
pub fn build_correspondence<S: AsRef<str>>(
    vocab_a: &[S],
    vocab_b: &[S],
    latent_pairs: &[(S, S)],
) -> Result<CorrespondenceMatrix> {
    let index_a = token_index(vocab_a)?;
    let index_b = token_index(vocab_b)?;
    let mut ones: Vec<(usize, usize)> = vocab_a
        .iter()
        .enumerate()
        .filter_map(|(i, t)| index_b.get(t.as_ref()).map(|&j| (i, j)))
        .collect();
    for (la, lb) in latent_pairs {
        let i = *index_a
            .get(la.as_ref())
            .ok_or_else(|| Error::UnknownToken(la.as_ref().to_string()))?;
        let j = *index_b
            .get(lb.as_ref())
            .ok_or_else(|| Error::UnknownToken(lb.as_ref().to_string()))?;
        ones.push((i, j));
    }
    ones.sort_unstable();
    ones.dedup();
    CorrespondenceMatrix::new(
        vocab_a.len(),
        vocab_b.len(),
        ones.into_iter().map(|(i, j)| (i, j, 1.0)).collect(),
    )
}

fn token_index<S: AsRef<str>>(vocab: &[S]) -> Result<HashMap<&str, usize>> {
    let mut index = HashMap::with_capacity(vocab.len());
    for (i, t) in vocab.iter().enumerate() {
        if index.insert(t.as_ref(), i).is_some() {
            return Err(Error::DuplicateToken(t.as_ref().to_string()));
        }
    }
    Ok(index)
}

/// How each side's reconstruction matrix is computed.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightBackend {
    /// Nuclear-norm regularized reconstruction; `lambda: None` uses
    /// [`default_lambda`] per side.
    LowRank {
        lambda: Option<f64>,
        admm: AdmmParams,
    },
    Lle {
        k: usize,
        reg: f64,
    },
}

impl WeightBackend {
    pub fn low_rank() -> Self {
        WeightBackend::LowRank {
            lambda: None,
            admm: AdmmParams::default(),
        }
    }

    pub fn lle() -> Self {
        WeightBackend::Lle { k: 10, reg: 1e-3 }
    }
}

#[derive(Debug, Clone)]
pub struct AlignmentProblem {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub correspondence: CorrespondenceMatrix,
    pub mu: f64,
    pub d: usize,
    pub backend: WeightBackend,
}

impl AlignmentProblem {
    pub fn validate(&self) -> Result<()> {
        let (n1, n2) = (self.x.nrows(), self.y.nrows());
        if self.correspondence.rows() != n1 || self.correspondence.cols() != n2 {
            return Err(Error::Dimension(format!(
                "correspondence is {}x{} but point sets have {n1} and {n2} rows",
                self.correspondence.rows(),
                self.correspondence.cols()
            )));
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "mu must lie in (0, 1), got {}",
                self.mu
            )));
        }
        if self.d == 0 || self.d + 2 > n1 + n2 {
            return Err(Error::InvalidArgument(format!(
                "d must lie in 1..={}, got {}",
                (n1 + n2).saturating_sub(2),
                self.d
            )));
        }
        Ok(())
    }
}

/// Per-side diagnostics of the reconstruction step.
#[derive(Debug, Clone, PartialEq)]
pub enum ReconstructionInfo {
    Lle,
    LowRank {
        lambda: f64,
        iterations: usize,
        primal_residual: f64,
        dual_residual: f64,
    },
}

#[derive(Debug, Clone)]
pub struct AlignmentResult {
    /// `(n1 + n2) x d`; the first `n1` rows belong to X.
    pub coordinates: DMatrix<f64>,
    /// Retained eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    pub dropped_null_count: usize,
    pub n_x: usize,
    pub reconstruction: [ReconstructionInfo; 2],
}

impl AlignmentResult {
    pub fn x_coordinates(&self) -> DMatrix<f64> {
        self.coordinates.rows(0, self.n_x).into_owned()
    }

    pub fn y_coordinates(&self) -> DMatrix<f64> {
        let n = self.coordinates.nrows();
        self.coordinates.rows(self.n_x, n - self.n_x).into_owned()
    }

    /// Writes `token,side,c1,...,cd`, one row per point.
    pub fn write_csv<W: Write, S: AsRef<str>>(
        &self,
        tokens_x: &[S],
        tokens_y: &[S],
        mut sink: W,
    ) -> Result<()> {
        if tokens_x.len() != self.n_x || tokens_x.len() + tokens_y.len() != self.coordinates.nrows() {
            return Err(Error::Dimension("token lists do not match the result".into()));
        }
        write!(sink, "token,side")?;
        for c in 1..=self.coordinates.ncols() {
            write!(sink, ",c{c}")?;
        }
        writeln!(sink)?;
        let labelled = tokens_x
            .iter()
            .map(|t| (t, 'A'))
            .chain(tokens_y.iter().map(|t| (t, 'B')));
        for (row, (token, side)) in labelled.enumerate() {
            write!(sink, "{},{side}", token.as_ref())?;
            for v in self.coordinates.row(row).iter() {
                write!(sink, ",{v}")?;
            }
            writeln!(sink)?;
        }
        sink.flush()?;
        Ok(())
    }
}

fn reconstruction(points: &DMatrix<f64>, backend: &WeightBackend) -> Result<(DMatrix<f64>, ReconstructionInfo)> {
    match backend {
        WeightBackend::Lle { k, reg } => Ok((lle_weights(points, *k, *reg)?.to_dense(), ReconstructionInfo::Lle)),
        WeightBackend::LowRank { lambda, admm } => {
            let lambda = lambda.unwrap_or_else(|| default_lambda(points));
            let out = low_rank_weights(points, lambda, admm)?;
            Ok((
                out.weights,
                ReconstructionInfo::LowRank {
                    lambda,
                    iterations: out.iterations,
                    primal_residual: out.primal_residual,
                    dual_residual: out.dual_residual,
                },
            ))
        }
    }
}

/// `(I - R)ᵀ (I - R)`.
fn reconstruction_cost(r: &DMatrix<f64>) -> DMatrix<f64> {
    let n = r.nrows();
    let i_minus_r = DMatrix::identity(n, n) - r;
    i_minus_r.transpose() * i_minus_r
}

/// The symmetric matrix whose bottom eigenvectors give the joint embedding.
pub fn alignment_matrix(
    r_x: &DMatrix<f64>,
    r_y: &DMatrix<f64>,
    correspondence: &CorrespondenceMatrix,
    mu: f64,
) -> DMatrix<f64> {
    let n1 = r_x.nrows();
    let n = n1 + r_y.nrows();
    let mut a = DMatrix::zeros(n, n);
    a.view_mut((0, 0), (n1, n1)).copy_from(&reconstruction_cost(r_x));
    a.view_mut((n1, n1), (n - n1, n - n1)).copy_from(&reconstruction_cost(r_y));
    let a_t = a.transpose();
    a = (a + a_t) * (0.5 * (1.0 - mu));
    for &(i, j, c) in correspondence.entries() {
        let (p, q) = (i, n1 + j);
        a[(p, p)] += mu * c;
        a[(q, q)] += mu * c;
        a[(p, q)] -= mu * c;
        a[(q, p)] -= mu * c;
    }
    a
}

/// Aligns X and Y into a joint `d`-dimensional space.
pub fn lra_align(problem: &AlignmentProblem) -> Result<AlignmentResult> {
    problem.validate()?;
    let (r_x, info_x) = reconstruction(&problem.x, &problem.backend)?;
    let (r_y, info_y) = reconstruction(&problem.y, &problem.backend)?;
    let a = alignment_matrix(&r_x, &r_y, &problem.correspondence, problem.mu);
    let (values, vectors) = ascending_eigen(a)?;

    let top = values.last().copied().unwrap_or(0.0);
    let cutoff = NULL_EIGEN_RATIO * top.max(0.0);
    let dropped = values.iter().take_while(|v| **v <= cutoff).count();
    let available = values.len() - dropped;
    if available < problem.d {
        return Err(Error::NotEnoughEigenvectors {
            requested: problem.d,
            available,
        });
    }
    let coordinates = vectors.columns(dropped, problem.d).into_owned();
    Ok(AlignmentResult {
        coordinates,
        eigenvalues: values[dropped..dropped + problem.d].to_vec(),
        dropped_null_count: dropped,
        n_x: problem.x.nrows(),
        reconstruction: [info_x, info_y],
    })
}

/// Full symmetric eigendecomposition with eigenpairs sorted ascending.
pub(crate) fn ascending_eigen(a: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let eig = SymmetricEigen::try_new(a, f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigensolver("symmetric eigendecomposition did not converge".into()))?;
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigensolver("non-finite eigenvalue".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        // Deterministic sign: largest-magnitude entry positive.
        let pivot = col.iamax();
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
    }
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_vocabularies_give_identity_correspondence() {
        let v = ["a", "b", "c"];
        let c = build_correspondence(&v, &v, &[]).unwrap();
        assert_eq!(c.to_dense(), DMatrix::identity(3, 3));
    }

    #[test]
    fn disjoint_vocabularies_error() {
        assert!(matches!(
            build_correspondence(&["a", "b"], &["c", "d"], &[]),
            Err(Error::EmptyCorrespondence)
        ));
    }

    #[test]
    fn latent_pairs_and_permuted_vocab() {
        let a = ["a", "b", "⟂a:0"];
        let b = ["b", "a", "⟂a:0"];
        let c = build_correspondence(&a, &b, &[("⟂a:0", "⟂a:0")]).unwrap();
        assert_eq!(c.entries(), &[(0, 1, 1.0), (1, 0, 1.0), (2, 2, 1.0)]);
        assert_eq!(c.get(0, 0), 0.0);
        assert!(build_correspondence(&a, &b, &[("x", "⟂a:0")]).is_err());
        assert!(build_correspondence(&["a", "a"], &["a", "b"], &[]).is_err());
    }

    #[test]
    fn correspondence_validates_entries() {
        assert!(CorrespondenceMatrix::new(2, 2, vec![(0, 0, 1.5)]).is_err());
        assert!(CorrespondenceMatrix::new(2, 2, vec![(2, 0, 1.0)]).is_err());
        assert!(CorrespondenceMatrix::new(2, 2, vec![(0, 0, 0.0)]).is_err());
        assert!(CorrespondenceMatrix::new(2, 2, vec![(0, 0, 0.5), (0, 0, 0.5)]).is_err());
    }

    #[test]
    fn alignment_matrix_annihilates_ones_for_affine_weights() {
        let p = DMatrix::from_fn(12, 3, |i, j| ((i * 7 + j * 3) % 11) as f64 + 1.0 + j as f64);
        let w = lle_weights(&p, 4, 1e-3).unwrap().to_dense();
        let a = alignment_matrix(&w, &w, &CorrespondenceMatrix::identity(12).unwrap(), 0.5);
        let ones = DMatrix::from_element(24, 1, 1.0);
        assert!((&a * ones).amax() < 1e-10);
        assert!((&a - a.transpose()).amax() == 0.0);
    }

    #[test]
    fn validate_rejects_bad_problems() {
        let x = DMatrix::from_element(3, 2, 1.0);
        let base = AlignmentProblem {
            x: x.clone(),
            y: x,
            correspondence: CorrespondenceMatrix::identity(3).unwrap(),
            mu: 0.5,
            d: 2,
            backend: WeightBackend::lle(),
        };
        assert!(base.validate().is_ok());
        assert!(AlignmentProblem { mu: 1.0, ..base.clone() }.validate().is_err());
        assert!(AlignmentProblem { d: 5, ..base.clone() }.validate().is_err());
        assert!(AlignmentProblem { d: 0, ..base.clone() }.validate().is_err());
        let c = CorrespondenceMatrix::identity(2).unwrap();
        assert!(AlignmentProblem { correspondence: c, ..base }.validate().is_err());
    }
}

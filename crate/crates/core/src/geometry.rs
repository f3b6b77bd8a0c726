//! Cosine geometry over embedding models: similarity, normalization,
//! ε-neighborhoods, k-nearest neighbors and rank tables.
//!
//! All orderings are by descending cosine similarity with ties broken by
//! ascending token id. Searches are exact brute force.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::embedding_io::EmbeddingModel;
use crate::error::{Error, Result};

/// Cosine similarity of two nonzero vectors, clamped to `[-1, 1]`.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Dimension(format!("{} vs {}", u.len(), v.len())));
    }
    if u.iter().chain(v).any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("non-finite vector entry".into()));
    }
    let nu = norm(u);
    let nv = norm(v);
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::InvalidArgument(
            "cosine similarity of a zero vector".into(),
        ));
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// `1 - cosine_similarity(u, v)`.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    cosine_similarity(u, v).map(|s| 1.0 - s)
}

pub(crate) fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub(crate) fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

/// Similarity between rows `i` and `j` of a model using the cached norms.
/// Exactly symmetric in `i` and `j`.
pub(crate) fn model_similarity(model: &EmbeddingModel, i: usize, j: usize) -> f64 {
    (dot(model.row(i), model.row(j)) / (model.norm(i) * model.norm(j))).clamp(-1.0, 1.0)
}

fn by_similarity(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then(a.0.cmp(&b.0))
}

/// Every other word of the model ordered by similarity to `center`.
pub fn ranked_neighbors(model: &EmbeddingModel, center: usize) -> Result<Vec<(usize, f64)>> {
    model.check_id(center)?;
    let mut out: Vec<(usize, f64)> = (0..model.len())
        .filter(|&j| j != center)
        .map(|j| (j, model_similarity(model, center, j)))
        .collect();
    out.sort_by(by_similarity);
    Ok(out)
}

/// Rescales every row to unit Euclidean norm.
pub fn unit_normalize(model: &EmbeddingModel) -> Result<EmbeddingModel> {
    let dim = model.dim();
    let mut data = Vec::with_capacity(model.as_slice().len());
    for i in 0..model.len() {
        let n = model.norm(i);
        data.extend(model.row(i).iter().map(|v| v / n));
    }
    EmbeddingModel::new(model.vocab().to_vec(), data, dim)
}

/// The words within cosine distance `epsilon` of a center word.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    pub center: usize,
    pub epsilon: f64,
    /// `(token id, similarity)`, most similar first, center excluded.
    pub members: Vec<(usize, f64)>,
}

impl Neighborhood {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn member_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().map(|(id, _)| *id)
    }
}

/// All words `w != center` with `1 - cos(w, center) < epsilon`.
pub fn epsilon_neighborhood(
    model: &EmbeddingModel,
    center: usize,
    epsilon: f64,
) -> Result<Neighborhood> {
    if !(epsilon > 0.0 && epsilon <= 2.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in (0, 2], got {epsilon}"
        )));
    }
    let members = ranked_neighbors(model, center)?
        .into_iter()
        .take_while(|(_, s)| 1.0 - s < epsilon)
        .collect();
    Ok(Neighborhood {
        center,
        epsilon,
        members,
    })
}

/// The `k` words most similar to `center`, excluding it.
pub fn k_nearest(model: &EmbeddingModel, center: usize, k: usize) -> Result<Vec<(usize, f64)>> {
    if k == 0 || k >= model.len() {
        return Err(Error::InvalidArgument(format!(
            "k must lie in 1..={}, got {k}",
            model.len().saturating_sub(1)
        )));
    }
    let mut all = ranked_neighbors(model, center)?;
    all.truncate(k);
    Ok(all)
}

/// `ranks[i][j]`: 1-based position of `j` in the similarity ordering
/// around `i`; the diagonal is 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankTable {
    n: usize,
    ranks: Vec<u32>,
}

impl RankTable {
    /// Wraps an explicit row-major `n x n` rank matrix after validating it.
    pub fn from_ranks(n: usize, ranks: Vec<u32>) -> Result<Self> {
        if ranks.len() != n * n {
            return Err(Error::Dimension(format!(
                "rank table of {n} points needs {} entries, got {}",
                n * n,
                ranks.len()
            )));
        }
        let mut seen = vec![false; n];
        for i in 0..n {
            seen.iter_mut().for_each(|s| *s = false);
            for j in 0..n {
                let r = ranks[i * n + j] as usize;
                if i == j {
                    if r != 0 {
                        return Err(Error::InvalidArgument(format!("ranks[{i}][{i}] must be 0")));
                    }
                    continue;
                }
                if r == 0 || r >= n || seen[r] {
                    return Err(Error::InvalidArgument(format!(
                        "row {i} is not a permutation of 1..{}",
                        n - 1
                    )));
                }
                seen[r] = true;
            }
        }
        Ok(Self { n, ranks })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn rank(&self, i: usize, j: usize) -> u32 {
        self.ranks[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.ranks[i * self.n..(i + 1) * self.n]
    }
}

/// Rank table of a model under cosine similarity.
pub fn rank_table(model: &EmbeddingModel) -> Result<RankTable> {
    let n = model.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "rank table needs at least 2 points, got {n}"
        )));
    }
    let mut ranks = vec![0u32; n * n];
    ranks.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let ordered = ranked_neighbors(model, i).expect("row id in range");
        for (pos, (j, _)) in ordered.into_iter().enumerate() {
            row[j] = (pos + 1) as u32;
        }
    });
    Ok(RankTable { n, ranks })
}

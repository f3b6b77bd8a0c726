//! Trustworthiness, continuity and neighborhood overlap.

use std::collections::HashSet;
use std::io::Write;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::embedding_io::EmbeddingModel;
use crate::error::{Error, Result};
use crate::geometry::{ranked_neighbors, RankTable};

fn check_tables(a: &RankTable, b: &RankTable, k: usize) -> Result<usize> {
    let n = a.len();
    if b.len() != n {
        return Err(Error::Dimension(format!(
            "rank tables cover {} and {} points",
            n,
            b.len()
        )));
    }
    if k == 0 || 2 * k >= n {
        return Err(Error::InvalidArgument(format!(
            "k must satisfy 1 <= k < n/2 (n = {n}), got {k}"
        )));
    }
    Ok(n)
}

/// Sum of `rank_in(reference) - k` over pairs that are k-neighbors in
/// `other` but not in `reference`.
fn intrusion_sum(reference: &RankTable, other: &RankTable, k: usize) -> u64 {
    let n = reference.len();
    let k32 = k as u32;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let ref_row = reference.row(i);
            other
                .row(i)
                .iter()
                .zip(ref_row)
                .filter(|(o, r)| **o != 0 && **o <= k32 && **r > k32)
                .map(|(_, r)| u64::from(r - k32))
                .sum::<u64>()
        })
        .sum()
}

fn scaled(n: usize, k: usize, sum: u64) -> f64 {
    let (n, k) = (n as f64, k as f64);
    1.0 - 2.0 / (n * k * (2.0 * n - 3.0 * k - 1.0)) * sum as f64
}

/// Penalizes points that enter a low-space k-neighborhood without being
/// k-neighbors in the high space. Requires `1 <= k < n/2`.
pub fn trustworthiness(high: &RankTable, low: &RankTable, k: usize) -> Result<f64> {
    let n = check_tables(high, low, k)?;
    Ok(scaled(n, k, intrusion_sum(high, low, k)))
}

/// Penalizes high-space k-neighbors missing from the low-space
/// k-neighborhood. Equal to `trustworthiness(low, high, k)`.
pub fn continuity(high: &RankTable, low: &RankTable, k: usize) -> Result<f64> {
    let n = check_tables(high, low, k)?;
    Ok(scaled(n, k, intrusion_sum(low, high, k)))
}

/// Fraction of shared k-nearest neighbors of each word across two models.
///
/// Neighbor lists are restricted to the vocabulary common to both models
/// before truncating to `k`.
pub fn neighborhood_overlap<S: AsRef<str> + Sync>(
    model_a: &EmbeddingModel,
    model_b: &EmbeddingModel,
    words: &[S],
    k: usize,
) -> Result<Vec<(String, f64)>> {
    let profile = overlap_profile(model_a, model_b, words, &[k])?;
    Ok(words
        .iter()
        .zip(profile)
        .map(|(w, f)| (w.as_ref().to_string(), f[0]))
        .collect())
}

/// Overlap of every word at every `k` of `k_values`, from one neighbor
/// ranking per word and model. `result[w][i]` is word `w` at `k_values[i]`.
pub fn overlap_profile<S: AsRef<str> + Sync>(
    model_a: &EmbeddingModel,
    model_b: &EmbeddingModel,
    words: &[S],
    k_values: &[usize],
) -> Result<Vec<Vec<f64>>> {
    let common_a: Vec<bool> = model_a.vocab().iter().map(|t| model_b.contains(t)).collect();
    let common = common_a.iter().filter(|c| **c).count();
    let k_max = k_values.iter().copied().max().unwrap_or(0);
    if let Some(&k) = k_values.iter().find(|&&k| k == 0 || k >= common) {
        return Err(Error::InvalidArgument(format!(
            "k must lie in 1..{common} (common vocabulary size), got {k}"
        )));
    }
    let ids: Vec<(usize, usize)> = words
        .iter()
        .map(|w| Ok((model_a.lookup(w.as_ref())?, model_b.lookup(w.as_ref())?)))
        .collect::<Result<_>>()?;

    ids.par_iter()
        .map(|&(ia, ib)| {
            // Neighbors as A-ids so both lists compare by token.
            let near_a: Vec<usize> = ranked_neighbors(model_a, ia)?
                .into_iter()
                .filter(|(j, _)| common_a[*j])
                .take(k_max)
                .map(|(j, _)| j)
                .collect();
            let near_b: Vec<usize> = ranked_neighbors(model_b, ib)?
                .into_iter()
                .filter_map(|(j, _)| model_a.id(model_b.token(j)))
                .take(k_max)
                .collect();
            Ok(k_values
                .iter()
                .map(|&k| {
                    let set: HashSet<usize> = near_a[..k].iter().copied().collect();
                    let shared = near_b[..k].iter().filter(|j| set.contains(j)).count();
                    shared as f64 / k as f64
                })
                .collect())
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleStrategy {
    Uniform,
    /// The first tokens in file order (word2vec exports are frequency
    /// sorted).
    ByRank,
}

impl std::str::FromStr for SampleStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "by_rank" | "by-rank" => Ok(Self::ByRank),
            other => Err(Error::InvalidArgument(format!(
                "unknown sample strategy `{other}` (expected uniform or by_rank)"
            ))),
        }
    }
}

pub fn sample_words(
    model: &EmbeddingModel,
    strategy: SampleStrategy,
    count: usize,
    seed: u64,
) -> Result<Vec<String>> {
    if count > model.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot sample {count} words from a vocabulary of {}",
            model.len()
        )));
    }
    let ids: Vec<usize> = match strategy {
        SampleStrategy::ByRank => (0..count).collect(),
        SampleStrategy::Uniform => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            index::sample(&mut rng, model.len(), count).into_vec()
        }
    };
    Ok(ids.into_iter().map(|i| model.token(i).to_string()).collect())
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// `(k, trustworthiness, continuity)`, k strictly increasing.
    pub per_k: Vec<(usize, f64, f64)>,
    pub overlap: Vec<(String, f64)>,
    pub overlap_mean: f64,
    pub overlap_std: f64,
}

impl MetricsReport {
    /// T and C for every k of `k_values` plus summary statistics of
    /// `overlap`.
    pub fn compute(
        high: &RankTable,
        low: &RankTable,
        k_values: &[usize],
        overlap: Vec<(String, f64)>,
    ) -> Result<Self> {
        if k_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "k values must be strictly increasing".into(),
            ));
        }
        let per_k = k_values
            .iter()
            .map(|&k| Ok((k, trustworthiness(high, low, k)?, continuity(high, low, k)?)))
            .collect::<Result<Vec<_>>>()?;
        debug_assert!(per_k
            .iter()
            .all(|(_, t, c)| (0.0..=1.0).contains(t) && (0.0..=1.0).contains(c)));
        let values: Vec<f64> = overlap.iter().map(|(_, v)| *v).collect();
        let (overlap_mean, overlap_std) = mean_std(&values);
        Ok(Self {
            per_k,
            overlap,
            overlap_mean,
            overlap_std,
        })
    }

    pub fn write_tc_csv<W: Write>(&self, mut sink: W) -> Result<()> {
        writeln!(sink, "k,trustworthiness,continuity")?;
        for (k, t, c) in &self.per_k {
            writeln!(sink, "{k},{t},{c}")?;
        }
        sink.flush()?;
        Ok(())
    }

    pub fn write_overlap_csv<W: Write>(&self, mut sink: W) -> Result<()> {
        writeln!(sink, "# mean={} std={}", self.overlap_mean, self.overlap_std)?;
        writeln!(sink, "token,overlap")?;
        for (t, v) in &self.overlap {
            writeln!(sink, "{t},{v}")?;
        }
        sink.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding_io::{generate_synthetic_pair, SyntheticSpec};
    use crate::geometry::rank_table;

    /// Rank table whose row `i` orders the other points by `order(i)`.
    fn table_from_orders(n: usize, order: impl Fn(usize) -> Vec<usize>) -> RankTable {
        let mut ranks = vec![0u32; n * n];
        for i in 0..n {
            for (pos, j) in order(i).into_iter().enumerate() {
                ranks[i * n + j] = (pos + 1) as u32;
            }
        }
        RankTable::from_ranks(n, ranks).unwrap()
    }

    fn forward(n: usize) -> impl Fn(usize) -> Vec<usize> {
        move |i| (1..n).map(|s| (i + s) % n).collect()
    }

    #[test]
    fn identical_tables_score_one() {
        let t = table_from_orders(9, forward(9));
        for k in 1..=4 {
            assert_eq!(trustworthiness(&t, &t, k).unwrap(), 1.0);
            assert_eq!(continuity(&t, &t, k).unwrap(), 1.0);
        }
    }

    #[test]
    fn reversed_rows_n4_k1() {
        // Each row fully reversed in the low space. For every i the single
        // low-space neighbor has high rank 3, so the penalty sum is
        // 4 * (3 - 1) = 8 and T = 1 - 2 / (4 * 1 * 4) * 8 = 0.
        let high = table_from_orders(4, forward(4));
        let low = table_from_orders(4, |i| {
            let mut o = forward(4)(i);
            o.reverse();
            o
        });
        assert_eq!(trustworthiness(&high, &low, 1).unwrap(), 0.0);
        assert_eq!(continuity(&high, &low, 1).unwrap(), 0.0);
    }

    #[test]
    fn rejects_large_k_and_mismatch() {
        let t = table_from_orders(6, forward(6));
        assert!(trustworthiness(&t, &t, 3).is_err());
        assert!(continuity(&t, &t, 0).is_err());
        let u = table_from_orders(5, forward(5));
        assert!(trustworthiness(&t, &u, 1).is_err());
    }

    fn pair(sigma: f64) -> (EmbeddingModel, EmbeddingModel) {
        generate_synthetic_pair(&SyntheticSpec {
            n: 60,
            m: 8,
            intrinsic_dim: 3,
            noise_sigma: sigma,
            seed: 17,
        })
        .unwrap()
    }

    #[test]
    fn overlap_identity_and_isometry() {
        let (a, b) = pair(0.0);
        let words = sample_words(&a, SampleStrategy::ByRank, 20, 0).unwrap();
        for (_, f) in neighborhood_overlap(&a, &a, &words, 5).unwrap() {
            assert_eq!(f, 1.0);
        }
        for (_, f) in neighborhood_overlap(&a, &b, &words, 5).unwrap() {
            assert_eq!(f, 1.0);
        }
        for (_, f) in neighborhood_overlap(&a, &b, &words, 59).unwrap() {
            assert_eq!(f, 1.0);
        }
    }

    #[test]
    fn overlap_is_symmetric_and_bounded() {
        let (a, b) = pair(0.4);
        let words = sample_words(&a, SampleStrategy::Uniform, 15, 3).unwrap();
        let ab = neighborhood_overlap(&a, &b, &words, 7).unwrap();
        let ba = neighborhood_overlap(&b, &a, &words, 7).unwrap();
        assert_eq!(ab, ba);
        assert!(ab.iter().all(|(_, f)| (0.0..=1.0).contains(f)));
        assert!(ab.iter().any(|(_, f)| *f < 1.0));
    }

    #[test]
    fn overlap_restricts_to_common_vocabulary() {
        let a = EmbeddingModel::new(
            ["x", "p", "q", "only_a"].map(String::from).to_vec(),
            vec![1.0, 0.0, 0.9, 0.1, 0.0, 1.0, 1.0, 0.01],
            2,
        )
        .unwrap();
        let b = EmbeddingModel::new(
            ["q", "x", "p"].map(String::from).to_vec(),
            vec![0.0, 1.0, 1.0, 0.0, 0.9, 0.1],
            2,
        )
        .unwrap();
        // `only_a` would be x's nearest neighbor in A but is not common.
        assert_eq!(neighborhood_overlap(&a, &b, &["x"], 1).unwrap(), vec![("x".to_string(), 1.0)]);
        assert!(neighborhood_overlap(&a, &b, &["x"], 3).is_err());
        assert!(neighborhood_overlap(&a, &b, &["only_a"], 1).is_err());
    }

    #[test]
    fn sampling() {
        let a = EmbeddingModel::new(
            ["the", "of", "and", "cat", "dog"].map(String::from).to_vec(),
            (0..10).map(|v| v as f64 + 1.0).collect(),
            2,
        )
        .unwrap();
        assert_eq!(sample_words(&a, SampleStrategy::ByRank, 3, 0).unwrap(), ["the", "of", "and"]);
        let s1 = sample_words(&a, SampleStrategy::Uniform, 3, 42).unwrap();
        assert_eq!(s1, sample_words(&a, SampleStrategy::Uniform, 3, 42).unwrap());
        let mut all = sample_words(&a, SampleStrategy::Uniform, 5, 1).unwrap();
        all.sort();
        let mut vocab = a.vocab().to_vec();
        vocab.sort();
        assert_eq!(all, vocab);
        assert!(sample_words(&a, SampleStrategy::Uniform, 6, 1).is_err());
        assert!("nope".parse::<SampleStrategy>().is_err());
    }

    #[test]
    fn report_summary_and_csv() {
        let (a, b) = pair(0.2);
        let (ha, hb) = (rank_table(&a).unwrap(), rank_table(&b).unwrap());
        let report = MetricsReport::compute(
            &ha,
            &hb,
            &[2, 5],
            vec![("a".into(), 0.5), ("b".into(), 1.0)],
        )
        .unwrap();
        assert_eq!(report.overlap_mean, 0.75);
        assert_eq!(report.overlap_std, 0.25);
        let mut buf = Vec::new();
        report.write_tc_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("k,trustworthiness,continuity\n2,"));
        assert_eq!(text.lines().count(), 3);
        assert!(MetricsReport::compute(&ha, &hb, &[5, 2], vec![]).is_err());
    }
}

//! Latent words: synthetic anchors inside an ε-neighborhood, built as
//! ±1-coefficient sums of neighborhood members and kept only when the sum
//! still falls inside the neighborhood.

use std::collections::HashSet;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embedding_io::EmbeddingModel;
use crate::error::{Error, Result};
use crate::geometry::{cosine_similarity, epsilon_neighborhood, Neighborhood};

/// Prefix of every latent-word label.
pub const LATENT_PREFIX: char = '⟂';

#[derive(Debug, Clone, PartialEq)]
pub struct LatentWord {
    pub vector: Vec<f64>,
    pub center: usize,
    /// `(source token id, ±1)`, ordered by source id.
    pub coefficients: Vec<(usize, i8)>,
    pub label: String,
}

impl LatentWord {
    /// Recomputes `Σ α·source` from a model's rows, in coefficient order.
    pub fn reconstruct(&self, model: &EmbeddingModel) -> Vec<f64> {
        combine(model, self.coefficients.iter().copied())
    }
}

pub fn latent_label(center_token: &str, index: usize) -> String {
    format!("{LATENT_PREFIX}{center_token}:{index}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentConfig {
    pub epsilon: f64,
    pub target_count: usize,
    /// Defaults to `50 * target_count`.
    pub max_attempts: Option<usize>,
    pub min_terms: usize,
    /// Defaults to `min(5, |neighborhood|)`; always capped by the
    /// neighborhood size.
    pub max_terms: Option<usize>,
    pub seed: u64,
}

impl LatentConfig {
    pub fn new(epsilon: f64, target_count: usize, seed: u64) -> Self {
        Self {
            epsilon,
            target_count,
            max_attempts: None,
            min_terms: 2,
            max_terms: None,
            seed,
        }
    }

    pub fn attempts(&self) -> usize {
        self.max_attempts.unwrap_or(50 * self.target_count)
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 2.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must lie in (0, 2], got {}",
                self.epsilon
            )));
        }
        if self.attempts() < self.target_count {
            return Err(Error::InvalidArgument(
                "max_attempts must be at least target_count".into(),
            ));
        }
        if self.min_terms < 2 {
            return Err(Error::InvalidArgument("min_terms must be at least 2".into()));
        }
        if let Some(max) = self.max_terms {
            if max < self.min_terms {
                return Err(Error::InvalidArgument(
                    "max_terms must be at least min_terms".into(),
                ));
            }
        }
        Ok(())
    }

    /// Term-count range for a pool of `pool` candidate sources.
    fn term_range(&self, pool: usize) -> (usize, usize) {
        let max = self.max_terms.unwrap_or(5).min(pool);
        (self.min_terms, max)
    }
}

fn combine(model: &EmbeddingModel, coefficients: impl Iterator<Item = (usize, i8)>) -> Vec<f64> {
    let mut out = vec![0.0; model.dim()];
    for (id, alpha) in coefficients {
        let a = f64::from(alpha);
        for (o, v) in out.iter_mut().zip(model.row(id)) {
            *o += a * v;
        }
    }
    out
}

fn is_valid(model: &EmbeddingModel, center: usize, vector: &[f64], epsilon: f64) -> bool {
    match cosine_similarity(vector, model.row(center)) {
        Ok(s) => 1.0 - s < epsilon,
        // zero vector
        Err(_) => false,
    }
}

/// Draws coefficient patterns over `pool` candidate positions and hands each
/// unseen one to `accept` until `target` are accepted or attempts run out.
fn sample_patterns<F>(
    rng: &mut ChaCha8Rng,
    pool: usize,
    (min_terms, max_terms): (usize, usize),
    target: usize,
    attempts: usize,
    mut accept: F,
) -> usize
where
    F: FnMut(&[(usize, i8)]) -> bool,
{
    let mut seen: HashSet<Vec<(usize, i8)>> = HashSet::new();
    let mut accepted = 0;
    for _ in 0..attempts {
        if accepted == target {
            break;
        }
        let terms = rng.random_range(min_terms..=max_terms);
        let picks = index::sample(rng, pool, terms);
        let mut pattern: Vec<(usize, i8)> = picks
            .into_iter()
            .map(|p| (p, if rng.random_bool(0.5) { 1 } else { -1 }))
            .collect();
        pattern.sort_unstable();
        if !seen.insert(pattern.clone()) {
            continue;
        }
        if accept(&pattern) {
            accepted += 1;
        }
    }
    accepted
}

/// Generates up to `config.target_count` latent words around the
/// neighborhood's center. Validity is tested against the neighborhood's own
/// radius. The RNG stream is `config.seed + center`.
pub fn generate_latent_words(
    model: &EmbeddingModel,
    neighborhood: &Neighborhood,
    config: &LatentConfig,
) -> Result<Vec<LatentWord>> {
    config.validate()?;
    model.check_id(neighborhood.center)?;
    let members: Vec<usize> = neighborhood.member_ids().collect();
    if members.len() < config.min_terms {
        return Err(Error::NeighborhoodTooSmall {
            needed: config.min_terms,
            have: members.len(),
        });
    }
    let center = neighborhood.center;
    let center_token = model.token(center).to_string();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(center as u64));
    let mut out = Vec::new();
    sample_patterns(
        &mut rng,
        members.len(),
        config.term_range(members.len()),
        config.target_count,
        config.attempts(),
        |pattern| {
            let mut coefficients: Vec<(usize, i8)> =
                pattern.iter().map(|&(p, a)| (members[p], a)).collect();
            coefficients.sort_unstable();
            let vector = combine(model, coefficients.iter().copied());
            if !is_valid(model, center, &vector, neighborhood.epsilon) {
                return false;
            }
            let label = latent_label(&center_token, out.len());
            out.push(LatentWord {
                vector,
                center,
                coefficients,
                label,
            });
            true
        },
    );
    Ok(out)
}

/// Generates latent words that correspond across two models.
///
/// Patterns are drawn over the tokens common to both ε-neighborhoods of
/// `center_token` (in model A's neighborhood order) and kept only when the
/// sum is valid in both models. Position `i` of the two returned sequences
/// comes from the same `(token, α)` pattern and carries the same label.
pub fn pair_latent_words(
    model_a: &EmbeddingModel,
    model_b: &EmbeddingModel,
    center_token: &str,
    config: &LatentConfig,
) -> Result<(Vec<LatentWord>, Vec<LatentWord>)> {
    config.validate()?;
    let center_a = model_a.lookup(center_token)?;
    let center_b = model_b.lookup(center_token)?;
    let hood_a = epsilon_neighborhood(model_a, center_a, config.epsilon)?;
    let hood_b = epsilon_neighborhood(model_b, center_b, config.epsilon)?;
    let in_b: HashSet<&str> = hood_b.member_ids().map(|id| model_b.token(id)).collect();
    let common: Vec<(usize, usize)> = hood_a
        .member_ids()
        .filter(|&id| in_b.contains(model_a.token(id)))
        .map(|id| (id, model_b.id(model_a.token(id)).expect("token in B")))
        .collect();
    if common.len() < config.min_terms {
        return Err(Error::InsufficientCommonNeighborhood {
            needed: config.min_terms,
            have: common.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(center_a as u64));
    let mut out_a = Vec::new();
    let mut out_b = Vec::new();
    sample_patterns(
        &mut rng,
        common.len(),
        config.term_range(common.len()),
        config.target_count,
        config.attempts(),
        |pattern| {
            let mut coef_a: Vec<(usize, i8)> =
                pattern.iter().map(|&(p, a)| (common[p].0, a)).collect();
            let mut coef_b: Vec<(usize, i8)> =
                pattern.iter().map(|&(p, a)| (common[p].1, a)).collect();
            coef_a.sort_unstable();
            coef_b.sort_unstable();
            let vec_a = combine(model_a, coef_a.iter().copied());
            let vec_b = combine(model_b, coef_b.iter().copied());
            if !is_valid(model_a, center_a, &vec_a, config.epsilon)
                || !is_valid(model_b, center_b, &vec_b, config.epsilon)
            {
                return false;
            }
            let label = latent_label(center_token, out_a.len());
            out_a.push(LatentWord {
                vector: vec_a,
                center: center_a,
                coefficients: coef_a,
                label: label.clone(),
            });
            out_b.push(LatentWord {
                vector: vec_b,
                center: center_b,
                coefficients: coef_b,
                label,
            });
            true
        },
    );
    Ok((out_a, out_b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding_io::{generate_synthetic_pair, SyntheticSpec};
    use crate::geometry::cosine_distance;

    fn pair(sigma: f64, seed: u64) -> (EmbeddingModel, EmbeddingModel) {
        generate_synthetic_pair(&SyntheticSpec {
            n: 300,
            m: 20,
            intrinsic_dim: 4,
            noise_sigma: sigma,
            seed,
        })
        .unwrap()
    }

    fn pattern_key(w: &LatentWord) -> Vec<(usize, i8)> {
        w.coefficients.clone()
    }

    #[test]
    fn zero_target_is_empty() {
        let (a, _) = pair(0.0, 1);
        let hood = epsilon_neighborhood(&a, 0, 0.3).unwrap();
        let out = generate_latent_words(&a, &hood, &LatentConfig::new(0.3, 0, 4)).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn generated_words_are_valid_exact_and_unique() {
        let (a, _) = pair(0.0, 2);
        let hood = epsilon_neighborhood(&a, 5, 0.3).unwrap();
        let out = generate_latent_words(&a, &hood, &LatentConfig::new(0.3, 40, 9)).unwrap();
        assert!(!out.is_empty());
        let members: HashSet<usize> = hood.member_ids().collect();
        let mut keys = HashSet::new();
        for (i, w) in out.iter().enumerate() {
            assert!(cosine_distance(&w.vector, a.row(5)).unwrap() < 0.3);
            assert_eq!(w.reconstruct(&a), w.vector);
            assert!(w.coefficients.iter().all(|(id, _)| members.contains(id)));
            assert!(w.coefficients.iter().all(|(_, s)| *s == 1 || *s == -1));
            assert!((2..=5).contains(&w.coefficients.len()));
            assert_eq!(w.label, format!("⟂w5:{i}"));
            assert!(keys.insert(pattern_key(w)));
        }
        let again = generate_latent_words(&a, &hood, &LatentConfig::new(0.3, 40, 9)).unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn two_term_sum_of_close_members_is_valid() {
        // Two unit vectors within eps/4 of the center: their plain sum stays
        // well inside the neighborhood.
        let eps: f64 = 0.2;
        let theta = (1.0 - eps / 4.0).acos() * 0.9;
        let rows = [
            1.0,
            0.0,
            theta.cos(),
            theta.sin(),
            theta.cos(),
            -theta.sin(),
            0.0,
            1.0,
        ];
        let model = EmbeddingModel::new(
            ["c", "p", "q", "far"].map(String::from).to_vec(),
            rows.to_vec(),
            2,
        )
        .unwrap();
        let hood = epsilon_neighborhood(&model, 0, eps).unwrap();
        assert_eq!(hood.len(), 2);
        let config = LatentConfig {
            max_attempts: Some(200),
            ..LatentConfig::new(eps, 4, 0)
        };
        let out = generate_latent_words(&model, &hood, &config).unwrap();
        // (+,+) is the only valid pattern: (+,-) and (-,+) point sideways and
        // (-,-) points away from the center.
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].coefficients, vec![(1, 1), (2, 1)]);
        let d = cosine_distance(&out[0].vector, model.row(0)).unwrap();
        assert!(d < 1e-12, "{d}");
    }

    #[test]
    fn too_small_neighborhood_and_bad_config_error() {
        let (a, _) = pair(0.0, 3);
        let hood = epsilon_neighborhood(&a, 0, 1e-9).unwrap();
        assert!(matches!(
            generate_latent_words(&a, &hood, &LatentConfig::new(0.3, 5, 0)),
            Err(Error::NeighborhoodTooSmall { .. })
        ));
        let hood = epsilon_neighborhood(&a, 0, 0.3).unwrap();
        let bad = LatentConfig {
            max_attempts: Some(1),
            ..LatentConfig::new(0.3, 5, 0)
        };
        assert!(generate_latent_words(&a, &hood, &bad).is_err());
        let bad = LatentConfig {
            min_terms: 1,
            ..LatentConfig::new(0.3, 5, 0)
        };
        assert!(generate_latent_words(&a, &hood, &bad).is_err());
        let bad = LatentConfig {
            min_terms: 4,
            max_terms: Some(3),
            ..LatentConfig::new(0.3, 5, 0)
        };
        assert!(generate_latent_words(&a, &hood, &bad).is_err());
    }

    #[test]
    fn pairing_with_identical_models_gives_identical_vectors() {
        let (a, _) = pair(0.0, 4);
        let (la, lb) = pair_latent_words(&a, &a, "w0", &LatentConfig::new(0.3, 20, 1)).unwrap();
        assert!(!la.is_empty());
        assert_eq!(la, lb);
    }

    #[test]
    fn pairing_is_valid_in_both_models() {
        let (a, b) = pair(0.05, 5);
        let config = LatentConfig::new(0.3, 30, 2);
        let (la, lb) = pair_latent_words(&a, &b, "w0", &config).unwrap();
        assert_eq!(la.len(), lb.len());
        assert!(!la.is_empty());
        for (x, y) in la.iter().zip(&lb) {
            assert_eq!(x.label, y.label);
            assert!(cosine_distance(&x.vector, a.row(x.center)).unwrap() < 0.3);
            assert!(cosine_distance(&y.vector, b.row(y.center)).unwrap() < 0.3);
            let tokens_a: Vec<(&str, i8)> =
                x.coefficients.iter().map(|&(id, s)| (a.token(id), s)).collect();
            let mut tokens_b: Vec<(&str, i8)> =
                y.coefficients.iter().map(|&(id, s)| (b.token(id), s)).collect();
            tokens_b.sort_by_key(|(t, _)| a.id(t));
            assert_eq!(tokens_a, tokens_b);
        }
    }

    #[test]
    fn pairing_requires_common_members() {
        let a = EmbeddingModel::new(
            ["c", "x", "y", "z"].map(String::from).to_vec(),
            vec![1.0, 0.0, 1.0, 0.1, 1.0, -0.1, 0.0, 1.0],
            2,
        )
        .unwrap();
        let b = EmbeddingModel::new(
            ["c", "x", "y", "z"].map(String::from).to_vec(),
            vec![1.0, 0.0, 0.0, 1.0, -1.0, 0.1, 1.0, 0.05],
            2,
        )
        .unwrap();
        assert!(matches!(
            pair_latent_words(&a, &b, "c", &LatentConfig::new(0.1, 5, 0)),
            Err(Error::InsufficientCommonNeighborhood { have: 0, .. })
        ));
        assert!(matches!(
            pair_latent_words(&a, &b, "nope", &LatentConfig::new(0.1, 5, 0)),
            Err(Error::UnknownToken(_))
        ));
    }
}

//! Experiment drivers behind the `latent-align` CLI.
//!
//! Every driver is a pure function of its [`ExperimentConfig`]; all randomness
//! is seeded from `config.seed` and every CSV starts with `# seed=<seed>`.

mod config;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::align::{build_correspondence, lra_align, AlignmentProblem, AlignmentResult};
use crate::embedding_io::{
    generate_synthetic_pair, load_word2vec_text, save_word2vec_text, subset_vocabulary, EmbeddingModel,
    SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::geometry::{epsilon_neighborhood, norm, rank_table, unit_normalize};
use crate::latent::{generate_latent_words, pair_latent_words, LatentWord};
use crate::metrics::{continuity, mean_std, overlap_profile, sample_words, trustworthiness, MetricsReport};

pub use config::{BackendKind, ExperimentConfig};

const EPSILON_STEP: f64 = 0.05;

pub fn load_model(path: &Path) -> Result<EmbeddingModel> {
    let file = File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    load_word2vec_text(BufReader::new(file))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn seed_line<W: Write>(w: &mut W, seed: u64) -> Result<()> {
    writeln!(w, "# seed={seed}")?;
    Ok(())
}

fn common_tokens(a: &EmbeddingModel, b: &EmbeddingModel) -> Vec<String> {
    a.vocab().iter().filter(|t| b.contains(t)).cloned().collect()
}

// ---------------------------------------------------------------- stability

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRow {
    pub pair: String,
    pub word: String,
    pub k: usize,
    pub overlap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityOutput {
    pub rows: Vec<StabilityRow>,
    /// `(k, mean, std)` over every pair and sampled word.
    pub summary: Vec<(usize, f64, f64)>,
}

/// Model pairs compared by the stability experiment: consecutive input
/// files, or one synthetic pair per trial.
fn stability_pairs(config: &ExperimentConfig) -> Result<Vec<(String, EmbeddingModel, EmbeddingModel)>> {
    match config.inputs.len() {
        0 => (0..config.trials as u64)
            .map(|t| {
                let (a, b) = generate_synthetic_pair(&config.synthetic_spec(t))?;
                Ok((t.to_string(), a, b))
            })
            .collect(),
        1 => Err(Error::Config(
            "stability needs at least 2 model files (or none, for synthetic trials)".into(),
        )),
        _ => {
            let models = config
                .inputs
                .iter()
                .map(|p| load_model(p))
                .collect::<Result<Vec<_>>>()?;
            Ok(models
                .windows(2)
                .enumerate()
                .map(|(i, w)| (format!("{}-{}", i, i + 1), w[0].clone(), w[1].clone()))
                .collect())
        }
    }
}

/// Neighborhood overlap between consecutive model instances for sampled
/// words at every configured k.
pub fn stability(config: &ExperimentConfig) -> Result<StabilityOutput> {
    config.validate()?;
    let pairs = stability_pairs(config)?;
    let mut rows = Vec::new();
    let mut per_k: Vec<Vec<f64>> = vec![Vec::new(); config.k_values.len()];
    for (index, (label, a, b)) in pairs.iter().enumerate() {
        let common = subset_vocabulary(a, &common_tokens(a, b))?;
        let words = sample_words(
            &common,
            config.sample,
            config.sample_count,
            config.seed.wrapping_add(index as u64),
        )?;
        let profile = overlap_profile(a, b, &words, &config.k_values)?;
        for (word, values) in words.iter().zip(profile) {
            for ((&k, v), bucket) in config.k_values.iter().zip(values).zip(per_k.iter_mut()) {
                bucket.push(v);
                rows.push(StabilityRow {
                    pair: label.clone(),
                    word: word.clone(),
                    k,
                    overlap: v,
                });
            }
        }
    }
    let summary = config
        .k_values
        .iter()
        .zip(&per_k)
        .map(|(&k, values)| {
            let (mean, std) = mean_std(values);
            (k, mean, std)
        })
        .collect();
    Ok(StabilityOutput { rows, summary })
}

/// Writes `stability.csv` and `stability_summary.csv` into `config.out`.
pub fn run_stability(config: &ExperimentConfig) -> Result<StabilityOutput> {
    let output = stability(config)?;
    let mut w = create(&config.out.join("stability.csv"))?;
    seed_line(&mut w, config.seed)?;
    writeln!(w, "pair,word,k,overlap")?;
    for r in &output.rows {
        writeln!(w, "{},{},{},{}", r.pair, r.word, r.k, r.overlap)?;
    }
    w.flush()?;
    let mut w = create(&config.out.join("stability_summary.csv"))?;
    seed_line(&mut w, config.seed)?;
    writeln!(w, "k,mean,std")?;
    for (k, mean, std) in &output.summary {
        writeln!(w, "{k},{mean},{std}")?;
    }
    w.flush()?;
    Ok(output)
}

// ---------------------------------------------------------------- alignment

/// One aligned neighborhood pair together with its evaluation.
#[derive(Debug, Clone)]
pub struct NeighborhoodAlignment {
    pub tokens_x: Vec<String>,
    pub tokens_y: Vec<String>,
    /// Tokens scored by T and C, present on both sides.
    pub scored: Vec<String>,
    pub result: AlignmentResult,
    /// `(k, trustworthiness, continuity)`, each averaged over the two sides.
    pub per_k: Vec<(usize, f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct AlignmentOutput {
    /// Neighborhood radius actually used (see `min-common`).
    pub epsilon: f64,
    pub baseline: NeighborhoodAlignment,
    pub latent: Option<NeighborhoodAlignment>,
    pub latent_pairs: usize,
}

fn unit_vector(v: &[f64]) -> Vec<f64> {
    let n = norm(v);
    v.iter().map(|x| x / n).collect()
}

fn stack_rows(rows: &[&[f64]]) -> DMatrix<f64> {
    let m = rows.first().map_or(0, |r| r.len());
    DMatrix::from_fn(rows.len(), m, |i, j| rows[i][j])
}

/// The two point sets of an alignment: the center plus its ε-neighborhood
/// in each model, followed by any latent anchors.
struct PointSets<'a> {
    tokens_x: Vec<String>,
    tokens_y: Vec<String>,
    rows_x: Vec<&'a [f64]>,
    rows_y: Vec<&'a [f64]>,
}

fn neighborhood_points<'a>(
    a: &'a EmbeddingModel,
    b: &'a EmbeddingModel,
    center: &str,
    epsilon: f64,
) -> Result<PointSets<'a>> {
    let side = |model: &'a EmbeddingModel| -> Result<(Vec<String>, Vec<&'a [f64]>)> {
        let c = model.lookup(center)?;
        let hood = epsilon_neighborhood(model, c, epsilon)?;
        let ids: Vec<usize> = std::iter::once(c).chain(hood.member_ids()).collect();
        Ok((
            ids.iter().map(|&i| model.token(i).to_string()).collect(),
            ids.iter().map(|&i| model.row(i)).collect(),
        ))
    };
    let (tokens_x, rows_x) = side(a)?;
    let (tokens_y, rows_y) = side(b)?;
    Ok(PointSets {
        tokens_x,
        tokens_y,
        rows_x,
        rows_y,
    })
}

/// Mean over both sides of T and C between original vectors and aligned
/// coordinates of `scored` tokens.
fn score_alignment(
    x_vectors: &[&[f64]],
    y_vectors: &[&[f64]],
    tokens_x: &[String],
    tokens_y: &[String],
    scored: &[String],
    result: &AlignmentResult,
    k_values: &[usize],
) -> Result<Vec<(usize, f64, f64)>> {
    let side = |vectors: &[&[f64]], tokens: &[String], coords: DMatrix<f64>| -> Result<_> {
        let pos: Vec<usize> = scored
            .iter()
            .map(|t| tokens.iter().position(|x| x == t).expect("scored token on both sides"))
            .collect();
        let high = EmbeddingModel::from_matrix(
            scored.to_vec(),
            &stack_rows(&pos.iter().map(|&p| vectors[p]).collect::<Vec<_>>()),
        )?;
        let low = EmbeddingModel::from_matrix(scored.to_vec(), &coords.select_rows(&pos))?;
        Ok((rank_table(&high)?, rank_table(&low)?))
    };
    let (hx, lx) = side(x_vectors, tokens_x, result.x_coordinates())?;
    let (hy, ly) = side(y_vectors, tokens_y, result.y_coordinates())?;
    k_values
        .iter()
        .map(|&k| {
            let t = 0.5 * (trustworthiness(&hx, &lx, k)? + trustworthiness(&hy, &ly, k)?);
            let c = 0.5 * (continuity(&hx, &lx, k)? + continuity(&hy, &ly, k)?);
            Ok((k, t, c))
        })
        .collect()
}

fn align_sets(
    sets: &PointSets<'_>,
    anchors: Option<(&[LatentWord], &[LatentWord])>,
    config: &ExperimentConfig,
) -> Result<NeighborhoodAlignment> {
    let mut tokens_x = sets.tokens_x.clone();
    let mut tokens_y = sets.tokens_y.clone();
    let mut rows_x = sets.rows_x.clone();
    let mut rows_y = sets.rows_y.clone();
    let mut pairs = Vec::new();
    // With normalization on, anchors go onto the unit sphere with the words;
    // otherwise their 2-5x larger norms dominate the reconstruction.
    let unit_anchors: Vec<(Vec<f64>, Vec<f64>)> = match anchors {
        Some((la, lb)) if config.normalize => la
            .iter()
            .zip(lb)
            .map(|(wa, wb)| (unit_vector(&wa.vector), unit_vector(&wb.vector)))
            .collect(),
        _ => Vec::new(),
    };
    if let Some((la, lb)) = anchors {
        for (wa, wb) in la.iter().zip(lb) {
            tokens_x.push(wa.label.clone());
            tokens_y.push(wb.label.clone());
            match unit_anchors.get(pairs.len()) {
                Some((ua, ub)) => {
                    rows_x.push(ua);
                    rows_y.push(ub);
                }
                None => {
                    rows_x.push(&wa.vector);
                    rows_y.push(&wb.vector);
                }
            }
            pairs.push((wa.label.clone(), wb.label.clone()));
        }
    }
    let correspondence = build_correspondence(&tokens_x, &tokens_y, &pairs)?;
    let problem = AlignmentProblem {
        x: stack_rows(&rows_x),
        y: stack_rows(&rows_y),
        correspondence,
        mu: config.mu,
        d: config.d,
        backend: config.weight_backend(),
    };
    let result = lra_align(&problem)?;

    let mut scored: Vec<String> = sets
        .tokens_x
        .iter()
        .filter(|t| sets.tokens_y.contains(t))
        .cloned()
        .collect();
    if config.latent_metrics {
        scored.extend(pairs.iter().map(|(l, _)| l.clone()));
    }
    let per_k = score_alignment(&rows_x, &rows_y, &tokens_x, &tokens_y, &scored, &result, &config.k_values)?;
    Ok(NeighborhoodAlignment {
        tokens_x,
        tokens_y,
        scored,
        result,
        per_k,
    })
}

/// Number of tokens shared by the ε-neighborhoods of `center` in `a` and
/// `b`, the center itself excluded.
pub fn common_neighborhood_size(a: &EmbeddingModel, b: &EmbeddingModel, center: &str, epsilon: f64) -> Result<usize> {
    let sets = neighborhood_points(a, b, center, epsilon)?;
    Ok(sets.tokens_x[1..].iter().filter(|t| sets.tokens_y.contains(t)).count())
}

/// Smallest radius on the grid `start, start + step, ...` (capped at 2)
/// whose neighborhoods share at least `min_common` tokens.
pub fn epsilon_for_common(
    a: &EmbeddingModel,
    b: &EmbeddingModel,
    center: &str,
    min_common: usize,
    start: f64,
    step: f64,
) -> Result<f64> {
    if !(start > 0.0 && step > 0.0) {
        return Err(Error::InvalidArgument("epsilon grid needs start > 0 and step > 0".into()));
    }
    let mut have = 0;
    for i in 0.. {
        let epsilon = (start + step * i as f64).min(2.0);
        have = common_neighborhood_size(a, b, center, epsilon)?;
        if have >= min_common {
            return Ok(epsilon);
        }
        if epsilon >= 2.0 {
            break;
        }
    }
    Err(Error::InsufficientCommonNeighborhood {
        needed: min_common,
        have,
    })
}

/// Aligns the ε-neighborhoods of one center word in two models, once as is
/// and once with paired latent anchors appended.
///
/// With `min-common` set, `epsilon` is only the starting radius: it grows in
/// steps of 0.05 until the neighborhoods share that many words.
pub fn align_pair(a: &EmbeddingModel, b: &EmbeddingModel, config: &ExperimentConfig) -> Result<AlignmentOutput> {
    config.validate()?;
    let (a, b) = if config.normalize {
        (unit_normalize(a)?, unit_normalize(b)?)
    } else {
        (a.clone(), b.clone())
    };
    let center = match &config.center {
        Some(c) => c.clone(),
        None => a
            .vocab()
            .first()
            .cloned()
            .ok_or_else(|| Error::Config("empty model".into()))?,
    };
    let mut config = config.clone();
    if let Some(min_common) = config.min_common {
        config.epsilon = epsilon_for_common(&a, &b, &center, min_common, config.epsilon, EPSILON_STEP)?;
    }
    let sets = neighborhood_points(&a, &b, &center, config.epsilon)?;
    let common = sets.tokens_x.iter().filter(|t| sets.tokens_y.contains(t)).count();
    // the center itself is always shared
    if common < 2 {
        return Err(Error::InsufficientCommonNeighborhood {
            needed: 1,
            have: common.saturating_sub(1),
        });
    }
    let baseline = align_sets(&sets, None, &config)?;
    let (latent, latent_pairs) = if config.latent {
        let (la, lb) = pair_latent_words(&a, &b, &center, &config.latent_config())?;
        let run = align_sets(&sets, Some((&la, &lb)), &config)?;
        (Some(run), la.len())
    } else {
        (None, 0)
    };
    Ok(AlignmentOutput {
        epsilon: config.epsilon,
        baseline,
        latent,
        latent_pairs,
    })
}

fn alignment_inputs(config: &ExperimentConfig) -> Result<(EmbeddingModel, EmbeddingModel)> {
    match config.inputs.as_slice() {
        [] => generate_synthetic_pair(&config.synthetic_spec(0)),
        [a, b] => Ok((load_model(a)?, load_model(b)?)),
        other => Err(Error::Config(format!(
            "align needs exactly 2 model files (or none, for a synthetic pair), got {}",
            other.len()
        ))),
    }
}

/// Writes `align.csv` (`k,variant,trustworthiness,continuity`) and the
/// joint coordinates of each variant.
pub fn run_alignment(config: &ExperimentConfig) -> Result<AlignmentOutput> {
    let (a, b) = alignment_inputs(config)?;
    let output = align_pair(&a, &b, config)?;
    let variants: Vec<(&str, &NeighborhoodAlignment)> = std::iter::once(("baseline", &output.baseline))
        .chain(output.latent.as_ref().map(|l| ("latent", l)))
        .collect();

    let mut w = create(&config.out.join("align.csv"))?;
    seed_line(&mut w, config.seed)?;
    writeln!(w, "# epsilon={}", output.epsilon)?;
    writeln!(w, "k,variant,trustworthiness,continuity")?;
    for (name, run) in &variants {
        for (k, t, c) in &run.per_k {
            writeln!(w, "{k},{name},{t},{c}")?;
        }
    }
    w.flush()?;
    for (name, run) in &variants {
        let w = create(&config.out.join(format!("alignment_{name}.csv")))?;
        run.result.write_csv(&run.tokens_x, &run.tokens_y, w)?;
    }
    Ok(output)
}

// ------------------------------------------------------------------- latent

/// Latent words around the configured center of the first model.
pub fn latent_words(config: &ExperimentConfig) -> Result<(EmbeddingModel, Vec<LatentWord>)> {
    let model = match config.inputs.first() {
        Some(path) => load_model(path)?,
        None => generate_synthetic_pair(&config.synthetic_spec(0))?.0,
    };
    let center = match &config.center {
        Some(c) => model.lookup(c)?,
        None => 0,
    };
    let hood = epsilon_neighborhood(&model, center, config.epsilon)?;
    let words = generate_latent_words(&model, &hood, &config.latent_config())?;
    Ok((model, words))
}

/// Writes the latent words as `latent.txt` (word2vec text) plus the
/// provenance sidecar `latent_provenance.csv`
/// (`label,center,sources,alphas`, lists `;`-separated).
pub fn run_latent_dump(config: &ExperimentConfig) -> Result<Vec<LatentWord>> {
    let (model, words) = latent_words(config)?;
    let dumped = EmbeddingModel::new(
        words.iter().map(|w| w.label.clone()).collect(),
        words.iter().flat_map(|w| w.vector.iter().copied()).collect(),
        model.dim(),
    )?;
    save_word2vec_text(&dumped, create(&config.out.join("latent.txt"))?)?;

    let mut w = create(&config.out.join("latent_provenance.csv"))?;
    seed_line(&mut w, config.seed)?;
    writeln!(w, "label,center,sources,alphas")?;
    for word in &words {
        let sources: Vec<&str> = word.coefficients.iter().map(|(id, _)| model.token(*id)).collect();
        let alphas: Vec<String> = word.coefficients.iter().map(|(_, a)| a.to_string()).collect();
        writeln!(
            w,
            "{},{},{},{}",
            word.label,
            model.token(word.center),
            sources.join(";"),
            alphas.join(";")
        )?;
    }
    w.flush()?;
    Ok(words)
}

// -------------------------------------------------------------------- synth

/// Writes a synthetic pair to two word2vec text files.
pub fn run_synth(spec: &SyntheticSpec, path_a: &Path, path_b: &Path) -> Result<()> {
    let (a, b) = generate_synthetic_pair(spec)?;
    save_word2vec_text(&a, create(path_a)?)?;
    save_word2vec_text(&b, create(path_b)?)?;
    Ok(())
}

pub fn synth_paths(config: &ExperimentConfig) -> (PathBuf, PathBuf) {
    (config.out.join("model_a.txt"), config.out.join("model_b.txt"))
}

// ------------------------------------------------------------------ metrics

/// T and C of model B against model A (as the high space) over their common
/// vocabulary, plus the overlap of sampled words at `overlap_k`.
pub fn metrics(config: &ExperimentConfig) -> Result<MetricsReport> {
    config.validate()?;
    let (a, b) = alignment_inputs(config)?;
    let common = common_tokens(&a, &b);
    let high = subset_vocabulary(&a, &common)?;
    let low = subset_vocabulary(&b, &common)?;
    // subset keeps each model's own order; re-order B to A's order.
    let low = EmbeddingModel::from_matrix(
        common.clone(),
        &stack_rows(&common.iter().map(|t| low.row(low.id(t).expect("common"))).collect::<Vec<_>>()),
    )?;
    let words = sample_words(&high, config.sample, config.sample_count, config.seed)?;
    let overlap = overlap_profile(&high, &low, &words, &[config.overlap_k])?
        .into_iter()
        .zip(&words)
        .map(|(v, w)| (w.clone(), v[0]))
        .collect();
    MetricsReport::compute(&rank_table(&high)?, &rank_table(&low)?, &config.k_values, overlap)
}

/// Writes `metrics_tc.csv` and `metrics_overlap.csv`.
pub fn run_metrics(config: &ExperimentConfig) -> Result<MetricsReport> {
    let report = metrics(config)?;
    let mut w = create(&config.out.join("metrics_tc.csv"))?;
    seed_line(&mut w, config.seed)?;
    report.write_tc_csv(&mut w)?;
    let mut w = create(&config.out.join("metrics_overlap.csv"))?;
    seed_line(&mut w, config.seed)?;
    report.write_overlap_csv(&mut w)?;
    Ok(report)
}

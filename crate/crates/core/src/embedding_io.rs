//! Embedding models: word2vec text I/O, vocabulary subsetting and the
//! seeded synthetic "retraining" generator.
//!
//! The text format is the plain word2vec export: a header line `n m`
//! followed by `n` lines of `token v1 ... vm`, single-space separated.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

const UNIT_NORM_TOL: f64 = 1e-9;

/// An ordered vocabulary with one dense vector per token.
///
/// Vectors are stored row-major; row `i` belongs to `vocab()[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
    dim: usize,
    norms: Vec<f64>,
    normalized: bool,
}

impl EmbeddingModel {
    /// Builds a model from tokens and row-major data, checking every invariant.
    pub fn new(vocab: Vec<String>, data: Vec<f64>, dim: usize) -> Result<Self> {
        if data.len() != vocab.len() * dim {
            return Err(Error::Dimension(format!(
                "{} tokens x {} dims needs {} values, got {}",
                vocab.len(),
                dim,
                vocab.len() * dim,
                data.len()
            )));
        }
        if dim == 0 && !vocab.is_empty() {
            return Err(Error::Dimension("vector dimension must be positive".into()));
        }
        let mut index = HashMap::with_capacity(vocab.len());
        for (i, tok) in vocab.iter().enumerate() {
            if !is_valid_token(tok) {
                return Err(Error::InvalidToken(tok.clone()));
            }
            if index.insert(tok.clone(), i).is_some() {
                return Err(Error::DuplicateToken(tok.clone()));
            }
        }
        let mut norms = Vec::with_capacity(vocab.len());
        for (i, row) in data.chunks(dim.max(1)).enumerate().take(vocab.len()) {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row: i });
            }
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::ZeroVector {
                    row: i,
                    token: vocab[i].clone(),
                });
            }
            norms.push(norm);
        }
        let normalized = norms.iter().all(|n| (n - 1.0).abs() <= UNIT_NORM_TOL);
        Ok(Self {
            vocab,
            index,
            data,
            dim,
            norms,
            normalized,
        })
    }

    /// Builds a model from an `n x m` matrix whose rows are the vectors.
    pub fn from_matrix(vocab: Vec<String>, vectors: &DMatrix<f64>) -> Result<Self> {
        if vectors.nrows() != vocab.len() {
            return Err(Error::Dimension(format!(
                "{} tokens but {} rows",
                vocab.len(),
                vectors.nrows()
            )));
        }
        let dim = vectors.ncols();
        let mut data = Vec::with_capacity(vocab.len() * dim);
        for row in vectors.row_iter() {
            data.extend(row.iter());
        }
        Self::new(vocab, data, dim)
    }

    /// Number of tokens.
    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    /// Ambient dimension `m`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn token(&self, id: usize) -> &str {
        &self.vocab[id]
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn row(&self, id: usize) -> &[f64] {
        &self.data[id * self.dim..(id + 1) * self.dim]
    }

    /// Euclidean norm of row `id`, cached at construction.
    pub fn norm(&self, id: usize) -> f64 {
        self.norms[id]
    }

    /// True iff every row has unit norm within 1e-9.
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Copy of the vectors as an `n x m` matrix.
    pub fn vectors(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.len(), self.dim, &self.data)
    }

    pub(crate) fn check_id(&self, id: usize) -> Result<()> {
        if id < self.len() {
            Ok(())
        } else {
            Err(Error::UnknownId(id))
        }
    }

    pub(crate) fn lookup(&self, token: &str) -> Result<usize> {
        self.id(token)
            .ok_or_else(|| Error::UnknownToken(token.to_string()))
    }
}

fn is_valid_token(tok: &str) -> bool {
    !tok.is_empty() && !tok.chars().any(char::is_whitespace)
}

/// Parses a word2vec text model.
pub fn load_word2vec_text<R: BufRead>(source: R) -> Result<EmbeddingModel> {
    let mut lines = source.lines();
    let header = match lines.next() {
        Some(line) => line?,
        None => {
            return Err(Error::Parse {
                line: 1,
                msg: "missing header".into(),
            })
        }
    };
    let fields: Vec<&str> = header.split(' ').collect();
    let (n, m) = match fields.as_slice() {
        [n, m] => match (n.parse::<usize>(), m.parse::<usize>()) {
            (Ok(n), Ok(m)) => (n, m),
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("malformed header `{header}`"),
                })
            }
        },
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("malformed header `{header}`"),
            })
        }
    };

    let mut vocab = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * m);
    let mut seen = HashSet::with_capacity(n);
    for row in 0..n {
        let lineno = row + 2;
        let line = match lines.next() {
            Some(line) => line?,
            None => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected {n} rows, file ends after {row}"),
                })
            }
        };
        let mut parts = line.split(' ');
        let token = parts.next().unwrap_or_default();
        if !is_valid_token(token) {
            return Err(Error::InvalidToken(token.to_string()));
        }
        if !seen.insert(token.to_string()) {
            return Err(Error::DuplicateToken(token.to_string()));
        }
        let start = data.len();
        for part in parts {
            let v: f64 = part.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad number `{part}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite { row });
            }
            data.push(v);
        }
        let count = data.len() - start;
        if count != m {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("wrong value count: expected {m}, got {count}"),
            });
        }
        vocab.push(token.to_string());
    }
    for line in lines {
        if !line?.is_empty() {
            return Err(Error::Parse {
                line: n + 2,
                msg: format!("trailing data after {n} rows"),
            });
        }
    }
    EmbeddingModel::new(vocab, data, m)
}

/// Writes a model in word2vec text format with round-trip exact floats.
pub fn save_word2vec_text<W: Write>(model: &EmbeddingModel, mut sink: W) -> Result<()> {
    writeln!(sink, "{} {}", model.len(), model.dim())?;
    for (i, tok) in model.vocab().iter().enumerate() {
        sink.write_all(tok.as_bytes())?;
        for v in model.row(i) {
            write!(sink, " {v}")?;
        }
        sink.write_all(b"\n")?;
    }
    sink.flush()?;
    Ok(())
}

/// Restricts `model` to `words`, keeping the model's own row order.
pub fn subset_vocabulary<S: AsRef<str>>(model: &EmbeddingModel, words: &[S]) -> Result<EmbeddingModel> {
    let mut keep = vec![false; model.len()];
    for w in words {
        keep[model.lookup(w.as_ref())?] = true;
    }
    let mut vocab = Vec::new();
    let mut data = Vec::new();
    for (i, _) in keep.iter().enumerate().filter(|(_, k)| **k) {
        vocab.push(model.token(i).to_string());
        data.extend_from_slice(model.row(i));
    }
    EmbeddingModel::new(vocab, data, model.dim())
}

/// Parameters of the synthetic "retrained pair" generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub m: usize,
    pub intrinsic_dim: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        if self.intrinsic_dim == 0 || self.intrinsic_dim > self.m {
            return Err(Error::InvalidArgument(format!(
                "intrinsic_dim must be in 1..={}, got {}",
                self.m, self.intrinsic_dim
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise_sigma must be finite and >= 0, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    // Filled row by row so the stream layout does not depend on storage order.
    let mut values = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        values.push(StandardNormal.sample(rng));
    }
    DMatrix::from_row_slice(rows, cols, &values)
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with the
/// sign of R's diagonal folded into Q).
pub(crate) fn random_orthogonal(rng: &mut ChaCha8Rng, m: usize) -> DMatrix<f64> {
    let qr = gaussian_matrix(rng, m, m).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..m {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Generates a model and a "retrained" copy of it.
///
/// The first model's rows are Gaussian points on a random
/// `intrinsic_dim`-dimensional linear subspace of `R^m`. The second is an
/// independent random rotation of the first plus i.i.d. Gaussian noise of
/// standard deviation `noise_sigma`. Both share the vocabulary `w0..w{n-1}`.
pub fn generate_synthetic_pair(spec: &SyntheticSpec) -> Result<(EmbeddingModel, EmbeddingModel)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let basis = {
        let qr = gaussian_matrix(&mut rng, spec.m, spec.intrinsic_dim).qr();
        qr.q()
    };
    let coords = gaussian_matrix(&mut rng, spec.n, spec.intrinsic_dim);
    let first = &coords * basis.transpose();

    let rotation = random_orthogonal(&mut rng, spec.m);
    let mut second = &first * rotation.transpose();
    if spec.noise_sigma > 0.0 {
        second += gaussian_matrix(&mut rng, spec.n, spec.m) * spec.noise_sigma;
    }

    let vocab: Vec<String> = (0..spec.n).map(|i| format!("w{i}")).collect();
    Ok((
        EmbeddingModel::from_matrix(vocab.clone(), &first)?,
        EmbeddingModel::from_matrix(vocab, &second)?,
    ))
}

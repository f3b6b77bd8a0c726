//! Python bindings. Matrices cross the boundary as lists of rows.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;

use latent_align::align::{self, AlignmentProblem, WeightBackend};
use latent_align::embedding_io::{self, SyntheticSpec};
use latent_align::geometry;
use latent_align::harness::{self, ExperimentConfig};
use latent_align::latent::{self, LatentConfig};
use latent_align::metrics;
use latent_align::Error;
use nalgebra::DMatrix;
use pyo3::exceptions::{PyIOError, PyKeyError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        Error::UnknownToken(_) => PyKeyError::new_err(e.to_string()),
        Error::NotConverged { .. } | Error::Eigensolver(_) => PyRuntimeError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(PyValueError::new_err("rows must all have the same length"));
    }
    Ok(DMatrix::from_fn(rows.len(), m, |i, j| rows[i][j]))
}

/// `(k, trustworthiness, continuity)` rows.
type Scores = Vec<(usize, f64, f64)>;

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// A word-embedding model: a vocabulary with one vector per token.
#[pyclass(name = "EmbeddingModel", module = "latent_align", frozen)]
struct PyModel(embedding_io::EmbeddingModel);

#[pymethods]
impl PyModel {
    #[new]
    fn new(vocab: Vec<String>, vectors: Vec<Vec<f64>>) -> PyResult<Self> {
        let m = matrix(vectors)?;
        embedding_io::EmbeddingModel::from_matrix(vocab, &m).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let f = File::open(path).map_err(|e| to_py(e.into()))?;
        embedding_io::load_word2vec_text(BufReader::new(f)).map(Self).map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        let f = File::create(path).map_err(|e| to_py(e.into()))?;
        embedding_io::save_word2vec_text(&self.0, BufWriter::new(f)).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __contains__(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    fn __repr__(&self) -> String {
        format!("EmbeddingModel(len={}, dim={})", self.0.len(), self.0.dim())
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn vocab(&self) -> Vec<String> {
        self.0.vocab().to_vec()
    }

    #[getter]
    fn normalized(&self) -> bool {
        self.0.is_normalized()
    }

    fn vector(&self, token: &str) -> PyResult<Vec<f64>> {
        let id = self.id(token)?;
        Ok(self.0.row(id).to_vec())
    }

    fn vectors(&self) -> Vec<Vec<f64>> {
        rows(&self.0.vectors())
    }

    fn unit_normalized(&self) -> PyResult<Self> {
        geometry::unit_normalize(&self.0).map(Self).map_err(to_py)
    }

    fn subset(&self, words: Vec<String>) -> PyResult<Self> {
        embedding_io::subset_vocabulary(&self.0, &words).map(Self).map_err(to_py)
    }

    /// Tokens within cosine distance `epsilon` of `center`, with their
    /// similarities, most similar first.
    fn neighborhood(&self, center: &str, epsilon: f64) -> PyResult<Vec<(String, f64)>> {
        let hood = geometry::epsilon_neighborhood(&self.0, self.id(center)?, epsilon).map_err(to_py)?;
        Ok(self.named(&hood.members))
    }

    fn k_nearest(&self, center: &str, k: usize) -> PyResult<Vec<(String, f64)>> {
        let nn = geometry::k_nearest(&self.0, self.id(center)?, k).map_err(to_py)?;
        Ok(self.named(&nn))
    }

    /// Latent words around `center`, each a `±1` sum of neighborhood members.
    #[pyo3(signature = (center, epsilon, count, seed = 0))]
    fn latent_words(&self, center: &str, epsilon: f64, count: usize, seed: u64) -> PyResult<Vec<PyLatentWord>> {
        let hood = geometry::epsilon_neighborhood(&self.0, self.id(center)?, epsilon).map_err(to_py)?;
        let words = latent::generate_latent_words(&self.0, &hood, &LatentConfig::new(epsilon, count, seed))
            .map_err(to_py)?;
        Ok(words.into_iter().map(|w| PyLatentWord::from_word(&self.0, w)).collect())
    }
}

impl PyModel {
    fn id(&self, token: &str) -> PyResult<usize> {
        self.0.id(token).ok_or_else(|| to_py(Error::UnknownToken(token.to_string())))
    }

    fn named(&self, pairs: &[(usize, f64)]) -> Vec<(String, f64)> {
        pairs.iter().map(|&(id, s)| (self.0.token(id).to_string(), s)).collect()
    }
}

#[pyclass(name = "LatentWord", module = "latent_align", frozen, get_all)]
struct PyLatentWord {
    label: String,
    center: String,
    vector: Vec<f64>,
    sources: Vec<(String, i8)>,
}

impl PyLatentWord {
    fn from_word(model: &embedding_io::EmbeddingModel, w: latent::LatentWord) -> Self {
        Self {
            center: model.token(w.center).to_string(),
            sources: w.coefficients.iter().map(|&(id, a)| (model.token(id).to_string(), a)).collect(),
            label: w.label,
            vector: w.vector,
        }
    }
}

#[pymethods]
impl PyLatentWord {
    fn __repr__(&self) -> String {
        format!("LatentWord({:?}, terms={})", self.label, self.sources.len())
    }
}

/// Corresponding latent words of two models around a shared center.
#[pyfunction]
#[pyo3(signature = (a, b, center, epsilon, count, seed = 0))]
fn pair_latent_words(
    a: &PyModel,
    b: &PyModel,
    center: &str,
    epsilon: f64,
    count: usize,
    seed: u64,
) -> PyResult<(Vec<PyLatentWord>, Vec<PyLatentWord>)> {
    let (wa, wb) = latent::pair_latent_words(&a.0, &b.0, center, &LatentConfig::new(epsilon, count, seed))
        .map_err(to_py)?;
    Ok((
        wa.into_iter().map(|w| PyLatentWord::from_word(&a.0, w)).collect(),
        wb.into_iter().map(|w| PyLatentWord::from_word(&b.0, w)).collect(),
    ))
}

#[pyfunction]
#[pyo3(signature = (n, m, intrinsic_dim, sigma, seed = 0))]
fn synthetic_pair(n: usize, m: usize, intrinsic_dim: usize, sigma: f64, seed: u64) -> PyResult<(PyModel, PyModel)> {
    let spec = SyntheticSpec {
        n,
        m,
        intrinsic_dim,
        noise_sigma: sigma,
        seed,
    };
    let (a, b) = embedding_io::generate_synthetic_pair(&spec).map_err(to_py)?;
    Ok((PyModel(a), PyModel(b)))
}

#[pyfunction]
fn cosine_similarity(u: Vec<f64>, v: Vec<f64>) -> PyResult<f64> {
    geometry::cosine_similarity(&u, &v).map_err(to_py)
}

/// LLE reconstruction weights as a dense matrix.
#[pyfunction]
#[pyo3(signature = (points, k = 10, reg = 1e-3))]
fn lle_weights(points: Vec<Vec<f64>>, k: usize, reg: f64) -> PyResult<Vec<Vec<f64>>> {
    let w = align::lle_weights(&matrix(points)?, k, reg).map_err(to_py)?;
    Ok(rows(&w.to_dense()))
}

/// Nuclear-norm regularized reconstruction weights; returns
/// `(weights, iterations)`.
#[pyfunction]
#[pyo3(signature = (points, lambda_ = None))]
fn low_rank_weights(points: Vec<Vec<f64>>, lambda_: Option<f64>) -> PyResult<(Vec<Vec<f64>>, usize)> {
    let p = matrix(points)?;
    let lambda = lambda_.unwrap_or_else(|| align::default_lambda(&p));
    let out = align::low_rank_weights(&p, lambda, &align::AdmmParams::default()).map_err(to_py)?;
    Ok((rows(&out.weights), out.iterations))
}

/// Aligns two point sets; `pairs` lists corresponding `(row_x, row_y)`.
/// Returns `(x_coordinates, y_coordinates, eigenvalues)`.
#[pyfunction]
#[pyo3(signature = (x, y, pairs, d, mu = 0.5, backend = "lowrank", k = 10, lambda_ = None))]
#[allow(clippy::too_many_arguments, clippy::type_complexity)]
fn lra_align(
    x: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    pairs: Vec<(usize, usize)>,
    d: usize,
    mu: f64,
    backend: &str,
    k: usize,
    lambda_: Option<f64>,
) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>)> {
    let (x, y) = (matrix(x)?, matrix(y)?);
    let backend = match backend {
        "lowrank" => WeightBackend::LowRank {
            lambda: lambda_,
            admm: align::AdmmParams::default(),
        },
        "lle" => WeightBackend::Lle { k, reg: 1e-3 },
        other => return Err(PyValueError::new_err(format!("unknown backend `{other}`"))),
    };
    let entries = pairs.into_iter().map(|(i, j)| (i, j, 1.0)).collect();
    let correspondence = align::CorrespondenceMatrix::new(x.nrows(), y.nrows(), entries).map_err(to_py)?;
    let problem = AlignmentProblem {
        x,
        y,
        correspondence,
        mu,
        d,
        backend,
    };
    let r = align::lra_align(&problem).map_err(to_py)?;
    Ok((rows(&r.x_coordinates()), rows(&r.y_coordinates()), r.eigenvalues))
}

fn rank_pair(high: Vec<Vec<f64>>, low: Vec<Vec<f64>>) -> PyResult<(geometry::RankTable, geometry::RankTable)> {
    let table = |p: Vec<Vec<f64>>| -> PyResult<geometry::RankTable> {
        let m = matrix(p)?;
        let vocab = (0..m.nrows()).map(|i| format!("p{i}")).collect();
        let model = embedding_io::EmbeddingModel::from_matrix(vocab, &m).map_err(to_py)?;
        geometry::rank_table(&model).map_err(to_py)
    };
    Ok((table(high)?, table(low)?))
}

#[pyfunction]
fn trustworthiness(high: Vec<Vec<f64>>, low: Vec<Vec<f64>>, k: usize) -> PyResult<f64> {
    let (h, l) = rank_pair(high, low)?;
    metrics::trustworthiness(&h, &l, k).map_err(to_py)
}

#[pyfunction]
fn continuity(high: Vec<Vec<f64>>, low: Vec<Vec<f64>>, k: usize) -> PyResult<f64> {
    let (h, l) = rank_pair(high, low)?;
    metrics::continuity(&h, &l, k).map_err(to_py)
}

#[pyfunction]
fn neighborhood_overlap(a: &PyModel, b: &PyModel, words: Vec<String>, k: usize) -> PyResult<Vec<(String, f64)>> {
    metrics::neighborhood_overlap(&a.0, &b.0, &words, k).map_err(to_py)
}

/// Experiment configuration; keys are those of the CLI config files.
#[pyclass(name = "ExperimentConfig", module = "latent_align")]
struct PyConfig(ExperimentConfig);

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (**settings))]
    fn new(settings: Option<HashMap<String, Bound<'_, PyAny>>>) -> PyResult<Self> {
        let mut cfg = Self(ExperimentConfig::default());
        for (key, value) in settings.unwrap_or_default() {
            cfg.set(&key, &value.str()?.to_cow()?)?;
        }
        Ok(cfg)
    }

    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        ExperimentConfig::from_file(&path).map(Self).map_err(to_py)
    }

    fn set(&mut self, key: &str, value: &str) -> PyResult<()> {
        self.0.set(key, value).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }

    /// Writes stability CSVs; returns `[(k, mean, std)]`.
    fn run_stability(&self) -> PyResult<Vec<(usize, f64, f64)>> {
        Ok(harness::run_stability(&self.0).map_err(to_py)?.summary)
    }

    /// Writes alignment CSVs; returns `{"baseline": [(k, T, C)], "latent": ...}`.
    fn run_alignment(&self) -> PyResult<HashMap<String, Scores>> {
        let out = harness::run_alignment(&self.0).map_err(to_py)?;
        let mut map = HashMap::from([("baseline".to_string(), out.baseline.per_k)]);
        if let Some(latent) = out.latent {
            map.insert("latent".into(), latent.per_k);
        }
        Ok(map)
    }

    /// Writes metrics CSVs; returns `[(k, T, C)]`.
    fn run_metrics(&self) -> PyResult<Vec<(usize, f64, f64)>> {
        Ok(harness::run_metrics(&self.0).map_err(to_py)?.per_k)
    }

    /// Writes `latent.txt` and its provenance; returns the labels.
    fn run_latent_dump(&self) -> PyResult<Vec<String>> {
        let words = harness::run_latent_dump(&self.0).map_err(to_py)?;
        Ok(words.into_iter().map(|w| w.label).collect())
    }

    /// Writes the first synthetic pair; returns the two paths.
    fn run_synth(&self) -> PyResult<(PathBuf, PathBuf)> {
        self.0.validate().map_err(to_py)?;
        std::fs::create_dir_all(&self.0.out).map_err(|e| to_py(e.into()))?;
        let (a, b) = harness::synth_paths(&self.0);
        harness::run_synth(&self.0.synthetic_spec(0), &a, &b).map_err(to_py)?;
        Ok((a, b))
    }
}

#[pymodule(name = "latent_align")]
fn latent_align_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyLatentWord>()?;
    m.add_class::<PyConfig>()?;
    m.add_function(wrap_pyfunction!(synthetic_pair, m)?)?;
    m.add_function(wrap_pyfunction!(pair_latent_words, m)?)?;
    m.add_function(wrap_pyfunction!(cosine_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(lle_weights, m)?)?;
    m.add_function(wrap_pyfunction!(low_rank_weights, m)?)?;
    m.add_function(wrap_pyfunction!(lra_align, m)?)?;
    m.add_function(wrap_pyfunction!(trustworthiness, m)?)?;
    m.add_function(wrap_pyfunction!(continuity, m)?)?;
    m.add_function(wrap_pyfunction!(neighborhood_overlap, m)?)?;
    Ok(())
}

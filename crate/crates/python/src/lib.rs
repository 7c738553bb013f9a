//! Python bindings. Distributions cross the boundary as flat lists in the
//! library's row-major order together with their cardinalities.

use std::collections::HashMap;

use lodkit::experiment::{oracle_report, table2_report};
use lodkit::ingestion::{parse_idx_images, quantize_and_extract, synthetic_dataset, PatchSpec};
use lodkit::model_io::{model_from_json, model_to_json};
use lodkit::stacking::{connected_scores, fit_higher as core_fit_higher, lower_connected_scores, pushforward_latent};
use lodkit::training::{random_init, TrainMode};
use lodkit::{
    measures, EvalScores, GenerativeModel, ModelKind, ModelShape, Pmf, StackedModel, StateSpace, TrainConfig,
};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: lodkit::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn kind_of(s: &str) -> PyResult<ModelKind> {
    s.parse().map_err(err)
}

fn pmf_over(space: &StateSpace, probs: Vec<f64>) -> PyResult<Pmf> {
    Pmf::from_weights(space.clone(), probs).map_err(err)
}

fn scores_dict(s: EvalScores) -> HashMap<&'static str, f64> {
    HashMap::from([("loglik", s.loglik), ("mi", s.mi), ("lod", s.lod)])
}

fn train_config(restarts: usize, seed: u64, max_iters: usize, tol: f64) -> TrainConfig {
    TrainConfig {
        restarts,
        seed,
        max_iters,
        tol,
        ..Default::default()
    }
}

/// A two-layer generative model of kind SL, IL, CI or ICI.
#[pyclass(name = "Model", module = "lodkit", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyModel {
    inner: GenerativeModel,
}

#[pymethods]
impl PyModel {
    /// Model with Dirichlet-random tables.
    #[staticmethod]
    #[pyo3(signature = (kind, obs_cards, lat_cards, seed = 0, concentration = 1.0))]
    fn random(
        kind: &str,
        obs_cards: Vec<usize>,
        lat_cards: Vec<usize>,
        seed: u64,
        concentration: f64,
    ) -> PyResult<Self> {
        let shape = ModelShape::new(
            StateSpace::new(obs_cards).map_err(err)?,
            StateSpace::new(lat_cards).map_err(err)?,
        );
        let inner = random_init(&shape, kind_of(kind)?, seed, concentration).map_err(err)?;
        Ok(PyModel { inner })
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        Ok(PyModel {
            inner: model_from_json(s).map_err(err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        model_to_json(&self.inner).map_err(err)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind().as_str()
    }

    #[getter]
    fn obs_cards(&self) -> Vec<usize> {
        self.inner.obs_space().cards().to_vec()
    }

    #[getter]
    fn lat_cards(&self) -> Vec<usize> {
        self.inner.lat_space().cards().to_vec()
    }

    /// `p_G(x)` for every observed state.
    fn obs_probs(&self) -> Vec<f64> {
        self.inner.obs_probs()
    }

    /// `p_G(y)` for every latent state.
    fn latent_probs(&self) -> Vec<f64> {
        self.inner.prior_probs().to_vec()
    }

    /// Rows `p_G(y|x)`; `None` where `p_G(x) = 0`.
    fn posterior(&self) -> Vec<Option<Vec<f64>>> {
        let post = self.inner.posterior();
        (0..post.num_rows()).map(|x| post.row(x).map(<[f64]>::to_vec)).collect()
    }

    fn lod(&self, pdata: Vec<f64>) -> PyResult<f64> {
        let p = pmf_over(self.inner.obs_space(), pdata)?;
        measures::lod(&self.inner, &p).map_err(err)
    }

    fn mi(&self, pdata: Vec<f64>) -> PyResult<f64> {
        let p = pmf_over(self.inner.obs_space(), pdata)?;
        measures::mi_data(&self.inner, &p).map_err(err)
    }

    fn model_mi(&self) -> PyResult<f64> {
        measures::model_mi(&self.inner).map_err(err)
    }

    fn loglik(&self, pdata: Vec<f64>) -> PyResult<f64> {
        let p = pmf_over(self.inner.obs_space(), pdata)?;
        measures::loglik(&self.inner, &p).map_err(err)
    }

    /// `{"loglik", "mi", "lod"}` against `pdata`.
    fn evaluate(&self, pdata: Vec<f64>) -> PyResult<HashMap<&'static str, f64>> {
        let p = pmf_over(self.inner.obs_space(), pdata)?;
        measures::evaluate(&self.inner, &p).map(scores_dict).map_err(err)
    }

    /// `p̃(y) = Σ_x p̃(x) p_G(y|x)`.
    fn pushforward(&self, pdata: Vec<f64>) -> PyResult<Vec<f64>> {
        let p = pmf_over(self.inner.obs_space(), pdata)?;
        Ok(pushforward_latent(&self.inner, &p).map_err(err)?.probs().to_vec())
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(kind={}, obs_cards={:?}, lat_cards={:?})",
            self.inner.kind(),
            self.inner.obs_space().cards(),
            self.inner.lat_space().cards()
        )
    }
}

/// Trains a model with random restarts (EM for SL/IL, wake-sleep for CI/ICI).
/// Returns the model and `{final_loglik, iters_run, restart_index_selected, converged}`.
#[pyfunction]
#[pyo3(signature = (kind, obs_cards, lat_cards, pdata, restarts = 20, seed = 0, max_iters = 1000, tol = 1e-8))]
#[allow(clippy::too_many_arguments)]
fn fit(
    py: Python<'_>,
    kind: &str,
    obs_cards: Vec<usize>,
    lat_cards: Vec<usize>,
    pdata: Vec<f64>,
    restarts: usize,
    seed: u64,
    max_iters: usize,
    tol: f64,
) -> PyResult<(PyModel, HashMap<&'static str, f64>)> {
    let kind = kind_of(kind)?;
    let shape = ModelShape::new(
        StateSpace::new(obs_cards).map_err(err)?,
        StateSpace::new(lat_cards).map_err(err)?,
    );
    let p = pmf_over(&shape.obs, pdata)?;
    let cfg = TrainConfig {
        mode: TrainMode::for_kind(kind),
        ..train_config(restarts, seed, max_iters, tol)
    };
    let (model, report) = py.detach(|| lodkit::fit(kind, &shape, &p, &cfg)).map_err(err)?;
    let summary = HashMap::from([
        ("final_loglik", report.final_loglik),
        ("iters_run", report.iters_run as f64),
        ("restart_index_selected", report.restart_index_selected as f64),
        ("converged", if report.converged { 1.0 } else { 0.0 }),
    ]);
    Ok((PyModel { inner: model }, summary))
}

/// Higher SL model with `k_z` states over the lower latent layer.
#[pyfunction]
#[pyo3(signature = (lat_cards, pdata_y, k_z, restarts = 20, seed = 0, max_iters = 1000, tol = 1e-8))]
#[allow(clippy::too_many_arguments)]
fn fit_higher(
    py: Python<'_>,
    lat_cards: Vec<usize>,
    pdata_y: Vec<f64>,
    k_z: usize,
    restarts: usize,
    seed: u64,
    max_iters: usize,
    tol: f64,
) -> PyResult<PyModel> {
    let p = pmf_over(&StateSpace::new(lat_cards).map_err(err)?, pdata_y)?;
    let cfg = train_config(restarts, seed, max_iters, tol);
    let (model, _) = py.detach(|| core_fit_higher(&p, k_z, &cfg)).map_err(err)?;
    Ok(PyModel { inner: model })
}

/// X-Y and X-Z scores of the chain `p̃(x) p_L(y|x) p_H(z|y)`.
#[pyfunction]
fn stack_scores(
    lower: &PyModel,
    higher: &PyModel,
    pdata: Vec<f64>,
) -> PyResult<HashMap<&'static str, HashMap<&'static str, f64>>> {
    let p = pmf_over(lower.inner.obs_space(), pdata)?;
    let st = StackedModel::new(lower.inner.clone(), None, higher.inner.clone(), p).map_err(err)?;
    Ok(HashMap::from([
        ("xy", scores_dict(lower_connected_scores(&st).map_err(err)?)),
        ("xz", scores_dict(connected_scores(&st).map_err(err)?)),
    ]))
}

#[pyfunction]
fn kl_divergence(p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    let space = StateSpace::single(p.len()).map_err(err)?;
    lodkit::kl_divergence(&pmf_over(&space, p)?, &pmf_over(&space, q)?).map_err(err)
}

#[pyfunction]
fn entropy(p: Vec<f64>) -> PyResult<f64> {
    let space = StateSpace::single(p.len()).map_err(err)?;
    Ok(lodkit::entropy(&pmf_over(&space, p)?))
}

/// `(r, p_value, n)` with a two-tailed t-test.
#[pyfunction]
fn pearson(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<(f64, f64, usize)> {
    let c = lodkit::stats::pearson(&xs, &ys).map_err(err)?;
    Ok((c.r, c.p_value, c.n))
}

/// `{name: (value, expected, tolerance)}` for the worked example.
#[pyfunction]
fn table2() -> PyResult<HashMap<String, (f64, f64, f64)>> {
    Ok(table2_report()
        .map_err(err)?
        .into_iter()
        .map(|c| (c.name, (c.value, c.expected, c.tolerance)))
        .collect())
}

/// `(min_lod, best_lod_partitions, max_mi, best_mi_partitions)` over all 729
/// deterministic assignments.
#[pyfunction]
#[allow(clippy::type_complexity)]
fn oracle() -> PyResult<(f64, Vec<Vec<Vec<usize>>>, f64, Vec<Vec<Vec<usize>>>)> {
    let r = oracle_report().map_err(err)?;
    Ok((r.min_lod, r.min_lod_partitions, r.max_mi, r.max_mi_partitions))
}

/// Sample counts of the synthetic stand-in dataset.
#[pyfunction]
#[pyo3(signature = (seed, cards, strength = 0.5))]
fn synthetic_counts(seed: u64, cards: Vec<usize>, strength: f64) -> PyResult<Vec<u64>> {
    let space = StateSpace::new(cards).map_err(err)?;
    Ok(synthetic_dataset(seed, &space, strength)
        .map_err(err)?
        .counts()
        .to_vec())
}

/// Trit counts of the 2×2 patch at (`row`, `col`) over an IDX image file's bytes.
#[pyfunction]
fn patch_counts(idx_bytes: &[u8], row: usize, col: usize) -> PyResult<Vec<u64>> {
    let images = parse_idx_images(idx_bytes).map_err(err)?;
    let ds = quantize_and_extract(&images, &PatchSpec::at(row, col)).map_err(err)?;
    Ok(ds.counts().to_vec())
}

#[pymodule]
#[pyo3(name = "lodkit")]
fn lodkit_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(fit_higher, m)?)?;
    m.add_function(wrap_pyfunction!(stack_scores, m)?)?;
    m.add_function(wrap_pyfunction!(kl_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(entropy, m)?)?;
    m.add_function(wrap_pyfunction!(pearson, m)?)?;
    m.add_function(wrap_pyfunction!(table2, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_counts, m)?)?;
    m.add_function(wrap_pyfunction!(patch_counts, m)?)?;
    Ok(())
}

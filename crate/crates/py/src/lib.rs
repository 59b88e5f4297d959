use std::collections::BTreeMap;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use dal_core::dataset::KindOverrides;
use dal_core::depth;
use dal_core::eval::{self, SkParams};
use dal_core::{DalConfig, DepthMode, Error, LearnerSpec, Recipe, Scheme};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

/// Configuration samples with their measured performance.
#[pyclass(module = "pydal", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Dataset {
    inner: dal_core::Dataset,
}

#[pymethods]
impl Dataset {
    /// Load a CSV file; `kinds` maps option names to binary/numeric/categorical.
    #[staticmethod]
    #[pyo3(signature = (path, kinds=None))]
    fn load(path: &str, kinds: Option<BTreeMap<String, String>>) -> PyResult<Self> {
        let overrides = overrides(kinds)?;
        let inner = dal_core::Dataset::load_csv_with(path, &overrides).map_err(to_py)?;
        Ok(Dataset { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (text, kinds=None))]
    fn from_csv(text: &str, kinds: Option<BTreeMap<String, String>>) -> PyResult<Self> {
        let inner = dal_core::Dataset::parse_csv(text, &overrides(kinds)?).map_err(to_py)?;
        Ok(Dataset { inner })
    }

    /// Purely numeric dataset from option names, rows and performances.
    #[staticmethod]
    fn from_rows(names: Vec<String>, configs: Vec<Vec<f64>>, performances: Vec<f64>) -> PyResult<Self> {
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        let inner = dal_core::Dataset::from_numeric(&names, configs, performances).map_err(to_py)?;
        Ok(Dataset { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(rows={}, options={})", self.inner.len(), self.inner.schema().len())
    }

    #[getter]
    fn option_names(&self) -> Vec<String> {
        self.inner.schema().iter().map(|o| o.name.clone()).collect()
    }

    #[getter]
    fn performance_name(&self) -> String {
        self.inner.performance_name().to_string()
    }

    fn configs(&self) -> Vec<Vec<f64>> {
        self.inner.rows().iter().map(|r| r.config.clone()).collect()
    }

    fn performances(&self) -> Vec<f64> {
        self.inner.performances()
    }

    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }

    /// Random `train_size` rows for training, the rest for testing.
    fn split(&self, train_size: usize, seed: u64) -> PyResult<(Dataset, Dataset)> {
        let (a, b) = self.inner.bootstrap_split(train_size, seed).map_err(to_py)?;
        Ok((Dataset { inner: a }, Dataset { inner: b }))
    }

    /// Encoded feature matrix under `scheme` (label, scaled or onehot).
    #[pyo3(signature = (scheme="label"))]
    fn encode(&self, scheme: &str) -> PyResult<Vec<Vec<f64>>> {
        let enc = dal_core::Encoder::fit(&self.inner, parse(scheme)?).map_err(to_py)?;
        enc.encode_dataset(&self.inner).map_err(to_py)
    }
}

fn overrides(kinds: Option<BTreeMap<String, String>>) -> PyResult<KindOverrides> {
    let mut out = KindOverrides::default();
    for (name, kind) in kinds.unwrap_or_default() {
        let k = match kind.as_str() {
            "binary" => dal_core::OptionKind::Binary,
            "numeric" => dal_core::OptionKind::Numeric,
            "categorical" => dal_core::OptionKind::Categorical,
            other => return Err(PyValueError::new_err(format!("unknown option kind `{other}`"))),
        };
        out.kinds.insert(name, k);
    }
    Ok(out)
}

fn config(learner: &str, scheme: &str, depth: &str, seed: u64) -> PyResult<DalConfig> {
    Ok(DalConfig {
        scheme: parse::<Scheme>(scheme)?,
        depth: parse::<DepthMode>(depth)?,
        seed,
        ..DalConfig::with_learner(parse::<LearnerSpec>(learner)?)
    })
}

/// Divide-and-learn model: a tree-based division of the samples, one local
/// model per division and a forest routing new configurations.
#[pyclass(module = "pydal", frozen)]
struct DalModel {
    inner: dal_core::DalModel,
}

#[pymethods]
impl DalModel {
    #[staticmethod]
    #[pyo3(signature = (data, learner="rnet", scheme="label", depth="auto", seed=0))]
    fn train(py: Python<'_>, data: &Dataset, learner: &str, scheme: &str, depth: &str, seed: u64) -> PyResult<Self> {
        let cfg = config(learner, scheme, depth, seed)?;
        let inner = py.detach(|| dal_core::DalModel::train(&data.inner, &cfg)).map_err(to_py)?;
        Ok(DalModel { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(DalModel {
            inner: dal_core::DalModel::from_json(text).map_err(to_py)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py)
    }

    fn predict(&self, config: Vec<f64>) -> PyResult<f64> {
        self.inner.predict(&config).map_err(to_py)
    }

    fn predict_many(&self, configs: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        configs.iter().map(|c| self.inner.predict(c).map_err(to_py)).collect()
    }

    /// Division id a configuration is routed to.
    fn route(&self, config: Vec<f64>) -> PyResult<usize> {
        self.inner.route(&config).map_err(to_py)
    }

    #[getter]
    fn depth_used(&self) -> Option<usize> {
        self.inner.depth_used()
    }

    #[getter]
    fn n_divisions(&self) -> usize {
        self.inner.divisions.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "DalModel(learner={}, depth={:?}, divisions={})",
            self.inner.meta.config.learner.name(),
            self.inner.depth_used(),
            self.inner.divisions.len()
        )
    }
}

/// Mean relative error in percent; zero actual values are skipped.
#[pyfunction]
fn mre(actual: Vec<f64>, predicted: Vec<f64>) -> PyResult<Option<f64>> {
    Ok(eval::mre(&actual, &predicted).map_err(to_py)?.value)
}

#[pyfunction]
fn rmse(actual: Vec<f64>, predicted: Vec<f64>) -> PyResult<f64> {
    eval::rmse(&actual, &predicted).map_err(to_py)
}

/// Probability that a draw from `a` is lower than one from `b`, ties half.
#[pyfunction]
fn a12(a: Vec<f64>, b: Vec<f64>) -> f64 {
    eval::a12(&a, &b)
}

/// μHV of `(h, z)` points against a reference, derived from the points
/// when not given.
#[pyfunction]
#[pyo3(signature = (points, reference=None))]
fn mu_hv(points: Vec<(f64, f64)>, reference: Option<(f64, f64)>) -> PyResult<f64> {
    let r = match reference {
        Some((h, z)) => dal_core::ReferencePoint { h, z },
        None => depth::reference_point(&points).map_err(to_py)?,
    };
    Ok(depth::mu_hv(&points, r))
}

#[pyfunction]
fn mean_area(areas: Vec<f64>) -> f64 {
    depth::mean_area(&areas)
}

/// Depth with the largest score; the smaller depth wins ties.
#[pyfunction]
fn select_depth(scored: Vec<(usize, f64)>) -> Option<usize> {
    depth::select_depth(&scored)
}

/// Scott-Knott ranks of named treatments, lowest mean first.
#[pyfunction]
#[pyo3(signature = (treatments, seed=0))]
fn scott_knott(treatments: BTreeMap<String, Vec<f64>>, seed: u64) -> PyResult<Vec<(String, usize)>> {
    let t: Vec<(String, Vec<f64>)> = treatments.into_iter().collect();
    let r = eval::scott_knott(&t, SkParams { seed, ..SkParams::default() }).map_err(to_py)?;
    Ok(r.treatments.into_iter().map(|s| (s.name, s.rank)).collect())
}

/// Per-run MREs of `recipe` (`dal:<learner>` or `global:<learner>`) over
/// repeated bootstrap splits.
#[pyfunction]
#[pyo3(signature = (data, recipe, train_size, runs=30, seed=0, scheme="label"))]
fn evaluate(
    py: Python<'_>,
    data: &Dataset,
    recipe: &str,
    train_size: usize,
    runs: usize,
    seed: u64,
    scheme: &str,
) -> PyResult<Vec<Option<f64>>> {
    let (kind, learner) = recipe
        .split_once(':')
        .ok_or_else(|| PyValueError::new_err(format!("recipe `{recipe}` must look like dal:<learner>")))?;
    let r = match kind {
        "dal" => Recipe::dal(config(learner, scheme, "auto", seed)?),
        "global" => Recipe::global(parse(scheme)?, parse(learner)?),
        _ => return Err(PyValueError::new_err(format!("unknown recipe kind `{kind}`"))),
    };
    let report = py.detach(|| eval::evaluate(&r, &data.inner, train_size, runs, seed)).map_err(to_py)?;
    Ok(report.runs.iter().map(|x| x.mre).collect())
}

#[pymodule]
fn pydal(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<DalModel>()?;
    m.add_function(wrap_pyfunction!(mre, m)?)?;
    m.add_function(wrap_pyfunction!(rmse, m)?)?;
    m.add_function(wrap_pyfunction!(a12, m)?)?;
    m.add_function(wrap_pyfunction!(mu_hv, m)?)?;
    m.add_function(wrap_pyfunction!(mean_area, m)?)?;
    m.add_function(wrap_pyfunction!(select_depth, m)?)?;
    m.add_function(wrap_pyfunction!(scott_knott, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}

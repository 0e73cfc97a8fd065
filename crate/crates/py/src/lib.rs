//! Python bindings: plans, federations, training runs and the metric helpers.

use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;

use fedcross_core::data;
use fedcross_core::experiment::{evaluate_history, ExperimentPlan};
use fedcross_core::metrics;
use fedcross_core::nn::{self, LrSchedule, ParameterVector};
use fedcross_core::protocol::{self, Strategy, TrainingHistory};
use fedcross_core::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Numerical(m) => PyArithmeticError::new_err(m),
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for fedcross_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

/// Flat model parameters.
#[pyclass(name = "Params", from_py_object)]
#[derive(Clone)]
struct PyParams {
    inner: ParameterVector,
}

#[pymethods]
impl PyParams {
    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    /// `(name, shape, is_norm)` for every layer block.
    fn layout(&self) -> Vec<(String, Vec<usize>, bool)> {
        self.inner.layout().slots().iter().map(|s| (s.name.clone(), s.shape.clone(), s.is_norm)).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn norm(&self) -> f64 {
        self.inner.norm()
    }
}

/// Synthetic per-client datasets.
#[pyclass(name = "Federation")]
struct PyFederation {
    clients: Vec<data::ClientDataset>,
}

#[pymethods]
impl PyFederation {
    fn __len__(&self) -> usize {
        self.clients.len()
    }

    /// `(train, val, test)` sample counts per client.
    fn split_sizes(&self) -> Vec<(usize, usize, usize)> {
        self.clients.iter().map(|c| (c.split.train.len(), c.split.val.len(), c.split.test.len())).collect()
    }

    fn image(&self, client: usize, sample: usize) -> PyResult<Vec<f64>> {
        self.clients
            .get(client)
            .and_then(|c| c.images.get(sample))
            .cloned()
            .ok_or_else(|| PyValueError::new_err("index out of range"))
    }

    fn mask(&self, client: usize, sample: usize) -> PyResult<Vec<u8>> {
        self.clients
            .get(client)
            .and_then(|c| c.masks.get(sample))
            .cloned()
            .ok_or_else(|| PyValueError::new_err("index out of range"))
    }

    fn shape(&self) -> (usize, usize) {
        self.clients.first().map_or((0, 0), |c| (c.height, c.width))
    }
}

/// Result of one training run.
#[pyclass(name = "History")]
struct PyHistory {
    inner: TrainingHistory,
}

#[pymethods]
impl PyHistory {
    #[getter]
    fn strategy(&self) -> &'static str {
        self.inner.strategy.name()
    }

    #[getter]
    fn total_steps(&self) -> usize {
        self.inner.total_steps
    }

    fn losses(&self) -> Vec<f64> {
        self.inner.records.iter().map(|r| r.loss).collect()
    }

    fn active_clients(&self) -> Vec<Vec<usize>> {
        self.inner.records.iter().map(|r| r.active_clients.clone()).collect()
    }

    fn final_params(&self) -> Vec<PyParams> {
        self.inner.final_params.iter().map(|p| PyParams { inner: p.clone() }).collect()
    }

    fn message_count(&self) -> usize {
        self.inner.message_count()
    }

    fn aggregation_events(&self) -> usize {
        self.inner.aggregation_events()
    }
}

/// Experiment plan; `toml` uses the same schema as the CLI config.
#[pyclass(name = "Plan")]
struct PyPlan {
    inner: ExperimentPlan,
}

#[pymethods]
impl PyPlan {
    #[new]
    #[pyo3(signature = (toml = ""))]
    fn new(toml: &str) -> PyResult<Self> {
        Ok(PyPlan { inner: ExperimentPlan::from_toml(toml).py()? })
    }

    #[getter]
    fn seeds(&self) -> Vec<u64> {
        self.inner.training.seeds.clone()
    }

    fn federation(&self, seed: u64) -> PyResult<PyFederation> {
        Ok(PyFederation { clients: self.inner.federation(seed).py()? })
    }

    fn init_params(&self, seed: u64) -> PyResult<PyParams> {
        Ok(PyParams { inner: self.inner.model().init_params(seed).py()? })
    }

    /// Trains `strategy` (e.g. "FEDCROSS") on `federation`.
    #[pyo3(signature = (strategy, federation, seed, local_epochs = None))]
    fn run(&self, py: Python<'_>, strategy: &str, federation: &PyFederation, seed: u64, local_epochs: Option<usize>) -> PyResult<PyHistory> {
        let st: Strategy = strategy.parse().py()?;
        let e = local_epochs.unwrap_or(self.inner.training.local_epochs);
        let cfg = self.inner.config(st, seed, e, federation.clients.len());
        let clients = &federation.clients;
        let inner = py.detach(|| protocol::run_strategy(&cfg, clients)).py()?;
        Ok(PyHistory { inner })
    }

    /// `(global_dsc, per-client mean DSC)` on the test splits.
    fn evaluate(&self, history: &PyHistory, federation: &PyFederation) -> PyResult<(f64, Vec<f64>)> {
        let report = evaluate_history(&self.inner.model(), &history.inner, &federation.clients, self.inner.training.window_radius).py()?;
        Ok((report.global_dsc, report.per_client.iter().map(|c| c.mean_dsc).collect()))
    }

    /// Foreground probability of every pixel of one image.
    fn predict(&self, params: &PyParams, image: Vec<f64>, height: usize, width: usize) -> PyResult<Vec<f64>> {
        if image.len() != height * width {
            return Err(PyValueError::new_err("image size does not match height * width"));
        }
        let r = self.inner.training.window_radius;
        let feats = data::pixel_features(&image, height, width, r);
        let batch = nn::Batch::new(1, height * width, data::window_features(r), feats, vec![0; height * width]).py()?;
        Ok(nn::forward(&self.inner.model(), &params.inner, &batch).py()?.foreground())
    }
}

#[pyfunction]
fn split_dataset(n: usize) -> PyResult<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let s = data::split_dataset(n).py()?;
    Ok((s.train, s.val, s.test))
}

#[pyfunction]
fn client_weights(sizes: Vec<usize>) -> PyResult<Vec<f64>> {
    data::client_weights(&sizes).py()
}

#[pyfunction]
#[pyo3(signature = (step, lr0, total_steps, power = 0.9))]
fn poly_lr(step: usize, lr0: f64, total_steps: usize, power: f64) -> PyResult<f64> {
    nn::poly_lr(step, &LrSchedule::new(lr0, total_steps, power)).py()
}

#[pyfunction]
fn dice(pred: Vec<u8>, gt: Vec<u8>) -> PyResult<f64> {
    metrics::dice(&pred, &gt).py()
}

/// Returns `None` when either mask is empty.
#[pyfunction]
#[pyo3(signature = (pred, gt, height, width, spacing = (1.0, 1.0)))]
fn asd(pred: Vec<u8>, gt: Vec<u8>, height: usize, width: usize, spacing: (f64, f64)) -> PyResult<Option<f64>> {
    match metrics::asd(&pred, &gt, height, width, spacing) {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedMetric(_)) => Ok(None),
        Err(e) => Err(py_err(e)),
    }
}

#[pyfunction]
fn paired_ttest(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    metrics::paired_ttest(&a, &b).py()
}

#[pyfunction]
fn global_average(means: Vec<f64>) -> PyResult<f64> {
    metrics::global_average(&means).py()
}

#[pyfunction]
fn aggregate_fedavg(params: Vec<PyParams>, weights: Vec<f64>) -> PyResult<PyParams> {
    let params: Vec<ParameterVector> = params.into_iter().map(|p| p.inner).collect();
    Ok(PyParams { inner: protocol::aggregate_fedavg(&params, &weights).py()? })
}

#[pymodule]
fn fedcross(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PyFederation>()?;
    m.add_class::<PyHistory>()?;
    m.add_class::<PyPlan>()?;
    m.add_function(wrap_pyfunction!(split_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(client_weights, m)?)?;
    m.add_function(wrap_pyfunction!(poly_lr, m)?)?;
    m.add_function(wrap_pyfunction!(dice, m)?)?;
    m.add_function(wrap_pyfunction!(asd, m)?)?;
    m.add_function(wrap_pyfunction!(paired_ttest, m)?)?;
    m.add_function(wrap_pyfunction!(global_average, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate_fedavg, m)?)?;
    Ok(())
}

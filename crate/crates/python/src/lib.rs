//! Python bindings for the `ltshift` evaluation harness.
//!
//! Class indices stay 1-based on the Python side as well.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use ltshift::protocol::run_named;
use ltshift::report::{
    curve, leaderboard_csv, leaderboard_markdown, read_report, report_to_string,
};
use ltshift::{ClassDistribution, DivergenceConvention, Error, ProtocolConfig, SamplingMode};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn distribution(probs: Vec<f64>) -> PyResult<ClassDistribution> {
    ClassDistribution::new(probs).map_err(to_py)
}

/// Exponentially decaying training class distribution.
#[pyfunction]
fn make_train_distribution(num_classes: usize, rho_trn: f64) -> PyResult<Vec<f64>> {
    Ok(ltshift::make_train_distribution(num_classes, rho_trn)
        .map_err(to_py)?
        .into())
}

/// Shifted test distribution peaking at `alpha` (1-based, real-valued).
#[pyfunction]
fn make_test_distribution(num_classes: usize, rho_tst: f64, alpha: f64) -> PyResult<Vec<f64>> {
    let profile = ltshift::ShiftProfile::new(num_classes, rho_tst, alpha).map_err(to_py)?;
    Ok(ltshift::make_test_distribution(&profile).into())
}

#[pyfunction]
fn alpha_schedule(num_classes: usize, num_synthesizations: usize) -> PyResult<Vec<f64>> {
    Ok(ltshift::alpha_schedule(num_classes, num_synthesizations)
        .map_err(to_py)?
        .peaks()
        .to_vec())
}

#[pyfunction]
fn total_test_size(num_classes: usize, rho_tst: f64, n_max: usize) -> PyResult<usize> {
    ltshift::total_test_size(num_classes, rho_tst, n_max).map_err(to_py)
}

#[pyfunction]
fn allocate_counts(probs: Vec<f64>, total: usize) -> PyResult<Vec<usize>> {
    Ok(ltshift::allocate_counts(&distribution(probs)?, total)
        .counts()
        .to_vec())
}

#[pyfunction]
#[pyo3(signature = (p, q, convention = "jeffreys"))]
fn divergence(p: Vec<f64>, q: Vec<f64>, convention: &str) -> PyResult<f64> {
    let convention: DivergenceConvention = convention.parse().map_err(to_py)?;
    ltshift::divergence(&distribution(p)?, &distribution(q)?, convention).map_err(to_py)
}

#[pyfunction]
fn derive_stream(master_seed: u64, t: u32, r: u32) -> u64 {
    ltshift::derive_stream(master_seed, t, r)
}

#[pyfunction]
fn expected_accuracy(per_class_acc: Vec<f64>, probs: Vec<f64>) -> PyResult<f64> {
    ltshift::expected_accuracy(&per_class_acc, &distribution(probs)?).map_err(to_py)
}

/// Returns `(auc, avg, std, max, min, drop_ratio)`.
#[pyfunction]
fn aggregate(accs: Vec<f64>, deltas: Vec<f64>) -> PyResult<(f64, f64, f64, f64, f64, f64)> {
    let m = ltshift::aggregate(&accs, &deltas).map_err(to_py)?;
    Ok((m.auc, m.avg, m.std, m.max_acc, m.min_acc, m.drop_ratio))
}

#[pyclass(name = "PredictionPool", frozen)]
struct PyPredictionPool {
    inner: ltshift::PredictionPool,
}

#[pymethods]
impl PyPredictionPool {
    /// Loads a line-delimited predictions file and a manifest file.
    #[staticmethod]
    fn from_files(predictions: &str, manifest: &str) -> PyResult<Self> {
        let open = |p: &str| {
            std::fs::File::open(p)
                .map(std::io::BufReader::new)
                .map_err(|e| PyIOError::new_err(format!("{p}: {e}")))
        };
        let inner = ltshift::ingest(open(predictions)?, open(manifest)?).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_strings(predictions: &str, manifest: &str) -> PyResult<Self> {
        let inner = ltshift::ingest(predictions.as_bytes(), manifest.as_bytes()).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Pool with exactly `round(size * target)` correct predictions per class.
    #[staticmethod]
    #[pyo3(signature = (targets, sizes, seed = 0, train_counts = None))]
    fn synthetic(
        targets: Vec<f64>,
        sizes: Vec<usize>,
        seed: u64,
        train_counts: Option<Vec<u64>>,
    ) -> PyResult<Self> {
        let mut inner = ltshift::generate_synthetic_pool(&targets, &sizes, seed).map_err(to_py)?;
        if let Some(counts) = train_counts {
            let manifest = ltshift::DatasetManifest::new("synthetic", counts).map_err(to_py)?;
            inner = inner.with_manifest(manifest).map_err(to_py)?;
        }
        Ok(Self { inner })
    }

    #[getter]
    fn num_classes(&self) -> usize {
        self.inner.num_classes()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn per_class_accuracy(&self) -> Vec<f64> {
        ltshift::per_class_accuracy(&self.inner)
    }

    fn balanced_accuracy(&self) -> f64 {
        ltshift::balanced_accuracy(&self.inner)
    }

    fn overall_accuracy(&self) -> f64 {
        self.inner.overall_accuracy()
    }

    /// Serializes the records in the predictions wire format.
    fn predictions_jsonl(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        self.inner.write_predictions(&mut buf).map_err(to_py)?;
        Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
    }

    #[allow(clippy::too_many_arguments)]
    #[pyo3(signature = (
        rho_tst = 100.0,
        n_max = 1000,
        t = None,
        repeats = 5,
        seed = 0,
        mode = "bootstrap",
        divergence = "jeffreys",
        method = "",
    ))]
    fn run(
        &self,
        py: Python<'_>,
        rho_tst: f64,
        n_max: usize,
        t: Option<usize>,
        repeats: usize,
        seed: u64,
        mode: &str,
        divergence: &str,
        method: &str,
    ) -> PyResult<PyEvaluationReport> {
        let config = ProtocolConfig {
            rho_tst,
            n_max_tst: n_max,
            num_synthesizations: t,
            repeats,
            master_seed: seed,
            sampling_mode: mode.parse::<SamplingMode>().map_err(to_py)?,
            divergence: divergence.parse().map_err(to_py)?,
        };
        let pool = &self.inner;
        let inner = py
            .detach(|| run_named(pool, &config, method))
            .map_err(to_py)?;
        Ok(PyEvaluationReport { inner })
    }
}

#[pyclass(name = "EvaluationReport", frozen)]
struct PyEvaluationReport {
    inner: ltshift::EvaluationReport,
}

#[pymethods]
impl PyEvaluationReport {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: read_report(text.as_bytes()).map_err(to_py)?,
        })
    }

    fn to_json(&self) -> String {
        report_to_string(&self.inner)
    }

    #[getter]
    fn method(&self) -> &str {
        &self.inner.method
    }

    #[getter]
    fn auc(&self) -> f64 {
        self.inner.aggregate.auc
    }

    #[getter]
    fn avg(&self) -> f64 {
        self.inner.aggregate.avg
    }

    #[getter]
    fn std(&self) -> f64 {
        self.inner.aggregate.std
    }

    #[getter]
    fn max_acc(&self) -> f64 {
        self.inner.aggregate.max_acc
    }

    #[getter]
    fn min_acc(&self) -> f64 {
        self.inner.aggregate.min_acc
    }

    #[getter]
    fn drop_ratio(&self) -> f64 {
        self.inner.aggregate.drop_ratio
    }

    #[getter]
    fn balanced_accuracy(&self) -> f64 {
        self.inner.balanced_accuracy
    }

    #[getter]
    fn alphas(&self) -> Vec<f64> {
        self.inner.rows.iter().map(|r| r.alpha).collect()
    }

    #[getter]
    fn deltas(&self) -> Vec<f64> {
        self.inner.deltas()
    }

    #[getter]
    fn accuracies(&self) -> Vec<f64> {
        self.inner.accuracies()
    }

    /// `(forward, uniform, backward)` expected accuracies.
    #[getter]
    fn legacy(&self) -> (f64, f64, f64) {
        let l = self.inner.legacy;
        (l.forward, l.uniform, l.backward)
    }

    /// `(alpha, delta, acc_mean, acc_spread)` tuples sorted by ascending shift.
    fn curve(&self) -> Vec<(f64, f64, f64, f64)> {
        curve(&self.inner)
            .into_iter()
            .map(|p| (p.alpha, p.delta, p.acc_mean, p.acc_spread))
            .collect()
    }
}

/// Renders a comparison table (`md`, `csv` or `json`) for several reports.
#[pyfunction]
#[pyo3(signature = (reports, format = "md"))]
fn compare(reports: Vec<PyRef<'_, PyEvaluationReport>>, format: &str) -> PyResult<String> {
    let reports: Vec<_> = reports.iter().map(|r| r.inner.clone()).collect();
    let board = ltshift::compare(&reports).map_err(to_py)?;
    match format {
        "md" => Ok(leaderboard_markdown(&board)),
        "csv" => Ok(leaderboard_csv(&board)),
        "json" => {
            serde_json::to_string_pretty(&board).map_err(|e| PyValueError::new_err(e.to_string()))
        }
        other => Err(PyValueError::new_err(format!("unknown format {other:?}"))),
    }
}

#[pymodule]
fn pyltshift(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PRNG_ID", ltshift::PRNG_ID)?;
    m.add_class::<PyPredictionPool>()?;
    m.add_class::<PyEvaluationReport>()?;
    m.add_function(wrap_pyfunction!(make_train_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(make_test_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(alpha_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(total_test_size, m)?)?;
    m.add_function(wrap_pyfunction!(allocate_counts, m)?)?;
    m.add_function(wrap_pyfunction!(divergence, m)?)?;
    m.add_function(wrap_pyfunction!(derive_stream, m)?)?;
    m.add_function(wrap_pyfunction!(expected_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    Ok(())
}

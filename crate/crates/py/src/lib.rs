//! Python bindings: recordings, spectral features, synthetic cohorts,
//! trained systems and metrics.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::Value;
use slowave_core::detect::SystemKind;
use slowave_core::eval::Level;
use slowave_core::model_io::{self, StoredModel};
use slowave_core::spectral::SpectralFeatures;
use slowave_core::synth::{generate_subject, read_cohort, SynthConfig};
use slowave_core::system::{SubjectData, SystemConfig, TrainedSystem};

create_exception!(slowave, SlowaveError, PyException, "Raised for every library failure; `kind` names the cause.");

fn py_err(e: slowave_core::Error) -> PyErr {
    let err = SlowaveError::new_err(e.to_string());
    Python::attach(|py| {
        let _ = err.value(py).setattr("kind", e.kind());
    });
    err
}

fn json_err(e: serde_json::Error) -> PyErr {
    py_err(e.into())
}

fn to_py(py: Python<'_>, v: &Value) -> PyResult<Py<PyAny>> {
    Ok(match v {
        Value::Null => py.None(),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any().unbind(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any().unbind(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any().unbind(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any().unbind(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(to_py(py, item)?)?;
            }
            list.into_any().unbind()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, to_py(py, item)?)?;
            }
            dict.into_any().unbind()
        }
    })
}

fn serialize<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    to_py(py, &serde_json::to_value(value).map_err(json_err)?)
}

/// Multi-channel EEG in microvolts.
#[pyclass(name = "Recording", module = "slowave")]
pub struct PyRecording {
    inner: slowave_core::Recording,
}

#[pymethods]
impl PyRecording {
    /// `data` holds one list of samples per channel.
    #[new]
    fn new(channels: Vec<String>, fs: f64, data: Vec<Vec<f64>>) -> PyResult<Self> {
        let n = data.first().map_or(0, Vec::len);
        if data.iter().any(|row| row.len() != n) {
            return Err(py_err(slowave_core::Error::Recording("channels differ in length".into())));
        }
        let flat: Vec<f64> = data.into_iter().flatten().collect();
        let rows = if n == 0 { 0 } else { flat.len() / n };
        let arr = ndarray_from(rows, n, flat)?;
        let inner = slowave_core::Recording::new(channels, fs, arr).map_err(py_err)?;
        Ok(PyRecording { inner })
    }

    #[staticmethod]
    fn read_edf(path: &str) -> PyResult<Self> {
        Ok(PyRecording { inner: slowave_core::edf::read_edf(path).map_err(py_err)? })
    }

    fn write_edf(&self, path: &str) -> PyResult<()> {
        slowave_core::edf::write_edf(&self.inner, path).map_err(py_err)
    }

    #[getter]
    fn channels(&self) -> Vec<String> {
        self.inner.channels.clone()
    }

    #[getter]
    fn fs(&self) -> f64 {
        self.inner.fs
    }

    #[getter]
    fn n_samples(&self) -> usize {
        self.inner.n_samples()
    }

    fn data(&self) -> Vec<Vec<f64>> {
        self.inner.data.rows().into_iter().map(|r| r.to_vec()).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Recording({} channels, {:.1} s at {} Hz)",
            self.inner.n_channels(),
            self.inner.duration_s(),
            self.inner.fs
        )
    }
}

fn ndarray_from(rows: usize, cols: usize, flat: Vec<f64>) -> PyResult<ndarray::Array2<f64>> {
    ndarray::Array2::from_shape_vec((rows, cols), flat)
        .map_err(|e| py_err(slowave_core::Error::Recording(e.to_string())))
}

/// A trained detection system.
#[pyclass(name = "Model", module = "slowave")]
pub struct PyModel {
    inner: TrainedSystem,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let inner = model_io::load(path).and_then(StoredModel::into_system).map_err(py_err)?;
        Ok(PyModel { inner })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        model_io::save(path, &StoredModel::System(Box::new(self.inner.clone()))).map_err(py_err)
    }

    #[getter]
    fn system(&self) -> &'static str {
        self.inner.system.name()
    }

    #[getter]
    fn channels(&self) -> Vec<String> {
        self.inner.channels.clone()
    }

    /// Recording score, segment scores and the degrees-of-slowing report.
    fn predict(&self, py: Python<'_>, recording: &PyRecording) -> PyResult<Py<PyAny>> {
        let pred = py.detach(|| self.inner.predict(&recording.inner)).map_err(py_err)?;
        serialize(py, &pred)
    }
}

/// The eight spectral features of one 640-sample window.
#[pyfunction]
fn spectral_features(py: Python<'_>, window: Vec<f64>) -> PyResult<Py<PyAny>> {
    let f = SpectralFeatures::from_window(&window).map_err(py_err)?;
    serialize(py, &f)
}

/// Subject `index` of a synthetic cohort; `config` is a JSON object.
#[pyfunction]
#[pyo3(signature = (index, config = None))]
fn synth_subject(py: Python<'_>, index: usize, config: Option<&str>) -> PyResult<(PyRecording, Py<PyAny>)> {
    let cfg: SynthConfig = match config {
        Some(text) => serde_json::from_str(text).map_err(json_err)?,
        None => SynthConfig::default(),
    };
    let (rec, truth) = generate_subject(&cfg, index).map_err(py_err)?;
    Ok((PyRecording { inner: rec }, serialize(py, &truth)?))
}

/// Fits a system on every subject of a cohort directory.
#[pyfunction]
#[pyo3(signature = (cohort_dir, system = "sdls", level = "eeg", config = None))]
fn train(py: Python<'_>, cohort_dir: &str, system: &str, level: &str, config: Option<&str>) -> PyResult<PyModel> {
    let kind: SystemKind = system.parse().map_err(py_err)?;
    let level: Level = level.parse().map_err(py_err)?;
    let mut cfg = match config {
        Some(text) => serde_json::from_str::<SystemConfig>(text).map_err(json_err)?,
        None => SystemConfig::for_system(kind),
    };
    cfg.system = kind;
    py.detach(|| {
        let cohort = read_cohort(cohort_dir)?;
        let subjects = cohort
            .iter()
            .map(|(r, t)| SubjectData::from_truth(r, t, &cfg.preprocess))
            .collect::<slowave_core::Result<Vec<_>>>()?;
        let pool: Vec<&SubjectData> = subjects.iter().collect();
        TrainedSystem::fit(&cfg, level, &pool, &pool)
    })
    .map(|inner| PyModel { inner })
    .map_err(py_err)
}

/// Writes a synthetic cohort (EDF, ground truth, manifest) to `out_dir`.
#[pyfunction]
#[pyo3(signature = (out_dir, config = None))]
fn synth_cohort(py: Python<'_>, out_dir: &str, config: Option<&str>) -> PyResult<usize> {
    let cfg: SynthConfig = match config {
        Some(text) => serde_json::from_str(text).map_err(json_err)?,
        None => SynthConfig::default(),
    };
    py.detach(|| {
        let cohort = slowave_core::synth::generate_cohort(&cfg)?;
        slowave_core::synth::write_cohort(out_dir, &cohort).map(|m| m.entries.len())
    })
    .map_err(py_err)
}

/// AUC, AUPRC, ACC, BAC, SEN and SPE at `threshold`.
#[pyfunction]
#[pyo3(signature = (scores, labels, threshold = 0.5))]
fn metrics(py: Python<'_>, scores: Vec<f64>, labels: Vec<u8>, threshold: f64) -> PyResult<Py<PyAny>> {
    let m = slowave_core::eval::metrics(&scores, &labels, threshold).map_err(py_err)?;
    serialize(py, &m)
}

#[pymodule]
fn slowave(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SlowaveError", m.py().get_type::<SlowaveError>())?;
    m.add_class::<PyRecording>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(spectral_features, m)?)?;
    m.add_function(wrap_pyfunction!(synth_subject, m)?)?;
    m.add_function(wrap_pyfunction!(synth_cohort, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    Ok(())
}

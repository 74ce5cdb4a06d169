//! Python bindings: configuration, the experiment commands, and the basic
//! building blocks (fBm covariance and sampling, eigenpairs, kernels).

use std::path::PathBuf;

use helios::config::{preset, ExperimentConfig};
use helios::experiment::{self, Command, Experiment};
use helios::fbm::{self, HurstIndex, TimeGrid};
use helios::spectral;
use helios::HeliosError;
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(err: HeliosError) -> PyErr {
    match err {
        HeliosError::Config(_) | HeliosError::Domain(_) => PyValueError::new_err(err.to_string()),
        HeliosError::Numeric(_) => PyArithmeticError::new_err(err.to_string()),
        HeliosError::Data(_) => PyRuntimeError::new_err(err.to_string()),
        HeliosError::Io(_) => PyOSError::new_err(err.to_string()),
    }
}

fn hurst(h: f64) -> PyResult<HurstIndex> {
    HurstIndex::new(h).map_err(to_py)
}

/// Experiment configuration. Parse from text, a file or a preset name.
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    /// Defaults of the reference setup.
    #[new]
    fn new() -> Self {
        Self { inner: ExperimentConfig::default() }
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        ExperimentConfig::parse(text, None).map(|inner| Self { inner }).map_err(to_py)
    }

    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        ExperimentConfig::from_file(&path).map(|inner| Self { inner }).map_err(to_py)
    }

    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        let text = preset(name).ok_or_else(|| PyValueError::new_err(format!("unknown preset '{name}'")))?;
        Self::parse(text)
    }

    /// Sets one `key = value` entry using the config-file syntax.
    fn set(&mut self, key: &str, value: &str) -> PyResult<()> {
        let mut text = self.inner.to_text();
        text = text
            .lines()
            .filter(|l| l.split('=').next().map(str::trim) != Some(key))
            .map(|l| format!("{l}\n"))
            .collect();
        text.push_str(&format!("{key} = {value}\n"));
        self.inner = ExperimentConfig::parse(&text, None).map_err(to_py)?;
        Ok(())
    }

    /// Invariant check; returns advisory warnings.
    fn validate(&self, ensemble: bool) -> PyResult<Vec<String>> {
        let purpose = if ensemble { helios::config::Purpose::Ensemble } else { helios::config::Purpose::SinglePath };
        self.inner.validate(purpose).map_err(to_py)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn __repr__(&self) -> String {
        format!("Config(M={}, N={}, N1={}, P={}, H={})", self.inner.time_steps, self.inner.radial_points,
            self.inner.truncation, self.inner.paths, self.inner.hurst)
    }
}

/// Result of a reconstruction.
#[pyclass(name = "Reconstruction", get_all)]
struct PyReconstruction {
    r: Vec<f64>,
    f_coeffs: Vec<f64>,
    f_values: Vec<f64>,
    f_true: Vec<f64>,
    g_squared_values: Vec<f64>,
    g_squared_true: Vec<f64>,
    f_error: f64,
    g_squared_error: f64,
    mean: Vec<f64>,
    variance: Vec<f64>,
    source_kernels: Vec<f64>,
}

/// Decay rates of the kernels.
#[pyclass(name = "DecayProbe", get_all)]
struct PyDecayProbe {
    n: Vec<usize>,
    lambdas: Vec<f64>,
    source: Vec<f64>,
    noise: Vec<f64>,
    source_slope: f64,
    noise_slope: f64,
}

/// Runs a command and writes its CSV files; returns the written paths.
#[pyfunction]
fn run(command: &str, config: &PyConfig, out_dir: PathBuf) -> PyResult<Vec<String>> {
    let command: Command = command.parse().map_err(to_py)?;
    let report = experiment::run(command, config.inner.clone(), &out_dir).map_err(to_py)?;
    Ok(report.files.iter().map(|p| p.display().to_string()).collect())
}

#[pyfunction]
fn reconstruct(config: &PyConfig) -> PyResult<PyReconstruction> {
    let mut exp = Experiment::new(config.inner.clone(), Command::Reconstruct).map_err(to_py)?;
    let run = exp.reconstruct().map_err(to_py)?;
    Ok(PyReconstruction {
        r: exp.rgrid.nodes(),
        f_coeffs: run.recon.f_coeffs.values.clone(),
        f_values: run.recon.f_values.clone(),
        f_true: run.f_true.clone(),
        g_squared_values: run.recon.g_squared_values.clone(),
        g_squared_true: run.g_squared_true.clone(),
        f_error: run.f_error(),
        g_squared_error: run.g_squared_error(),
        mean: run.stats.mean.clone(),
        variance: run.stats.variance(),
        source_kernels: run.kernels.source.clone(),
    })
}

#[pyfunction]
fn decay_probe(config: &PyConfig) -> PyResult<PyDecayProbe> {
    let mut exp = Experiment::new(config.inner.clone(), Command::ProbeDecay).map_err(to_py)?;
    let p = exp.probe_decay().map_err(to_py)?;
    Ok(PyDecayProbe {
        n: p.rows.iter().map(|r| r.n).collect(),
        lambdas: p.rows.iter().map(|r| r.lambda).collect(),
        source: p.rows.iter().map(|r| r.source).collect(),
        noise: p.rows.iter().map(|r| r.noise).collect(),
        source_slope: p.source_slope,
        noise_slope: p.noise_slope,
    })
}

/// `R(t, s) = (t^2H + s^2H - |t - s|^2H) / 2`.
#[pyfunction]
fn covariance(t: f64, s: f64, h: f64) -> PyResult<f64> {
    fbm::covariance(t, s, hurst(h)?).map_err(to_py)
}

/// `count` fBm paths on `steps` uniform steps of `[0, t_final]`, one list per path.
#[pyfunction]
fn sample_paths(t_final: f64, steps: usize, h: f64, count: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    let grid = TimeGrid::new(t_final, steps).map_err(to_py)?;
    let ens = fbm::sample_paths(grid, hurst(h)?, count, seed).map_err(to_py)?;
    Ok(ens.paths().rows().into_iter().map(|r| r.to_vec()).collect())
}

#[pyfunction]
fn eigenvalue(n: usize, r0: f64) -> PyResult<f64> {
    spectral::eigenvalue(n, r0).map_err(to_py)
}

#[pyfunction]
fn eigenfunction(n: usize, r0: f64, r: f64) -> PyResult<f64> {
    spectral::eigenfunction(n, r0, r).map_err(to_py)
}

#[pymodule]
fn helios_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyReconstruction>()?;
    m.add_class::<PyDecayProbe>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(decay_probe, m)?)?;
    m.add_function(wrap_pyfunction!(covariance, m)?)?;
    m.add_function(wrap_pyfunction!(sample_paths, m)?)?;
    m.add_function(wrap_pyfunction!(eigenvalue, m)?)?;
    m.add_function(wrap_pyfunction!(eigenfunction, m)?)?;
    Ok(())
}

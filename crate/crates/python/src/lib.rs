//! Python bindings: mode vectors, loop compilation, correlations, the source model,
//! dip fitting and delay scans. Structured results cross the boundary as JSON
//! strings.

use num_complex::Complex64;
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;

use timebin_hom::cli::{exit_code, EXIT_IO, EXIT_NUMERICAL};
use timebin_hom::demos::demo_scenario;
use timebin_hom::experiment::{self, Scenario};
use timebin_hom::interference::{
    self, global_correlation_closed_form, local_correlation, Indistinguishability,
};
use timebin_hom::network::{self, LoopConfig as CoreLoopConfig, SwitchingPattern};
use timebin_hom::source::{self, PdcSourceModel};
use timebin_hom::{Error, ModeSubset, ModeVector as CoreModeVector};

fn py_err(e: Error) -> PyErr {
    let msg = e.to_string();
    match exit_code(&e) {
        EXIT_IO => PyOSError::new_err(msg),
        EXIT_NUMERICAL => PyArithmeticError::new_err(msg),
        _ => PyValueError::new_err(msg),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for timebin_hom::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

/// Complex amplitudes over a window of time bins.
#[pyclass(name = "ModeVector", frozen, from_py_object)]
#[derive(Clone)]
struct ModeVector(CoreModeVector);

#[pymethods]
impl ModeVector {
    #[new]
    fn new(amplitudes: Vec<Complex64>) -> PyResult<Self> {
        CoreModeVector::new(amplitudes).py().map(Self)
    }

    #[getter]
    fn amplitudes(&self) -> Vec<Complex64> {
        self.0.amplitudes().to_vec()
    }

    #[getter]
    fn window(&self) -> usize {
        self.0.window()
    }

    fn norm(&self) -> f64 {
        self.0.norm()
    }

    fn populations(&self) -> Vec<f64> {
        self.0.populations()
    }

    #[pyo3(signature = (other, tol = 1e-9))]
    fn equal_up_to_global_phase(&self, other: &ModeVector, tol: f64) -> PyResult<bool> {
        self.0.equal_up_to_global_phase(&other.0, tol).py()
    }

    fn inner(&self, other: &ModeVector) -> PyResult<Complex64> {
        timebin_hom::inner_product(&self.0, &other.0).py()
    }

    fn __len__(&self) -> usize {
        self.0.window()
    }

    fn __repr__(&self) -> String {
        format!("ModeVector({})", self.0)
    }
}

#[pyclass(name = "LoopConfig", from_py_object)]
#[derive(Clone)]
struct LoopConfig(CoreLoopConfig);

#[pymethods]
impl LoopConfig {
    #[new]
    #[pyo3(signature = (window = 8, loop_efficiency = 0.8, max_roundtrips = 8))]
    fn new(window: usize, loop_efficiency: f64, max_roundtrips: usize) -> Self {
        Self(CoreLoopConfig {
            window,
            loop_efficiency,
            max_roundtrips,
            ..CoreLoopConfig::default()
        })
    }

    #[getter]
    fn window(&self) -> usize {
        self.0.window
    }

    #[getter]
    fn loop_efficiency(&self) -> f64 {
        self.0.loop_efficiency
    }

    #[getter]
    fn max_roundtrips(&self) -> usize {
        self.0.max_roundtrips
    }

    fn lossless(&self) -> Self {
        Self(self.0.lossless())
    }

    fn __repr__(&self) -> String {
        format!(
            "LoopConfig(window={}, loop_efficiency={}, max_roundtrips={})",
            self.0.window, self.0.loop_efficiency, self.0.max_roundtrips
        )
    }
}

/// Coin, in-coupling and out-coupling schedule of the loop.
#[pyclass(name = "SwitchingPattern", frozen, from_py_object)]
#[derive(Clone)]
struct Pattern(SwitchingPattern);

#[pymethods]
impl Pattern {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text)
            .map(Self)
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.0).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[getter]
    fn final_roundtrip(&self) -> usize {
        self.0.final_roundtrip()
    }

    fn is_hardware_only(&self) -> bool {
        self.0.is_hardware_only()
    }

    /// Diagnostics as strings; empty when the pattern runs on `cfg`.
    fn validate(&self, cfg: &LoopConfig) -> Vec<String> {
        network::validate_pattern(&self.0, &cfg.0)
            .iter()
            .map(|d| d.to_string())
            .collect()
    }
}

#[pyfunction]
#[pyo3(signature = (target, cfg, compensate_loss = false))]
fn compile_pattern(
    target: &ModeVector,
    cfg: &LoopConfig,
    compensate_loss: bool,
) -> PyResult<Pattern> {
    let p = if compensate_loss {
        network::compile_pattern_compensated(&target.0, &cfg.0)
    } else {
        network::compile_pattern(&target.0, &cfg.0)
    };
    p.py().map(Pattern)
}

#[pyfunction]
fn synthesize(pattern: &Pattern, cfg: &LoopConfig) -> PyResult<ModeVector> {
    network::synthesize(&pattern.0, &cfg.0).py().map(ModeVector)
}

fn subset(window: usize, bins: Option<Vec<usize>>) -> PyResult<ModeSubset> {
    match bins {
        Some(b) => ModeSubset::new(b, window).py(),
        None => ModeSubset::full(window).py(),
    }
}

/// `G⁽¹·¹⁾` as a list of rows.
#[pyfunction]
fn g11_matrix(
    alpha: &ModeVector,
    beta: &ModeVector,
    indistinguishability: f64,
) -> PyResult<Vec<Vec<f64>>> {
    let i = Indistinguishability::new(indistinguishability).py()?;
    let m = interference::g11_matrix(&alpha.0, &beta.0, i).py()?;
    Ok(m.rows().map(<[f64]>::to_vec).collect())
}

#[pyfunction]
#[pyo3(signature = (alpha, beta, indistinguishability, bins = None))]
fn global_correlation(
    alpha: &ModeVector,
    beta: &ModeVector,
    indistinguishability: f64,
    bins: Option<Vec<usize>>,
) -> PyResult<f64> {
    let i = Indistinguishability::new(indistinguishability).py()?;
    let s = subset(alpha.0.window(), bins)?;
    global_correlation_closed_form(&alpha.0, &beta.0, i, &s).py()
}

#[pyfunction]
#[pyo3(signature = (alpha, beta, indistinguishability, bins = None))]
fn local_correlation_sum(
    alpha: &ModeVector,
    beta: &ModeVector,
    indistinguishability: f64,
    bins: Option<Vec<usize>>,
) -> PyResult<f64> {
    let i = Indistinguishability::new(indistinguishability).py()?;
    let s = subset(alpha.0.window(), bins)?;
    let m = interference::g11_matrix(&alpha.0, &beta.0, i).py()?;
    local_correlation(&m, &s).py()
}

/// Normalized `(local, global)` visibilities for indistinguishable photons.
#[pyfunction]
#[pyo3(signature = (alpha, beta, bins = None))]
fn ideal_visibilities(
    alpha: &ModeVector,
    beta: &ModeVector,
    bins: Option<Vec<usize>>,
) -> PyResult<(Option<f64>, Option<f64>)> {
    let s = subset(alpha.0.window(), bins)?;
    experiment::ideal_visibilities(&alpha.0, &beta.0, &s).py()
}

fn source_model(
    nbar: f64,
    floor_i0: f64,
    herald_efficiency: f64,
    signal_efficiency: f64,
    n_max: usize,
) -> PdcSourceModel {
    PdcSourceModel {
        nbar,
        floor_i0,
        herald_efficiency,
        signal_efficiency,
        n_max,
    }
}

#[pyfunction]
#[pyo3(signature = (nbar, floor_i0 = 0.839, herald_efficiency = 0.3, signal_efficiency = 0.3, n_max = 6))]
fn fourfold_visibility(
    nbar: f64,
    floor_i0: f64,
    herald_efficiency: f64,
    signal_efficiency: f64,
    n_max: usize,
) -> PyResult<f64> {
    let m = source_model(nbar, floor_i0, herald_efficiency, signal_efficiency, n_max);
    Ok(source::fourfold_visibility(&m).py()?.value)
}

#[pyfunction]
#[pyo3(signature = (target_visibility, nbar, herald_efficiency = 0.3, signal_efficiency = 0.3, n_max = 6))]
fn calibrate_floor(
    target_visibility: f64,
    nbar: f64,
    herald_efficiency: f64,
    signal_efficiency: f64,
    n_max: usize,
) -> PyResult<f64> {
    let m = source_model(nbar, 1.0, herald_efficiency, signal_efficiency, n_max);
    Ok(source::calibrate_floor(target_visibility, nbar, &m)
        .py()?
        .value())
}

#[pyfunction]
fn klyshko_budget(transmissions: Vec<f64>) -> PyResult<f64> {
    let stages: Vec<(String, f64)> = transmissions
        .into_iter()
        .enumerate()
        .map(|(k, t)| (format!("stage {k}"), t))
        .collect();
    experiment::klyshko_budget(&stages).py()
}

/// Dip fit as JSON, including `visibility_error`.
#[pyfunction]
#[pyo3(signature = (delays, counts, errors = None))]
fn fit_dip(delays: Vec<f64>, counts: Vec<f64>, errors: Option<Vec<f64>>) -> PyResult<String> {
    let errors = errors.unwrap_or_else(|| counts.iter().map(|c| c.max(1.0).sqrt()).collect());
    let fit = experiment::fit_dip(&delays, &counts, &errors).py()?;
    let mut value = serde_json::to_value(&fit).map_err(|e| PyValueError::new_err(e.to_string()))?;
    value["visibility_error"] = experiment::visibility_error(&delays, &counts, &fit).into();
    Ok(value.to_string())
}

fn summary_json(scenario: &Scenario) -> PyResult<String> {
    let r = experiment::run_scan(scenario).py()?;
    r.summary().to_json().py()
}

/// Runs a scenario given as JSON and returns the summary JSON.
#[pyfunction]
#[pyo3(signature = (scenario_json, seed = None))]
fn run_scan(py: Python<'_>, scenario_json: &str, seed: Option<u64>) -> PyResult<String> {
    let mut s = Scenario::from_json(scenario_json).py()?;
    if let Some(seed) = seed {
        s.rng_seed = seed;
    }
    py.detach(|| summary_json(&s))
}

/// Runs a bundled scenario and returns the summary JSON.
#[pyfunction]
#[pyo3(signature = (name, seed = None))]
fn demo(py: Python<'_>, name: &str, seed: Option<u64>) -> PyResult<String> {
    let mut s = demo_scenario(name).py()?;
    if let Some(seed) = seed {
        s.rng_seed = seed;
    }
    py.detach(|| summary_json(&s))
}

#[pymodule]
fn timebin_hom_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<ModeVector>()?;
    m.add_class::<LoopConfig>()?;
    m.add_class::<Pattern>()?;
    m.add_function(wrap_pyfunction!(compile_pattern, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(g11_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(global_correlation, m)?)?;
    m.add_function(wrap_pyfunction!(local_correlation_sum, m)?)?;
    m.add_function(wrap_pyfunction!(ideal_visibilities, m)?)?;
    m.add_function(wrap_pyfunction!(fourfold_visibility, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_floor, m)?)?;
    m.add_function(wrap_pyfunction!(klyshko_budget, m)?)?;
    m.add_function(wrap_pyfunction!(fit_dip, m)?)?;
    m.add_function(wrap_pyfunction!(run_scan, m)?)?;
    m.add_function(wrap_pyfunction!(demo, m)?)?;
    Ok(())
}

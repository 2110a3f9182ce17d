//! Python bindings for `tripod_core`.
//!
//! Matrices cross the boundary as nested lists of Python `complex`, dark-state
//! amplitudes as two-element lists.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use tripod_core::cli::{self, RunConfig, ScenarioName};
use tripod_core::dynamics::{self, IgnitionStyle};
use tripod_core::holonomy::{self, cyclic_shift, nonabelian_witness};
use tripod_core::qmath::{normalized, CMat2, CVec, C64};
use tripod_core::reconstruct::{self, PhaseSign};
use tripod_core::thermal::{self, FitOptions, PopulationRecord, Scenario, ThermalSpec};
use tripod_core::tripod::{self as core_tripod, Envelope, RampShape, TripodConfig};
use tripod_core::{units, Error};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::InvalidLoop(_) | Error::InvalidState(_) | Error::IndexOutOfRange { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn matrix(u: &CMat2) -> Vec<Vec<C64>> {
    u.m.iter().map(|r| r.to_vec()).collect()
}

fn from_matrix(rows: Vec<Vec<C64>>) -> PyResult<CMat2> {
    if rows.len() != 2 || rows.iter().any(|r| r.len() != 2) {
        return Err(PyValueError::new_err("expected a 2x2 matrix"));
    }
    Ok(CMat2::from_rows([[rows[0][0], rows[0][1]], [rows[1][0], rows[1][1]]]))
}

fn dark_state(d: Vec<C64>) -> PyResult<CVec<2>> {
    let d: CVec<2> = d.try_into().map_err(|_| PyValueError::new_err("dark state needs two amplitudes"))?;
    if d.iter().map(|z| z.norm_sqr()).sum::<f64>() == 0.0 {
        return Err(PyValueError::new_err("dark state must be non-zero"));
    }
    Ok(normalized(&d))
}

/// Atom and laser configuration.
#[pyclass(name = "Tripod", module = "tripod", from_py_object)]
#[derive(Clone)]
struct PyTripod {
    inner: TripodConfig,
}

#[pymethods]
impl PyTripod {
    #[new]
    #[pyo3(signature = (rabi_khz = 450.0, temperature_uk = 0.5, recoil_khz = None, rabi_scale = (1.0, 1.0, 1.0)))]
    fn new(rabi_khz: f64, temperature_uk: f64, recoil_khz: Option<f64>, rabi_scale: (f64, f64, f64)) -> PyResult<Self> {
        let omega = units::khz_to_rad_per_us(rabi_khz);
        let mut cfg = TripodConfig::sr87(omega).with_temperature_uk(temperature_uk);
        let s = [rabi_scale.0, rabi_scale.1, rabi_scale.2];
        cfg = cfg.with_rabi(s.map(|x| Envelope::Constant(omega * x)));
        if let Some(r) = recoil_khz {
            cfg = cfg.with_recoil(units::khz_to_rad_per_us(r));
        }
        cfg.validate().map_err(to_py)?;
        Ok(Self { inner: cfg })
    }

    /// Recoil frequency in rad/us.
    #[getter]
    fn recoil(&self) -> f64 {
        self.inner.recoil
    }

    /// Thermal velocity in um/us.
    #[getter]
    fn thermal_velocity(&self) -> f64 {
        self.inner.thermal_velocity
    }

    /// Wavenumber in rad/um.
    #[getter]
    fn k(&self) -> f64 {
        self.inner.k()
    }

    #[getter]
    fn rabi(&self) -> [f64; 3] {
        self.inner.steady_rabi()
    }

    /// Gaussian decay time of the thermal interference signal in us.
    fn decoherence_time(&self) -> f64 {
        thermal::decoherence_time(&self.inner, self.inner.thermal_velocity)
    }

    /// `A` (three 2x2 matrices), `A^2/2M` and `W`.
    fn gauge_potentials<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let gp = core_tripod::gauge_potentials(&self.inner).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("vector", gp.vector.iter().map(matrix).collect::<Vec<_>>())?;
        d.set_item("a_sq_over_2m", matrix(&gp.a_sq_over_2m))?;
        d.set_item("scalar", matrix(&gp.scalar))?;
        Ok(d)
    }

    /// Recoil oscillation frequency `(2/3)[k(v_x - v_y) + 2 omega_R]`.
    #[pyo3(signature = (v = (0.0, 0.0, 0.0)))]
    fn omega_v(&self, v: (f64, f64, f64)) -> f64 {
        dynamics::omega_v(&self.inner, &[v.0, v.1, v.2])
    }

    /// Closed-form thermal populations of `D_2` after a hold of `t` us.
    fn mean_populations(&self, t: f64) -> [f64; 3] {
        thermal::mean_populations(&self.inner, &ThermalSpec::from_config(&self.inner), t)
    }

    fn __repr__(&self) -> String {
        format!(
            "Tripod(rabi={:?} rad/us, recoil={:.6} rad/us, vbar={:.6} um/us)",
            self.inner.steady_rabi(),
            self.inner.recoil,
            self.inner.thermal_velocity
        )
    }
}

/// Closed polygon in the `(phi_1, phi_2)` phase plane.
#[pyclass(name = "PhaseLoop", module = "tripod", from_py_object)]
#[derive(Clone)]
struct PyPhaseLoop {
    inner: holonomy::PhaseLoop,
}

#[pymethods]
impl PyPhaseLoop {
    /// Triangle `(0,0) -> (phi0,0) -> (phi0,phi0) -> (0,0)`, or the phi2-first variant.
    #[staticmethod]
    #[pyo3(signature = (phi0, segment_us = 4.0, phi2_first = false))]
    fn canonical(phi0: f64, segment_us: f64, phi2_first: bool) -> PyResult<Self> {
        let inner = if phi2_first {
            holonomy::PhaseLoop::canonical_phi2_first(phi0, segment_us)
        } else {
            holonomy::PhaseLoop::canonical(phi0, segment_us)
        };
        Ok(Self { inner: inner.map_err(to_py)? })
    }

    /// Polygon through `vertices`, closed back to the first one.
    #[staticmethod]
    fn from_vertices(vertices: Vec<(f64, f64)>, durations: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: holonomy::PhaseLoop::from_vertices(&vertices, &durations).map_err(to_py)? })
    }

    #[getter]
    fn vertices(&self) -> Vec<(f64, f64)> {
        self.inner.vertices()
    }

    #[getter]
    fn total_duration(&self) -> f64 {
        self.inner.total_duration()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Same loop started at another vertex.
    fn shifted(&self, start_vertex: usize) -> PyResult<Self> {
        Ok(Self { inner: cyclic_shift(&self.inner, start_vertex).map_err(to_py)? })
    }

    fn reversed(&self) -> Self {
        Self { inner: self.inner.reversed() }
    }

    /// Pinned-atom holonomy as a 2x2 complex matrix.
    fn holonomy(&self) -> PyResult<Vec<Vec<C64>>> {
        Ok(matrix(&holonomy::holonomy(&self.inner, 1).map_err(to_py)?))
    }

    fn __repr__(&self) -> String {
        format!("PhaseLoop(vertices={:?}, duration={} us)", self.inner.vertices(), self.inner.total_duration())
    }
}

/// `U`, `U'`, both Frobenius distances and the conjugacy check.
#[pyfunction]
#[pyo3(signature = (path, start_vertex = 1))]
fn nonabelian<'py>(py: Python<'py>, path: &PyPhaseLoop, start_vertex: usize) -> PyResult<Bound<'py, PyDict>> {
    let w = nonabelian_witness(&path.inner, start_vertex).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("u", matrix(&w.u))?;
    d.set_item("u_shifted", matrix(&w.u_shifted))?;
    d.set_item("distance", w.distance)?;
    d.set_item("distance_phase_min", w.distance_phase_min)?;
    d.set_item("conjugacy_residual", w.conjugacy_residual)?;
    d.set_item("trace_mismatch", w.trace_mismatch)?;
    Ok(d)
}

fn ensemble_dict<'py>(py: Python<'py>, r: &thermal::EnsembleResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("times", r.times.clone())?;
    d.set_item("populations", r.populations.clone())?;
    d.set_item("rho", r.rho.iter().map(matrix).collect::<Vec<_>>())?;
    d.set_item("purity", r.purity.clone())?;
    d.set_item("standard_error", r.standard_error.clone())?;
    d.set_item("nodes", r.nodes)?;
    Ok(d)
}

fn spec_for(cfg: &TripodConfig, order: usize, monte_carlo: Option<(usize, u64)>) -> ThermalSpec {
    let spec = ThermalSpec::from_config(cfg).with_order(order);
    match monte_carlo {
        Some((n, seed)) => spec.with_monte_carlo(n, seed),
        None => spec,
    }
}

/// Thermal average of the dark state `d0` carried around `path`.
#[pyfunction]
#[pyo3(signature = (atom, path, d0, samples = 1, order = 64, monte_carlo = None))]
fn ensemble_loop<'py>(
    py: Python<'py>,
    atom: &PyTripod,
    path: &PyPhaseLoop,
    d0: Vec<C64>,
    samples: usize,
    order: usize,
    monte_carlo: Option<(usize, u64)>,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = spec_for(&atom.inner, order, monte_carlo);
    let scenario = Scenario::Loop { path: path.inner.clone(), samples };
    let r = thermal::ensemble_average(&atom.inner, &spec, &scenario, &dark_state(d0)?).map_err(to_py)?;
    ensemble_dict(py, &r)
}

/// Thermal average of `d0` held at fixed phases.
#[pyfunction]
#[pyo3(signature = (atom, times, d0, phases = (0.0, 0.0), order = 64))]
fn ensemble_hold<'py>(
    py: Python<'py>,
    atom: &PyTripod,
    times: Vec<f64>,
    d0: Vec<C64>,
    phases: (f64, f64),
    order: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = spec_for(&atom.inner, order, None);
    let r = thermal::ensemble_average(&atom.inner, &spec, &Scenario::Static { phases, times }, &dark_state(d0)?)
        .map_err(to_py)?;
    ensemble_dict(py, &r)
}

/// Thermal velocity and temperature from `(t, (P1, P2, P3))` samples.
#[pyfunction]
fn fit_temperature<'py>(
    py: Python<'py>,
    atom: &PyTripod,
    times: Vec<f64>,
    populations: Vec<[f64; 3]>,
) -> PyResult<Bound<'py, PyDict>> {
    if times.len() != populations.len() {
        return Err(PyValueError::new_err("times and populations differ in length"));
    }
    let series: Vec<PopulationRecord> =
        times.iter().zip(&populations).map(|(&t, &p)| PopulationRecord { t, populations: p }).collect();
    let f = thermal::fit_temperature(&series, &atom.inner, &FitOptions { nuisance: true, v_max: None }).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("thermal_velocity", f.thermal_velocity)?;
    d.set_item("temperature_uk", f.temperature_uk)?;
    d.set_item("residual", f.residual)?;
    d.set_item("amplitude", f.amplitude)?;
    d.set_item("offset", f.offset)?;
    d.set_item("no_decay", f.no_decay)?;
    Ok(d)
}

/// Dark amplitudes `|d_1|, |d_2|` and azimuth from bare populations.
#[pyfunction]
fn dark_from_populations<'py>(py: Python<'py>, populations: [f64; 3]) -> PyResult<Bound<'py, PyDict>> {
    let r = reconstruct::dark_from_populations(populations).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("d1", r.d1)?;
    d.set_item("d2", r.d2)?;
    d.set_item("phi", r.phi)?;
    d.set_item(
        "sign",
        match r.sign {
            PhaseSign::Unresolved => "unresolved",
            PhaseSign::PredictionResolved => "prediction_resolved",
            PhaseSign::Ambiguous => "ambiguous",
            PhaseSign::Undefined => "undefined",
            PhaseSign::NoAmbiguity => "no_ambiguity",
        },
    )?;
    d.set_item("clamped", r.clamped)?;
    Ok(d)
}

/// SU(2) operator from the output populations of two inputs.
#[pyfunction]
fn unitary_from_populations<'py>(
    py: Python<'py>,
    inputs: [Vec<C64>; 2],
    populations: [[f64; 3]; 2],
    predicted: Vec<Vec<C64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let [a, b] = inputs;
    let (fit, _) = reconstruct::unitary_from_populations([dark_state(a)?, dark_state(b)?], populations, &from_matrix(predicted)?)
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("u", matrix(&fit.u))?;
    d.set_item("residual", fit.residual)?;
    d.set_item("distance_to_prediction", fit.distance_to_prediction)?;
    d.set_item("consistent", fit.consistent)?;
    Ok(d)
}

/// Bare populations of a dark state in the equal-amplitude frame.
#[pyfunction]
fn populations_of(d: Vec<C64>) -> PyResult<[f64; 3]> {
    Ok(reconstruct::populations_of(&dark_state(d)?))
}

/// Turn-on sequence from `|3>`; `style` is "d2" or "mixed".
#[pyfunction]
#[pyo3(signature = (atom, style, t0 = 8.0, sine_squared = false))]
fn ignite<'py>(py: Python<'py>, atom: &PyTripod, style: &str, t0: f64, sine_squared: bool) -> PyResult<Bound<'py, PyDict>> {
    let style = match style {
        "d2" => IgnitionStyle::D2,
        "mixed" => IgnitionStyle::Mixed,
        _ => return Err(PyValueError::new_err("style must be \"d2\" or \"mixed\"")),
    };
    let shape = if sine_squared { RampShape::SineSquared } else { RampShape::Linear };
    let r = dynamics::ignite(&atom.inner, style, t0, shape).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("dark", r.dark.to_vec())?;
    d.set_item("dark_weight", r.dark_weight)?;
    d.set_item("fidelity", r.fidelity)?;
    d.set_item("max_leakage", r.max_leakage)?;
    d.set_item("failed", r.failed)?;
    Ok(d)
}

#[pyfunction]
fn preset_d2() -> Vec<C64> {
    dynamics::preset_d2().to_vec()
}

#[pyfunction]
fn preset_mixed_ideal() -> Vec<C64> {
    dynamics::preset_mixed_ideal().to_vec()
}

#[pyfunction]
fn preset_mixed_measured() -> Vec<C64> {
    dynamics::preset_mixed_measured().to_vec()
}

/// Runs a CLI scenario and returns `(csv, summary_lines)`.
#[pyfunction]
#[pyo3(signature = (scenario, config = ""))]
fn run_scenario(scenario: &str, config: &str) -> PyResult<(String, Vec<String>)> {
    let name = match scenario {
        "fig2" => ScenarioName::Fig2,
        "fig3" => ScenarioName::Fig3,
        "fig4" => ScenarioName::Fig4,
        "thermometry" => ScenarioName::Thermometry,
        "adiabaticity" => ScenarioName::Adiabaticity,
        "loop" => ScenarioName::Loop,
        _ => return Err(PyValueError::new_err(format!("unknown scenario `{scenario}`"))),
    };
    let mut cfg = RunConfig::defaults(name);
    cfg.apply_text(config).map_err(to_py)?;
    let out = cli::run(&cfg).map_err(to_py)?;
    Ok((out.csv, out.summary))
}

#[pymodule]
fn tripod(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTripod>()?;
    m.add_class::<PyPhaseLoop>()?;
    m.add_function(wrap_pyfunction!(nonabelian, m)?)?;
    m.add_function(wrap_pyfunction!(ensemble_loop, m)?)?;
    m.add_function(wrap_pyfunction!(ensemble_hold, m)?)?;
    m.add_function(wrap_pyfunction!(fit_temperature, m)?)?;
    m.add_function(wrap_pyfunction!(dark_from_populations, m)?)?;
    m.add_function(wrap_pyfunction!(unitary_from_populations, m)?)?;
    m.add_function(wrap_pyfunction!(populations_of, m)?)?;
    m.add_function(wrap_pyfunction!(ignite, m)?)?;
    m.add_function(wrap_pyfunction!(preset_d2, m)?)?;
    m.add_function(wrap_pyfunction!(preset_mixed_ideal, m)?)?;
    m.add_function(wrap_pyfunction!(preset_mixed_measured, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}

//! Python bindings: coupler parameters, Floquet analysis, phase diagrams,
//! state propagation, the reservoir comparison and the validation suite.

use num_complex::Complex64;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ptcoupler::cli::parse_state;
use ptcoupler::floquet::{
    classify_pt, monodromy_2x2, monodromy_full, occupation_trajectories, phase_diagram,
    static_threshold, Axis, FloquetOptions, PhaseDiagramSpec, DEFAULT_EPS_SPLIT,
};
use ptcoupler::fock::TwoModeBasis;
use ptcoupler::loss::{Loss, DEFAULT_MIN_RATIO};
use ptcoupler::reservoir::{decay_comparison, full_system_comparison, Guide, ReservoirConfig};
use ptcoupler::superop::CouplerParams;
use ptcoupler::validate::{run_validation, ValidationConfig};
use ptcoupler::wei_norman::WeiNormanOptions;
use ptcoupler::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        Error::Config(_)
        | Error::InvalidParameter(_)
        | Error::OutOfRange(_)
        | Error::UnknownLabel(_)
        | Error::DimensionMismatch { .. } => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// `(omega, gamma_max, phase, splitting)`
type GridRow = (f64, f64, Option<String>, f64);

fn wn(tol: f64) -> WeiNormanOptions {
    WeiNormanOptions::with_tol(tol)
}

/// Two coupled guides, loss on guide 1.
#[pyclass(name = "Coupler", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyCoupler {
    inner: CouplerParams,
}

#[pymethods]
impl PyCoupler {
    /// Pulsed loss with peak `gamma_max` and frequency `omega`, both in units
    /// of `kappa`.
    #[staticmethod]
    #[pyo3(signature = (kappa, gamma_max, omega, min_ratio = DEFAULT_MIN_RATIO))]
    fn modulated(kappa: f64, gamma_max: f64, omega: f64, min_ratio: f64) -> PyResult<Self> {
        let inner = CouplerParams::modulated(kappa, gamma_max, omega, min_ratio).map_err(py_err)?;
        Ok(Self { inner })
    }

    /// Constant loss rate; `period` is the reference period of the Floquet analysis.
    #[staticmethod]
    #[pyo3(signature = (kappa, gamma, period = 1.0))]
    fn constant(kappa: f64, gamma: f64, period: f64) -> PyResult<Self> {
        let loss = Loss::constant(gamma, period).map_err(py_err)?;
        let inner = CouplerParams::new(kappa, loss).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa
    }

    #[getter]
    fn period(&self) -> f64 {
        self.inner.period()
    }

    #[getter]
    fn mean_loss(&self) -> f64 {
        self.inner.loss.mean()
    }

    #[getter]
    fn peak_loss(&self) -> f64 {
        self.inner.loss.peak()
    }

    fn gamma(&self, z: f64) -> f64 {
        self.inner.gamma(z)
    }

    fn __repr__(&self) -> String {
        format!(
            "Coupler(kappa={}, period={}, mean_loss={})",
            self.inner.kappa,
            self.inner.period(),
            self.inner.loss.mean()
        )
    }
}

/// Single-photon Floquet analysis: exponents, Lyapunov exponents, splitting
/// and PT phase.
#[pyfunction]
#[pyo3(signature = (coupler, eps_split = DEFAULT_EPS_SPLIT, tol = 1e-10))]
fn floquet<'py>(
    py: Python<'py>,
    coupler: PyRef<'_, PyCoupler>,
    eps_split: f64,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let opts = FloquetOptions { rtol: tol, atol: tol * 1e-2 };
    let r = monodromy_2x2(&coupler.inner, &opts).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("period", r.period)?;
    d.set_item("exponents", r.exponents.clone())?;
    d.set_item("multipliers", r.multipliers())?;
    d.set_item("lyapunov", r.lyapunov.clone())?;
    d.set_item("splitting", r.splitting())?;
    d.set_item("phase", classify_pt(&r, eps_split * coupler.inner.kappa).to_string())?;
    Ok(d)
}

/// One-period Liouville-space propagator from the product expansion, as
/// nested lists, together with its Lyapunov exponents.
#[pyfunction]
#[pyo3(signature = (coupler, n_max = 3, tol = 1e-10))]
fn monodromy(
    coupler: PyRef<'_, PyCoupler>,
    n_max: usize,
    tol: f64,
) -> PyResult<(Vec<Vec<Complex64>>, Vec<f64>)> {
    let basis = TwoModeBasis::new(n_max);
    let r = monodromy_full(&coupler.inner, &basis, &wn(tol)).map_err(py_err)?;
    let rows = r
        .monodromy
        .row_iter()
        .map(|row| row.iter().copied().collect())
        .collect();
    Ok((rows, r.lyapunov))
}

/// Constant-loss splitting onset.
#[pyfunction]
#[pyo3(signature = (kappa = 1.0, eps_split = DEFAULT_EPS_SPLIT))]
fn threshold(kappa: f64, eps_split: f64) -> PyResult<f64> {
    static_threshold(kappa, eps_split * kappa, &FloquetOptions::default()).map_err(py_err)
}

/// Grid classification; returns `(omega, gamma_max, phase, splitting)` rows
/// (phase is `None` for points that failed).
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (omega = (0.2, 3.0), gamma_max = (0.01, 2.5), n_omega = 141, n_gamma = 125, kappa = 1.0, min_ratio = DEFAULT_MIN_RATIO, eps_split = DEFAULT_EPS_SPLIT))]
fn sweep(
    py: Python<'_>,
    omega: (f64, f64),
    gamma_max: (f64, f64),
    n_omega: usize,
    n_gamma: usize,
    kappa: f64,
    min_ratio: f64,
    eps_split: f64,
) -> PyResult<Vec<GridRow>> {
    let spec = PhaseDiagramSpec {
        omega: Axis::new(omega.0, omega.1, n_omega).map_err(py_err)?,
        gamma_max: Axis::new(gamma_max.0, gamma_max.1, n_gamma).map_err(py_err)?,
        kappa,
        min_ratio,
        eps_split,
        ..PhaseDiagramSpec::default()
    };
    let d = py.detach(|| phase_diagram(&spec)).map_err(py_err)?;
    Ok(d.points
        .iter()
        .map(|p| (p.omega, p.gamma_max, p.phase.map(|ph| ph.to_string()), p.splitting))
        .collect())
}

/// Occupations of every basis state on `samples` points of `[0, z_max]`.
/// `state` uses the CLI syntax (`superposition:N`, `fock:M,H`,
/// `amplitudes:...`). Returns a dict with `z`, `states`, `occupations`
/// (one row per sample) and `trace`.
#[pyfunction]
#[pyo3(signature = (coupler, state = "superposition:3", z_max = None, samples = 401, n_max = 3, tol = 1e-10))]
fn evolve<'py>(
    py: Python<'py>,
    coupler: PyRef<'_, PyCoupler>,
    state: &str,
    z_max: Option<f64>,
    samples: usize,
    n_max: usize,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let basis = TwoModeBasis::new(n_max);
    let rho0 = parse_state(state, &basis).map_err(py_err)?;
    let params = coupler.inner;
    let z_max = z_max.unwrap_or(10.0 * params.period());
    let t = py
        .detach(|| occupation_trajectories(&params, &rho0, z_max, samples, &wn(tol)))
        .map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("z", t.z)?;
    d.set_item("states", t.states)?;
    d.set_item("occupations", t.rows)?;
    d.set_item("trace", t.trace)?;
    Ok(d)
}

/// Waveguide-array reservoir against the Markovian prediction. With
/// `kappa = 0` the reference is the normalized `exp(-int gamma)`; otherwise
/// the one-photon population of the equivalent master equation.
#[pyfunction]
#[pyo3(signature = (n_bath = 200, kappa_b = 1.0, kappa = 0.0, gamma_max = 0.125, omega = 1.0, min_ratio = DEFAULT_MIN_RATIO, input = "lossy"))]
#[allow(clippy::too_many_arguments)]
fn reservoir<'py>(
    py: Python<'py>,
    n_bath: usize,
    kappa_b: f64,
    kappa: f64,
    gamma_max: f64,
    omega: f64,
    min_ratio: f64,
    input: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = ReservoirConfig::for_target(n_bath, kappa_b, kappa, gamma_max, omega, min_ratio)
        .map_err(py_err)?;
    let d = PyDict::new(py);
    if kappa > 0.0 {
        let guide = match input {
            "lossy" => Guide::Lossy,
            "lossless" => Guide::Lossless,
            other => return Err(PyValueError::new_err(format!("input must be lossy or lossless, got {other}"))),
        };
        let r = py
            .detach(|| full_system_comparison(&cfg, guide, &WeiNormanOptions::default()))
            .map_err(py_err)?;
        d.set_item("z", r.trajectory.z)?;
        d.set_item("system_population", r.trajectory.system_population)?;
        d.set_item("reference", r.lindblad)?;
        d.set_item("deviation", r.deviation)?;
        d.set_item("recurrence", r.recurrence)?;
        d.set_item("max_deviation", r.max_deviation)?;
    } else {
        let r = py.detach(|| decay_comparison(&cfg)).map_err(py_err)?;
        d.set_item("z", r.trajectory.z)?;
        d.set_item("system_population", r.trajectory.system_population)?;
        d.set_item("reference", r.analytic.population)?;
        d.set_item("deviation", r.deviation)?;
        d.set_item("recurrence", r.recurrence)?;
        d.set_item("max_deviation", r.max_deviation)?;
    }
    Ok(d)
}

/// Runs the consistency suite; returns `(passed, report_text)`.
#[pyfunction]
#[pyo3(signature = (n_max = 3, omegas = vec![1.5, 2.0], tol = 1e-10, n_states = 20))]
fn validate(py: Python<'_>, n_max: usize, omegas: Vec<f64>, tol: f64, n_states: usize) -> PyResult<(bool, String)> {
    let cfg = ValidationConfig {
        n_max,
        omegas,
        wei_norman: wn(tol),
        n_states,
        ..ValidationConfig::default()
    };
    let r = py.detach(|| run_validation(&cfg)).map_err(py_err)?;
    Ok((r.passed, r.to_string()))
}

#[pymodule]
fn pyptcoupler(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCoupler>()?;
    m.add_function(wrap_pyfunction!(floquet, m)?)?;
    m.add_function(wrap_pyfunction!(monodromy, m)?)?;
    m.add_function(wrap_pyfunction!(threshold, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(reservoir, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}

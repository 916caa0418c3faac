//! Python bindings: states, engineered channels, stage evolution, steady
//! states, fidelity, Otto efficiencies and the electronic reset.

use ion_reservoir::fock::{self, DensityMatrix, FockSpace, Operator};
use ion_reservoir::lasers::{self, EngineeredChannel, LaserLine, Preset};
use ion_reservoir::linalg::Matrix;
use ion_reservoir::{collision, metrics, otto, reset, Stepper};
use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: ion_reservoir::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn space(dim: usize) -> PyResult<FockSpace> {
    FockSpace::new(dim).map_err(err)
}

fn to_rows(m: &Matrix) -> Vec<Vec<Complex64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn from_rows(rows: Vec<Vec<Complex64>>) -> PyResult<Matrix> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    Ok(Matrix::from_shape_fn((n, n), |(i, j)| rows[i][j]))
}

/// Motional density matrix in a truncated Fock space.
#[pyclass(name = "State", module = "ion_reservoir", from_py_object)]
#[derive(Clone)]
struct PyState {
    inner: DensityMatrix,
}

#[pymethods]
impl PyState {
    /// Build from a square nested list of complex entries.
    #[new]
    fn new(matrix: Vec<Vec<Complex64>>) -> PyResult<Self> {
        let m = from_rows(matrix)?;
        let inner = DensityMatrix::new(space(m.nrows())?, m).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn vacuum(dim: usize) -> PyResult<Self> {
        Ok(Self {
            inner: fock::vacuum(space(dim)?),
        })
    }

    #[staticmethod]
    fn number(dim: usize, n: usize) -> PyResult<Self> {
        Ok(Self {
            inner: fock::number_state(space(dim)?, n).map_err(err)?,
        })
    }

    #[staticmethod]
    fn thermal(dim: usize, nbar: f64) -> PyResult<Self> {
        Ok(Self {
            inner: fock::thermal_state(space(dim)?, nbar).map_err(err)?,
        })
    }

    #[staticmethod]
    fn coherent(dim: usize, alpha: Complex64) -> PyResult<Self> {
        Ok(Self {
            inner: fock::coherent_state(space(dim)?, alpha),
        })
    }

    #[staticmethod]
    fn squeezed_vacuum(dim: usize, r: f64) -> PyResult<Self> {
        Ok(Self {
            inner: fock::squeezed_vacuum(space(dim)?, r),
        })
    }

    #[staticmethod]
    fn squeezed_coherent(dim: usize, r: f64, alpha: Complex64) -> PyResult<Self> {
        Ok(Self {
            inner: fock::squeezed_coherent_state(space(dim)?, r, alpha),
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.space().dim()
    }

    fn matrix(&self) -> Vec<Vec<Complex64>> {
        to_rows(self.inner.matrix())
    }

    fn trace(&self) -> Complex64 {
        self.inner.trace()
    }

    fn population(&self, n: usize) -> f64 {
        self.inner.population(n)
    }

    fn mean_occupation(&self) -> f64 {
        metrics::mean_occupation(&self.inner)
    }

    #[pyo3(signature = (k = 2))]
    fn tail_mass(&self, k: usize) -> f64 {
        metrics::tail_mass(&self.inner, k)
    }

    fn fidelity(&self, other: &PyState) -> PyResult<f64> {
        metrics::fidelity(&self.inner, &other.inner).map_err(err)
    }

    fn trace_distance(&self, other: &PyState) -> PyResult<f64> {
        metrics::trace_distance(&self.inner, &other.inner).map_err(err)
    }

    /// `trace_error`, `hermiticity_error` and `min_eigenvalue`.
    fn diagnostics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = self.inner.diagnostics().map_err(err)?;
        let out = PyDict::new(py);
        out.set_item("trace_error", d.trace_error)?;
        out.set_item("hermiticity_error", d.hermiticity_error)?;
        out.set_item("min_eigenvalue", d.min_eigenvalue)?;
        Ok(out)
    }

    fn __repr__(&self) -> String {
        format!(
            "State(dim={}, mean_occupation={:.6})",
            self.dim(),
            metrics::mean_occupation(&self.inner)
        )
    }
}

/// Rescaled engineered channel `(K', ε)`.
#[pyclass(name = "Channel", module = "ion_reservoir", from_py_object)]
#[derive(Clone)]
struct PyChannel {
    inner: EngineeredChannel,
}

fn preset_from(
    kind: &str,
    r: Option<f64>,
    alpha: Option<Complex64>,
    nbar: Option<f64>,
) -> PyResult<Preset> {
    let need = |v: Option<f64>, name: &str| {
        v.ok_or_else(|| PyValueError::new_err(format!("preset `{kind}` needs `{name}`")))
    };
    let alpha_of =
        || alpha.ok_or_else(|| PyValueError::new_err(format!("preset `{kind}` needs `alpha`")));
    Ok(match kind {
        "cooling" => Preset::Cooling,
        "heating" => Preset::Heating,
        "coherent" => Preset::Coherent { alpha: alpha_of()? },
        "squeezed" => Preset::Squeezed { r: need(r, "r")? },
        "squeezed_coherent" => Preset::SqueezedCoherent {
            r: need(r, "r")?,
            alpha: alpha_of()?,
        },
        "thermal_pair" => Preset::ThermalPair {
            nbar: need(nbar, "nbar")?,
        },
        other => return Err(PyValueError::new_err(format!("unknown preset `{other}`"))),
    })
}

#[pymethods]
impl PyChannel {
    /// Explicit `K'` as a nested list, with increment `epsilon`.
    #[new]
    fn new(k_prime: Vec<Vec<Complex64>>, epsilon: f64) -> PyResult<Self> {
        let m = from_rows(k_prime)?;
        let op = Operator::new(space(m.nrows())?, m).map_err(err)?;
        Ok(Self {
            inner: EngineeredChannel::new(op, epsilon).map_err(err)?,
        })
    }

    /// `K' = a·â + adag·â† + identity·I`.
    #[staticmethod]
    #[pyo3(signature = (dim, epsilon, a = Complex64::new(1.0, 0.0), adag = Complex64::new(0.0, 0.0), identity = Complex64::new(0.0, 0.0)))]
    fn ideal(
        dim: usize,
        epsilon: f64,
        a: Complex64,
        adag: Complex64,
        identity: Complex64,
    ) -> PyResult<Self> {
        let s = space(dim)?;
        let k = &(&fock::annihilation(s).scale(a) + &fock::creation(s).scale(adag))
            + &Operator::identity(s).scale(identity);
        Ok(Self {
            inner: EngineeredChannel::new(k, epsilon).map_err(err)?,
        })
    }

    /// Laser lines `[(m, ratio), ...]`; the first entry is the anchor.
    #[staticmethod]
    #[pyo3(signature = (dim, lines, eta = 0.05, pulse_area = 4.5))]
    fn from_lines(dim: usize, lines: Vec<(i32, f64)>, eta: f64, pulse_area: f64) -> PyResult<Self> {
        let lines = lines
            .into_iter()
            .map(|(m, ratio)| LaserLine::new(m, ratio, eta))
            .collect::<ion_reservoir::Result<Vec<_>>>()
            .map_err(err)?;
        let spec = lasers::ChannelSpec::new(lines, pulse_area).map_err(err)?;
        Ok(Self {
            inner: lasers::rescale_channel(space(dim)?, &spec).map_err(err)?,
        })
    }

    /// Channels of a named preset: `cooling`, `heating`, `coherent`,
    /// `squeezed`, `squeezed_coherent` or `thermal_pair`.
    #[staticmethod]
    #[pyo3(signature = (kind, dim, r = None, alpha = None, nbar = None, eta = 0.05, pulse_area = 4.5))]
    fn preset(
        kind: &str,
        dim: usize,
        r: Option<f64>,
        alpha: Option<Complex64>,
        nbar: Option<f64>,
        eta: f64,
        pulse_area: f64,
    ) -> PyResult<Vec<Self>> {
        let p = preset_from(kind, r, alpha, nbar)?;
        let chans = lasers::preset_channels(space(dim)?, p, eta, pulse_area).map_err(err)?;
        Ok(chans.into_iter().map(|inner| Self { inner }).collect())
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.space().dim()
    }

    fn k_prime(&self) -> Vec<Vec<Complex64>> {
        to_rows(self.inner.k_prime.matrix())
    }

    fn exceeds_guard(&self) -> bool {
        self.inner.exceeds_guard()
    }

    fn __repr__(&self) -> String {
        format!(
            "Channel(dim={}, epsilon={:e})",
            self.dim(),
            self.inner.epsilon
        )
    }
}

fn to_core(list: &[PyChannel]) -> Vec<EngineeredChannel> {
    list.iter().map(|c| c.inner.clone()).collect()
}

fn parse_stepper(name: &str) -> PyResult<Stepper> {
    name.parse().map_err(err)
}

/// States after each stage, starting with `state`.
#[pyfunction]
#[pyo3(signature = (state, channels, n_stages, stepper = "semigroup"))]
fn evolve(
    state: &PyState,
    channels: Vec<PyChannel>,
    n_stages: usize,
    stepper: &str,
) -> PyResult<Vec<PyState>> {
    let tr = collision::evolve(
        &state.inner,
        &to_core(&channels),
        n_stages,
        parse_stepper(stepper)?,
    )
    .map_err(err)?;
    Ok(tr
        .states
        .into_iter()
        .map(|inner| PyState { inner })
        .collect())
}

/// Kernel of the Liouvillian, with `kernel_eigenvalue`, `gap` and `tail_mass`.
#[pyfunction]
fn steady_state<'py>(
    py: Python<'py>,
    channels: Vec<PyChannel>,
) -> PyResult<(PyState, Bound<'py, PyDict>)> {
    let l = collision::liouvillian(&to_core(&channels)).map_err(err)?;
    let ss = collision::steady_state(&l).map_err(err)?;
    let info = PyDict::new(py);
    info.set_item("kernel_eigenvalue", ss.kernel_eigenvalue)?;
    info.set_item("gap", ss.gap)?;
    info.set_item("tail_mass", ss.tail_mass)?;
    info.set_item("truncation_dominated", ss.truncation_dominated)?;
    Ok((PyState { inner: ss.state }, info))
}

#[pyfunction]
fn fidelity(rho: &PyState, sigma: &PyState) -> PyResult<f64> {
    rho.fidelity(sigma)
}

/// Quench-regime Otto cycle.
#[pyclass(name = "OttoParams", module = "ion_reservoir", from_py_object)]
#[derive(Clone)]
struct PyOtto {
    inner: otto::OttoParams,
}

#[pymethods]
impl PyOtto {
    #[new]
    #[pyo3(signature = (nu0, nu1, nbar_a, alpha = Complex64::new(0.0, 0.0), zeta_over_nu1 = Complex64::new(0.0, 0.0)))]
    fn new(
        nu0: f64,
        nu1: f64,
        nbar_a: f64,
        alpha: Complex64,
        zeta_over_nu1: Complex64,
    ) -> PyResult<Self> {
        let inner = otto::OttoParams::new(nu0, nu1, zeta_over_nu1, nbar_a, alpha).map_err(err)?;
        Ok(Self { inner })
    }

    fn chi(&self) -> PyResult<f64> {
        otto::chi_closed_form(&self.inner).map_err(err)
    }

    /// `None` outside the engine regime.
    fn efficiency(&self) -> Option<f64> {
        otto::efficiency(&self.inner).value
    }

    fn regime(&self) -> &'static str {
        otto::efficiency(&self.inner).regime.as_str()
    }

    fn otto_reference(&self) -> f64 {
        otto::otto_reference(self.inner.nu0, self.inner.nu1)
    }

    /// Stroke works and heats `w1, q2, w3, q4, w_total`.
    fn energetics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let e = otto::energetics_closed(&self.inner);
        let out = PyDict::new(py);
        for (k, v) in [
            ("w1", e.w1),
            ("q2", e.q2),
            ("w3", e.w3),
            ("q4", e.q4),
            ("w_total", e.w_total),
        ] {
            out.set_item(k, v)?;
        }
        Ok(out)
    }

    /// `w_total` and efficiency from traces over truncated cycle states.
    fn energetics_numeric(&self, dim: usize) -> PyResult<(f64, Option<f64>)> {
        let (ra, rc) = otto::cycle_states(space(dim)?, &self.inner).map_err(err)?;
        let num = otto::energetics_numeric(&ra, &rc, &self.inner).map_err(err)?;
        let eff = otto::efficiency_from_energetics(&num.cycle).value;
        Ok((num.cycle.w_total, eff))
    }
}

/// Two-step optical pumping: final level populations.
#[pyfunction]
#[pyo3(signature = (populations, omega_tilde, gamma30 = 1.0, step_time = None))]
fn full_reset(
    populations: [f64; 4],
    omega_tilde: f64,
    gamma30: f64,
    step_time: Option<f64>,
) -> PyResult<[f64; 4]> {
    let p = reset::ResetParams::new(omega_tilde, gamma30).map_err(err)?;
    let rho = reset::ElectronicState::mixture(populations).map_err(err)?;
    let out = reset::full_reset(&rho, &p, step_time).map_err(err)?;
    Ok([0, 1, 2, 3].map(|j| out.population(j)))
}

/// Fitted decay rate of the pumped level and `Γ_eff = 4Ω̃²/Γ₃₀`.
#[pyfunction]
#[pyo3(signature = (omega_tilde, gamma30 = 1.0, level = 1))]
fn reset_rate(omega_tilde: f64, gamma30: f64, level: usize) -> PyResult<(Option<f64>, f64)> {
    let p = reset::ResetParams::new(omega_tilde, gamma30).map_err(err)?;
    let start = reset::ElectronicState::level(level).map_err(err)?;
    let tr =
        reset::reset_step(&start, level, &p, 4.0 / p.gamma_eff(), p.default_dt()).map_err(err)?;
    Ok((reset::fit_decay_rate(&tr, level), p.gamma_eff()))
}

#[pymodule]
#[pyo3(name = "ion_reservoir")]
fn ion_reservoir_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyState>()?;
    m.add_class::<PyChannel>()?;
    m.add_class::<PyOtto>()?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(steady_state, m)?)?;
    m.add_function(wrap_pyfunction!(fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(full_reset, m)?)?;
    m.add_function(wrap_pyfunction!(reset_rate, m)?)?;
    Ok(())
}

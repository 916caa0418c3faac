//! Optical-pumping reset of the four electronic levels `|0⟩ … |3⟩`.
//!
//! Level `|3⟩` decays to `|0⟩` at rate `Γ₃₀`; a weak carrier drive couples the
//! target level (`|1⟩` or `|2⟩`) to `|3⟩`. Times are in units of `1/Γ₃₀` when
//! `gamma30 = 1`.

use log::warn;
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::fock::{HERMITICITY_TOL, POSITIVITY_TOL, TRACE_TOL};
use crate::linalg::{self, Matrix, C64, I, ONE, ZERO};

pub const LEVELS: usize = 4;
const EXCITED: usize = 3;
pub const MAX_RATIO: f64 = 0.2;
pub const WARN_RATIO: f64 = 0.1;
/// Default integration step in units of `1/Γ₃₀`.
pub const DEFAULT_DT: f64 = 0.005;
pub const MAX_DT: f64 = 0.01;
/// Upper bound on stored samples per trace.
pub const MAX_SAMPLES: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResetParams {
    /// Reset Rabi frequency `Ω̃_r`.
    pub omega_tilde: f64,
    /// Spontaneous decay rate `Γ₃₀`.
    pub gamma30: f64,
}

impl ResetParams {
    pub fn new(omega_tilde: f64, gamma30: f64) -> Result<Self> {
        if !(gamma30 > 0.0) || !gamma30.is_finite() {
            return Err(Error::param(
                "gamma30",
                format!("must be > 0, got {gamma30}"),
            ));
        }
        if !(omega_tilde >= 0.0) || !omega_tilde.is_finite() {
            return Err(Error::param(
                "omega_tilde",
                format!("must be >= 0, got {omega_tilde}"),
            ));
        }
        let ratio = omega_tilde / gamma30;
        if ratio > MAX_RATIO {
            return Err(Error::param(
                "omega_tilde",
                format!("omega_tilde/gamma30 = {ratio} exceeds {MAX_RATIO}"),
            ));
        }
        if ratio > WARN_RATIO {
            warn!("omega_tilde/gamma30 = {ratio} is outside the adiabatic regime");
        }
        Ok(Self {
            omega_tilde,
            gamma30,
        })
    }

    /// `4 Ω̃² / Γ₃₀`.
    pub fn gamma_eff(&self) -> f64 {
        4.0 * self.omega_tilde * self.omega_tilde / self.gamma30
    }

    pub fn default_dt(&self) -> f64 {
        DEFAULT_DT / self.gamma30
    }

    /// `8 / Γ_eff`.
    pub fn default_step_time(&self) -> f64 {
        8.0 / self.gamma_eff()
    }
}

/// Density matrix of the electronic levels.
#[derive(Debug, Clone, PartialEq)]
pub struct ElectronicState {
    matrix: Matrix,
}

impl ElectronicState {
    pub fn new(matrix: Matrix) -> Result<Self> {
        if matrix.dim() != (LEVELS, LEVELS) {
            return Err(Error::DimensionMismatch {
                expected: LEVELS,
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        if !linalg::is_finite(&matrix) {
            return Err(Error::NonFinite);
        }
        let state = Self { matrix };
        let herm = linalg::hermiticity_error(&state.matrix);
        if herm > HERMITICITY_TOL {
            return Err(Error::InvalidState(format!("not Hermitian ({herm:e})")));
        }
        let tr = state.trace_error();
        if tr > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace deviates by {tr:e}")));
        }
        let min = state.min_eigenvalue()?;
        if min < -POSITIVITY_TOL {
            return Err(Error::NegativeEigenvalue(min));
        }
        Ok(state)
    }

    pub fn level(j: usize) -> Result<Self> {
        if j >= LEVELS {
            return Err(Error::param("level", format!("{j} is not one of 0..=3")));
        }
        let mut m = Array2::zeros((LEVELS, LEVELS));
        m[[j, j]] = ONE;
        Ok(Self { matrix: m })
    }

    pub fn ground() -> Self {
        Self::level(0).expect("level 0 exists")
    }

    /// Diagonal state with the given populations.
    pub fn mixture(populations: [f64; LEVELS]) -> Result<Self> {
        let m = Array2::from_diag(&ndarray::Array1::from_iter(
            populations.iter().map(|&p| C64::from(p)),
        ));
        Self::new(m)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn population(&self, j: usize) -> f64 {
        self.matrix[[j, j]].re
    }

    pub fn coherence(&self, j: usize, k: usize) -> C64 {
        self.matrix[[j, k]]
    }

    pub fn trace_error(&self) -> f64 {
        (linalg::trace(&self.matrix) - ONE).norm()
    }

    pub fn hermiticity_error(&self) -> f64 {
        linalg::hermiticity_error(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let w = linalg::hermitian_eigenvalues(&self.matrix)?;
        Ok(w.iter().cloned().fold(f64::INFINITY, f64::min))
    }

    fn to_array(&self) -> Dense {
        let mut out = [[ZERO; LEVELS]; LEVELS];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, z) in row.iter_mut().enumerate() {
                *z = self.matrix[[i, j]];
            }
        }
        out
    }

    fn from_array(a: &Dense) -> Self {
        Self {
            matrix: Array2::from_shape_fn((LEVELS, LEVELS), |(i, j)| a[i][j]),
        }
    }
}

type Dense = [[C64; LEVELS]; LEVELS];

/// Right-hand side `−i[H, ρ] + D₃₀(ρ)`.
fn derivative(rho: &Dense, target: usize, omega: f64, gamma: f64) -> Dense {
    let mut d = [[ZERO; LEVELS]; LEVELS];
    // H = Ω̃ (|3⟩⟨t| + |t⟩⟨3|): (Hρ)_{ij} is nonzero only on rows 3 and t.
    for j in 0..LEVELS {
        let h_rho_3 = rho[target][j] * omega;
        let h_rho_t = rho[EXCITED][j] * omega;
        d[EXCITED][j] += -I * h_rho_3;
        d[target][j] += -I * h_rho_t;
    }
    for i in 0..LEVELS {
        let rho_h_3 = rho[i][target] * omega;
        let rho_h_t = rho[i][EXCITED] * omega;
        d[i][EXCITED] += I * rho_h_3;
        d[i][target] += I * rho_h_t;
    }
    let p3 = rho[EXCITED][EXCITED];
    d[0][0] += p3 * gamma;
    for k in 0..LEVELS {
        d[EXCITED][k] -= rho[EXCITED][k] * (0.5 * gamma);
        d[k][EXCITED] -= rho[k][EXCITED] * (0.5 * gamma);
    }
    d
}

fn axpy(x: &Dense, a: f64, y: &Dense) -> Dense {
    let mut out = *x;
    for i in 0..LEVELS {
        for j in 0..LEVELS {
            out[i][j] += y[i][j] * a;
        }
    }
    out
}

fn rk4(rho: &Dense, dt: f64, target: usize, omega: f64, gamma: f64) -> Dense {
    let k1 = derivative(rho, target, omega, gamma);
    let k2 = derivative(&axpy(rho, dt / 2.0, &k1), target, omega, gamma);
    let k3 = derivative(&axpy(rho, dt / 2.0, &k2), target, omega, gamma);
    let k4 = derivative(&axpy(rho, dt, &k3), target, omega, gamma);
    let mut out = *rho;
    for i in 0..LEVELS {
        for j in 0..LEVELS {
            out[i][j] += (k1[i][j] + k2[i][j] * 2.0 + k3[i][j] * 2.0 + k4[i][j]) * (dt / 6.0);
        }
    }
    out
}

/// Sampled solution of one pumping stage.
#[derive(Debug, Clone, PartialEq)]
pub struct ResetTrace {
    pub times: Vec<f64>,
    pub states: Vec<ElectronicState>,
}

impl ResetTrace {
    pub fn last(&self) -> &ElectronicState {
        self.states.last().expect("trace holds the initial state")
    }

    pub fn populations(&self, level: usize) -> Vec<f64> {
        self.states.iter().map(|s| s.population(level)).collect()
    }
}

fn check_target(target_level: usize) -> Result<()> {
    if target_level != 1 && target_level != 2 {
        return Err(Error::param(
            "target_level",
            format!("must be 1 or 2, got {target_level}"),
        ));
    }
    Ok(())
}

fn check_times(params: &ResetParams, t_end: f64, dt: f64) -> Result<()> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::param("t_end", format!("must be > 0, got {t_end}")));
    }
    let max_dt = MAX_DT / params.gamma30;
    if !(dt > 0.0) || dt > max_dt * (1.0 + 1e-12) {
        return Err(Error::param(
            "dt",
            format!("must lie in (0, {max_dt}], got {dt}"),
        ));
    }
    Ok(())
}

fn integrate(
    rho: Dense,
    target_level: usize,
    params: &ResetParams,
    t_end: f64,
    dt: f64,
    mut sample: impl FnMut(f64, &Dense),
) -> Dense {
    let steps = (t_end / dt).ceil() as usize;
    let h = t_end / steps as f64;
    let stride = steps.div_ceil(MAX_SAMPLES).max(1);
    let mut rho = rho;
    sample(0.0, &rho);
    for k in 1..=steps {
        rho = rk4(&rho, h, target_level, params.omega_tilde, params.gamma30);
        if k % stride == 0 || k == steps {
            sample(k as f64 * h, &rho);
        }
    }
    rho
}

/// Integrate one pumping stage of duration `t_end` with step `dt`.
pub fn reset_step(
    rho_e: &ElectronicState,
    target_level: usize,
    params: &ResetParams,
    t_end: f64,
    dt: f64,
) -> Result<ResetTrace> {
    check_target(target_level)?;
    check_times(params, t_end, dt)?;
    let mut times = Vec::new();
    let mut states = Vec::new();
    integrate(rho_e.to_array(), target_level, params, t_end, dt, |t, r| {
        times.push(t);
        states.push(ElectronicState::from_array(r));
    });
    Ok(ResetTrace { times, states })
}

/// Decay rate of `ρ_jj` from a log-linear fit over the samples with
/// `ρ_jj ∈ [0.05, 0.8]`. `None` when fewer than three samples qualify.
pub fn fit_decay_rate(trace: &ResetTrace, level: usize) -> Option<f64> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = trace
        .times
        .iter()
        .zip(&trace.states)
        .filter_map(|(&t, s)| {
            let p = s.population(level);
            (0.05..=0.8).contains(&p).then(|| (t, p.ln()))
        })
        .unzip();
    if xs.len() < 3 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Some(-sxy / sxx)
}

/// Pump level 1 and then level 2, each for `t_per_step` (default `8/Γ_eff`).
pub fn full_reset(
    rho_e: &ElectronicState,
    params: &ResetParams,
    t_per_step: Option<f64>,
) -> Result<ElectronicState> {
    let t = t_per_step.unwrap_or_else(|| params.default_step_time());
    let dt = params.default_dt();
    check_times(params, t, dt)?;
    let mut rho = rho_e.to_array();
    for target in [1, 2] {
        rho = integrate(rho, target, params, t, dt, |_, _| {});
    }
    Ok(ElectronicState::from_array(&rho))
}

/// Shortest total duration `2T` of a two-step reset (equal time `T` per step)
/// that brings `ρ₀₀` to at least `threshold`.
pub fn time_to_ground(
    rho_e: &ElectronicState,
    params: &ResetParams,
    threshold: f64,
) -> Result<f64> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::param(
            "threshold",
            format!("must lie in (0, 1), got {threshold}"),
        ));
    }
    if params.omega_tilde == 0.0 {
        return Err(Error::param(
            "omega_tilde",
            "an undriven reset never completes",
        ));
    }
    let reached = |t: f64| -> Result<bool> {
        Ok(full_reset(rho_e, params, Some(t))?.population(0) >= threshold)
    };
    if rho_e.population(0) >= threshold {
        return Ok(0.0);
    }
    let mut hi = params.default_step_time();
    while !reached(hi)? {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > 1e-4 * hi {
        let mid = 0.5 * (lo + hi);
        if reached(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(2.0 * hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn undriven_state_is_constant() {
        let p = ResetParams::new(0.0, 1.0).unwrap();
        let rho = ElectronicState::mixture([0.1, 0.5, 0.4, 0.0]).unwrap();
        let tr = reset_step(&rho, 1, &p, 50.0, p.default_dt()).unwrap();
        assert!(linalg::max_abs(&(tr.last().matrix() - rho.matrix())) < 1e-15);
    }

    #[test]
    fn adiabatic_rate() {
        for ratio in [0.02, 0.05] {
            let p = ResetParams::new(ratio, 1.0).unwrap();
            let tr = reset_step(
                &ElectronicState::level(1).unwrap(),
                1,
                &p,
                4.0 / p.gamma_eff(),
                p.default_dt(),
            )
            .unwrap();
            let rate = fit_decay_rate(&tr, 1).unwrap();
            assert!((rate / p.gamma_eff() - 1.0).abs() < 0.05, "{ratio}: {rate}");
            // Exact slow eigenvalue of the driven two-level block.
            let exact = 0.5 * (1.0 - (1.0 - 16.0 * ratio * ratio).sqrt());
            assert!(
                (rate / exact - 1.0).abs() < 2e-3,
                "{ratio}: {rate} vs {exact}"
            );
        }
    }

    #[test]
    fn regime_boundary() {
        let p = ResetParams::new(0.2, 1.0).unwrap();
        let tr = reset_step(
            &ElectronicState::level(1).unwrap(),
            1,
            &p,
            40.0,
            p.default_dt(),
        )
        .unwrap();
        let rate = fit_decay_rate(&tr, 1).unwrap();
        assert!((rate / p.gamma_eff() - 1.0).abs() > 0.05);
        assert!(ResetParams::new(0.25, 1.0).is_err());
    }

    #[test]
    fn decoupled_sector_is_stationary() {
        let p = ResetParams::new(0.05, 1.0).unwrap();
        let mut m = Array2::zeros((4, 4));
        m[[1, 1]] = C64::from(0.5);
        m[[2, 2]] = C64::from(0.3);
        m[[0, 0]] = C64::from(0.2);
        m[[0, 2]] = C64::new(0.1, 0.05);
        m[[2, 0]] = C64::new(0.1, -0.05);
        let rho = ElectronicState::new(m).unwrap();
        let tr = reset_step(&rho, 1, &p, 200.0, p.default_dt()).unwrap();
        for s in &tr.states {
            assert!((s.population(2) - 0.3).abs() < 1e-10);
            assert!((s.coherence(0, 2) - C64::new(0.1, 0.05)).norm() < 1e-10);
            assert!(s.trace_error() < 1e-8);
            assert!(s.hermiticity_error() < 1e-10);
        }
        assert!(tr.states.len() <= MAX_SAMPLES + 1);
    }

    #[test]
    fn two_step_reset_reaches_ground() {
        let p = ResetParams::new(0.05, 1.0).unwrap();
        let ground = full_reset(&ElectronicState::ground(), &p, None).unwrap();
        assert!((ground.population(0) - 1.0).abs() < 1e-12);
        let mixed = ElectronicState::mixture([0.0, 0.5, 0.5, 0.0]).unwrap();
        let out = full_reset(&mixed, &p, None).unwrap();
        assert!(out.population(0) >= 0.999);
    }

    #[test]
    fn reset_time_scales_inverse_square() {
        let mixed = ElectronicState::mixture([0.0, 0.5, 0.5, 0.0]).unwrap();
        let slow = time_to_ground(&mixed, &ResetParams::new(0.025, 1.0).unwrap(), 0.999).unwrap();
        let fast = time_to_ground(&mixed, &ResetParams::new(0.05, 1.0).unwrap(), 0.999).unwrap();
        let ratio = slow / fast;
        assert!((ratio / 4.0 - 1.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = ResetParams::new(0.05, 1.0).unwrap();
        let g = ElectronicState::ground();
        assert!(reset_step(&g, 3, &p, 1.0, 0.005).is_err());
        assert!(reset_step(&g, 1, &p, 0.0, 0.005).is_err());
        assert!(reset_step(&g, 1, &p, 1.0, -0.005).is_err());
        assert!(reset_step(&g, 1, &p, 1.0, 0.02).is_err());
        assert!(ResetParams::new(0.05, 0.0).is_err());
    }
}

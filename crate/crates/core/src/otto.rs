//! Quantum Otto cycle of the vibrational mode in the quench regime.
//!
//! Strokes 1 and 3 change the trap frequency `ν₀ → ν₁` (and displace the trap
//! by `ζ₁`) faster than the mode can respond, so number states only pick up
//! phases `θ_j`. Strokes 2 and 4 are dissipative and prepare `ρ_C` and `ρ_A`.
//! Energies are in units of `ħν₀` when `nu0 = 1`.

use log::warn;
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::fock::{self, DensityMatrix, FockSpace};
use crate::linalg::{self, C64, I, ONE};
use crate::metrics;

/// `|n̄_A − n̄_C|` below which `χ` is undefined.
pub const CHI_DENOM_TOL: f64 = 1e-12;
/// `|W|` below which the cycle is treated as the zero-work boundary.
pub const ZERO_WORK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct OttoParams {
    pub nu0: f64,
    pub nu1: f64,
    /// Trap displacement `ζ₁/ν₁` introduced during stroke 1.
    pub zeta_over_nu1: C64,
    /// Mean occupation of the thermal state at point A.
    pub nbar_a: f64,
    /// Coherent amplitude of `ρ_C` in the initial number basis.
    pub alpha: C64,
    /// Quench phases `θ_j`; missing entries are zero.
    pub theta: Vec<f64>,
}

impl OttoParams {
    pub fn new(nu0: f64, nu1: f64, zeta_over_nu1: C64, nbar_a: f64, alpha: C64) -> Result<Self> {
        let p = Self {
            nu0,
            nu1,
            zeta_over_nu1,
            nbar_a,
            alpha,
            theta: Vec::new(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_theta(mut self, theta: Vec<f64>) -> Self {
        self.theta = theta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("nu0", self.nu0), ("nu1", self.nu1)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::param(
                    name,
                    format!("must be finite and > 0, got {v}"),
                ));
            }
        }
        if !(self.nbar_a >= 0.0) || !self.nbar_a.is_finite() {
            return Err(Error::param(
                "nbar_a",
                format!("must be >= 0, got {}", self.nbar_a),
            ));
        }
        let finite = |z: C64| z.re.is_finite() && z.im.is_finite();
        if !finite(self.alpha) || !finite(self.zeta_over_nu1) {
            return Err(Error::NonFinite);
        }
        if self.theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::param("theta", "phases must be finite"));
        }
        Ok(())
    }

    pub fn r(&self) -> f64 {
        squeeze_param(self.nu0, self.nu1)
    }

    /// `n̄_C = |α|²`.
    pub fn nbar_c(&self) -> f64 {
        self.alpha.norm_sqr()
    }

    fn theta_at(&self, j: usize) -> f64 {
        self.theta.get(j).copied().unwrap_or(0.0)
    }
}

/// `r = ln(ν₁/ν₀) / 2`.
pub fn squeeze_param(nu0: f64, nu1: f64) -> f64 {
    (nu1 / nu0).ln() / 2.0
}

/// `κ₁ = (ζ₁/ν₁) cosh r + (ζ₁/ν₁)* sinh r`.
pub fn kappa1(params: &OttoParams) -> C64 {
    let r = params.r();
    let z = params.zeta_over_nu1;
    z * r.cosh() + z.conj() * r.sinh()
}

/// Closed form of `χ` for a thermal `ρ_A` and a coherent `ρ_C`.
pub fn chi_closed_form(params: &OttoParams) -> Result<f64> {
    let denom = params.nbar_a - params.nbar_c();
    if denom.abs() < CHI_DENOM_TOL {
        return Err(Error::ChiDenominator(denom));
    }
    Ok(chi_numerator_closed(params) / denom)
}

/// `2 sech(2r) Re(κ₁α*) + tanh(2r) Re(α*²)`.
fn chi_numerator_closed(params: &OttoParams) -> f64 {
    let r2 = 2.0 * params.r();
    let a = params.alpha;
    2.0 * (kappa1(params) * a.conj()).re / r2.cosh() + r2.tanh() * (a.conj() * a.conj()).re
}

/// The four coherence contributions to `χ` and their combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiComponents {
    pub a1: f64,
    pub a2: f64,
    pub c1: f64,
    pub c2: f64,
    pub nbar_a: f64,
    pub nbar_c: f64,
    pub chi: f64,
}

fn first_neighbour(m: &Array2<C64>, phase: impl Fn(usize) -> C64) -> C64 {
    (0..m.nrows() - 1)
        .map(|j| m[[j, j + 1]] * phase(j) * ((j + 1) as f64).sqrt())
        .sum()
}

fn second_neighbour(m: &Array2<C64>, phase: impl Fn(usize) -> C64) -> C64 {
    (0..m.nrows().saturating_sub(2))
        .map(|j| m[[j, j + 2]] * phase(j) * (((j + 1) * (j + 2)) as f64).sqrt())
        .sum()
}

/// `χ` from the coherences of arbitrary `ρ_A` (with quench phases) and `ρ_C`.
pub fn chi_general(
    p_a: &DensityMatrix,
    q_c: &DensityMatrix,
    params: &OttoParams,
) -> Result<ChiComponents> {
    p_a.check_space(&q_c.space())?;
    let r2 = 2.0 * params.r();
    let nu1 = params.nu1;
    let kappa = kappa1(params);
    let th = |j: usize| params.theta_at(j);
    let pa = p_a.matrix();
    let qc = q_c.matrix();
    let a1 = 2.0 * nu1 * (kappa * first_neighbour(pa, |j| (I * (th(j + 1) - th(j))).exp())).re;
    let a2 = nu1 * r2.sinh() * second_neighbour(pa, |j| (I * (th(j + 2) - th(j))).exp()).re;
    let c1 = 2.0 * nu1 * (kappa * first_neighbour(qc, |_| ONE)).re;
    let c2 = nu1 * r2.sinh() * second_neighbour(qc, |_| ONE).re;
    let nbar_a = metrics::mean_occupation(p_a);
    let nbar_c = metrics::mean_occupation(q_c);
    let denom = nbar_a - nbar_c;
    if denom.abs() < CHI_DENOM_TOL {
        return Err(Error::ChiDenominator(denom));
    }
    let chi = (c1 + c2 - a1 - a2) / (nu1 * r2.cosh() * denom);
    Ok(ChiComponents {
        a1,
        a2,
        c1,
        c2,
        nbar_a,
        nbar_c,
        chi,
    })
}

/// Energy changes per stroke.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleEnergetics {
    pub w1: f64,
    pub q2: f64,
    pub w3: f64,
    pub q4: f64,
    pub w_total: f64,
}

impl CycleEnergetics {
    fn from_strokes(w1: f64, q2: f64, w3: f64, q4: f64) -> Self {
        Self {
            w1,
            q2,
            w3,
            q4,
            w_total: w1 + w3,
        }
    }

    /// `W₁ + Q₂ + W₃ + Q₄`.
    pub fn closure(&self) -> f64 {
        self.w1 + self.q2 + self.w3 + self.q4
    }

    pub fn max_abs_difference(&self, other: &CycleEnergetics) -> f64 {
        [
            self.w1 - other.w1,
            self.q2 - other.q2,
            self.w3 - other.w3,
            self.q4 - other.q4,
            self.w_total - other.w_total,
        ]
        .iter()
        .fold(0.0, |m, d| m.max(d.abs()))
    }
}

/// Closed-form energetics for a thermal `ρ_A` and a coherent `ρ_C`.
///
/// Written in terms of `χ (n̄_A − n̄_C)` so that `n̄_A = n̄_C` needs no
/// division.
pub fn energetics_closed(params: &OttoParams) -> CycleEnergetics {
    let (nu0, nu1) = (params.nu0, params.nu1);
    let r = params.r();
    let c2r = (2.0 * r).cosh();
    let delta = params.nbar_a - params.nbar_c();
    let chi_delta = chi_numerator_closed(params);
    let w = -(nu0 - nu1 * c2r) * delta - nu1 * c2r * chi_delta;
    let q2 = -nu1 * c2r * (delta - chi_delta);
    let q4 = nu0 * delta;
    let z2 = params.zeta_over_nu1.norm_sqr();
    let h_b = nu1 * (c2r * params.nbar_a + r.sinh().powi(2) + z2 + 0.5);
    let h_a = nu0 * (params.nbar_a + 0.5);
    let w1 = h_b - h_a;
    CycleEnergetics::from_strokes(w1, q2, w - w1, q4)
}

/// Trace-based energetics with their truncation diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericEnergetics {
    pub cycle: CycleEnergetics,
    /// `Tr(a†a ρ_C)` on the truncated space.
    pub nbar_c: f64,
    /// `nbar_c − |α|²`.
    pub nbar_c_error: f64,
    /// Largest top-two-level population of `ρ_A`, `ρ_C`.
    pub tail_mass: f64,
}

impl NumericEnergetics {
    pub fn truncation_warning(&self) -> bool {
        self.tail_mass > metrics::TAIL_WARN
    }
}

/// `H(τ₁) = ν₁(a₁†a₁ + ½)` with `a₁ = cosh r a₀ + sinh r a₀† + ζ₁/ν₁`.
pub fn stroke_hamiltonian(space: FockSpace, params: &OttoParams) -> fock::Operator {
    let r = params.r();
    let a = fock::annihilation(space).into_matrix();
    let ad = linalg::dagger(&a);
    let id = linalg::identity(space.dim());
    let a1 = a.mapv(|z| z * r.cosh())
        + ad.mapv(|z| z * r.sinh())
        + id.mapv(|z| z * params.zeta_over_nu1);
    let n1 = linalg::dagger(&a1).dot(&a1);
    let h = (n1 + id.mapv(|z| z * 0.5)).mapv(|z| z * params.nu1);
    fock::Operator::new(space, h).expect("finite stroke Hamiltonian")
}

/// Stroke energies evaluated directly from the quench map on the given states.
pub fn energetics_numeric(
    rho_a: &DensityMatrix,
    rho_c: &DensityMatrix,
    params: &OttoParams,
) -> Result<NumericEnergetics> {
    rho_a.check_space(&rho_c.space())?;
    let space = rho_a.space();
    let dim = space.dim();
    let h1 = stroke_hamiltonian(space, params);
    let e0 = |j: usize| params.nu0 * (j as f64 + 0.5);
    let phase = |j: usize| (-I * params.theta_at(j)).exp();

    // ρ_B = U ρ_A U† with U|j⟩ = e^{-iθ_j}|j⟩.
    let pa = rho_a.matrix();
    let rho_b = Array2::from_shape_fn((dim, dim), |(j, k)| pa[[j, k]] * phase(j) * phase(k).conj());
    let rho_b = DensityMatrix::from_matrix_unchecked(space, rho_b);
    let h_a: f64 = (0..dim).map(|j| rho_a.population(j) * e0(j)).sum();
    let h_b = rho_b.expectation(&h1).re;
    let h_c = rho_c.expectation(&h1).re;
    let h_d: f64 = (0..dim).map(|j| rho_c.population(j) * e0(j)).sum();

    let cycle = CycleEnergetics::from_strokes(h_b - h_a, h_c - h_b, h_d - h_c, h_a - h_d);
    let nbar_c = metrics::mean_occupation(rho_c);
    let tail = metrics::tail_mass(rho_a, 2).max(metrics::tail_mass(rho_c, 2));
    if tail > metrics::TAIL_WARN {
        warn!("top-level population {tail:e} exceeds the truncation threshold");
    }
    Ok(NumericEnergetics {
        cycle,
        nbar_c,
        nbar_c_error: nbar_c - params.nbar_c(),
        tail_mass: tail,
    })
}

/// `ρ_A` thermal and `ρ_C` coherent on the given space.
pub fn cycle_states(
    space: FockSpace,
    params: &OttoParams,
) -> Result<(DensityMatrix, DensityMatrix)> {
    Ok((
        fock::thermal_state(space, params.nbar_a)?,
        fock::coherent_state(space, params.alpha),
    ))
}

/// Which branch of the quench-regime efficiency applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// `n̄_A > n̄_C`, heat absorbed in stroke 4 only: `E = 1 − ν₁cosh2r(1−χ)/ν₀`.
    HotA,
    /// `n̄_A > n̄_C` and `χ ≥ 1`: all absorbed heat converted, `E = 1`.
    FullConversion,
    /// `n̄_A < n̄_C`, heat absorbed in stroke 2: `E = 1 − ν₀ sech2r / (ν₁(1−χ))`.
    HotC,
    /// `W = 0`.
    ZeroWork,
    /// `W > 0`; the cycle does not run as an engine.
    NoEngine,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::HotA => "hot_a",
            Regime::FullConversion => "full_conversion",
            Regime::HotC => "hot_c",
            Regime::ZeroWork => "zero_work",
            Regime::NoEngine => "no_engine",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Efficiency {
    /// `−W / Q_abs`; `None` outside the engine regime.
    pub value: Option<f64>,
    pub regime: Regime,
}

/// Classify a cycle and compute `−W/Q_abs`, `Q_abs` being the positive heats.
pub fn efficiency_from_energetics(e: &CycleEnergetics) -> Efficiency {
    let scale = e.q2.abs().max(e.q4.abs()).max(1.0);
    if e.w_total.abs() <= ZERO_WORK_TOL * scale {
        return Efficiency {
            value: Some(0.0),
            regime: Regime::ZeroWork,
        };
    }
    if e.w_total > 0.0 {
        return Efficiency {
            value: None,
            regime: Regime::NoEngine,
        };
    }
    let q_abs = e.q2.max(0.0) + e.q4.max(0.0);
    let value = -e.w_total / q_abs;
    let regime = if e.q4 > 0.0 {
        if e.q2 >= 0.0 {
            Regime::FullConversion
        } else {
            Regime::HotA
        }
    } else {
        Regime::HotC
    };
    let value = if regime == Regime::FullConversion {
        1.0
    } else {
        value
    };
    Efficiency {
        value: Some(value),
        regime,
    }
}

pub fn efficiency(params: &OttoParams) -> Efficiency {
    efficiency_from_energetics(&energetics_closed(params))
}

/// Efficiency as a function of `χ` alone, for `sign(n̄_A − n̄_C) = population_sign`.
pub fn efficiency_for_chi(nu0: f64, nu1: f64, chi: f64, population_sign: f64) -> Efficiency {
    let c2r = (2.0 * squeeze_param(nu0, nu1)).cosh();
    let delta = population_sign.signum();
    let x = (1.0 - chi) * nu1 * c2r;
    let w = -(nu0 - x) * delta;
    let q2 = -x * delta;
    let q4 = nu0 * delta;
    efficiency_from_energetics(&CycleEnergetics {
        w1: w,
        q2,
        w3: 0.0,
        q4,
        w_total: w,
    })
}

/// Quasi-static Otto efficiency `1 − min(ν₁/ν₀, ν₀/ν₁)`.
pub fn otto_reference(nu0: f64, nu1: f64) -> f64 {
    1.0 - (nu1 / nu0).min(nu0 / nu1)
}

/// Values of `χ` bounding the regions where the quench efficiency beats the
/// quasi-static one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiThresholds {
    /// For `n̄_A > n̄_C`: surpass when `χ > surpass_high`.
    pub surpass_high: f64,
    /// For `n̄_A < n̄_C`: surpass when `χ < surpass_low`.
    pub surpass_low: f64,
    /// `1 − (ν₀/ν₁) sech 2r`, where `W = 0`.
    pub zero_work: f64,
}

impl ChiThresholds {
    pub fn surpasses(&self, chi: f64, population_sign: f64) -> bool {
        if population_sign > 0.0 {
            chi > self.surpass_high
        } else {
            chi < self.surpass_low
        }
    }
}

pub fn chi_thresholds(nu0: f64, nu1: f64) -> ChiThresholds {
    let sech = 1.0 / (2.0 * squeeze_param(nu0, nu1)).cosh();
    let ratio = nu0 / nu1;
    let plain = 1.0 - sech;
    let squared = 1.0 - ratio * ratio * sech;
    let (surpass_high, surpass_low) = if nu1 < nu0 {
        (plain, squared)
    } else {
        (squared, plain)
    };
    ChiThresholds {
        surpass_high,
        surpass_low,
        zero_work: 1.0 - ratio * sech,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ZERO;

    fn point(nu1: f64, nbar_a: f64, zeta: C64, alpha: C64) -> OttoParams {
        OttoParams::new(1.0, nu1, zeta, nbar_a, alpha).unwrap()
    }

    fn reference_point() -> OttoParams {
        point(0.8, 0.25, ZERO, C64::new(0.0, 0.4))
    }

    #[test]
    fn squeeze_parameter() {
        assert_eq!(squeeze_param(1.0, 1.0), 0.0);
        assert!((squeeze_param(1.0, 0.8) + 0.111572).abs() < 1e-6);
        let r = squeeze_param(1.0, 0.8);
        assert!((0.8 * (2.0 * r).cosh() - 0.82).abs() < 1e-12);
    }

    #[test]
    fn kappa_collapses() {
        let z = 0.3;
        let p = point(0.8, 0.25, C64::from(z), ZERO);
        let r = p.r();
        assert!((kappa1(&p) - C64::from(z * r.exp())).norm() < 1e-15);
        let p = point(0.8, 0.25, C64::new(0.0, z), ZERO);
        assert!((kappa1(&p) - C64::new(0.0, z * (-r).exp())).norm() < 1e-15);
        assert_eq!(kappa1(&point(0.8, 0.25, ZERO, ZERO)), ZERO);
    }

    #[test]
    fn chi_reference_value() {
        let chi = chi_closed_form(&reference_point()).unwrap();
        assert!((chi - 0.390244).abs() < 1e-6);
        assert!((chi - (-9.0 / 41.0) * (-0.16) / 0.09).abs() < 1e-12);
        assert_eq!(chi_closed_form(&point(0.8, 0.25, ZERO, ZERO)).unwrap(), 0.0);
        let degenerate = point(0.8, 0.16, ZERO, C64::new(0.0, 0.4));
        assert!(matches!(
            chi_closed_form(&degenerate),
            Err(Error::ChiDenominator(_))
        ));
    }

    #[test]
    fn orthogonal_phase_removes_displacement() {
        let zeta = C64::new(0.2, 0.0);
        let alpha = C64::new(0.0, 0.4);
        let with = chi_closed_form(&point(0.8, 0.25, zeta, alpha)).unwrap();
        let without = chi_closed_form(&point(0.8, 0.25, ZERO, alpha)).unwrap();
        assert!((with - without).abs() < 1e-15);
        let aligned = chi_closed_form(&point(0.8, 0.25, C64::new(0.0, 0.2), alpha)).unwrap();
        assert!((aligned - without).abs() > 1e-3);
    }

    #[test]
    fn general_chi_matches_closed_form() {
        let s = FockSpace::new(60).unwrap();
        for &(ai, zi) in &[(0.4, 0.0), (0.8, 0.2), (0.6, -0.1)] {
            let p = point(0.8, 0.25, C64::new(0.05, zi), C64::new(0.1, ai));
            let (ra, rc) = cycle_states(s, &p).unwrap();
            let g = chi_general(&ra, &rc, &p).unwrap();
            assert_eq!(g.a1, 0.0);
            assert_eq!(g.a2, 0.0);
            assert!((g.chi - chi_closed_form(&p).unwrap()).abs() < 1e-9);
        }
        let th = fock::thermal_state(s, 0.5).unwrap();
        let vac = fock::vacuum(s);
        let g = chi_general(&th, &vac, &reference_point()).unwrap();
        assert_eq!(g.chi, 0.0);
    }

    #[test]
    fn closed_energetics_reference() {
        let e = energetics_closed(&reference_point());
        assert!((e.w_total + 0.045).abs() < 1e-12);
        assert!((e.q2 + 0.045).abs() < 1e-12);
        assert!((e.q4 - 0.09).abs() < 1e-12);
        assert!(e.closure().abs() < 1e-12);
        let flat = energetics_closed(&point(0.8, 0.0, ZERO, ZERO));
        assert_eq!((flat.w_total, flat.q2, flat.q4), (0.0, 0.0, 0.0));
    }

    #[test]
    fn numeric_vacuum_cycle() {
        let s = FockSpace::new(60).unwrap();
        let p = point(0.8, 0.0, ZERO, ZERO);
        let vac = fock::vacuum(s);
        let n = energetics_numeric(&vac, &vac, &p).unwrap().cycle;
        let c2r = (2.0 * p.r()).cosh();
        assert!(n.q2.abs() < 1e-14 && n.q4.abs() < 1e-14);
        assert!((n.w1 - 0.5 * (0.8 * c2r - 1.0)).abs() < 1e-12);
        assert!((n.w1 + n.w3).abs() < 1e-14);
    }

    #[test]
    fn numeric_matches_closed() {
        let s = FockSpace::new(60).unwrap();
        let p = reference_point();
        let (ra, rc) = cycle_states(s, &p).unwrap();
        let n = energetics_numeric(&ra, &rc, &p).unwrap();
        let c = energetics_closed(&p);
        assert!(n.cycle.max_abs_difference(&c) < 1e-6);
        assert!(n.cycle.closure().abs() < 1e-12);
        assert!(!n.truncation_warning());
        let shifted = p.clone().with_theta(vec![0.7; 60]);
        let m = energetics_numeric(&ra, &rc, &shifted).unwrap();
        assert!(m.cycle.max_abs_difference(&n.cycle) < 1e-14);
    }

    #[test]
    fn theta_enters_through_coherent_a() {
        // A coherent ρ_A makes the stroke-1 work depend on the phase gradient.
        let s = FockSpace::new(40).unwrap();
        let p = point(0.8, 0.25, C64::new(0.1, 0.0), ZERO);
        let ra = fock::coherent_state(s, C64::new(0.3, 0.0));
        let rc = fock::vacuum(s);
        let base = energetics_numeric(&ra, &rc, &p).unwrap().cycle;
        let ramp: Vec<f64> = (0..40).map(|j| 0.4 * j as f64).collect();
        let turned = energetics_numeric(&ra, &rc, &p.clone().with_theta(ramp.clone()))
            .unwrap()
            .cycle;
        assert!((base.w1 - turned.w1).abs() > 1e-4);
        let g = chi_general(&ra, &rc, &p.clone().with_theta(ramp)).unwrap();
        let numer = g.c1 + g.c2 - g.a1 - g.a2;
        let c2r = (2.0 * p.r()).cosh();
        let delta = g.nbar_a - g.nbar_c;
        let w_formula = -(p.nu0 - p.nu1 * c2r) * delta - numer;
        assert!((turned.w_total - w_formula).abs() < 1e-9);
    }

    #[test]
    fn efficiency_reference_and_cases() {
        let e = efficiency(&reference_point());
        assert_eq!(e.regime, Regime::HotA);
        assert!((e.value.unwrap() - 0.5).abs() < 1e-9);
        for nu1 in [0.6, 0.8, 5.0 / 3.0] {
            assert_eq!(efficiency_for_chi(1.0, nu1, 1.2, 1.0).value, Some(1.0));
            let t = chi_thresholds(1.0, nu1);
            let z = efficiency_for_chi(1.0, nu1, t.zero_work, 1.0);
            assert!(z.value.unwrap().abs() < 1e-12);
            assert_eq!(
                efficiency_for_chi(1.0, nu1, t.zero_work - 0.1, 1.0).regime,
                Regime::NoEngine
            );
            // Continuity across χ = 1.
            let below = efficiency_for_chi(1.0, nu1, 1.0 - 1e-9, 1.0).value.unwrap();
            assert!((below - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn quasi_static_limit() {
        let p = point(1.0, 0.25, ZERO, C64::from(0.2));
        assert_eq!(chi_closed_form(&p).unwrap(), 0.0);
        let p = point(1.0, 0.25, ZERO, C64::new(0.0, 0.2));
        assert_eq!(chi_closed_form(&p).unwrap(), 0.0);
        let e = efficiency(&p);
        assert_eq!(e.regime, Regime::ZeroWork);
        assert_eq!(e.value, Some(0.0));
        // Near r = 0 the branch tends to 1 − ν₁/ν₀.
        let nu1 = 0.999;
        let e = efficiency_for_chi(1.0, nu1, 0.0, 1.0).value.unwrap();
        assert!((e - (1.0 - nu1)).abs() < 1e-6);
    }

    #[test]
    fn reference_efficiency() {
        assert!((otto_reference(1.0, 0.8) - 0.2).abs() < 1e-12);
        assert!((otto_reference(1.0, 1.6667) - 0.4).abs() < 1e-4);
        assert_eq!(otto_reference(1.0, 1.3), otto_reference(1.3, 1.0));
    }

    #[test]
    fn caption_thresholds() {
        let cases = [
            (0.8, 2.44e-2, -5.24e-1),
            (0.6, 1.18e-1, -1.45),
            (5.0 / 3.0, 6.82e-1, 1.18e-1),
        ];
        for (nu1, high, low) in cases {
            let t = chi_thresholds(1.0, nu1);
            let sig3 = |x: f64, y: f64| (x - y).abs() <= 0.5e-2 * y.abs();
            assert!(sig3(t.surpass_high, high), "{nu1}: {}", t.surpass_high);
            assert!(sig3(t.surpass_low, low), "{nu1}: {}", t.surpass_low);
        }
    }

    #[test]
    fn surpass_region_matches_efficiency() {
        for nu1 in [0.6, 0.8, 1.6667] {
            let t = chi_thresholds(1.0, nu1);
            let reference = otto_reference(1.0, nu1);
            for sign in [1.0, -1.0] {
                for k in 0..100 {
                    let chi = -2.0 + 4.0 * k as f64 / 99.0;
                    let e = efficiency_for_chi(1.0, nu1, chi, sign);
                    let beats = e.value.is_some_and(|v| v > reference + 1e-12);
                    assert_eq!(
                        beats,
                        t.surpasses(chi, sign),
                        "nu1={nu1} chi={chi} sign={sign}"
                    );
                }
            }
        }
    }
}

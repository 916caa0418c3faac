//! Sideband operators, engineered channel operators and the standard presets.

use log::warn;

use crate::error::{Error, Result};
use crate::fock::{self, DensityMatrix, FockSpace, Operator};
use crate::linalg::{Matrix, C64, I};

pub const MAX_SIDEBAND_ORDER: i32 = 4;
pub const MAX_ETA: f64 = 0.5;
/// Increments above this leave the perturbative collisional regime.
pub const EPSILON_GUARD: f64 = 0.1;

/// One sideband drive of an engineering pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserLine {
    /// Sideband order; `+1` removes a phonon, `−1` adds one, `0` is the carrier.
    pub m: i32,
    /// `Ω_{μ,j} / Ω_r`.
    pub rabi_ratio: f64,
    /// Lamb-Dicke parameter.
    pub eta: f64,
}

impl LaserLine {
    pub fn new(m: i32, rabi_ratio: f64, eta: f64) -> Result<Self> {
        let line = Self { m, rabi_ratio, eta };
        line.validate()?;
        Ok(line)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m.abs() > MAX_SIDEBAND_ORDER {
            return Err(Error::SidebandOrder(self.m));
        }
        if !(self.rabi_ratio >= 0.0) || !self.rabi_ratio.is_finite() {
            return Err(Error::param(
                "rabi_ratio",
                format!("must be finite and >= 0, got {}", self.rabi_ratio),
            ));
        }
        check_eta(self.eta)
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= MAX_ETA) {
        return Err(Error::param(
            "eta",
            format!("must lie in (0, 0.5], got {eta}"),
        ));
    }
    Ok(())
}

/// Matrix of `d_|m|` for `m ≥ 0`, entries `(n, n+|m|)`.
fn d_matrix(space: FockSpace, m: usize, eta: f64) -> Matrix {
    let dim = space.dim();
    let mut out = Matrix::zeros((dim, dim));
    if m >= dim {
        return out;
    }
    let eta2 = eta * eta;
    let prefactor = (-eta2 / 2.0).exp() * (I * eta).powu(m as u32);
    let inv_m_fact: f64 = 1.0 / (1..=m).map(|k| k as f64).product::<f64>();
    for n in 0..dim - m {
        let ladder: f64 = (n + 1..=n + m).map(|k| (k as f64).sqrt()).product();
        let mut term = inv_m_fact;
        let mut sum = term;
        for k in 1..=n {
            term *= -eta2 * (n - k + 1) as f64 / (k * (k + m)) as f64;
            sum += term;
        }
        out[[n, n + m]] = prefactor * ladder * sum;
    }
    out
}

/// Sideband operator with the sign convention of the engineering Hamiltonian:
/// `d_|m|` for `m ≥ 0` and `(−1)^|m| d_|m|†` for `m < 0`.
///
/// The normal-ordered series is summed in closed form on every retained
/// level, so Lamb-Dicke corrections of all orders are kept.
pub fn sideband_operator(space: FockSpace, m: i32, eta: f64) -> Result<Operator> {
    if m.abs() > MAX_SIDEBAND_ORDER {
        return Err(Error::SidebandOrder(m));
    }
    check_eta(eta)?;
    let d = d_matrix(space, m.unsigned_abs() as usize, eta);
    let op = Operator::new(space, d)?;
    if m >= 0 {
        Ok(op)
    } else {
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        Ok(op.adjoint().scale(C64::from(sign)))
    }
}

/// `K_μ = Σ_j (Ω_{μ,j}/Ω_r) · sideband(m_{μ,j}, η_{μ,j})`.
pub fn engineering_operator(space: FockSpace, lines: &[LaserLine]) -> Result<Operator> {
    let mut k = Operator::zeros(space);
    for line in lines {
        line.validate()?;
        let d = sideband_operator(space, line.m, line.eta)?;
        k = &k + &d.scale(C64::from(line.rabi_ratio));
    }
    Ok(k)
}

/// Laser lines of one engineered channel together with the pulse area `Ω_r τ_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    pub lines: Vec<LaserLine>,
    pub pulse_area: f64,
}

impl ChannelSpec {
    pub fn new(lines: Vec<LaserLine>, pulse_area: f64) -> Result<Self> {
        let spec = Self { lines, pulse_area };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let anchor = self
            .lines
            .first()
            .ok_or_else(|| Error::param("lines", "a channel needs at least one laser line"))?;
        for line in &self.lines {
            line.validate()?;
        }
        if anchor.m.abs() != 1 {
            return Err(Error::param(
                "lines",
                format!(
                    "first line must be a first sideband (m = ±1), got m = {}",
                    anchor.m
                ),
            ));
        }
        if !(anchor.rabi_ratio > 0.0) {
            return Err(Error::param(
                "rabi_ratio",
                "anchor line must have a positive ratio",
            ));
        }
        if !(self.pulse_area > 0.0) || !self.pulse_area.is_finite() {
            return Err(Error::param(
                "pulse_area",
                format!("must be finite and > 0, got {}", self.pulse_area),
            ));
        }
        Ok(())
    }

    pub fn anchor(&self) -> &LaserLine {
        &self.lines[0]
    }

    /// Leading coefficient `i η e^{−η²/2} Ω_{μ,1}/Ω_r` of the anchor line.
    pub fn anchor_coefficient(&self) -> C64 {
        let a = self.anchor();
        I * a.eta * (-a.eta * a.eta / 2.0).exp() * a.rabi_ratio
    }

    /// `ε_μ = (Ω_{μ,1} τ_r η)² e^{−η²}`.
    pub fn epsilon(&self) -> f64 {
        let a = self.anchor();
        (a.rabi_ratio * self.pulse_area * a.eta).powi(2) * (-a.eta * a.eta).exp()
    }
}

/// Rescaled jump operator `K'_μ` and its increment `ε_μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineeredChannel {
    pub k_prime: Operator,
    pub epsilon: f64,
}

impl EngineeredChannel {
    pub fn new(k_prime: Operator, epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::param(
                "epsilon",
                format!("must be finite and >= 0, got {epsilon}"),
            ));
        }
        Ok(Self { k_prime, epsilon })
    }

    pub fn space(&self) -> FockSpace {
        self.k_prime.space()
    }

    pub fn exceeds_guard(&self) -> bool {
        self.epsilon > EPSILON_GUARD
    }
}

pub fn rescale_channel(space: FockSpace, spec: &ChannelSpec) -> Result<EngineeredChannel> {
    spec.validate()?;
    let k = engineering_operator(space, &spec.lines)?;
    let c = spec.anchor_coefficient();
    let k_prime = Operator::new(space, k.matrix().mapv(|z| z / c))?;
    let channel = EngineeredChannel::new(k_prime, spec.epsilon())?;
    if channel.exceeds_guard() {
        warn!(
            "increment {:.4} exceeds the perturbative guard {EPSILON_GUARD}",
            channel.epsilon
        );
    }
    Ok(channel)
}

pub fn rescale_all(space: FockSpace, specs: &[ChannelSpec]) -> Result<Vec<EngineeredChannel>> {
    specs.iter().map(|s| rescale_channel(space, s)).collect()
}

/// Standard channel families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preset {
    /// `K' = a − α`, with `α` on the positive imaginary axis.
    Coherent { alpha: C64 },
    /// `K' = a + tanh(r) a†`.
    Squeezed { r: f64 },
    /// `K' = a + tanh(r) a† − α`.
    SqueezedCoherent { r: f64, alpha: C64 },
    /// `K' = a`.
    Cooling,
    /// `K' = a†`.
    Heating,
    /// Channels `a` and `a†` with `ε₁/ε₂ = 1 + 1/n̄`.
    ThermalPair { nbar: f64 },
}

fn displacement_ratio(alpha: C64, eta: f64) -> Result<f64> {
    if alpha.re.abs() > 1e-12 || alpha.im < 0.0 || !alpha.im.is_finite() {
        return Err(Error::param(
            "alpha",
            format!("carrier displacement must be i·|α| with |α| >= 0, got {alpha}"),
        ));
    }
    Ok(alpha.im * eta)
}

fn squeeze_ratio(r: f64) -> Result<f64> {
    let t = r.tanh();
    if !r.is_finite() || r < 0.0 || t >= 1.0 {
        return Err(Error::param(
            "r",
            format!("need 0 <= tanh r < 1 with r >= 0, got r = {r}"),
        ));
    }
    Ok(t)
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Coherent { .. } => "coherent",
            Preset::Squeezed { .. } => "squeezed",
            Preset::SqueezedCoherent { .. } => "squeezed_coherent",
            Preset::Cooling => "cooling",
            Preset::Heating => "heating",
            Preset::ThermalPair { .. } => "thermal_pair",
        }
    }

    /// Laser specifications realising the preset at Lamb-Dicke parameter `eta`.
    pub fn channel_specs(&self, eta: f64, pulse_area: f64) -> Result<Vec<ChannelSpec>> {
        check_eta(eta)?;
        let line = |m, ratio| LaserLine::new(m, ratio, eta);
        let one = |lines| ChannelSpec::new(lines, pulse_area).map(|s| vec![s]);
        match *self {
            Preset::Coherent { alpha } => one(vec![
                line(1, 1.0)?,
                line(0, displacement_ratio(alpha, eta)?)?,
            ]),
            Preset::Squeezed { r } => one(vec![line(1, 1.0)?, line(-1, squeeze_ratio(r)?)?]),
            Preset::SqueezedCoherent { r, alpha } => one(vec![
                line(1, 1.0)?,
                line(-1, squeeze_ratio(r)?)?,
                line(0, displacement_ratio(alpha, eta)?)?,
            ]),
            Preset::Cooling => one(vec![line(1, 1.0)?]),
            Preset::Heating => one(vec![line(-1, 1.0)?]),
            Preset::ThermalPair { nbar } => {
                if !(nbar > 0.0) || !nbar.is_finite() {
                    return Err(Error::param("nbar", format!("must be > 0, got {nbar}")));
                }
                let ratio = (1.0 + 1.0 / nbar).sqrt().recip();
                Ok(vec![
                    ChannelSpec::new(vec![line(1, 1.0)?], pulse_area)?,
                    ChannelSpec::new(vec![line(-1, ratio)?], pulse_area)?,
                ])
            }
        }
    }

    /// Leading-order jump operators, one per channel.
    pub fn ideal_operators(&self, space: FockSpace) -> Result<Vec<Operator>> {
        let a = fock::annihilation(space);
        let ad = fock::creation(space);
        let id = Operator::identity(space);
        Ok(match *self {
            Preset::Coherent { alpha } => vec![&a - &id.scale(alpha)],
            Preset::Squeezed { r } => vec![&a + &ad.scale(C64::from(squeeze_ratio(r)?))],
            Preset::SqueezedCoherent { r, alpha } => {
                let sq = &a + &ad.scale(C64::from(squeeze_ratio(r)?));
                vec![&sq - &id.scale(alpha)]
            }
            Preset::Cooling => vec![a],
            Preset::Heating => vec![ad],
            Preset::ThermalPair { .. } => vec![a, ad],
        })
    }

    /// Reference state the dynamics relaxes to at leading order.
    pub fn target_state(&self, space: FockSpace) -> Result<DensityMatrix> {
        match *self {
            Preset::Coherent { alpha } => Ok(fock::coherent_state(space, alpha)),
            Preset::Squeezed { r } => Ok(fock::squeezed_vacuum(space, r)),
            Preset::SqueezedCoherent { r, alpha } => {
                Ok(fock::squeezed_coherent_state(space, r, alpha))
            }
            Preset::Cooling => Ok(fock::vacuum(space)),
            Preset::Heating => fock::number_state(space, space.dim() - 1),
            Preset::ThermalPair { nbar } => fock::thermal_state(space, nbar),
        }
    }
}

/// Rescaled channels for a preset.
pub fn preset_channels(
    space: FockSpace,
    preset: Preset,
    eta: f64,
    pulse_area: f64,
) -> Result<Vec<EngineeredChannel>> {
    rescale_all(space, &preset.channel_specs(eta, pulse_area)?)
}

//! Experiment configuration files.
//!
//! Configs are TOML. Unknown keys are rejected everywhere. Complex numbers are
//! written as `[re, im]`. See `docs/config.md` for the full schema.

use std::path::Path;

use ion_reservoir::fock::{self, DensityMatrix, FockSpace, Operator};
use ion_reservoir::lasers::{self, ChannelSpec, EngineeredChannel, LaserLine, Preset};
use ion_reservoir::otto::OttoParams;
use ion_reservoir::reset::{ElectronicState, ResetParams};
use ion_reservoir::{Stepper, C64};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const MIN_DIM: usize = 8;
pub const MAX_DIM: usize = 128;

pub type Complex = [f64; 2];

fn c(z: Complex) -> C64 {
    C64::new(z[0], z[1])
}

// Serde default helpers.
fn default_dim() -> usize {
    40
}
fn default_eta() -> f64 {
    0.05
}
fn default_pulse_area() -> f64 {
    4.5
}
fn default_output() -> String {
    "results.csv".to_owned()
}
fn one() -> usize {
    1
}
fn unit() -> f64 {
    1.0
}
fn real_one() -> Complex {
    [1.0, 0.0]
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepperName {
    Recursion,
    Kraus,
    #[default]
    Semigroup,
}

impl From<StepperName> for Stepper {
    fn from(s: StepperName) -> Self {
        match s {
            StepperName::Recursion => Stepper::Recursion,
            StepperName::Kraus => Stepper::Kraus,
            StepperName::Semigroup => Stepper::Semigroup,
        }
    }
}

/// A motional state, tagged by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Vacuum,
    Number { n: usize },
    Thermal { nbar: f64 },
    Coherent { alpha: Complex },
    SqueezedVacuum { r: f64 },
    SqueezedCoherent { r: f64, alpha: Complex },
}

impl StateSpec {
    pub fn build(&self, space: FockSpace) -> ion_reservoir::Result<DensityMatrix> {
        match *self {
            StateSpec::Vacuum => Ok(fock::vacuum(space)),
            StateSpec::Number { n } => fock::number_state(space, n),
            StateSpec::Thermal { nbar } => fock::thermal_state(space, nbar),
            StateSpec::Coherent { alpha } => Ok(fock::coherent_state(space, c(alpha))),
            StateSpec::SqueezedVacuum { r } => Ok(fock::squeezed_vacuum(space, r)),
            StateSpec::SqueezedCoherent { r, alpha } => {
                Ok(fock::squeezed_coherent_state(space, r, c(alpha)))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineConfig {
    pub m: i32,
    #[serde(default = "unit")]
    pub ratio: f64,
}

/// One entry of `[[channels]]`, tagged by `kind`.
///
/// `baths` repeats the channel that many times within each stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelConfig {
    Cooling {
        #[serde(default = "one")]
        baths: usize,
    },
    Heating {
        #[serde(default = "one")]
        baths: usize,
    },
    Coherent {
        alpha: Complex,
        #[serde(default = "one")]
        baths: usize,
    },
    Squeezed {
        r: f64,
        #[serde(default = "one")]
        baths: usize,
    },
    SqueezedCoherent {
        r: f64,
        alpha: Complex,
        #[serde(default = "one")]
        baths: usize,
    },
    ThermalPair {
        nbar: f64,
        #[serde(default = "one")]
        baths: usize,
    },
    /// Laser lines on one channel; the first line is the anchor.
    Lines {
        lines: Vec<LineConfig>,
        pulse_area: Option<f64>,
        #[serde(default = "one")]
        baths: usize,
    },
    /// `K' = a·â + adag·â† + identity·I` with an explicit increment.
    Ideal {
        #[serde(default = "real_one")]
        a: Complex,
        #[serde(default)]
        adag: Complex,
        #[serde(default)]
        identity: Complex,
        epsilon: f64,
        #[serde(default = "one")]
        baths: usize,
    },
}

impl ChannelConfig {
    fn baths(&self) -> usize {
        match *self {
            ChannelConfig::Cooling { baths }
            | ChannelConfig::Heating { baths }
            | ChannelConfig::Coherent { baths, .. }
            | ChannelConfig::Squeezed { baths, .. }
            | ChannelConfig::SqueezedCoherent { baths, .. }
            | ChannelConfig::ThermalPair { baths, .. }
            | ChannelConfig::Lines { baths, .. }
            | ChannelConfig::Ideal { baths, .. } => baths,
        }
    }

    fn preset(&self) -> Option<Preset> {
        Some(match *self {
            ChannelConfig::Cooling { .. } => Preset::Cooling,
            ChannelConfig::Heating { .. } => Preset::Heating,
            ChannelConfig::Coherent { alpha, .. } => Preset::Coherent { alpha: c(alpha) },
            ChannelConfig::Squeezed { r, .. } => Preset::Squeezed { r },
            ChannelConfig::SqueezedCoherent { r, alpha, .. } => {
                Preset::SqueezedCoherent { r, alpha: c(alpha) }
            }
            ChannelConfig::ThermalPair { nbar, .. } => Preset::ThermalPair { nbar },
            _ => return None,
        })
    }

    /// Rescaled channels for one copy of this entry.
    fn build_once(
        &self,
        space: FockSpace,
        eta: f64,
        pulse_area: f64,
    ) -> ion_reservoir::Result<Vec<EngineeredChannel>> {
        if let Some(p) = self.preset() {
            return lasers::preset_channels(space, p, eta, pulse_area);
        }
        match self {
            ChannelConfig::Lines {
                lines,
                pulse_area: own,
                ..
            } => {
                let lines = lines
                    .iter()
                    .map(|l| LaserLine::new(l.m, l.ratio, eta))
                    .collect::<ion_reservoir::Result<Vec<_>>>()?;
                let spec = ChannelSpec::new(lines, own.unwrap_or(pulse_area))?;
                Ok(vec![lasers::rescale_channel(space, &spec)?])
            }
            ChannelConfig::Ideal {
                a,
                adag,
                identity,
                epsilon,
                ..
            } => {
                let k = &(&fock::annihilation(space).scale(c(*a))
                    + &fock::creation(space).scale(c(*adag)))
                    + &Operator::identity(space).scale(c(*identity));
                Ok(vec![EngineeredChannel::new(k, *epsilon)?])
            }
            _ => unreachable!("presets handled above"),
        }
    }

    pub fn build(
        &self,
        space: FockSpace,
        eta: f64,
        pulse_area: f64,
    ) -> ion_reservoir::Result<Vec<EngineeredChannel>> {
        let once = self.build_once(space, eta, pulse_area)?;
        Ok((0..self.baths())
            .flat_map(|_| once.iter().cloned())
            .collect())
    }

    /// Leading-order target for preset entries.
    pub fn target(&self, space: FockSpace) -> Option<ion_reservoir::Result<DensityMatrix>> {
        self.preset().map(|p| p.target_state(space))
    }
}

/// Competition between dissipation `K' = a` and a squeezing bath.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtectConfig {
    pub epsilon_dissipation: f64,
    /// Squeezing of the reference state `S(−r)|0⟩`.
    pub r: f64,
    pub protection: Option<ProtectionChannel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtectionChannel {
    /// `K' = a + tanh(r) a†`.
    pub r: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    AlphaIm,
    AlphaRe,
    NbarA,
    NuRatio,
    Chi,
}

impl SweepVariable {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepVariable::AlphaIm => "alpha_im",
            SweepVariable::AlphaRe => "alpha_re",
            SweepVariable::NbarA => "nbar_a",
            SweepVariable::NuRatio => "nu_ratio",
            SweepVariable::Chi => "chi",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub variable: SweepVariable,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl SweepConfig {
    pub fn grid(&self) -> Vec<f64> {
        match self.points {
            0 => Vec::new(),
            1 => vec![self.start],
            n => (0..n)
                .map(|k| self.start + (self.stop - self.start) * k as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OttoConfig {
    #[serde(default = "unit")]
    pub nu0: f64,
    pub nu1: f64,
    #[serde(default)]
    pub zeta_over_nu1: Complex,
    pub nbar_a: f64,
    #[serde(default)]
    pub alpha: Complex,
    #[serde(default)]
    pub theta: Vec<f64>,
    /// Sign of `n̄_A − n̄_C` assumed by a `chi` sweep.
    #[serde(default = "unit")]
    pub population_sign: f64,
    pub sweep: Option<SweepConfig>,
}

impl OttoConfig {
    pub fn params(&self) -> ion_reservoir::Result<OttoParams> {
        Ok(OttoParams::new(
            self.nu0,
            self.nu1,
            c(self.zeta_over_nu1),
            self.nbar_a,
            c(self.alpha),
        )?
        .with_theta(self.theta.clone()))
    }

    /// Parameters at sweep coordinate `x`; `chi` sweeps leave them unchanged.
    pub fn params_at(&self, var: SweepVariable, x: f64) -> ion_reservoir::Result<OttoParams> {
        let mut p = self.params()?;
        match var {
            SweepVariable::AlphaIm => p.alpha.im = x,
            SweepVariable::AlphaRe => p.alpha.re = x,
            SweepVariable::NbarA => p.nbar_a = x,
            SweepVariable::NuRatio => p.nu1 = x * p.nu0,
            SweepVariable::Chi => {}
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResetConfig {
    pub omega_tilde: f64,
    #[serde(default = "unit")]
    pub gamma30: f64,
    /// Initial electronic populations of levels 0–3.
    #[serde(default = "excited")]
    pub populations: [f64; 4],
    /// Duration of each of the two pumping steps; defaults to `8/Γ_eff`.
    pub step_time: Option<f64>,
    pub dt: Option<f64>,
}

fn excited() -> [f64; 4] {
    [0.0, 1.0, 0.0, 0.0]
}

impl ResetConfig {
    pub fn params(&self) -> ion_reservoir::Result<ResetParams> {
        ResetParams::new(self.omega_tilde, self.gamma30)
    }

    pub fn initial(&self) -> ion_reservoir::Result<ElectronicState> {
        ElectronicState::mixture(self.populations)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// `Ω_r τ_r`.
    #[serde(default = "default_pulse_area")]
    pub pulse_area: f64,
    #[serde(default)]
    pub n_stages: usize,
    #[serde(default)]
    pub stepper: StepperName,
    #[serde(default)]
    pub channels: Vec<ChannelConfig>,
    pub initial_state: Option<StateSpec>,
    pub target_state: Option<StateSpec>,
    pub protect: Option<ProtectConfig>,
    pub otto: Option<OttoConfig>,
    pub reset: Option<ResetConfig>,
    #[serde(default = "default_output")]
    pub output_path: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config is valid")
    }
}

fn key_err(key: impl std::fmt::Display, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {e}"))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
            .map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.detail())))
    }

    /// Range checks that serde cannot express.
    pub fn check(&self) -> Result<(), CliError> {
        if !(MIN_DIM..=MAX_DIM).contains(&self.dim) {
            return Err(key_err(
                "dim",
                format!("must lie in [{MIN_DIM}, {MAX_DIM}], got {}", self.dim),
            ));
        }
        if !(self.eta > 0.0 && self.eta <= lasers::MAX_ETA) {
            return Err(key_err(
                "eta",
                format!("must lie in (0, 0.5], got {}", self.eta),
            ));
        }
        if !(self.pulse_area > 0.0) || !self.pulse_area.is_finite() {
            return Err(key_err("pulse_area", "must be finite and > 0"));
        }
        for (i, ch) in self.channels.iter().enumerate() {
            if ch.baths() == 0 {
                return Err(key_err(format!("channels[{i}].baths"), "must be >= 1"));
            }
        }
        Ok(())
    }

    pub fn space(&self) -> Result<FockSpace, CliError> {
        FockSpace::new(self.dim).map_err(|e| key_err("dim", e))
    }

    pub fn stepper(&self) -> Stepper {
        self.stepper.into()
    }

    pub fn build_channels(&self, space: FockSpace) -> Result<Vec<EngineeredChannel>, CliError> {
        if self.channels.is_empty() {
            return Err(key_err(
                "channels",
                "at least one [[channels]] entry is required",
            ));
        }
        let mut out = Vec::new();
        for (i, ch) in self.channels.iter().enumerate() {
            let built = ch
                .build(space, self.eta, self.pulse_area)
                .map_err(|e| key_err(format!("channels[{i}]"), e))?;
            out.extend(built);
        }
        Ok(out)
    }

    pub fn initial(&self, space: FockSpace) -> Result<DensityMatrix, CliError> {
        match &self.initial_state {
            Some(s) => s.build(space).map_err(|e| key_err("initial_state", e)),
            None => Ok(fock::vacuum(space)),
        }
    }

    pub fn target(&self, space: FockSpace) -> Result<Option<DensityMatrix>, CliError> {
        self.target_state
            .as_ref()
            .map(|s| s.build(space).map_err(|e| key_err("target_state", e)))
            .transpose()
    }
}

impl CliError {
    fn detail(&self) -> String {
        match self {
            CliError::Config(s) => s.clone(),
            other => other.to_string(),
        }
    }
}

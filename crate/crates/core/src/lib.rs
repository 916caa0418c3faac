//! Pulsed multireservoir engineering for the vibrational mode of a trapped ion.
//!
//! The crate is organised bottom-up:
//!
//! * [`fock`]: truncated Fock space, ladder operators, displacement and
//!   squeezing unitaries, canonical states.
//! * [`lasers`]: sideband operators, engineered channel operators and the
//!   rescaled `(K', ε)` pairs, including the standard channel presets.
//! * [`collision`]: single-stage maps (Lindblad increment, Kraus, exact joint
//!   unitary), multi-stage evolution, vectorized Liouvillian and steady states.
//! * [`reset`]: optical-pumping reset of the four electronic levels.
//! * [`metrics`]: Uhlmann fidelity, trace distance, occupation, tail mass.
//! * [`otto`]: quench-regime Otto cycle energetics and efficiencies.
//!
//! Units: `ħ = 1`. Pulse areas (`Ω_r τ_r`) and increments `ε` are
//! dimensionless; reset dynamics are expressed in units of the spontaneous
//! decay rate.

// Negated comparisons are how NaN parameters get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate blas_src;

pub mod collision;
pub mod error;
pub mod fock;
pub mod lasers;
pub mod linalg;
pub mod metrics;
pub mod otto;
pub mod reset;

pub use collision::{
    evolve, exact_joint_step, kraus_step, liouvillian, propagate_vectorized, recursion_step,
    steady_state, SteadyState, Stepper, Superoperator, Trajectory,
};
pub use error::{Error, Result};
pub use fock::{DensityMatrix, FockSpace, Operator, StateDiagnostics};
pub use lasers::{ChannelSpec, EngineeredChannel, LaserLine, Preset};
pub use linalg::C64;
pub use otto::{CycleEnergetics, Efficiency, OttoParams, Regime};
pub use reset::{ElectronicState, ResetParams, ResetTrace};

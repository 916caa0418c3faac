//! Engineering-stage maps, multi-stage evolution, Liouvillian and steady states.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use ndarray_linalg::{EigVals, Solve};

use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, FockSpace, Operator, POSITIVITY_TOL};
use crate::lasers::{self, ChannelSpec, EngineeredChannel};
use crate::linalg::{self, Matrix, C64, I};
use crate::metrics;

/// Relative size of a Liouvillian eigenvalue counted as zero.
pub const KERNEL_TOL: f64 = 1e-10;

fn check_channels(rho: &DensityMatrix, channels: &[EngineeredChannel]) -> Result<()> {
    for ch in channels {
        rho.check_space(&ch.space())?;
    }
    Ok(())
}

fn hermitized(space: FockSpace, m: Matrix) -> DensityMatrix {
    DensityMatrix::from_matrix_unchecked(space, linalg::hermitian_part(&m))
}

/// `ρ + Σ_μ ε_μ [K'ρK'† − ½{K'†K', ρ}]`.
pub fn recursion_step(
    rho: &DensityMatrix,
    channels: &[EngineeredChannel],
) -> Result<DensityMatrix> {
    check_channels(rho, channels)?;
    let r = rho.matrix();
    let mut out = r.clone();
    for ch in channels {
        let k = ch.k_prime.matrix();
        let kd = linalg::dagger(k);
        let kk = kd.dot(k);
        let jump = k.dot(r).dot(&kd);
        let anti = kk.dot(r) + r.dot(&kk);
        out.scaled_add(C64::from(ch.epsilon), &jump);
        out.scaled_add(C64::from(-0.5 * ch.epsilon), &anti);
    }
    Ok(hermitized(rho.space(), out))
}

fn kraus_operators(channels: &[EngineeredChannel], dim: usize) -> Vec<Matrix> {
    let mut m0 = linalg::identity(dim);
    let mut ops = Vec::with_capacity(channels.len() + 1);
    for ch in channels {
        let k = ch.k_prime.matrix();
        let kk = linalg::dagger(k).dot(k);
        m0.scaled_add(C64::from(-0.5 * ch.epsilon), &kk);
        ops.push(k.mapv(|z| z * (-I * ch.epsilon.sqrt())));
    }
    ops.insert(0, m0);
    ops
}

/// `Σ_j M_j ρ M_j†` with `M₀ = I − ½Σ ε K'†K'` and `M_μ = −i√ε_μ K'_μ`.
pub fn kraus_step(rho: &DensityMatrix, channels: &[EngineeredChannel]) -> Result<DensityMatrix> {
    check_channels(rho, channels)?;
    let r = rho.matrix();
    let dim = rho.space().dim();
    let mut out = Matrix::zeros((dim, dim));
    for m in kraus_operators(channels, dim) {
        out = out + m.dot(r).dot(&linalg::dagger(&m));
    }
    Ok(hermitized(rho.space(), out))
}

/// `max |Σ_j M_j†M_j − I|` for the Kraus operators of [`kraus_step`].
pub fn kraus_completeness_residual(channels: &[EngineeredChannel], space: FockSpace) -> f64 {
    let dim = space.dim();
    let mut sum = Matrix::zeros((dim, dim));
    for m in kraus_operators(channels, dim) {
        sum = sum + linalg::dagger(&m).dot(&m);
    }
    linalg::max_abs(&(sum - linalg::identity(dim)))
}

/// One engineering stage computed from the joint electronic-vibrational
/// unitary, without any expansion in the pulse area.
///
/// The electronic register has `d_levels − 1` levels: the ground state `|0⟩`
/// and one excited level per channel. The electron starts in `|0⟩` and is
/// traced out after the pulse.
pub fn exact_joint_step(
    rho: &DensityMatrix,
    specs: &[ChannelSpec],
    d_levels: usize,
) -> Result<DensityMatrix> {
    if specs.is_empty() || d_levels < 2 || d_levels - 2 != specs.len() {
        return Err(Error::param(
            "d_levels",
            format!(
                "need d_levels - 2 = number of channels, got d_levels = {d_levels} for {} channels",
                specs.len()
            ),
        ));
    }
    let area = specs[0].pulse_area;
    if specs
        .iter()
        .any(|s| (s.pulse_area - area).abs() > 1e-15 * area.abs())
    {
        return Err(Error::param(
            "pulse_area",
            "all channels of one stage share a common pulse area",
        ));
    }
    let space = rho.space();
    let dim = space.dim();
    let levels = d_levels - 1;
    let mut h = Matrix::zeros((levels * dim, levels * dim));
    for (mu, spec) in specs.iter().enumerate() {
        spec.validate()?;
        let k = lasers::engineering_operator(space, &spec.lines)?.into_matrix();
        let kd = linalg::dagger(&k);
        let e = mu + 1;
        h.slice_mut(ndarray::s![e * dim..(e + 1) * dim, 0..dim])
            .assign(&k);
        h.slice_mut(ndarray::s![0..dim, e * dim..(e + 1) * dim])
            .assign(&kd);
    }
    let u = linalg::expm(&h.mapv(|z| -I * area * z))?;
    let r = rho.matrix();
    let mut out = Matrix::zeros((dim, dim));
    for e in 0..levels {
        let a = linalg::block(&u, e * dim, 0, dim, dim);
        out = out + a.dot(r).dot(&linalg::dagger(&a));
    }
    Ok(hermitized(space, out))
}

/// Single-stage update rule used by [`evolve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Stepper {
    /// First-order Lindblad increment per stage.
    Recursion,
    /// Second-order Kraus map per stage.
    Kraus,
    /// `exp(L̂)` per stage; completely positive for any increment.
    #[default]
    Semigroup,
}

impl Stepper {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stepper::Recursion => "recursion",
            Stepper::Kraus => "kraus",
            Stepper::Semigroup => "semigroup",
        }
    }
}

impl fmt::Display for Stepper {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stepper {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "recursion" => Ok(Stepper::Recursion),
            "kraus" => Ok(Stepper::Kraus),
            "semigroup" => Ok(Stepper::Semigroup),
            other => Err(Error::param(
                "stepper",
                format!("expected recursion, kraus or semigroup, got `{other}`"),
            )),
        }
    }
}

/// States after each engineering stage, index 0 being the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<DensityMatrix>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> &DensityMatrix {
        self.states
            .last()
            .expect("trajectory holds the initial state")
    }
}

/// Prepared single-stage map.
pub struct StageMap<'a> {
    channels: &'a [EngineeredChannel],
    stepper: Stepper,
    propagator: Option<Matrix>,
}

impl<'a> StageMap<'a> {
    pub fn new(
        space: FockSpace,
        channels: &'a [EngineeredChannel],
        stepper: Stepper,
    ) -> Result<Self> {
        for ch in channels {
            if ch.space() != space {
                return Err(Error::DimensionMismatch {
                    expected: space.dim(),
                    found: ch.space().dim(),
                });
            }
        }
        let propagator = match stepper {
            Stepper::Semigroup => Some(liouvillian_on(space, channels)?.exp_scaled(1.0)?),
            _ => None,
        };
        Ok(Self {
            channels,
            stepper,
            propagator,
        })
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        match self.stepper {
            Stepper::Recursion => recursion_step(rho, self.channels),
            Stepper::Kraus => kraus_step(rho, self.channels),
            Stepper::Semigroup => {
                let p = self.propagator.as_ref().expect("built with the semigroup");
                let dim = rho.space().dim();
                let v = p.dot(&linalg::vectorize(rho.matrix()));
                Ok(hermitized(rho.space(), linalg::unvectorize(&v, dim)))
            }
        }
    }
}

/// Run `n` stages, handing each state (including the initial one) to `visit`.
pub fn evolve_with(
    rho0: &DensityMatrix,
    channels: &[EngineeredChannel],
    n: usize,
    stepper: Stepper,
    mut visit: impl FnMut(usize, &DensityMatrix) -> Result<()>,
) -> Result<DensityMatrix> {
    let map = StageMap::new(rho0.space(), channels, stepper)?;
    let mut rho = rho0.clone();
    visit(0, &rho)?;
    for k in 1..=n {
        rho = map.apply(&rho)?;
        visit(k, &rho)?;
    }
    Ok(rho)
}

pub fn evolve(
    rho0: &DensityMatrix,
    channels: &[EngineeredChannel],
    n: usize,
    stepper: Stepper,
) -> Result<Trajectory> {
    let mut states = Vec::with_capacity(n + 1);
    evolve_with(rho0, channels, n, stepper, |_, rho| {
        states.push(rho.clone());
        Ok(())
    })?;
    Ok(Trajectory { states })
}

/// Liouvillian acting on column-stacked density matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    space: FockSpace,
    matrix: Matrix,
}

impl Superoperator {
    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<Matrix> {
        rho.check_space(&self.space)?;
        let v = self.matrix.dot(&linalg::vectorize(rho.matrix()));
        Ok(linalg::unvectorize(&v, self.space.dim()))
    }

    pub fn one_norm(&self) -> f64 {
        linalg::one_norm(&self.matrix)
    }

    /// `exp(t L̂)`.
    pub fn exp_scaled(&self, t: f64) -> Result<Matrix> {
        linalg::expm(&self.matrix.mapv(|z| z * t))
    }
}

fn liouvillian_on(space: FockSpace, channels: &[EngineeredChannel]) -> Result<Superoperator> {
    let dim = space.dim();
    let id = linalg::identity(dim);
    let mut l = Matrix::zeros((dim * dim, dim * dim));
    for ch in channels {
        if ch.space() != space {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: ch.space().dim(),
            });
        }
        let k = ch.k_prime.matrix();
        let kk = linalg::dagger(k).dot(k);
        let jump = linalg::kron(&k.mapv(|z| z.conj()), k);
        let left = linalg::kron(&id, &kk);
        let right = linalg::kron(&kk.t().to_owned(), &id);
        l.scaled_add(C64::from(ch.epsilon), &jump);
        l.scaled_add(C64::from(-0.5 * ch.epsilon), &left);
        l.scaled_add(C64::from(-0.5 * ch.epsilon), &right);
    }
    Ok(Superoperator { space, matrix: l })
}

/// `L̂ = Σ_μ ε_μ [conj(K')⊗K' − ½(I⊗K'†K' + (K'†K')ᵀ⊗I)]`.
pub fn liouvillian(channels: &[EngineeredChannel]) -> Result<Superoperator> {
    let first = channels
        .first()
        .ok_or_else(|| Error::param("channels", "need at least one channel"))?;
    liouvillian_on(first.space(), channels)
}

/// `unvectorize(exp(N L̂) vec ρ₀)`, Hermitized.
pub fn propagate_vectorized(
    rho0: &DensityMatrix,
    l: &Superoperator,
    n: usize,
) -> Result<DensityMatrix> {
    rho0.check_space(&l.space)?;
    if n == 0 {
        return Ok(rho0.clone());
    }
    let p = l.exp_scaled(n as f64)?;
    let v = p.dot(&linalg::vectorize(rho0.matrix()));
    Ok(hermitized(l.space, linalg::unvectorize(&v, l.space.dim())))
}

/// Kernel state of a Liouvillian with its extraction diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub state: DensityMatrix,
    /// Magnitude of the selected eigenvalue.
    pub kernel_eigenvalue: f64,
    /// Magnitude of the next-smallest eigenvalue.
    pub gap: f64,
    /// Population of the top two retained levels.
    pub tail_mass: f64,
    /// Set when the state is pinned by the truncation rather than the dynamics.
    pub truncation_dominated: bool,
}

/// Kernel of `L̂` normalized to unit trace.
///
/// Eigenvalues decide whether the kernel is one-dimensional; the state itself
/// comes from solving `L̂ x = 0` with the first diagonal row replaced by the
/// trace condition.
pub fn steady_state(l: &Superoperator) -> Result<SteadyState> {
    let space = l.space;
    let dim = space.dim();
    let w = l.matrix.eigvals()?;
    let scale = l.one_norm().max(f64::MIN_POSITIVE);
    let threshold = KERNEL_TOL * scale;
    let mut mags: Vec<f64> = w.iter().map(|z| z.norm()).collect();
    mags.sort_by(f64::total_cmp);
    let magnitude = mags[0];
    if magnitude >= threshold {
        return Err(Error::NoKernel {
            magnitude,
            threshold,
        });
    }
    let zeros = mags.iter().take_while(|&&m| m < threshold).count();
    if zeros > 1 {
        return Err(Error::DegenerateKernel(zeros));
    }
    let gap = mags.get(1).copied().unwrap_or(f64::INFINITY);

    let mut a = l.matrix.clone();
    a.row_mut(0).fill(C64::new(0.0, 0.0));
    for j in 0..dim {
        a[[0, j * dim + j]] = C64::new(1.0, 0.0);
    }
    let mut b = ndarray::Array1::<C64>::zeros(dim * dim);
    b[0] = C64::new(1.0, 0.0);
    let x = a.solve(&b).map_err(|_| Error::TraceZeroKernel)?;
    let residual = l
        .matrix
        .dot(&x)
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if !residual.is_finite() || residual > 1e3 * threshold {
        return Err(Error::TraceZeroKernel);
    }
    let m = linalg::hermitian_part(&linalg::unvectorize(&x, dim));
    let state = clamp_positive(space, m)?;
    let tail = metrics::tail_mass(&state, 2);
    Ok(SteadyState {
        state,
        kernel_eigenvalue: magnitude,
        gap,
        tail_mass: tail,
        truncation_dominated: tail > metrics::TAIL_WARN,
    })
}

fn clamp_positive(space: FockSpace, m: Matrix) -> Result<DensityMatrix> {
    let (w, v) = linalg::hermitian_eigen(&m)?;
    let min = w.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -POSITIVITY_TOL {
        return Err(Error::NegativeEigenvalue(min));
    }
    if min >= 0.0 {
        return Ok(DensityMatrix::from_matrix_unchecked(space, m));
    }
    let clipped: Vec<f64> = w.iter().map(|&x| x.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    let scaled = Array2::from_shape_fn(v.raw_dim(), |(i, j)| v[[i, j]] * (clipped[j] / total));
    let rebuilt = linalg::hermitian_part(&scaled.dot(&linalg::dagger(&v)));
    Ok(DensityMatrix::from_matrix_unchecked(space, rebuilt))
}

/// Copy of `channels` with every increment multiplied by `factor`.
pub fn scale_increments(channels: &[EngineeredChannel], factor: f64) -> Vec<EngineeredChannel> {
    channels
        .iter()
        .map(|ch| EngineeredChannel {
            k_prime: ch.k_prime.clone(),
            epsilon: ch.epsilon * factor,
        })
        .collect()
}

/// Ideal channel with a given increment, bypassing the laser construction.
pub fn ideal_channel(k_prime: Operator, epsilon: f64) -> Result<EngineeredChannel> {
    EngineeredChannel::new(k_prime, epsilon)
}

/// `Σ_μ ε_μ ‖K'†K'‖_max`, the size of one increment.
pub fn increment_size(channels: &[EngineeredChannel]) -> f64 {
    channels
        .iter()
        .map(|ch| {
            let k = ch.k_prime.matrix();
            ch.epsilon * linalg::max_abs(&linalg::dagger(k).dot(k))
        })
        .sum()
}

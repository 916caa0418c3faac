//! Truncated Fock space, ladder operators and canonical vibrational states.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, C64, ONE, ZERO};

pub const HERMITICITY_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-8;

/// Fock levels `|0⟩ … |dim-1⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FockSpace {
    dim: usize,
}

impl FockSpace {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::DimensionTooSmall(dim));
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check(&self, other: &FockSpace) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(())
    }

    fn vacuum_ket(&self) -> Array1<C64> {
        let mut v = Array1::zeros(self.dim);
        v[0] = ONE;
        v
    }
}

/// Dense operator on a truncated Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    space: FockSpace,
    matrix: Matrix,
}

impl Operator {
    pub fn new(space: FockSpace, matrix: Matrix) -> Result<Self> {
        if matrix.nrows() != space.dim || matrix.ncols() != space.dim {
            return Err(Error::DimensionMismatch {
                expected: space.dim,
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        if !linalg::is_finite(&matrix) {
            return Err(Error::NonFinite);
        }
        Ok(Self { space, matrix })
    }

    pub(crate) fn from_matrix(space: FockSpace, matrix: Matrix) -> Self {
        debug_assert_eq!(matrix.nrows(), space.dim);
        Self { space, matrix }
    }

    pub fn identity(space: FockSpace) -> Self {
        Self::from_matrix(space, linalg::identity(space.dim))
    }

    pub fn zeros(space: FockSpace) -> Self {
        Self::from_matrix(space, Array2::zeros((space.dim, space.dim)))
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }

    pub fn adjoint(&self) -> Self {
        Self::from_matrix(self.space, linalg::dagger(&self.matrix))
    }

    /// Operator product `self · rhs`.
    pub fn compose(&self, rhs: &Operator) -> Self {
        Self::from_matrix(self.space, self.matrix.dot(&rhs.matrix))
    }

    pub fn scale(&self, c: C64) -> Self {
        Self::from_matrix(self.space, self.matrix.mapv(|z| z * c))
    }

    pub fn apply(&self, ket: &Array1<C64>) -> Array1<C64> {
        self.matrix.dot(ket)
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.matrix[[row, col]]
    }

    /// `max |U†U − I|`.
    pub fn unitarity_residual(&self) -> f64 {
        let prod = linalg::dagger(&self.matrix).dot(&self.matrix);
        linalg::max_abs(&(prod - linalg::identity(self.space.dim)))
    }

    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(&self.matrix)
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator::from_matrix(self.space, &self.matrix + &rhs.matrix)
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator::from_matrix(self.space, &self.matrix - &rhs.matrix)
    }
}

impl Mul<&Operator> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        self.compose(rhs)
    }
}

/// Measured departures from the density-matrix invariants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDiagnostics {
    /// `|Tr ρ − 1|`
    pub trace_error: f64,
    /// `max |ρ − ρ†|`
    pub hermiticity_error: f64,
    pub min_eigenvalue: f64,
}

impl StateDiagnostics {
    pub fn trace_ok(&self) -> bool {
        self.trace_error <= TRACE_TOL
    }

    pub fn hermitian_ok(&self) -> bool {
        self.hermiticity_error <= HERMITICITY_TOL
    }

    pub fn positive_ok(&self) -> bool {
        self.min_eigenvalue >= -POSITIVITY_TOL
    }

    pub fn is_valid(&self) -> bool {
        self.trace_ok() && self.hermitian_ok() && self.positive_ok()
    }
}

/// Vibrational density matrix.
///
/// Values built through [`DensityMatrix::new`] and the state constructors in
/// this module satisfy the invariants exactly (to the stated tolerances).
/// Outputs of the collisional steppers are carried as-is so that positivity
/// loss under large increments stays observable through
/// [`DensityMatrix::diagnostics`].
#[derive(Clone, PartialEq)]
pub struct DensityMatrix {
    space: FockSpace,
    matrix: Matrix,
}

impl fmt::Debug for DensityMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityMatrix")
            .field("dim", &self.space.dim)
            .field("matrix", &self.matrix)
            .finish()
    }
}

impl DensityMatrix {
    pub fn new(space: FockSpace, matrix: Matrix) -> Result<Self> {
        let op = Operator::new(space, matrix)?;
        let rho = Self::from_matrix_unchecked(space, op.matrix);
        let diag = rho.diagnostics()?;
        if !diag.hermitian_ok() {
            return Err(Error::InvalidState(format!(
                "not Hermitian (max deviation {:e})",
                diag.hermiticity_error
            )));
        }
        if !diag.trace_ok() {
            return Err(Error::InvalidState(format!(
                "trace deviates from 1 by {:e}",
                diag.trace_error
            )));
        }
        if !diag.positive_ok() {
            return Err(Error::NegativeEigenvalue(diag.min_eigenvalue));
        }
        Ok(rho)
    }

    pub(crate) fn from_matrix_unchecked(space: FockSpace, matrix: Matrix) -> Self {
        Self { space, matrix }
    }

    /// `|ψ⟩⟨ψ| / ⟨ψ|ψ⟩`.
    pub fn from_ket(space: FockSpace, ket: &Array1<C64>) -> Result<Self> {
        if ket.len() != space.dim {
            return Err(Error::DimensionMismatch {
                expected: space.dim,
                found: ket.len(),
            });
        }
        let norm2: f64 = ket.iter().map(|z| z.norm_sqr()).sum();
        if !(norm2 > 0.0) || !norm2.is_finite() {
            return Err(Error::InvalidState(
                "ket has zero or non-finite norm".into(),
            ));
        }
        let m = Array2::from_shape_fn((space.dim, space.dim), |(i, j)| {
            ket[i] * ket[j].conj() / norm2
        });
        Ok(Self::from_matrix_unchecked(space, m))
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }

    pub fn population(&self, level: usize) -> f64 {
        self.matrix[[level, level]].re
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.matrix)
    }

    /// `Tr(A ρ)`.
    pub fn expectation(&self, op: &Operator) -> C64 {
        let n = self.space.dim;
        let mut acc = ZERO;
        for i in 0..n {
            for k in 0..n {
                acc += op.matrix[[i, k]] * self.matrix[[k, i]];
            }
        }
        acc
    }

    pub fn eigenvalues(&self) -> Result<Array1<f64>> {
        linalg::hermitian_eigenvalues(&self.matrix)
    }

    pub fn diagnostics(&self) -> Result<StateDiagnostics> {
        let w = self.eigenvalues()?;
        Ok(StateDiagnostics {
            trace_error: (self.trace() - ONE).norm(),
            hermiticity_error: linalg::hermiticity_error(&self.matrix),
            min_eigenvalue: w.iter().cloned().fold(f64::INFINITY, f64::min),
        })
    }

    /// Conjugate by a unitary: `U ρ U†`.
    pub fn transform(&self, u: &Operator) -> Result<Self> {
        self.space.check(&u.space)?;
        let m = u.matrix.dot(&self.matrix).dot(&linalg::dagger(&u.matrix));
        Ok(Self::from_matrix_unchecked(self.space, m))
    }

    pub(crate) fn check_space(&self, other: &FockSpace) -> Result<()> {
        self.space.check(other)
    }
}

pub fn annihilation(space: FockSpace) -> Operator {
    let n = space.dim;
    let mut m = Array2::zeros((n, n));
    for j in 0..n - 1 {
        m[[j, j + 1]] = C64::from(((j + 1) as f64).sqrt());
    }
    Operator::from_matrix(space, m)
}

pub fn creation(space: FockSpace) -> Operator {
    annihilation(space).adjoint()
}

/// `a†a`, exact on every retained level.
pub fn number(space: FockSpace) -> Operator {
    let n = space.dim;
    let m = Array2::from_shape_fn(
        (n, n),
        |(i, j)| {
            if i == j {
                C64::from(i as f64)
            } else {
                ZERO
            }
        },
    );
    Operator::from_matrix(space, m)
}

/// `D(α) = exp(α a† − α* a)`.
pub fn displacement(space: FockSpace, alpha: C64) -> Operator {
    let a = annihilation(space).into_matrix();
    let ad = linalg::dagger(&a);
    let gen = ad.mapv(|z| z * alpha) - a.mapv(|z| z * alpha.conj());
    let u = linalg::expm(&gen).expect("generator is finite");
    Operator::from_matrix(space, u)
}

/// `S(r) = exp[(r/2)(a†² − a²)]`.
pub fn squeeze(space: FockSpace, r: f64) -> Operator {
    let a = annihilation(space).into_matrix();
    let a2 = a.dot(&a);
    let ad2 = linalg::dagger(&a2);
    let gen = (ad2 - a2).mapv(|z| z * (r / 2.0));
    let u = linalg::expm(&gen).expect("generator is finite");
    Operator::from_matrix(space, u)
}

pub fn number_state(space: FockSpace, j: usize) -> Result<DensityMatrix> {
    if j >= space.dim {
        return Err(Error::param(
            "j",
            format!("level {j} outside a {}-level space", space.dim),
        ));
    }
    let mut m = Array2::zeros((space.dim, space.dim));
    m[[j, j]] = ONE;
    Ok(DensityMatrix::from_matrix_unchecked(space, m))
}

pub fn vacuum(space: FockSpace) -> DensityMatrix {
    number_state(space, 0).expect("level 0 always exists")
}

/// `D(α)|0⟩`, renormalised over the truncated space.
pub fn coherent_state(space: FockSpace, alpha: C64) -> DensityMatrix {
    let ket = displacement(space, alpha).apply(&space.vacuum_ket());
    DensityMatrix::from_ket(space, &ket).expect("displaced vacuum has finite norm")
}

/// `S(−r)|0⟩`.
pub fn squeezed_vacuum(space: FockSpace, r: f64) -> DensityMatrix {
    squeezed_coherent_state(space, r, ZERO)
}

/// `S(−r) D(α) |0⟩`.
pub fn squeezed_coherent_state(space: FockSpace, r: f64, alpha: C64) -> DensityMatrix {
    let ket = displacement(space, alpha).apply(&space.vacuum_ket());
    let ket = squeeze(space, -r).apply(&ket);
    DensityMatrix::from_ket(space, &ket).expect("squeezed coherent ket has finite norm")
}

/// Geometric populations `n̄^j / (n̄+1)^{j+1}`, renormalised over the
/// retained levels.
pub fn thermal_state(space: FockSpace, nbar: f64) -> Result<DensityMatrix> {
    if !(nbar >= 0.0) || !nbar.is_finite() {
        return Err(Error::param(
            "nbar",
            format!("must be finite and >= 0, got {nbar}"),
        ));
    }
    let n = space.dim;
    let ratio = nbar / (nbar + 1.0);
    let mut p = Vec::with_capacity(n);
    let mut pj = 1.0 / (nbar + 1.0);
    for _ in 0..n {
        p.push(pj);
        pj *= ratio;
    }
    let total: f64 = p.iter().sum();
    let mut m = Array2::zeros((n, n));
    for (j, pj) in p.into_iter().enumerate() {
        m[[j, j]] = C64::from(pj / total);
    }
    Ok(DensityMatrix::from_matrix_unchecked(space, m))
}

/// Haar-like random state of the given rank from a complex Ginibre matrix.
pub fn random_density_matrix<R: Rng + ?Sized>(
    space: FockSpace,
    rank: usize,
    rng: &mut R,
) -> DensityMatrix {
    let n = space.dim;
    let rank = rank.clamp(1, n);
    let g = Array2::from_shape_fn((n, rank), |_| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    });
    let m = g.dot(&g.t().mapv(|z| z.conj()));
    let tr = linalg::trace(&m).re;
    let m = linalg::hermitian_part(&m.mapv(|z| z / tr));
    DensityMatrix::from_matrix_unchecked(space, m)
}

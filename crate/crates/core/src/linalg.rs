//! Dense complex matrix helpers shared by the physics modules.

use ndarray::{s, Array1, Array2, ShapeBuilder};
use ndarray_linalg::{Eigh, Inverse, SVD, UPLO};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Matrix = Array2<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn identity(n: usize) -> Matrix {
    Array2::eye(n)
}

pub fn dagger(m: &Matrix) -> Matrix {
    m.t().mapv(|z| z.conj())
}

/// `(m + m†) / 2`.
pub fn hermitian_part(m: &Matrix) -> Matrix {
    (m + &dagger(m)).mapv(|z| z * 0.5)
}

pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    ndarray::linalg::kron(a, b)
}

pub fn trace(m: &Matrix) -> C64 {
    m.diag().sum()
}

pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Maximum absolute column sum.
pub fn one_norm(m: &Matrix) -> f64 {
    m.columns()
        .into_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `max |m - m†|` over entries.
pub fn hermiticity_error(m: &Matrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    worst
}

pub fn is_finite(m: &Matrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Eigen-decomposition of the Hermitian part of `m`, eigenvalues ascending.
pub fn hermitian_eigen(m: &Matrix) -> Result<(Array1<f64>, Matrix)> {
    // eigh on a row-major complex array returns conjugated eigenvectors,
    // so hand LAPACK a column-major copy.
    let h = hermitian_part(m);
    let mut f = Array2::zeros(h.raw_dim().f());
    f.assign(&h);
    let (w, v) = f.eigh(UPLO::Lower)?;
    Ok((w, v))
}

pub fn hermitian_eigenvalues(m: &Matrix) -> Result<Array1<f64>> {
    Ok(hermitian_eigen(m)?.0)
}

pub fn singular_values(m: &Matrix) -> Result<Array1<f64>> {
    let (_, sv, _) = m.svd(false, false)?;
    Ok(sv)
}

/// Apply `f` to the spectrum of a Hermitian matrix: `V f(Λ) V†`.
pub fn hermitian_function(m: &Matrix, f: impl Fn(f64) -> f64) -> Result<Matrix> {
    let (w, v) = hermitian_eigen(m)?;
    let scaled = Array2::from_shape_fn(v.raw_dim(), |(i, j)| v[[i, j]] * f(w[j]));
    Ok(scaled.dot(&dagger(&v)))
}

/// Column-stacking vectorisation: `vec(m)[i + j n] = m[i, j]`.
pub fn vectorize(m: &Matrix) -> Array1<C64> {
    let n = m.nrows();
    Array1::from_shape_fn(n * m.ncols(), |k| m[[k % n, k / n]])
}

pub fn unvectorize(v: &Array1<C64>, n: usize) -> Matrix {
    Array2::from_shape_fn((n, n), |(i, j)| v[i + j * n])
}

// Padé coefficients b_k for degrees 3, 5, 7, 9 and 13 (Higham 2005), with the
// matching 1-norm thresholds below which the unscaled approximant is accurate
// to unit roundoff.
const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.53939833006323e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068),
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with a Padé approximant.
pub fn expm(a: &Matrix) -> Result<Matrix> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if !is_finite(a) {
        return Err(Error::NonFinite);
    }
    let norm = one_norm(a);
    for &(degree, theta) in &THETA {
        if norm <= theta {
            let coeffs: &[f64] = match degree {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            return pade_low(a, coeffs);
        }
    }
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a.mapv(|z| z * 2f64.powi(-squarings));
    let mut r = pade13(&scaled)?;
    for _ in 0..squarings {
        r = r.dot(&r);
    }
    Ok(r)
}

fn solve_pade(u: Matrix, v: Matrix) -> Result<Matrix> {
    let denom = &v - &u;
    let numer = &v + &u;
    Ok(denom.inv()?.dot(&numer))
}

fn pade_low(a: &Matrix, b: &[f64]) -> Result<Matrix> {
    let n = a.nrows();
    let id = identity(n);
    let a2 = a.dot(a);
    let mut powers = vec![id.clone(), a2.clone()];
    let half = b.len() / 2;
    while powers.len() < half {
        let next = powers.last().unwrap().dot(&a2);
        powers.push(next);
    }
    let mut u_inner = Array2::<C64>::zeros((n, n));
    let mut v = Array2::<C64>::zeros((n, n));
    for (k, p) in powers.iter().enumerate() {
        u_inner.scaled_add(C64::from(b[2 * k + 1]), p);
        v.scaled_add(C64::from(b[2 * k]), p);
    }
    let u = a.dot(&u_inner);
    solve_pade(u, v)
}

fn pade13(a: &Matrix) -> Result<Matrix> {
    let b = &PADE13;
    let n = a.nrows();
    let id = identity(n);
    let a2 = a.dot(a);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let c = |k: usize| C64::from(b[k]);

    let mut u_hi = a6.mapv(|z| z * b[13]);
    u_hi.scaled_add(c(11), &a4);
    u_hi.scaled_add(c(9), &a2);
    let mut u_inner = a6.dot(&u_hi);
    u_inner.scaled_add(c(7), &a6);
    u_inner.scaled_add(c(5), &a4);
    u_inner.scaled_add(c(3), &a2);
    u_inner.scaled_add(c(1), &id);
    let u = a.dot(&u_inner);

    let mut v_hi = a6.mapv(|z| z * b[12]);
    v_hi.scaled_add(c(10), &a4);
    v_hi.scaled_add(c(8), &a2);
    let mut v = a6.dot(&v_hi);
    v.scaled_add(c(6), &a6);
    v.scaled_add(c(4), &a4);
    v.scaled_add(c(2), &a2);
    v.scaled_add(c(0), &id);
    solve_pade(u, v)
}

/// Sub-block `[r0..r0+rows, c0..c0+cols]`.
pub fn block(m: &Matrix, r0: usize, c0: usize, rows: usize, cols: usize) -> Matrix {
    m.slice(s![r0..r0 + rows, c0..c0 + cols]).to_owned()
}

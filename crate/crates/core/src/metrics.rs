//! State comparison and truncation diagnostics.

use crate::error::{Error, Result};
use crate::fock::{self, DensityMatrix};
use crate::linalg::{self, Matrix};

/// Eigenvalues below this are treated as genuine negativity rather than
/// roundoff when taking square roots.
pub const CLAMP_TOL: f64 = 1e-10;

/// Top-two-level population above which a truncation warning is raised.
pub const TAIL_WARN: f64 = 1e-8;

fn psd_sqrt(rho: &DensityMatrix) -> Result<Matrix> {
    let (w, v) = linalg::hermitian_eigen(rho.matrix())?;
    let min = w.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -CLAMP_TOL {
        return Err(Error::NegativeEigenvalue(min));
    }
    // Eigenvalues at the roundoff level of the decomposition are treated as
    // exact zeros; their square roots would otherwise inject O(1e-8) noise.
    let max = w.iter().cloned().fold(0.0, f64::max);
    let cut = w.len() as f64 * f64::EPSILON * max;
    let scaled = ndarray::Array2::from_shape_fn(v.raw_dim(), |(i, j)| {
        let x = if w[j] > cut { w[j].sqrt() } else { 0.0 };
        v[[i, j]] * x
    });
    Ok(scaled.dot(&linalg::dagger(&v)))
}

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`.
///
/// The trace norm is taken as the sum of singular values of `√ρ √σ`, which
/// equals `Tr √(√ρ σ √ρ)` and stays accurate when either state is nearly pure.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    rho.check_space(&sigma.space())?;
    let sr = psd_sqrt(rho)?;
    let ss = psd_sqrt(sigma)?;
    let sv = linalg::singular_values(&sr.dot(&ss))?;
    let f = sv.sum().powi(2);
    Ok(f.clamp(0.0, 1.0))
}

pub fn mean_occupation(rho: &DensityMatrix) -> f64 {
    (0..rho.space().dim())
        .map(|j| j as f64 * rho.population(j))
        .sum()
}

/// `½ Σ |λ(ρ − σ)|`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    rho.check_space(&sigma.space())?;
    let diff = rho.matrix() - sigma.matrix();
    let w = linalg::hermitian_eigenvalues(&diff)?;
    Ok(0.5 * w.iter().map(|x| x.abs()).sum::<f64>())
}

/// Population of the top `k` retained levels.
pub fn tail_mass(rho: &DensityMatrix, k: usize) -> f64 {
    let dim = rho.space().dim();
    let k = k.min(dim);
    (dim - k..dim).map(|j| rho.population(j)).sum()
}

/// `Tr(a†a ρ)` via the number operator; agrees with [`mean_occupation`].
pub fn number_expectation(rho: &DensityMatrix) -> f64 {
    rho.expectation(&fock::number(rho.space())).re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::*;
    use crate::linalg::C64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn self_fidelity_and_orthogonal() {
        let s = FockSpace::new(40).unwrap();
        let th = thermal_state(s, 0.5).unwrap();
        assert!((fidelity(&th, &th).unwrap() - 1.0).abs() < 1e-9);
        let f = fidelity(&number_state(s, 0).unwrap(), &number_state(s, 1).unwrap()).unwrap();
        assert!(f.abs() < 1e-15);
    }

    #[test]
    fn pure_state_reduction() {
        let s = FockSpace::new(40).unwrap();
        let th = thermal_state(s, 0.25).unwrap();
        let f = fidelity(&vacuum(s), &th).unwrap();
        assert!((f - 0.8).abs() < 1e-10);
        let coh = coherent_state(s, C64::new(0.0, 0.6));
        assert!((fidelity(&coh, &vacuum(s)).unwrap() - (-0.36f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn occupations() {
        let s = FockSpace::new(40).unwrap();
        assert_eq!(mean_occupation(&vacuum(s)), 0.0);
        let coh = coherent_state(s, C64::new(0.0, 0.6));
        assert!((mean_occupation(&coh) - 0.36).abs() < 1e-10);
        assert!((number_expectation(&coh) - 0.36).abs() < 1e-10);
        let th = thermal_state(s, 0.25).unwrap();
        assert!((mean_occupation(&th) - 0.25).abs() < 1e-6);
        assert!(tail_mass(&coh, 2) <= 1e-10);
    }

    #[test]
    fn trace_distance_extremes() {
        let s = FockSpace::new(10).unwrap();
        let a = number_state(s, 0).unwrap();
        let b = number_state(s, 1).unwrap();
        assert!(trace_distance(&a, &a).unwrap().abs() < 1e-15);
        assert!((trace_distance(&a, &b).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn randomized_fidelity_properties() {
        let s = FockSpace::new(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = displacement(s, C64::new(0.3, -0.2)).compose(&squeeze(s, 0.2));
        for trial in 0..100 {
            let rank = 1 + trial % 8;
            let rho = random_density_matrix(s, rank, &mut rng);
            let sigma = random_density_matrix(s, 1 + (trial * 3) % 8, &mut rng);
            let f = fidelity(&rho, &sigma).unwrap();
            let g = fidelity(&sigma, &rho).unwrap();
            assert!((f - g).abs() <= 1e-9);
            let d = trace_distance(&rho, &sigma).unwrap();
            assert!(1.0 - f.sqrt() <= d + 1e-9);
            assert!(d <= (1.0 - f).sqrt() + 1e-9);
            let fu = fidelity(&rho.transform(&u).unwrap(), &sigma.transform(&u).unwrap()).unwrap();
            assert!((f - fu).abs() <= 1e-9);
        }
    }

    #[test]
    fn negative_input_rejected() {
        let s = FockSpace::new(2).unwrap();
        let m = ndarray::Array2::from_diag(&ndarray::arr1(&[C64::from(1.1), C64::from(-0.1)]));
        let bad = DensityMatrix::from_matrix_unchecked(s, m);
        assert!(matches!(
            fidelity(&bad, &vacuum(s)),
            Err(Error::NegativeEigenvalue(_))
        ));
    }
}

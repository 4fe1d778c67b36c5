//! Seeded sampling of Haar unitaries, random states and random observables.

use alloc::vec::Vec;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{self, qr_positive, ComplexMatrix};
use crate::state::{DensityMatrix, HermitianOperator, PureState};

/// Deterministic generator used throughout the crate.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard complex Gaussian with `E|z|^2 = 1`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * core::f64::consts::FRAC_1_SQRT_2
}

pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(dim, |_, _| complex_normal(rng))
}

/// Haar-distributed unitary from the QR factorization of a Ginibre matrix
/// with the diagonal of `R` made real and positive.
pub fn haar_unitary_with<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    assert!(dim >= 1, "dimension must be positive");
    let (q, _) = qr_positive(&ginibre(rng, dim));
    q
}

pub fn haar_unitary(dim: usize, seed: u64) -> ComplexMatrix {
    haar_unitary_with(&mut rng_from_seed(seed), dim)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StateKind {
    Pure,
    Mixed,
}

pub fn random_pure_with<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> PureState {
    loop {
        let v: Vec<Complex64> = (0..dim).map(|_| complex_normal(rng)).collect();
        if linalg::norm(&v) > 1e-8 {
            return PureState::normalized(v).expect("nonzero finite vector");
        }
    }
}

/// Mixed states come from tracing out a `dim`-dimensional environment of a
/// Haar-random pure state on the doubled space.
pub fn random_state_with<R: Rng + ?Sized>(rng: &mut R, dim: usize, kind: StateKind) -> DensityMatrix {
    match kind {
        StateKind::Pure => random_pure_with(rng, dim).projector(),
        StateKind::Mixed => {
            let psi = random_pure_with(rng, dim * dim);
            let amp = psi.amplitudes();
            let m = ComplexMatrix::from_fn(dim, |i, j| {
                (0..dim).map(|e| amp[i * dim + e] * amp[j * dim + e].conj()).sum()
            });
            DensityMatrix::new(m.hermitian_part()).expect("partial trace is a state")
        }
    }
}

pub fn random_state(dim: usize, kind: StateKind, seed: u64) -> DensityMatrix {
    random_state_with(&mut rng_from_seed(seed), dim, kind)
}

/// Hermitian matrix `(G + G^dag)/2` with Ginibre `G`, scaled by `scale`.
pub fn random_hermitian_with<R: Rng + ?Sized>(rng: &mut R, dim: usize, scale: f64) -> HermitianOperator {
    let g = ginibre(rng, dim);
    HermitianOperator::new(g.hermitian_part().scale_real(scale)).expect("hermitian by construction")
}

/// Probability vector drawn uniformly from the simplex.
pub fn random_simplex<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..k)
        .map(|_| {
            let u: f64 = rng.random::<f64>();
            -num_traits::Float::ln(1.0 - u)
        })
        .collect();
    let total: f64 = w.iter().sum();
    for x in w.iter_mut() {
        *x /= total;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::validate_density;

    #[test]
    fn haar_dim_one_is_a_phase() {
        let u = haar_unitary(1, 7);
        assert!((u[(0, 0)].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn haar_is_unitary_and_deterministic() {
        for seed in 0..20 {
            let u = haar_unitary(3, seed);
            assert!(u.unitarity_deviation() < 1e-12);
            assert_eq!(u, haar_unitary(3, seed));
        }
    }

    #[test]
    fn random_states_are_valid() {
        for seed in 0..20 {
            let p = random_state(2, StateKind::Pure, seed);
            assert!((p.purity() - 1.0).abs() < 1e-10);
            let m = random_state(2, StateKind::Mixed, seed);
            let purity = m.purity();
            assert!((0.5 - 1e-12..=1.0 + 1e-12).contains(&purity));
            assert!(validate_density(m.matrix().clone(), 1e-10).is_ok());
            assert_eq!(m, random_state(2, StateKind::Mixed, seed));
        }
    }

    #[test]
    fn simplex_weights_sum_to_one() {
        let w = random_simplex(&mut rng_from_seed(3), 5);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(w.iter().all(|&x| x >= 0.0));
    }
}

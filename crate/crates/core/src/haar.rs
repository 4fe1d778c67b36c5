//! Haar statistics of the first-order bias of probabilistic-unitary noise,
//! and the Hadamard counterexamples to Pauli-safe state pairs.
//!
//! With `X = |f><f| (A - A_w)` and `sigma = U rho U^dag` for pure `rho`,
//! `Delta(U) = Tr(X sigma) / D`, `D = <f|rho|f>`. The first two Haar moments
//! of `sigma` give
//!
//! * `E[Delta] = (<A>_f - A_w) / (d D)`
//! * `E|Delta|^2 = (|<A>_f - A_w|^2 + <f|(A - A_w)(A - A_w^*)|f>) / (d (d + 1) D^2)`

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::Float;
use rand_chacha::ChaCha8Rng;

use crate::channels::ChannelSpec;
use crate::error::{Error, Result};
use crate::learning::rho_s1;
use crate::linalg::{self, ComplexMatrix};
use crate::random::{haar_unitary_with, rng_from_seed};
use crate::state::{self, DensityMatrix, HermitianOperator, PureState};
use crate::weakvalue::{bias_first_order_analytic, weak_value_pure_post, BiasValue};

pub const MIN_SAMPLES: usize = 10_000;
/// Jackknife groups; also the number of independently seeded chunks.
pub const JACKKNIFE_GROUPS: usize = 100;
pub const DEFAULT_EPSILON: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct HaarDeltaStats {
    pub n_samples: usize,
    pub mean_est: Complex64,
    /// Standard error of `mean_est` as a complex number (both parts combined).
    pub mean_se: f64,
    /// Estimate of `E|Delta|^2`.
    pub second_moment_est: f64,
    pub second_moment_se: f64,
    pub theory_mean: Complex64,
    pub theory_second_moment: f64,
    /// `E|Delta|^2 - |E Delta|^2`
    pub theory_var: f64,
    /// Fraction of samples with `|Delta| <= 0.05 |theory_mean|`.
    pub prob_small_est: f64,
    abs_samples: Vec<f64>,
}

impl HaarDeltaStats {
    /// `|Delta(U)|` for every sample, in draw order.
    pub fn abs_samples(&self) -> &[f64] {
        &self.abs_samples
    }

    pub fn fraction_small(&self, epsilon: f64) -> f64 {
        let cut = epsilon * self.theory_mean.norm();
        let hits = self.abs_samples.iter().filter(|&&x| x <= cut).count();
        hits as f64 / self.abs_samples.len() as f64
    }

    pub fn mean_within(&self, n_se: f64) -> bool {
        (self.mean_est - self.theory_mean).norm() <= n_se * self.mean_se
    }

    pub fn second_moment_within(&self, n_se: f64) -> bool {
        Float::abs(self.second_moment_est - self.theory_second_moment) <= n_se * self.second_moment_se
    }
}

/// Closed-form Haar moments `(E[Delta], E|Delta|^2)`.
pub fn theory_moments(a: &HermitianOperator, pre: &PureState, post: &PureState) -> Result<(Complex64, f64)> {
    let aw = weak_value_pure_post(a, &pre.projector(), post)?;
    let d = a.dim() as f64;
    let overlap = pre.projector().overlap(post);
    let f = post.amplitudes();
    let mean_f = a.expectation(post);
    let a2 = a.matrix().matmul(a.matrix());
    let sq_f = linalg::sandwich(f, &a2, f).re;
    let mu = Complex64::new(mean_f, 0.0) - aw;
    let g = sq_f - 2.0 * aw.re * mean_f + aw.norm_sqr();
    let mean = mu / (d * overlap);
    let second = (mu.norm_sqr() + g) / (d * (d + 1.0) * overlap * overlap);
    Ok((mean, second))
}

/// Qubit variance in the form `(2 Var(A)_f + |<A>_f - A_w|^2) / (12 D^2)`.
pub fn qubit_theory_variance(a: &HermitianOperator, pre: &PureState, post: &PureState) -> Result<f64> {
    let aw = weak_value_pure_post(a, &pre.projector(), post)?;
    let overlap = pre.projector().overlap(post);
    let mu = Complex64::new(a.expectation(post), 0.0) - aw;
    Ok((2.0 * a.variance(post) + mu.norm_sqr()) / (12.0 * overlap * overlap))
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = rng_from_seed(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Delete-one-group jackknife standard error of a sample mean.
fn jackknife_se(group_sums: &[f64], group_sizes: &[usize]) -> f64 {
    let total: f64 = group_sums.iter().sum();
    let n: usize = group_sizes.iter().sum();
    let g = group_sums.len() as f64;
    let loo: Vec<f64> = group_sums
        .iter()
        .zip(group_sizes)
        .map(|(s, &m)| (total - s) / (n - m) as f64)
        .collect();
    let bar = loo.iter().sum::<f64>() / g;
    let ss: f64 = loo.iter().map(|x| (x - bar) * (x - bar)).sum();
    Float::sqrt((g - 1.0) / g * ss)
}

/// Monte-Carlo moments of `Delta(U)` over Haar-random `U`. Samples are drawn
/// in [`JACKKNIFE_GROUPS`] chunks, chunk `c` on ChaCha stream `c` of `seed`.
pub fn mc_delta_stats(
    a: &HermitianOperator,
    pre_pure: &PureState,
    post: &PureState,
    n: usize,
    seed: u64,
) -> Result<HaarDeltaStats> {
    if n < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!("need at least {MIN_SAMPLES} samples, got {n}")));
    }
    let (theory_mean, theory_second_moment) = theory_moments(a, pre_pure, post)?;
    let pre = pre_pure.projector();
    let dim = a.dim();

    let groups = JACKKNIFE_GROUPS;
    let mut sizes = Vec::with_capacity(groups);
    let mut sums_re = Vec::with_capacity(groups);
    let mut sums_im = Vec::with_capacity(groups);
    let mut sums_sq = Vec::with_capacity(groups);
    let mut abs_samples = Vec::with_capacity(n);
    for c in 0..groups {
        let m = n / groups + usize::from(c < n % groups);
        let mut rng = chunk_rng(seed, c);
        let (mut re, mut im, mut sq) = (0.0, 0.0, 0.0);
        for _ in 0..m {
            let u = haar_unitary_with(&mut rng, dim);
            let delta = bias_first_order_analytic(a, &pre, post, &ChannelSpec::ProbUnitary(u))?.delta;
            re += delta.re;
            im += delta.im;
            sq += delta.norm_sqr();
            abs_samples.push(delta.norm());
        }
        sizes.push(m);
        sums_re.push(re);
        sums_im.push(im);
        sums_sq.push(sq);
    }
    let nf = n as f64;
    let mean_est = Complex64::new(sums_re.iter().sum::<f64>() / nf, sums_im.iter().sum::<f64>() / nf);
    let se_re = jackknife_se(&sums_re, &sizes);
    let se_im = jackknife_se(&sums_im, &sizes);
    let mut stats = HaarDeltaStats {
        n_samples: n,
        mean_est,
        mean_se: Float::sqrt(se_re * se_re + se_im * se_im),
        second_moment_est: sums_sq.iter().sum::<f64>() / nf,
        second_moment_se: jackknife_se(&sums_sq, &sizes),
        theory_mean,
        theory_second_moment,
        theory_var: theory_second_moment - theory_mean.norm_sqr(),
        prob_small_est: 0.0,
        abs_samples,
    };
    stats.prob_small_est = stats.fraction_small(DEFAULT_EPSILON);
    Ok(stats)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChebyshevCheck {
    /// `Var / |E Delta|^2`
    pub bound: f64,
    pub empirical: f64,
    pub satisfied: bool,
}

pub fn chebyshev_check(stats: &HaarDeltaStats, epsilon: f64) -> Result<ChebyshevCheck> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let mu2 = stats.theory_mean.norm_sqr();
    if mu2 <= 1e-24 {
        return Err(Error::MeanZero);
    }
    let bound = stats.theory_var / mu2;
    let empirical = stats.fraction_small(epsilon);
    let p = empirical.clamp(0.0, 1.0);
    let se = Float::sqrt(p * (1.0 - p) / stats.n_samples as f64);
    Ok(ChebyshevCheck {
        bound,
        empirical,
        satisfied: empirical <= bound + 3.0 * se,
    })
}

/// Pauli-safe families reused as Hadamard counterexamples.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HadamardFamily {
    /// `[[1/2, r], [r, 1/2]]` with `|+>`
    One,
    /// `diag(r, 1 - r)` with `|0>`
    Two,
    /// `diag(r, 1 - r)` with `|1>`
    Three,
}

impl HadamardFamily {
    pub const ALL: [Self; 3] = [Self::One, Self::Two, Self::Three];

    pub fn pair(self, r: f64) -> Result<(DensityMatrix, PureState)> {
        match self {
            Self::One => Ok((rho_s1(r)?, PureState::plus())),
            Self::Two | Self::Three => {
                let (post, excluded) = match self {
                    Self::Two => (PureState::zero(), 0.0),
                    _ => (PureState::one(), 1.0),
                };
                if r == excluded {
                    return Err(Error::ExcludedParameter { name: "r", value: r });
                }
                Ok((DensityMatrix::qubit_diagonal(r)?, post))
            }
        }
    }

    /// Parameter value at which the preselection is maximally mixed.
    pub fn mixed_point(self) -> f64 {
        match self {
            Self::One => 0.0,
            Self::Two | Self::Three => 0.5,
        }
    }

    /// `<f|rho|f>^2 Delta` in closed form.
    pub fn scaled_closed_form(self, a: &HermitianOperator, r: f64) -> Complex64 {
        let (a11, a12, a21, a22) = (a.entry(0, 0), a.entry(0, 1), a.entry(1, 0), a.entry(1, 1));
        match self {
            Self::One => (a11 - a12 + a21 - a22) * (0.25 * r * (1.0 + 2.0 * r)),
            Self::Two => a12 * (0.5 * r * (2.0 * r - 1.0)),
            Self::Three => a21 * (0.5 * (1.0 - r) * (2.0 * r - 1.0)),
        }
    }

    pub fn overlap(self, r: f64) -> f64 {
        match self {
            Self::One => 0.5 + r,
            Self::Two => r,
            Self::Three => 1.0 - r,
        }
    }

    pub fn closed_form(self, a: &HermitianOperator, r: f64) -> Complex64 {
        let d = self.overlap(r);
        self.scaled_closed_form(a, r) / (d * d)
    }
}

/// Bias of `(1 - p) rho + p H rho H` at `p -> 0` for a catalog pair.
pub fn counterexample_hadamard(family: HadamardFamily, a: &HermitianOperator, r: f64) -> Result<BiasValue> {
    let (pre, post) = family.pair(r)?;
    bias_first_order_analytic(a, &pre, &post, &ChannelSpec::ProbUnitary(state::hadamard()))
}

/// Convenience for callers holding a raw matrix.
pub fn counterexample_for_matrix(family: HadamardFamily, a: &ComplexMatrix, r: f64) -> Result<BiasValue> {
    counterexample_hadamard(family, &HermitianOperator::new(a.clone())?, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_hermitian_with, random_pure_with};

    fn post06() -> PureState {
        PureState::qubit(Complex64::new(0.6f64.cos(), 0.0), Complex64::new(0.6f64.sin(), 0.0)).unwrap()
    }

    #[test]
    fn identity_observable_has_no_bias() {
        let a = HermitianOperator::new(ComplexMatrix::identity(2)).unwrap();
        let s = mc_delta_stats(&a, &PureState::plus(), &post06(), MIN_SAMPLES, 1).unwrap();
        assert!(s.mean_est.norm() < 1e-12);
        assert!(s.second_moment_est < 1e-24);
        assert_eq!(s.theory_var, 0.0);
        assert!(matches!(chebyshev_check(&s, 0.05), Err(Error::MeanZero)));
    }

    #[test]
    fn sample_count_enforced() {
        let a = HermitianOperator::new(state::pauli_z()).unwrap();
        assert!(mc_delta_stats(&a, &PureState::plus(), &post06(), 100, 1).is_err());
    }

    #[test]
    fn qubit_variance_forms_agree() {
        let mut rng = rng_from_seed(4);
        for _ in 0..20 {
            let a = random_hermitian_with(&mut rng, 2, 1.0);
            let (pre, post) = (random_pure_with(&mut rng, 2), random_pure_with(&mut rng, 2));
            let (m, s) = theory_moments(&a, &pre, &post).unwrap();
            let v = qubit_theory_variance(&a, &pre, &post).unwrap();
            assert!((s - m.norm_sqr() - v).abs() < 1e-10 * (1.0 + v));
        }
    }

    #[test]
    fn generic_instance_matches_theory() {
        let a = HermitianOperator::new(state::pauli_z()).unwrap();
        let s = mc_delta_stats(&a, &PureState::plus(), &post06(), 40_000, 9).unwrap();
        assert!(s.mean_within(3.0), "{:?} vs {:?} (se {})", s.mean_est, s.theory_mean, s.mean_se);
        assert!(s.second_moment_within(3.0));
        assert!(chebyshev_check(&s, DEFAULT_EPSILON).unwrap().satisfied);
        assert_eq!(s, mc_delta_stats(&a, &PureState::plus(), &post06(), 40_000, 9).unwrap());
    }

    #[test]
    fn pre_equal_post_has_zero_mean() {
        let a = HermitianOperator::qubit(0.4, -0.9, Complex64::new(0.3, 0.2));
        let s = mc_delta_stats(&a, &post06(), &post06(), 20_000, 3).unwrap();
        assert!(s.theory_mean.norm() < 1e-12);
        assert!(s.mean_within(3.0));
    }

    #[test]
    fn amplified_regime_bound_below_one() {
        let a = HermitianOperator::new(state::pauli_z()).unwrap();
        let t: f64 = 0.7;
        let post = PureState::qubit(Complex64::new(t.cos(), 0.0), Complex64::new(-t.sin(), 0.0)).unwrap();
        let s = mc_delta_stats(&a, &PureState::plus(), &post, 20_000, 5).unwrap();
        let c = chebyshev_check(&s, DEFAULT_EPSILON).unwrap();
        assert!(c.bound < 1.0 && c.satisfied);
    }

    #[test]
    fn hadamard_families_match_generic_bias() {
        let mut rng = rng_from_seed(12);
        for _ in 0..20 {
            let a = random_hermitian_with(&mut rng, 2, 1.0);
            for fam in HadamardFamily::ALL {
                for r in [0.1, 0.25, 0.4] {
                    let d = counterexample_hadamard(fam, &a, r).unwrap().delta;
                    assert!((d - fam.closed_form(&a, r)).norm() < 1e-10);
                }
                assert!(counterexample_hadamard(fam, &a, fam.mixed_point()).unwrap().delta.norm() < 1e-14);
            }
        }
    }

    #[test]
    fn family_two_example_value() {
        let a = HermitianOperator::qubit(0.2, -0.5, Complex64::new(0.7, 0.0));
        let x = HadamardFamily::Two.scaled_closed_form(&a, 0.7);
        assert!((x - 0.14 * 0.7).norm() < 1e-14);
    }

    #[test]
    fn family_one_kernel() {
        // a11 - a12 + a21 - a22 = 0 with a12 real
        let a = HermitianOperator::qubit(0.8, 0.8, Complex64::new(0.3, 0.0));
        assert!(counterexample_hadamard(HadamardFamily::One, &a, 0.25).unwrap().delta.norm() < 1e-12);
    }
}

//! Probe-level models of the weak-value protocol, the strong (projective)
//! limit and strong measurement followed by postselection.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix};
use crate::random::rng_from_seed;
use crate::state::{spectral_decompose, DensityMatrix, HermitianOperator, PureState};
use crate::weakvalue::{weak_value_pure_post, OVERLAP_THRESHOLD};

/// Largest coupling-to-spread ratio treated as the weak regime.
pub const WEAK_REGIME_RATIO: f64 = 0.1;
pub const DEFAULT_GRID_POINTS: usize = 2048;
pub const MIN_GRID_POINTS: usize = 128;

/// Gaussian pointer with position spread `spread` and integrated coupling
/// `coupling`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianProbe {
    spread: f64,
    coupling: f64,
}

impl GaussianProbe {
    pub fn new(spread: f64, coupling: f64) -> Result<Self> {
        if !(spread.is_finite() && spread > 0.0) {
            return Err(Error::InvalidArgument(format!("probe spread must be positive, got {spread}")));
        }
        if !coupling.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(Self { spread, coupling })
    }

    pub fn spread(&self) -> f64 {
        self.spread
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    /// `g / Delta`
    pub fn ratio(&self) -> f64 {
        self.coupling / self.spread
    }

    pub fn is_weak(&self) -> bool {
        Float::abs(self.ratio()) <= WEAK_REGIME_RATIO
    }

    /// Real amplitude whose square is the normal density with variance
    /// `spread^2`.
    fn amplitude(&self, q: f64) -> f64 {
        let s2 = self.spread * self.spread;
        Float::exp(-q * q / (4.0 * s2)) / Float::powf(2.0 * core::f64::consts::PI * s2, 0.25)
    }

    /// `int phi(q - x) phi(q - y) dq`
    fn overlap(&self, x: f64, y: f64) -> f64 {
        let d = x - y;
        Float::exp(-d * d / (8.0 * self.spread * self.spread))
    }
}

/// First-order readout of the weak-value protocol.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WvmpPrediction {
    pub weak_value: Complex64,
    /// `g Re(A_w)`
    pub mean: f64,
    /// `Delta^2`
    pub variance: f64,
    /// False when `|g / Delta|` exceeds [`WEAK_REGIME_RATIO`].
    pub weak_regime: bool,
}

pub fn wvmp_prediction(
    a: &HermitianOperator,
    pre: &DensityMatrix,
    post: &PureState,
    probe: &GaussianProbe,
) -> Result<WvmpPrediction> {
    let aw = weak_value_pure_post(a, pre, post)?;
    Ok(WvmpPrediction {
        weak_value: aw,
        mean: probe.coupling * aw.re,
        variance: probe.spread * probe.spread,
        weak_regime: probe.is_weak(),
    })
}

/// `g Re(A_w)`
pub fn wvmp_expectation(a: &HermitianOperator, pre: &DensityMatrix, post: &PureState, probe: &GaussianProbe) -> Result<f64> {
    Ok(wvmp_prediction(a, pre, post, probe)?.mean)
}

/// What happens to the system after the probe interaction.
#[derive(Clone, Copy, Debug)]
pub enum Postselection<'a> {
    /// System discarded; the probe shows the plain measurement statistics.
    None,
    Onto(&'a PureState),
}

/// Probe position density on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeDistribution {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    /// Success probability of the postselection (one without it).
    pub postselect_prob: f64,
    /// Mean by trapezoid quadrature on the grid.
    pub mean: f64,
    /// Variance by trapezoid quadrature on the grid.
    pub variance: f64,
    /// Mean from the closed-form Gaussian integrals.
    pub exact_mean: f64,
}

impl ProbeDistribution {
    pub fn spacing(&self) -> f64 {
        self.grid[1] - self.grid[0]
    }

    pub fn total_mass(&self) -> f64 {
        trapezoid(&self.density, self.spacing())
    }

    /// Probability mass in `[lo, hi]`, linear interpolation at the ends.
    pub fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        let cdf = self.cdf();
        self.cdf_at(&cdf, hi) - self.cdf_at(&cdf, lo)
    }

    /// Cumulative trapezoid integral, one value per grid point.
    pub fn cdf(&self) -> Vec<f64> {
        let dx = self.spacing();
        let mut out = Vec::with_capacity(self.grid.len());
        let mut acc = 0.0;
        out.push(0.0);
        for w in self.density.windows(2) {
            acc += 0.5 * dx * (w[0] + w[1]);
            out.push(acc);
        }
        out
    }

    fn cdf_at(&self, cdf: &[f64], x: f64) -> f64 {
        let n = self.grid.len();
        if x <= self.grid[0] {
            return 0.0;
        }
        if x >= self.grid[n - 1] {
            return cdf[n - 1];
        }
        let dx = self.spacing();
        let t = (x - self.grid[0]) / dx;
        let k = (Float::floor(t) as usize).min(n - 2);
        let frac = t - k as f64;
        cdf[k] + frac * (cdf[k + 1] - cdf[k])
    }
}

fn trapezoid(values: &[f64], dx: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    dx * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1]))
}

/// Eigenvalue groups of `A` with their spectral projectors.
pub(crate) fn eigenprojectors(a: &HermitianOperator) -> Vec<(f64, ComplexMatrix)> {
    let sd = spectral_decompose(a);
    let scale = sd.eigenvalues.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    sd.eigenspaces(1e-9 * scale)
        .into_iter()
        .map(|(value, idx)| (value, sd.projector(&idx)))
        .collect()
}

/// Smallest admissible half width for a probe and observable.
pub fn min_half_width(a: &HermitianOperator, probe: &GaussianProbe) -> f64 {
    5.0 * (probe.spread + Float::abs(probe.coupling) * max_abs_eigenvalue(a))
}

/// Default grid `(points, half_width)`.
pub fn default_grid(a: &HermitianOperator, probe: &GaussianProbe) -> (usize, f64) {
    (
        DEFAULT_GRID_POINTS,
        8.0 * (probe.spread + Float::abs(probe.coupling) * max_abs_eigenvalue(a)),
    )
}

fn max_abs_eigenvalue(a: &HermitianOperator) -> f64 {
    spectral_decompose(a).eigenvalues.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Exact probe density after coupling `g A (x) P` and optional
/// postselection; no weak-coupling expansion is made.
pub fn probe_distribution(
    a: &HermitianOperator,
    pre: &DensityMatrix,
    post: Postselection<'_>,
    probe: &GaussianProbe,
    grid_points: usize,
    half_width: f64,
) -> Result<ProbeDistribution> {
    if a.dim() != pre.dim() {
        return Err(Error::DimMismatch { expected: a.dim(), found: pre.dim() });
    }
    if let Postselection::Onto(f) = post {
        if f.dim() != a.dim() {
            return Err(Error::DimMismatch { expected: a.dim(), found: f.dim() });
        }
    }
    if grid_points < MIN_GRID_POINTS {
        return Err(Error::InvalidGrid(format!("need at least {MIN_GRID_POINTS} points, got {grid_points}")));
    }
    let needed = min_half_width(a, probe);
    if !(half_width >= needed) {
        return Err(Error::InvalidGrid(format!("half width {half_width} below required {needed}")));
    }
    let spacing = 2.0 * half_width / (grid_points - 1) as f64;
    let max_spacing = probe.spread / 8.0;
    if spacing > max_spacing {
        return Err(Error::GridTooCoarse { spacing, max_spacing });
    }

    let groups = eigenprojectors(a);
    let g = probe.coupling;
    let centers: Vec<f64> = groups.iter().map(|(v, _)| g * v).collect();
    // weights[i][j] multiplies phi(q - c_i) phi(q - c_j)
    let k = groups.len();
    let mut weights = alloc::vec![alloc::vec![0.0; k]; k];
    match post {
        Postselection::None => {
            for (i, (_, p)) in groups.iter().enumerate() {
                weights[i][i] = p.matmul(pre.matrix()).trace().re;
            }
        }
        Postselection::Onto(f) => {
            let amp = f.amplitudes();
            for i in 0..k {
                for j in 0..k {
                    let m = groups[i].1.matmul(pre.matrix()).matmul(&groups[j].1);
                    // Hermitian pairs (i, j), (j, i) combine to twice the real part
                    weights[i][j] = linalg::sandwich(amp, &m, amp).re;
                }
            }
        }
    }

    let mut norm = 0.0;
    let mut first = 0.0;
    for i in 0..k {
        for j in 0..k {
            let ov = probe.overlap(centers[i], centers[j]);
            norm += weights[i][j] * ov;
            first += weights[i][j] * 0.5 * (centers[i] + centers[j]) * ov;
        }
    }
    if norm <= OVERLAP_THRESHOLD {
        return Err(Error::ZeroPostselectProbability);
    }

    let grid: Vec<f64> = (0..grid_points).map(|n| -half_width + n as f64 * spacing).collect();
    let density: Vec<f64> = grid
        .iter()
        .map(|&q| {
            let phis: Vec<f64> = centers.iter().map(|&c| probe.amplitude(q - c)).collect();
            let mut s = 0.0;
            for i in 0..k {
                for j in 0..k {
                    s += weights[i][j] * phis[i] * phis[j];
                }
            }
            s / norm
        })
        .collect();

    let mean = trapezoid(&grid.iter().zip(&density).map(|(q, p)| q * p).collect::<Vec<_>>(), spacing);
    let second = trapezoid(&grid.iter().zip(&density).map(|(q, p)| q * q * p).collect::<Vec<_>>(), spacing);
    Ok(ProbeDistribution {
        grid,
        density,
        postselect_prob: norm,
        mean,
        variance: (second - mean * mean).max(0.0),
        exact_mean: first / norm,
    })
}

/// Postselected probe density; see [`probe_distribution`].
pub fn postselected_probe_distribution(
    a: &HermitianOperator,
    pre: &DensityMatrix,
    post: &PureState,
    probe: &GaussianProbe,
    grid_points: usize,
    half_width: f64,
) -> Result<ProbeDistribution> {
    if pre.dim() == post.dim() {
        let overlap = pre.overlap(post);
        if overlap <= OVERLAP_THRESHOLD && probe.coupling == 0.0 {
            return Err(Error::OrthogonalStates { overlap });
        }
    }
    probe_distribution(a, pre, Postselection::Onto(post), probe, grid_points, half_width)
}

/// `n` draws by inverse-CDF on the grid with linear interpolation.
pub fn sample_probe(dist: &ProbeDistribution, n: usize, seed: u64) -> Vec<f64> {
    let cdf = dist.cdf();
    let total = *cdf.last().expect("non-empty grid");
    let mut rng = rng_from_seed(seed);
    (0..n)
        .map(|_| {
            let u = rng.random::<f64>() * total;
            let k = cdf.partition_point(|&c| c < u).clamp(1, cdf.len() - 1);
            let (c0, c1) = (cdf[k - 1], cdf[k]);
            let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
            dist.grid[k - 1] + t * (dist.grid[k] - dist.grid[k - 1])
        })
        .collect()
}

/// Projective-limit readout statistics without postselection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StrongPrediction {
    /// `g Tr(A rho)`
    pub mean: f64,
    /// `g^2 Var(A) + Delta^2`
    pub variance: f64,
}

pub fn strong_prediction(a: &HermitianOperator, pre: &DensityMatrix, probe: &GaussianProbe) -> Result<StrongPrediction> {
    if a.dim() != pre.dim() {
        return Err(Error::DimMismatch { expected: a.dim(), found: pre.dim() });
    }
    let m1 = a.matrix().matmul(pre.matrix()).trace().re;
    let m2 = a.matrix().matmul(a.matrix()).matmul(pre.matrix()).trace().re;
    let g = probe.coupling;
    Ok(StrongPrediction {
        mean: g * m1,
        variance: g * g * (m2 - m1 * m1) + probe.spread * probe.spread,
    })
}

/// `g Tr(A rho)`
pub fn strong_expectation(a: &HermitianOperator, pre: &DensityMatrix, probe: &GaussianProbe) -> Result<f64> {
    Ok(strong_prediction(a, pre, probe)?.mean)
}

/// Projective measurement of `A` followed by postselection on `post`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PostselectedReadout {
    /// Conditional mean eigenvalue given postselection success.
    pub value: f64,
    pub success_probability: f64,
}

/// Outcome weights `Pr(a) = <f|P_a rho P_a|f>` summed within eigenspaces.
pub fn strong_postselect(a: &HermitianOperator, pre: &DensityMatrix, post: &PureState) -> Result<PostselectedReadout> {
    if a.dim() != pre.dim() || a.dim() != post.dim() {
        return Err(Error::DimMismatch { expected: a.dim(), found: pre.dim().max(post.dim()) });
    }
    let f = post.amplitudes();
    let mut total = 0.0;
    let mut weighted = 0.0;
    for (value, p) in eigenprojectors(a) {
        let pf = p.apply(f);
        let pr = linalg::sandwich(&pf, pre.matrix(), &pf).re;
        total += pr;
        weighted += value * pr;
    }
    if total <= OVERLAP_THRESHOLD {
        return Err(Error::ZeroPostselectProbability);
    }
    Ok(PostselectedReadout {
        value: weighted / total,
        success_probability: total,
    })
}

/// `g` times the conditional mean of [`strong_postselect`].
pub fn strong_postselect_expectation(
    a: &HermitianOperator,
    pre: &DensityMatrix,
    post: &PureState,
    probe: &GaussianProbe,
) -> Result<f64> {
    Ok(probe.coupling * strong_postselect(a, pre, post)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_hermitian_with, random_pure_with, random_state_with, rng_from_seed, StateKind};
    use crate::state;

    fn z() -> HermitianOperator {
        HermitianOperator::new(state::pauli_z()).unwrap()
    }

    #[test]
    fn probe_validation() {
        assert!(GaussianProbe::new(0.0, 1.0).is_err());
        assert!(GaussianProbe::new(1.0, f64::NAN).is_err());
        let p = GaussianProbe::new(2.0, 0.02).unwrap();
        assert!((p.ratio() - 0.01).abs() < 1e-15 && p.is_weak());
    }

    #[test]
    fn wvmp_expectation_examples() {
        let probe = GaussianProbe::new(1.0, 0.01).unwrap();
        let id = HermitianOperator::new(ComplexMatrix::identity(2)).unwrap();
        let e = wvmp_expectation(&id, &PureState::plus().projector(), &PureState::zero(), &probe).unwrap();
        assert!((e - 0.01).abs() < 1e-15);

        let a = HermitianOperator::qubit(0.7, -0.4, Complex64::new(0.3, 0.2));
        let pre = DensityMatrix::qubit_diagonal(0.6).unwrap();
        let e = wvmp_expectation(&a, &pre, &PureState::zero(), &probe).unwrap();
        assert!((e - 0.007).abs() < 1e-15);

        let loud = GaussianProbe::new(1.0, 0.5).unwrap();
        assert!(!wvmp_prediction(&a, &pre, &PureState::zero(), &loud).unwrap().weak_regime);
    }

    #[test]
    fn zero_coupling_leaves_the_probe_alone() {
        let mut rng = rng_from_seed(4);
        let a = random_hermitian_with(&mut rng, 2, 1.0);
        let pre = random_state_with(&mut rng, 2, StateKind::Mixed);
        let post = random_pure_with(&mut rng, 2);
        let probe = GaussianProbe::new(1.0, 0.0).unwrap();
        let (n, l) = default_grid(&a, &probe);
        let d = postselected_probe_distribution(&a, &pre, &post, &probe, n, l).unwrap();
        assert!(d.mean.abs() < 1e-12);
        assert!((d.variance - 1.0).abs() < 1e-8);
        assert!((d.postselect_prob - pre.overlap(&post)).abs() < 1e-12);
        assert!((d.total_mass() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn weak_regime_mean_tracks_weak_value() {
        let theta: f64 = 0.6;
        let post = PureState::qubit(Complex64::new(theta.cos(), 0.0), Complex64::new(-theta.sin(), 0.0)).unwrap();
        let pre = PureState::plus().projector();
        let probe = GaussianProbe::new(1.0, 0.01).unwrap();
        let (n, l) = default_grid(&z(), &probe);
        let d = postselected_probe_distribution(&z(), &pre, &post, &probe, n, l).unwrap();
        let target = wvmp_expectation(&z(), &pre, &post, &probe).unwrap();
        assert!((d.mean - target).abs() <= 0.01 * target.abs());
        assert!((d.mean - d.exact_mean).abs() < 1e-10);
        assert!((d.variance - 1.0).abs() <= 0.01);
    }

    #[test]
    fn strong_regime_reproduces_born_rule() {
        let mut rng = rng_from_seed(21);
        let pre_vec = random_pure_with(&mut rng, 2);
        let probe = GaussianProbe::new(0.01, 1.0).unwrap();
        let half = 8.0 * (0.01 + 1.0);
        let dist = probe_distribution(&z(), &pre_vec.projector(), Postselection::None, &probe, 16384, half).unwrap();
        let amp = pre_vec.amplitudes();
        // eigenvalue +1 <-> |0>, -1 <-> |1>
        let up = dist.mass_between(0.5, 1.5);
        let down = dist.mass_between(-1.5, -0.5);
        assert!((up - amp[0].norm_sqr()).abs() < 1e-6);
        assert!((down - amp[1].norm_sqr()).abs() < 1e-6);
        let strong = strong_expectation(&z(), &pre_vec.projector(), &probe).unwrap();
        assert!((dist.mean - strong).abs() < 1e-6);
    }

    #[test]
    fn grid_errors() {
        let probe = GaussianProbe::new(1.0, 0.1).unwrap();
        let pre = PureState::plus().projector();
        let post = PureState::zero();
        assert!(matches!(
            postselected_probe_distribution(&z(), &pre, &post, &probe, 64, 10.0),
            Err(Error::InvalidGrid(_))
        ));
        assert!(matches!(
            postselected_probe_distribution(&z(), &pre, &post, &probe, 2048, 1.0),
            Err(Error::InvalidGrid(_))
        ));
        assert!(matches!(
            postselected_probe_distribution(&z(), &pre, &post, &probe, 128, 100.0),
            Err(Error::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn sampling_is_reproducible_and_consistent() {
        let probe = GaussianProbe::new(1.0, 0.3).unwrap();
        let (n, l) = default_grid(&z(), &probe);
        let d = postselected_probe_distribution(&z(), &PureState::plus().projector(), &PureState::plus_i(), &probe, n, l).unwrap();
        let s = sample_probe(&d, 200_000, 99);
        assert_eq!(s, sample_probe(&d, 200_000, 99));
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        let var = s.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (s.len() - 1) as f64;
        let se = (var / s.len() as f64).sqrt();
        assert!((mean - d.mean).abs() < 4.0 * se);
        // Var of the sample variance for a near-Gaussian is about 2 sigma^4 / n
        let se_var = (2.0 * var * var / s.len() as f64).sqrt();
        assert!((var - d.variance).abs() < 4.0 * se_var);
    }

    #[test]
    fn strong_measurement_means() {
        let a = HermitianOperator::qubit(1.3, -0.2, Complex64::new(0.5, -0.1));
        let probe = GaussianProbe::new(1.0, 2.0).unwrap();
        let e = strong_expectation(&a, &DensityMatrix::maximally_mixed(2), &probe).unwrap();
        assert!((e - 2.0 * 1.1 / 2.0).abs() < 1e-14);
        assert!((strong_expectation(&z(), &PureState::zero().projector(), &probe).unwrap() - 2.0).abs() < 1e-15);
        let pred = strong_prediction(&z(), &PureState::plus().projector(), &probe).unwrap();
        assert!((pred.variance - (4.0 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn strong_postselect_examples() {
        let mut rng = rng_from_seed(13);
        let probe = GaussianProbe::new(1.0, 1.5).unwrap();
        for _ in 0..10 {
            let a = random_hermitian_with(&mut rng, 2, 1.0);
            let f = random_pure_with(&mut rng, 2);
            let e = strong_postselect_expectation(&a, &DensityMatrix::maximally_mixed(2), &f, &probe).unwrap();
            assert!((e - 1.5 * a.expectation(&f)).abs() < 1e-12);

            let sd = spectral_decompose(&a);
            let top = PureState::new(sd.eigenvector(1)).unwrap();
            let rho = random_state_with(&mut rng, 2, StateKind::Mixed);
            let e = strong_postselect_expectation(&a, &rho, &top, &probe).unwrap();
            assert!((e - 1.5 * sd.eigenvalues[1]).abs() < 1e-12);
        }
        let id = HermitianOperator::new(ComplexMatrix::identity(2)).unwrap();
        let e = strong_postselect_expectation(&id, &PureState::plus().projector(), &PureState::one(), &probe).unwrap();
        assert!((e - 1.5).abs() < 1e-14);
        assert!(matches!(
            strong_postselect(&z(), &PureState::zero().projector(), &PureState::one()),
            Err(Error::ZeroPostselectProbability)
        ));
    }
}

//! Validated states and observables.

use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{self, hermitian_eigen, ComplexMatrix, I, ONE, ZERO};

/// Tolerance for algebraic identities (Hermiticity, normalization).
pub const ALGEBRAIC_TOL: f64 = 1e-12;
/// Most negative eigenvalue still accepted for a density matrix.
pub const PSD_TOL: f64 = 1e-10;

/// A Hermitian matrix, typically the observable being learned.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    matrix: ComplexMatrix,
}

impl HermitianOperator {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(matrix, ALGEBRAIC_TOL)
    }

    pub fn with_tolerance(matrix: ComplexMatrix, tol: f64) -> Result<Self> {
        if !matrix.is_finite() {
            return Err(Error::NonFinite);
        }
        let deviation = matrix.hermiticity_deviation();
        if deviation > tol {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self {
            matrix: matrix.hermitian_part(),
        })
    }

    /// Qubit observable from its real diagonal and the upper off-diagonal
    /// entry `a12` (so `a21 = conj(a12)`).
    pub fn qubit(a11: f64, a22: f64, a12: Complex64) -> Self {
        let m = ComplexMatrix::from_fn(2, |i, j| match (i, j) {
            (0, 0) => Complex64::new(a11, 0.0),
            (1, 1) => Complex64::new(a22, 0.0),
            (0, 1) => a12,
            _ => a12.conj(),
        });
        Self { matrix: m }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.matrix[(i, j)]
    }

    /// `A + c I`
    pub fn shifted(&self, c: f64) -> Self {
        let mut m = self.matrix.clone();
        for i in 0..m.dim() {
            m[(i, i)] += c;
        }
        Self { matrix: m }
    }

    /// `<psi|A|psi>`, real for Hermitian `A`.
    pub fn expectation(&self, psi: &PureState) -> f64 {
        linalg::sandwich(psi.amplitudes(), &self.matrix, psi.amplitudes()).re
    }

    pub fn variance(&self, psi: &PureState) -> f64 {
        let mean = self.expectation(psi);
        let sq = self.matrix.matmul(&self.matrix);
        linalg::sandwich(psi.amplitudes(), &sq, psi.amplitudes()).re - mean * mean
    }
}

/// Normalized state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amplitudes: Vec<Complex64>,
}

impl PureState {
    /// Accepts amplitudes whose squared norm is one within 1e-12.
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::Shape("empty state vector".into()));
        }
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let norm_sq: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if Float::abs(norm_sq - 1.0) > ALGEBRAIC_TOL {
            return Err(Error::NotNormalized { norm_sq });
        }
        Ok(Self { amplitudes })
    }

    /// Rescales arbitrary nonzero amplitudes to unit norm.
    pub fn normalized(amplitudes: Vec<Complex64>) -> Result<Self> {
        let n = linalg::norm(&amplitudes);
        if !n.is_finite() {
            return Err(Error::NonFinite);
        }
        if n == 0.0 {
            return Err(Error::NotNormalized { norm_sq: 0.0 });
        }
        Self::new(amplitudes.into_iter().map(|z| z / n).collect())
    }

    pub fn qubit(a0: Complex64, a1: Complex64) -> Result<Self> {
        Self::normalized([a0, a1].to_vec())
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = alloc::vec![ZERO; dim];
        v[k] = ONE;
        Self { amplitudes: v }
    }

    pub fn zero() -> Self {
        Self::basis(2, 0)
    }

    pub fn one() -> Self {
        Self::basis(2, 1)
    }

    pub fn plus() -> Self {
        let s = Complex64::new(core::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self {
            amplitudes: [s, s].to_vec(),
        }
    }

    pub fn minus() -> Self {
        let s = Complex64::new(core::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self {
            amplitudes: [s, -s].to_vec(),
        }
    }

    /// `(|0> + i|1>)/sqrt(2)`
    pub fn plus_i() -> Self {
        let s = core::f64::consts::FRAC_1_SQRT_2;
        Self {
            amplitudes: [Complex64::new(s, 0.0), I * s].to_vec(),
        }
    }

    pub fn minus_i() -> Self {
        let s = core::f64::consts::FRAC_1_SQRT_2;
        Self {
            amplitudes: [Complex64::new(s, 0.0), -I * s].to_vec(),
        }
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn projector(&self) -> DensityMatrix {
        DensityMatrix {
            matrix: ComplexMatrix::outer(&self.amplitudes, &self.amplitudes),
        }
    }
}

/// Positive semidefinite, unit-trace Hermitian matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        validate_density(matrix, ALGEBRAIC_TOL)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64),
        }
    }

    /// `diag(p, 1 - p)`
    pub fn qubit_diagonal(p: f64) -> Result<Self> {
        validate_density(ComplexMatrix::real_diag(&[p, 1.0 - p]), ALGEBRAIC_TOL)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.matrix[(i, j)]
    }

    pub fn purity(&self) -> f64 {
        self.matrix.matmul(&self.matrix).trace().re
    }

    /// `<psi|rho|psi>`
    pub fn overlap(&self, psi: &PureState) -> f64 {
        linalg::sandwich(psi.amplitudes(), &self.matrix, psi.amplitudes()).re
    }

    /// Returns the state vector when the matrix is rank one.
    pub fn as_pure(&self) -> Result<PureState> {
        let purity = self.purity();
        if Float::abs(purity - 1.0) > 1e-10 {
            return Err(Error::NotPure { purity });
        }
        let sd = spectral_decompose_matrix(&self.matrix);
        let top = sd.eigenvalues.len() - 1;
        PureState::normalized(sd.eigenvectors.column(top))
    }
}

/// Checks Hermiticity, unit trace and positivity within `tol`. The most
/// negative accepted eigenvalue is `-max(tol, 1e-10)`; such eigenvalues are
/// clipped to zero.
pub fn validate_density(m: ComplexMatrix, tol: f64) -> Result<DensityMatrix> {
    if !m.is_finite() {
        return Err(Error::NonFinite);
    }
    let deviation = m.hermiticity_deviation();
    if deviation > tol {
        return Err(Error::NotHermitian { deviation });
    }
    let h = m.hermitian_part();
    let trace = h.trace().re;
    if Float::abs(trace - 1.0) > tol {
        return Err(Error::TraceNotOne { trace });
    }
    let (values, vectors) = hermitian_eigen(&h);
    let min_eigenvalue = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_eigenvalue < -tol.max(PSD_TOL) {
        return Err(Error::NotPositive { min_eigenvalue });
    }
    if min_eigenvalue >= 0.0 {
        return Ok(DensityMatrix { matrix: h });
    }
    let clipped: Vec<f64> = values.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    let d = ComplexMatrix::real_diag(&clipped).scale_real(1.0 / total);
    let rebuilt = vectors.matmul(&d).matmul(&vectors.adjoint()).hermitian_part();
    Ok(DensityMatrix { matrix: rebuilt })
}

/// Eigen-decomposition with ascending eigenvalues and a fixed phase and
/// degeneracy convention.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns.
    pub eigenvectors: ComplexMatrix,
}

impl SpectralDecomposition {
    pub fn eigenvector(&self, k: usize) -> Vec<Complex64> {
        self.eigenvectors.column(k)
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        let v = &self.eigenvectors;
        v.matmul(&ComplexMatrix::real_diag(&self.eigenvalues)).matmul(&v.adjoint())
    }

    /// Groups indices whose eigenvalues agree within `tol`. Groups are
    /// contiguous because eigenvalues are sorted.
    pub fn eigenspaces(&self, tol: f64) -> Vec<(f64, Vec<usize>)> {
        let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
        for (k, &v) in self.eigenvalues.iter().enumerate() {
            match groups.last_mut() {
                Some((first, idx)) if Float::abs(v - *first) <= tol => idx.push(k),
                _ => groups.push((v, alloc::vec![k])),
            }
        }
        for (value, idx) in groups.iter_mut() {
            *value = idx.iter().map(|&k| self.eigenvalues[k]).sum::<f64>() / idx.len() as f64;
        }
        groups
    }

    /// Orthogonal projector onto the span of the listed eigenvectors.
    pub fn projector(&self, indices: &[usize]) -> ComplexMatrix {
        let n = self.eigenvectors.dim();
        let mut p = ComplexMatrix::zeros(n);
        for &k in indices {
            let v = self.eigenvector(k);
            p = &p + &ComplexMatrix::outer(&v, &v);
        }
        p
    }
}

pub fn spectral_decompose(a: &HermitianOperator) -> SpectralDecomposition {
    spectral_decompose_matrix(a.matrix())
}

fn degeneracy_tol(values: &[f64]) -> f64 {
    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    1e-9 * scale
}

pub(crate) fn spectral_decompose_matrix(m: &ComplexMatrix) -> SpectralDecomposition {
    let n = m.dim();
    let (values, vectors) = hermitian_eigen(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted: Vec<f64> = order.iter().map(|&k| values[k]).collect();
    let tol = degeneracy_tol(&sorted);

    let mut out = ComplexMatrix::zeros(n);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && Float::abs(sorted[end] - sorted[start]) <= tol {
            end += 1;
        }
        let cols: Vec<Vec<Complex64>> = order[start..end].iter().map(|&k| vectors.column(k)).collect();
        let basis = if cols.len() == 1 {
            cols
        } else {
            canonical_subspace_basis(&cols)
        };
        for (offset, v) in basis.into_iter().enumerate() {
            let v = fix_phase(v);
            for i in 0..n {
                out[(i, start + offset)] = v[i];
            }
        }
        start = end;
    }
    SpectralDecomposition {
        eigenvalues: sorted,
        eigenvectors: out,
    }
}

/// Projects the standard basis vectors, in order, onto the subspace and
/// orthonormalizes the first independent ones.
fn canonical_subspace_basis(cols: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let n = cols[0].len();
    let mut projector = ComplexMatrix::zeros(n);
    for c in cols {
        projector = &projector + &ComplexMatrix::outer(c, c);
    }
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(cols.len());
    for j in 0..n {
        if basis.len() == cols.len() {
            break;
        }
        let mut w = projector.column(j);
        for _pass in 0..2 {
            for b in &basis {
                let c = linalg::inner(b, &w);
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= c * bi;
                }
            }
        }
        let nrm = linalg::norm(&w);
        if nrm > 1e-6 {
            basis.push(w.into_iter().map(|z| z / nrm).collect());
        }
    }
    basis
}

/// Makes the first component of non-negligible modulus real and positive.
fn fix_phase(mut v: Vec<Complex64>) -> Vec<Complex64> {
    let biggest = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if let Some(first) = v.iter().find(|z| z.norm() > 1e-8 * biggest.max(1e-300)) {
        let phase = first.conj() / first.norm();
        for z in v.iter_mut() {
            *z *= phase;
        }
    }
    v
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::real2([[0.0, 1.0], [1.0, 0.0]])
}

pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_fn(2, |i, j| match (i, j) {
        (0, 1) => -I,
        (1, 0) => I,
        _ => ZERO,
    })
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::real2([[1.0, 0.0], [0.0, -1.0]])
}

pub fn hadamard() -> ComplexMatrix {
    let s = core::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::real2([[s, s], [s, -s]])
}

/// Checks `U^dag U = I` within `tol`.
pub fn validate_unitary(u: &ComplexMatrix, tol: f64) -> Result<()> {
    if !u.is_finite() {
        return Err(Error::NonFinite);
    }
    let deviation = u.unitarity_deviation();
    if deviation > tol {
        return Err(Error::NotUnitary { deviation });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn validate_density_examples() {
        assert!(validate_density(ComplexMatrix::real_diag(&[0.5, 0.5]), 1e-12).is_ok());
        match validate_density(ComplexMatrix::real2([[0.5, 0.6], [0.6, 0.5]]), 1e-12) {
            Err(Error::NotPositive { min_eigenvalue }) => assert!((min_eigenvalue + 0.1).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        match validate_density(ComplexMatrix::real2([[1.0, 0.0], [0.0, 0.1]]), 1e-12) {
            Err(Error::TraceNotOne { trace }) => assert!((trace - 1.1).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        let skew = ComplexMatrix::from_rows(&[[c(0.5, 0.0), c(0.1, 0.0)], [c(0.2, 0.0), c(0.5, 0.0)]]).unwrap();
        assert!(matches!(validate_density(skew, 1e-12), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn small_negative_eigenvalue_is_clipped() {
        let m = ComplexMatrix::real_diag(&[1.0 + 5e-11, -5e-11]);
        let rho = validate_density(m, 1e-12).unwrap();
        assert!(rho.entry(1, 1).re >= 0.0);
        assert!((rho.matrix().trace().re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn pauli_spectra_follow_convention() {
        let z = spectral_decompose(&HermitianOperator::new(pauli_z()).unwrap());
        assert_eq!(z.eigenvalues, [-1.0, 1.0]);
        assert!((z.eigenvector(0)[1] - ONE).norm() < 1e-14);
        assert!((z.eigenvector(1)[0] - ONE).norm() < 1e-14);

        let x = spectral_decompose(&HermitianOperator::new(pauli_x()).unwrap());
        let s = core::f64::consts::FRAC_1_SQRT_2;
        assert!((x.eigenvalues[0] + 1.0).abs() < 1e-14);
        let v0 = x.eigenvector(0);
        let v1 = x.eigenvector(1);
        assert!((v0[0] - c(s, 0.0)).norm() < 1e-14 && (v0[1] - c(-s, 0.0)).norm() < 1e-14);
        assert!((v1[0] - c(s, 0.0)).norm() < 1e-14 && (v1[1] - c(s, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn complex_two_by_two_against_quadratic() {
        let m = ComplexMatrix::from_rows(&[[c(2.0, 0.0), c(1.0, -1.0)], [c(1.0, 1.0), c(3.0, 0.0)]]).unwrap();
        let a = HermitianOperator::new(m.clone()).unwrap();
        let sd = spectral_decompose(&a);
        // roots of x^2 - 5x + (6 - 2)
        let disc = (25.0f64 - 16.0).sqrt();
        assert!((sd.eigenvalues[0] - (5.0 - disc) / 2.0).abs() < 1e-12);
        assert!((sd.eigenvalues[1] - (5.0 + disc) / 2.0).abs() < 1e-12);
        assert!((&sd.reconstruct() - &m).max_abs() < 1e-10);
    }

    #[test]
    fn degenerate_identity_gives_standard_basis() {
        let sd = spectral_decompose(&HermitianOperator::new(ComplexMatrix::identity(3)).unwrap());
        assert!((&sd.eigenvectors - &ComplexMatrix::identity(3)).max_abs() < 1e-14);
        assert_eq!(sd.eigenspaces(1e-9).len(), 1);
    }

    #[test]
    fn pure_state_validation() {
        assert!(matches!(
            PureState::new([ONE, ONE].to_vec()),
            Err(Error::NotNormalized { .. })
        ));
        let p = PureState::qubit(ONE, I).unwrap();
        assert!((linalg::norm(p.amplitudes()) - 1.0).abs() < 1e-15);
        assert!((p.projector().purity() - 1.0).abs() < 1e-14);
        let back = p.projector().as_pure().unwrap();
        assert!((linalg::inner(back.amplitudes(), p.amplitudes()).norm() - 1.0).abs() < 1e-12);
        assert!(matches!(
            DensityMatrix::maximally_mixed(2).as_pure(),
            Err(Error::NotPure { .. })
        ));
    }

    #[test]
    fn rejects_non_hermitian_observable() {
        let m = ComplexMatrix::from_rows(&[[ONE, I], [I, ONE]]).unwrap();
        assert!(matches!(HermitianOperator::new(m), Err(Error::NotHermitian { .. })));
    }
}

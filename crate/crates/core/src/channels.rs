//! Kraus channel families parameterized by a noise strength `gamma`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::state::{self, validate_density, DensityMatrix};

const WEIGHT_TOL: f64 = 1e-12;

/// Channel family description. The noise strength is supplied separately
/// when the channel is built.
#[derive(Clone, Debug, PartialEq)]
pub enum ChannelSpec {
    /// Single-qubit Pauli channel with weights on X, Y, Z summing to one.
    Pauli { x: f64, y: f64, z: f64 },
    AmplitudeDamping,
    PhaseDamping,
    /// `(1 - gamma) rho + gamma U rho U^dag`
    ProbUnitary(ComplexMatrix),
    /// `(1 - gamma) rho + gamma sum_k w_k U_k rho U_k^dag`, weights summing to one.
    UnitaryMixture(Vec<(ComplexMatrix, f64)>),
    /// Components applied in list order, component `i` with strength
    /// `lambda_i * gamma`.
    Composed(Vec<(ChannelSpec, f64)>),
}

impl ChannelSpec {
    pub fn pauli(x: f64, y: f64, z: f64) -> Self {
        Self::Pauli { x, y, z }
    }

    /// Phase damping after amplitude damping with equal shares of `gamma`.
    pub fn ad_pd() -> Self {
        Self::Composed(vec![(Self::AmplitudeDamping, 0.5), (Self::PhaseDamping, 0.5)])
    }

    pub fn dim(&self) -> Result<usize> {
        match self {
            Self::Pauli { .. } | Self::AmplitudeDamping | Self::PhaseDamping => Ok(2),
            Self::ProbUnitary(u) => Ok(u.dim()),
            Self::UnitaryMixture(list) => list
                .first()
                .map(|(u, _)| u.dim())
                .ok_or_else(|| Error::InvalidSpec("empty unitary mixture".into())),
            Self::Composed(list) => list
                .first()
                .ok_or_else(|| Error::InvalidSpec("empty composition".into()))?
                .0
                .dim(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Pauli { x, y, z } => {
                let w = [*x, *y, *z];
                if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::InvalidSpec(format!("negative Pauli weight in {w:?}")));
                }
                let total: f64 = w.iter().sum();
                if Float::abs(total - 1.0) > WEIGHT_TOL {
                    return Err(Error::InvalidSpec(format!("Pauli weights sum to {total}, not 1")));
                }
            }
            Self::AmplitudeDamping | Self::PhaseDamping => {}
            Self::ProbUnitary(u) => unitary_ok(u)?,
            Self::UnitaryMixture(list) => {
                let dim = self.dim()?;
                let mut total = 0.0;
                for (u, w) in list {
                    unitary_ok(u)?;
                    if u.dim() != dim {
                        return Err(Error::DimMismatch { expected: dim, found: u.dim() });
                    }
                    if !w.is_finite() || *w < 0.0 {
                        return Err(Error::InvalidSpec(format!("negative mixture weight {w}")));
                    }
                    total += w;
                }
                if Float::abs(total - 1.0) > WEIGHT_TOL {
                    return Err(Error::InvalidSpec(format!("mixture weights sum to {total}, not 1")));
                }
            }
            Self::Composed(list) => {
                let dim = self.dim()?;
                for (s, w) in list {
                    s.validate()?;
                    if s.dim()? != dim {
                        return Err(Error::DimMismatch { expected: dim, found: s.dim()? });
                    }
                    if !w.is_finite() || *w < 0.0 {
                        return Err(Error::InvalidSpec(format!("negative composition weight {w}")));
                    }
                }
            }
        }
        Ok(())
    }
}

fn unitary_ok(u: &ComplexMatrix) -> Result<()> {
    state::validate_unitary(u, 1e-12).map_err(|e| match e {
        Error::NotUnitary { deviation } => Error::InvalidSpec(format!("unitary deviates by {deviation:e}")),
        other => other,
    })
}

/// A channel instance: Kraus operators at a fixed noise strength.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    gamma: f64,
    kraus_ops: Vec<ComplexMatrix>,
}

impl KrausChannel {
    /// Wraps arbitrary Kraus operators without checking completeness; use
    /// [`check_trace_preserving`] for that.
    pub fn new(gamma: f64, kraus_ops: Vec<ComplexMatrix>) -> Result<Self> {
        let first = kraus_ops
            .first()
            .ok_or_else(|| Error::InvalidSpec("no Kraus operators".into()))?;
        let dim = first.dim();
        for k in &kraus_ops {
            if k.dim() != dim {
                return Err(Error::DimMismatch { expected: dim, found: k.dim() });
            }
            if !k.is_finite() {
                return Err(Error::NonFinite);
            }
        }
        Ok(Self { gamma, kraus_ops })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            gamma: 0.0,
            kraus_ops: vec![ComplexMatrix::identity(dim)],
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn kraus_ops(&self) -> &[ComplexMatrix] {
        &self.kraus_ops
    }

    pub fn dim(&self) -> usize {
        self.kraus_ops[0].dim()
    }

    /// Applies the map to any square matrix (the map is linear).
    pub fn apply_matrix(&self, m: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(m.dim());
        for k in &self.kraus_ops {
            out = &out + &k.matmul(m).matmul(&k.adjoint());
        }
        out
    }

    /// `sum_k E_k^dag E_k`
    pub fn completeness(&self) -> ComplexMatrix {
        let mut s = ComplexMatrix::zeros(self.dim());
        for k in &self.kraus_ops {
            s = &s + &k.adjoint().matmul(k);
        }
        s
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma) || !gamma.is_finite() {
        return Err(Error::GammaOutOfRange { gamma });
    }
    Ok(())
}

pub fn build_channel(spec: &ChannelSpec, gamma: f64) -> Result<KrausChannel> {
    spec.validate()?;
    check_gamma(gamma)?;
    build_unchecked(spec, gamma)
}

fn build_unchecked(spec: &ChannelSpec, gamma: f64) -> Result<KrausChannel> {
    let keep = Float::sqrt(1.0 - gamma);
    let ops = match spec {
        ChannelSpec::Pauli { x, y, z } => {
            let mut ops = vec![ComplexMatrix::identity(2).scale_real(keep)];
            for (w, p) in [(*x, state::pauli_x()), (*y, state::pauli_y()), (*z, state::pauli_z())] {
                if w > 0.0 {
                    ops.push(p.scale_real(Float::sqrt(gamma * w)));
                }
            }
            ops
        }
        ChannelSpec::AmplitudeDamping => vec![
            ComplexMatrix::real_diag(&[1.0, keep]),
            ComplexMatrix::real2([[0.0, Float::sqrt(gamma)], [0.0, 0.0]]),
        ],
        ChannelSpec::PhaseDamping => vec![
            ComplexMatrix::real_diag(&[1.0, keep]),
            ComplexMatrix::real_diag(&[0.0, Float::sqrt(gamma)]),
        ],
        ChannelSpec::ProbUnitary(u) => vec![
            ComplexMatrix::identity(u.dim()).scale_real(keep),
            u.scale_real(Float::sqrt(gamma)),
        ],
        ChannelSpec::UnitaryMixture(list) => {
            let mut ops = vec![ComplexMatrix::identity(spec.dim()?).scale_real(keep)];
            for (u, w) in list {
                if *w > 0.0 {
                    ops.push(u.scale_real(Float::sqrt(gamma * w)));
                }
            }
            ops
        }
        ChannelSpec::Composed(list) => {
            let mut acc = KrausChannel::identity(spec.dim()?);
            for (s, w) in list {
                let g = w * gamma;
                check_gamma(g)?;
                acc = compose_channels(&acc, &build_unchecked(s, g)?)?;
            }
            return Ok(KrausChannel { gamma, kraus_ops: acc.kraus_ops });
        }
    };
    Ok(KrausChannel { gamma, kraus_ops: ops })
}

pub fn apply_channel(c: &KrausChannel, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if c.dim() != rho.dim() {
        return Err(Error::DimMismatch { expected: c.dim(), found: rho.dim() });
    }
    validate_density(c.apply_matrix(rho.matrix()), 1e-10)
}

/// Channel that applies `inner` first and then `outer`.
pub fn compose_channels(inner: &KrausChannel, outer: &KrausChannel) -> Result<KrausChannel> {
    if inner.dim() != outer.dim() {
        return Err(Error::DimMismatch { expected: inner.dim(), found: outer.dim() });
    }
    let mut ops = Vec::with_capacity(inner.kraus_ops.len() * outer.kraus_ops.len());
    for o in &outer.kraus_ops {
        for i in &inner.kraus_ops {
            ops.push(o.matmul(i));
        }
    }
    Ok(KrausChannel {
        gamma: inner.gamma.max(outer.gamma),
        kraus_ops: ops,
    })
}

pub fn check_unital(c: &KrausChannel, tol: f64) -> bool {
    let mixed = DensityMatrix::maximally_mixed(c.dim());
    (&c.apply_matrix(mixed.matrix()) - mixed.matrix()).frobenius_norm() <= tol
}

pub fn check_trace_preserving(c: &KrausChannel, tol: f64) -> bool {
    (&c.completeness() - &ComplexMatrix::identity(c.dim())).max_abs() <= tol
}

/// Closed-form `d/dgamma E_gamma(rho)` at `gamma = 0`. Every family here is
/// smooth at zero, so the derivative of a composition is the weighted sum of
/// the component derivatives.
pub fn analytic_generator(spec: &ChannelSpec, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    spec.validate()?;
    generator_unchecked(spec, rho)
}

fn generator_unchecked(spec: &ChannelSpec, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    let dim = spec.dim()?;
    if rho.dim() != dim {
        return Err(Error::DimMismatch { expected: dim, found: rho.dim() });
    }
    let conj = |u: &ComplexMatrix| u.matmul(rho).matmul(&u.adjoint());
    Ok(match spec {
        ChannelSpec::Pauli { x, y, z } => {
            let mut m = ComplexMatrix::zeros(2);
            for (w, p) in [(*x, state::pauli_x()), (*y, state::pauli_y()), (*z, state::pauli_z())] {
                m.axpy(Complex64::new(w, 0.0), &(&conj(&p) - rho));
            }
            m
        }
        ChannelSpec::AmplitudeDamping => {
            let r22 = rho[(1, 1)];
            ComplexMatrix::from_fn(2, |i, j| match (i, j) {
                (0, 0) => r22,
                (1, 1) => -r22,
                _ => rho[(i, j)] * -0.5,
            })
        }
        ChannelSpec::PhaseDamping => {
            ComplexMatrix::from_fn(2, |i, j| if i == j { Complex64::new(0.0, 0.0) } else { rho[(i, j)] * -0.5 })
        }
        ChannelSpec::ProbUnitary(u) => &conj(u) - rho,
        ChannelSpec::UnitaryMixture(list) => {
            let mut m = rho.scale_real(-1.0);
            for (u, w) in list {
                m.axpy(Complex64::new(*w, 0.0), &conj(u));
            }
            m
        }
        ChannelSpec::Composed(list) => {
            let mut m = ComplexMatrix::zeros(dim);
            for (s, w) in list {
                m.axpy(Complex64::new(*w, 0.0), &generator_unchecked(s, rho)?);
            }
            m
        }
    })
}

/// One-sided second-order difference `(-3 f(0) + 4 f(h) - f(2h)) / (2h)`
/// with one Richardson step, for any map `gamma -> value`.
pub(crate) fn richardson_one_sided<T, F>(h: f64, mut f: F) -> Result<T>
where
    F: FnMut(f64) -> Result<T>,
    T: LinearValue,
{
    let f0 = f(0.0)?;
    let d = |step: f64, fh: &T, f2h: &T| f0.scale(-3.0).add(&fh.scale(4.0)).add(&f2h.scale(-1.0)).scale(1.0 / (2.0 * step));
    let fh = f(h)?;
    let f2h = f(2.0 * h)?;
    let fh2 = f(h / 2.0)?;
    let coarse = d(h, &fh, &f2h);
    let fine = d(h / 2.0, &fh2, &fh);
    Ok(fine.scale(4.0 / 3.0).add(&coarse.scale(-1.0 / 3.0)))
}

pub(crate) trait LinearValue: Sized {
    fn scale(&self, c: f64) -> Self;
    fn add(&self, other: &Self) -> Self;
}

impl LinearValue for ComplexMatrix {
    fn scale(&self, c: f64) -> Self {
        self.scale_real(c)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
}

impl LinearValue for Complex64 {
    fn scale(&self, c: f64) -> Self {
        self * c
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
}

pub(crate) fn check_step(h: f64) -> Result<()> {
    if !(h > 0.0 && h <= 1e-2) {
        return Err(Error::StepTooLarge { step: h });
    }
    Ok(())
}

pub const DEFAULT_STEP: f64 = 1e-4;

/// Generator applied to `rho`. Families linear in `gamma` (Pauli, unitary
/// mixtures) return the exact generator; damping channels are
/// differentiated numerically with step `h`.
pub fn channel_derivative_at_zero(spec: &ChannelSpec, rho: &DensityMatrix, h: f64) -> Result<ComplexMatrix> {
    check_step(h)?;
    spec.validate()?;
    derivative_unchecked(spec, rho.matrix(), h)
}

fn derivative_unchecked(spec: &ChannelSpec, rho: &ComplexMatrix, h: f64) -> Result<ComplexMatrix> {
    match spec {
        ChannelSpec::Pauli { .. } | ChannelSpec::ProbUnitary(_) | ChannelSpec::UnitaryMixture(_) => {
            generator_unchecked(spec, rho)
        }
        ChannelSpec::AmplitudeDamping | ChannelSpec::PhaseDamping => {
            if rho.dim() != 2 {
                return Err(Error::DimMismatch { expected: 2, found: rho.dim() });
            }
            richardson_one_sided(h, |g| Ok(build_unchecked(spec, g)?.apply_matrix(rho)))
        }
        ChannelSpec::Composed(list) => {
            let mut m = ComplexMatrix::zeros(rho.dim());
            for (s, w) in list {
                m.axpy(Complex64::new(*w, 0.0), &derivative_unchecked(s, rho, h)?);
            }
            Ok(m)
        }
    }
}

/// Pauli transfer matrix `R_ij = Tr(s_i E(s_j)) / 2` in the basis
/// `(I, X, Y, Z)` of a qubit channel.
pub fn pauli_transfer_matrix(c: &KrausChannel) -> Result<[[f64; 4]; 4]> {
    if c.dim() != 2 {
        return Err(Error::DimMismatch { expected: 2, found: c.dim() });
    }
    let basis = [ComplexMatrix::identity(2), state::pauli_x(), state::pauli_y(), state::pauli_z()];
    let mut r = [[0.0; 4]; 4];
    for (j, sj) in basis.iter().enumerate() {
        let image = c.apply_matrix(sj);
        for (i, si) in basis.iter().enumerate() {
            r[i][j] = 0.5 * si.matmul(&image).trace().re;
        }
    }
    Ok(r)
}

/// Channel classes the learning recipes are stated for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelClass {
    /// Diagonal transfer matrix.
    Pauli,
    /// Fixes the maximally mixed state.
    Unital,
    /// Amplitude damping composed with dephasing: fixes `|0><0|`, shrinks
    /// the x and y Bloch components equally and leaves them uncoupled.
    AmplitudePhaseDamping,
}

/// Whether `c` belongs to `class`, judged from its action within `tol`.
pub fn is_in_class(c: &KrausChannel, class: ChannelClass, tol: f64) -> bool {
    if !check_trace_preserving(c, tol) {
        return false;
    }
    if class == ChannelClass::Unital {
        return check_unital(c, tol);
    }
    let Ok(r) = pauli_transfer_matrix(c) else {
        return false;
    };
    let off = |i: usize, j: usize| Float::abs(r[i][j]) <= tol;
    match class {
        ChannelClass::Pauli => (0..4).all(|i| (0..4).all(|j| i == j || off(i, j))),
        ChannelClass::AmplitudePhaseDamping => {
            let shape = off(1, 0)
                && off(2, 0)
                && off(1, 2)
                && off(2, 1)
                && off(1, 3)
                && off(2, 3)
                && off(3, 1)
                && off(3, 2);
            let equal_xy = Float::abs(r[1][1] - r[2][2]) <= tol;
            let fixes_zero = Float::abs(r[3][0] + r[3][3] - 1.0) <= tol && r[3][0] >= -tol;
            shape && equal_xy && fixes_zero
        }
        ChannelClass::Unital => unreachable!(),
    }
}

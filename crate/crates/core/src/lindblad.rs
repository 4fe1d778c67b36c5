//! Vectorized Lindblad dynamics of a system coupled to a discretized probe
//! through `g A (x) P`, with noise acting on the system only.
//!
//! In the probe momentum basis `A (x) P` is block diagonal, so the
//! superoperator splits into independent `d^2 x d^2` blocks, one per pair
//! of momenta `(p_k, p_k')`. Exponentials, commutators and spectral norms
//! are evaluated block by block; the dense position-basis superoperator is
//! available through [`Liouvillian::to_dense`] for small grids.
//!
//! Vectorization is column-major: `vec(X rho Y) = (Y^T (x) X) vec(rho)`.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::Float;

use crate::channels::{apply_channel, KrausChannel};
use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, I, ZERO};
use crate::state::{DensityMatrix, HermitianOperator, PureState};

/// Periodic position grid `x_j = -L + j dx`, `dx = 2L / N`, with the
/// momentum operator built from the discrete Fourier transform.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretizedProbe {
    points: usize,
    half_width: f64,
    positions: Vec<f64>,
    momenta: Vec<f64>,
}

impl DiscretizedProbe {
    pub fn new(points: usize, half_width: f64) -> Result<Self> {
        if points < 2 || !points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("probe points must be a power of two, got {points}")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!("half width must be positive, got {half_width}")));
        }
        let dx = 2.0 * half_width / points as f64;
        let positions = (0..points).map(|j| -half_width + j as f64 * dx).collect();
        let momenta = (0..points)
            .map(|k| {
                let m = if k < points / 2 { k as f64 } else { k as f64 - points as f64 };
                2.0 * core::f64::consts::PI * m / (points as f64 * dx)
            })
            .collect();
        Ok(Self { points, half_width, positions, momenta })
    }

    /// Defaults: 32 points, half width of ten probe spreads.
    pub fn for_spread(spread: f64) -> Result<Self> {
        Self::new(32, 10.0 * spread)
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// Momentum eigenvalues in DFT order.
    pub fn momenta(&self) -> &[f64] {
        &self.momenta
    }

    /// Unitary DFT, `F_kj = exp(-2 pi i m_k j / N) / sqrt(N)`.
    pub fn fourier(&self) -> ComplexMatrix {
        let n = self.points;
        let norm = 1.0 / Float::sqrt(n as f64);
        ComplexMatrix::from_fn(n, |k, j| {
            let m = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
            let phase = -2.0 * core::f64::consts::PI * m * j as f64 / n as f64;
            Complex64::new(Float::cos(phase), Float::sin(phase)) * norm
        })
    }

    /// `P = F^dag diag(p) F` in the position basis.
    pub fn momentum_operator(&self) -> ComplexMatrix {
        let f = self.fourier();
        let d = ComplexMatrix::real_diag(&self.momenta);
        f.adjoint().matmul(&d).matmul(&f)
    }

    pub fn position_operator(&self) -> ComplexMatrix {
        ComplexMatrix::real_diag(&self.positions)
    }

    /// Sampled Gaussian of position spread `spread`, normalized on the grid.
    pub fn gaussian(&self, spread: f64) -> PureState {
        let amp: Vec<Complex64> = self
            .positions
            .iter()
            .map(|x| Complex64::new(Float::exp(-x * x / (4.0 * spread * spread)), 0.0))
            .collect();
        PureState::normalized(amp).expect("gaussian is nonzero")
    }
}

/// A jump operator on the system with its rate relative to the largest.
#[derive(Clone, Debug, PartialEq)]
pub struct LindbladTerm {
    pub op: ComplexMatrix,
    pub relative_rate: f64,
}

impl LindbladTerm {
    pub fn new(op: ComplexMatrix, relative_rate: f64) -> Self {
        Self { op, relative_rate }
    }
}

/// `sigma_- = |0><1|`, the amplitude-damping jump operator.
pub fn lowering() -> ComplexMatrix {
    ComplexMatrix::real2([[0.0, 1.0], [0.0, 0.0]])
}

/// Dissipator superoperator `sum_k lambda_k (L* (x) L - 1/2 I (x) L^dag L
/// - 1/2 (L^dag L)^T (x) I)` on a `d`-dimensional space.
pub fn dissipator_superoperator(terms: &[LindbladTerm], d: usize) -> ComplexMatrix {
    let id = ComplexMatrix::identity(d);
    let mut out = ComplexMatrix::zeros(d * d);
    for t in terms {
        let l = &t.op;
        let ldl = l.adjoint().matmul(l);
        let mut part = l.conj().kron(l);
        part.axpy(Complex64::new(-0.5, 0.0), &id.kron(&ldl));
        part.axpy(Complex64::new(-0.5, 0.0), &ldl.transpose().kron(&id));
        out.axpy(Complex64::new(t.relative_rate, 0.0), &part);
    }
    out
}

/// `-i (I (x) H - H^T (x) I)`
pub fn hamiltonian_superoperator(h: &ComplexMatrix) -> ComplexMatrix {
    let id = ComplexMatrix::identity(h.dim());
    (&id.kron(h) - &h.transpose().kron(&id)).scale(-I)
}

/// `L = g_tilde L_H + gamma_tilde L_L` for `H = A (x) P`.
#[derive(Clone, Debug, PartialEq)]
pub struct Liouvillian {
    system: ComplexMatrix,
    probe: DiscretizedProbe,
    terms: Vec<LindbladTerm>,
    dissipator: ComplexMatrix,
    g_tilde: f64,
    gamma_tilde: f64,
}

pub fn build_liouvillian(
    a: &HermitianOperator,
    probe: &DiscretizedProbe,
    lindblad_ops: &[LindbladTerm],
    g_tilde: f64,
    gamma_tilde: f64,
) -> Result<Liouvillian> {
    let d = a.dim();
    if !g_tilde.is_finite() || !gamma_tilde.is_finite() {
        return Err(Error::NonFinite);
    }
    if gamma_tilde < 0.0 {
        return Err(Error::InvalidArgument(format!("noise strength must be nonnegative, got {gamma_tilde}")));
    }
    let mut max_rate: f64 = 0.0;
    for t in lindblad_ops {
        if t.op.dim() != d {
            return Err(Error::DimMismatch { expected: d, found: t.op.dim() });
        }
        if !(t.relative_rate > 0.0 && t.relative_rate <= 1.0) {
            return Err(Error::RateOutOfRange { rate: t.relative_rate });
        }
        max_rate = max_rate.max(t.relative_rate);
    }
    if !lindblad_ops.is_empty() && max_rate != 1.0 {
        return Err(Error::RateOutOfRange { rate: max_rate });
    }
    Ok(Liouvillian {
        system: a.matrix().clone(),
        probe: probe.clone(),
        terms: lindblad_ops.to_vec(),
        dissipator: dissipator_superoperator(lindblad_ops, d),
        g_tilde,
        gamma_tilde,
    })
}

impl Liouvillian {
    pub fn system_dim(&self) -> usize {
        self.system.dim()
    }

    pub fn probe(&self) -> &DiscretizedProbe {
        &self.probe
    }

    /// Dimension of the full superoperator, `(d N)^2`.
    pub fn dim(&self) -> usize {
        let n = self.system_dim() * self.probe.points;
        n * n
    }

    pub fn g_tilde(&self) -> f64 {
        self.g_tilde
    }

    pub fn gamma_tilde(&self) -> f64 {
        self.gamma_tilde
    }

    pub fn terms(&self) -> &[LindbladTerm] {
        &self.terms
    }

    pub fn with_strengths(&self, g_tilde: f64, gamma_tilde: f64) -> Self {
        Self { g_tilde, gamma_tilde, ..self.clone() }
    }

    /// Multiplies the dissipator part by `factor` (rates are not rechecked).
    pub fn with_scaled_dissipator(&self, factor: f64) -> Self {
        Self {
            dissipator: self.dissipator.scale_real(factor),
            ..self.clone()
        }
    }

    /// Hamiltonian block for momenta `(p_k, p_k')`.
    pub fn hamiltonian_block(&self, k: usize, kp: usize) -> ComplexMatrix {
        let d = self.system_dim();
        let id = ComplexMatrix::identity(d);
        let (p, pp) = (self.probe.momenta[k], self.probe.momenta[kp]);
        let left = id.kron(&self.system).scale_real(p);
        let right = self.system.transpose().kron(&id).scale_real(pp);
        (&left - &right).scale(-I)
    }

    /// Dissipator block, identical for every momentum pair.
    pub fn dissipator_block(&self) -> &ComplexMatrix {
        &self.dissipator
    }

    pub fn block(&self, k: usize, kp: usize) -> ComplexMatrix {
        let mut b = self.hamiltonian_block(k, kp).scale_real(self.g_tilde);
        b.axpy(Complex64::new(self.gamma_tilde, 0.0), &self.dissipator);
        b
    }

    fn blocks(&self) -> impl Iterator<Item = (usize, usize)> {
        let n = self.probe.points;
        (0..n).flat_map(move |k| (0..n).map(move |kp| (k, kp)))
    }

    fn max_over_blocks(&self, f: impl Fn(usize, usize) -> f64) -> f64 {
        self.blocks().map(|(k, kp)| f(k, kp)).fold(0.0, f64::max)
    }

    /// `||L_H||` (spectral)
    pub fn hamiltonian_norm(&self) -> f64 {
        self.max_over_blocks(|k, kp| self.hamiltonian_block(k, kp).spectral_norm())
    }

    /// `||L_L||` (spectral)
    pub fn dissipator_norm(&self) -> f64 {
        self.dissipator.spectral_norm()
    }

    /// `||[L_L, L_H]||` (spectral)
    pub fn commutator_norm(&self) -> f64 {
        self.max_over_blocks(|k, kp| self.dissipator.commutator(&self.hamiltonian_block(k, kp)).spectral_norm())
    }

    /// Dense position-basis parts `(L_H, L_L)`. Sized `(dN)^2` squared, so
    /// only practical for small grids.
    pub fn to_dense(&self) -> (ComplexMatrix, ComplexMatrix) {
        let n = self.probe.points;
        let h = self.system.kron(&self.probe.momentum_operator());
        let lh = hamiltonian_superoperator(&h);
        let lifted: Vec<LindbladTerm> = self
            .terms
            .iter()
            .map(|t| LindbladTerm::new(t.op.kron(&ComplexMatrix::identity(n)), t.relative_rate))
            .collect();
        let mut ll = dissipator_superoperator(&lifted, self.system_dim() * n);
        if let Some(scale) = self.dissipator_scale() {
            ll = ll.scale_real(scale);
        }
        (lh, ll)
    }

    /// Factor applied by [`Self::with_scaled_dissipator`], if any.
    fn dissipator_scale(&self) -> Option<f64> {
        let plain = dissipator_superoperator(&self.terms, self.system_dim());
        let (mut num, mut den) = (0.0, 0.0);
        for (a, b) in self.dissipator.as_slice().iter().zip(plain.as_slice()) {
            num += (a.conj() * b).re;
            den += b.norm_sqr();
        }
        if den == 0.0 {
            return None;
        }
        let s = num / den;
        if Float::abs(s - 1.0) < 1e-14 {
            None
        } else {
            Some(s)
        }
    }

    /// Joint density matrix (position basis, index `s N + j`) to momentum
    /// blocks `sigma_{k k'}` (each `d x d`).
    fn to_blocks(&self, rho: &ComplexMatrix) -> Vec<ComplexMatrix> {
        let (d, n) = (self.system_dim(), self.probe.points);
        let f = ComplexMatrix::identity(d).kron(&self.probe.fourier());
        let m = f.matmul(rho).matmul(&f.adjoint());
        let mut out = Vec::with_capacity(n * n);
        for (k, kp) in self.blocks() {
            out.push(ComplexMatrix::from_fn(d, |s, sp| m[(s * n + k, sp * n + kp)]));
        }
        out
    }

    fn assemble_blocks(&self, blocks: &[ComplexMatrix]) -> ComplexMatrix {
        let (d, n) = (self.system_dim(), self.probe.points);
        let mut m = ComplexMatrix::zeros(d * n);
        for ((k, kp), b) in self.blocks().zip(blocks) {
            for s in 0..d {
                for sp in 0..d {
                    m[(s * n + k, sp * n + kp)] = b[(s, sp)];
                }
            }
        }
        let f = ComplexMatrix::identity(d).kron(&self.probe.fourier());
        f.adjoint().matmul(&m).matmul(&f)
    }
}

/// Column-major `vec(rho)`.
pub fn vectorize(rho: &ComplexMatrix) -> Vec<Complex64> {
    let n = rho.dim();
    let mut v = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            v.push(rho[(i, j)]);
        }
    }
    v
}

pub fn unvectorize(v: &[Complex64]) -> Result<ComplexMatrix> {
    let n = Float::round(Float::sqrt(v.len() as f64)) as usize;
    if n * n != v.len() || n == 0 {
        return Err(Error::Shape(format!("vector of length {} is not a vectorized square matrix", v.len())));
    }
    Ok(ComplexMatrix::from_fn(n, |i, j| v[j * n + i]))
}

/// `rho_s (x) rho_p` with the system index major.
pub fn joint_state(system: &DensityMatrix, probe: &ComplexMatrix) -> ComplexMatrix {
    system.matrix().kron(probe)
}

/// `exp(L t) vec(rho0)` evaluated block by block.
pub fn propagate(liouv: &Liouvillian, rho0: &[Complex64], t: f64) -> Result<Vec<Complex64>> {
    let rho = unvectorize(rho0)?;
    Ok(vectorize(&propagate_matrix(liouv, &rho, t)?))
}

/// [`propagate`] on the unvectorized joint density matrix.
pub fn propagate_matrix(liouv: &Liouvillian, rho0: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    let expected = liouv.system_dim() * liouv.probe.points;
    if rho0.dim() != expected {
        return Err(Error::DimMismatch { expected, found: rho0.dim() });
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("propagation time must be nonnegative, got {t}")));
    }
    let blocks = liouv.to_blocks(rho0);
    let evolved: Vec<ComplexMatrix> = liouv
        .blocks()
        .zip(&blocks)
        .map(|((k, kp), b)| {
            let e = liouv.block(k, kp).scale_real(t).exp();
            unvectorize(&e.apply(&vectorize(b))).expect("square block")
        })
        .collect();
    Ok(liouv.assemble_blocks(&evolved))
}

/// Dense-superoperator propagation; the reference for small grids.
pub fn propagate_dense(liouv: &Liouvillian, rho0: &[Complex64], t: f64) -> Result<Vec<Complex64>> {
    let (lh, ll) = liouv.to_dense();
    if rho0.len() != lh.dim() {
        return Err(Error::DimMismatch { expected: lh.dim(), found: rho0.len() });
    }
    let mut l = lh.scale_real(liouv.g_tilde * t);
    l.axpy(Complex64::new(liouv.gamma_tilde * t, 0.0), &ll);
    Ok(l.exp().apply(rho0))
}

/// Spectral-norm gap between the joint evolution and noise followed by the
/// noiseless interaction, and its leading-order estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FactorizationError {
    pub error_norm: f64,
    /// `1/2 g_tilde t gamma_tilde t ||[L_L, L_H]||`
    pub predicted: f64,
}

pub fn factorization_error(liouv: &Liouvillian, t: f64) -> FactorizationError {
    let (g, gam) = (liouv.g_tilde * t, liouv.gamma_tilde * t);
    let noise = liouv.dissipator.scale_real(gam).exp();
    let mut error_norm: f64 = 0.0;
    let mut comm: f64 = 0.0;
    for (k, kp) in liouv.blocks() {
        let lh = liouv.hamiltonian_block(k, kp);
        let mut full = lh.scale_real(g);
        full.axpy(Complex64::new(gam, 0.0), &liouv.dissipator);
        let split = lh.scale_real(g).exp().matmul(&noise);
        error_norm = error_norm.max((&full.exp() - &split).spectral_norm());
        comm = comm.max(liouv.dissipator.commutator(&lh).spectral_norm());
    }
    FactorizationError {
        error_norm,
        predicted: 0.5 * g * gam * comm,
    }
}

/// `(2 ||L_L|| / ||C||, 2 ||L_H|| / ||C||)` with `C = [L_L, L_H]`; both
/// infinite when the parts commute.
pub fn validity_margins(liouv: &Liouvillian) -> (f64, f64) {
    let c = liouv.commutator_norm();
    let lh = liouv.hamiltonian_norm();
    let ll = liouv.dissipator_norm();
    if c <= 1e-14 * (lh * ll).max(f64::MIN_POSITIVE) {
        return (f64::INFINITY, f64::INFINITY);
    }
    (2.0 * ll / c, 2.0 * lh / c)
}

/// Postselected probe position mean computed two ways.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReadoutComparison {
    /// Joint Lindblad propagation.
    pub full_mean: f64,
    /// Kraus noise on the system, then the noiseless interaction.
    pub factorized_mean: f64,
}

impl ReadoutComparison {
    pub fn difference(&self) -> f64 {
        self.full_mean - self.factorized_mean
    }
}

/// Amplitude-damping strength generated by `sigma_-` at rate
/// `gamma_tilde` over time `t`.
pub fn damping_equivalent(gamma_tilde: f64, t: f64) -> f64 {
    1.0 - Float::exp(-gamma_tilde * t)
}

fn postselected_mean(liouv: &Liouvillian, rho: &ComplexMatrix, post: &PureState) -> Result<f64> {
    let (d, n) = (liouv.system_dim(), liouv.probe.points);
    let f = post.amplitudes();
    let mut weight = 0.0;
    let mut first = 0.0;
    for j in 0..n {
        let mut p = ZERO;
        for s in 0..d {
            for sp in 0..d {
                p += f[s].conj() * rho[(s * n + j, sp * n + j)] * f[sp];
            }
        }
        weight += p.re;
        first += p.re * liouv.probe.positions[j];
    }
    if weight <= 1e-14 {
        return Err(Error::ZeroPostselectProbability);
    }
    Ok(first / weight)
}

/// Runs the weak-value readout of `pre`/`post` with probe spread `spread`
/// through the joint dynamics and through the factorized model, where
/// `noise` is the Kraus form of `exp(t gamma_tilde L_L)` on the system.
pub fn readout_comparison(
    liouv: &Liouvillian,
    pre: &DensityMatrix,
    post: &PureState,
    spread: f64,
    noise: &KrausChannel,
    t: f64,
) -> Result<ReadoutComparison> {
    let probe_state = liouv.probe.gaussian(spread).projector();
    let rho0 = joint_state(pre, probe_state.matrix());
    let full = propagate_matrix(liouv, &rho0, t)?;
    let ideal = liouv.with_strengths(liouv.g_tilde, 0.0);
    let noisy_pre = apply_channel(noise, pre)?;
    let split = propagate_matrix(&ideal, &joint_state(&noisy_pre, probe_state.matrix()), t)?;
    Ok(ReadoutComparison {
        full_mean: postselected_mean(liouv, &full, post)?,
        factorized_mean: postselected_mean(liouv, &split, post)?,
    })
}

/// Trace of a vectorized joint state.
pub fn vec_trace(v: &[Complex64]) -> Result<Complex64> {
    Ok(unvectorize(v)?.trace())
}

/// Left action `vec(I)^dag L`, zero for trace-preserving generators.
pub fn trace_functional_residual(l: &ComplexMatrix) -> f64 {
    let n = Float::round(Float::sqrt(l.dim() as f64)) as usize;
    let id = vectorize(&ComplexMatrix::identity(n));
    let adj = l.adjoint().apply(&id);
    linalg::norm(&adj)
}

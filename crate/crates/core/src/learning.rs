//! Operator reconstruction from weak values and from strong measurements,
//! plus bias-order certification over sweeps of the noise strength.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::Float;

use crate::channels::{apply_channel, build_channel, is_in_class, ChannelClass, ChannelSpec, KrausChannel};
use crate::error::{Error, Result};
use crate::linalg::{real_least_squares, ComplexMatrix, I};
use crate::protocols::strong_postselect;
use crate::state::{DensityMatrix, HermitianOperator, PureState};
use crate::weakvalue::{noisy_weak_value, OVERLAP_THRESHOLD};

/// Errors at or below this value count as exact.
pub const ERROR_FLOOR: f64 = 1e-12;
pub const QUADRATIC_SLOPE: f64 = 1.9;
pub const LINEAR_SLOPE: f64 = 1.2;
const CLASS_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CatalogClass {
    Pauli,
    Unital,
    AdPd,
}

/// Free parameters of the catalog families.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CatalogParams {
    /// `r` for `[[1/2, r], [r, 1/2]]` with `|+>`; `lambda2`, `lambda3` for
    /// `diag(lambda, 1 - lambda)` with `|0>` and `|1>`.
    Pauli { r: f64, lambda2: f64, lambda3: f64 },
    Unital,
    /// `rho11` of the diagonal preselection.
    AdPd { rho11: f64 },
}

impl CatalogParams {
    pub fn default_for(class: CatalogClass) -> Self {
        match class {
            CatalogClass::Pauli => Self::Pauli { r: 0.25, lambda2: 1.0, lambda3: 0.0 },
            CatalogClass::Unital => Self::Unital,
            CatalogClass::AdPd => Self::AdPd { rho11: 0.7 },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CatalogEntry {
    pub label: &'static str,
    pub pre: DensityMatrix,
    pub post: PureState,
    pub params: Vec<(&'static str, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StatePairCatalog {
    pub class: CatalogClass,
    pub entries: Vec<CatalogEntry>,
}

impl StatePairCatalog {
    pub fn get(&self, label: &str) -> Option<&CatalogEntry> {
        self.entries.iter().find(|e| e.label == label)
    }
}

/// `[[1/2, r], [r, 1/2]]`
pub fn rho_s1(r: f64) -> Result<DensityMatrix> {
    if r == -0.5 {
        return Err(Error::ExcludedParameter { name: "r", value: r });
    }
    DensityMatrix::new(ComplexMatrix::real2([[0.5, r], [r, 0.5]]))
}

fn entry(label: &'static str, pre: DensityMatrix, post: PureState, params: Vec<(&'static str, f64)>) -> CatalogEntry {
    CatalogEntry { label, pre, post, params }
}

fn diagonal_with_exclusion(name: &'static str, lambda: f64, excluded: f64) -> Result<DensityMatrix> {
    if lambda == excluded {
        return Err(Error::ExcludedParameter { name, value: lambda });
    }
    DensityMatrix::qubit_diagonal(lambda)
}

fn isqrt2(a: Complex64, b: Complex64) -> PureState {
    PureState::qubit(a, b).expect("nonzero amplitudes")
}

/// State pairs whose weak value carries no first-order bias for the given
/// channel class.
pub fn catalog_safe_pairs(class: CatalogClass, params: CatalogParams) -> Result<StatePairCatalog> {
    let one = Complex64::new(1.0, 0.0);
    let mixed = DensityMatrix::maximally_mixed(2);
    let entries = match (class, params) {
        (CatalogClass::Pauli, CatalogParams::Pauli { r, lambda2, lambda3 }) => vec![
            entry("rho_s1_plus", rho_s1(r)?, PureState::plus(), vec![("r", r)]),
            entry("rho_s2_zero", diagonal_with_exclusion("lambda", lambda2, 0.0)?, PureState::zero(), vec![("lambda", lambda2)]),
            entry("rho_s3_one", diagonal_with_exclusion("lambda", lambda3, 1.0)?, PureState::one(), vec![("lambda", lambda3)]),
            entry("mixed_minus", mixed.clone(), isqrt2(one, -one), vec![]),
            entry("mixed_plus_i", mixed, isqrt2(one, I), vec![]),
        ],
        (CatalogClass::Unital, CatalogParams::Unital) => vec![
            entry("mixed_zero", mixed.clone(), PureState::zero(), vec![]),
            entry("mixed_one", mixed.clone(), PureState::one(), vec![]),
            entry("mixed_plus", mixed.clone(), PureState::plus(), vec![]),
            entry("mixed_plus_i", mixed, PureState::plus_i(), vec![]),
        ],
        (CatalogClass::AdPd, CatalogParams::AdPd { rho11 }) => {
            let diag = diagonal_with_exclusion("rho11", rho11, 0.0)?;
            if rho11 == 1.0 {
                return Err(Error::ExcludedParameter { name: "rho11", value: rho11 });
            }
            let ground = PureState::zero().projector();
            vec![
                entry("diag_zero", diag.clone(), PureState::zero(), vec![("rho11", rho11)]),
                entry("diag_one", diag, PureState::one(), vec![("rho11", rho11)]),
                entry("ground_plus", ground.clone(), isqrt2(one, one), vec![]),
                entry("ground_plus_i", ground, isqrt2(one, I), vec![]),
            ]
        }
        _ => {
            return Err(Error::InvalidArgument(format!(
                "parameters {params:?} do not belong to catalog {class:?}"
            )))
        }
    };
    Ok(StatePairCatalog { class, entries })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Theorem {
    /// Pauli noise.
    T1Pauli,
    /// Unital noise.
    T2Unital,
    /// Amplitude and phase damping.
    T3AdPd,
}

impl Theorem {
    pub fn catalog_class(self) -> CatalogClass {
        match self {
            Self::T1Pauli => CatalogClass::Pauli,
            Self::T2Unital => CatalogClass::Unital,
            Self::T3AdPd => CatalogClass::AdPd,
        }
    }

    pub fn channel_class(self) -> ChannelClass {
        match self {
            Self::T1Pauli => ChannelClass::Pauli,
            Self::T2Unital => ChannelClass::Unital,
            Self::T3AdPd => ChannelClass::AmplitudePhaseDamping,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::T1Pauli => "T1",
            Self::T2Unital => "T2",
            Self::T3AdPd => "T3",
        }
    }

    fn name(self) -> &'static str {
        match self {
            Self::T1Pauli => "the Pauli recipe",
            Self::T2Unital => "the unital recipe",
            Self::T3AdPd => "the damping recipe",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Protocol {
    Wvmp,
    Strong,
    StrongPostselect,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Wvmp => "wvmp",
            Self::Strong => "strong",
            Self::StrongPostselect => "strong_postselect",
        }
    }
}

/// Which parts of the weak values the reconstruction consumes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ReadoutMode {
    #[default]
    Complex,
    /// Only `Re(A_w)`, as a position readout of the probe provides.
    RealPart,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructionResult {
    pub a_hat: HermitianOperator,
    /// `|a_hat_ij - a_ij|`
    pub per_element_error: [[f64; 2]; 2],
    /// Whether the data determine each element.
    pub identified: [[bool; 2]; 2],
    pub gamma: f64,
    pub protocol: Protocol,
}

impl ReconstructionResult {
    fn new(a_hat: ComplexMatrix, a_true: &HermitianOperator, identified: [[bool; 2]; 2], gamma: f64, protocol: Protocol) -> Result<Self> {
        let a_hat = HermitianOperator::new(a_hat.hermitian_part())?;
        let per_element_error = core::array::from_fn(|i| core::array::from_fn(|j| (a_hat.entry(i, j) - a_true.entry(i, j)).norm()));
        Ok(Self { a_hat, per_element_error, identified, gamma, protocol })
    }

    /// Largest error over identified elements.
    pub fn max_error(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                if self.identified[i][j] {
                    m = m.max(self.per_element_error[i][j]);
                }
            }
        }
        m
    }

    pub fn fully_identified(&self) -> bool {
        self.identified.iter().flatten().all(|&b| b)
    }
}

fn require_qubit(a: &HermitianOperator) -> Result<()> {
    if a.dim() != 2 {
        return Err(Error::DimMismatch { expected: 2, found: a.dim() });
    }
    Ok(())
}

fn qubit_from_parts(a11: Complex64, a22: Complex64, a12: Complex64, a21: Complex64) -> ComplexMatrix {
    ComplexMatrix::from_fn(2, |i, j| match (i, j) {
        (0, 0) => a11,
        (1, 1) => a22,
        (0, 1) => a12,
        _ => a21,
    })
}

/// Reconstruction from the default catalog of the theorem.
pub fn reconstruct_via_wvmp(theorem: Theorem, a_true: &HermitianOperator, c: &KrausChannel) -> Result<ReconstructionResult> {
    let catalog = catalog_safe_pairs(theorem.catalog_class(), CatalogParams::default_for(theorem.catalog_class()))?;
    reconstruct_via_wvmp_with(theorem, a_true, c, &catalog, ReadoutMode::Complex)
}

pub fn reconstruct_via_wvmp_with(
    theorem: Theorem,
    a_true: &HermitianOperator,
    c: &KrausChannel,
    catalog: &StatePairCatalog,
    mode: ReadoutMode,
) -> Result<ReconstructionResult> {
    require_qubit(a_true)?;
    if catalog.class != theorem.catalog_class() {
        return Err(Error::InvalidArgument(format!("catalog {:?} does not match {theorem:?}", catalog.class)));
    }
    if !is_in_class(c, theorem.channel_class(), CLASS_TOL) {
        return Err(Error::ChannelClassMismatch(theorem.name()));
    }
    let wv = |label: &str| -> Result<Complex64> {
        let e = catalog
            .get(label)
            .ok_or_else(|| Error::InvalidArgument(format!("catalog lacks entry {label}")))?;
        let v = noisy_weak_value(a_true, &e.pre, &e.post.projector(), c)?.value;
        Ok(match mode {
            ReadoutMode::Complex => v,
            ReadoutMode::RealPart => Complex64::new(v.re, 0.0),
        })
    };
    let a_hat = match theorem {
        Theorem::T1Pauli => {
            let a11 = wv("rho_s2_zero")?;
            let a22 = wv("rho_s3_one")?;
            let plus = wv("rho_s1_plus")?;
            let s = plus - wv("mixed_minus")?;
            let d = antisymmetric_part(s, plus, wv("mixed_plus_i")?);
            off_diagonal(a11, a22, s, d, mode)
        }
        Theorem::T2Unital => {
            let a11 = wv("mixed_zero")?;
            let a22 = wv("mixed_one")?;
            let diag = a11 + a22;
            let s = wv("mixed_plus")? * 2.0 - diag;
            let d = wv("mixed_plus_i")? * 2.0 - diag;
            off_diagonal(a11, a22, s, d, mode)
        }
        Theorem::T3AdPd => {
            let a11 = wv("diag_zero")?;
            let a22 = wv("diag_one")?;
            let w_plus = wv("ground_plus")?;
            let w_i = wv("ground_plus_i")?;
            match mode {
                ReadoutMode::Complex => {
                    let a21 = w_plus - a11;
                    qubit_from_parts(a11, a22, a21.conj(), a21)
                }
                ReadoutMode::RealPart => {
                    let re = w_plus.re - a11.re;
                    let im = a11.re - w_i.re;
                    let a12 = Complex64::new(re, im);
                    qubit_from_parts(a11, a22, a12, a12.conj())
                }
            }
        }
    };
    ReconstructionResult::new(a_hat, a_true, [[true; 2]; 2], c.gamma(), Protocol::Wvmp)
}

/// `i (a12 - a21)` from the `|+>` and `|+i>` weak values and `a12 + a21`.
fn antisymmetric_part(s: Complex64, plus: Complex64, plus_i: Complex64) -> Complex64 {
    s - (plus - plus_i) * 2.0
}

/// Assembles `A` from `s = a12 + a21` and `d = i (a12 - a21)`.
fn off_diagonal(a11: Complex64, a22: Complex64, s: Complex64, d: Complex64, mode: ReadoutMode) -> ComplexMatrix {
    match mode {
        ReadoutMode::Complex => qubit_from_parts(a11, a22, (s - I * d) * 0.5, (s + I * d) * 0.5),
        ReadoutMode::RealPart => {
            let a12 = Complex64::new(0.5 * s.re, -0.5 * d.re);
            qubit_from_parts(a11, a22, a12, a12.conj())
        }
    }
}

/// Parameters `(a11, a22, Re a12, Im a12)` to matrix.
fn from_theta(t: [f64; 4]) -> ComplexMatrix {
    let a12 = Complex64::new(t[2], t[3]);
    qubit_from_parts(Complex64::new(t[0], 0.0), Complex64::new(t[1], 0.0), a12, a12.conj())
}

fn mask_from_theta(ok: [bool; 4]) -> [[bool; 2]; 2] {
    let off = ok[2] && ok[3];
    [[ok[0], off], [off, ok[1]]]
}

/// Row of `Tr(A rho)` in the parameters `(a11, a22, Re a12, Im a12)`.
fn expectation_row(rho: &ComplexMatrix) -> [f64; 4] {
    let r21 = rho[(1, 0)];
    [rho[(0, 0)].re, rho[(1, 1)].re, 2.0 * r21.re, -2.0 * r21.im]
}

/// Least-squares fit of `A` to noisy expectations `Tr(A E(rho_k))`, with the
/// design built from the ideal `rho_k`. Unconstrained directions take the
/// minimum-norm value and are flagged as unidentified.
pub fn reconstruct_via_strong(a_true: &HermitianOperator, c: &KrausChannel, pre_states: &[DensityMatrix]) -> Result<ReconstructionResult> {
    require_qubit(a_true)?;
    if pre_states.is_empty() {
        return Err(Error::InvalidArgument("no preselected states".into()));
    }
    let mut rows = Vec::with_capacity(pre_states.len());
    let mut values = Vec::with_capacity(pre_states.len());
    for rho in pre_states {
        let noisy = apply_channel(c, rho)?;
        values.push(a_true.matrix().matmul(noisy.matrix()).trace().re);
        rows.push(expectation_row(rho.matrix()));
    }
    let (theta, ok) = real_least_squares(&rows, &values);
    ReconstructionResult::new(from_theta(theta), a_true, mask_from_theta(ok), c.gamma(), Protocol::Strong)
}

fn is_maximally_mixed(rho: &DensityMatrix) -> bool {
    (rho.matrix() - DensityMatrix::maximally_mixed(rho.dim()).matrix()).max_abs() <= 1e-12
}

/// Fit of `A` to conditional means of projective measurement followed by
/// postselection. With the maximally mixed preselection the conditional
/// mean is `<f|A|f>`, linear in `A`. For other preselections the estimator
/// assumes `A` diagonal, so the weights are `rho_ii |f_i|^2` and the
/// off-diagonal elements stay unidentified.
pub fn reconstruct_via_strong_postselect(
    a_true: &HermitianOperator,
    c: &KrausChannel,
    pairs: &[(DensityMatrix, PureState)],
) -> Result<ReconstructionResult> {
    require_qubit(a_true)?;
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no state pairs".into()));
    }
    let mut rows = Vec::with_capacity(pairs.len());
    let mut values = Vec::with_capacity(pairs.len());
    for (rho, f) in pairs {
        let noisy = apply_channel(c, rho)?;
        values.push(strong_postselect(a_true, &noisy, f)?.value);
        let amp = f.amplitudes();
        if is_maximally_mixed(rho) {
            let uv = amp[0].conj() * amp[1];
            rows.push([amp[0].norm_sqr(), amp[1].norm_sqr(), 2.0 * uv.re, -2.0 * uv.im]);
        } else {
            let w1 = rho.entry(0, 0).re * amp[0].norm_sqr();
            let w2 = rho.entry(1, 1).re * amp[1].norm_sqr();
            let total = w1 + w2;
            if total <= OVERLAP_THRESHOLD {
                return Err(Error::ZeroPostselectProbability);
            }
            rows.push([w1 / total, w2 / total, 0.0, 0.0]);
        }
    }
    let (theta, ok) = real_least_squares(&rows, &values);
    ReconstructionResult::new(from_theta(theta), a_true, mask_from_theta(ok), c.gamma(), Protocol::StrongPostselect)
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && lo > 0.0 && hi > lo);
    let (a, b) = (Float::ln(lo), Float::ln(hi));
    (0..n)
        .map(|k| {
            if k == n - 1 {
                hi
            } else {
                Float::exp(a + (b - a) * k as f64 / (n - 1) as f64)
            }
        })
        .collect()
}

/// The default sweep: 8 points from 1e-3 to 1e-1.
pub fn default_gammas() -> Vec<f64> {
    log_spaced(1e-3, 1e-1, 8)
}

pub fn validate_gamma_grid(gammas: &[f64]) -> Result<()> {
    if gammas.len() < 4 {
        return Err(Error::InvalidGammaGrid(format!("need at least 4 points, got {}", gammas.len())));
    }
    if gammas.iter().any(|&g| !(g > 0.0 && g <= 0.1)) {
        return Err(Error::InvalidGammaGrid("all points must lie in (0, 0.1]".into()));
    }
    if gammas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGammaGrid("points must be strictly increasing".into()));
    }
    let decades = Float::log10(gammas[gammas.len() - 1] / gammas[0]);
    if decades < 1.5 {
        return Err(Error::InvalidGammaGrid(format!("span of {decades:.2} decades is below 1.5")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// Every error at the floor.
    Exact,
    Quadratic,
    Linear,
    Other,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Exact => "exact",
            Self::Quadratic => "quadratic",
            Self::Linear => "linear",
            Self::Other => "other",
        }
    }

    pub fn from_slope(slope: f64) -> Self {
        if slope == f64::INFINITY {
            Self::Exact
        } else if slope >= QUADRATIC_SLOPE {
            Self::Quadratic
        } else if slope <= LINEAR_SLOPE {
            Self::Linear
        } else {
            Self::Other
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlopeFit {
    /// `+inf` when every error is at the floor.
    pub slope: f64,
    pub r2: f64,
    /// Points above the floor that entered the fit.
    pub used: usize,
}

/// Least-squares slope of `log(error)` against `log(gamma)`, ignoring
/// errors at or below [`ERROR_FLOOR`].
pub fn fit_slope(gammas: &[f64], errors: &[f64]) -> Result<SlopeFit> {
    assert_eq!(gammas.len(), errors.len());
    let pts: Vec<(f64, f64)> = gammas
        .iter()
        .zip(errors)
        .filter(|(_, &e)| e > ERROR_FLOOR)
        .map(|(&g, &e)| (Float::ln(g), Float::ln(e)))
        .collect();
    if pts.is_empty() {
        return Ok(SlopeFit { slope: f64::INFINITY, r2: 1.0, used: 0 });
    }
    if pts.len() < 2 {
        return Err(Error::DegenerateFit);
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(SlopeFit { slope, r2, used: pts.len() })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiasReport {
    pub gammas: Vec<f64>,
    /// Max per-element deviation from the noiseless reconstruction.
    pub errors: Vec<f64>,
    pub element_errors: Vec<[[f64; 2]; 2]>,
    pub fitted_slope: f64,
    pub fit_r2: f64,
    pub verdict: Verdict,
}

impl BiasReport {
    /// Slope of a single element's error.
    pub fn element_fit(&self, i: usize, j: usize) -> Result<SlopeFit> {
        let e: Vec<f64> = self.element_errors.iter().map(|m| m[i][j]).collect();
        fit_slope(&self.gammas, &e)
    }
}

/// Runs `runner` on the channel family over `gammas` and fits the order of
/// the reconstruction bias. Errors are measured against the same
/// protocol's noiseless output, which equals the true element wherever the
/// element is identified.
pub fn bias_order_fit<F>(mut runner: F, a_true: &HermitianOperator, c_spec: &ChannelSpec, gammas: &[f64]) -> Result<BiasReport>
where
    F: FnMut(&HermitianOperator, &KrausChannel) -> Result<ReconstructionResult>,
{
    validate_gamma_grid(gammas)?;
    let reference = runner(a_true, &build_channel(c_spec, 0.0)?)?;
    let mut errors = Vec::with_capacity(gammas.len());
    let mut element_errors = Vec::with_capacity(gammas.len());
    for &g in gammas {
        let r = runner(a_true, &build_channel(c_spec, g)?)?;
        let m: [[f64; 2]; 2] =
            core::array::from_fn(|i| core::array::from_fn(|j| (r.a_hat.entry(i, j) - reference.a_hat.entry(i, j)).norm()));
        errors.push(m.iter().flatten().fold(0.0f64, |a, &b| a.max(b)));
        element_errors.push(m);
    }
    let fit = fit_slope(gammas, &errors)?;
    Ok(BiasReport {
        gammas: gammas.to_vec(),
        errors,
        element_errors,
        fitted_slope: fit.slope,
        fit_r2: fit.r2,
        verdict: Verdict::from_slope(fit.slope),
    })
}

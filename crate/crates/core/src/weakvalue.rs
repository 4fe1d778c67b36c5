//! Weak values, their noisy counterparts and the first-order bias.

use num_complex::Complex64;

use crate::channels::{self, analytic_generator, build_channel, ChannelSpec, KrausChannel};
use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix};
use crate::state::{DensityMatrix, HermitianOperator, PureState};

/// Smallest accepted overlap between pre- and postselection.
pub const OVERLAP_THRESHOLD: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct WeakValue {
    pub value: Complex64,
    pub preselect: DensityMatrix,
    pub postselect: DensityMatrix,
    /// `Tr(rho_f rho_s)`
    pub overlap: f64,
}

/// Coefficient of `gamma` in the expansion of the noisy weak value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BiasValue {
    pub delta: Complex64,
}

fn same_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimMismatch { expected, found });
    }
    Ok(())
}

/// `(Tr(rho_f A rho_s), Tr(rho_f rho_s))` for an arbitrary (possibly
/// non-physical) preselection matrix.
fn numerator_denominator(a: &ComplexMatrix, pre: &ComplexMatrix, post: &ComplexMatrix) -> (Complex64, f64) {
    let num = post.matmul(a).matmul(pre).trace();
    let den = post.matmul(pre).trace().re;
    (num, den)
}

/// `A_w = Tr(rho_f A rho_s) / Tr(rho_f rho_s)`
pub fn weak_value(a: &HermitianOperator, pre: &DensityMatrix, post: &DensityMatrix) -> Result<WeakValue> {
    same_dim(a.dim(), pre.dim())?;
    same_dim(a.dim(), post.dim())?;
    let (num, overlap) = numerator_denominator(a.matrix(), pre.matrix(), post.matrix());
    if overlap <= OVERLAP_THRESHOLD {
        return Err(Error::OrthogonalStates { overlap });
    }
    Ok(WeakValue {
        value: num / overlap,
        preselect: pre.clone(),
        postselect: post.clone(),
        overlap,
    })
}

/// Rank-one postselection: `<f|A rho_s|f> / <f|rho_s|f>`.
pub fn weak_value_pure_post(a: &HermitianOperator, pre: &DensityMatrix, post: &PureState) -> Result<Complex64> {
    same_dim(a.dim(), pre.dim())?;
    same_dim(a.dim(), post.dim())?;
    let f = post.amplitudes();
    let overlap = pre.overlap(post);
    if overlap <= OVERLAP_THRESHOLD {
        return Err(Error::OrthogonalStates { overlap });
    }
    Ok(linalg::inner(f, &a.matrix().matmul(pre.matrix()).apply(f)) / overlap)
}

/// Weak value with the preselected state passed through `c` first.
pub fn noisy_weak_value(
    a: &HermitianOperator,
    pre: &DensityMatrix,
    post: &DensityMatrix,
    c: &KrausChannel,
) -> Result<WeakValue> {
    let noisy = channels::apply_channel(c, pre)?;
    weak_value(a, &noisy, post).map_err(|e| match e {
        Error::OrthogonalStates { overlap } => Error::OrthogonalStatesAfterNoise { overlap },
        other => other,
    })
}

/// `[<f|A M|f> - A_w <f|M|f>] / <f|rho|f>` with `M` the channel generator
/// at `gamma = 0`. Linear in the generator, so compositions give the
/// weighted sum of their component biases.
pub fn bias_first_order_analytic(
    a: &HermitianOperator,
    pre: &DensityMatrix,
    post: &PureState,
    spec: &ChannelSpec,
) -> Result<BiasValue> {
    let aw = weak_value_pure_post(a, pre, post)?;
    let m = analytic_generator(spec, pre.matrix())?;
    let f = post.amplitudes();
    let overlap = pre.overlap(post);
    let am = linalg::inner(f, &a.matrix().matmul(&m).apply(f));
    let mm = linalg::sandwich(f, &m, f);
    Ok(BiasValue {
        delta: (am - aw * mm) / overlap,
    })
}

/// Finite-difference derivative of `gamma -> A_{w,E(gamma)}` at zero.
pub fn bias_first_order_numeric(
    a: &HermitianOperator,
    pre: &DensityMatrix,
    post: &DensityMatrix,
    spec: &ChannelSpec,
    h: f64,
) -> Result<BiasValue> {
    channels::check_step(h)?;
    spec.validate()?;
    weak_value(a, pre, post)?;
    let delta = channels::richardson_one_sided(h, |g| {
        let c = build_channel(spec, g)?;
        Ok(noisy_weak_value(a, pre, post, &c)?.value)
    })?;
    Ok(BiasValue { delta })
}

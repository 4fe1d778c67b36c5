//! End-to-end acceptance gate. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use num_complex::Complex64;

use wvmp_core::channels::{build_channel, channel_derivative_at_zero, ChannelSpec};
use wvmp_core::haar::{chebyshev_check, counterexample_hadamard, mc_delta_stats, HadamardFamily, DEFAULT_EPSILON};
use wvmp_core::learning::{
    bias_order_fit, default_gammas, reconstruct_via_strong, reconstruct_via_strong_postselect, reconstruct_via_wvmp, Theorem,
};
use wvmp_core::lindblad::{build_liouvillian, factorization_error, lowering, DiscretizedProbe, LindbladTerm, Liouvillian};
use wvmp_core::protocols::{probe_distribution, strong_postselect, strong_postselect_expectation, GaussianProbe, Postselection};
use wvmp_core::random::{
    haar_unitary_with, random_hermitian_with, random_pure_with, random_simplex, random_state_with, rng_from_seed, StateKind,
};
use wvmp_core::state::{pauli_x, pauli_z};
use wvmp_core::weakvalue::{weak_value, weak_value_pure_post};
use wvmp_core::{ComplexMatrix, DensityMatrix, HermitianOperator, PureState};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Closed-form qubit eigensystem: `(lambda, projector)` pairs.
fn qubit_projectors(a: &HermitianOperator) -> [(f64, ComplexMatrix); 2] {
    let (a11, a22, a12) = (a.entry(0, 0).re, a.entry(1, 1).re, a.entry(0, 1));
    let m = 0.5 * (a11 + a22);
    let r = (0.25 * (a11 - a22).powi(2) + a12.norm_sqr()).sqrt();
    let traceless = a.matrix() - &ComplexMatrix::identity(2).scale_real(m);
    let proj = |s: f64| {
        let mut p = ComplexMatrix::identity(2);
        p.axpy(c(s / r, 0.0), &traceless);
        p.scale_real(0.5)
    };
    [(m - r, proj(-1.0)), (m + r, proj(1.0))]
}

fn ic_pres() -> Vec<DensityMatrix> {
    [PureState::zero(), PureState::one(), PureState::plus(), PureState::plus_i()]
        .iter()
        .map(|p| p.projector())
        .collect()
}

fn criterion_1() -> Outcome {
    let mut rng = rng_from_seed(1);
    let s2 = DensityMatrix::qubit_diagonal(1.0).unwrap();
    let s3 = DensityMatrix::qubit_diagonal(0.0).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let a = random_hermitian_with(&mut rng, 2, 1.0);
        let w2 = weak_value(&a, &s2, &PureState::zero().projector()).unwrap().value;
        let w3 = weak_value(&a, &s3, &PureState::one().projector()).unwrap().value;
        worst = worst.max((w2 - a.entry(0, 0)).norm()).max((w3 - a.entry(1, 1)).norm());
    }
    outcome(worst <= 1e-12, format!("max |A_w - a_kk| = {worst:.2e} over 100 A"))
}

fn criterion_2() -> Outcome {
    let mut rng = rng_from_seed(2);
    let gammas = default_gammas();
    let weights: Vec<Vec<f64>> = (0..20).map(|_| random_simplex(&mut rng, 3)).collect();
    let ops: Vec<HermitianOperator> = (0..20).map(|_| random_hermitian_with(&mut rng, 2, 1.0)).collect();

    let mut min_weak = f64::INFINITY;
    let mut finite_weak = 0;
    let mut post_err: f64 = 0.0;
    let mixed_pairs: Vec<(DensityMatrix, PureState)> = [PureState::zero(), PureState::one(), PureState::plus(), PureState::plus_i()]
        .into_iter()
        .map(|f| (DensityMatrix::maximally_mixed(2), f))
        .collect();
    for w in &weights {
        let spec = ChannelSpec::pauli(w[0], w[1], w[2]);
        let ch = build_channel(&spec, 0.2).unwrap();
        for a in &ops {
            let r = bias_order_fit(|a, c| reconstruct_via_wvmp(Theorem::T1Pauli, a, c), a, &spec, &gammas).unwrap();
            min_weak = min_weak.min(r.fitted_slope);
            finite_weak += usize::from(r.fitted_slope.is_finite());
            let p = reconstruct_via_strong_postselect(a, &ch, &mixed_pairs).unwrap();
            post_err = post_err.max(if p.fully_identified() { p.max_error() } else { f64::INFINITY });
        }
    }

    // each non-trace element must pick up a linear bias under some single Pauli
    let singles = [ChannelSpec::pauli(1.0, 0.0, 0.0), ChannelSpec::pauli(0.0, 1.0, 0.0), ChannelSpec::pauli(0.0, 0.0, 1.0)];
    let mut strong_ok = true;
    let mut worst_best: f64 = 0.0;
    for a in &ops {
        let fits: Vec<_> = singles
            .iter()
            .map(|s| bias_order_fit(|a, c| reconstruct_via_strong(a, c, &ic_pres()), a, s, &gammas).unwrap())
            .collect();
        for (i, j) in [(0, 0), (1, 1), (0, 1)] {
            let best = fits.iter().map(|f| f.element_fit(i, j).unwrap().slope).fold(f64::INFINITY, f64::min);
            worst_best = worst_best.max(best);
            strong_ok &= best <= 1.2;
        }
    }
    let pass = min_weak >= 1.9 && strong_ok && post_err <= 1e-10;
    outcome(
        pass,
        format!(
            "WVMP min slope {min_weak} ({finite_weak}/400 finite); strong worst best-sigma element slope {worst_best:.3}; \
             postselected I/2 error {post_err:.2e} at gamma 0.2"
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = rng_from_seed(3);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let w = random_simplex(&mut rng, 5);
        let mix = (0..5).map(|k| (haar_unitary_with(&mut rng, 2), w[k])).collect();
        let spec = ChannelSpec::UnitaryMixture(mix);
        let a = random_hermitian_with(&mut rng, 2, 1.0);
        for g in [0.1, 0.5] {
            let r = reconstruct_via_wvmp(Theorem::T2Unital, &a, &build_channel(&spec, g).unwrap()).unwrap();
            worst = worst.max(if r.fully_identified() { r.max_error() } else { f64::INFINITY });
        }
    }
    outcome(worst <= 1e-10, format!("max element error {worst:.2e} over 20 mixtures of 5 Haar unitaries"))
}

fn criterion_4() -> Outcome {
    let mut rng = rng_from_seed(4);
    let gammas = default_gammas();
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, spec) in [("AD+PD", ChannelSpec::ad_pd()), ("AD", ChannelSpec::AmplitudeDamping)] {
        let mut min_weak = f64::INFINITY;
        let mut max_strong: f64 = 0.0;
        let mut drift: f64 = 0.0;
        let ch = build_channel(&spec, 0.2).unwrap();
        let pairs = [(PureState::zero().projector(), PureState::plus()), (PureState::zero().projector(), PureState::plus_i())];
        for _ in 0..20 {
            let a = random_hermitian_with(&mut rng, 2, 1.0);
            let weak = bias_order_fit(|a, c| reconstruct_via_wvmp(Theorem::T3AdPd, a, c), &a, &spec, &gammas).unwrap();
            let strong = bias_order_fit(|a, c| reconstruct_via_strong(a, c, &ic_pres()), &a, &spec, &gammas).unwrap();
            min_weak = min_weak.min(weak.fitted_slope);
            max_strong = max_strong.max(strong.fitted_slope);

            let a11 = a.entry(0, 0).re;
            let estimate = |a22: f64| {
                let diag = HermitianOperator::qubit(a11, a22, c(0.0, 0.0));
                reconstruct_via_strong_postselect(&diag, &ch, &pairs).unwrap().a_hat
            };
            let base = estimate(a.entry(1, 1).re);
            for k in 0..10 {
                let other = estimate(-2.0 + 0.45 * k as f64);
                drift = drift.max((other.matrix() - base.matrix()).max_abs());
            }
        }
        pass &= min_weak >= 1.9 && max_strong <= 1.2 && drift <= 1e-12;
        parts.push(format!("{name}: WVMP min slope {min_weak}, strong max slope {max_strong:.3}, a22 drift {drift:.1e}"));
    }
    outcome(pass, parts.join("; "))
}

fn random_state_away_from_ground(rng: &mut rand_chacha::ChaCha8Rng) -> DensityMatrix {
    let ground = PureState::zero().projector();
    loop {
        let rho = random_state_with(rng, 2, StateKind::Mixed);
        if (rho.matrix() - ground.matrix()).frobenius_norm() > 0.1 {
            return rho;
        }
    }
}

fn criterion_5() -> Outcome {
    let spec = ChannelSpec::AmplitudeDamping;
    let at_ground = channel_derivative_at_zero(&spec, &PureState::zero().projector(), 1e-4).unwrap().frobenius_norm();
    let mut rng = rng_from_seed(5);
    let mut smallest = f64::INFINITY;
    for _ in 0..100 {
        let rho = random_state_away_from_ground(&mut rng);
        smallest = smallest.min(channel_derivative_at_zero(&spec, &rho, 1e-4).unwrap().frobenius_norm());
    }
    outcome(
        at_ground <= 1e-10 && smallest >= 1e-3,
        format!("norm at |0><0| {at_ground:.1e}; min over 100 distant states {smallest:.3e}"),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = rng_from_seed(6);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let rho = random_state_with(&mut rng, 2, StateKind::Mixed);
        let (r12, r21, r22) = (rho.entry(0, 1), rho.entry(1, 0), rho.entry(1, 1));
        let closed = ComplexMatrix::from_rows(&[[r22, -r12 * 0.5], [-r21 * 0.5, -r22]]).unwrap();
        let m = channel_derivative_at_zero(&ChannelSpec::AmplitudeDamping, &rho, 1e-4).unwrap();
        worst = worst.max((&m - &closed).max_abs());
    }
    outcome(worst <= 1e-8, format!("max entry deviation {worst:.2e} over 100 states"))
}

fn criterion_7() -> Outcome {
    let mut rng = rng_from_seed(7);
    let (mut worst_mean, mut worst_var) = (0.0f64, 0.0f64);
    let mut weak_cases = 0;
    while weak_cases < 10 {
        let a = random_hermitian_with(&mut rng, 2, 1.0);
        let pre = random_state_with(&mut rng, 2, StateKind::Pure);
        let post = random_pure_with(&mut rng, 2);
        if pre.overlap(&post) < 0.2 {
            continue;
        }
        let aw = weak_value_pure_post(&a, &pre, &post).unwrap();
        if aw.re.abs() < 0.2 {
            continue;
        }
        weak_cases += 1;
        let probe = GaussianProbe::new(1.0, 0.01).unwrap();
        let hw = 8.0 * (1.0 + 0.01 * 4.0);
        let d = probe_distribution(&a, &pre, Postselection::Onto(&post), &probe, 2048, hw).unwrap();
        worst_mean = worst_mean.max((d.mean - 0.01 * aw.re).abs() / (0.01 * aw.re).abs());
        worst_var = worst_var.max((d.variance - 1.0).abs());
    }

    let mut worst_born: f64 = 0.0;
    let mut strong_cases = 0;
    while strong_cases < 10 {
        let a = random_hermitian_with(&mut rng, 2, 1.0);
        let [(l0, p0), (l1, p1)] = qubit_projectors(&a);
        if l1 - l0 < 0.2 || l0.abs().max(l1.abs()) > 2.0 {
            continue;
        }
        strong_cases += 1;
        let psi = random_pure_with(&mut rng, 2);
        let pre = psi.projector();
        let (spread, g) = (0.01, 1.0);
        let probe = GaussianProbe::new(spread, g).unwrap();
        let hw = 5.0 * (spread + 2.0 * g) + 0.1;
        let points = ((2.0 * hw) / (spread / 8.0)).ceil() as usize + 2;
        let d = probe_distribution(&a, &pre, Postselection::None, &probe, points, hw).unwrap();
        let half = 0.5 * (l1 - l0) * g;
        for (l, p) in [(l0, &p0), (l1, &p1)] {
            let born = wvmp_core::linalg::sandwich(psi.amplitudes(), p, psi.amplitudes()).re;
            let mass = d.mass_between(g * l - half, g * l + half);
            worst_born = worst_born.max((mass - born).abs());
        }
    }
    outcome(
        worst_mean <= 0.01 && worst_var <= 0.01 && worst_born <= 1e-6,
        format!(
            "g/D=0.01: max rel mean error {worst_mean:.2e}, max rel variance error {worst_var:.2e}; \
             g/D=100: max Born mass error {worst_born:.2e}"
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = rng_from_seed(8);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let a = random_hermitian_with(&mut rng, 2, 1.0);
        let pre = random_state_with(&mut rng, 2, StateKind::Mixed);
        let f = random_pure_with(&mut rng, 2);
        let fproj = f.projector();
        let (mut joint, mut weighted) = (0.0, 0.0);
        for (l, p) in qubit_projectors(&a) {
            let pk = p.matmul(pre.matrix()).matmul(&p).trace().re;
            if pk <= 0.0 {
                continue;
            }
            let collapsed = p.matmul(pre.matrix()).matmul(&p).scale_real(1.0 / pk);
            let success = fproj.matrix().matmul(&collapsed).trace().re;
            joint += pk * success;
            weighted += l * pk * success;
        }
        let oracle = weighted / joint;
        let r = strong_postselect(&a, &pre, &f).unwrap();
        let probe = GaussianProbe::new(0.01, 1.0).unwrap();
        let e = strong_postselect_expectation(&a, &pre, &f, &probe).unwrap();
        worst = worst.max((r.value - oracle).abs()).max((r.success_probability - joint).abs()).max((e - oracle).abs());
    }
    outcome(worst <= 1e-12, format!("max deviation from collapse oracle {worst:.2e} over 100 instances"))
}

fn criterion_9() -> Outcome {
    let probe = DiscretizedProbe::for_spread(1.0).unwrap();
    let mut rng = rng_from_seed(9);
    let random_a = random_hermitian_with(&mut rng, 2, 1.0);
    let cases: [(&str, HermitianOperator, Vec<LindbladTerm>); 2] = [
        ("A=X, L=sigma-", HermitianOperator::new(pauli_x()).unwrap(), vec![LindbladTerm::new(lowering(), 1.0)]),
        (
            "random A, L=sigma-, Z",
            random_a,
            vec![LindbladTerm::new(lowering(), 1.0), LindbladTerm::new(pauli_z(), 0.5)],
        ),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, a, terms) in cases {
        let l: Liouvillian = build_liouvillian(&a, &probe, &terms, 0.01, 0.01).unwrap();
        let full = factorization_error(&l, 1.0);
        let half = factorization_error(&l.with_strengths(0.005, 0.005), 1.0);
        let rel = full.error_norm / full.predicted;
        let scale = half.error_norm / full.error_norm;
        pass &= (rel - 1.0).abs() <= 0.2 && (scale - 0.25).abs() <= 0.05;
        parts.push(format!("{name}: error/predicted {rel:.4}, halving ratio {scale:.4}"));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_10() -> Outcome {
    let mut rng = rng_from_seed(10);
    let mut pass = true;
    let (mut worst_mean, mut worst_m2, mut worst_cheb) = (0.0f64, 0.0f64, f64::NEG_INFINITY);
    let mut k = 0;
    while k < 10 {
        let a = random_hermitian_with(&mut rng, 2, 1.0);
        let pre = random_pure_with(&mut rng, 2);
        let post = random_pure_with(&mut rng, 2);
        if pre.projector().overlap(&post) < 0.05 {
            continue;
        }
        let s = mc_delta_stats(&a, &pre, &post, 200_000, 1000 + k).unwrap();
        let ch = chebyshev_check(&s, DEFAULT_EPSILON).unwrap();
        worst_mean = worst_mean.max((s.mean_est - s.theory_mean).norm() / s.mean_se);
        worst_m2 = worst_m2.max((s.second_moment_est - s.theory_second_moment).abs() / s.second_moment_se);
        let p = ch.empirical;
        let se = (p * (1.0 - p) / s.n_samples as f64).sqrt();
        worst_cheb = worst_cheb.max(ch.empirical - ch.bound - 3.0 * se);
        pass &= s.mean_within(3.0) && s.second_moment_within(3.0) && ch.satisfied;
        k += 1;
    }
    outcome(
        pass,
        format!(
            "10 instances x 2e5: max mean deviation {worst_mean:.2} SE, max second-moment deviation {worst_m2:.2} SE, \
             max (empirical - bound - 3SE) {worst_cheb:.3}"
        ),
    )
}

fn criterion_11() -> Outcome {
    let mut rng = rng_from_seed(11);
    let mut worst_form: f64 = 0.0;
    let mut worst_zero: f64 = 0.0;
    let mut min_nonzero = f64::INFINITY;
    for _ in 0..20 {
        let a = random_hermitian_with(&mut rng, 2, 1.0);
        let (a11, a12, a21, a22) = (a.entry(0, 0), a.entry(0, 1), a.entry(1, 0), a.entry(1, 1));
        for fam in HadamardFamily::ALL {
            let grid: Vec<f64> = match fam {
                HadamardFamily::One => (0..10).map(|k| -0.4 + 0.1 * k as f64).collect(),
                HadamardFamily::Two => (1..=20).map(|k| 0.05 * k as f64).collect(),
                HadamardFamily::Three => (0..20).map(|k| 0.05 * k as f64).collect(),
            };
            for r in grid {
                let (x, d) = match fam {
                    HadamardFamily::One => ((a11 - a12 + a21 - a22) * (0.25 * r * (1.0 + 2.0 * r)), 0.5 + r),
                    HadamardFamily::Two => (a12 * (0.5 * r * (2.0 * r - 1.0)), r),
                    HadamardFamily::Three => (a21 * (0.5 * (1.0 - r) * (2.0 * r - 1.0)), 1.0 - r),
                };
                let delta = counterexample_hadamard(fam, &a, r).unwrap().delta;
                worst_form = worst_form.max((delta * (d * d) - x).norm());
                if (r - fam.mixed_point()).abs() < 1e-12 {
                    worst_zero = worst_zero.max(delta.norm());
                } else {
                    min_nonzero = min_nonzero.min(delta.norm());
                }
            }
        }
    }
    outcome(
        worst_form <= 1e-10 && worst_zero <= 1e-12 && min_nonzero > 1e-6,
        format!(
            "max closed-form deviation {worst_form:.2e}; |Delta| at mixed point {worst_zero:.1e}; \
             min |Delta| elsewhere {min_nonzero:.2e}"
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("catalog weak values equal diagonal elements", criterion_1),
        ("Pauli noise: WVMP quadratic, strong linear, postselected I/2 exact", criterion_2),
        ("unital mixtures: exact WVMP reconstruction", criterion_3),
        ("damping noise: WVMP quadratic, strong linear, a22 invariance", criterion_4),
        ("damping generator vanishes only at the ground state", criterion_5),
        ("damping generator closed form", criterion_6),
        ("probe regimes: weak mean and variance, strong Born masses", criterion_7),
        ("strong measurement with postselection equals collapse oracle", criterion_8),
        ("Lindblad factorization error and bilinear scaling", criterion_9),
        ("Haar moments and Chebyshev bound", criterion_10),
        ("Hadamard counterexamples", criterion_11),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        failed += usize::from(!result.pass);
        println!(
            "{} [{:>2}] {name}: {} ({:.2}s)",
            if result.pass { "PASS" } else { "FAIL" },
            k + 1,
            result.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

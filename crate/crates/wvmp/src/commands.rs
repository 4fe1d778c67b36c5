//! Subcommand implementations. Each returns printable lines, artifacts and
//! the outcome of its `--assert` checks; nothing here touches the file
//! system.

use serde_json::{json, Value};

use wvmp_core::channels::{apply_channel, build_channel, is_in_class, ChannelClass, ChannelSpec, KrausChannel};
use wvmp_core::haar::{chebyshev_check, mc_delta_stats};
use wvmp_core::learning::{
    bias_order_fit, default_gammas, reconstruct_via_strong, reconstruct_via_strong_postselect, reconstruct_via_wvmp_with,
    catalog_safe_pairs, BiasReport, CatalogParams, Protocol, ReadoutMode, ReconstructionResult, Theorem, Verdict,
};
use wvmp_core::lindblad::{build_liouvillian, factorization_error, validity_margins, DiscretizedProbe};
use wvmp_core::protocols::{
    default_grid, probe_distribution, sample_probe, strong_postselect_expectation, strong_prediction, wvmp_prediction,
    GaussianProbe, Postselection,
};
use wvmp_core::weakvalue::{bias_first_order_analytic, bias_first_order_numeric, noisy_weak_value, weak_value};
use wvmp_core::{DensityMatrix, HermitianOperator, PureState};

use crate::config::{ConfigError, ExperimentConfig, State};
use crate::output::{self, display_complex, field, num, Artifact};
use crate::CliError;

#[derive(Debug, Default)]
pub struct Outcome {
    pub lines: Vec<String>,
    pub artifacts: Vec<Artifact>,
    /// `(description, passed)` for `--assert`.
    pub checks: Vec<(String, bool)>,
}

impl Outcome {
    fn line(&mut self, s: impl Into<String>) {
        self.lines.push(s.into());
    }

    fn check(&mut self, name: impl Into<String>, ok: bool) {
        self.checks.push((name.into(), ok));
    }

    pub fn failed_checks(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.1).map(|c| c.0.as_str()).collect()
    }
}

/// Command-line overrides for `learn`.
#[derive(Clone, Copy, Debug, Default)]
pub struct LearnOverrides {
    pub theorem: Option<Theorem>,
    pub gamma: Option<f64>,
    pub protocol: Option<Protocol>,
}

type Runner = Box<dyn FnMut(&HermitianOperator, &KrausChannel) -> wvmp_core::Result<ReconstructionResult>>;

fn ic_pres() -> Vec<DensityMatrix> {
    [PureState::zero(), PureState::one(), PureState::plus(), PureState::plus_i()]
        .iter()
        .map(|p| p.projector())
        .collect()
}

fn is_maximally_mixed(rho: &DensityMatrix) -> bool {
    (rho.matrix() - DensityMatrix::maximally_mixed(rho.dim()).matrix()).max_abs() <= 1e-12
}

fn postselect_pairs(pre: Option<State>) -> Vec<(DensityMatrix, PureState)> {
    let rho = pre.map(|s| s.density).unwrap_or_else(|| DensityMatrix::maximally_mixed(2));
    let posts = if is_maximally_mixed(&rho) {
        vec![PureState::zero(), PureState::one(), PureState::plus(), PureState::plus_i()]
    } else {
        vec![PureState::plus(), PureState::plus_i()]
    };
    posts.into_iter().map(|f| (rho.clone(), f)).collect()
}

/// Picks the narrowest theorem whose channel class contains `spec`.
fn infer_theorem(spec: &ChannelSpec) -> Result<Theorem, CliError> {
    let probe = build_channel(spec, 0.5)?;
    for (class, theorem) in [
        (ChannelClass::Pauli, Theorem::T1Pauli),
        (ChannelClass::AmplitudePhaseDamping, Theorem::T3AdPd),
        (ChannelClass::Unital, Theorem::T2Unital),
    ] {
        if is_in_class(&probe, class, 1e-10) {
            return Ok(theorem);
        }
    }
    Err(ConfigError::new("theorem", "channel lies outside every supported class; set `theorem` explicitly").into())
}

struct Setup {
    protocol: Protocol,
    theorem: Option<Theorem>,
    runner: Runner,
}

fn setup_runner(cfg: &ExperimentConfig, spec: &ChannelSpec, over: LearnOverrides) -> Result<Setup, CliError> {
    let protocol = over.protocol.or(cfg.protocol()?).unwrap_or(Protocol::Wvmp);
    match protocol {
        Protocol::Wvmp => {
            let theorem = match over.theorem.or(cfg.theorem()?) {
                Some(t) => t,
                None => infer_theorem(spec)?,
            };
            let mode: ReadoutMode = cfg.readout()?;
            let class = theorem.catalog_class();
            let catalog = catalog_safe_pairs(class, CatalogParams::default_for(class))?;
            let runner: Runner = Box::new(move |a, c| reconstruct_via_wvmp_with(theorem, a, c, &catalog, mode));
            Ok(Setup { protocol, theorem: Some(theorem), runner })
        }
        Protocol::Strong => {
            let pres = ic_pres();
            Ok(Setup { protocol, theorem: None, runner: Box::new(move |a, c| reconstruct_via_strong(a, c, &pres)) })
        }
        Protocol::StrongPostselect => {
            let pre = match cfg.pre() {
                Ok(s) => Some(s),
                Err(e) if e.reason == "missing required field" => None,
                Err(e) => return Err(e.into()),
            };
            let pairs = postselect_pairs(pre);
            Ok(Setup {
                protocol,
                theorem: None,
                runner: Box::new(move |a, c| reconstruct_via_strong_postselect(a, c, &pairs)),
            })
        }
    }
}

fn report_json(r: &BiasReport) -> Value {
    json!({
        "gammas": r.gammas.iter().map(|&g| num(g)).collect::<Vec<_>>(),
        "errors": r.errors.iter().map(|&e| num(e)).collect::<Vec<_>>(),
        "fitted_slope": num(r.fitted_slope),
        "fit_r2": num(r.fit_r2),
        "verdict": r.verdict.as_str(),
    })
}

fn report_csv(name: &str, r: &BiasReport) -> Artifact {
    let rows: Vec<Vec<String>> = r
        .gammas
        .iter()
        .zip(&r.errors)
        .zip(&r.element_errors)
        .map(|((g, e), m)| vec![field(*g), field(*e), field(m[0][0]), field(m[0][1]), field(m[1][0]), field(m[1][1])])
        .collect();
    output::csv(name, &["gamma", "max_error", "err_a11", "err_a12", "err_a21", "err_a22"], &rows)
}

fn reconstruction_json(r: &ReconstructionResult) -> Value {
    json!({
        "a_hat": output::matrix(r.a_hat.matrix()),
        "per_element_error": r.per_element_error.iter().map(|row| row.iter().map(|&e| num(e)).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "identified": r.identified,
        "max_error": num(r.max_error()),
        "gamma": num(r.gamma),
        "protocol": r.protocol.as_str(),
    })
}

fn gammas(cfg: &ExperimentConfig) -> Result<Vec<f64>, CliError> {
    Ok(cfg.gammas()?.unwrap_or_else(default_gammas))
}

fn order_ok(v: Verdict) -> bool {
    matches!(v, Verdict::Exact | Verdict::Quadratic)
}

pub fn weakvalue(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let a = cfg.operator()?;
    let pre = cfg.pre()?;
    let post = cfg.post()?;
    let mut out = Outcome::default();
    let ideal = weak_value(&a, &pre.density, &post.density)?;
    out.line(format!("A_w = {}", display_complex(ideal.value)));
    let mut result = json!({
        "weak_value": output::complex(ideal.value),
        "overlap": num(ideal.overlap),
    });
    if let Some(spec) = cfg.channel_optional()? {
        let gamma = cfg.gamma()?;
        let noisy = noisy_weak_value(&a, &pre.density, &post.density, &build_channel(&spec, gamma)?)?;
        let numeric = bias_first_order_numeric(&a, &pre.density, &post.density, &spec, 1e-4)?.delta;
        out.line(format!("A_w,E = {} (gamma = {gamma})", display_complex(noisy.value)));
        let obj = result.as_object_mut().expect("object");
        obj.insert("gamma".into(), num(gamma));
        obj.insert("noisy_weak_value".into(), output::complex(noisy.value));
        obj.insert("bias_numeric".into(), output::complex(numeric));
        match &post.pure {
            Some(f) => {
                let analytic = bias_first_order_analytic(&a, &pre.density, f, &spec)?.delta;
                out.line(format!("Delta (analytic) = {}", display_complex(analytic)));
                out.line(format!("Delta (numeric) = {}", display_complex(numeric)));
                out.check("analytic and numeric bias agree", (analytic - numeric).norm() <= 1e-6 * (1.0 + analytic.norm()));
                obj.insert("bias_analytic".into(), output::complex(analytic));
                obj.insert("first_order_prediction".into(), output::complex(ideal.value + analytic * gamma));
            }
            None => out.line(format!("Delta (numeric) = {}", display_complex(numeric))),
        }
    }
    out.artifacts.push(output::json_artifact("weakvalue.json", &output::summary("weakvalue", cfg, result)));
    Ok(out)
}

pub fn bias_sweep(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let a = cfg.operator()?;
    let spec = cfg.channel()?;
    let grid = gammas(cfg)?;
    let mut setup = setup_runner(cfg, &spec, LearnOverrides::default())?;
    let report = bias_order_fit(&mut setup.runner, &a, &spec, &grid)?;
    let mut out = Outcome::default();
    out.line(format!(
        "protocol {}: slope {} (r2 {}), verdict {}",
        setup.protocol.as_str(),
        report.fitted_slope,
        report.fit_r2,
        report.verdict.as_str()
    ));
    if setup.protocol == Protocol::Wvmp {
        out.check("weak-value reconstruction bias is at least quadratic", order_ok(report.verdict));
    }
    let result = json!({
        "protocol": setup.protocol.as_str(),
        "theorem": setup.theorem.map(Theorem::label),
        "report": report_json(&report),
    });
    out.artifacts.push(report_csv("bias_sweep.csv", &report));
    out.artifacts.push(output::json_artifact("bias_sweep.json", &output::summary("bias-sweep", cfg, result)));
    Ok(out)
}

pub fn learn(cfg: &ExperimentConfig, over: LearnOverrides) -> Result<Outcome, CliError> {
    let a = cfg.operator()?;
    let spec = cfg.channel()?;
    let gamma = match over.gamma {
        Some(g) if (0.0..=1.0).contains(&g) => g,
        Some(g) => return Err(ConfigError::new("--gamma", format!("must lie in [0, 1], got {g}")).into()),
        None => cfg.gamma()?,
    };
    let grid = gammas(cfg)?;
    let mut setup = setup_runner(cfg, &spec, over)?;
    let result = (setup.runner)(&a, &build_channel(&spec, gamma)?)?;
    let report = bias_order_fit(&mut setup.runner, &a, &spec, &grid)?;

    let mut out = Outcome::default();
    out.line(format!(
        "protocol {}{} at gamma {gamma}",
        setup.protocol.as_str(),
        setup.theorem.map(|t| format!(" ({})", t.label())).unwrap_or_default()
    ));
    for (i, j, name) in [(0, 0, "a11"), (0, 1, "a12"), (1, 0, "a21"), (1, 1, "a22")] {
        let tag = if result.identified[i][j] { "" } else { " (unidentified)" };
        out.line(format!(
            "{name}: estimate {} error {:e}{tag}",
            display_complex(result.a_hat.entry(i, j)),
            result.per_element_error[i][j]
        ));
    }
    out.line(format!("max error {:e}", result.max_error()));
    out.line(format!("slope {} verdict {}", report.fitted_slope, report.verdict.as_str()));
    if setup.protocol == Protocol::Wvmp {
        out.check("weak-value reconstruction bias is at least quadratic", order_ok(report.verdict));
        out.check("all elements identified", result.fully_identified());
    }
    let body = json!({
        "theorem": setup.theorem.map(Theorem::label),
        "reconstruction": reconstruction_json(&result),
        "report": report_json(&report),
    });
    out.artifacts.push(report_csv("learn_bias.csv", &report));
    out.artifacts.push(output::json_artifact("learn.json", &output::summary("learn", cfg, body)));
    Ok(out)
}

pub fn protocol(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let a = cfg.operator()?;
    let pre = cfg.pre()?;
    let post = cfg.post_optional()?;
    let pc = cfg.probe()?;
    let probe = GaussianProbe::new(pc.spread, pc.coupling).map_err(|e| ConfigError::new("probe", e))?;
    let rho = match cfg.channel_optional()? {
        Some(spec) => apply_channel(&build_channel(&spec, cfg.gamma()?)?, &pre.density)?,
        None => pre.density.clone(),
    };
    let (_, default_hw) = default_grid(&a, &probe);
    let half_width = pc.half_width.unwrap_or(default_hw);
    let needed = (2.0 * half_width / (pc.spread / 8.0)).ceil() as usize + 1;
    let points = pc.grid_points.unwrap_or(needed.max(wvmp_core::protocols::DEFAULT_GRID_POINTS));
    let post_pure = post.as_ref().map(|s| s.require_pure("post")).transpose()?;
    let selection = post_pure.map_or(Postselection::None, Postselection::Onto);
    let dist = probe_distribution(&a, &rho, selection, &probe, points, half_width)?;
    let samples = sample_probe(&dist, pc.samples, cfg.seed);
    let n = samples.len().max(1) as f64;
    let s_mean = samples.iter().sum::<f64>() / n;
    let s_var = samples.iter().map(|x| (x - s_mean) * (x - s_mean)).sum::<f64>() / (n - 1.0).max(1.0);

    let mut out = Outcome::default();
    let mut result = json!({
        "grid_points": points,
        "half_width": num(half_width),
        "postselect_prob": num(dist.postselect_prob),
        "grid_mean": num(dist.mean),
        "grid_variance": num(dist.variance),
        "exact_mean": num(dist.exact_mean),
        "samples": pc.samples,
        "sample_mean": num(s_mean),
        "sample_variance": num(s_var),
        "weak_regime": probe.is_weak(),
    });
    out.line(format!("grid mean {} variance {} postselection probability {}", dist.mean, dist.variance, dist.postselect_prob));
    out.line(format!("sample mean {s_mean} variance {s_var} (n = {})", pc.samples));
    out.check("probe density integrates to one", (dist.total_mass() - 1.0).abs() <= 1e-6);
    let obj = result.as_object_mut().expect("object");
    match post_pure {
        Some(f) => {
            if probe.is_weak() {
                let p = wvmp_prediction(&a, &rho, f, &probe)?;
                out.line(format!("weak-value prediction g Re(A_w) = {}", p.mean));
                let tol = 0.02 * pc.coupling.abs() * p.weak_value.norm() + 1e-9;
                out.check("grid mean matches g Re(A_w)", (dist.mean - p.mean).abs() <= tol);
                obj.insert("weak_value".into(), output::complex(p.weak_value));
                obj.insert("prediction".into(), num(p.mean));
            } else {
                let p = strong_postselect_expectation(&a, &rho, f, &probe)?;
                out.line(format!("projective prediction with postselection = {p}"));
                obj.insert("prediction".into(), num(p));
            }
        }
        None => {
            let p = strong_prediction(&a, &rho, &probe)?;
            out.line(format!("prediction g <A> = {}", p.mean));
            out.check("grid mean matches g <A>", (dist.mean - p.mean).abs() <= 1e-6 * (1.0 + p.mean.abs()));
            obj.insert("prediction".into(), num(p.mean));
            obj.insert("prediction_variance".into(), num(p.variance));
        }
    }
    let rows: Vec<Vec<String>> = dist.grid.iter().zip(&dist.density).map(|(q, d)| vec![field(*q), field(*d)]).collect();
    out.artifacts.push(output::csv("probe_distribution.csv", &["q", "density"], &rows));
    out.artifacts.push(output::json_artifact("protocol.json", &output::summary("protocol", cfg, result)));
    Ok(out)
}

pub fn lindblad(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let a = cfg.operator()?;
    let lc = cfg.lindblad()?;
    let probe = DiscretizedProbe::new(lc.points, lc.half_width.unwrap_or(10.0 * lc.spread))
        .map_err(|e| ConfigError::new("lindblad.points", e))?;
    let base = build_liouvillian(&a, &probe, &lc.terms, lc.g_tilde[0], lc.gamma_tilde[0])?;
    let (g_bound, gamma_bound) = validity_margins(&base);
    let mut out = Outcome::default();
    let mut rows = Vec::new();
    let mut json_rows = Vec::new();
    for &g in &lc.g_tilde {
        for &gam in &lc.gamma_tilde {
            let fe = factorization_error(&base.with_strengths(g, gam), lc.t);
            let (gt, gamt) = (g * lc.t, gam * lc.t);
            rows.push(vec![field(gt), field(gamt), field(fe.error_norm), field(fe.predicted)]);
            json_rows.push(json!({"g_tilde_t": num(gt), "gamma_tilde_t": num(gamt), "error": num(fe.error_norm), "predicted": num(fe.predicted)}));
            out.line(format!("g~t {gt} gamma~t {gamt}: error {:e} predicted {:e}", fe.error_norm, fe.predicted));
            if gt <= 0.01 && gamt <= 0.01 {
                let ok = if fe.predicted > 0.0 {
                    (fe.error_norm / fe.predicted - 1.0).abs() <= 0.2
                } else {
                    fe.error_norm <= 1e-8
                };
                out.check(format!("factorization error near prediction at ({gt}, {gamt})"), ok);
            }
        }
    }
    out.line(format!("validity margins: g~t << {g_bound}, gamma~t << {gamma_bound}"));
    let result = json!({
        "points": lc.points,
        "t": num(lc.t),
        "g_bound": num(g_bound),
        "gamma_bound": num(gamma_bound),
        "hamiltonian_norm": num(base.hamiltonian_norm()),
        "dissipator_norm": num(base.dissipator_norm()),
        "commutator_norm": num(base.commutator_norm()),
        "sweep": json_rows,
    });
    out.artifacts.push(output::csv("lindblad_sweep.csv", &["g_tilde_t", "gamma_tilde_t", "error", "predicted"], &rows));
    out.artifacts.push(output::json_artifact("lindblad.json", &output::summary("lindblad", cfg, result)));
    Ok(out)
}

pub fn haar(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let a = cfg.operator()?;
    let pre_state = cfg.pre()?;
    let post_state = cfg.post()?;
    let pre = pre_state.require_pure("pre")?;
    let post = post_state.require_pure("post")?;
    let hc = cfg.haar()?;
    let s = mc_delta_stats(&a, pre, post, hc.samples, cfg.seed)?;
    let mut out = Outcome::default();
    out.line(format!(
        "mean {} (se {}), theory {}",
        display_complex(s.mean_est),
        s.mean_se,
        display_complex(s.theory_mean)
    ));
    out.line(format!(
        "E|Delta|^2 {} (se {}), theory {}",
        s.second_moment_est, s.second_moment_se, s.theory_second_moment
    ));
    out.check("mean within 3 SE", s.mean_within(3.0));
    out.check("second moment within 3 SE", s.second_moment_within(3.0));
    let cheb = match chebyshev_check(&s, hc.epsilon) {
        Ok(c) => {
            out.line(format!("near-zero fraction {} vs bound {}", c.empirical, c.bound));
            out.check("Chebyshev bound holds", c.satisfied);
            json!({"epsilon": num(hc.epsilon), "bound": num(c.bound), "empirical": num(c.empirical), "satisfied": c.satisfied})
        }
        Err(wvmp_core::Error::MeanZero) => {
            out.line("theory mean is zero; Chebyshev bound undefined");
            Value::Null
        }
        Err(e) => return Err(e.into()),
    };
    let result = json!({
        "n_samples": s.n_samples,
        "mean_est": output::complex(s.mean_est),
        "mean_se": num(s.mean_se),
        "second_moment_est": num(s.second_moment_est),
        "second_moment_se": num(s.second_moment_se),
        "theory_mean": output::complex(s.theory_mean),
        "theory_second_moment": num(s.theory_second_moment),
        "theory_var": num(s.theory_var),
        "prob_small_est": num(s.prob_small_est),
        "chebyshev": cheb,
    });
    out.artifacts.push(output::json_artifact("haar.json", &output::summary("haar", cfg, result)));
    Ok(out)
}

//! JSON experiment configuration.
//!
//! Complex numbers are `[re, im]` pairs (a bare number is read as real).
//! Matrices are arrays of rows. States may be named (`"zero"`, `"one"`,
//! `"plus"`, `"minus"`, `"plus_i"`, `"minus_i"`, `"maximally_mixed"`), given
//! as `{"pure": [c0, c1]}` or as `{"density": matrix}`.

use std::fmt;
use std::path::PathBuf;

use num_complex::Complex64;
use serde_json::{Map, Value};

use wvmp_core::channels::ChannelSpec;
use wvmp_core::learning::{Protocol, ReadoutMode, Theorem};
use wvmp_core::lindblad::{lowering, LindbladTerm};
use wvmp_core::random::{haar_unitary_with, rng_from_seed};
use wvmp_core::state::{hadamard, pauli_x, pauli_y, pauli_z};
use wvmp_core::{ComplexMatrix, DensityMatrix, HermitianOperator, PureState};

/// A config problem located at a dotted field path.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("config error at `{field}`: {reason}")]
pub struct ConfigError {
    pub field: String,
    pub reason: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, reason: impl fmt::Display) -> Self {
        Self { field: field.into(), reason: reason.to_string() }
    }
}

type Res<T> = Result<T, ConfigError>;

const TOP_LEVEL: &[&str] = &[
    "seed", "operator", "pre", "post", "channel", "gamma", "gammas", "probe", "theorem", "protocol", "readout", "lindblad",
    "haar", "output_dir",
];

#[derive(Clone, Debug)]
pub struct State {
    pub density: DensityMatrix,
    pub pure: Option<PureState>,
}

impl State {
    pub fn require_pure(&self, field: &str) -> Res<&PureState> {
        self.pure.as_ref().ok_or_else(|| ConfigError::new(field, "a pure state is required here"))
    }
}

#[derive(Clone, Debug)]
pub struct ProbeConfig {
    pub coupling: f64,
    pub spread: f64,
    pub grid_points: Option<usize>,
    pub half_width: Option<f64>,
    pub samples: usize,
}

#[derive(Clone, Debug)]
pub struct LindbladConfig {
    pub points: usize,
    pub spread: f64,
    pub half_width: Option<f64>,
    pub t: f64,
    pub terms: Vec<LindbladTerm>,
    pub g_tilde: Vec<f64>,
    pub gamma_tilde: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct HaarConfig {
    pub samples: usize,
    pub epsilon: f64,
}

/// Parsed experiment description. Sections are validated lazily, so a
/// subcommand only fails on the fields it actually needs.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    raw: Map<String, Value>,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Res<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| ConfigError::new("<document>", e))?;
        let Value::Object(raw) = value else {
            return Err(ConfigError::new("<document>", "expected a JSON object"));
        };
        for key in raw.keys() {
            if !TOP_LEVEL.contains(&key.as_str()) {
                return Err(ConfigError::new(key.as_str(), "unknown field"));
            }
        }
        let seed = match raw.get("seed") {
            None => return Err(ConfigError::new("seed", "missing required field")),
            Some(v) => v.as_u64().ok_or_else(|| ConfigError::new("seed", "expected a nonnegative integer"))?,
        };
        Ok(Self { raw, seed })
    }

    pub fn override_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.raw.insert("seed".into(), Value::from(seed));
    }

    /// Canonical serialization (sorted keys) of the effective config.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(&Value::Object(self.raw.clone())).expect("serializable")
    }

    fn get(&self, key: &str) -> Option<&Value> {
        self.raw.get(key)
    }

    fn require(&self, key: &str) -> Res<&Value> {
        self.get(key).ok_or_else(|| ConfigError::new(key, "missing required field"))
    }

    pub fn operator(&self) -> Res<HermitianOperator> {
        parse_operator(self.require("operator")?, "operator")
    }

    pub fn pre(&self) -> Res<State> {
        parse_state(self.require("pre")?, "pre")
    }

    pub fn post(&self) -> Res<State> {
        parse_state(self.require("post")?, "post")
    }

    pub fn post_optional(&self) -> Res<Option<State>> {
        self.get("post").map(|v| parse_state(v, "post")).transpose()
    }

    pub fn channel(&self) -> Res<ChannelSpec> {
        parse_channel(self.require("channel")?, "channel", self.seed)
    }

    pub fn channel_optional(&self) -> Res<Option<ChannelSpec>> {
        self.get("channel").map(|v| parse_channel(v, "channel", self.seed)).transpose()
    }

    pub fn gamma(&self) -> Res<f64> {
        let g = number(self.require("gamma")?, "gamma")?;
        if !(0.0..=1.0).contains(&g) {
            return Err(ConfigError::new("gamma", format!("must lie in [0, 1], got {g}")));
        }
        Ok(g)
    }

    pub fn gamma_optional(&self) -> Res<Option<f64>> {
        match self.get("gamma") {
            None => Ok(None),
            Some(_) => self.gamma().map(Some),
        }
    }

    pub fn gammas(&self) -> Res<Option<Vec<f64>>> {
        self.get("gammas").map(|v| number_list(v, "gammas")).transpose()
    }

    pub fn theorem(&self) -> Res<Option<Theorem>> {
        self.get("theorem").map(|v| parse_theorem(string(v, "theorem")?, "theorem")).transpose()
    }

    pub fn protocol(&self) -> Res<Option<Protocol>> {
        self.get("protocol").map(|v| parse_protocol(string(v, "protocol")?, "protocol")).transpose()
    }

    pub fn readout(&self) -> Res<ReadoutMode> {
        match self.get("readout") {
            None => Ok(ReadoutMode::Complex),
            Some(v) => match string(v, "readout")? {
                "complex" => Ok(ReadoutMode::Complex),
                "real_part" => Ok(ReadoutMode::RealPart),
                other => Err(ConfigError::new("readout", format!("unknown readout `{other}` (complex, real_part)"))),
            },
        }
    }

    pub fn output_dir(&self) -> Res<Option<PathBuf>> {
        self.get("output_dir").map(|v| string(v, "output_dir").map(PathBuf::from)).transpose()
    }

    pub fn probe(&self) -> Res<ProbeConfig> {
        let obj = object(self.require("probe")?, "probe", &["coupling", "spread", "grid_points", "half_width", "samples"])?;
        Ok(ProbeConfig {
            coupling: number(field(obj, "probe", "coupling")?, "probe.coupling")?,
            spread: number(field(obj, "probe", "spread")?, "probe.spread")?,
            grid_points: opt_count(obj, "probe", "grid_points")?,
            half_width: obj.get("half_width").map(|v| number(v, "probe.half_width")).transpose()?,
            samples: opt_count(obj, "probe", "samples")?.unwrap_or(10_000),
        })
    }

    pub fn lindblad(&self) -> Res<LindbladConfig> {
        let keys = ["points", "spread", "half_width", "t", "ops", "g_tilde", "gamma_tilde"];
        let empty = Value::Object(Map::new());
        let obj = object(self.get("lindblad").unwrap_or(&empty), "lindblad", &keys)?;
        let terms = match obj.get("ops") {
            None => vec![LindbladTerm::new(lowering(), 1.0)],
            Some(Value::Array(items)) => items
                .iter()
                .enumerate()
                .map(|(k, item)| {
                    let path = format!("lindblad.ops[{k}]");
                    let o = object(item, &path, &["op", "rate"])?;
                    let op = parse_jump_operator(field(o, &path, "op")?, &format!("{path}.op"))?;
                    let rate = match o.get("rate") {
                        None => 1.0,
                        Some(v) => number(v, &format!("{path}.rate"))?,
                    };
                    Ok(LindbladTerm::new(op, rate))
                })
                .collect::<Res<Vec<_>>>()?,
            Some(_) => return Err(ConfigError::new("lindblad.ops", "expected an array")),
        };
        let strengths = |key: &str| -> Res<Vec<f64>> {
            let path = format!("lindblad.{key}");
            let v = match obj.get(key) {
                None => vec![0.01, 0.005],
                Some(v) => number_list(v, &path)?,
            };
            if v.is_empty() || v.iter().any(|x| !(*x >= 0.0)) {
                return Err(ConfigError::new(path, "expected a nonempty list of nonnegative numbers"));
            }
            Ok(v)
        };
        let cfg = LindbladConfig {
            points: opt_count(obj, "lindblad", "points")?.unwrap_or(32),
            spread: obj.get("spread").map(|v| number(v, "lindblad.spread")).transpose()?.unwrap_or(1.0),
            half_width: obj.get("half_width").map(|v| number(v, "lindblad.half_width")).transpose()?,
            t: obj.get("t").map(|v| number(v, "lindblad.t")).transpose()?.unwrap_or(1.0),
            terms,
            g_tilde: strengths("g_tilde")?,
            gamma_tilde: strengths("gamma_tilde")?,
        };
        if !(cfg.t > 0.0) {
            return Err(ConfigError::new("lindblad.t", "must be positive"));
        }
        for (key, list) in [("g_tilde", &cfg.g_tilde), ("gamma_tilde", &cfg.gamma_tilde)] {
            if list.iter().any(|x| x * cfg.t > 0.3) {
                return Err(ConfigError::new(format!("lindblad.{key}"), "strength times t must not exceed 0.3"));
            }
        }
        Ok(cfg)
    }

    pub fn haar(&self) -> Res<HaarConfig> {
        let empty = Value::Object(Map::new());
        let obj = object(self.get("haar").unwrap_or(&empty), "haar", &["samples", "epsilon"])?;
        Ok(HaarConfig {
            samples: opt_count(obj, "haar", "samples")?.unwrap_or(200_000),
            epsilon: obj.get("epsilon").map(|v| number(v, "haar.epsilon")).transpose()?.unwrap_or(0.05),
        })
    }
}

fn field<'a>(obj: &'a Map<String, Value>, path: &str, key: &str) -> Res<&'a Value> {
    obj.get(key).ok_or_else(|| ConfigError::new(format!("{path}.{key}"), "missing required field"))
}

fn object<'a>(v: &'a Value, path: &str, allowed: &[&str]) -> Res<&'a Map<String, Value>> {
    let obj = v.as_object().ok_or_else(|| ConfigError::new(path, "expected an object"))?;
    for key in obj.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(ConfigError::new(format!("{path}.{key}"), "unknown field"));
        }
    }
    Ok(obj)
}

fn number(v: &Value, path: &str) -> Res<f64> {
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| ConfigError::new(path, "expected a finite number"))
}

fn string<'a>(v: &'a Value, path: &str) -> Res<&'a str> {
    v.as_str().ok_or_else(|| ConfigError::new(path, "expected a string"))
}

fn number_list(v: &Value, path: &str) -> Res<Vec<f64>> {
    let items = v.as_array().ok_or_else(|| ConfigError::new(path, "expected an array of numbers"))?;
    items.iter().enumerate().map(|(k, x)| number(x, &format!("{path}[{k}]"))).collect()
}

fn opt_count(obj: &Map<String, Value>, path: &str, key: &str) -> Res<Option<usize>> {
    obj.get(key)
        .map(|v| {
            v.as_u64()
                .map(|n| n as usize)
                .ok_or_else(|| ConfigError::new(format!("{path}.{key}"), "expected a nonnegative integer"))
        })
        .transpose()
}

pub fn parse_complex(v: &Value, path: &str) -> Res<Complex64> {
    if let Some(x) = v.as_f64() {
        return Ok(Complex64::new(x, 0.0));
    }
    match v.as_array().map(Vec::as_slice) {
        Some([re, im]) => Ok(Complex64::new(number(re, &format!("{path}[0]"))?, number(im, &format!("{path}[1]"))?)),
        _ => Err(ConfigError::new(path, "expected a complex number [re, im]")),
    }
}

pub fn parse_matrix(v: &Value, path: &str) -> Res<ComplexMatrix> {
    let rows = v.as_array().ok_or_else(|| ConfigError::new(path, "expected a matrix (array of rows)"))?;
    let parsed = rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let rp = format!("{path}[{i}]");
            let entries = row.as_array().ok_or_else(|| ConfigError::new(&rp, "expected a row array"))?;
            entries
                .iter()
                .enumerate()
                .map(|(j, z)| parse_complex(z, &format!("{rp}[{j}]")))
                .collect::<Res<Vec<_>>>()
        })
        .collect::<Res<Vec<_>>>()?;
    ComplexMatrix::from_rows(&parsed).map_err(|e| ConfigError::new(path, e))
}

fn named_matrix(name: &str) -> Option<ComplexMatrix> {
    match name {
        "x" | "pauli_x" => Some(pauli_x()),
        "y" | "pauli_y" => Some(pauli_y()),
        "z" | "pauli_z" => Some(pauli_z()),
        "identity" => Some(ComplexMatrix::identity(2)),
        "hadamard" => Some(hadamard()),
        _ => None,
    }
}

pub fn parse_operator(v: &Value, path: &str) -> Res<HermitianOperator> {
    let m = match v {
        Value::String(name) => named_matrix(name).filter(|_| name != "hadamard").ok_or_else(|| {
            ConfigError::new(path, format!("unknown operator `{name}` (pauli_x, pauli_y, pauli_z, identity)"))
        })?,
        _ => parse_matrix(v, path)?,
    };
    HermitianOperator::new(m).map_err(|e| ConfigError::new(path, e))
}

fn parse_jump_operator(v: &Value, path: &str) -> Res<ComplexMatrix> {
    match v {
        Value::String(name) if name == "lowering" => Ok(lowering()),
        Value::String(name) if name == "raising" => Ok(lowering().adjoint()),
        Value::String(name) => named_matrix(name).ok_or_else(|| {
            ConfigError::new(path, format!("unknown jump operator `{name}` (lowering, raising, pauli_x, pauli_y, pauli_z)"))
        }),
        _ => parse_matrix(v, path),
    }
}

pub fn parse_state(v: &Value, path: &str) -> Res<State> {
    let pure_named = |p: PureState| State { density: p.projector(), pure: Some(p) };
    match v {
        Value::String(name) => match name.as_str() {
            "zero" => Ok(pure_named(PureState::zero())),
            "one" => Ok(pure_named(PureState::one())),
            "plus" => Ok(pure_named(PureState::plus())),
            "minus" => Ok(pure_named(PureState::minus())),
            "plus_i" => Ok(pure_named(PureState::plus_i())),
            "minus_i" => Ok(pure_named(PureState::minus_i())),
            "maximally_mixed" => Ok(State { density: DensityMatrix::maximally_mixed(2), pure: None }),
            other => Err(ConfigError::new(path, format!("unknown state `{other}`"))),
        },
        Value::Object(obj) => {
            if obj.len() != 1 {
                return Err(ConfigError::new(path, "expected exactly one of `pure` or `density`"));
            }
            if let Some(amps) = obj.get("pure") {
                let p = format!("{path}.pure");
                let list = amps.as_array().ok_or_else(|| ConfigError::new(&p, "expected an array of amplitudes"))?;
                let amps = list
                    .iter()
                    .enumerate()
                    .map(|(k, z)| parse_complex(z, &format!("{p}[{k}]")))
                    .collect::<Res<Vec<_>>>()?;
                let psi = PureState::new(amps).map_err(|e| ConfigError::new(&p, e))?;
                Ok(pure_named(psi))
            } else if let Some(m) = obj.get("density") {
                let p = format!("{path}.density");
                let rho = DensityMatrix::new(parse_matrix(m, &p)?).map_err(|e| ConfigError::new(&p, e))?;
                let pure = rho.as_pure().ok();
                Ok(State { density: rho, pure })
            } else {
                let key = obj.keys().next().expect("one key");
                Err(ConfigError::new(format!("{path}.{key}"), "unknown field"))
            }
        }
        _ => Err(ConfigError::new(path, "expected a state name or object")),
    }
}

fn parse_unitary(v: &Value, path: &str) -> Res<ComplexMatrix> {
    match v {
        Value::String(name) => named_matrix(name).ok_or_else(|| ConfigError::new(path, format!("unknown unitary `{name}`"))),
        _ => parse_matrix(v, path),
    }
}

pub fn parse_channel(v: &Value, path: &str, seed: u64) -> Res<ChannelSpec> {
    let obj = v.as_object().ok_or_else(|| ConfigError::new(path, "expected an object with a `kind`"))?;
    let kind = string(field(obj, path, "kind")?, &format!("{path}.kind"))?;
    let allowed: &[&str] = match kind {
        "pauli" => &["kind", "weights"],
        "prob_unitary" => &["kind", "unitary"],
        "unitary_mixture" => &["kind", "terms"],
        "haar_mixture" => &["kind", "count"],
        "composed" => &["kind", "parts"],
        _ => &["kind"],
    };
    object(v, path, allowed)?;
    let spec = match kind {
        "pauli" => {
            let w = number_list(field(obj, path, "weights")?, &format!("{path}.weights"))?;
            let [x, y, z] = w[..] else {
                return Err(ConfigError::new(format!("{path}.weights"), "expected three weights"));
            };
            ChannelSpec::pauli(x, y, z)
        }
        "amplitude_damping" => ChannelSpec::AmplitudeDamping,
        "phase_damping" => ChannelSpec::PhaseDamping,
        "ad_pd" => ChannelSpec::ad_pd(),
        "prob_unitary" => ChannelSpec::ProbUnitary(parse_unitary(field(obj, path, "unitary")?, &format!("{path}.unitary"))?),
        "unitary_mixture" => {
            let p = format!("{path}.terms");
            let items = field(obj, path, "terms")?.as_array().ok_or_else(|| ConfigError::new(&p, "expected an array"))?;
            let terms = items
                .iter()
                .enumerate()
                .map(|(k, t)| {
                    let tp = format!("{p}[{k}]");
                    let o = object(t, &tp, &["unitary", "weight"])?;
                    Ok((
                        parse_unitary(field(o, &tp, "unitary")?, &format!("{tp}.unitary"))?,
                        number(field(o, &tp, "weight")?, &format!("{tp}.weight"))?,
                    ))
                })
                .collect::<Res<Vec<_>>>()?;
            ChannelSpec::UnitaryMixture(terms)
        }
        "haar_mixture" => {
            let count = opt_count(obj, path, "count")?.unwrap_or(5);
            if count == 0 {
                return Err(ConfigError::new(format!("{path}.count"), "must be positive"));
            }
            let mut rng = rng_from_seed(seed);
            let terms = (0..count).map(|_| (haar_unitary_with(&mut rng, 2), 1.0 / count as f64)).collect();
            ChannelSpec::UnitaryMixture(terms)
        }
        "composed" => {
            let p = format!("{path}.parts");
            let items = field(obj, path, "parts")?.as_array().ok_or_else(|| ConfigError::new(&p, "expected an array"))?;
            let parts = items
                .iter()
                .enumerate()
                .map(|(k, t)| {
                    let tp = format!("{p}[{k}]");
                    let o = object(t, &tp, &["channel", "weight"])?;
                    Ok((
                        parse_channel(field(o, &tp, "channel")?, &format!("{tp}.channel"), seed.wrapping_add(k as u64 + 1))?,
                        number(field(o, &tp, "weight")?, &format!("{tp}.weight"))?,
                    ))
                })
                .collect::<Res<Vec<_>>>()?;
            ChannelSpec::Composed(parts)
        }
        other => {
            return Err(ConfigError::new(
                format!("{path}.kind"),
                format!(
                    "unknown channel `{other}` (pauli, amplitude_damping, phase_damping, ad_pd, prob_unitary, \
                     unitary_mixture, haar_mixture, composed)"
                ),
            ))
        }
    };
    spec.validate().map_err(|e| ConfigError::new(path, e))?;
    Ok(spec)
}

pub fn parse_theorem(s: &str, path: &str) -> Res<Theorem> {
    match s.to_ascii_uppercase().as_str() {
        "T1" => Ok(Theorem::T1Pauli),
        "T2" => Ok(Theorem::T2Unital),
        "T3" => Ok(Theorem::T3AdPd),
        _ => Err(ConfigError::new(path, format!("unknown theorem `{s}` (T1, T2, T3)"))),
    }
}

pub fn parse_protocol(s: &str, path: &str) -> Res<Protocol> {
    match s {
        "wvmp" => Ok(Protocol::Wvmp),
        "strong" => Ok(Protocol::Strong),
        "strong_postselect" => Ok(Protocol::StrongPostselect),
        _ => Err(ConfigError::new(path, format!("unknown protocol `{s}` (wvmp, strong, strong_postselect)"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_seed_is_named() {
        let err = ExperimentConfig::from_json(r#"{"operator": "pauli_z"}"#).unwrap_err();
        assert_eq!(err.field, "seed");
    }

    #[test]
    fn unknown_fields_rejected() {
        let err = ExperimentConfig::from_json(r#"{"seed": 1, "operatr": "pauli_z"}"#).unwrap_err();
        assert_eq!(err.field, "operatr");
        let cfg = ExperimentConfig::from_json(r#"{"seed": 1, "probe": {"coupling": 0.1, "sprad": 1}}"#).unwrap();
        assert_eq!(cfg.probe().unwrap_err().field, "probe.sprad");
    }

    #[test]
    fn nested_paths_in_errors() {
        let cfg = ExperimentConfig::from_json(r#"{"seed": 1, "operator": [[1, [0, "a"]], [0, -1]]}"#).unwrap();
        assert_eq!(cfg.operator().unwrap_err().field, "operator[0][1][1]");
        let cfg = ExperimentConfig::from_json(r#"{"seed": 1, "operator": [[1, [0, 1]], [0, -1]]}"#).unwrap();
        let err = cfg.operator().unwrap_err();
        assert_eq!(err.field, "operator");
        assert!(err.reason.contains("Hermitian"), "{}", err.reason);
    }

    #[test]
    fn states_and_channels() {
        let cfg = ExperimentConfig::from_json(
            r#"{"seed": 3, "pre": {"pure": [[0.6, 0], [0, 0.8]]}, "post": "maximally_mixed",
                "channel": {"kind": "pauli", "weights": [0.2, 0.3, 0.5]}}"#,
        )
        .unwrap();
        assert!(cfg.pre().unwrap().pure.is_some());
        assert!(cfg.post().unwrap().pure.is_none());
        assert!(matches!(cfg.channel().unwrap(), ChannelSpec::Pauli { .. }));
        let bad = ExperimentConfig::from_json(r#"{"seed": 3, "channel": {"kind": "pauli", "weights": [0.2, 0.3]}}"#).unwrap();
        assert_eq!(bad.channel().unwrap_err().field, "channel.weights");
    }

    #[test]
    fn seed_override_changes_canonical_form() {
        let mut cfg = ExperimentConfig::from_json(r#"{"seed": 3, "gamma": 0.1}"#).unwrap();
        let before = cfg.canonical_json();
        cfg.override_seed(4);
        assert_ne!(before, cfg.canonical_json());
        assert_eq!(cfg.canonical_json(), r#"{"gamma":0.1,"seed":4}"#);
    }
}

//! CSV and JSON artifact encoding.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use wvmp_core::ComplexMatrix;

use crate::config::ExperimentConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// `f64` as a CSV field; shortest round-trip form.
pub fn field(x: f64) -> String {
    format!("{x}")
}

pub fn csv(name: &str, header: &[&str], rows: &[Vec<String>]) -> Artifact {
    let mut w = ::csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        w.write_record(row).expect("in-memory write");
    }
    Artifact { name: name.into(), bytes: w.into_inner().expect("in-memory flush") }
}

/// JSON number, or a string for non-finite values.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

pub fn complex(z: Complex64) -> Value {
    json!([num(z.re), num(z.im)])
}

pub fn matrix(m: &ComplexMatrix) -> Value {
    let n = m.dim();
    Value::Array((0..n).map(|i| Value::Array((0..n).map(|j| complex(m[(i, j)])).collect())).collect())
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    hex::encode(Sha256::digest(cfg.canonical_json().as_bytes()))
}

/// Wraps a result body with provenance. Keys serialize sorted.
pub fn summary(command: &str, cfg: &ExperimentConfig, result: Value) -> Value {
    json!({
        "tool": "wvmp",
        "version": VERSION,
        "command": command,
        "seed": cfg.seed,
        "config_hash": config_hash(cfg),
        "result": result,
    })
}

pub fn json_artifact(name: &str, value: &Value) -> Artifact {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
    bytes.push(b'\n');
    Artifact { name: name.into(), bytes }
}

pub fn write_all(dir: &Path, artifacts: &[Artifact]) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    artifacts
        .iter()
        .map(|a| {
            let path = dir.join(&a.name);
            fs::write(&path, &a.bytes)?;
            Ok(path)
        })
        .collect()
}

/// `1`, `-0.5`, `0.3+0.2i`, `0.3-0.2i`
pub fn display_complex(z: Complex64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else if z.im < 0.0 {
        format!("{}-{}i", z.re, -z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_and_rows() {
        let a = csv("t.csv", &["x", "y"], &[vec![field(0.5), field(f64::INFINITY)]]);
        assert_eq!(String::from_utf8(a.bytes).unwrap(), "x,y\n0.5,inf\n");
    }

    #[test]
    fn json_keys_sorted_and_nonfinite_encoded() {
        let v = json!({"b": num(f64::INFINITY), "a": complex(Complex64::new(1.0, -2.0))});
        assert_eq!(serde_json::to_string(&v).unwrap(), r#"{"a":[1.0,-2.0],"b":"inf"}"#);
    }

    #[test]
    fn complex_display() {
        assert_eq!(display_complex(Complex64::new(1.0, 0.0)), "1");
        assert_eq!(display_complex(Complex64::new(0.5, -0.25)), "0.5-0.25i");
    }
}

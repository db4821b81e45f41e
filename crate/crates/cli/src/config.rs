//! Run configuration: JSON parsing and validation with JSON-pointer error paths.

use std::collections::BTreeMap;
use std::path::Path;

use fracquant::{configs, AlphaContext, Signomial};
use num_complex::Complex64;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::checks::CheckName;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

fn invalid(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        path: if path.is_empty() { "/".into() } else { path.into() },
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Strict,
    Diagnostic,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Strict => "strict",
            Mode::Diagnostic => "diagnostic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub alpha: f64,
    pub n: usize,
    pub lagrangian: Signomial,
    pub truncation_order: u32,
    pub f: Signomial,
    pub g: Signomial,
    pub sample_points: Vec<Vec<f64>>,
    pub mode: Mode,
    pub tolerances: BTreeMap<CheckName, f64>,
    pub seed: u64,
    /// hex SHA-256 of the raw configuration bytes
    pub config_hash: String,
}

impl RunSpec {
    pub fn ctx(&self) -> AlphaContext {
        AlphaContext::new(self.alpha, self.n).expect("validated on parse")
    }
}

pub fn parse_config(path: &Path) -> Result<RunSpec, ConfigError> {
    let raw = std::fs::read(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_config_bytes(&raw)
}

pub fn parse_config_bytes(raw: &[u8]) -> Result<RunSpec, ConfigError> {
    use sha2::{Digest, Sha256};
    let value: Value = serde_json::from_slice(raw).map_err(|e| invalid("", format!("malformed JSON: {e}")))?;
    let root = value.as_object().ok_or_else(|| invalid("", "expected an object"))?;
    let known = [
        "alpha",
        "n",
        "lagrangian",
        "truncation_order",
        "observables",
        "sample_points",
        "mode",
        "tolerances",
        "seed",
    ];
    if let Some(k) = root.keys().find(|k| !known.contains(&k.as_str())) {
        return Err(invalid(&format!("/{k}"), "unknown field"));
    }

    let alpha = number(root, "", "alpha")?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid("/alpha", format!("alpha out of range (0, 1]: {alpha}")));
    }
    let n = integer(root, "", "n")?;
    if !(1..=8).contains(&n) {
        return Err(invalid("/n", format!("n must lie in 1..=8, got {n}")));
    }
    let n = n as usize;
    let dim = 2 * n;
    let lagrangian = terms(field(root, "", "lagrangian")?, "/lagrangian", dim)?;
    if lagrangian.is_zero() {
        return Err(invalid("/lagrangian", "Lagrangian is zero"));
    }
    let k = integer(root, "", "truncation_order")?;
    if !(2..=12).contains(&k) {
        return Err(invalid("/truncation_order", format!("truncation order must lie in 2..=12, got {k}")));
    }
    let obs = field(root, "", "observables")?
        .as_object()
        .ok_or_else(|| invalid("/observables", "expected an object"))?;
    if let Some(k) = obs.keys().find(|k| *k != "f" && *k != "g") {
        return Err(invalid(&format!("/observables/{k}"), "unknown field"));
    }
    let f = terms(field(obs, "/observables", "f")?, "/observables/f", dim)?;
    let g = terms(field(obs, "/observables", "g")?, "/observables/g", dim)?;

    let sample_points = match root.get("sample_points") {
        None => configs::default_sample_points(n),
        Some(v) => points(v, dim)?,
    };
    let mode = match root.get("mode") {
        None => Mode::Strict,
        Some(Value::String(s)) if s == "strict" => Mode::Strict,
        Some(Value::String(s)) if s == "diagnostic" => Mode::Diagnostic,
        Some(other) => return Err(invalid("/mode", format!("expected \"strict\" or \"diagnostic\", got {other}"))),
    };
    let mut tolerances = BTreeMap::new();
    if let Some(v) = root.get("tolerances") {
        let m = v.as_object().ok_or_else(|| invalid("/tolerances", "expected an object"))?;
        for (name, t) in m {
            let p = format!("/tolerances/{name}");
            let check: CheckName = name
                .parse()
                .map_err(|_| invalid(&p, format!("unknown check name {name:?}")))?;
            let t = t.as_f64().ok_or_else(|| invalid(&p, "expected a number"))?;
            if t.is_nan() || t < 0.0 || t.is_infinite() {
                return Err(invalid(&p, "tolerance must be finite and non-negative"));
            }
            tolerances.insert(check, t);
        }
    }
    let seed = match root.get("seed") {
        None => 0,
        Some(v) => v.as_u64().ok_or_else(|| invalid("/seed", "expected a non-negative integer"))?,
    };
    Ok(RunSpec {
        alpha,
        n,
        lagrangian,
        truncation_order: k as u32,
        f,
        g,
        sample_points,
        mode,
        tolerances,
        seed,
        config_hash: hex::encode(Sha256::digest(raw)),
    })
}

fn field<'a>(obj: &'a Map<String, Value>, base: &str, key: &str) -> Result<&'a Value, ConfigError> {
    obj.get(key)
        .ok_or_else(|| invalid(&format!("{base}/{key}"), "missing field"))
}

fn number(obj: &Map<String, Value>, base: &str, key: &str) -> Result<f64, ConfigError> {
    field(obj, base, key)?
        .as_f64()
        .ok_or_else(|| invalid(&format!("{base}/{key}"), "expected a number"))
}

fn integer(obj: &Map<String, Value>, base: &str, key: &str) -> Result<i64, ConfigError> {
    field(obj, base, key)?
        .as_i64()
        .ok_or_else(|| invalid(&format!("{base}/{key}"), "expected an integer"))
}

fn terms(v: &Value, path: &str, dim: usize) -> Result<Signomial, ConfigError> {
    let list = v.as_array().ok_or_else(|| invalid(path, "expected a list of terms"))?;
    let mut raw = Vec::with_capacity(list.len());
    for (i, t) in list.iter().enumerate() {
        let p = format!("{path}/{i}");
        let obj = t.as_object().ok_or_else(|| invalid(&p, "expected an object {c, exp}"))?;
        if let Some(k) = obj.keys().find(|k| *k != "c" && *k != "exp") {
            return Err(invalid(&format!("{p}/{k}"), "unknown field"));
        }
        let c = match field(obj, &p, "c")? {
            Value::Number(x) => Complex64::new(x.as_f64().unwrap_or(f64::NAN), 0.0),
            Value::Array(a) if a.len() == 2 && a.iter().all(Value::is_number) => {
                Complex64::new(a[0].as_f64().unwrap_or(f64::NAN), a[1].as_f64().unwrap_or(f64::NAN))
            }
            _ => return Err(invalid(&format!("{p}/c"), "expected a number or [re, im]")),
        };
        if !c.re.is_finite() || !c.im.is_finite() {
            return Err(invalid(&format!("{p}/c"), "coefficient must be finite"));
        }
        let e = field(obj, &p, "exp")?
            .as_array()
            .ok_or_else(|| invalid(&format!("{p}/exp"), "expected a list of numbers"))?;
        if e.len() != dim {
            return Err(invalid(&format!("{p}/exp"), format!("expected {dim} exponents, got {}", e.len())));
        }
        let mut exps = Vec::with_capacity(dim);
        for (j, x) in e.iter().enumerate() {
            let x = x
                .as_f64()
                .filter(|x| x.is_finite())
                .ok_or_else(|| invalid(&format!("{p}/exp/{j}"), "expected a finite number"))?;
            exps.push(x);
        }
        raw.push((c, exps));
    }
    Signomial::normalize(dim, raw).map_err(|e| invalid(path, e.to_string()))
}

fn points(v: &Value, dim: usize) -> Result<Vec<Vec<f64>>, ConfigError> {
    let list = v.as_array().ok_or_else(|| invalid("/sample_points", "expected a list of points"))?;
    if list.is_empty() {
        return Err(invalid("/sample_points", "need at least one point"));
    }
    let mut out = Vec::with_capacity(list.len());
    for (i, p) in list.iter().enumerate() {
        let path = format!("/sample_points/{i}");
        let coords = p.as_array().ok_or_else(|| invalid(&path, "expected a list of numbers"))?;
        if coords.len() != dim {
            return Err(invalid(&path, format!("expected {dim} coordinates, got {}", coords.len())));
        }
        let mut pt = Vec::with_capacity(dim);
        for (j, x) in coords.iter().enumerate() {
            let x = x
                .as_f64()
                .ok_or_else(|| invalid(&format!("{path}/{j}"), "expected a number"))?;
            if x.is_nan() || x <= 0.0 || x.is_infinite() {
                return Err(invalid(&format!("{path}/{j}"), format!("coordinates must be positive, got {x}")));
            }
            pt.push(x);
        }
        out.push(pt);
    }
    Ok(out)
}

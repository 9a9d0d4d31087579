//! JSON model files.
//!
//! ```json
//! {"name": "m", "state_dim": 2, "control_dim": 1, "modes": ["a", "b"],
//!  "rates": {"a": 1, "b": "1/2"}, "transition": [[0, 1], [1, 0]],
//!  "A": {"a": [[0, 1], [0, 0]], "b": [[0, 0], [0, 0]]}, "B": [[1], [0]],
//!  "C": {"a": {"b": [[0, 0], [0, 0]]}}, "max_jumps": 2, "horizon": 1}
//! ```
//!
//! Scalars are JSON numbers or `"p/q"` strings and are read exactly. Missing
//! `C` entries default to zero.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use super::{ModelError, SwitchSystem};
use crate::matrix::Matrix;
use crate::scalar::{rational_from_json, Rational, Scalar};

type RawMatrix = Vec<Vec<Value>>;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    #[serde(default)]
    name: Option<String>,
    state_dim: usize,
    control_dim: usize,
    modes: Vec<String>,
    rates: BTreeMap<String, Value>,
    transition: RawMatrix,
    #[serde(rename = "A")]
    a: BTreeMap<String, RawMatrix>,
    #[serde(rename = "B")]
    b: RawMatrix,
    #[serde(rename = "C", default)]
    c: BTreeMap<String, BTreeMap<String, RawMatrix>>,
    max_jumps: usize,
    horizon: Value,
}

fn parse_err(msg: impl Into<String>) -> ModelError {
    ModelError::Parse(msg.into())
}

fn matrix(raw: &RawMatrix, what: &str) -> Result<Matrix<Rational>, ModelError> {
    let cols = raw.first().map_or(0, Vec::len);
    if raw.iter().any(|r| r.len() != cols) {
        return Err(parse_err(format!("{what}: ragged matrix")));
    }
    let rows = raw
        .iter()
        .map(|r| r.iter().map(rational_from_json).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Matrix::from_rows(rows))
}

pub fn from_json_value(v: Value) -> Result<SwitchSystem<Rational>, ModelError> {
    let raw: RawModel = serde_json::from_value(v).map_err(|e| parse_err(e.to_string()))?;
    let p = raw.modes.len();
    let index = |name: &str, what: &str| {
        raw.modes
            .iter()
            .position(|m| m == name)
            .ok_or_else(|| parse_err(format!("{what}: unknown mode {name:?}")))
    };
    let mut rates = vec![None; p];
    for (k, v) in &raw.rates {
        rates[index(k, "rates")?] = Some(rational_from_json(v)?);
    }
    let rates = rates
        .into_iter()
        .enumerate()
        .map(|(g, r)| r.ok_or_else(|| parse_err(format!("rates: missing mode {:?}", raw.modes[g]))))
        .collect::<Result<Vec<_>, _>>()?;
    let mut a = vec![None; p];
    for (k, m) in &raw.a {
        a[index(k, "A")?] = Some(matrix(m, &format!("A[{k}]"))?);
    }
    let a = a
        .into_iter()
        .enumerate()
        .map(|(g, m)| m.ok_or_else(|| parse_err(format!("A: missing mode {:?}", raw.modes[g]))))
        .collect::<Result<Vec<_>, _>>()?;
    let n = raw.state_dim;
    let mut c = vec![vec![Matrix::zeros(n, n); p]; p];
    for (g, row) in &raw.c {
        let gi = index(g, "C")?;
        for (t, m) in row {
            c[gi][index(t, "C")?] = matrix(m, &format!("C[{g}][{t}]"))?;
        }
    }
    Ok(SwitchSystem {
        name: raw.name.clone().unwrap_or_else(|| "model".into()),
        state_dim: n,
        control_dim: raw.control_dim,
        modes: raw.modes.clone(),
        rates,
        transition: matrix(&raw.transition, "transition")?,
        a,
        b: matrix(&raw.b, "B")?,
        c,
        max_jumps: raw.max_jumps,
        horizon: rational_from_json(&raw.horizon)?,
    })
}

pub fn from_json_str(s: &str) -> Result<SwitchSystem<Rational>, ModelError> {
    let v: Value = serde_json::from_str(s).map_err(|e| parse_err(e.to_string()))?;
    from_json_value(v)
}

/// Reads a model file. The result is not validated.
pub fn load(path: &Path) -> Result<SwitchSystem<Rational>, ModelError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ModelError::Io { path: path.display().to_string(), source: e })?;
    from_json_str(&text)
}

/// Serialises a model to the file format; zero jump matrices are omitted.
pub fn to_json<S: Scalar>(sys: &SwitchSystem<S>) -> Value {
    let names = &sys.modes;
    let per_mode = |f: &dyn Fn(usize) -> Value| -> serde_json::Map<String, Value> {
        names.iter().enumerate().map(|(g, n)| (n.clone(), f(g))).collect()
    };
    let mut c = serde_json::Map::new();
    for (g, row) in sys.c.iter().enumerate() {
        let inner: serde_json::Map<String, Value> = row
            .iter()
            .enumerate()
            .filter(|(_, m)| !m.is_zero())
            .map(|(t, m)| (names[t].clone(), m.to_json()))
            .collect();
        if !inner.is_empty() {
            c.insert(names[g].clone(), Value::Object(inner));
        }
    }
    serde_json::json!({
        "name": sys.name,
        "state_dim": sys.state_dim,
        "control_dim": sys.control_dim,
        "modes": names,
        "rates": per_mode(&|g| sys.rates[g].to_json()),
        "transition": sys.transition.to_json(),
        "A": per_mode(&|g| sys.a[g].to_json()),
        "B": sys.b.to_json(),
        "C": c,
        "max_jumps": sys.max_jumps,
        "horizon": sys.horizon.to_json(),
    })
}

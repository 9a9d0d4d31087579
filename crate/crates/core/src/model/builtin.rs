//! Built-in models.

use std::collections::BTreeMap;

use super::{ModelError, SwitchSystem};
use crate::matrix::Matrix;
use crate::scalar::{Rational, Scalar};

pub const BUILTIN_NAMES: &[&str] = &["example1", "operon"];

/// Builds a named model. `example1` takes no parameters. `operon` takes the
/// reaction speeds `k3, km3, k4, k5` and the per-mode speeds `k8, k9, k11`
/// (all default to 1); a per-mode value is overridden by e.g. `k8_e2`.
pub fn builtin(name: &str, params: &BTreeMap<String, Rational>) -> Result<SwitchSystem<Rational>, ModelError> {
    match name {
        "example1" => {
            if let Some(k) = params.keys().next() {
                return Err(param(k, "example1 takes no parameters"));
            }
            Ok(example1())
        }
        "operon" => operon(params),
        other => Err(ModelError::UnknownBuiltin(other.to_string())),
    }
}

fn param(name: &str, message: &str) -> ModelError {
    ModelError::Parameter { name: name.to_string(), message: message.to_string() }
}

fn q(v: i64) -> Rational {
    Rational::from_i64(v)
}

/// Four states, two controls, two modes swapping at unit rate.
fn example1() -> SwitchSystem<Rational> {
    let b = Matrix::from_i64(4, 2, &[1, 0, 0, 1, 0, 0, 0, 0]);
    let a = |g: i64| {
        let mut m = Matrix::zeros(4, 4);
        m[(2, 0)] = q(1 + g);
        m[(3, 1)] = q(2 - g);
        m
    };
    let c = |g: i64| {
        let mut m = Matrix::identity(4).neg();
        m[(2, 0)] = q(g);
        m[(3, 1)] = q(1 - g);
        m
    };
    let zero = Matrix::zeros(4, 4);
    SwitchSystem {
        name: "example1".into(),
        state_dim: 4,
        control_dim: 2,
        modes: vec!["0".into(), "1".into()],
        rates: vec![q(1), q(1)],
        transition: Matrix::from_i64(2, 2, &[0, 1, 1, 0]),
        a: vec![a(0), a(1)],
        b,
        c: vec![vec![zero.clone(), c(0)], vec![c(1), zero]],
        max_jumps: 2,
        horizon: q(1),
    }
}

const OPERON_MODES: [&str; 3] = ["e1", "e2", "e3"];
const GLOBAL_RATES: [&str; 4] = ["k3", "km3", "k4", "k5"];
const MODE_RATES: [&str; 3] = ["k8", "k9", "k11"];

/// Three-state gene network with a three-mode promoter. Only jumps out of
/// `e3` carry a burst into the second species.
fn operon(params: &BTreeMap<String, Rational>) -> Result<SwitchSystem<Rational>, ModelError> {
    for key in params.keys() {
        let known = GLOBAL_RATES.contains(&key.as_str())
            || MODE_RATES.contains(&key.as_str())
            || MODE_RATES
                .iter()
                .any(|r| OPERON_MODES.iter().any(|m| *key == format!("{r}_{m}")));
        if !known {
            return Err(param(key, "unknown operon parameter"));
        }
    }
    for (key, v) in params {
        if !v.is_positive() {
            return Err(param(key, "reaction speeds must be positive"));
        }
    }
    let get = |k: &str| params.get(k).cloned().unwrap_or_else(|| q(1));
    let per_mode = |k: &str, g: usize| {
        params
            .get(&format!("{k}_{}", OPERON_MODES[g]))
            .cloned()
            .unwrap_or_else(|| get(k))
    };
    let (k3, km3, k4, k5) = (get("k3"), get("km3"), get("k4"), get("k5"));
    let out23 = km3.clone() + k4.clone();
    let transition = Matrix::from_rows(vec![
        vec![q(0), q(1), q(0)],
        vec![km3 / out23.clone(), q(0), k4 / out23.clone()],
        vec![q(1), q(0), q(0)],
    ]);
    let a = (0..3)
        .map(|g| {
            let (k8, k9, k11) = (per_mode("k8", g), per_mode("k9", g), per_mode("k11", g));
            Matrix::from_rows(vec![
                vec![-k8.clone(), q(0), q(0)],
                vec![k8, -k9.clone(), q(0)],
                vec![q(0), k9, -k11],
            ])
        })
        .collect();
    let burst = {
        let mut m = Matrix::zeros(3, 3);
        m[(1, 0)] = q(1);
        m
    };
    // The burst applies to every jump out of e3; only e3 -> e1 has positive
    // probability, so the other pairs are left at zero.
    let c = (0..3)
        .map(|g| (0..3).map(|t| if (g, t) == (2, 0) { burst.clone() } else { Matrix::zeros(3, 3) }).collect())
        .collect();
    Ok(SwitchSystem {
        name: "operon".into(),
        state_dim: 3,
        control_dim: 1,
        modes: OPERON_MODES.iter().map(|s| s.to_string()).collect(),
        rates: vec![k3, out23, k5],
        transition,
        a,
        b: Matrix::from_i64(3, 1, &[1, 0, 0]),
        c,
        max_jumps: 2,
        horizon: q(1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(kv: &[(&str, i64)]) -> BTreeMap<String, Rational> {
        kv.iter().map(|(k, v)| (k.to_string(), q(*v))).collect()
    }

    #[test]
    fn example1_entries() {
        let s = builtin("example1", &BTreeMap::new()).unwrap();
        assert_eq!(s.b.column(0), vec![q(1), q(0), q(0), q(0)]);
        assert_eq!(s.a[0][(2, 0)], q(1));
        assert_eq!(s.c[0][1][(3, 1)], q(1));
        assert!(s.validate().ok);
    }

    #[test]
    fn operon_rates_and_transition() {
        let s = builtin("operon", &params(&[("k3", 1), ("km3", 1), ("k4", 1), ("k5", 2)])).unwrap();
        assert_eq!(s.rates, vec![q(1), q(2), q(2)]);
        assert_eq!(s.transition.row(1), &[Rational::ratio(1, 2), q(0), Rational::ratio(1, 2)]);
        let report = s.validate();
        assert!(report.ok);
        assert_eq!(report.warnings().count(), 0);
    }

    #[test]
    fn operon_rejects_nonpositive_and_unknown() {
        assert!(builtin("operon", &params(&[("k4", 0)])).is_err());
        assert!(builtin("operon", &params(&[("k12", 1)])).is_err());
        assert!(builtin("nope", &BTreeMap::new()).is_err());
        let s = builtin("operon", &params(&[("k8_e2", 5)])).unwrap();
        assert_eq!(s.a[1][(0, 0)], q(-5));
        assert_eq!(s.a[0][(0, 0)], q(-1));
    }
}

//! Admissible controls.

use std::fmt;
use std::str::FromStr;

use serde_json::{json, Value};

use super::McError;
use crate::matrix::Matrix;
use crate::model::SwitchSystem;

/// Control law, held constant on each integration step.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlSpec {
    Zero,
    Constant(Vec<f64>),
    /// Values spread evenly over the integration steps of `[0, T]`.
    Schedule(Vec<Vec<f64>>),
    /// `u = K(γ) x`, one gain per mode.
    Feedback(Vec<Matrix<f64>>),
}

impl ControlSpec {
    pub fn is_zero(&self) -> bool {
        match self {
            ControlSpec::Zero => true,
            ControlSpec::Constant(u) => u.iter().all(|&v| v == 0.0),
            ControlSpec::Schedule(us) => us.iter().flatten().all(|&v| v == 0.0),
            ControlSpec::Feedback(k) => k.iter().all(Matrix::is_zero),
        }
    }

    pub(crate) fn check(&self, sys: &SwitchSystem<f64>) -> Result<(), McError> {
        let m = sys.control_dim;
        let bad = |what: String| Err(McError::Control(what));
        match self {
            ControlSpec::Zero => Ok(()),
            ControlSpec::Constant(u) if u.len() != m => bad(format!("constant control needs {m} entries")),
            ControlSpec::Schedule(us) if us.is_empty() => bad("empty schedule".into()),
            ControlSpec::Schedule(us) if us.iter().any(|u| u.len() != m) => {
                bad(format!("every schedule value needs {m} entries"))
            }
            ControlSpec::Feedback(k) if k.len() != sys.mode_count() => bad("one gain per mode is needed".into()),
            ControlSpec::Feedback(k) if k.iter().any(|g| g.shape() != (m, sys.state_dim)) => {
                bad(format!("gains must be {m}x{}", sys.state_dim))
            }
            _ if self.values().any(|v| !v.is_finite()) => bad("non-finite entry".into()),
            _ => Ok(()),
        }
    }

    fn values(&self) -> Box<dyn Iterator<Item = f64> + '_> {
        match self {
            ControlSpec::Zero => Box::new(std::iter::empty()),
            ControlSpec::Constant(u) => Box::new(u.iter().copied()),
            ControlSpec::Schedule(us) => Box::new(us.iter().flatten().copied()),
            ControlSpec::Feedback(k) => Box::new(k.iter().flat_map(|g| g.data().iter().copied())),
        }
    }

    pub(crate) fn pieces(&self) -> usize {
        match self {
            ControlSpec::Schedule(us) => us.len(),
            _ => 1,
        }
    }

    pub(crate) fn piece_at(&self, step: usize, steps: usize) -> usize {
        let p = self.pieces();
        (step * p / steps.max(1)).min(p - 1)
    }

    pub(crate) fn open_loop(&self, piece: usize) -> Option<&[f64]> {
        match self {
            ControlSpec::Constant(u) => Some(u),
            ControlSpec::Schedule(us) => Some(&us[piece]),
            _ => None,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            ControlSpec::Zero => json!({"kind": "zero"}),
            ControlSpec::Constant(u) => json!({"kind": "constant", "value": u}),
            ControlSpec::Schedule(us) => json!({"kind": "schedule", "values": us}),
            ControlSpec::Feedback(k) => {
                json!({"kind": "feedback", "gains": k.iter().map(Matrix::to_json).collect::<Vec<_>>()})
            }
        }
    }
}

fn numbers(s: &str) -> Result<Vec<f64>, McError> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| McError::Control(format!("{x:?}: {e}"))))
        .collect()
}

/// `zero`, `const:u1,u2`, `sched:u1,u2;v1,v2;...` or
/// `fb:<rows>x<cols>:k11,k12,...;...` with one row-major gain per mode.
impl FromStr for ControlSpec {
    type Err = McError;

    fn from_str(s: &str) -> Result<Self, McError> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        match kind {
            "zero" if rest.is_empty() => Ok(ControlSpec::Zero),
            "const" => Ok(ControlSpec::Constant(numbers(rest)?)),
            "sched" => Ok(ControlSpec::Schedule(rest.split(';').map(numbers).collect::<Result<_, _>>()?)),
            "fb" => {
                let (shape, gains) = rest
                    .split_once(':')
                    .ok_or_else(|| McError::Control("fb needs <rows>x<cols>:<entries>".into()))?;
                let (r, c) = shape
                    .split_once('x')
                    .and_then(|(r, c)| Some((r.parse::<usize>().ok()?, c.parse::<usize>().ok()?)))
                    .ok_or_else(|| McError::Control(format!("bad gain shape {shape:?}")))?;
                let mats = gains
                    .split(';')
                    .map(|g| {
                        let v = numbers(g)?;
                        if v.len() != r * c {
                            return Err(McError::Control(format!("gain needs {} entries", r * c)));
                        }
                        Ok(Matrix::new(r, c, v))
                    })
                    .collect::<Result<_, _>>()?;
                Ok(ControlSpec::Feedback(mats))
            }
            _ => Err(McError::Control(format!("unknown control {s:?}"))),
        }
    }
}

impl fmt::Display for ControlSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        match self {
            ControlSpec::Zero => write!(f, "zero"),
            ControlSpec::Constant(u) => write!(f, "const:{}", join(u)),
            ControlSpec::Schedule(us) => {
                write!(f, "sched:{}", us.iter().map(|u| join(u)).collect::<Vec<_>>().join(";"))
            }
            ControlSpec::Feedback(k) => {
                let (r, c) = k.first().map_or((0, 0), Matrix::shape);
                write!(f, "fb:{r}x{c}:{}", k.iter().map(|g| join(g.data())).collect::<Vec<_>>().join(";"))
            }
        }
    }
}

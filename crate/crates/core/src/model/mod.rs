//! Switch-system data model.

mod builtin;
mod file;
mod trajectory;

pub use builtin::{builtin, BUILTIN_NAMES};
pub use file::{from_json_str, from_json_value, load, to_json};
pub use trajectory::{Mark, ModeTrajectory, TrajectoryError};

use serde::Serialize;
use thiserror::Error;

use crate::matrix::Matrix;
use crate::scalar::{ParseScalarError, Scalar};
use crate::subspace::{Subspace, Tolerance};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unknown mode {0:?}")]
    UnknownMode(String),
    #[error("unknown builtin model {0:?}")]
    UnknownBuiltin(String),
    #[error("parameter {name}: {message}")]
    Parameter { name: String, message: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Scalar(#[from] ParseScalarError),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid model: {}", summary(.0))]
    Invalid(ValidationReport),
}

impl ModelError {
    /// True for errors caused by malformed input rather than a
    /// well-formed but inconsistent model.
    pub fn is_parse_error(&self) -> bool {
        matches!(self, Self::Parse(_) | Self::Scalar(_))
    }
}

fn summary(r: &ValidationReport) -> String {
    r.errors().map(|i| format!("{}: {}", i.location, i.message)).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Issue {
    pub severity: Severity,
    pub location: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Warning)
    }
}

/// Linear dynamics `dX = [A(Γ)X + Bu]dt + C(Γ-, θ)X dq̃` driven by a
/// continuous-time Markov chain on finitely many modes, stopped after
/// `max_jumps` jumps.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchSystem<S> {
    pub name: String,
    pub state_dim: usize,
    pub control_dim: usize,
    pub modes: Vec<String>,
    /// Jump rate of each mode.
    pub rates: Vec<S>,
    /// Row-stochastic post-jump distribution with zero diagonal.
    pub transition: Matrix<S>,
    pub a: Vec<Matrix<S>>,
    pub b: Matrix<S>,
    /// `c[g][t]` is the jump matrix for a jump from mode `g` to mode `t`.
    pub c: Vec<Vec<Matrix<S>>>,
    pub max_jumps: usize,
    pub horizon: S,
}

impl<S: Scalar> SwitchSystem<S> {
    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn mode_index(&self, name: &str) -> Result<usize, ModelError> {
        self.modes
            .iter()
            .position(|m| m == name)
            .ok_or_else(|| ModelError::UnknownMode(name.to_string()))
    }

    /// `λ(g) Q(g, t)`.
    pub fn jump_weight(&self, g: usize, t: usize) -> S {
        self.rates[g].clone() * self.transition[(g, t)].clone()
    }

    /// True when jumps `g -> t` happen with positive intensity.
    pub fn is_active(&self, g: usize, t: usize) -> bool {
        self.jump_weight(g, t).is_positive()
    }

    /// Targets reachable from `g` in one jump.
    pub fn active_targets(&self, g: usize) -> Vec<usize> {
        (0..self.mode_count()).filter(|&t| self.is_active(g, t)).collect()
    }

    /// `A(g)^T - sum_t λ(g) Q(g,t) (C(g,t)^T + I)`.
    pub fn dual_generator(&self, g: usize) -> Matrix<S> {
        let n = self.state_dim;
        let mut out = self.a[g].transpose();
        for t in self.active_targets(g) {
            let ct_plus_i = self.c[g][t].transpose().add(&Matrix::identity(n));
            out = out.sub(&ct_plus_i.scale(&self.jump_weight(g, t)));
        }
        out
    }

    pub fn dual_generator_for(&self, mode: &str) -> Result<Matrix<S>, ModelError> {
        Ok(self.dual_generator(self.mode_index(mode)?))
    }

    /// `A(g) - sum_t λ(g) Q(g,t) C(g,t)`, the drift between jumps once the
    /// jump martingale is compensated.
    pub fn compensated_drift(&self, g: usize) -> Matrix<S> {
        let mut out = self.a[g].clone();
        for t in self.active_targets(g) {
            out = out.sub(&self.c[g][t].scale(&self.jump_weight(g, t)));
        }
        out
    }

    /// `C(g,t)^T + I`.
    pub fn jump_adjoint(&self, g: usize, t: usize) -> Matrix<S> {
        self.c[g][t].transpose().add(&Matrix::identity(self.state_dim))
    }

    pub fn b_star(&self) -> Matrix<S> {
        self.b.transpose()
    }

    pub fn ker_b_star(&self, tol: &Tolerance) -> Subspace<S> {
        Subspace::kernel(&self.b_star(), tol)
    }

    /// True when the transition probability of every step is positive.
    pub fn is_reachable_sequence(&self, modes: &[usize]) -> bool {
        modes.windows(2).all(|w| self.is_active(w[0], w[1]))
    }

    pub fn with_max_jumps(mut self, m: usize) -> Self {
        self.max_jumps = m;
        self
    }

    pub fn with_horizon(mut self, t: S) -> Self {
        self.horizon = t;
        self
    }

    pub fn horizon_f64(&self) -> f64 {
        self.horizon.to_f64()
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T + Copy) -> SwitchSystem<T> {
        SwitchSystem {
            name: self.name.clone(),
            state_dim: self.state_dim,
            control_dim: self.control_dim,
            modes: self.modes.clone(),
            rates: self.rates.iter().map(f).collect(),
            transition: self.transition.map(f),
            a: self.a.iter().map(|m| m.map(f)).collect(),
            b: self.b.map(f),
            c: self.c.iter().map(|row| row.iter().map(|m| m.map(f)).collect()).collect(),
            max_jumps: self.max_jumps,
            horizon: f(&self.horizon),
        }
    }

    pub fn to_f64(&self) -> SwitchSystem<f64> {
        self.map(|x| x.to_f64())
    }

    /// Validation issues; `ok` iff there is no error-severity issue.
    pub fn validate(&self) -> ValidationReport {
        let mut issues = Vec::new();
        let mut err = |loc: String, msg: String| {
            issues.push(Issue { severity: Severity::Error, location: loc, message: msg });
        };
        let (n, d, p) = (self.state_dim, self.control_dim, self.mode_count());
        if n == 0 {
            err("state_dim".into(), "must be positive".into());
        }
        if d == 0 {
            err("control_dim".into(), "must be positive".into());
        }
        if p == 0 {
            err("modes".into(), "at least one mode required".into());
        }
        for (i, m) in self.modes.iter().enumerate() {
            if self.modes[..i].contains(m) {
                err("modes".into(), format!("duplicate mode {m:?}"));
            }
        }
        if self.max_jumps == 0 {
            err("max_jumps".into(), "must be positive".into());
        }
        if !self.horizon.is_finite() || !self.horizon.is_positive() {
            err("horizon".into(), "must be positive and finite".into());
        }
        let shape = |m: &Matrix<S>, r: usize, c: usize| m.shape() == (r, c);
        if self.rates.len() != p {
            err("rates".into(), format!("expected {p} rates, got {}", self.rates.len()));
        }
        if !shape(&self.transition, p, p) {
            err("transition".into(), format!("expected {p}x{p}"));
        }
        if !shape(&self.b, n, d) {
            err("B".into(), format!("expected {n}x{d}, got {}x{}", self.b.rows(), self.b.cols()));
        } else if !self.b.all_finite() {
            err("B".into(), "non-finite entry".into());
        }
        if self.a.len() != p {
            err("A".into(), format!("expected {p} matrices"));
        }
        for (g, a) in self.a.iter().enumerate() {
            let loc = format!("A[{}]", self.modes.get(g).map_or("?", String::as_str));
            if !shape(a, n, n) {
                err(loc, format!("expected {n}x{n}, got {}x{}", a.rows(), a.cols()));
            } else if !a.all_finite() {
                err(loc, "non-finite entry".into());
            }
        }
        let c_ok = self.c.len() == p && self.c.iter().all(|row| row.len() == p);
        if !c_ok {
            err("C".into(), format!("expected {p}x{p} family of matrices"));
        }
        let structural_ok = self.rates.len() == p && shape(&self.transition, p, p) && c_ok;
        let mut warnings = Vec::new();
        if structural_ok {
            for g in 0..p {
                let name = &self.modes[g];
                let rate = &self.rates[g];
                if !rate.is_finite() || rate.to_f64() < 0.0 {
                    err(format!("rates[{name}]"), "rate must be finite and nonnegative".into());
                }
                let row: Vec<S> = self.transition.row(g).to_vec();
                if row.iter().any(|q| !q.is_finite() || q.to_f64() < 0.0) {
                    err(format!("transition[{name}]"), "entries must be finite and nonnegative".into());
                }
                if !row[g].is_zero() {
                    err(format!("transition[{name}][{name}]"), "self-transition forbidden".into());
                }
                let sum = row.iter().fold(S::zero(), |acc, q| acc + q.clone());
                let all_zero = row.iter().all(|q| q.is_zero());
                if rate.is_zero() {
                    warnings.push((format!("rates[{name}]"), "rate is zero: absorbing mode".to_string()));
                }
                let stochastic = if S::EXACT {
                    sum == S::one()
                } else {
                    (sum.to_f64() - 1.0).abs() <= 1e-12 * p as f64
                };
                if !stochastic && !(all_zero && rate.is_zero()) {
                    err(format!("transition[{name}]"), "transition row not stochastic".into());
                }
                for t in 0..p {
                    let c = &self.c[g][t];
                    let loc = format!("C[{name}][{}]", self.modes[t]);
                    if !shape(c, n, n) {
                        err(loc, format!("expected {n}x{n}, got {}x{}", c.rows(), c.cols()));
                        continue;
                    }
                    if !c.all_finite() {
                        err(loc.clone(), "non-finite entry".into());
                    }
                    if !c.is_zero() && !self.transition[(g, t)].is_positive() {
                        warnings.push((loc, "jump matrix on a pair with zero transition probability is ignored".into()));
                    }
                }
            }
        }
        for (loc, msg) in warnings {
            issues.push(Issue { severity: Severity::Warning, location: loc, message: msg });
        }
        let ok = issues.iter().all(|i| i.severity != Severity::Error);
        ValidationReport { ok, issues }
    }

    /// Validates and returns the system, or the report as an error.
    pub fn validated(self) -> Result<Self, ModelError> {
        let report = self.validate();
        if report.ok {
            Ok(self)
        } else {
            Err(ModelError::Invalid(report))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn ex1() -> SwitchSystem<Rational> {
        builtin("example1", &Default::default()).unwrap()
    }

    #[test]
    fn example1_dual_generator() {
        let s = ex1();
        let expected = Matrix::from_i64(4, 4, &[0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(s.dual_generator(0), expected);
        assert_eq!(s.dual_generator(1), expected);
        assert!(s.validate().ok);
    }

    #[test]
    fn minus_identity_jumps_leave_a_star() {
        let mut s = ex1();
        for g in 0..2 {
            for t in 0..2 {
                s.c[g][t] = Matrix::identity(4).neg();
            }
        }
        assert_eq!(s.dual_generator(0), s.a[0].transpose());
        let mut s = ex1();
        s.rates[1] = Rational::from_i64(0);
        assert_eq!(s.dual_generator(1), s.a[1].transpose());
    }

    #[test]
    fn validation_errors() {
        let mut s = ex1();
        s.transition[(0, 1)] = Rational::ratio(9, 10);
        let r = s.validate();
        assert!(!r.ok);
        assert!(r.errors().any(|i| i.message.contains("not stochastic")));

        let mut s = ex1();
        s.transition[(0, 0)] = Rational::from_i64(1);
        s.transition[(0, 1)] = Rational::from_i64(0);
        let r = s.validate();
        assert!(r.errors().any(|i| i.message.contains("self-transition forbidden")));

        let mut s = ex1();
        s.rates[0] = Rational::from_i64(0);
        let r = s.validate();
        assert!(r.ok);
        assert_eq!(r.warnings().count(), 1);
    }

    #[test]
    fn compensated_drift_example1() {
        let s = ex1().to_f64();
        // A(0) - C(0,1): identity plus the (3,1) entry of A(0) and minus the (4,2) entry of C.
        let f = s.compensated_drift(0);
        assert_eq!(f[(0, 0)], 1.0);
        assert_eq!(f[(2, 0)], 1.0);
        assert_eq!(f[(3, 1)], 1.0);
    }
}

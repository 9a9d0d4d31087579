//! The backward chain of invariant subspaces and the controllability
//! verdicts read off it.
//!
//! For each mode `g` and level `n = M, M-1, ..., 0`:
//!
//! * `V^M_g = ker B*`
//! * `V^n_g` is the largest subspace of `ker B*` that is invariant for
//!   `A*(g)` modulo the images of `(C(g,t)^T + I) P_{V^{n+1}_t}` over the
//!   targets `t` reachable from `g`, where `A*(g)` is the dual generator.
//!
//! The system is approximately null-controllable from `g0` iff `V^0_{g0} = {0}`.

use serde_json::{json, Value};
use thiserror::Error;

use crate::matrix::Matrix;
use crate::model::{ModelError, SwitchSystem};
use crate::scalar::Scalar;
use crate::subspace::{Subspace, SubspaceError, Tolerance};

#[derive(Debug, Error)]
pub enum CriteriaError {
    #[error(transparent)]
    Subspace(#[from] SubspaceError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("precondition failed: {0}")]
    Precondition(String),
}

/// All levels of the chain. Levels below `stabilized_at` coincide with it.
#[derive(Debug, Clone, PartialEq)]
pub struct VChain<S> {
    max_jumps: usize,
    stabilized_at: usize,
    /// `levels[i]` holds level `stabilized_at + i`, one subspace per mode.
    levels: Vec<Vec<Subspace<S>>>,
}

impl<S: Scalar> VChain<S> {
    pub fn max_jumps(&self) -> usize {
        self.max_jumps
    }

    /// Largest `s` with `V^j = V^s` for every `j <= s`.
    pub fn stabilized_at(&self) -> usize {
        self.stabilized_at
    }

    pub fn mode_count(&self) -> usize {
        self.levels[0].len()
    }

    /// `V^n_g` for `n <= max_jumps`.
    pub fn get(&self, n: usize, g: usize) -> &Subspace<S> {
        &self.level(n)[g]
    }

    /// The whole family at level `n`.
    pub fn level(&self, n: usize) -> &[Subspace<S>] {
        assert!(n <= self.max_jumps, "level {n} above the jump cap {}", self.max_jumps);
        &self.levels[n.saturating_sub(self.stabilized_at)]
    }

    /// `dims[n][g]` for `n = 0..=M`.
    pub fn dims(&self) -> Vec<Vec<usize>> {
        (0..=self.max_jumps)
            .map(|n| self.level(n).iter().map(Subspace::dim).collect())
            .collect()
    }

    /// Bounded summary: dimensions of every level and bases of the
    /// distinct levels.
    pub fn to_json(&self, modes: &[String]) -> Value {
        let distinct: Vec<Value> = self
            .levels
            .iter()
            .enumerate()
            .map(|(i, fam)| {
                let per_mode: serde_json::Map<String, Value> =
                    modes.iter().cloned().zip(fam.iter().map(Subspace::to_json)).collect();
                json!({"level": self.stabilized_at + i, "spaces": per_mode})
            })
            .collect();
        let dims: Vec<Value> = if self.max_jumps <= 64 {
            self.dims().into_iter().map(|d| json!(d)).collect()
        } else {
            Vec::new()
        };
        json!({
            "max_jumps": self.max_jumps,
            "stabilized_at": self.stabilized_at,
            "dims_by_level": dims,
            "levels": distinct,
        })
    }
}

/// Per-mode dual generators, computed once per chain.
fn dual_generators<S: Scalar>(sys: &SwitchSystem<S>) -> Vec<Matrix<S>> {
    (0..sys.mode_count()).map(|g| sys.dual_generator(g)).collect()
}

/// One backward step: the level-`n` family from the level-`n+1` family.
pub fn chain_step<S: Scalar>(
    sys: &SwitchSystem<S>,
    generators: &[Matrix<S>],
    next: &[Subspace<S>],
    kernel: &Subspace<S>,
    tol: &Tolerance,
) -> Result<Vec<Subspace<S>>, SubspaceError> {
    (0..sys.mode_count())
        .map(|g| {
            let cs: Vec<Matrix<S>> = sys
                .active_targets(g)
                .into_iter()
                .filter(|&t| !next[t].is_zero())
                .map(|t| sys.jump_adjoint(g, t).matmul(&next[t].projector()))
                .collect();
            Subspace::largest_invariant(&generators[g], &cs, kernel, tol)
        })
        .collect()
}

fn same_family<S: Scalar>(a: &[Subspace<S>], b: &[Subspace<S>], tol: &Tolerance) -> Result<bool, SubspaceError> {
    for (u, v) in a.iter().zip(b) {
        if !u.equals(v, tol)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Computes the chain from level `M` down, stopping as soon as one level
/// repeats the one above it.
pub fn v_chain<S: Scalar>(sys: &SwitchSystem<S>, tol: &Tolerance) -> Result<VChain<S>, CriteriaError> {
    let m = sys.max_jumps;
    let kernel = sys.ker_b_star(tol);
    let generators = dual_generators(sys);
    let mut levels = vec![vec![kernel.clone(); sys.mode_count()]];
    let mut stabilized_at = 0;
    for n in (0..m).rev() {
        let next = chain_step(sys, &generators, &levels[0], &kernel, tol)?;
        if same_family(&next, &levels[0], tol)? {
            stabilized_at = n + 1;
            break;
        }
        levels.insert(0, next);
    }
    Ok(VChain { max_jumps: m, stabilized_at, levels })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    NullControllable,
    ApproxControllableSufficient,
    NoNoiseCriterion,
    ModeIndependentCriterion,
}

/// A yes/no answer with the subspace that decided it.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict<S> {
    pub property: Property,
    /// `None` when the verdict concerns every initial mode.
    pub initial_mode: Option<usize>,
    pub answer: bool,
    /// The subspace whose triviality is the answer: `V^0_{g0}` for
    /// null-controllability, the largest per-mode space (or zero) for the
    /// sufficient condition.
    pub deciding: Subspace<S>,
    pub deciding_mode: Option<usize>,
    /// Every per-mode space, for verdicts that quantify over modes.
    pub per_mode: Vec<Subspace<S>>,
}

impl<S: Scalar> Verdict<S> {
    pub fn to_json(&self, modes: &[String]) -> Value {
        json!({
            "property": self.property,
            "initial_mode": self.initial_mode.map(|g| modes[g].clone()),
            "answer": self.answer,
            "deciding_mode": self.deciding_mode.map(|g| modes[g].clone()),
            "deciding_subspace": self.deciding.to_json(),
            "per_mode": modes.iter().zip(&self.per_mode).map(|(m, v)| json!({"mode": m, "subspace": v.to_json()})).collect::<Vec<_>>(),
        })
    }
}

/// Reads the null-controllability verdict for `g0` off a computed chain.
pub fn null_verdict<S: Scalar>(chain: &VChain<S>, g0: usize) -> Verdict<S> {
    let v0 = chain.get(0, g0).clone();
    Verdict {
        property: Property::NullControllable,
        initial_mode: Some(g0),
        answer: v0.is_zero(),
        deciding: v0,
        deciding_mode: Some(g0),
        per_mode: Vec::new(),
    }
}

pub fn is_null_controllable<S: Scalar>(
    sys: &SwitchSystem<S>,
    g0: usize,
    tol: &Tolerance,
) -> Result<Verdict<S>, CriteriaError> {
    check_mode(sys, g0)?;
    Ok(null_verdict(&v_chain(sys, tol)?, g0))
}

fn check_mode<S: Scalar>(sys: &SwitchSystem<S>, g: usize) -> Result<(), CriteriaError> {
    if g < sys.mode_count() {
        Ok(())
    } else {
        Err(ModelError::UnknownMode(g.to_string()).into())
    }
}

/// Per-mode spaces of the sufficient condition: the largest subspace of
/// `ker B*` invariant for `A*(g)` modulo `(C(g,t)^T + I) P_{ker B*}`.
pub fn sufficient_condition_spaces<S: Scalar>(
    sys: &SwitchSystem<S>,
    tol: &Tolerance,
) -> Result<Vec<Subspace<S>>, CriteriaError> {
    let kernel = sys.ker_b_star(tol);
    let family = vec![kernel.clone(); sys.mode_count()];
    Ok(chain_step(sys, &dual_generators(sys), &family, &kernel, tol)?)
}

/// True answer implies approximate controllability for every horizon and
/// initial mode; a false answer is inconclusive.
pub fn approx_controllable_sufficient<S: Scalar>(
    sys: &SwitchSystem<S>,
    tol: &Tolerance,
) -> Result<Verdict<S>, CriteriaError> {
    let spaces = sufficient_condition_spaces(sys, tol)?;
    // Report the largest offending space, the first one among ties.
    let worst = (0..spaces.len())
        .filter(|&g| !spaces[g].is_zero())
        .fold(None, |best: Option<usize>, g| match best {
            Some(b) if spaces[b].dim() >= spaces[g].dim() => Some(b),
            _ => Some(g),
        });
    Ok(Verdict {
        property: Property::ApproxControllableSufficient,
        initial_mode: None,
        answer: worst.is_none(),
        deciding: worst.map_or_else(|| Subspace::zero(sys.state_dim), |g| spaces[g].clone()),
        deciding_mode: worst,
        per_mode: spaces,
    })
}

fn a_is_mode_independent<S: Scalar>(sys: &SwitchSystem<S>) -> bool {
    sys.a.iter().all(|a| *a == sys.a[0])
}

/// Shortcut for systems without state jumps.
///
/// Requires `C = 0` on every reachable pair, a mode-independent `A`, and
/// `M >= dim ker B*`. Under these conditions the chain bottoms out at the
/// largest `A^T`-invariant subspace of `ker B*`, and the answer is whether
/// that subspace is trivial.
pub fn criterion_no_noise<S: Scalar>(
    sys: &SwitchSystem<S>,
    g0: usize,
    tol: &Tolerance,
) -> Result<Verdict<S>, CriteriaError> {
    check_mode(sys, g0)?;
    for g in 0..sys.mode_count() {
        for t in sys.active_targets(g) {
            if !sys.c[g][t].is_zero() {
                return Err(CriteriaError::Precondition(format!(
                    "jump matrix {} -> {} is nonzero",
                    sys.modes[g], sys.modes[t]
                )));
            }
        }
    }
    if !a_is_mode_independent(sys) {
        return Err(CriteriaError::Precondition("A depends on the mode".into()));
    }
    let kernel = sys.ker_b_star(tol);
    if sys.max_jumps < kernel.dim() {
        return Err(CriteriaError::Precondition(format!(
            "max_jumps {} is below dim ker B* = {}",
            sys.max_jumps,
            kernel.dim()
        )));
    }
    let v = Subspace::largest_invariant(&sys.a[g0].transpose(), &[], &kernel, tol)?;
    Ok(Verdict {
        property: Property::NoNoiseCriterion,
        initial_mode: Some(g0),
        answer: v.is_zero(),
        deciding: v,
        deciding_mode: Some(g0),
        per_mode: Vec::new(),
    })
}

/// Distinct jump matrices out of `g` with their total transition weight.
fn jump_distribution<S: Scalar>(sys: &SwitchSystem<S>, g: usize) -> Vec<(Matrix<S>, S)> {
    let mut out: Vec<(Matrix<S>, S)> = Vec::new();
    for t in 0..sys.mode_count() {
        let q = sys.transition[(g, t)].clone();
        if !q.is_positive() {
            continue;
        }
        match out.iter_mut().find(|(c, _)| *c == sys.c[g][t]) {
            Some((_, w)) => *w = w.clone() + q,
            None => out.push((sys.c[g][t].clone(), q)),
        }
    }
    out
}

fn same_distribution<S: Scalar>(a: &[(Matrix<S>, S)], b: &[(Matrix<S>, S)], tol: f64) -> bool {
    let close = |x: &S, y: &S| {
        if S::EXACT {
            x == y
        } else {
            (x.to_f64() - y.to_f64()).abs() <= tol
        }
    };
    a.len() == b.len()
        && a.iter().all(|(c, w)| b.iter().any(|(c2, w2)| c == c2 && close(w, w2)))
}

/// Shortcut for systems whose coefficients do not depend on the mode.
///
/// Requires a mode-independent `A` and rate, the same distribution of jump
/// matrices out of every mode, and `M >= N + 1`. The answer is whether the
/// largest subspace `V` of `ker B*` with `A^T V` inside `V + sum_j C_j^T V`
/// is trivial, where `C_j` ranges over the jump matrices.
pub fn criterion_mode_independent<S: Scalar>(
    sys: &SwitchSystem<S>,
    tol: &Tolerance,
) -> Result<Verdict<S>, CriteriaError> {
    let p = sys.mode_count();
    if !a_is_mode_independent(sys) {
        return Err(CriteriaError::Precondition("A depends on the mode".into()));
    }
    if sys.rates.iter().any(|r| *r != sys.rates[0]) {
        return Err(CriteriaError::Precondition("rate depends on the mode".into()));
    }
    let dist0 = jump_distribution(sys, 0);
    let tol_w = if S::EXACT { 0.0 } else { tol.membership_tol };
    for g in 1..p {
        if !same_distribution(&dist0, &jump_distribution(sys, g), tol_w) {
            return Err(CriteriaError::Precondition(format!(
                "jump distribution out of mode {} differs from mode {}",
                sys.modes[g], sys.modes[0]
            )));
        }
    }
    if sys.max_jumps < sys.state_dim + 1 {
        return Err(CriteriaError::Precondition(format!(
            "max_jumps {} is below N + 1 = {}",
            sys.max_jumps,
            sys.state_dim + 1
        )));
    }
    let kernel = sys.ker_b_star(tol);
    let at = sys.a[0].transpose();
    let jumps: Vec<Matrix<S>> = if sys.rates[0].is_positive() {
        dist0.iter().map(|(c, _)| c.transpose()).collect()
    } else {
        Vec::new()
    };
    let mut v = kernel.clone();
    for _ in 0..=kernel.dim() {
        let p_v = v.projector();
        let cs: Vec<Matrix<S>> = jumps.iter().map(|c| c.matmul(&p_v)).collect();
        let next = Subspace::largest_invariant(&at, &cs, &kernel, tol)?;
        if next.dim() == v.dim() {
            break;
        }
        v = next;
    }
    Ok(Verdict {
        property: Property::ModeIndependentCriterion,
        initial_mode: None,
        answer: v.is_zero(),
        deciding: v,
        deciding_mode: None,
        per_mode: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::model::builtin;
    use crate::scalar::Rational;

    const EX: Tolerance = Tolerance::exact();

    fn coord(n: usize, idx: &[usize]) -> Subspace<Rational> {
        Subspace::coordinate(n, idx, &EX)
    }

    #[test]
    fn example1_chain() {
        let sys = builtin("example1", &BTreeMap::new()).unwrap();
        let chain = v_chain(&sys, &EX).unwrap();
        assert_eq!(chain.get(2, 0), &coord(4, &[2, 3]));
        assert_eq!(chain.get(1, 0), &coord(4, &[3]));
        assert_eq!(chain.get(1, 1), &coord(4, &[2]));
        assert!(chain.get(0, 0).is_zero() && chain.get(0, 1).is_zero());
        assert_eq!(chain.dims(), vec![vec![0, 0], vec![1, 1], vec![2, 2]]);
        assert!(null_verdict(&chain, 0).answer);
        let suff = approx_controllable_sufficient(&sys, &EX).unwrap();
        assert!(!suff.answer);
        assert_eq!(suff.deciding_mode, Some(0));
        assert_eq!(suff.deciding, coord(4, &[3]));
    }

    #[test]
    fn example1_single_jump_is_not_null_controllable() {
        let sys = builtin("example1", &BTreeMap::new()).unwrap().with_max_jumps(1);
        assert!(!is_null_controllable(&sys, 0, &EX).unwrap().answer);
    }

    #[test]
    fn operon_verdicts() {
        let sys = builtin("operon", &BTreeMap::new()).unwrap();
        let chain = v_chain(&sys, &EX).unwrap();
        assert_eq!(chain.get(1, 0), &coord(3, &[2]));
        assert_eq!(chain.get(1, 1), &coord(3, &[2]));
        assert_eq!(chain.get(1, 2), &sys.ker_b_star(&EX));
        assert!(null_verdict(&chain, 0).answer);
        let suff = approx_controllable_sufficient(&sys, &EX).unwrap();
        assert!(!suff.answer);
        assert_eq!(suff.deciding_mode, Some(2));
        assert_eq!(suff.deciding, sys.ker_b_star(&EX));
        assert_eq!(suff.per_mode[0], coord(3, &[2]));
    }

    #[test]
    fn zero_dynamics_never_controllable() {
        let mut sys = builtin("example1", &BTreeMap::new()).unwrap();
        for g in 0..2 {
            sys.a[g] = Matrix::zeros(4, 4);
            for t in 0..2 {
                sys.c[g][t] = Matrix::zeros(4, 4);
            }
        }
        sys.b = Matrix::zeros(4, 2);
        let v = is_null_controllable(&sys, 0, &EX).unwrap();
        assert!(!v.answer);
        assert_eq!(v.deciding.dim(), 4);
    }

    #[test]
    fn invertible_b_is_trivially_controllable() {
        let mut sys = builtin("example1", &BTreeMap::new()).unwrap();
        sys.control_dim = 4;
        sys.b = Matrix::identity(4);
        let chain = v_chain(&sys, &EX).unwrap();
        assert!(chain.dims().iter().flatten().all(|&d| d == 0));
        assert_eq!(chain.stabilized_at(), 2);
        assert!(approx_controllable_sufficient(&sys, &EX).unwrap().answer);
    }

    fn single_mode(a: &[i64]) -> SwitchSystem<Rational> {
        let q = Rational::from_i64;
        SwitchSystem {
            name: "t".into(),
            state_dim: 2,
            control_dim: 1,
            modes: vec!["a".into()],
            rates: vec![q(0)],
            transition: Matrix::zeros(1, 1),
            a: vec![Matrix::from_i64(2, 2, a)],
            b: Matrix::from_i64(2, 1, &[1, 0]),
            c: vec![vec![Matrix::zeros(2, 2)]],
            max_jumps: 2,
            horizon: q(1),
        }
    }

    #[test]
    fn no_noise_criterion() {
        // A^T e2 = 0, so span{e2} is invariant.
        let s = single_mode(&[0, 1, 0, 0]);
        assert!(!criterion_no_noise(&s, 0, &EX).unwrap().answer);
        assert!(!is_null_controllable(&s, 0, &EX).unwrap().answer);
        // A^T e2 = e1 leaves ker B*.
        let s = single_mode(&[0, 0, 1, 0]);
        assert!(criterion_no_noise(&s, 0, &EX).unwrap().answer);
        assert!(is_null_controllable(&s, 0, &EX).unwrap().answer);
        let s = single_mode(&[0, 0, 0, 0]);
        assert!(!criterion_no_noise(&s, 0, &EX).unwrap().answer);
        let ex1 = builtin("example1", &BTreeMap::new()).unwrap();
        assert!(matches!(criterion_no_noise(&ex1, 0, &EX), Err(CriteriaError::Precondition(_))));
    }

    #[test]
    fn mode_independent_criterion_on_symmetric_swap() {
        let q = Rational::from_i64;
        let c = Matrix::from_i64(2, 2, &[0, 0, 1, 0]);
        let sys = SwitchSystem {
            name: "t".into(),
            state_dim: 2,
            control_dim: 1,
            modes: vec!["a".into(), "b".into()],
            rates: vec![q(1), q(1)],
            transition: Matrix::from_i64(2, 2, &[0, 1, 1, 0]),
            a: vec![Matrix::zeros(2, 2), Matrix::zeros(2, 2)],
            b: Matrix::from_i64(2, 1, &[1, 0]),
            c: vec![vec![Matrix::zeros(2, 2), c.clone()], vec![c, Matrix::zeros(2, 2)]],
            max_jumps: 3,
            horizon: q(1),
        };
        // The jump pushes e1 into e2, so C^T e2 = e1 keeps span{e2} invariant.
        let v = criterion_mode_independent(&sys, &EX).unwrap();
        assert!(!v.answer);
        assert!(!is_null_controllable(&sys, 0, &EX).unwrap().answer);
        assert!(criterion_mode_independent(&sys.clone().with_max_jumps(2), &EX).is_err());

        let mut drifting = sys.clone();
        let c = Matrix::from_i64(2, 2, &[0, 1, 0, 0]);
        drifting.a = vec![Matrix::from_i64(2, 2, &[0, 0, 1, 0]); 2];
        drifting.c = vec![vec![Matrix::zeros(2, 2), c.clone()], vec![c, Matrix::zeros(2, 2)]];
        assert!(criterion_mode_independent(&drifting, &EX).unwrap().answer);
        assert!(is_null_controllable(&drifting, 0, &EX).unwrap().answer);
    }
}

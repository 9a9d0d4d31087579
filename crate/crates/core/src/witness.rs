//! Dual witnesses: explicit final data `ξ` whose backward solution stays in
//! `ker B*`, certifying that some target cannot be approached.
//!
//! Every chain level `V^n_g` is feedback invariant: there are maps
//! `F^n_{g,t}: V^n_g -> V^{n+1}_t` with
//! `(A*(g) + sum_t (C(g,t)^T + I) F^n_{g,t}) V^n_g ⊆ V^n_g`.
//! Writing `V` for a basis of `V^n_g`, the closed loop acts on coordinates
//! through a matrix `H` with `A*(g) V + sum_t (C^T + I) F_t = V H`. A witness
//! then evolves `φ(t) = V exp(-H (t - s)) c` on a node born at time `s`, and
//! a jump to `t` at time `τ` seeds the child with coordinates
//! `X_t exp(-H (τ - s)) c / (λ(g) Q(g,t))`.

use serde_json::{json, Value};
use thiserror::Error;

use crate::criteria::{v_chain, CriteriaError, VChain};
use crate::matrix::{max_abs, vec_to_json, Matrix};
use crate::model::{ModeTrajectory, SwitchSystem};
use crate::scalar::{Rational, Scalar};
use crate::subspace::{Subspace, Tolerance};

#[derive(Debug, Error)]
pub enum WitnessError {
    #[error(transparent)]
    Criteria(#[from] CriteriaError),
    #[error("start vector is zero")]
    ZeroVector,
    #[error("start vector has length {found}, expected {expected}")]
    VectorLength { expected: usize, found: usize },
    #[error("level {level} exceeds the jump cap {max_jumps}")]
    BadLevel { level: usize, max_jumps: usize },
    #[error("prefix must list {expected} modes starting at the initial mode, got {found:?}")]
    BadPrefix { expected: usize, found: Vec<String> },
    #[error("prefix is unreachable: jump {from} -> {to} has zero intensity")]
    Unreachable { from: String, to: String },
    #[error("no witness: {0}")]
    NoWitness(String),
    #[error("start vector is not in the chain space at level {level}, mode {mode}")]
    NotInSubspace { level: usize, mode: String },
    #[error("start vector is not annihilated by the last prefix jump (C^T + I)v != 0")]
    Incompatible,
    #[error("feedback synthesis failed at level {level}, mode {mode}")]
    Infeasible { level: usize, mode: String },
}

/// Closed-loop data for one level and mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Feedback<S> {
    /// Basis of `V^n_g`, `N x k`.
    pub basis: Matrix<S>,
    /// Closed-loop generator on coordinates, `k x k`.
    pub h: Matrix<S>,
    /// `x[t]` maps coordinates on `V^n_g` to coordinates on `V^{n+1}_t`;
    /// `None` for targets that cannot be reached.
    pub x: Vec<Option<Matrix<S>>>,
}

impl<S: Scalar> Feedback<S> {
    pub fn dim(&self) -> usize {
        self.basis.cols()
    }
}

/// Feedback maps for every level below the cap.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackFamily<S> {
    /// `levels[n][g]` for `n < M`.
    pub levels: Vec<Vec<Feedback<S>>>,
    /// Level-`M` bases (no feedback: the state freezes after the last jump).
    pub top: Vec<Matrix<S>>,
    /// Largest entry of `A* V + sum (C^T + I) W X - V H` over all blocks.
    pub identity_residual: f64,
}

impl<S: Scalar> FeedbackFamily<S> {
    /// `F^n_{g,t}` as an `N x k` matrix acting on coordinates of `V^n_g`.
    pub fn operator(&self, n: usize, g: usize, t: usize) -> Option<Matrix<S>> {
        let next_basis = self.basis(n + 1, t);
        self.levels[n][g].x[t].as_ref().map(|x| next_basis.matmul(x))
    }

    pub fn basis(&self, n: usize, g: usize) -> &Matrix<S> {
        if n < self.levels.len() {
            &self.levels[n][g].basis
        } else {
            &self.top[g]
        }
    }
}

/// Solves the feedback equations level by level.
pub fn feedback_operators<S: Scalar>(
    chain: &VChain<S>,
    sys: &SwitchSystem<S>,
    tol: &Tolerance,
) -> Result<FeedbackFamily<S>, WitnessError> {
    let m = sys.max_jumps;
    let p = sys.mode_count();
    let mut levels = Vec::with_capacity(m);
    let mut worst = 0.0f64;
    for n in 0..m {
        let mut row = Vec::with_capacity(p);
        for g in 0..p {
            let v = chain.get(n, g).basis().clone();
            let k = v.cols();
            let targets = sys.active_targets(g);
            // Unknowns: [h (k); x_t (dim V^{n+1}_t) for each target].
            let mut system = v.clone();
            let mut blocks = Vec::new();
            for &t in &targets {
                let w = chain.get(n + 1, t).basis();
                let block = sys.jump_adjoint(g, t).matmul(w).neg();
                blocks.push((t, system.cols(), w.cols()));
                system = system.hstack(&block);
            }
            let a_star = sys.dual_generator(g);
            let rhs = a_star.matmul(&v);
            let mut h = Matrix::zeros(k, k);
            let mut x: Vec<Option<Matrix<S>>> = vec![None; p];
            for &(t, _, width) in &blocks {
                x[t] = Some(Matrix::zeros(width, k));
            }
            for j in 0..k {
                let sol = S::least_norm_solve(&system, &rhs.column(j), tol)
                    .ok_or_else(|| WitnessError::Infeasible { level: n, mode: sys.modes[g].clone() })?;
                for i in 0..k {
                    h[(i, j)] = sol[i].clone();
                }
                for &(t, offset, width) in &blocks {
                    let xt = x[t].as_mut().expect("allocated above");
                    for i in 0..width {
                        xt[(i, j)] = sol[offset + i].clone();
                    }
                }
            }
            // Check A* V + sum (C^T + I) W X = V H.
            let mut lhs = rhs.clone();
            for &(t, _, _) in &blocks {
                let w = chain.get(n + 1, t).basis();
                let xt = x[t].as_ref().expect("allocated above");
                lhs = lhs.add(&sys.jump_adjoint(g, t).matmul(&w.matmul(xt)));
            }
            let resid = if k == 0 { 0.0 } else { lhs.sub(&v.matmul(&h)).max_abs() };
            worst = worst.max(resid);
            row.push(Feedback { basis: v, h, x });
        }
        levels.push(row);
    }
    let top = (0..p).map(|g| chain.get(m, g).basis().clone()).collect();
    Ok(FeedbackFamily { levels, top, identity_residual: worst })
}

/// A witness anchored at level `n0` on trajectories whose first `n0` jumps
/// visit `prefix` (any jump times). It vanishes on every other trajectory
/// and on the prefix itself before the `n0`-th jump.
#[derive(Debug, Clone, PartialEq)]
pub struct DualWitness<S> {
    pub modes: Vec<String>,
    pub state_dim: usize,
    pub max_jumps: usize,
    pub horizon: S,
    pub start_level: usize,
    pub prefix: Vec<usize>,
    pub start_vector: Vec<S>,
    /// Coordinates of `start_vector` on the basis of `V^{n0}`.
    pub start_coef: Vec<S>,
    pub family: FeedbackFamily<S>,
    /// `λ(g) Q(g,t)`.
    pub weights: Matrix<S>,
    pub b_star: Matrix<S>,
}

/// One stretch of a trajectory between consecutive jumps.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeState<S> {
    pub level: usize,
    pub mode: usize,
    pub birth: f64,
    /// Coordinates at `birth`; `None` where the witness vanishes.
    pub coef: Option<Vec<S>>,
}

/// Picks a start vector: the first basis vector of `V^{n0}` that the last
/// prefix jump annihilates (any vector when `n0 = 0`).
pub fn default_start_vector<S: Scalar>(
    sys: &SwitchSystem<S>,
    chain: &VChain<S>,
    prefix: &[usize],
    tol: &Tolerance,
) -> Result<Vec<S>, WitnessError> {
    let n0 = prefix.len() - 1;
    let g = prefix[n0];
    let mut space = chain.get(n0, g).clone();
    if space.is_zero() {
        return Err(WitnessError::NoWitness(format!(
            "the chain space at level {n0}, mode {} is zero",
            sys.modes[g]
        )));
    }
    if n0 >= 1 {
        let allowed = Subspace::kernel(&sys.jump_adjoint(prefix[n0 - 1], g), tol);
        space = space.intersect(&allowed, tol).map_err(CriteriaError::from)?;
        if space.is_zero() {
            return Err(WitnessError::NoWitness(format!(
                "no vector of the chain space at level {n0}, mode {} survives the jump from {}",
                sys.modes[g],
                sys.modes[prefix[n0 - 1]]
            )));
        }
    }
    let v = space.basis().column(0);
    // Rescale to unit largest entry for readability.
    let scale = v
        .iter()
        .find(|x| !x.is_zero())
        .cloned()
        .expect("basis vector is nonzero");
    Ok(if S::EXACT {
        v.into_iter().map(|x| x / scale.clone()).collect()
    } else {
        v
    })
}

/// Builds the witness started by `v` at the end of `prefix` (a mode
/// sequence beginning at the initial mode; its length minus one is the start
/// level).
pub fn build_witness<S: Scalar>(
    sys: &SwitchSystem<S>,
    prefix: &[usize],
    v: &[S],
    tol: &Tolerance,
) -> Result<DualWitness<S>, WitnessError> {
    let chain = v_chain(sys, tol)?;
    build_witness_with_chain(sys, &chain, prefix, v, tol)
}

pub fn build_witness_with_chain<S: Scalar>(
    sys: &SwitchSystem<S>,
    chain: &VChain<S>,
    prefix: &[usize],
    v: &[S],
    tol: &Tolerance,
) -> Result<DualWitness<S>, WitnessError> {
    let m = sys.max_jumps;
    if prefix.is_empty() || prefix.iter().any(|&g| g >= sys.mode_count()) {
        return Err(WitnessError::BadPrefix {
            expected: 1,
            found: prefix.iter().map(|g| g.to_string()).collect(),
        });
    }
    let n0 = prefix.len() - 1;
    if n0 > m {
        return Err(WitnessError::BadLevel { level: n0, max_jumps: m });
    }
    for w in prefix.windows(2) {
        if !sys.is_active(w[0], w[1]) {
            return Err(WitnessError::Unreachable { from: sys.modes[w[0]].clone(), to: sys.modes[w[1]].clone() });
        }
    }
    if v.len() != sys.state_dim {
        return Err(WitnessError::VectorLength { expected: sys.state_dim, found: v.len() });
    }
    if v.iter().all(|x| x.is_negligible(tol.membership_tol)) {
        return Err(WitnessError::ZeroVector);
    }
    let g = prefix[n0];
    let space = chain.get(n0, g);
    if !space.contains_vector(v, tol) {
        return Err(WitnessError::NotInSubspace { level: n0, mode: sys.modes[g].clone() });
    }
    if n0 >= 1 {
        let image = sys.jump_adjoint(prefix[n0 - 1], g).mul_vec(v);
        let scale = max_abs(v).max(1.0);
        if image.iter().any(|x| !x.is_negligible(tol.membership_tol * scale)) {
            return Err(WitnessError::Incompatible);
        }
    }
    let family = feedback_operators(chain, sys, tol)?;
    let basis = family.basis(n0, g);
    let start_coef = S::least_norm_solve(basis, v, tol)
        .ok_or_else(|| WitnessError::NotInSubspace { level: n0, mode: sys.modes[g].clone() })?;
    let p = sys.mode_count();
    let mut weights = Matrix::zeros(p, p);
    for a in 0..p {
        for b in 0..p {
            weights[(a, b)] = sys.jump_weight(a, b);
        }
    }
    Ok(DualWitness {
        modes: sys.modes.clone(),
        state_dim: sys.state_dim,
        max_jumps: m,
        horizon: sys.horizon.clone(),
        start_level: n0,
        prefix: prefix.to_vec(),
        start_vector: v.to_vec(),
        start_coef,
        family,
        weights,
        b_star: sys.b_star(),
    })
}

fn time<S: Scalar>(t: f64) -> S {
    S::from_rational(&Rational::from_float(t).expect("finite time"))
}

impl<S: Scalar> DualWitness<S> {
    /// Coordinates `exp(-H (t - birth)) c` of a node at time `t`; frozen at
    /// level `M`.
    pub fn propagate(&self, level: usize, mode: usize, coef: &[S], dt: &S) -> Vec<S> {
        if level >= self.max_jumps || coef.is_empty() {
            return coef.to_vec();
        }
        let h = &self.family.levels[level][mode].h;
        if h.is_zero() {
            return coef.to_vec();
        }
        let (e, _) = S::expm(&h.scale(&-dt.clone()));
        e.mul_vec(coef)
    }

    /// Value in `R^N` of a node with the given coordinates.
    pub fn value(&self, level: usize, mode: usize, coef: &[S]) -> Vec<S> {
        let basis = self.family.basis(level, mode);
        if basis.cols() == 0 {
            return vec![S::zero(); self.state_dim];
        }
        basis.mul_vec(coef)
    }

    /// Child coordinates after a jump `g -> t` when the parent has
    /// coordinates `coef_at_jump` at the jump time. Zero-intensity jumps
    /// seed nothing.
    pub fn child_coef(&self, level: usize, g: usize, t: usize, coef_at_jump: &[S]) -> Option<Vec<S>> {
        let x = self.family.levels[level][g].x[t].as_ref()?;
        let w = self.weights[(g, t)].clone();
        Some(x.mul_vec(coef_at_jump).into_iter().map(|c| c / w.clone()).collect())
    }

    /// Node-by-node state of the witness along a trajectory.
    pub fn nodes(&self, path: &ModeTrajectory) -> Vec<NodeState<S>> {
        let modes = path.modes();
        let times = path.jump_times();
        let n0 = self.start_level;
        let follows_prefix = modes.len() > n0 && modes[..=n0] == self.prefix[..];
        let mut out = Vec::with_capacity(modes.len());
        let mut coef: Option<Vec<S>> = None;
        for (j, (&g, &birth)) in modes.iter().zip(&times).enumerate() {
            if j == n0 && follows_prefix {
                coef = Some(self.start_coef.clone());
            } else if j > n0 {
                let prev: &NodeState<S> = &out[j - 1];
                coef = prev.coef.as_ref().and_then(|c| {
                    let at_jump = self.propagate(prev.level, prev.mode, c, &time::<S>(birth - prev.birth));
                    self.child_coef(prev.level, prev.mode, g, &at_jump)
                });
            }
            out.push(NodeState { level: j, mode: g, birth, coef: coef.clone() });
        }
        out
    }

    /// `Y_t` along the trajectory.
    pub fn y_at(&self, path: &ModeTrajectory, t: f64) -> Vec<S> {
        let nodes = self.nodes(path);
        self.y_from_nodes(&nodes, t)
    }

    pub fn y_from_nodes(&self, nodes: &[NodeState<S>], t: f64) -> Vec<S> {
        let node = nodes
            .iter()
            .rev()
            .find(|n| n.birth <= t)
            .unwrap_or(&nodes[0]);
        match &node.coef {
            None => vec![S::zero(); self.state_dim],
            Some(c) => {
                let dt = (t - node.birth).max(0.0);
                let cur = self.propagate(node.level, node.mode, c, &time::<S>(dt));
                self.value(node.level, node.mode, &cur)
            }
        }
    }

    /// Final data `ξ` on the trajectory.
    pub fn xi(&self, path: &ModeTrajectory) -> Vec<S> {
        self.y_at(path, self.horizon.to_f64())
    }

    /// `Y_0` for trajectories starting in the prefix mode.
    pub fn y0(&self) -> Vec<S> {
        if self.start_level == 0 {
            self.start_vector.clone()
        } else {
            vec![S::zero(); self.state_dim]
        }
    }

    pub fn to_f64(&self) -> DualWitness<f64> {
        let f = |m: &Matrix<S>| m.to_f64();
        DualWitness {
            modes: self.modes.clone(),
            state_dim: self.state_dim,
            max_jumps: self.max_jumps,
            horizon: self.horizon.to_f64(),
            start_level: self.start_level,
            prefix: self.prefix.clone(),
            start_vector: self.start_vector.iter().map(Scalar::to_f64).collect(),
            start_coef: self.start_coef.iter().map(Scalar::to_f64).collect(),
            family: FeedbackFamily {
                levels: self
                    .family
                    .levels
                    .iter()
                    .map(|row| {
                        row.iter()
                            .map(|fb| Feedback {
                                basis: f(&fb.basis),
                                h: f(&fb.h),
                                x: fb.x.iter().map(|x| x.as_ref().map(f)).collect(),
                            })
                            .collect()
                    })
                    .collect(),
                top: self.family.top.iter().map(f).collect(),
                identity_residual: self.family.identity_residual,
            },
            weights: f(&self.weights),
            b_star: f(&self.b_star),
        }
    }

    /// Export with feedback data and `ξ` on the given trajectories.
    pub fn to_json(&self, trajectories: &[ModeTrajectory]) -> Value {
        let names = &self.modes;
        let mut feedback = Vec::new();
        for (n, row) in self.family.levels.iter().enumerate().skip(self.start_level) {
            for (g, fb) in row.iter().enumerate() {
                if fb.dim() == 0 {
                    continue;
                }
                let ops: serde_json::Map<String, Value> = (0..names.len())
                    .filter_map(|t| {
                        self.family.operator(n, g, t).map(|op| (names[t].clone(), op.to_json()))
                    })
                    .collect();
                feedback.push(json!({
                    "level": n,
                    "mode": names[g],
                    "basis": fb.basis.to_json(),
                    "closed_loop": fb.h.to_json(),
                    "feedback": ops,
                }));
            }
        }
        let evaluations: Vec<Value> = trajectories
            .iter()
            .map(|e| {
                let nodes = self.nodes(e);
                let pieces: Vec<Value> = nodes
                    .iter()
                    .map(|nd| {
                        json!({
                            "level": nd.level,
                            "mode": names[nd.mode],
                            "birth": nd.birth,
                            "value_at_birth": vec_to_json(&match &nd.coef {
                                Some(c) => self.value(nd.level, nd.mode, c),
                                None => vec![S::zero(); self.state_dim],
                            }),
                        })
                    })
                    .collect();
                json!({
                    "trajectory": e.to_json(names),
                    "pieces": pieces,
                    "xi": vec_to_json(&self.xi(e)),
                })
            })
            .collect();
        json!({
            "start_level": self.start_level,
            "prefix": self.prefix.iter().map(|&g| names[g].clone()).collect::<Vec<_>>(),
            "start_vector": vec_to_json(&self.start_vector),
            "feedback_identity_residual": self.family.identity_residual,
            "feedback": feedback,
            "evaluations": evaluations,
        })
    }
}

//! Backward ODE cascade on a trajectory tree with grid-aligned jump times.
//!
//! A node `e` at level `n` is a trajectory with `n` jumps, born at its last
//! jump time `|e|`. Its value solves, backward from `y(T) = ξ(e)`,
//!
//! ```text
//! y'(t) = -A*(g) y(t) - sum_t λ(g) Q(g,t) (C(g,t)^T + I) y_child(e ⊕ (t,θ), t)
//! ```
//!
//! where `g` is the node's mode and the child term is the child's value at
//! its own birth. Level-`M` nodes are constant. Jump times are restricted to
//! grid points so the child term is a table lookup.

use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use crate::matrix::Matrix;
use crate::model::{ModeTrajectory, SwitchSystem};
use crate::witness::DualWitness;

/// Largest jump cap the solver accepts.
pub const CASCADE_CAP: usize = 3;
/// Default limit on the number of tree nodes.
pub const NODE_BUDGET: usize = 1_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum BsdeError {
    #[error("jump cap {0} exceeds the cascade limit {CASCADE_CAP}")]
    CapExceeded(usize),
    #[error("trajectory tree has {nodes} nodes, above the budget {budget}")]
    TooManyNodes { nodes: f64, budget: usize },
    #[error("grid must have at least 2 steps, strictly increase from 0 and end at the horizon")]
    BadGrid,
    #[error("final data missing on trajectory {0}")]
    MissingFinalData(String),
    #[error("final data has length {found}, expected {expected}")]
    FinalDataLength { expected: usize, found: usize },
    #[error("time index {index} is not after the birth index {birth} of the node")]
    NotAfterBirth { index: usize, birth: usize },
    #[error("jump to mode {0} is not possible from this node")]
    InactiveJump(usize),
}

/// Final data `ξ(e)` indexed by trajectory.
pub trait FinalData: Sync {
    fn final_value(&self, e: &ModeTrajectory) -> Option<Vec<f64>>;
}

impl<F> FinalData for F
where
    F: Fn(&ModeTrajectory) -> Option<Vec<f64>> + Sync,
{
    fn final_value(&self, e: &ModeTrajectory) -> Option<Vec<f64>> {
        self(e)
    }
}

impl FinalData for DualWitness<f64> {
    fn final_value(&self, e: &ModeTrajectory) -> Option<Vec<f64>> {
        Some(self.xi(e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeGrid {
    pub points: Vec<f64>,
    pub max_jumps: usize,
    pub root_mode: usize,
    pub node_budget: usize,
}

impl TreeGrid {
    /// `steps + 1` equally spaced points on `[0, horizon]`.
    pub fn uniform(horizon: f64, steps: usize, max_jumps: usize, root_mode: usize) -> Self {
        let points = (0..=steps).map(|i| horizon * i as f64 / steps as f64).collect();
        Self { points, max_jumps, root_mode, node_budget: NODE_BUDGET }
    }

    pub fn horizon(&self) -> f64 {
        *self.points.last().expect("grid is nonempty")
    }

    /// Index of the last point, `G`.
    pub fn last(&self) -> usize {
        self.points.len() - 1
    }

    fn check(&self) -> Result<(), BsdeError> {
        let ok = self.points.len() >= 3
            && self.points[0] == 0.0
            && self.points.windows(2).all(|w| w[1] > w[0]);
        if ok {
            Ok(())
        } else {
            Err(BsdeError::BadGrid)
        }
    }
}

/// Node handle: level and position within the level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId {
    pub level: usize,
    pub index: usize,
}

#[derive(Debug, Clone)]
struct Node {
    mode: usize,
    birth: usize,
    parent: usize,
    /// First child in the next level; children are ordered by jump index,
    /// then by position of the target in the mode's active list.
    child_start: usize,
    /// `y` at grid indices `birth..=G` (one sample at level `M`), flattened.
    values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CascadeSolution {
    grid: TreeGrid,
    state_dim: usize,
    /// `active[g]`: reachable targets from mode `g`.
    active: Vec<Vec<usize>>,
    levels: Vec<Vec<Node>>,
    final_data: Vec<Vec<Vec<f64>>>,
}

fn count_nodes<S: crate::scalar::Scalar>(sys: &SwitchSystem<S>, grid: &TreeGrid) -> f64 {
    let g_last = grid.last();
    let p = sys.mode_count();
    let m = grid.max_jumps;
    // cnt[g][b] for the current level, computed from the top down.
    let mut cnt = vec![vec![1.0f64; g_last + 1]; p];
    for _ in (0..m).rev() {
        let mut next = vec![vec![0.0f64; g_last + 1]; p];
        for g in 0..p {
            let targets = sys.active_targets(g);
            let mut suffix = 0.0;
            for b in (0..=g_last).rev() {
                next[g][b] = 1.0 + suffix;
                suffix += targets.iter().map(|&t| cnt[t][b]).sum::<f64>();
            }
        }
        cnt = next;
    }
    cnt[grid.root_mode][0]
}

fn build_tree(grid: &TreeGrid, active: &[Vec<usize>]) -> Vec<Vec<Node>> {
    let g_last = grid.last();
    let root = Node { mode: grid.root_mode, birth: 0, parent: usize::MAX, child_start: 0, values: Vec::new() };
    let mut levels = vec![vec![root]];
    for _ in 0..grid.max_jumps {
        let cur = levels.last_mut().expect("root level exists");
        let mut next = Vec::new();
        for (k, node) in cur.iter_mut().enumerate() {
            node.child_start = next.len();
            for j in node.birth + 1..=g_last {
                for &t in &active[node.mode] {
                    next.push(Node { mode: t, birth: j, parent: k, child_start: 0, values: Vec::new() });
                }
            }
        }
        levels.push(next);
    }
    levels
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn matvec(m: &Matrix<f64>, v: &[f64]) -> Vec<f64> {
    m.mul_vec(v)
}

impl CascadeSolution {
    pub fn grid(&self) -> &TreeGrid {
        &self.grid
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn root(&self) -> NodeId {
        NodeId { level: 0, index: 0 }
    }

    pub fn node_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn level_len(&self, level: usize) -> usize {
        self.levels[level].len()
    }

    pub fn mode(&self, id: NodeId) -> usize {
        self.levels[id.level][id.index].mode
    }

    pub fn birth(&self, id: NodeId) -> usize {
        self.levels[id.level][id.index].birth
    }

    /// `y(e, s_i)`; constant before the birth index.
    pub fn y(&self, id: NodeId, i: usize) -> &[f64] {
        let node = &self.levels[id.level][id.index];
        let n = self.state_dim;
        if id.level == self.grid.max_jumps {
            return &node.values[..n];
        }
        let k = i.saturating_sub(node.birth);
        &node.values[k * n..(k + 1) * n]
    }

    /// Overwrites `y(e, s_i)`; used to probe the residual.
    pub fn set_y(&mut self, id: NodeId, i: usize, v: &[f64]) {
        let n = self.state_dim;
        let top = id.level == self.grid.max_jumps;
        let node = &mut self.levels[id.level][id.index];
        let k = if top { 0 } else { i - node.birth };
        node.values[k * n..(k + 1) * n].copy_from_slice(v);
    }

    /// `y^0(e_0, 0)`.
    pub fn y0(&self) -> &[f64] {
        self.y(self.root(), 0)
    }

    pub fn final_data(&self, id: NodeId) -> &[f64] {
        &self.final_data[id.level][id.index]
    }

    /// Child `e ⊕ (s_j, θ)`.
    pub fn child(&self, id: NodeId, j: usize, theta: usize) -> Option<NodeId> {
        if id.level >= self.grid.max_jumps {
            return None;
        }
        let node = &self.levels[id.level][id.index];
        if j <= node.birth || j > self.grid.last() {
            return None;
        }
        let active = &self.active[node.mode];
        let pos = active.iter().position(|&t| t == theta)?;
        Some(NodeId { level: id.level + 1, index: node.child_start + (j - node.birth - 1) * active.len() + pos })
    }

    /// Node reached by the given jumps `(grid index, mode)` from the root.
    pub fn find(&self, jumps: &[(usize, usize)]) -> Option<NodeId> {
        jumps.iter().try_fold(self.root(), |id, &(j, t)| self.child(id, j, t))
    }

    /// The node's trajectory with grid jump times.
    pub fn trajectory(&self, id: NodeId) -> ModeTrajectory {
        let mut jumps = Vec::with_capacity(id.level);
        let mut cur = id;
        while cur.level > 0 {
            let node = &self.levels[cur.level][cur.index];
            jumps.push((self.grid.points[node.birth], node.mode));
            cur = NodeId { level: cur.level - 1, index: node.parent };
        }
        jumps.reverse();
        ModeTrajectory::from_jumps(self.grid.horizon(), self.grid.root_mode, &jumps)
            .expect("tree jump times increase")
    }

    /// `y^{n+1}(e ⊕ (s_i, θ), s_i) - y^n(e, s_i)`.
    pub fn z_component(&self, id: NodeId, i: usize, theta: usize) -> Result<Vec<f64>, BsdeError> {
        let birth = self.birth(id);
        if i <= birth {
            return Err(BsdeError::NotAfterBirth { index: i, birth });
        }
        let child = self.child(id, i, theta).ok_or(BsdeError::InactiveJump(theta))?;
        Ok(self.y(child, i).iter().zip(self.y(id, i)).map(|(a, b)| a - b).collect())
    }

    /// Coupling term `sum_t λQ (C^T + I) y_child(s_j)` at grid index `j`.
    fn forcing(&self, sys: &SwitchSystem<f64>, adj: &[Vec<Matrix<f64>>], id: NodeId, j: usize) -> Vec<f64> {
        let g = self.mode(id);
        let mut out = vec![0.0; self.state_dim];
        for &t in &self.active[g] {
            let child = self.child(id, j, t).expect("child exists after birth");
            axpy(&mut out, sys.jump_weight(g, t), &matvec(&adj[g][t], self.y(child, j)));
        }
        out
    }

    pub fn to_json(&self, max_nodes: usize) -> Value {
        let mut nodes = Vec::new();
        'outer: for (level, row) in self.levels.iter().enumerate() {
            for index in 0..row.len() {
                if nodes.len() >= max_nodes {
                    break 'outer;
                }
                let id = NodeId { level, index };
                let b = self.birth(id);
                let series: Vec<Value> = if level == self.grid.max_jumps {
                    vec![json!([self.grid.points[b], self.y(id, b)])]
                } else {
                    (b..=self.grid.last()).map(|i| json!([self.grid.points[i], self.y(id, i)])).collect()
                };
                nodes.push(json!({
                    "level": level,
                    "mode": self.mode(id),
                    "jump_times": self.trajectory(id).jump_times(),
                    "modes": self.trajectory(id).modes(),
                    "y": series,
                }));
            }
        }
        json!({"grid": self.grid.points, "node_count": self.node_count(), "nodes": nodes})
    }
}

fn prepare(
    sys: &SwitchSystem<f64>,
    final_data: &dyn FinalData,
    grid: &TreeGrid,
) -> Result<CascadeSolution, BsdeError> {
    grid.check()?;
    if grid.max_jumps > CASCADE_CAP {
        return Err(BsdeError::CapExceeded(grid.max_jumps));
    }
    let count = count_nodes(sys, grid);
    if count > grid.node_budget as f64 {
        return Err(BsdeError::TooManyNodes { nodes: count, budget: grid.node_budget });
    }
    let active: Vec<Vec<usize>> = (0..sys.mode_count()).map(|g| sys.active_targets(g)).collect();
    let levels = build_tree(grid, &active);
    let mut sol = CascadeSolution {
        grid: grid.clone(),
        state_dim: sys.state_dim,
        active,
        levels,
        final_data: Vec::new(),
    };
    let n = sys.state_dim;
    let mut all = Vec::with_capacity(sol.levels.len());
    for level in 0..sol.levels.len() {
        let row: Result<Vec<Vec<f64>>, BsdeError> = (0..sol.levels[level].len())
            .into_par_iter()
            .map(|index| {
                let e = sol.trajectory(NodeId { level, index });
                let xi = final_data
                    .final_value(&e)
                    .ok_or_else(|| BsdeError::MissingFinalData(format!("{:?}", e.entries())))?;
                if xi.len() != n {
                    return Err(BsdeError::FinalDataLength { expected: n, found: xi.len() });
                }
                Ok(xi)
            })
            .collect();
        all.push(row?);
    }
    sol.final_data = all;
    Ok(sol)
}

/// Solves the cascade level by level from the top with a classical
/// four-stage Runge-Kutta step; the child term is linearly interpolated at
/// half steps.
pub fn solve_cascade(
    sys: &SwitchSystem<f64>,
    final_data: &dyn FinalData,
    grid: &TreeGrid,
) -> Result<CascadeSolution, BsdeError> {
    let mut sol = prepare(sys, final_data, grid)?;
    let n = sys.state_dim;
    let m = grid.max_jumps;
    let g_last = grid.last();
    let pts = &grid.points;
    let adj: Vec<Vec<Matrix<f64>>> = (0..sys.mode_count())
        .map(|g| (0..sys.mode_count()).map(|t| sys.jump_adjoint(g, t)).collect())
        .collect();
    let gens: Vec<Matrix<f64>> = (0..sys.mode_count()).map(|g| sys.dual_generator(g)).collect();

    for (node, xi) in sol.levels[m].iter_mut().zip(&sol.final_data[m]) {
        node.values = xi.clone();
    }
    for level in (0..m).rev() {
        let computed: Vec<Vec<f64>> = (0..sol.levels[level].len())
            .into_par_iter()
            .map(|index| {
                let id = NodeId { level, index };
                let b = sol.birth(id);
                let k = &gens[sol.mode(id)];
                // Forcing at grid points after birth, extrapolated to the birth index.
                let mut g: Vec<Vec<f64>> = vec![Vec::new(); g_last + 1];
                for (j, gj) in g.iter_mut().enumerate().skip(b + 1) {
                    *gj = sol.forcing(sys, &adj, id, j);
                }
                g[b] = match g_last - b {
                    0 => vec![0.0; n],
                    1 => g[b + 1].clone(),
                    _ => g[b + 1].iter().zip(&g[b + 2]).map(|(x, y)| 2.0 * x - y).collect(),
                };
                let f = |y: &[f64], gt: &[f64]| -> Vec<f64> {
                    let ky = matvec(k, y);
                    ky.iter().zip(gt).map(|(a, c)| -a - c).collect()
                };
                let len = g_last - b + 1;
                let mut values = vec![0.0; len * n];
                let mut y = sol.final_data[level][index].clone();
                values[(len - 1) * n..].copy_from_slice(&y);
                for i in (b..g_last).rev() {
                    let tau = -(pts[i + 1] - pts[i]);
                    let gmid: Vec<f64> = g[i].iter().zip(&g[i + 1]).map(|(x, z)| 0.5 * (x + z)).collect();
                    let k1 = f(&y, &g[i + 1]);
                    let mut y2 = y.clone();
                    axpy(&mut y2, tau / 2.0, &k1);
                    let k2 = f(&y2, &gmid);
                    let mut y3 = y.clone();
                    axpy(&mut y3, tau / 2.0, &k2);
                    let k3 = f(&y3, &gmid);
                    let mut y4 = y.clone();
                    axpy(&mut y4, tau, &k3);
                    let k4 = f(&y4, &g[i]);
                    for c in 0..n {
                        y[c] += tau / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
                    }
                    values[(i - b) * n..(i - b + 1) * n].copy_from_slice(&y);
                }
                values
            })
            .collect();
        for (node, v) in sol.levels[level].iter_mut().zip(computed) {
            node.values = v;
        }
    }
    Ok(sol)
}

/// Fills the tree with a given function `y(e, t)` instead of solving, for
/// checking candidate solutions with [`residual`].
pub fn tabulate(
    sys: &SwitchSystem<f64>,
    final_data: &dyn FinalData,
    grid: &TreeGrid,
    y: &(dyn Fn(&ModeTrajectory, f64) -> Vec<f64> + Sync),
) -> Result<CascadeSolution, BsdeError> {
    let mut sol = prepare(sys, final_data, grid)?;
    let m = grid.max_jumps;
    for level in 0..sol.levels.len() {
        let computed: Vec<Vec<f64>> = (0..sol.levels[level].len())
            .into_par_iter()
            .map(|index| {
                let id = NodeId { level, index };
                let e = sol.trajectory(id);
                let b = sol.birth(id);
                let range = if level == m { b..=b } else { b..=grid.last() };
                range.flat_map(|i| y(&e, grid.points[i])).collect()
            })
            .collect();
        for (node, v) in sol.levels[level].iter_mut().zip(computed) {
            node.values = v;
        }
    }
    Ok(sol)
}

/// Largest mismatch of the cascade equations: centered differences at
/// interior grid points after each node's birth, plus `|y(T) - ξ|`.
pub fn residual(sys: &SwitchSystem<f64>, candidate: &CascadeSolution) -> f64 {
    let grid = &candidate.grid;
    let pts = &grid.points;
    let g_last = grid.last();
    let m = grid.max_jumps;
    let adj: Vec<Vec<Matrix<f64>>> = (0..sys.mode_count())
        .map(|g| (0..sys.mode_count()).map(|t| sys.jump_adjoint(g, t)).collect())
        .collect();
    let gens: Vec<Matrix<f64>> = (0..sys.mode_count()).map(|g| sys.dual_generator(g)).collect();
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    (0..candidate.levels.len())
        .map(|level| {
            (0..candidate.levels[level].len())
                .into_par_iter()
                .map(|index| {
                    let id = NodeId { level, index };
                    let xi = candidate.final_data(id);
                    let end = candidate.y(id, g_last);
                    let mut worst = sup(&end.iter().zip(xi).map(|(a, b)| a - b).collect::<Vec<_>>());
                    if level == m {
                        return worst;
                    }
                    let b = candidate.birth(id);
                    let k = &gens[candidate.mode(id)];
                    for i in b + 1..g_last {
                        let (hm, hp) = (pts[i] - pts[i - 1], pts[i + 1] - pts[i]);
                        let (ym, y0, yp) = (candidate.y(id, i - 1), candidate.y(id, i), candidate.y(id, i + 1));
                        let gi = candidate.forcing(sys, &adj, id, i);
                        let ky = matvec(k, y0);
                        let r: Vec<f64> = (0..y0.len())
                            .map(|c| {
                                let dy = (hm * hm * yp[c] - hp * hp * ym[c] - (hm * hm - hp * hp) * y0[c])
                                    / (hm * hp * (hm + hp));
                                dy + ky[c] + gi[c]
                            })
                            .collect();
                        worst = worst.max(sup(&r));
                    }
                    worst
                })
                .reduce(|| 0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::expm::expm_pade;
    use crate::scalar::Scalar;
    use crate::model::builtin;
    use crate::subspace::Tolerance;
    use crate::witness::build_witness;

    fn ex1() -> SwitchSystem<f64> {
        builtin("example1", &BTreeMap::new()).unwrap().to_f64()
    }

    #[test]
    fn node_count_matches_tree() {
        let sys = ex1();
        let grid = TreeGrid::uniform(1.0, 10, 2, 0);
        let zero = |_: &ModeTrajectory| Some(vec![0.0; 4]);
        let sol = solve_cascade(&sys, &zero, &grid).unwrap();
        assert_eq!(sol.node_count() as f64, count_nodes(&sys, &grid));
        assert_eq!(sol.node_count(), 1 + 10 + 45);
        assert!(sol.levels.iter().flatten().all(|n| n.values.iter().all(|&v| v == 0.0)));
        assert_eq!(residual(&sys, &sol), 0.0);
    }

    #[test]
    fn absorbing_mode_is_a_matrix_exponential() {
        let mut sys = ex1();
        sys.rates = vec![0.0, 0.0];
        let xi = vec![1.0, -2.0, 0.5, 3.0];
        let data = |_: &ModeTrajectory| Some(vec![1.0, -2.0, 0.5, 3.0]);
        let grid = TreeGrid::uniform(1.0, 50, 1, 0);
        let sol = solve_cascade(&sys, &data, &grid).unwrap();
        assert_eq!(sol.node_count(), 1);
        for i in [0, 10, 25] {
            let t = grid.points[i];
            let exact = expm_pade(&sys.a[0].transpose().scale(&(1.0 - t))).mul_vec(&xi);
            let err = sol.y(sol.root(), i).iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-10, "{err}");
        }
    }

    #[test]
    fn example1_witness_is_reproduced() {
        let exact = builtin("example1", &BTreeMap::new()).unwrap();
        let e3 = (0..4).map(|j| crate::scalar::Rational::from_i64((j == 2) as i64)).collect::<Vec<_>>();
        let w = build_witness(&exact, &[0, 1], &e3, &Tolerance::exact()).unwrap().to_f64();
        let sys = ex1();
        let grid = TreeGrid::uniform(1.0, 20, 2, 0);
        let sol = solve_cascade(&sys, &w, &grid).unwrap();
        let mut worst: f64 = 0.0;
        for level in 0..3 {
            for index in 0..sol.level_len(level) {
                let id = NodeId { level, index };
                let e = sol.trajectory(id);
                for i in sol.birth(id)..=grid.last() {
                    let want = w.y_at(&e, grid.points[i]);
                    for (a, b) in sol.y(id, i).iter().zip(&want) {
                        worst = worst.max((a - b).abs());
                    }
                }
            }
        }
        assert!(worst <= 1e-10, "{worst}");
        assert!(residual(&sys, &sol) <= 1e-10);
        // Z before the first jump towards mode 1, and after it towards mode 0.
        let z = sol.z_component(sol.root(), 5, 1).unwrap();
        assert_eq!(z, vec![0.0, 0.0, 1.0, 0.0]);
        let first = sol.find(&[(5, 1)]).unwrap();
        let z = sol.z_component(first, 8, 0).unwrap();
        assert_eq!(z, vec![0.0, 0.0, -2.0, 0.0]);
        assert!(sol.z_component(first, 5, 0).is_err());
        assert!(sol.z_component(first, 8, 1).is_err());
    }

    #[test]
    fn perturbation_is_detected() {
        let sys = ex1();
        let grid = TreeGrid::uniform(1.0, 20, 2, 0);
        let zero = |_: &ModeTrajectory| Some(vec![0.0; 4]);
        let mut sol = solve_cascade(&sys, &zero, &grid).unwrap();
        let id = sol.find(&[(4, 1), (9, 0)]).unwrap();
        sol.set_y(id, 9, &[1.0, 0.0, 0.0, 0.0]);
        // The parent sees λQ (C^T + I) e1 = e1 + e3 in its forcing at index 9.
        assert!(residual(&sys, &sol) >= 1.0);
    }

    #[test]
    fn limits() {
        let sys = ex1();
        let zero = |_: &ModeTrajectory| Some(vec![0.0; 4]);
        let grid = TreeGrid::uniform(1.0, 10, 4, 0);
        assert_eq!(solve_cascade(&sys, &zero, &grid).unwrap_err(), BsdeError::CapExceeded(4));
        let mut grid = TreeGrid::uniform(1.0, 400, 3, 0);
        grid.node_budget = 1000;
        assert!(matches!(solve_cascade(&sys, &zero, &grid), Err(BsdeError::TooManyNodes { .. })));
        let missing = |e: &ModeTrajectory| (e.jump_count() < 2).then(|| vec![0.0; 4]);
        let grid = TreeGrid::uniform(1.0, 10, 2, 0);
        assert!(matches!(solve_cascade(&sys, &missing, &grid), Err(BsdeError::MissingFinalData(_))));
    }
}

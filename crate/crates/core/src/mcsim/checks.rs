//! Statistical checks built on the simulator.

use rayon::prelude::*;
use serde::Serialize;

use super::{sample_mode_path, sample_with, ControlSpec, McError, Propagator, RngSpec};
use crate::bsde::FinalData;
use crate::expm::expm_pade;
use crate::matrix::{dot, Matrix};
use crate::model::{ModeTrajectory, SwitchSystem};
use crate::witness::{DualWitness, NodeState};

/// Fewest paths a check accepts.
pub const MIN_PATHS: usize = 100;

/// Two-sided 1% Kolmogorov-Smirnov constant, `sqrt(-ln(0.005) / 2)`.
const KS_ONE_PERCENT: f64 = 1.6276;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub n_paths: usize,
    pub seed: u64,
    /// Worker threads; 0 lets the pool decide. Results do not depend on it.
    pub threads: usize,
    /// Integration step; controls are constant on each step.
    pub grid_step: f64,
}

impl SimConfig {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        Self { n_paths, seed, threads: 0, grid_step: 0.05 }
    }

    fn check(&self) -> Result<(), McError> {
        if self.n_paths < MIN_PATHS {
            return Err(McError::TooFewPaths { min: MIN_PATHS, got: self.n_paths });
        }
        if !(self.grid_step > 0.0) {
            return Err(McError::BadGridStep(self.grid_step));
        }
        Ok(())
    }
}

/// Sum by recursive halving; the result depends only on the order of `v`.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub stderr: f64,
}

impl Stat {
    pub fn of(v: &[f64]) -> Self {
        let n = v.len() as f64;
        let mean = pairwise_sum(v) / n;
        let dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = if v.len() > 1 { pairwise_sum(&dev) / (n - 1.0) } else { 0.0 };
        Self { mean, stderr: (var / n).sqrt() }
    }
}

fn run_paths<T: Send>(threads: usize, n: usize, f: impl Fn(u64) -> T + Sync + Send) -> Result<Vec<T>, McError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| McError::Pool(e.to_string()))?;
    Ok(pool.install(|| (0..n as u64).into_par_iter().map(f).collect()))
}

/// Backward process paired with the state in the duality identity.
pub trait DualTarget: Sync {
    /// Per-path data computed once before evaluating `ξ` and `B* Y_t`.
    type Along;

    fn initial_mode(&self) -> usize;
    fn y0(&self) -> Vec<f64>;
    fn along(&self, path: &ModeTrajectory) -> Self::Along;
    fn xi(&self, along: &Self::Along) -> Vec<f64>;
    /// `B* Y_t`; `None` when the target only knows `ξ`, which limits it to
    /// the zero control.
    fn b_star_y(&self, along: &Self::Along, t: f64) -> Option<Vec<f64>>;
}

impl DualTarget for DualWitness<f64> {
    type Along = Vec<NodeState<f64>>;

    fn initial_mode(&self) -> usize {
        self.prefix[0]
    }

    fn y0(&self) -> Vec<f64> {
        DualWitness::y0(self)
    }

    fn along(&self, path: &ModeTrajectory) -> Self::Along {
        self.nodes(path)
    }

    fn xi(&self, along: &Self::Along) -> Vec<f64> {
        self.y_from_nodes(along, self.horizon)
    }

    fn b_star_y(&self, along: &Self::Along, t: f64) -> Option<Vec<f64>> {
        Some(self.b_star.mul_vec(&self.y_from_nodes(along, t)))
    }
}

/// Final data with the value `y^0(0)` of its cascade solution.
pub struct CascadeTarget<F> {
    pub data: F,
    pub y0: Vec<f64>,
    pub initial_mode: usize,
}

impl<F: FinalData> DualTarget for CascadeTarget<F> {
    type Along = Vec<f64>;

    fn initial_mode(&self) -> usize {
        self.initial_mode
    }

    fn y0(&self) -> Vec<f64> {
        self.y0.clone()
    }

    fn along(&self, path: &ModeTrajectory) -> Self::Along {
        self.data.final_value(path).unwrap_or_else(|| vec![f64::NAN; self.y0.len()])
    }

    fn xi(&self, along: &Self::Along) -> Vec<f64> {
        along.clone()
    }

    fn b_star_y(&self, _: &Self::Along, _: f64) -> Option<Vec<f64>> {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityReport {
    pub n_paths: usize,
    pub seed: u64,
    pub control: String,
    /// `<X_T, ξ> - <x0, Y_0>`.
    pub lhs: Stat,
    /// `∫ <u, B* Y> dt`, midpoint rule per step.
    pub rhs: Stat,
    pub difference: Stat,
    pub pass: bool,
    /// `|X_T - ξ|^2`.
    pub distance: Stat,
    /// `|ξ|^2`.
    pub xi_norm: Stat,
    /// `|X_T - ξ|^2 - |ξ|^2`.
    pub gap: Stat,
    /// Mean distance at least the mean `|ξ|^2` (up to 3 standard errors) and
    /// `|ξ|^2` significantly positive.
    pub distance_pass: bool,
}

/// Monte-Carlo check of `E<X_T, ξ> - <x0, Y_0> = E ∫ <u, B* Y> dt`.
pub fn duality_check<T: DualTarget>(
    sys: &SwitchSystem<f64>,
    target: &T,
    u: &ControlSpec,
    x0: &[f64],
    cfg: &SimConfig,
) -> Result<DualityReport, McError> {
    cfg.check()?;
    if x0.len() != sys.state_dim {
        return Err(McError::StateLength { expected: sys.state_dim, found: x0.len() });
    }
    let prop = Propagator::new(sys, u, cfg.grid_step)?;
    let zero_control = u.is_zero();
    let y0 = target.y0();
    let x0y0 = dot(x0, &y0);
    let rows = run_paths(cfg.threads, cfg.n_paths, |i| {
        let path = sample_mode_path(sys, target.initial_mode(), &RngSpec::new(cfg.seed, i));
        let along = target.along(&path);
        let mut rhs = 0.0;
        let mut unsupported = false;
        let xt = prop.run(sys, &path, x0, |seg| {
            if zero_control {
                return;
            }
            match target.b_star_y(&along, 0.5 * (seg.t0 + seg.t1)) {
                Some(by) => rhs += dot(&seg.u_mid, &by) * (seg.t1 - seg.t0),
                None => unsupported = true,
            }
        });
        let xi = target.xi(&along);
        let dist: f64 = xt.iter().zip(&xi).map(|(a, b)| (a - b) * (a - b)).sum();
        let xi2 = dot(&xi, &xi);
        (unsupported, [dot(&xt, &xi) - x0y0, rhs, dist, xi2])
    })?;
    if rows.iter().any(|r| r.0) {
        return Err(McError::NeedsZeroControl);
    }
    let col = |k: usize| rows.iter().map(|r| r.1[k]).collect::<Vec<f64>>();
    let (lhs, rhs, dist, xi2) = (col(0), col(1), col(2), col(3));
    let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    let gap: Vec<f64> = dist.iter().zip(&xi2).map(|(a, b)| a - b).collect();
    let difference = Stat::of(&diff);
    let (distance, xi_norm, gap) = (Stat::of(&dist), Stat::of(&xi2), Stat::of(&gap));
    Ok(DualityReport {
        n_paths: cfg.n_paths,
        seed: cfg.seed,
        control: u.to_string(),
        lhs: Stat::of(&lhs),
        rhs: Stat::of(&rhs),
        difference,
        pass: difference.mean.abs() <= 3.0 * difference.stderr,
        distance,
        xi_norm,
        gap,
        distance_pass: distance.mean >= xi_norm.mean - 3.0 * gap.stderr && xi_norm.mean - 3.0 * xi_norm.stderr > 0.0,
    })
}

/// Moments `m_{g,k}(t) = E[X_t; mode g, k jumps]` from the linear master
/// equation, flattened as `(k * p + g) * N + i`. Level `k = M` is frozen.
pub fn master_moments(sys: &SwitchSystem<f64>, x0: &[f64], initial_mode: usize, t: f64) -> Vec<f64> {
    let (n, p, m) = (sys.state_dim, sys.mode_count(), sys.max_jumps);
    let dim = (m + 1) * p * n;
    let block = |k: usize, g: usize| (k * p + g) * n;
    let mut l = Matrix::zeros(dim, dim);
    let mut put = |r: usize, c: usize, blk: &Matrix<f64>| {
        for i in 0..n {
            for j in 0..n {
                l[(r + i, c + j)] += blk[(i, j)] * t;
            }
        }
    };
    for k in 0..m {
        for g in 0..p {
            let own = sys.compensated_drift(g).sub(&Matrix::identity(n).scale(&sys.rates[g]));
            put(block(k, g), block(k, g), &own);
            for th in sys.active_targets(g) {
                let inflow = sys.c[g][th].add(&Matrix::identity(n)).scale(&sys.jump_weight(g, th));
                put(block(k + 1, th), block(k, g), &inflow);
            }
        }
    }
    let mut m0 = vec![0.0; dim];
    m0[block(0, initial_mode)..block(0, initial_mode) + n].copy_from_slice(x0);
    expm_pade(&l).mul_vec(&m0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub time: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub monte_carlo: Vec<Stat>,
    pub master: Vec<f64>,
    /// Largest `|mc - master| / stderr` over components with positive error.
    pub worst_ratio: f64,
    pub pass: bool,
}

/// Compares simulated moments with [`master_moments`] at time `t`, with
/// zero control. Each component must agree within 4 standard errors.
pub fn moment_check(
    sys: &SwitchSystem<f64>,
    x0: &[f64],
    initial_mode: usize,
    t: f64,
    cfg: &SimConfig,
) -> Result<MomentReport, McError> {
    cfg.check()?;
    if x0.len() != sys.state_dim {
        return Err(McError::StateLength { expected: sys.state_dim, found: x0.len() });
    }
    if !(t > 0.0 && t <= sys.horizon) {
        return Err(McError::BadTime(t));
    }
    let cut = sys.clone().with_horizon(t);
    let prop = Propagator::new(&cut, &ControlSpec::Zero, cfg.grid_step)?;
    let (n, p) = (sys.state_dim, sys.mode_count());
    let dim = (sys.max_jumps + 1) * p * n;
    let rows = run_paths(cfg.threads, cfg.n_paths, |i| {
        let path = sample_mode_path(&cut, initial_mode, &RngSpec::new(cfg.seed, i));
        let xt = prop.run(&cut, &path, x0, |_| {});
        let slot = (path.jump_count() * p + path.current_mode()) * n;
        let mut row = vec![0.0; dim];
        row[slot..slot + n].copy_from_slice(&xt);
        row
    })?;
    let monte_carlo: Vec<Stat> =
        (0..dim).map(|c| Stat::of(&rows.iter().map(|r| r[c]).collect::<Vec<_>>())).collect();
    let master = master_moments(sys, x0, initial_mode, t);
    let mut worst_ratio: f64 = 0.0;
    let mut pass = true;
    for (s, m) in monte_carlo.iter().zip(&master) {
        let err = (s.mean - m).abs();
        pass &= err <= 4.0 * s.stderr + 1e-12;
        if s.stderr > 0.0 {
            worst_ratio = worst_ratio.max(err / s.stderr);
        }
    }
    Ok(MomentReport { time: t, n_paths: cfg.n_paths, seed: cfg.seed, monte_carlo, master, worst_ratio, pass })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KsReport {
    pub n_samples: usize,
    pub rate: f64,
    pub statistic: f64,
    pub critical: f64,
    pub pass: bool,
}

/// Kolmogorov-Smirnov test of the first jump time against the exponential
/// law of the initial mode's rate, at the 1% level.
pub fn ks_first_jump(sys: &SwitchSystem<f64>, initial_mode: usize, cfg: &SimConfig) -> Result<KsReport, McError> {
    cfg.check()?;
    let rate = sys.rates[initial_mode];
    let mut one = sys.clone();
    one.max_jumps = 1;
    let mut times = run_paths(cfg.threads, cfg.n_paths, |i| {
        let mut rng = RngSpec::new(cfg.seed, i).rng();
        let path = sample_with(&one, initial_mode, f64::INFINITY, &mut rng);
        path.jump_times().get(1).copied().unwrap_or(f64::INFINITY)
    })?;
    times.sort_by(f64::total_cmp);
    let n = times.len() as f64;
    let statistic = times
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = if x.is_finite() { 1.0 - (-rate * x).exp() } else { 1.0 };
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max);
    let critical = KS_ONE_PERCENT / n.sqrt();
    Ok(KsReport { n_samples: cfg.n_paths, rate, statistic, critical, pass: statistic < critical })
}

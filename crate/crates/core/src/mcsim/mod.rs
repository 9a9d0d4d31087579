//! Monte-Carlo simulation of the switched system.
//!
//! Paths are sampled one per `(seed, stream)` pair from a ChaCha8 generator
//! (`seed_from_u64(seed)` then `set_stream(stream)`), so a path does not
//! depend on which thread draws it. Between events the state follows the
//! compensated affine flow, integrated exactly with matrix exponentials.

mod checks;
mod control;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::expm::expm_pade;
use crate::matrix::Matrix;
use crate::model::{ModeTrajectory, SwitchSystem};

pub use checks::{
    duality_check, ks_first_jump, moment_check, master_moments, pairwise_sum, CascadeTarget, DualTarget,
    DualityReport, KsReport, MomentReport, SimConfig, Stat,
};
pub use control::ControlSpec;

#[derive(Debug, Error, PartialEq)]
pub enum McError {
    #[error("at least {min} paths are needed, got {got}")]
    TooFewPaths { min: usize, got: usize },
    #[error("grid step must be positive, got {0}")]
    BadGridStep(f64),
    #[error("initial state has length {found}, expected {expected}")]
    StateLength { expected: usize, found: usize },
    #[error("bad control: {0}")]
    Control(String),
    #[error("this target only supports the zero control")]
    NeedsZeroControl,
    #[error("thread pool: {0}")]
    Pool(String),
    #[error("time {0} is outside [0, T]")]
    BadTime(f64),
}

/// Generator key for one path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RngSpec {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngSpec {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Draws jump times and marks up to the horizon or the jump cap. The
/// result is always closed.
pub fn sample_mode_path(sys: &SwitchSystem<f64>, initial_mode: usize, spec: &RngSpec) -> ModeTrajectory {
    let mut rng = spec.rng();
    sample_with(sys, initial_mode, sys.horizon, &mut rng)
}

fn sample_with(sys: &SwitchSystem<f64>, initial_mode: usize, horizon: f64, rng: &mut ChaCha8Rng) -> ModeTrajectory {
    let mut path = ModeTrajectory::new(horizon, initial_mode);
    let mut t = 0.0;
    let mut mode = initial_mode;
    while path.jump_count() < sys.max_jumps {
        let rate = sys.rates[mode];
        if rate <= 0.0 {
            break;
        }
        let u: f64 = rng.random();
        t += -(1.0 - u).ln() / rate;
        if t > horizon {
            break;
        }
        let mark: f64 = rng.random();
        let row = sys.transition.row(mode);
        let mut acc = 0.0;
        let mut next = None;
        for (k, &q) in row.iter().enumerate() {
            if q > 0.0 {
                acc += q;
                next = Some(k);
                if mark < acc {
                    break;
                }
            }
        }
        let Some(next) = next else { break };
        if path.push(t, next).is_err() {
            break;
        }
        mode = next;
    }
    path.close();
    path
}

/// One simulated path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathRealization {
    #[serde(skip)]
    pub trajectory: ModeTrajectory,
    /// Segment end points; a jump time appears twice (before and after).
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub terminal: Vec<f64>,
}

/// A stretch `[t0, t1]` of constant mode and control.
pub(crate) struct Segment<'a> {
    pub t0: f64,
    pub t1: f64,
    pub x0: &'a [f64],
    pub x1: &'a [f64],
    pub u_mid: Vec<f64>,
}

/// Step exponentials shared by all paths of one run.
pub(crate) struct Propagator {
    n: usize,
    h: f64,
    horizon: f64,
    /// `[regime][mode]` drift; regime 1 is after the last allowed jump.
    drift: [Vec<Matrix<f64>>; 2],
    /// `[regime][mode][piece]` augmented exponential over one full step.
    full: [Vec<Vec<Matrix<f64>>>; 2],
    jump: Vec<Vec<Matrix<f64>>>,
    control: ControlSpec,
    b: Matrix<f64>,
}

impl Propagator {
    pub fn new(sys: &SwitchSystem<f64>, control: &ControlSpec, h: f64) -> Result<Self, McError> {
        if !(h > 0.0) {
            return Err(McError::BadGridStep(h));
        }
        control.check(sys)?;
        let p = sys.mode_count();
        let n = sys.state_dim;
        let closed = |g: usize, base: Matrix<f64>| match control {
            ControlSpec::Feedback(k) => base.add(&sys.b.matmul(&k[g])),
            _ => base,
        };
        let drift = [
            (0..p).map(|g| closed(g, sys.compensated_drift(g))).collect::<Vec<_>>(),
            (0..p).map(|g| closed(g, Matrix::zeros(n, n))).collect::<Vec<_>>(),
        ];
        let jump = (0..p)
            .map(|g| (0..p).map(|t| sys.c[g][t].add(&Matrix::identity(n))).collect())
            .collect();
        let mut prop = Self {
            n,
            h,
            horizon: sys.horizon,
            drift,
            full: [Vec::new(), Vec::new()],
            jump,
            control: control.clone(),
            b: sys.b.clone(),
        };
        let pieces = control.pieces();
        for regime in 0..2 {
            prop.full[regime] = (0..p)
                .map(|g| (0..pieces).map(|k| prop.augmented(regime, g, k, h)).collect())
                .collect();
        }
        Ok(prop)
    }

    fn forcing(&self, piece: usize) -> Vec<f64> {
        match self.control.open_loop(piece) {
            Some(u) => self.b.mul_vec(u),
            None => vec![0.0; self.n],
        }
    }

    fn augmented(&self, regime: usize, g: usize, piece: usize, tau: f64) -> Matrix<f64> {
        let n = self.n;
        let f = &self.drift[regime][g];
        let b = self.forcing(piece);
        let mut m = Matrix::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f[(i, j)] * tau;
            }
            m[(i, n)] = b[i] * tau;
        }
        expm_pade(&m)
    }

    fn apply(e: &Matrix<f64>, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| (0..n).map(|j| e[(i, j)] * x[j]).sum::<f64>() + e[(i, n)])
            .collect()
    }

    /// Runs one path, calling `on_segment` for every stretch of positive
    /// length, and returns `X_T`.
    pub fn run(
        &self,
        sys: &SwitchSystem<f64>,
        path: &ModeTrajectory,
        x0: &[f64],
        mut on_segment: impl FnMut(Segment<'_>),
    ) -> Vec<f64> {
        let horizon = self.horizon;
        let jumps: Vec<(f64, usize)> = path.jump_times().into_iter().zip(path.modes()).skip(1).collect();
        let grid_len = (horizon / self.h).ceil() as usize;
        let grid = |k: usize| if k >= grid_len { horizon } else { k as f64 * self.h };
        let mut x = x0.to_vec();
        let mut mode = path.initial_mode();
        let mut count = 0usize;
        let mut t = 0.0;
        let mut k = 0usize;
        let mut next_jump = 0usize;
        loop {
            // Apply every jump scheduled at the current time.
            while next_jump < jumps.len() && jumps[next_jump].0 <= t {
                let (_, to) = jumps[next_jump];
                x = self.jump[mode][to].mul_vec(&x);
                mode = to;
                count += 1;
                next_jump += 1;
            }
            if t >= horizon {
                break;
            }
            while grid(k + 1) <= t {
                k += 1;
            }
            let grid_end = grid(k + 1);
            let jump_at = jumps.get(next_jump).map_or(f64::INFINITY, |j| j.0);
            let t1 = grid_end.min(jump_at);
            let regime = usize::from(count >= sys.max_jumps);
            let piece = self.control.piece_at(k, grid_len);
            let full = t == grid(k) && t1 == grid_end && ((t1 - t) - self.h).abs() <= 1e-12 * self.h;
            let x1 = if full {
                Self::apply(&self.full[regime][mode][piece], &x)
            } else {
                Self::apply(&self.augmented(regime, mode, piece, t1 - t), &x)
            };
            let u_mid = match &self.control {
                ControlSpec::Feedback(kk) => {
                    let mid: Vec<f64> = x.iter().zip(&x1).map(|(a, b)| 0.5 * (a + b)).collect();
                    kk[mode].mul_vec(&mid)
                }
                c => c.open_loop(piece).map_or_else(|| vec![0.0; sys.control_dim], <[f64]>::to_vec),
            };
            on_segment(Segment { t0: t, t1, x0: &x, x1: &x1, u_mid });
            x = x1;
            t = t1;
        }
        x
    }
}

/// Integrates the state along a sampled path with the given control; the
/// control is held constant on each grid step.
pub fn integrate_state(
    sys: &SwitchSystem<f64>,
    path: &ModeTrajectory,
    x0: &[f64],
    control: &ControlSpec,
    grid_step: f64,
) -> Result<PathRealization, McError> {
    if x0.len() != sys.state_dim {
        return Err(McError::StateLength { expected: sys.state_dim, found: x0.len() });
    }
    let prop = Propagator::new(sys, control, grid_step)?;
    let mut times = vec![0.0];
    let mut states = vec![x0.to_vec()];
    let terminal = prop.run(sys, path, x0, |seg| {
        if seg.x0 != states.last().expect("nonempty").as_slice() {
            times.push(seg.t0);
            states.push(seg.x0.to_vec());
        }
        times.push(seg.t1);
        states.push(seg.x1.to_vec());
    });
    if states.last() != Some(&terminal) {
        times.push(sys.horizon);
        states.push(terminal.clone());
    }
    Ok(PathRealization { trajectory: path.clone(), times, states, terminal })
}

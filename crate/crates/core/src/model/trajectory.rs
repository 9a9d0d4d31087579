//! Mode trajectories `((t0, g0), ..., (tn, gn))`.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajectoryError {
    #[error("jump time {t} must exceed the last jump time {last}")]
    NotIncreasing { t: f64, last: f64 },
    #[error("jump time {t} is beyond the horizon {horizon}")]
    BeyondHorizon { t: f64, horizon: f64 },
    #[error("trajectory already ended in the cemetery state")]
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mark {
    Mode(usize),
    Cemetery,
}

/// Jump times and post-jump modes on `[0, T]`, optionally closed by the
/// cemetery entry `(∞, cemetery)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeTrajectory {
    horizon: f64,
    entries: Vec<(f64, Mark)>,
}

impl ModeTrajectory {
    pub fn new(horizon: f64, initial_mode: usize) -> Self {
        Self { horizon, entries: vec![(0.0, Mark::Mode(initial_mode))] }
    }

    /// Builds `((0, g0), (t1, g1), ...)` from its jumps.
    pub fn from_jumps(horizon: f64, initial_mode: usize, jumps: &[(f64, usize)]) -> Result<Self, TrajectoryError> {
        jumps
            .iter()
            .try_fold(Self::new(horizon, initial_mode), |e, &(t, g)| e.concat(t, g))
    }

    /// `e ⊕ (t, g)`; needs `|e| < t <= T`.
    pub fn concat(&self, t: f64, mode: usize) -> Result<Self, TrajectoryError> {
        let mut out = self.clone();
        out.push(t, mode)?;
        Ok(out)
    }

    pub fn push(&mut self, t: f64, mode: usize) -> Result<(), TrajectoryError> {
        if self.is_closed() {
            return Err(TrajectoryError::Closed);
        }
        let last = self.last_time();
        if !(t > last) {
            return Err(TrajectoryError::NotIncreasing { t, last });
        }
        if t > self.horizon {
            return Err(TrajectoryError::BeyondHorizon { t, horizon: self.horizon });
        }
        self.entries.push((t, Mark::Mode(mode)));
        Ok(())
    }

    /// Appends the cemetery entry. Idempotent.
    pub fn close(&mut self) {
        if !self.is_closed() {
            self.entries.push((f64::INFINITY, Mark::Cemetery));
        }
    }

    pub fn is_closed(&self) -> bool {
        matches!(self.entries.last(), Some((_, Mark::Cemetery)))
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn entries(&self) -> &[(f64, Mark)] {
        &self.entries
    }

    /// Number of jumps to a real mode.
    pub fn jump_count(&self) -> usize {
        self.modes().len() - 1
    }

    /// Time of the last recorded jump, `|e|`.
    pub fn last_time(&self) -> f64 {
        self.entries.last().map_or(0.0, |e| e.0)
    }

    /// Time of the last jump to a real mode.
    pub fn last_jump_time(&self) -> f64 {
        self.jump_times().last().copied().unwrap_or(0.0)
    }

    /// Mode after the last real jump.
    pub fn current_mode(&self) -> usize {
        *self.modes().last().expect("trajectory has an initial mode")
    }

    pub fn initial_mode(&self) -> usize {
        self.modes()[0]
    }

    /// `g0, g1, ...` without the cemetery.
    pub fn modes(&self) -> Vec<usize> {
        self.entries
            .iter()
            .filter_map(|(_, m)| match m {
                Mark::Mode(g) => Some(*g),
                Mark::Cemetery => None,
            })
            .collect()
    }

    /// `t0 = 0, t1, ...` without the cemetery.
    pub fn jump_times(&self) -> Vec<f64> {
        self.entries
            .iter()
            .filter(|(_, m)| matches!(m, Mark::Mode(_)))
            .map(|(t, _)| *t)
            .collect()
    }

    /// Mode in force at time `t` (right-continuous).
    pub fn mode_at(&self, t: f64) -> usize {
        let mut g = self.initial_mode();
        for &(s, m) in &self.entries {
            match m {
                Mark::Mode(h) if s <= t => g = h,
                _ => break,
            }
        }
        g
    }

    /// Number of jumps in `(0, t]`.
    pub fn jumps_until(&self, t: f64) -> usize {
        self.jump_times()[1..].iter().filter(|&&s| s <= t).count()
    }

    /// The first `k` jumps.
    pub fn prefix(&self, k: usize) -> Self {
        Self { horizon: self.horizon, entries: self.entries[..=k].to_vec() }
    }

    pub fn to_json(&self, mode_names: &[String]) -> serde_json::Value {
        serde_json::Value::Array(
            self.entries
                .iter()
                .map(|(t, m)| match m {
                    Mark::Mode(g) => serde_json::json!([t, mode_names[*g]]),
                    Mark::Cemetery => serde_json::json!(["inf", "cemetery"]),
                })
                .collect(),
        )
    }
}

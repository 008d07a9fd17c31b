//! Quadratic-penalty baseline.
//!
//! Outer stage `s = 1, 2, ...` runs `inner_iters` gradient steps on
//! `F_s(x) = f(x) + phi(x) / mu(s)`, with `f(x) = sum_i 1/2 d(x_i, z_i)^2`
//! and `phi` the consensus error. Stages are counted in gradient steps, so
//! global step `k` belongs to stage `k / inner_iters + 1`.

use crate::error::{Error, Result};
use crate::geometry::{left_log, GroupPoint};
use crate::graph::Graph;
use crate::rcm::Configuration;

use super::{consensus_directions, retract_all, run_with_sink, InitMode, Method, NetworkState, SolverConfig, TraceRecord};

/// Penalty parameter schedule `mu(s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltySchedule {
    /// `mu(s) = 1 / sqrt(s)`
    InvSqrt,
    /// `mu(s) = 1 / s`
    InvLinear,
}

impl PenaltySchedule {
    pub fn mu(&self, stage: usize) -> f64 {
        let s = stage as f64;
        match self {
            PenaltySchedule::InvSqrt => 1.0 / s.sqrt(),
            PenaltySchedule::InvLinear => 1.0 / s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyParams {
    /// Gradient steps per outer stage (S).
    pub inner_iters: usize,
    pub schedule: PenaltySchedule,
}

impl Default for PenaltyParams {
    fn default() -> Self {
        Self {
            inner_iters: 50,
            schedule: PenaltySchedule::InvSqrt,
        }
    }
}

impl PenaltyParams {
    pub fn validate(&self) -> Result<()> {
        if self.inner_iters == 0 {
            return Err(Error::InvalidArgument("penalty inner_iters must be positive".into()));
        }
        Ok(())
    }

    /// Penalty weight `1 / mu(s)` and step size for global step `k` (0-based).
    ///
    /// The step is `eps * mu(s)`, i.e. a step of `eps` on the rescaled
    /// objective `mu(s) F_s = mu(s) f + phi`, which has the same minimizer as
    /// `F_s` but whose curvature stays bounded as the penalty weight grows.
    pub fn stage(&self, k: usize, eps: f64) -> (f64, f64) {
        let mu = self.schedule.mu(k / self.inner_iters + 1);
        (1.0 / mu, eps * mu)
    }
}

/// One gradient step on `f + weight * phi`.
pub fn penalty_step(
    state: &NetworkState,
    z: &Configuration,
    g: &Graph,
    eps: f64,
    weight: f64,
) -> Result<NetworkState> {
    super::check_shapes(state, Some(z), g)?;
    let mut dirs = consensus_directions(&state.x, g)?;
    for ((d, xi), zi) in dirs.iter_mut().zip(&state.x).zip(z.points()) {
        *d = d.scale(weight);
        *d += &left_log(xi, zi)?;
    }
    Ok(NetworkState {
        x: retract_all(&state.x, &dirs, eps),
        w: state.w.clone(),
    })
}

/// Runs the penalty method for `iterations` gradient steps, streaming the trace.
pub fn penalty_run(
    z: &Configuration,
    z_bar: &GroupPoint,
    g: &Graph,
    params: PenaltyParams,
    step_size: f64,
    iterations: usize,
    init: &InitMode,
    sink: &mut dyn FnMut(&TraceRecord),
) -> Result<NetworkState> {
    let config = SolverConfig::new(Method::Penalty(params), step_size, iterations);
    run_with_sink(&config, z, z_bar, g, init, 0, sink)
}

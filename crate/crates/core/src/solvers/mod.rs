//! Discretized consensus solvers for the Riemannian center of mass.
//!
//! Every solver advances a [`NetworkState`] by one forward-Euler step on the
//! agents' tangent spaces, using the Lie group exponential as retraction. All
//! agents update simultaneously from the pre-step state.
//!
//! * [`algorithm1_step`]: distributed gradient flow closed with gradient
//!   tracking on the Lie algebra. Each agent keeps a latent `w_i` and forms
//!   `v_i = -w_i + Log(z_i^{-1} x_i)`, moves along
//!   `sum_{j~i} Log(x_i^{-1} x_j) - v_i`, and updates
//!   `w_i += eps * sum_{j~i} (v_i - v_j)`.
//! * [`dgf_step`]: the open-loop distributed gradient flow.
//! * [`tron_step`]: Riemannian gradient descent on the consensus error alone.
//! * [`penalty`] and [`lagrangian`]: constrained-optimization baselines.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{left_log, retract, sample_in_ball, AlgebraVector, Group, GroupPoint};
use crate::graph::{field_sum, AlgebraField, Graph};
use crate::rcm::{consensus_error, karcher_mean, rcm_error, Configuration, KarcherOptions};

pub mod lagrangian;
pub mod penalty;

pub use lagrangian::{lagrangian_step, LagrangianParams};
pub use penalty::{penalty_run, penalty_step, PenaltyParams, PenaltySchedule};

/// A run is declared divergent when the summed error metrics grow past this
/// multiple of their initial value.
pub const DIVERGENCE_FACTOR: f64 = 1e3;

/// Per-agent states `x_i` and latent tracking variables `w_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub x: Vec<GroupPoint>,
    pub w: AlgebraField,
}

impl NetworkState {
    pub fn new(x: Vec<GroupPoint>, w: AlgebraField) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::InvalidArgument("network state needs at least one agent".into()));
        }
        if x.len() != w.len() {
            return Err(Error::LengthMismatch {
                expected: x.len(),
                found: w.len(),
            });
        }
        let group = x[0].group();
        for found in x.iter().map(GroupPoint::group).chain(w.iter().map(AlgebraVector::group)) {
            if found != group {
                return Err(Error::GroupMismatch {
                    expected: group,
                    found,
                });
            }
        }
        Ok(Self { x, w })
    }

    /// Agents at `x` with `w = 0`.
    pub fn from_points(x: Vec<GroupPoint>) -> Result<Self> {
        let group = x
            .first()
            .ok_or_else(|| Error::InvalidArgument("network state needs at least one agent".into()))?
            .group();
        let w = vec![group.zero(); x.len()];
        Self::new(x, w)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn group(&self) -> Group {
        self.x[0].group()
    }

    /// `sum_i w_i`, conserved by `algorithm1`.
    pub fn w_sum(&self) -> AlgebraVector {
        field_sum(&self.w).unwrap_or_else(|| self.group().zero())
    }

    /// Largest entrywise change between two states of the same shape.
    pub fn max_abs_diff(&self, other: &NetworkState) -> f64 {
        let dx = self
            .x
            .iter()
            .zip(&other.x)
            .map(|(a, b)| a.max_abs_diff(b));
        let dw = self.w.iter().zip(&other.w).map(|(a, b)| {
            a.coords()
                .iter()
                .zip(b.coords())
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max)
        });
        dx.chain(dw).fold(0.0, f64::max)
    }
}

/// Solver family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Algorithm1,
    Dgf,
    Tron,
    Penalty(PenaltyParams),
    Lagrangian(LagrangianParams),
}

impl Method {
    pub const NAMES: [&'static str; 5] = ["algorithm1", "dgf", "tron", "penalty", "lagrangian"];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Algorithm1 => "algorithm1",
            Method::Dgf => "dgf",
            Method::Tron => "tron",
            Method::Penalty(_) => "penalty",
            Method::Lagrangian(_) => "lagrangian",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    /// Forward-Euler step size.
    pub step_size: f64,
    /// Number of steps. For penalty and Lagrangian one step is one gradient evaluation.
    pub iterations: usize,
}

impl SolverConfig {
    pub fn new(method: Method, step_size: f64, iterations: usize) -> Self {
        Self {
            method,
            step_size,
            iterations,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "step size must be positive, got {}",
                self.step_size
            )));
        }
        match self.method {
            Method::Penalty(p) => p.validate(),
            Method::Lagrangian(p) => p.validate(),
            _ => Ok(()),
        }
    }
}

/// One row of a solver trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub consensus_error: f64,
    pub rcm_error: f64,
}

/// Initial agent positions. `w(0) = 0` in every mode.
#[derive(Debug, Clone, PartialEq)]
pub enum InitMode {
    /// `x_i(0) = z_i`.
    AtZ,
    /// `x_i(0) = e`.
    AtIdentity,
    Explicit(Vec<GroupPoint>),
    /// `x_i(0)` drawn from the ball of this radius around `z_i`, using the run seed.
    RandomNearZ { radius: f64 },
}

impl InitMode {
    pub fn initial_state(&self, z: &Configuration, seed: u64) -> Result<NetworkState> {
        let x = match self {
            InitMode::AtZ => z.points().to_vec(),
            InitMode::AtIdentity => vec![z.group().identity(); z.len()],
            InitMode::Explicit(points) => {
                if points.len() != z.len() {
                    return Err(Error::LengthMismatch {
                        expected: z.len(),
                        found: points.len(),
                    });
                }
                points.clone()
            }
            InitMode::RandomNearZ { radius } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                z.points()
                    .iter()
                    .map(|zi| sample_in_ball(zi, *radius, &mut rng))
                    .collect()
            }
        };
        let state = NetworkState::from_points(x)?;
        if state.group() != z.group() {
            return Err(Error::GroupMismatch {
                expected: z.group(),
                found: state.group(),
            });
        }
        Ok(state)
    }
}

/// `sum_{j~i} Log(x_i^{-1} x_j)` for every agent: minus the left-trivialized
/// gradient of the consensus error.
pub(crate) fn consensus_directions(x: &[GroupPoint], g: &Graph) -> Result<AlgebraField> {
    let group = x[0].group();
    let mut out = vec![group.zero(); x.len()];
    for &(i, j) in g.edges() {
        let c = left_log(&x[i], &x[j])?;
        // Log(x_j^{-1} x_i) = -Log(x_i^{-1} x_j)
        out[i] += &c;
        out[j].axpy(-1.0, &c);
    }
    Ok(out)
}

fn check_shapes(state: &NetworkState, z: Option<&Configuration>, g: &Graph) -> Result<()> {
    if state.len() != g.n_agents() {
        return Err(Error::LengthMismatch {
            expected: g.n_agents(),
            found: state.len(),
        });
    }
    if let Some(z) = z {
        if z.len() != g.n_agents() {
            return Err(Error::LengthMismatch {
                expected: g.n_agents(),
                found: z.len(),
            });
        }
        if z.group() != state.group() {
            return Err(Error::GroupMismatch {
                expected: state.group(),
                found: z.group(),
            });
        }
    }
    Ok(())
}

/// One forward-Euler step of `algorithm1` (gradient flow plus gradient tracking).
pub fn algorithm1_step(
    state: &NetworkState,
    z: &Configuration,
    g: &Graph,
    eps: f64,
) -> Result<NetworkState> {
    check_shapes(state, Some(z), g)?;
    let consensus = consensus_directions(&state.x, g)?;
    let v = state
        .w
        .iter()
        .zip(z.points())
        .zip(&state.x)
        .map(|((wi, zi), xi)| Ok(&left_log(zi, xi)? - wi))
        .collect::<Result<Vec<_>>>()?;
    let lv = g.laplacian_apply(&v)?;
    let x = state
        .x
        .iter()
        .zip(&consensus)
        .zip(&v)
        .map(|((xi, ci), vi)| retract(xi, &(ci - vi), eps))
        .collect();
    let w = state
        .w
        .iter()
        .zip(&lv)
        .map(|(wi, lvi)| {
            let mut next = wi.clone();
            next.axpy(eps, lvi);
            next
        })
        .collect();
    Ok(NetworkState { x, w })
}

/// One step of the distributed gradient flow: consensus plus local-cost descent.
pub fn dgf_step(state: &NetworkState, z: &Configuration, g: &Graph, eps: f64) -> Result<NetworkState> {
    check_shapes(state, Some(z), g)?;
    let mut dirs = consensus_directions(&state.x, g)?;
    for ((d, xi), zi) in dirs.iter_mut().zip(&state.x).zip(z.points()) {
        *d += &left_log(xi, zi)?;
    }
    Ok(NetworkState {
        x: retract_all(&state.x, &dirs, eps),
        w: state.w.clone(),
    })
}

/// One step of Riemannian gradient descent on the consensus error.
pub fn tron_step(state: &NetworkState, g: &Graph, eps: f64) -> Result<NetworkState> {
    check_shapes(state, None, g)?;
    let dirs = consensus_directions(&state.x, g)?;
    Ok(NetworkState {
        x: retract_all(&state.x, &dirs, eps),
        w: state.w.clone(),
    })
}

pub(crate) fn retract_all(x: &[GroupPoint], dirs: &[AlgebraVector], eps: f64) -> Vec<GroupPoint> {
    x.iter().zip(dirs).map(|(xi, d)| retract(xi, d, eps)).collect()
}

/// Carries the per-method auxiliary state across steps.
struct Stepper {
    config: SolverConfig,
    multipliers: Option<AlgebraField>,
    steps_taken: usize,
}

impl Stepper {
    fn new(config: SolverConfig, g: &Graph, group: Group) -> Self {
        let multipliers = matches!(config.method, Method::Lagrangian(_))
            .then(|| vec![group.zero(); g.edges().len()]);
        Self {
            config,
            multipliers,
            steps_taken: 0,
        }
    }

    fn step(&mut self, state: &NetworkState, z: &Configuration, g: &Graph) -> Result<NetworkState> {
        let eps = self.config.step_size;
        let next = match self.config.method {
            Method::Algorithm1 => algorithm1_step(state, z, g, eps)?,
            Method::Dgf => dgf_step(state, z, g, eps)?,
            Method::Tron => tron_step(state, g, eps)?,
            Method::Penalty(p) => {
                let (weight, step) = p.stage(self.steps_taken, eps);
                penalty_step(state, z, g, step, weight)?
            }
            Method::Lagrangian(p) => {
                let lambda = self.multipliers.as_ref().expect("multipliers initialized");
                let (next, lambda) = lagrangian_step(state, lambda, z, g, &p, eps)?;
                self.multipliers = Some(lambda);
                next
            }
        };
        self.steps_taken += 1;
        Ok(next)
    }
}

/// Output of [`run`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Vec<TraceRecord>,
    pub state: NetworkState,
}

/// Runs a solver from the chosen initialization, recording both error
/// metrics before the first step and after every step. The reference mean is
/// computed once with the centralized Karcher iteration.
pub fn run(
    config: &SolverConfig,
    z: &Configuration,
    g: &Graph,
    init: &InitMode,
    seed: u64,
) -> Result<RunOutput> {
    let z_bar = karcher_mean(z, &KarcherOptions::default())?;
    let mut trace = Vec::with_capacity(config.iterations + 1);
    let state = run_with_sink(config, z, &z_bar, g, init, seed, &mut |r| trace.push(*r))?;
    Ok(RunOutput { trace, state })
}

/// Like [`run`] with an externally supplied reference mean, streaming every
/// record to `sink` as soon as it is computed. On failure the records already
/// emitted stay with the sink.
pub fn run_with_sink(
    config: &SolverConfig,
    z: &Configuration,
    z_bar: &GroupPoint,
    g: &Graph,
    init: &InitMode,
    seed: u64,
    sink: &mut dyn FnMut(&TraceRecord),
) -> Result<NetworkState> {
    config.validate()?;
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }
    let mut state = init.initial_state(z, seed)?;
    check_shapes(&state, Some(z), g)?;
    let mut stepper = Stepper::new(*config, g, state.group());
    let mut monitor = DivergenceMonitor::default();

    let first = measure(0, &state, g, z_bar)?;
    monitor.check(&first).map_err(|e| e.at_iteration(0))?;
    sink(&first);
    for k in 1..=config.iterations {
        state = stepper.step(&state, z, g).map_err(|e| e.at_iteration(k))?;
        let record = measure(k, &state, g, z_bar).map_err(|e| e.at_iteration(k))?;
        monitor.check(&record).map_err(|e| e.at_iteration(k))?;
        sink(&record);
    }
    Ok(state)
}

/// Runs a solver against time-varying data `z(t)`, one sample per step.
///
/// Step `k` uses `z_of_t(k)` and the record for iteration `k` is scored
/// against the Karcher mean of `z_of_t(k)`. This mode has no convergence
/// guarantee; it reports whatever tracking error the dynamics produce.
pub fn run_tracking(
    config: &SolverConfig,
    z_of_t: &dyn Fn(usize) -> Configuration,
    g: &Graph,
    init: &InitMode,
    seed: u64,
) -> Result<RunOutput> {
    config.validate()?;
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }
    let opts = KarcherOptions::default();
    let z0 = z_of_t(0);
    let mut state = init.initial_state(&z0, seed)?;
    check_shapes(&state, Some(&z0), g)?;
    let mut stepper = Stepper::new(*config, g, state.group());
    let mut trace = Vec::with_capacity(config.iterations + 1);
    trace.push(measure(0, &state, g, &karcher_mean(&z0, &opts)?)?);
    let mut z = z0;
    for k in 1..=config.iterations {
        state = stepper.step(&state, &z, g).map_err(|e| e.at_iteration(k))?;
        z = z_of_t(k);
        let z_bar = karcher_mean(&z, &opts).map_err(|e| e.at_iteration(k))?;
        trace.push(measure(k, &state, g, &z_bar).map_err(|e| e.at_iteration(k))?);
    }
    Ok(RunOutput { trace, state })
}

fn measure(iteration: usize, state: &NetworkState, g: &Graph, z_bar: &GroupPoint) -> Result<TraceRecord> {
    Ok(TraceRecord {
        iteration,
        consensus_error: consensus_error(&state.x, g)?,
        rcm_error: rcm_error(&state.x, z_bar)?,
    })
}

#[derive(Default)]
struct DivergenceMonitor {
    initial: Option<f64>,
}

impl DivergenceMonitor {
    fn check(&mut self, record: &TraceRecord) -> Result<()> {
        let total = record.consensus_error + record.rcm_error;
        if !total.is_finite() {
            return Err(Error::Numerical("non-finite error metric".into()));
        }
        let initial = *self.initial.get_or_insert(total);
        if total > DIVERGENCE_FACTOR * initial && total > 1e-8 {
            return Err(Error::Numerical(format!(
                "diverged: error {total:e} exceeds {DIVERGENCE_FACTOR:e} x initial {initial:e}"
            )));
        }
        Ok(())
    }
}

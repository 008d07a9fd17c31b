//! Scenario drivers behind the `rcm-sim` binary.
//!
//! Every random quantity comes from a per-instance seed
//! `splitmix64(master + index)`. Instance data `z` is sampled in a ball of
//! radius `sampling_radius` around the identity and the graph is drawn from
//! the same stream afterwards.

pub mod config;
pub mod verify;

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{sample_in_ball, Group, GroupPoint};
use crate::graph::{generate, Graph, Topology};
use crate::rcm::{karcher_mean, Configuration, KarcherOptions};
use crate::rng::{instance_seed, rng_from_seed};
use crate::solvers::{run_with_sink, InitMode, Method, SolverConfig, TraceRecord};

pub use config::{parse_config, parse_config_str, Format, InitKind, ScenarioConfig, SolverEntry};
pub use verify::{euclidean_verify, VerifyOptions, VerifyReport, VerifyRow};

pub const SCENARIO1_HEADER: &str = "solver,iteration,consensus_error,rcm_error";
pub const SCENARIO2_HEADER: &str = "iteration,min,q1,median,q3,max";

/// Karcher residual tolerance of the reference mean used for scoring. It is
/// tighter than the oracle default so that fast runs are not scored against
/// a reference that is itself only accurate to about 1e-13.
pub const REFERENCE_TOL: f64 = 1e-15;

/// Largest tolerated fraction of failed instances in scenario 2.
pub const MAX_FAILED_FRACTION: f64 = 0.05;

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// One sampled problem: data, communication graph and reference mean.
#[derive(Debug, Clone)]
pub struct Instance {
    pub z: Configuration,
    pub graph: Graph,
    pub z_bar: GroupPoint,
}

pub fn sample_instance(group: Group, n_agents: usize, topology: Topology, radius: f64, seed: u64) -> Result<Instance> {
    let mut rng = rng_from_seed(seed);
    let center = group.identity();
    let points = (0..n_agents)
        .map(|_| sample_in_ball(&center, radius, &mut rng))
        .collect();
    let z = Configuration::new(points)?;
    let graph = generate(topology, n_agents, &mut rng)?;
    let z_bar = reference_mean(&z)?;
    Ok(Instance { z, graph, z_bar })
}

/// Karcher mean to [`REFERENCE_TOL`], or to the oracle default tolerance if
/// round-off keeps the residual above it.
pub fn reference_mean(z: &Configuration) -> Result<GroupPoint> {
    let tight = KarcherOptions {
        tol: REFERENCE_TOL,
        ..KarcherOptions::default()
    };
    match karcher_mean(z, &tight) {
        Err(Error::NoConvergence { .. }) => karcher_mean(z, &KarcherOptions::default()),
        other => other,
    }
}

impl ScenarioConfig {
    /// The instance with the given index under this config's master seed.
    pub fn instance(&self, index: u64) -> Result<Instance> {
        sample_instance(
            self.group,
            self.n_agents,
            self.topology,
            self.sampling_radius,
            instance_seed(self.seed, index),
        )
    }

    pub fn init(&self) -> InitMode {
        match self.init_mode {
            InitKind::AtZ => InitMode::AtZ,
            InitKind::AtIdentity => InitMode::AtIdentity,
        }
    }
}

fn write_trace_row(out: &mut dyn Write, name: &str, r: &TraceRecord) -> std::io::Result<()> {
    writeln!(
        out,
        "{name},{},{},{}",
        r.iteration,
        fmt_f64(r.consensus_error),
        fmt_f64(r.rcm_error)
    )
}

/// Terminal record of each solver in a scenario-1 run.
#[derive(Debug, Clone)]
pub struct Scenario1Summary {
    pub finals: Vec<(&'static str, TraceRecord)>,
}

/// Runs every configured solver on instance 0 from identical initial states
/// and writes their traces as CSV. If a solver fails, the rows produced so far
/// (including the failing solver's partial trace) are written and flushed
/// before the error is returned.
pub fn scenario1(cfg: &ScenarioConfig, out: &mut dyn Write) -> Result<Scenario1Summary> {
    cfg.validate()?;
    let inst = cfg.instance(0)?;
    let init = cfg.init();
    let runs: Vec<(Vec<TraceRecord>, Result<()>)> = cfg
        .solvers
        .par_iter()
        .map(|solver| {
            let mut trace = Vec::with_capacity(solver.iterations + 1);
            let res = run_with_sink(solver, &inst.z, &inst.z_bar, &inst.graph, &init, cfg.seed, &mut |r| {
                trace.push(*r)
            });
            (trace, res.map(|_| ()))
        })
        .collect();

    writeln!(out, "{SCENARIO1_HEADER}")?;
    let mut finals = Vec::new();
    for (solver, (trace, res)) in cfg.solvers.iter().zip(runs) {
        let name = solver.method.name();
        for r in &trace {
            write_trace_row(out, name, r)?;
        }
        if let Err(e) = res {
            out.flush()?;
            return Err(Error::Numerical(format!("{name}: {e}")));
        }
        if let Some(last) = trace.last() {
            finals.push((name, *last));
        }
    }
    out.flush()?;
    Ok(Scenario1Summary { finals })
}

/// Per-iteration order statistics of the RCM error across instances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuartileRow {
    pub iteration: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Five-number summary. `q1` and `q3` are the medians of the lower and upper
/// `floor(n/2)` sorted values (the overall median is excluded when `n` is
/// odd), so two samples give `q1 = min` and `q3 = max`. A single sample
/// repeats itself in every column.
pub fn five_numbers(values: &[f64]) -> Option<[f64; 5]> {
    if values.is_empty() || values.iter().any(|v| v.is_nan()) {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let half = n / 2;
    let med = median_sorted(&v);
    let (q1, q3) = if half == 0 {
        (med, med)
    } else {
        (median_sorted(&v[..half]), median_sorted(&v[n - half..]))
    };
    Some([v[0], q1, med, q3, v[n - 1]])
}

/// A scenario-2 instance that was excluded from the statistics.
#[derive(Debug, Clone)]
pub struct FailedInstance {
    pub index: usize,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct Scenario2Summary {
    pub rows: Vec<QuartileRow>,
    pub completed: usize,
    pub failed: Vec<FailedInstance>,
}

/// The solver scenario 2 uses: the configured `algorithm1` entry, or a
/// default one at the scenario step size.
fn algorithm1_config(cfg: &ScenarioConfig) -> SolverConfig {
    cfg.solvers
        .iter()
        .find(|s| s.method == Method::Algorithm1)
        .copied()
        .unwrap_or_else(|| SolverConfig::new(Method::Algorithm1, cfg.step_size, cfg.iterations))
}

/// Runs `algorithm1` on `instances` independent problems (in parallel) and
/// aggregates the RCM error per iteration. Failed instances are excluded;
/// more than 5% failures fail the run after the CSV has been written.
pub fn scenario2(cfg: &ScenarioConfig, out: &mut dyn Write) -> Result<Scenario2Summary> {
    cfg.validate()?;
    if cfg.instances < 2 {
        return Err(Error::Config("scenario2 needs at least 2 instances".into()));
    }
    let solver = algorithm1_config(cfg);
    let init = cfg.init();
    let results: Vec<Result<Vec<f64>>> = (0..cfg.instances)
        .into_par_iter()
        .map(|i| {
            let inst = cfg.instance(i as u64)?;
            let mut errors = Vec::with_capacity(solver.iterations + 1);
            run_with_sink(
                &solver,
                &inst.z,
                &inst.z_bar,
                &inst.graph,
                &init,
                instance_seed(cfg.seed, i as u64),
                &mut |r| errors.push(r.rcm_error),
            )?;
            Ok(errors)
        })
        .collect();

    let mut traces = Vec::new();
    let mut failed = Vec::new();
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok(t) => traces.push(t),
            Err(e) => failed.push(FailedInstance {
                index,
                error: e.to_string(),
            }),
        }
    }

    writeln!(out, "{SCENARIO2_HEADER}")?;
    let mut rows = Vec::new();
    if !traces.is_empty() {
        let mut column = Vec::with_capacity(traces.len());
        for k in 0..=solver.iterations {
            column.clear();
            column.extend(traces.iter().map(|t| t[k]));
            let [min, q1, median, q3, max] =
                five_numbers(&column).ok_or_else(|| Error::Numerical(format!("NaN error at iteration {k}")))?;
            let row = QuartileRow {
                iteration: k,
                min,
                q1,
                median,
                q3,
                max,
            };
            writeln!(
                out,
                "{k},{},{},{},{},{}",
                fmt_f64(min),
                fmt_f64(q1),
                fmt_f64(median),
                fmt_f64(q3),
                fmt_f64(max)
            )?;
            rows.push(row);
        }
    }
    out.flush()?;

    if failed.len() as f64 > MAX_FAILED_FRACTION * cfg.instances as f64 {
        let first = &failed[0];
        return Err(Error::Numerical(format!(
            "{} of {} instances failed (first: instance {}: {})",
            failed.len(),
            cfg.instances,
            first.index,
            first.error
        )));
    }
    Ok(Scenario2Summary {
        rows,
        completed: traces.len(),
        failed,
    })
}

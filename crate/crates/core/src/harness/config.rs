//! Scenario configuration files (TOML or JSON).

use std::f64::consts::FRAC_PI_4;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::Group;
use crate::graph::Topology;
use crate::solvers::{LagrangianParams, Method, PenaltyParams, PenaltySchedule, SolverConfig};

/// Initial agent positions for scenario runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    AtZ,
    AtIdentity,
}

/// One entry of the `solvers` list.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverEntry {
    pub method: String,
    /// Overrides the scenario step size.
    pub step_size: Option<f64>,
    pub inner_iters: Option<usize>,
    /// `inv_sqrt` or `inv_linear`.
    pub schedule: Option<String>,
    pub dual_step: Option<f64>,
    pub augmentation: Option<f64>,
}

impl SolverEntry {
    pub fn named(method: &str) -> Self {
        Self {
            method: method.to_string(),
            step_size: None,
            inner_iters: None,
            schedule: None,
            dual_step: None,
            augmentation: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    group: Option<String>,
    n_agents: Option<usize>,
    topology: Option<String>,
    sampling_radius: Option<f64>,
    step_size: Option<f64>,
    iterations: Option<usize>,
    solvers: Option<Vec<SolverEntry>>,
    seed: Option<u64>,
    instances: Option<usize>,
    init_mode: Option<InitKind>,
}

/// A validated scenario description.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub group: Group,
    pub n_agents: usize,
    pub topology: Topology,
    pub sampling_radius: f64,
    pub step_size: f64,
    pub iterations: usize,
    pub solvers: Vec<SolverConfig>,
    pub seed: u64,
    pub instances: usize,
    pub init_mode: InitKind,
}

pub const DEFAULT_SOLVERS: [&str; 4] = ["algorithm1", "tron", "penalty", "lagrangian"];

impl Default for ScenarioConfig {
    fn default() -> Self {
        let entries: Vec<_> = DEFAULT_SOLVERS.iter().map(|m| SolverEntry::named(m)).collect();
        Self {
            group: Group::So3,
            n_agents: 10,
            topology: Topology::ErdosRenyi(0.4),
            sampling_radius: FRAC_PI_4,
            step_size: 0.1,
            iterations: 200,
            solvers: entries
                .iter()
                .map(|e| solver_config(e, 0.1, 200))
                .collect::<Result<_>>()
                .expect("default solvers are valid"),
            seed: 0,
            instances: 100,
            init_mode: InitKind::AtZ,
        }
    }
}

impl ScenarioConfig {
    /// Checks the invariants of a programmatic config. Zero iterations are
    /// allowed here (a run then reports only the initial metrics); config
    /// documents must ask for at least one.
    pub fn validate(&self) -> Result<()> {
        let r_star = self.group.convexity().r_star;
        if !(self.sampling_radius >= 0.0 && self.sampling_radius < r_star) {
            return Err(Error::Config(format!(
                "sampling_radius must lie in [0, {r_star}), got {}",
                self.sampling_radius
            )));
        }
        if self.n_agents == 0 {
            return Err(Error::Config("n_agents must be at least 1".into()));
        }
        if self.instances == 0 {
            return Err(Error::Config("instances must be at least 1".into()));
        }
        if self.solvers.is_empty() {
            return Err(Error::Config("solver list must not be empty".into()));
        }
        for s in &self.solvers {
            s.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Replaces the iteration count of the scenario and of every solver.
    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        for s in &mut self.solvers {
            s.iterations = iterations;
        }
        self
    }
}

fn solver_config(entry: &SolverEntry, step_size: f64, iterations: usize) -> Result<SolverConfig> {
    let has_penalty_keys = entry.inner_iters.is_some() || entry.schedule.is_some();
    let has_lagrangian_keys = entry.dual_step.is_some() || entry.augmentation.is_some();
    let method = match entry.method.as_str() {
        "penalty" => {
            let mut p = PenaltyParams::default();
            if let Some(s) = entry.inner_iters {
                p.inner_iters = s;
            }
            if let Some(name) = &entry.schedule {
                p.schedule = match name.as_str() {
                    "inv_sqrt" => PenaltySchedule::InvSqrt,
                    "inv_linear" => PenaltySchedule::InvLinear,
                    other => {
                        return Err(Error::Config(format!(
                            "unknown penalty schedule `{other}` (valid: inv_sqrt, inv_linear)"
                        )))
                    }
                };
            }
            Method::Penalty(p)
        }
        "lagrangian" => {
            let mut p = LagrangianParams::default();
            if let Some(d) = entry.dual_step {
                p.dual_step = d;
            }
            if let Some(c) = entry.augmentation {
                p.augmentation = c;
            }
            Method::Lagrangian(p)
        }
        "algorithm1" => Method::Algorithm1,
        "dgf" => Method::Dgf,
        "tron" => Method::Tron,
        other => {
            return Err(Error::Config(format!(
                "unknown solver `{other}` (valid: {})",
                Method::NAMES.join(", ")
            )))
        }
    };
    if has_penalty_keys && !matches!(method, Method::Penalty(_)) {
        return Err(Error::Config(format!(
            "inner_iters/schedule only apply to penalty, not {}",
            entry.method
        )));
    }
    if has_lagrangian_keys && !matches!(method, Method::Lagrangian(_)) {
        return Err(Error::Config(format!(
            "dual_step/augmentation only apply to lagrangian, not {}",
            entry.method
        )));
    }
    let config = SolverConfig::new(method, entry.step_size.unwrap_or(step_size), iterations);
    config.validate().map_err(|e| Error::Config(format!("{}: {e}", entry.method)))?;
    Ok(config)
}

/// Document syntax, chosen from the file extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Toml,
    Json,
}

/// Reads and validates a config file. `.json` files are parsed as JSON,
/// everything else as TOML.
pub fn parse_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("json") => Format::Json,
        _ => Format::Toml,
    };
    parse_config_str(&text, format).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_config_str(text: &str, format: Format) -> Result<ScenarioConfig> {
    let raw: RawConfig = match format {
        Format::Toml => toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?,
        Format::Json => serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?,
    };
    let at = |key: &str, msg: String| match line_of(text, key) {
        Some(line) => Error::Config(format!("line {line}: {msg}")),
        None => Error::Config(msg),
    };

    let defaults = ScenarioConfig::default();
    let group = match &raw.group {
        Some(s) => s.parse::<Group>().map_err(|e| at("group", e.to_string()))?,
        None => defaults.group,
    };
    let topology = match &raw.topology {
        Some(s) => s.parse::<Topology>().map_err(|e| at("topology", e.to_string()))?,
        None => defaults.topology,
    };
    let step_size = raw.step_size.unwrap_or(defaults.step_size);
    if !(step_size > 0.0 && step_size.is_finite()) {
        return Err(at("step_size", format!("step_size must be positive, got {step_size}")));
    }
    let iterations = raw.iterations.unwrap_or(defaults.iterations);
    if iterations == 0 {
        return Err(at("iterations", "iterations must be at least 1".into()));
    }
    let entries = raw
        .solvers
        .unwrap_or_else(|| DEFAULT_SOLVERS.iter().map(|m| SolverEntry::named(m)).collect());
    let solvers = entries
        .iter()
        .map(|e| {
            solver_config(e, step_size, iterations).map_err(|err| match err {
                Error::Config(msg) => at(&e.method, msg),
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let config = ScenarioConfig {
        group,
        n_agents: raw.n_agents.unwrap_or(defaults.n_agents),
        topology,
        sampling_radius: raw.sampling_radius.unwrap_or(defaults.sampling_radius),
        step_size,
        iterations,
        solvers,
        seed: raw.seed.unwrap_or(defaults.seed),
        instances: raw.instances.unwrap_or(defaults.instances),
        init_mode: raw.init_mode.unwrap_or(defaults.init_mode),
    };
    config.validate().map_err(|e| {
        let msg = e.to_string();
        let key = ["sampling_radius", "n_agents", "instances", "solvers"]
            .into_iter()
            .find(|k| msg.contains(k))
            .unwrap_or("");
        match e {
            Error::Config(m) if !key.is_empty() => at(key, m),
            other => other,
        }
    })?;
    Ok(config)
}

/// 1-based line of the first occurrence of `key` in `text`.
fn line_of(text: &str, key: &str) -> Option<usize> {
    if key.is_empty() {
        return None;
    }
    text.lines().position(|l| l.contains(key)).map(|i| i + 1)
}

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use rcm_core::geometry::{Group, GroupPoint};
use rcm_core::harness::{self, ScenarioConfig, VerifyOptions};
use rcm_core::rcm::{in_convexity_ball, karcher_mean, karcher_residual, Configuration, KarcherOptions};
use rcm_core::{Error, Result};

const EXIT_VERIFICATION: u8 = 3;

#[derive(Parser)]
#[command(name = "rcm-sim", version, about = "Distributed Riemannian center of mass simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare all configured solvers on one instance.
    Scenario1(RunArgs),
    /// Quartiles of the RCM error over many instances.
    Scenario2(RunArgs),
    /// Spectral and convergence checks of the Euclidean dynamics.
    EuclideanVerify(VerifyArgs),
    /// Centralized Karcher mean of a JSON point file.
    Karcher {
        #[arg(long)]
        points: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed in the config file.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Optional config; only `group`, `n_agents`, `instances` and `seed` are used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Replace one sweep graph with a disconnected graph (negative test).
    #[arg(long)]
    inject_disconnected: bool,
}

fn load(path: &Path, seed: Option<u64>) -> Result<ScenarioConfig> {
    let mut cfg = harness::parse_config(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn scenario1(args: &RunArgs) -> Result<()> {
    let cfg = load(&args.config, args.seed)?;
    let mut out = create(&args.out, "scenario1.csv")?;
    let summary = harness::scenario1(&cfg, &mut out)?;
    for (name, r) in summary.finals {
        println!(
            "{name:<12} iteration {:>6}  consensus_error {:.3e}  rcm_error {:.3e}",
            r.iteration, r.consensus_error, r.rcm_error
        );
    }
    Ok(())
}

fn scenario2(args: &RunArgs) -> Result<()> {
    let cfg = load(&args.config, args.seed)?;
    let mut out = create(&args.out, "scenario2.csv")?;
    let summary = harness::scenario2(&cfg, &mut out)?;
    for f in &summary.failed {
        eprintln!("instance {} excluded: {}", f.index, f.error);
    }
    if let (Some(first), Some(last)) = (summary.rows.first(), summary.rows.last()) {
        println!(
            "{} instances, median rcm_error {:.3e} -> {:.3e} at iteration {}",
            summary.completed, first.median, last.median, last.iteration
        );
    }
    Ok(())
}

/// Returns whether every check passed.
fn euclidean_verify(args: &VerifyArgs) -> Result<bool> {
    let mut opts = VerifyOptions::default();
    if let Some(path) = &args.config {
        let cfg = harness::parse_config(path)?;
        opts.dim = match cfg.group {
            Group::Euclidean(n) => n,
            Group::So3 => return Err(Error::Config("euclidean-verify needs group = \"euclidean:n\"".into())),
        };
        opts.max_agents = cfg.n_agents;
        opts.graphs = cfg.instances;
        opts.seed = cfg.seed;
    }
    if let Some(s) = args.seed {
        opts.seed = s;
    }
    opts.inject_disconnected = args.inject_disconnected;
    let report = harness::euclidean_verify(&opts)?;
    let mut out = create(&args.out, "euclidean_verify.csv")?;
    report.write_csv(&mut out)?;
    for r in report.failures() {
        eprintln!(
            "FAILED {} #{}: n_agents {} edges \"{}\" max_error {:.3e}",
            r.check, r.index, r.n_agents, r.edges, r.max_error
        );
    }
    println!(
        "{} checks, {} failed",
        report.rows.len(),
        report.failures().count()
    );
    Ok(report.passed())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PointsFile {
    group: String,
    /// Row-major 3x3 matrices for so3, coordinate vectors for euclidean.
    points: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct KarcherOutput {
    group: String,
    mean: Vec<f64>,
    residual: f64,
    in_convexity_ball: bool,
}

fn karcher(path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let file: PointsFile =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let group: Group = file.group.parse().map_err(|e: Error| Error::Config(e.to_string()))?;
    let points = file
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| point(group, p).map_err(|e| Error::Config(format!("point {i}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let z = Configuration::new(points).map_err(|e| Error::Config(e.to_string()))?;
    let mean = karcher_mean(&z, &KarcherOptions::default())?;
    let output = KarcherOutput {
        group: group.to_string(),
        residual: karcher_residual(&mean, &z)?,
        in_convexity_ball: in_convexity_ball(&z, &group.convexity()),
        mean: mean.to_vec(),
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&output).map_err(|e| Error::Numerical(e.to_string()))?
    );
    Ok(())
}

fn point(group: Group, coords: &[f64]) -> Result<GroupPoint> {
    match group {
        Group::So3 => {
            if coords.len() != 9 {
                return Err(Error::LengthMismatch {
                    expected: 9,
                    found: coords.len(),
                });
            }
            GroupPoint::so3(nalgebra::Matrix3::from_row_slice(coords))
        }
        Group::Euclidean(n) => {
            if coords.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    found: coords.len(),
                });
            }
            GroupPoint::euclidean(nalgebra::DVector::from_column_slice(coords))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage_error = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage_error { 1 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Scenario1(args) => scenario1(args).map(|_| true),
        Command::Scenario2(args) => scenario2(args).map(|_| true),
        Command::EuclideanVerify(args) => euclidean_verify(args),
        Command::Karcher { points } => karcher(points).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VERIFICATION),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! Euclidean verification suite: spectral sweep of the system matrix and
//! convergence of the linear dynamics to the predicted limit.

use std::io::Write;

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::euclidean::{analyze_spectrum, build_system_matrix, predicted_limit, simulate_euclidean, ZERO_EIGENVALUE_TOL};
use crate::graph::{generate, Graph, Topology};
use crate::rng::{instance_seed, rng_from_seed};

use super::fmt_f64;

pub const VERIFY_HEADER: &str = "check,index,n_agents,edges,eigenvalues,max_error,pass";

/// Nonzero eigenvalues must have real part below this.
pub const STABILITY_MARGIN: f64 = 1e-6;
/// Agreement required between the dense spectrum and the quadratic roots.
pub const ROOT_TOL: f64 = 1e-9;
/// Convergence tolerance for the limit checks.
pub const LIMIT_TOL: f64 = 1e-8;

/// Edge probability of the graphs used for the convergence checks.
pub const LIMIT_CHECK_EDGE_PROB: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Number of random graphs in the spectral sweep.
    pub graphs: usize,
    /// Sweep graphs have between 2 and `max_agents` agents.
    pub max_agents: usize,
    /// Dimension `n` of the convergence checks.
    pub dim: usize,
    pub limit_checks: usize,
    pub step_size: f64,
    pub steps: usize,
    /// Replaces the first sweep graph with a disconnected one.
    pub inject_disconnected: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            graphs: 100,
            max_agents: 10,
            dim: 3,
            limit_checks: 20,
            step_size: 0.05,
            steps: 5000,
            inject_disconnected: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyRow {
    /// `spectrum_hand`, `spectrum_sweep` or `limit`.
    pub check: &'static str,
    pub index: usize,
    pub n_agents: usize,
    pub edges: String,
    pub eigenvalues: Vec<Complex<f64>>,
    pub max_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub rows: Vec<VerifyRow>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &VerifyRow> {
        self.rows.iter().filter(|r| !r.pass)
    }

    pub fn write_csv(&self, out: &mut dyn Write) -> std::io::Result<()> {
        writeln!(out, "{VERIFY_HEADER}")?;
        for r in &self.rows {
            let eig: Vec<String> = r.eigenvalues.iter().map(|z| fmt_complex(*z)).collect();
            writeln!(
                out,
                "{},{},{},{},\"{}\",{},{}",
                r.check,
                r.index,
                r.n_agents,
                r.edges,
                eig.join(","),
                fmt_f64(r.max_error),
                r.pass
            )?;
        }
        out.flush()
    }
}

fn fmt_complex(z: Complex<f64>) -> String {
    if z.im == 0.0 {
        fmt_f64(z.re)
    } else {
        format!("{}{:+.16e}i", fmt_f64(z.re), z.im)
    }
}

/// Eigenvalues of the system matrix predicted from the Laplacian spectrum:
/// both roots of `lambda^2 + (2 rho + 1) lambda + rho^2 = 0` for every `rho`.
pub fn quadratic_roots(l: &DMatrix<f64>) -> Vec<f64> {
    let rhos = l.clone().symmetric_eigenvalues();
    let mut roots = Vec::with_capacity(2 * rhos.len());
    for &rho in rhos.iter() {
        let rho = rho.max(0.0);
        let b = 2.0 * rho + 1.0;
        let disc = (4.0 * rho + 1.0).sqrt();
        roots.push((-b + disc) / 2.0);
        roots.push((-b - disc) / 2.0);
    }
    roots.sort_by(|a, b| b.total_cmp(a));
    roots
}

/// Checks the spectrum of the system matrix for `g`: zero is simple, every
/// other eigenvalue has real part below `-STABILITY_MARGIN`, and the dense
/// eigenvalues match the quadratic roots.
pub fn spectrum_check(check: &'static str, index: usize, g: &Graph) -> Result<VerifyRow> {
    let l = g.laplacian_matrix();
    let report = analyze_spectrum(&build_system_matrix(&l)?, ZERO_EIGENVALUE_TOL)?;
    let roots = quadratic_roots(&l);
    let max_error = report
        .eigenvalues
        .iter()
        .zip(&roots)
        .map(|(z, r)| (z - Complex::new(*r, 0.0)).norm())
        .fold(0.0, f64::max);
    let pass = report.zero_multiplicity == 1
        && report.max_nonzero_real_part < -STABILITY_MARGIN
        && max_error <= ROOT_TOL;
    Ok(VerifyRow {
        check,
        index,
        n_agents: g.n_agents(),
        edges: g.edge_string(),
        eigenvalues: report.eigenvalues,
        max_error,
        pass,
    })
}

/// Worst deviations from the predicted limit after simulating the linear
/// dynamics from a random `x(0)` with `w(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitErrors {
    /// `max_i |x_i - z_bar|`
    pub x: f64,
    /// `max_i |w_i - (z_bar - z_i)|`
    pub w: f64,
}

/// Simulates a random problem on `g` and measures the distance to the limit.
pub fn limit_check<R: Rng + ?Sized>(
    g: &Graph,
    dim: usize,
    step_size: f64,
    steps: usize,
    rng: &mut R,
) -> Result<LimitErrors> {
    let n = g.n_agents();
    let len = n * dim;
    let z = DVector::from_fn(len, |_, _| rng.sample::<f64, _>(StandardNormal));
    // offset keeps x(0) away from z
    let x0 = DVector::from_fn(len, |_, _| rng.sample::<f64, _>(StandardNormal) + 1.0);
    let limit = predicted_limit(&x0, &z, n, dim)?;
    let traj = simulate_euclidean(&g.laplacian_matrix(), &z, &x0, dim, step_size, steps)?;
    let last = traj.last().expect("trajectory includes the initial state");
    let w = last.w(&z);
    let mut errors = LimitErrors { x: 0.0, w: 0.0 };
    for i in 0..n {
        let block = i * dim..(i + 1) * dim;
        let mut ex = 0.0f64;
        let mut ew = 0.0f64;
        for k in block {
            let z_bar = limit.x_star[k];
            ex += (last.x[k] - z_bar).powi(2);
            ew += (w[k] - (z_bar - z[k])).powi(2);
        }
        errors.x = errors.x.max(ex.sqrt());
        errors.w = errors.w.max(ew.sqrt());
    }
    Ok(errors)
}

/// Agent counts cycled through by the convergence checks.
pub const LIMIT_CHECK_AGENTS: [usize; 3] = [2, 5, 10];

/// Runs the hand check, the spectral sweep and the convergence checks.
pub fn euclidean_verify(opts: &VerifyOptions) -> Result<VerifyReport> {
    if opts.max_agents < 2 {
        return Err(Error::Config("verification needs max_agents >= 2".into()));
    }
    if opts.dim == 0 {
        return Err(Error::Config("verification needs a positive dimension".into()));
    }
    let mut rows = vec![spectrum_check("spectrum_hand", 0, &Graph::new(2, [(0, 1)])?)?];

    for i in 0..opts.graphs {
        let mut rng = rng_from_seed(instance_seed(opts.seed, i as u64));
        let n = rng.random_range(2..=opts.max_agents);
        let g = if opts.inject_disconnected && i == 0 {
            // two components: a path on the first half and one on the rest
            let half = (n / 2).max(1);
            let edges: Vec<_> = (1..n).filter(|&k| k != half).map(|k| (k - 1, k)).collect();
            Graph::new(n, edges)?
        } else {
            let p = rng.random_range(0.2..=1.0);
            generate(Topology::ErdosRenyi(p), n, &mut rng)?
        };
        rows.push(spectrum_check("spectrum_sweep", i, &g)?);
    }

    for i in 0..opts.limit_checks {
        let mut rng = rng_from_seed(instance_seed(opts.seed, (opts.graphs + i) as u64));
        let n = LIMIT_CHECK_AGENTS[i % LIMIT_CHECK_AGENTS.len()].min(opts.max_agents);
        let g = generate(Topology::ErdosRenyi(LIMIT_CHECK_EDGE_PROB), n, &mut rng)?;
        let errors = limit_check(&g, opts.dim, opts.step_size, opts.steps, &mut rng)?;
        let max_error = errors.x.max(errors.w);
        rows.push(VerifyRow {
            check: "limit",
            index: i,
            n_agents: n,
            edges: g.edge_string(),
            eigenvalues: Vec::new(),
            max_error,
            pass: max_error <= LIMIT_TOL,
        });
    }
    Ok(VerifyReport { rows })
}

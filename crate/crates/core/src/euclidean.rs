//! Exact linear analysis of the solver on R^n.
//!
//! On R^n the tracking dynamics are linear. With `v = -w + x - z` and agent
//! vectors stacked as `col(x_1, ..., x_N)`, the pair `(v, x)` evolves as
//! `d/dt (v, x) = (A kron I_n) (v, x)` where
//!
//! ```text
//!     A = [ -L - I   -L ]
//!         [   -I     -L ]
//! ```
//!
//! For a connected graph zero is a simple eigenvalue of `A` and every other
//! eigenvalue has negative real part, so the flow converges to the projection
//! `(p q^T kron I_n) (v(0), x(0))` with `p = (0, 1)` and `q = (-1, 1) / N`,
//! which is `v* = 0`, `x* = 1 kron z_bar`. Each Laplacian eigenvalue `rho`
//! contributes the two roots of `lambda^2 + (2 rho + 1) lambda + rho^2 = 0`.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

/// Absolute tolerance used to validate Laplacian structure.
const LAPLACIAN_TOL: f64 = 1e-12;

const SCHUR_THRESHOLDS: [f64; 3] = [f64::EPSILON, 1e-15, 1e-14];

/// Default threshold for counting an eigenvalue as zero.
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-9;

/// The 2N x 2N block matrix `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrix {
    a: DMatrix<f64>,
    n_agents: usize,
}

impl SystemMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    /// Applies `A kron I_n` to the stacked vector `(v, x)` of length `2 N n`.
    pub fn apply_kron(&self, y: &DVector<f64>, dim: usize) -> DVector<f64> {
        let rows = 2 * self.n_agents;
        // row r of Y is the r-th n-block of y
        let ym = DMatrix::from_row_slice(rows, dim, y.as_slice());
        let out = &self.a * ym;
        DVector::from_iterator(rows * dim, out.transpose().iter().copied())
    }
}

/// Assembles `A` from a graph Laplacian.
pub fn build_system_matrix(l: &DMatrix<f64>) -> Result<SystemMatrix> {
    let n = l.nrows();
    if n == 0 || l.ncols() != n {
        return Err(Error::InvalidArgument(format!(
            "laplacian must be square and non-empty, got {}x{}",
            l.nrows(),
            l.ncols()
        )));
    }
    if (l - l.transpose()).amax() > LAPLACIAN_TOL {
        return Err(Error::InvalidArgument("laplacian is not symmetric".into()));
    }
    if l.row_iter().any(|row| row.sum().abs() > LAPLACIAN_TOL) {
        return Err(Error::InvalidArgument("laplacian rows do not sum to zero".into()));
    }
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    a.view_mut((0, 0), (n, n)).copy_from(&(-l));
    a.view_mut((0, n), (n, n)).copy_from(&(-l));
    a.view_mut((n, n), (n, n)).copy_from(&(-l));
    for i in 0..n {
        a[(i, i)] -= 1.0;
        a[(n + i, i)] = -1.0;
    }
    Ok(SystemMatrix { a, n_agents: n })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    /// Sorted by decreasing real part, then decreasing imaginary part.
    pub eigenvalues: Vec<Complex<f64>>,
    pub zero_multiplicity: usize,
    /// Largest real part among eigenvalues with `|lambda| > tol`.
    pub max_nonzero_real_part: f64,
    /// Most negative real part, which bounds the stable Euler step.
    pub min_real_part: f64,
    pub lemma_holds: bool,
}

/// Dense eigen-analysis of `A`: zero must be simple and every other
/// eigenvalue must have real part below `-tol`.
pub fn analyze_spectrum(m: &SystemMatrix, tol: f64) -> Result<SpectrumReport> {
    // A few matrices stall at machine-epsilon deflation; a slightly looser
    // relative threshold still resolves the spectrum far below `tol`.
    let schur = SCHUR_THRESHOLDS
        .iter()
        .find_map(|&eps| m.a.clone().try_schur(eps, 10_000))
        .ok_or_else(|| Error::Numerical("schur decomposition did not converge".into()))?;
    let mut eigenvalues: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().copied().collect();
    if eigenvalues.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("non-finite eigenvalue".into()));
    }
    eigenvalues.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    let zero_multiplicity = eigenvalues.iter().filter(|z| z.norm() <= tol).count();
    let max_nonzero_real_part = eigenvalues
        .iter()
        .filter(|z| z.norm() > tol)
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let min_real_part = eigenvalues.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    Ok(SpectrumReport {
        lemma_holds: zero_multiplicity == 1 && max_nonzero_real_part < -tol,
        eigenvalues,
        zero_multiplicity,
        max_nonzero_real_part,
        min_real_part,
    })
}

/// Limit `(v*, x*)` of the continuous flow with `w(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedLimit {
    pub x_star: DVector<f64>,
    pub v_star: DVector<f64>,
}

/// Applies the limit projector `(p q^T) kron I_n` to `(x0 - z, x0)`.
///
/// `x0` and `z` are stacked agent vectors of length `n_agents * dim`.
pub fn predicted_limit(x0: &DVector<f64>, z: &DVector<f64>, n_agents: usize, dim: usize) -> Result<PredictedLimit> {
    let len = n_agents * dim;
    if n_agents == 0 || dim == 0 {
        return Err(Error::InvalidArgument("empty euclidean problem".into()));
    }
    for v in [x0, z] {
        if v.len() != len {
            return Err(Error::LengthMismatch {
                expected: len,
                found: v.len(),
            });
        }
    }
    let v0 = x0 - z;
    let q = 1.0 / n_agents as f64;
    // q^T (v0, x0) per coordinate, with q = (-1, 1) / N
    let mut limit = DVector::zeros(dim);
    for i in 0..n_agents {
        for k in 0..dim {
            limit[k] += q * (x0[i * dim + k] - v0[i * dim + k]);
        }
    }
    let mut mean = DVector::zeros(dim);
    for i in 0..n_agents {
        for k in 0..dim {
            mean[k] += z[i * dim + k];
        }
    }
    mean *= q;
    let scale = 1.0 + z.amax() + x0.amax();
    if (&limit - &mean).amax() > 1e-12 * scale {
        return Err(Error::Numerical("projector limit disagrees with the direct average".into()));
    }
    let x_star = DVector::from_fn(len, |r, _| limit[r % dim]);
    Ok(PredictedLimit {
        x_star,
        v_star: DVector::zeros(len),
    })
}

/// One point on a simulated trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct EuclideanState {
    pub v: DVector<f64>,
    pub x: DVector<f64>,
}

impl EuclideanState {
    /// Recovers the latent tracking variable `w = -v + x - z`.
    pub fn w(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.x - &self.v - z
    }
}

/// Forward-Euler simulation `y <- y + eps (A kron I_n) y` from `x(0) = x0`,
/// `w(0) = 0`. Returns `iterations + 1` states including the initial one.
///
/// Rejects step sizes at or above the Euler stability bound `2 / |min Re lambda|`.
pub fn simulate_euclidean(
    l: &DMatrix<f64>,
    z: &DVector<f64>,
    x0: &DVector<f64>,
    dim: usize,
    eps: f64,
    iterations: usize,
) -> Result<Vec<EuclideanState>> {
    let system = build_system_matrix(l)?;
    let n = system.n_agents();
    let len = n * dim;
    for v in [x0, z] {
        if v.len() != len {
            return Err(Error::LengthMismatch {
                expected: len,
                found: v.len(),
            });
        }
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument("step size must be positive".into()));
    }
    let spectrum = analyze_spectrum(&system, ZERO_EIGENVALUE_TOL)?;
    let bound = 2.0 / spectrum.min_real_part.abs();
    if eps >= bound {
        return Err(Error::Numerical(format!(
            "step {eps} violates the Euler stability bound {bound}"
        )));
    }

    let mut y = DVector::zeros(2 * len);
    y.rows_mut(0, len).copy_from(&(x0 - z));
    y.rows_mut(len, len).copy_from(x0);
    let limit = 1e6 * (1.0 + y.amax());
    let split = |y: &DVector<f64>| EuclideanState {
        v: y.rows(0, len).into_owned(),
        x: y.rows(len, len).into_owned(),
    };
    let mut out = Vec::with_capacity(iterations + 1);
    out.push(split(&y));
    for k in 1..=iterations {
        let dy = system.apply_kron(&y, dim);
        y.axpy(eps, &dy, 1.0);
        if !y.iter().all(|v| v.is_finite()) || y.amax() > limit {
            return Err(Error::Numerical(format!("euclidean simulation unstable at step {k}")));
        }
        out.push(split(&y));
    }
    Ok(out)
}

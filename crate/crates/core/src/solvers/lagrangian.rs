//! Augmented-Lagrangian baseline.
//!
//! Each edge `{i, j}` with `i < j` carries the constraint
//! `c_ij(x) = Log(x_i^{-1} x_j) = 0` and a multiplier `lambda_ij` in the
//! algebra. A step is one primal gradient step on
//! `f(x) + sum <lambda_ij, c_ij(x)> + (c/2) sum |c_ij(x)|^2`
//! followed by dual ascent `lambda_ij += dual_step * c_ij(x)` at the new
//! primal point.
//!
//! The constraint derivatives use the inverse Jacobians of the logarithm:
//! perturbing `x_j` by `Exp(eta)` moves `c_ij` by `J_r^{-1}(c) eta` and
//! perturbing `x_i` moves it by `-J_l^{-1}(c) eta`. Since
//! `J_r^{-1}(c)^T = J_l^{-1}(c)`, the gradient of `<m, c_ij>` is
//! `-J_r^{-1}(c) m` at agent `i` and `J_l^{-1}(c) m` at agent `j`.

use crate::error::{Error, Result};
use crate::geometry::{dlog_left_inv, dlog_right_inv, left_log, AlgebraVector};
use crate::graph::{AlgebraField, Graph};
use crate::rcm::Configuration;

use super::{retract_all, NetworkState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagrangianParams {
    pub dual_step: f64,
    /// Weight `c` of the quadratic augmentation.
    pub augmentation: f64,
}

impl Default for LagrangianParams {
    fn default() -> Self {
        Self {
            dual_step: 0.1,
            augmentation: 1.0,
        }
    }
}

impl LagrangianParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dual_step > 0.0) {
            return Err(Error::InvalidArgument("lagrangian dual_step must be positive".into()));
        }
        if !(self.augmentation >= 0.0) {
            return Err(Error::InvalidArgument("lagrangian augmentation must be non-negative".into()));
        }
        Ok(())
    }
}

fn edge_constraints(state: &NetworkState, g: &Graph) -> Result<AlgebraField> {
    g.edges()
        .iter()
        .map(|&(i, j)| left_log(&state.x[i], &state.x[j]))
        .collect()
}

/// Left-trivialized gradient of the augmented Lagrangian with respect to every agent.
pub fn lagrangian_gradient(
    state: &NetworkState,
    multipliers: &[AlgebraVector],
    z: &Configuration,
    g: &Graph,
    params: &LagrangianParams,
) -> Result<AlgebraField> {
    if multipliers.len() != g.edges().len() {
        return Err(Error::LengthMismatch {
            expected: g.edges().len(),
            found: multipliers.len(),
        });
    }
    let mut grad = state
        .x
        .iter()
        .zip(z.points())
        .map(|(xi, zi)| left_log(xi, zi).map(|l| -&l))
        .collect::<Result<Vec<_>>>()?;
    let constraints = edge_constraints(state, g)?;
    for ((&(i, j), c), lambda) in g.edges().iter().zip(&constraints).zip(multipliers) {
        let mut m = lambda.clone();
        m.axpy(params.augmentation, c);
        grad[i].axpy(-1.0, &dlog_right_inv(c, &m));
        grad[j] += &dlog_left_inv(c, &m);
    }
    Ok(grad)
}

/// One primal descent step followed by one dual ascent step.
pub fn lagrangian_step(
    state: &NetworkState,
    multipliers: &[AlgebraVector],
    z: &Configuration,
    g: &Graph,
    params: &LagrangianParams,
    eps: f64,
) -> Result<(NetworkState, AlgebraField)> {
    super::check_shapes(state, Some(z), g)?;
    let grad = lagrangian_gradient(state, multipliers, z, g, params)?;
    let descent: Vec<_> = grad.iter().map(|d| -d).collect();
    let next = NetworkState {
        x: retract_all(&state.x, &descent, eps),
        w: state.w.clone(),
    };
    let constraints = edge_constraints(&next, g)?;
    let lambda = multipliers
        .iter()
        .zip(&constraints)
        .map(|(l, c)| {
            let mut out = l.clone();
            out.axpy(params.dual_step, c);
            out
        })
        .collect();
    Ok((next, lambda))
}

//! Centralized Karcher mean and the error metrics used to score solvers.

use crate::error::{Error, Result};
use crate::geometry::{distance, left_log, retract, ConvexityParams, Group, GroupPoint};
use crate::graph::Graph;

/// The data points `z_1, ..., z_N`, all on the same group.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    points: Vec<GroupPoint>,
}

impl Configuration {
    pub fn new(points: Vec<GroupPoint>) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::InvalidArgument("configuration needs at least one point".into()))?;
        let group = first.group();
        if let Some(bad) = points.iter().find(|p| p.group() != group) {
            return Err(Error::GroupMismatch {
                expected: group,
                found: bad.group(),
            });
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[GroupPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn group(&self) -> Group {
        self.points[0].group()
    }

    /// Left-translates every point by `g`.
    pub fn left_translate(&self, g: &GroupPoint) -> Configuration {
        Configuration {
            points: self.points.iter().map(|p| g.compose(p)).collect(),
        }
    }
}

/// Settings for the Karcher fixed-point iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KarcherOptions {
    pub step: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for KarcherOptions {
    fn default() -> Self {
        Self {
            step: 1.0,
            tol: 1e-12,
            max_iter: 10_000,
        }
    }
}

/// Computes the Karcher mean by the iteration
/// `y <- y * Exp(step * (1/N) sum_i Log(y^{-1} z_i))`, starting from `z_1`,
/// until `|sum_i Log(y^{-1} z_i)| <= tol`.
///
/// The points must lie in a common convex ball for the result to be the
/// unique minimizer; see [`in_convexity_ball`].
pub fn karcher_mean(z: &Configuration, opts: &KarcherOptions) -> Result<GroupPoint> {
    if !(opts.step > 0.0 && opts.step <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "karcher step must lie in (0, 1], got {}",
            opts.step
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("karcher tolerance must be positive".into()));
    }
    let n = z.len() as f64;
    let mut y = z.points[0].clone();
    let mut residual = f64::INFINITY;
    for _ in 0..=opts.max_iter {
        let sum = log_sum(&y, z)?;
        residual = sum.norm();
        if residual <= opts.tol {
            return Ok(y);
        }
        y = retract(&y, &sum, opts.step / n);
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual,
    })
}

fn log_sum(y: &GroupPoint, z: &Configuration) -> Result<crate::geometry::AlgebraVector> {
    let mut sum = y.group().zero();
    for zi in &z.points {
        sum += &left_log(y, zi)?;
    }
    Ok(sum)
}

/// `|sum_i Log(y^{-1} z_i)|`, the norm of the Karcher-equation residual.
pub fn karcher_residual(y: &GroupPoint, z: &Configuration) -> Result<f64> {
    if y.group() != z.group() {
        return Err(Error::GroupMismatch {
            expected: z.group(),
            found: y.group(),
        });
    }
    log_sum(y, z).map(|s| s.norm())
}

/// Consensus error `1/2 sum_{{i,j} in E} d(x_i, x_j)^2`.
pub fn consensus_error(x: &[GroupPoint], g: &Graph) -> Result<f64> {
    if x.len() != g.n_agents() {
        return Err(Error::LengthMismatch {
            expected: g.n_agents(),
            found: x.len(),
        });
    }
    let mut total = 0.0;
    for &(i, j) in g.edges() {
        let d = distance(&x[i], &x[j])?;
        total += d * d;
    }
    Ok(0.5 * total)
}

/// RCM error `sum_i d(x_i, z_bar)^2`.
pub fn rcm_error(x: &[GroupPoint], z_bar: &GroupPoint) -> Result<f64> {
    let mut total = 0.0;
    for xi in x {
        let d = distance(xi, z_bar)?;
        total += d * d;
    }
    Ok(total)
}

/// Conservative membership test for the convexity set: `true` certifies that
/// every point lies within `r*` of the Karcher mean. `false` means the test
/// could not certify membership (including when the mean failed to converge).
pub fn in_convexity_ball(z: &Configuration, params: &ConvexityParams) -> bool {
    if z.len() == 1 {
        return true;
    }
    let Ok(center) = karcher_mean(z, &KarcherOptions::default()) else {
        return false;
    };
    z.points.iter().all(|p| match distance(&center, p) {
        Ok(d) => d < params.r_star,
        Err(_) => false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{exp, AlgebraVector};
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn euclid(v: &[f64]) -> GroupPoint {
        GroupPoint::Euclidean(DVector::from_column_slice(v))
    }

    fn rot_z(theta: f64) -> GroupPoint {
        exp(&AlgebraVector::so3(0.0, 0.0, theta))
    }

    #[test]
    fn mean_of_identical_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = Group::So3.random(&mut rng);
        let z = Configuration::new(vec![g.clone(); 4]).unwrap();
        assert_eq!(karcher_mean(&z, &KarcherOptions::default()).unwrap(), g);
    }

    #[test]
    fn symmetric_pair_has_identity_mean() {
        let z = Configuration::new(vec![rot_z(0.6), rot_z(-0.6)]).unwrap();
        let y = karcher_mean(&z, &KarcherOptions::default()).unwrap();
        assert!(y.max_abs_diff(&Group::So3.identity()) < 1e-14);
    }

    #[test]
    fn euclidean_mean_in_one_step() {
        let z = Configuration::new(vec![euclid(&[0.0, 1.0]), euclid(&[2.0, 5.0]), euclid(&[4.0, 0.0])]).unwrap();
        let opts = KarcherOptions {
            max_iter: 1,
            ..Default::default()
        };
        let y = karcher_mean(&z, &opts).unwrap();
        assert!(y.max_abs_diff(&euclid(&[2.0, 2.0])) < 1e-15);
    }

    #[test]
    fn no_convergence_is_reported() {
        let z = Configuration::new(vec![rot_z(0.6), rot_z(-0.6), rot_z(0.1)]).unwrap();
        let opts = KarcherOptions {
            step: 0.01,
            tol: 1e-14,
            max_iter: 3,
        };
        assert!(matches!(karcher_mean(&z, &opts), Err(Error::NoConvergence { .. })));
    }

    #[test]
    fn residual_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = Group::So3.random(&mut rng);
        let z = Configuration::new(vec![p.clone()]).unwrap();
        assert_eq!(karcher_residual(&p, &z).unwrap(), 0.0);

        let z = Configuration::new(vec![euclid(&[1.0]), euclid(&[3.0]), euclid(&[8.0])]).unwrap();
        let y = euclid(&[2.0]);
        // N |z_bar - y| = 3 * |4 - 2|
        assert!((karcher_residual(&y, &z).unwrap() - 6.0).abs() < 1e-14);
    }

    #[test]
    fn consensus_error_cases() {
        let g2 = Graph::new(2, [(0, 1)]).unwrap();
        let x = vec![Group::So3.identity(), rot_z(std::f64::consts::FRAC_PI_4)];
        let expected = std::f64::consts::PI.powi(2) / 32.0;
        assert!((consensus_error(&x, &g2).unwrap() - expected).abs() < 1e-14);
        assert_eq!(consensus_error(&[rot_z(0.2), rot_z(0.2)], &g2).unwrap(), 0.0);

        // equilateral triangle in the plane, all pairwise distances 1
        let k3 = Graph::new(3, [(0, 1), (0, 2), (1, 2)]).unwrap();
        let h = 3f64.sqrt() / 2.0;
        let x = vec![euclid(&[0.0, 0.0]), euclid(&[1.0, 0.0]), euclid(&[0.5, h])];
        assert!((consensus_error(&x, &k3).unwrap() - 1.5).abs() < 1e-14);
    }

    #[test]
    fn rcm_error_cases() {
        let z_bar = euclid(&[1.0]);
        assert_eq!(rcm_error(&[euclid(&[0.0]), euclid(&[2.0])], &z_bar).unwrap(), 2.0);
        assert_eq!(rcm_error(&[z_bar.clone(), z_bar.clone()], &z_bar).unwrap(), 0.0);
        let e = rcm_error(&[rot_z(0.3)], &Group::So3.identity()).unwrap();
        assert!((e - 0.09).abs() < 1e-15);
    }

    #[test]
    fn convexity_ball_checks() {
        let params = Group::So3.convexity();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let center = Group::So3.random(&mut rng);
        let pts: Vec<_> = (0..10)
            .map(|_| crate::geometry::sample_in_ball(&center, 0.3, &mut rng))
            .collect();
        assert!(in_convexity_ball(&Configuration::new(pts).unwrap(), &params));
        assert!(in_convexity_ball(&Configuration::new(vec![center]).unwrap(), &params));

        let third = 2.0 * std::f64::consts::PI / 3.0;
        let spread = Configuration::new(vec![
            Group::So3.identity(),
            exp(&AlgebraVector::so3(third, 0.0, 0.0)),
            exp(&AlgebraVector::so3(-third, 0.0, 0.0)),
        ])
        .unwrap();
        assert!(!in_convexity_ball(&spread, &params));
    }
}

//! Lie group primitives for SO(3) and R^n under a bi-invariant metric.
//!
//! Group elements are [`GroupPoint`]s. Tangent vectors are always stored
//! left-trivialized, i.e. pulled back to the Lie algebra at the identity, as
//! [`AlgebraVector`]s. The tangent vector `u` at `x` is represented by
//! `xi = x^{-1} u`, so the manifold logarithm `log_x(y)` is stored as
//! `Log(x^{-1} y)` and a retraction step is `x * Exp(step * xi)`.
//!
//! On SO(3) the algebra element is the axis-angle 3-vector `w` with
//! `hat(w)` skew-symmetric. The metric `<xi, eta> = 1/2 tr(xi^T eta)` reduces
//! to the Euclidean dot product of the 3-vectors, so `|Log(x^T y)|` is the
//! rotation angle of `x^T y`.
//!
//! Arithmetic on mismatched groups (an SO(3) vector plus an R^n vector, or two
//! R^n vectors of different sizes) is a programming error and panics, like a
//! shape mismatch in `nalgebra`. Fallible entry points that take user data
//! return [`Error::GroupMismatch`] instead.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::str::FromStr;

use nalgebra::{DVector, Matrix3, UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Below this rotation angle `exp`/`log` switch to Taylor forms.
pub const SMALL_ANGLE: f64 = 1e-8;

/// Default distance from pi at which the SO(3) logarithm refuses to answer.
pub const DEFAULT_CUT_LOCUS_MARGIN: f64 = 1e-9;

/// Tolerance on `|R^T R - I|_F` for a matrix to be accepted as a rotation.
pub const ORTHOGONALITY_TOL: f64 = 1e-9;

/// Largest orthogonality residual `project` is meant to repair.
pub const MAX_PROJECTABLE_DRIFT: f64 = 1e-3;

/// The two concrete groups supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    So3,
    Euclidean(usize),
}

impl Group {
    /// Dimension of the Lie algebra.
    pub fn algebra_dim(&self) -> usize {
        match *self {
            Group::So3 => 3,
            Group::Euclidean(n) => n,
        }
    }

    pub fn identity(&self) -> GroupPoint {
        match *self {
            Group::So3 => GroupPoint::So3(Matrix3::identity()),
            Group::Euclidean(n) => GroupPoint::Euclidean(DVector::zeros(n)),
        }
    }

    pub fn zero(&self) -> AlgebraVector {
        match *self {
            Group::So3 => AlgebraVector::So3(Vector3::zeros()),
            Group::Euclidean(n) => AlgebraVector::Euclidean(DVector::zeros(n)),
        }
    }

    /// Convexity constants of the group under its bi-invariant metric.
    ///
    /// For SO(3) with `<xi, eta> = 1/2 tr(xi^T eta)` the injectivity radius
    /// is pi and the sectional curvature is bounded by 1/4, which gives
    /// `r* = 1/2 min(pi, 2 pi) = pi/2`. These constants are derived from the
    /// metric, not tabulated anywhere; use [`ConvexityParams::new`] to
    /// override them. R^n is flat with infinite injectivity radius, so every
    /// ball is convex.
    pub fn convexity(&self) -> ConvexityParams {
        match self {
            Group::So3 => ConvexityParams::new(PI, 0.25),
            Group::Euclidean(_) => ConvexityParams::new(f64::INFINITY, 0.0),
        }
    }

    /// Draws a random element. Haar-uniform on SO(3), standard normal on R^n.
    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> GroupPoint {
        match *self {
            Group::So3 => {
                let q = nalgebra::Quaternion::new(
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                );
                let unit = UnitQuaternion::from_quaternion(q);
                GroupPoint::So3(unit.to_rotation_matrix().into_inner())
            }
            Group::Euclidean(n) => {
                GroupPoint::Euclidean(DVector::from_fn(n, |_, _| rng.sample(StandardNormal)))
            }
        }
    }

    fn check(&self, other: Group) -> Result<()> {
        if *self == other {
            Ok(())
        } else {
            Err(Error::GroupMismatch {
                expected: *self,
                found: other,
            })
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Group::So3 => write!(f, "so3"),
            Group::Euclidean(n) => write!(f, "euclidean:{n}"),
        }
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "so3" {
            return Ok(Group::So3);
        }
        if let Some(n) = s.strip_prefix("euclidean:") {
            let n: usize = n
                .parse()
                .map_err(|_| Error::Config(format!("invalid euclidean dimension in `{s}`")))?;
            if n == 0 {
                return Err(Error::Config("euclidean dimension must be positive".into()));
            }
            return Ok(Group::Euclidean(n));
        }
        Err(Error::Config(format!(
            "unknown group `{s}`, expected `so3` or `euclidean:<n>`"
        )))
    }
}

/// Injectivity radius, sectional curvature bound and the resulting convexity
/// radius `r* = 1/2 min(inj, pi / sqrt(curvature_upper))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexityParams {
    pub inj: f64,
    pub curvature_upper: f64,
    pub r_star: f64,
}

impl ConvexityParams {
    pub fn new(inj: f64, curvature_upper: f64) -> Self {
        let curvature_limit = if curvature_upper > 0.0 {
            PI / curvature_upper.sqrt()
        } else {
            f64::INFINITY
        };
        Self {
            inj,
            curvature_upper,
            r_star: 0.5 * inj.min(curvature_limit),
        }
    }
}

/// An element of the group.
#[derive(Debug, Clone, PartialEq)]
pub enum GroupPoint {
    So3(Matrix3<f64>),
    Euclidean(DVector<f64>),
}

impl GroupPoint {
    /// Wraps a rotation matrix, rejecting anything that is not special orthogonal
    /// to within [`ORTHOGONALITY_TOL`].
    pub fn so3(m: Matrix3<f64>) -> Result<Self> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidPoint("non-finite rotation entry".into()));
        }
        let residual = orthogonality_residual(&m);
        if residual > ORTHOGONALITY_TOL {
            return Err(Error::InvalidPoint(format!(
                "|R^T R - I| = {residual:e} exceeds {ORTHOGONALITY_TOL:e}"
            )));
        }
        if m.determinant() <= 0.0 {
            return Err(Error::InvalidPoint("rotation has non-positive determinant".into()));
        }
        Ok(GroupPoint::So3(m))
    }

    pub fn euclidean(v: DVector<f64>) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::InvalidPoint("empty euclidean vector".into()));
        }
        if !v.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidPoint("non-finite euclidean entry".into()));
        }
        Ok(GroupPoint::Euclidean(v))
    }

    pub fn group(&self) -> Group {
        match self {
            GroupPoint::So3(_) => Group::So3,
            GroupPoint::Euclidean(v) => Group::Euclidean(v.len()),
        }
    }

    /// Group product `self * other`.
    pub fn compose(&self, other: &GroupPoint) -> GroupPoint {
        match (self, other) {
            (GroupPoint::So3(a), GroupPoint::So3(b)) => GroupPoint::So3(a * b),
            (GroupPoint::Euclidean(a), GroupPoint::Euclidean(b)) => {
                assert_eq!(a.len(), b.len(), "euclidean dimension mismatch");
                GroupPoint::Euclidean(a + b)
            }
            _ => panic!("group mismatch: {} * {}", self.group(), other.group()),
        }
    }

    pub fn inverse(&self) -> GroupPoint {
        match self {
            GroupPoint::So3(r) => GroupPoint::So3(r.transpose()),
            GroupPoint::Euclidean(v) => GroupPoint::Euclidean(-v),
        }
    }

    pub fn as_matrix(&self) -> Option<&Matrix3<f64>> {
        match self {
            GroupPoint::So3(m) => Some(m),
            GroupPoint::Euclidean(_) => None,
        }
    }

    pub fn as_vector(&self) -> Option<&DVector<f64>> {
        match self {
            GroupPoint::So3(_) => None,
            GroupPoint::Euclidean(v) => Some(v),
        }
    }

    /// Flat view of the payload: row-major matrix entries or vector entries.
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            GroupPoint::So3(m) => m.transpose().iter().copied().collect(),
            GroupPoint::Euclidean(v) => v.iter().copied().collect(),
        }
    }

    /// Largest absolute entrywise difference to `other`.
    pub fn max_abs_diff(&self, other: &GroupPoint) -> f64 {
        match (self, other) {
            (GroupPoint::So3(a), GroupPoint::So3(b)) => (a - b).amax(),
            (GroupPoint::Euclidean(a), GroupPoint::Euclidean(b)) => (a - b).amax(),
            _ => f64::INFINITY,
        }
    }
}

/// A left-trivialized tangent vector, i.e. an element of the Lie algebra.
#[derive(Debug, Clone, PartialEq)]
pub enum AlgebraVector {
    So3(Vector3<f64>),
    Euclidean(DVector<f64>),
}

impl AlgebraVector {
    pub fn so3(x: f64, y: f64, z: f64) -> Self {
        AlgebraVector::So3(Vector3::new(x, y, z))
    }

    pub fn euclidean(coords: &[f64]) -> Self {
        AlgebraVector::Euclidean(DVector::from_column_slice(coords))
    }

    pub fn group(&self) -> Group {
        match self {
            AlgebraVector::So3(_) => Group::So3,
            AlgebraVector::Euclidean(v) => Group::Euclidean(v.len()),
        }
    }

    pub fn coords(&self) -> &[f64] {
        match self {
            AlgebraVector::So3(v) => v.as_slice(),
            AlgebraVector::Euclidean(v) => v.as_slice(),
        }
    }

    /// Norm induced by the bi-invariant metric.
    pub fn norm(&self) -> f64 {
        match self {
            AlgebraVector::So3(v) => v.norm(),
            AlgebraVector::Euclidean(v) => v.norm(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coords().iter().all(|v| v.is_finite())
    }

    pub fn scale(&self, s: f64) -> AlgebraVector {
        match self {
            AlgebraVector::So3(v) => AlgebraVector::So3(v * s),
            AlgebraVector::Euclidean(v) => AlgebraVector::Euclidean(v * s),
        }
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &AlgebraVector) {
        match (self, other) {
            (AlgebraVector::So3(a), AlgebraVector::So3(b)) => *a += b * s,
            (AlgebraVector::Euclidean(a), AlgebraVector::Euclidean(b)) => a.axpy(s, b, 1.0),
            (a, b) => panic!("group mismatch: {} vs {}", a.group(), b.group()),
        }
    }

    /// The skew-symmetric matrix `hat(w)` of an SO(3) algebra element.
    pub fn hat(&self) -> Option<Matrix3<f64>> {
        match self {
            AlgebraVector::So3(w) => Some(hat(w)),
            AlgebraVector::Euclidean(_) => None,
        }
    }
}

impl Add for &AlgebraVector {
    type Output = AlgebraVector;

    fn add(self, rhs: &AlgebraVector) -> AlgebraVector {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub for &AlgebraVector {
    type Output = AlgebraVector;

    fn sub(self, rhs: &AlgebraVector) -> AlgebraVector {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl AddAssign<&AlgebraVector> for AlgebraVector {
    fn add_assign(&mut self, rhs: &AlgebraVector) {
        self.axpy(1.0, rhs);
    }
}

impl Neg for &AlgebraVector {
    type Output = AlgebraVector;

    fn neg(self) -> AlgebraVector {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &AlgebraVector {
    type Output = AlgebraVector;

    fn mul(self, rhs: f64) -> AlgebraVector {
        self.scale(rhs)
    }
}

pub fn hat(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// `|R^T R - I|_F`.
pub fn orthogonality_residual(m: &Matrix3<f64>) -> f64 {
    (m.transpose() * m - Matrix3::identity()).norm()
}

/// Group exponential. Rodrigues' formula on SO(3), the identity map on R^n.
pub fn exp(xi: &AlgebraVector) -> GroupPoint {
    match xi {
        AlgebraVector::So3(w) => GroupPoint::So3(so3_exp(w)),
        AlgebraVector::Euclidean(v) => GroupPoint::Euclidean(v.clone()),
    }
}

fn so3_exp(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta = w.norm();
    let k = hat(w);
    let k2 = k * k;
    if theta < SMALL_ANGLE {
        return Matrix3::identity() + k + k2 * 0.5;
    }
    let half_sin = (0.5 * theta).sin();
    // 1 - cos(theta) = 2 sin^2(theta/2) avoids cancellation for small angles
    Matrix3::identity() + k * (theta.sin() / theta) + k2 * (2.0 * half_sin * half_sin / (theta * theta))
}

/// Group logarithm with the default cut-locus margin.
pub fn log(g: &GroupPoint) -> Result<AlgebraVector> {
    log_with_margin(g, DEFAULT_CUT_LOCUS_MARGIN)
}

/// Group logarithm. Fails with [`Error::CutLocus`] when the rotation angle
/// exceeds `pi - margin`.
pub fn log_with_margin(g: &GroupPoint, margin: f64) -> Result<AlgebraVector> {
    match g {
        GroupPoint::So3(r) => so3_log(r, margin).map(AlgebraVector::So3),
        GroupPoint::Euclidean(v) => Ok(AlgebraVector::Euclidean(v.clone())),
    }
}

fn so3_log(r: &Matrix3<f64>, margin: f64) -> Result<Vector3<f64>> {
    // antisymmetric part is sin(theta) * axis
    let skew = Vector3::new(
        r[(2, 1)] - r[(1, 2)],
        r[(0, 2)] - r[(2, 0)],
        r[(1, 0)] - r[(0, 1)],
    ) * 0.5;
    let cos = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let sin = skew.norm();
    let theta = sin.atan2(cos);
    if !theta.is_finite() {
        return Err(Error::Numerical("non-finite rotation angle".into()));
    }
    if theta > PI - margin {
        return Err(Error::CutLocus {
            angle: theta,
            margin,
        });
    }
    if theta < SMALL_ANGLE {
        return Ok(skew * (1.0 + theta * theta / 6.0));
    }
    if cos > -0.5 {
        return Ok(skew * (theta / sin));
    }
    // Close to pi the antisymmetric part is tiny. Recover the axis from the
    // symmetric part (1 - cos) u u^T and take its sign from the skew part.
    let sym = (r + r.transpose()) * 0.5 - Matrix3::identity() * cos;
    let k = (0..3)
        .max_by(|&a, &b| sym[(a, a)].total_cmp(&sym[(b, b)]))
        .unwrap_or(0);
    let mut axis: Vector3<f64> = sym.column(k).into_owned();
    let len = axis.norm();
    if len == 0.0 {
        return Err(Error::Numerical("degenerate rotation axis".into()));
    }
    axis /= len;
    if axis.dot(&skew) < 0.0 {
        axis = -axis;
    }
    Ok(axis * theta)
}

/// Left-trivialized logarithm `Log(x^{-1} y)`, the pullback of `log_x(y)` to the algebra.
pub fn left_log(x: &GroupPoint, y: &GroupPoint) -> Result<AlgebraVector> {
    x.group().check(y.group())?;
    match (x, y) {
        (GroupPoint::So3(a), GroupPoint::So3(b)) => {
            so3_log(&(a.transpose() * b), DEFAULT_CUT_LOCUS_MARGIN).map(AlgebraVector::So3)
        }
        (GroupPoint::Euclidean(a), GroupPoint::Euclidean(b)) => Ok(AlgebraVector::Euclidean(b - a)),
        _ => unreachable!(),
    }
}

/// Geodesic distance `|Log(x^{-1} y)|`.
pub fn distance(x: &GroupPoint, y: &GroupPoint) -> Result<f64> {
    left_log(x, y).map(|v| v.norm())
}

/// The bi-invariant inner product on the algebra.
pub fn inner(xi: &AlgebraVector, eta: &AlgebraVector) -> Result<f64> {
    xi.group().check(eta.group())?;
    Ok(match (xi, eta) {
        (AlgebraVector::So3(a), AlgebraVector::So3(b)) => a.dot(b),
        (AlgebraVector::Euclidean(a), AlgebraVector::Euclidean(b)) => a.dot(b),
        _ => unreachable!(),
    })
}

/// `x * Exp(step * xi)`, re-projected onto the group.
pub fn retract(x: &GroupPoint, xi: &AlgebraVector, step: f64) -> GroupPoint {
    match (x, xi) {
        (GroupPoint::So3(r), AlgebraVector::So3(w)) => {
            if step == 0.0 {
                return x.clone();
            }
            let moved = r * so3_exp(&(w * step));
            // a product of two rotations is never singular
            GroupPoint::So3(polar_rotation(&moved).unwrap_or(moved))
        }
        (GroupPoint::Euclidean(a), AlgebraVector::Euclidean(v)) => {
            assert_eq!(a.len(), v.len(), "euclidean dimension mismatch");
            let mut out = a.clone();
            out.axpy(step, v, 1.0);
            GroupPoint::Euclidean(out)
        }
        _ => panic!("group mismatch: {} vs {}", x.group(), xi.group()),
    }
}

/// Nearest special-orthogonal matrix (polar factor). The identity on R^n.
pub fn project(g: &GroupPoint) -> Result<GroupPoint> {
    match g {
        GroupPoint::So3(m) => {
            if !m.iter().all(|v| v.is_finite()) {
                return Err(Error::DegenerateMatrix("non-finite entries".into()));
            }
            let det = m.determinant();
            if det.abs() <= 1e-12 * m.norm().powi(3).max(f64::MIN_POSITIVE) {
                return Err(Error::DegenerateMatrix("rank-deficient matrix".into()));
            }
            if det < 0.0 {
                return Err(Error::DegenerateMatrix("matrix has negative determinant".into()));
            }
            polar_rotation(m)
                .map(GroupPoint::So3)
                .ok_or_else(|| Error::DegenerateMatrix("polar iteration failed".into()))
        }
        GroupPoint::Euclidean(_) => Ok(g.clone()),
    }
}

/// Newton iteration `R <- (R + R^{-T}) / 2` for the orthogonal polar factor.
/// Converges quadratically from near-orthogonal input.
fn polar_rotation(m: &Matrix3<f64>) -> Option<Matrix3<f64>> {
    let mut r = *m;
    for _ in 0..32 {
        let inv_t = r.try_inverse()?.transpose();
        let next = (r + inv_t) * 0.5;
        let change = (next - r).amax();
        r = next;
        if change <= 4.0 * f64::EPSILON {
            break;
        }
    }
    r.iter().all(|v| v.is_finite()).then_some(r)
}

/// Samples a point at geodesic distance strictly less than `radius` from `center`.
///
/// The direction is uniform on the unit sphere of the algebra and the length is
/// `radius * u^(1/d)` with `u` uniform on `[0, 1)` and `d` the algebra
/// dimension, which approximates volume weighting for small radii.
pub fn sample_in_ball<R: Rng + ?Sized>(center: &GroupPoint, radius: f64, rng: &mut R) -> GroupPoint {
    let group = center.group();
    let dim = group.algebra_dim();
    let direction: Vec<f64> = loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x: &f64| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            break v.into_iter().map(|x| x / n).collect();
        }
    };
    let u: f64 = rng.random();
    let length = radius * u.powf(1.0 / dim as f64);
    let xi = match group {
        Group::So3 => AlgebraVector::so3(direction[0], direction[1], direction[2]),
        Group::Euclidean(_) => AlgebraVector::euclidean(&direction),
    };
    retract(center, &xi, length)
}

/// `J_r^{-1}(c) eta`: the derivative of `t -> Log(Exp(c) Exp(t eta))` at zero.
pub fn dlog_right_inv(c: &AlgebraVector, eta: &AlgebraVector) -> AlgebraVector {
    dlog_inv(c, eta, 0.5)
}

/// `J_l^{-1}(c) eta`: the derivative of `t -> Log(Exp(t eta) Exp(c))` at zero.
pub fn dlog_left_inv(c: &AlgebraVector, eta: &AlgebraVector) -> AlgebraVector {
    dlog_inv(c, eta, -0.5)
}

fn dlog_inv(c: &AlgebraVector, eta: &AlgebraVector, half: f64) -> AlgebraVector {
    match (c, eta) {
        (AlgebraVector::So3(c), AlgebraVector::So3(e)) => {
            let theta = c.norm();
            let beta = if theta < 1e-4 {
                1.0 / 12.0 + theta * theta / 720.0
            } else {
                1.0 / (theta * theta) - (1.0 + theta.cos()) / (2.0 * theta * theta.sin())
            };
            let k = hat(c);
            AlgebraVector::So3(e + k * e * half + k * (k * e) * beta)
        }
        (AlgebraVector::Euclidean(_), AlgebraVector::Euclidean(_)) => eta.clone(),
        _ => panic!("group mismatch: {} vs {}", c.group(), eta.group()),
    }
}

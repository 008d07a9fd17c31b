//! Distributed consensus to the Riemannian center of mass (Karcher mean) on
//! Lie groups with bi-invariant metrics.
//!
//! The crate provides the group primitives for SO(3) and R^n ([`geometry`]),
//! communication graphs ([`graph`]), a centralized Karcher-mean oracle and
//! error metrics ([`rcm`]), the distributed solvers ([`solvers`]), an exact
//! linear analysis of the Euclidean case ([`euclidean`]) and the
//! configuration-driven simulation harness behind the `rcm-sim` binary
//! ([`harness`]).

pub mod error;
pub mod euclidean;
pub mod geometry;
pub mod graph;
pub mod harness;
pub mod rcm;
pub mod rng;
pub mod solvers;

pub use error::{Error, Result};
pub use geometry::{AlgebraVector, ConvexityParams, Group, GroupPoint};
pub use graph::{Graph, Topology};
pub use rcm::Configuration;
pub use solvers::{InitMode, Method, NetworkState, SolverConfig, TraceRecord};

//! Undirected communication graphs and the graph Laplacian.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::AlgebraVector;

/// Maximum number of Erdos-Renyi draws before giving up on connectivity.
pub const MAX_CONNECTIVITY_ATTEMPTS: usize = 1000;

/// One algebra element per agent, an element of the product algebra.
pub type AlgebraField = Vec<AlgebraVector>;

/// Graph family used by [`generate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Topology {
    Complete,
    Ring,
    Path,
    /// Each edge present independently with this probability.
    ErdosRenyi(f64),
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Topology::Complete => write!(f, "complete"),
            Topology::Ring => write!(f, "ring"),
            Topology::Path => write!(f, "path"),
            Topology::ErdosRenyi(p) => write!(f, "erdos_renyi:{p}"),
        }
    }
}

impl FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "complete" => Ok(Topology::Complete),
            "ring" => Ok(Topology::Ring),
            "path" => Ok(Topology::Path),
            other => {
                let p = other
                    .strip_prefix("erdos_renyi:")
                    .ok_or_else(|| {
                        Error::Config(format!(
                            "unknown topology `{other}`, expected one of complete, ring, path, erdos_renyi:<p>"
                        ))
                    })?
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("invalid edge probability in `{other}`")))?;
                if !(p > 0.0 && p <= 1.0) {
                    return Err(Error::Config(format!(
                        "edge probability must lie in (0, 1], got {p}"
                    )));
                }
                Ok(Topology::ErdosRenyi(p))
            }
        }
    }
}

/// A simple undirected graph on agents `0..n_agents`. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n_agents: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from unordered pairs. Self-loops, duplicates and
    /// out-of-range endpoints are rejected.
    pub fn new(n_agents: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n_agents == 0 {
            return Err(Error::InvalidArgument("graph needs at least one agent".into()));
        }
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i == j {
                return Err(Error::InvalidArgument(format!("self-loop at {i}")));
            }
            if i >= n_agents || j >= n_agents {
                return Err(Error::InvalidArgument(format!(
                    "edge {{{i},{j}}} out of range for {n_agents} agents"
                )));
            }
            if !set.insert((i.min(j), i.max(j))) {
                return Err(Error::InvalidArgument(format!("duplicate edge {{{i},{j}}}")));
            }
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut neighbors = vec![Vec::new(); n_agents];
        for &(i, j) in &edges {
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Ok(Self {
            n_agents,
            edges,
            neighbors,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    /// Edges as `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    /// Breadth-first reachability from agent 0.
    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n_agents];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            for &j in &self.neighbors[i] {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    queue.push_back(j);
                }
            }
        }
        count == self.n_agents
    }

    /// `L = D - A`.
    pub fn laplacian_matrix(&self) -> DMatrix<f64> {
        let n = self.n_agents;
        let mut l = DMatrix::zeros(n, n);
        for &(i, j) in &self.edges {
            l[(i, j)] = -1.0;
            l[(j, i)] = -1.0;
            l[(i, i)] += 1.0;
            l[(j, j)] += 1.0;
        }
        l
    }

    /// `(L v)_i = sum_{j ~ i} (v_i - v_j)` on the product algebra.
    pub fn laplacian_apply(&self, v: &[AlgebraVector]) -> Result<AlgebraField> {
        if v.len() != self.n_agents {
            return Err(Error::LengthMismatch {
                expected: self.n_agents,
                found: v.len(),
            });
        }
        let group = v[0].group();
        if let Some(bad) = v.iter().find(|x| x.group() != group) {
            return Err(Error::GroupMismatch {
                expected: group,
                found: bad.group(),
            });
        }
        Ok((0..self.n_agents)
            .map(|i| {
                let mut acc = group.zero();
                for &j in &self.neighbors[i] {
                    acc += &(&v[i] - &v[j]);
                }
                acc
            })
            .collect())
    }

    /// Compact edge list `i-j i-j ...` used in reports.
    pub fn edge_string(&self) -> String {
        self.edges
            .iter()
            .map(|(i, j)| format!("{i}-{j}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Generates a connected graph. Erdos-Renyi graphs are redrawn from the same
/// random stream until connected.
pub fn generate<R: Rng + ?Sized>(topology: Topology, n: usize, rng: &mut R) -> Result<Graph> {
    if n == 0 {
        return Err(Error::InvalidArgument("graph needs at least one agent".into()));
    }
    match topology {
        Topology::Complete => Graph::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)))),
        Topology::Path => Graph::new(n, (1..n).map(|i| (i - 1, i))),
        Topology::Ring => {
            let mut edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
            if n > 2 {
                edges.push((n - 1, 0));
            }
            Graph::new(n, edges)
        }
        Topology::ErdosRenyi(p) => {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "edge probability must lie in (0, 1], got {p}"
                )));
            }
            for _ in 0..MAX_CONNECTIVITY_ATTEMPTS {
                let mut edges = Vec::new();
                for i in 0..n {
                    for j in i + 1..n {
                        if rng.random::<f64>() < p {
                            edges.push((i, j));
                        }
                    }
                }
                let g = Graph::new(n, edges)?;
                if g.is_connected() {
                    return Ok(g);
                }
            }
            Err(Error::Generation(format!(
                "no connected erdos_renyi({p}) graph on {n} agents after {MAX_CONNECTIVITY_ATTEMPTS} attempts"
            )))
        }
    }
}

/// Sum of the entries of a field.
pub fn field_sum(v: &[AlgebraVector]) -> Option<AlgebraVector> {
    let (first, rest) = v.split_first()?;
    let mut acc = first.clone();
    for x in rest {
        acc += x;
    }
    Some(acc)
}

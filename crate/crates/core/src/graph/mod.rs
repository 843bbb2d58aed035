//! Undirected weighted graphs, exact shortest-path references, hop-limited
//! relaxation and b-nearest-neighbour balls.

mod balls;
mod contract;
mod io;
mod sssp;

pub use balls::{ceil_log2, compute_balls, BallData};
pub use contract::{contract_zero_edges, ZeroContraction};
pub use io::{load_graph, parse_edge_list};
pub use sssp::{all_pairs, bellman_ford_hops, bellman_ford_labeled, dijkstra};

use std::fmt::Write as _;

use thiserror::Error;

use crate::scalar::Weight;

pub type VertexId = usize;

/// Largest weight accepted from external input. Sums along any simple path
/// stay far below `u64::MAX` for every graph that fits in memory.
pub const W_MAX: u64 = 1 << 40;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("line {line}: malformed input {content:?}")]
    MalformedLine { line: usize, content: String },
    #[error("line {line}: self-loop at vertex {vertex}")]
    SelfLoop { line: usize, vertex: VertexId },
    #[error("line {line}: negative weight {weight}")]
    NegativeWeight { line: usize, weight: i128 },
    #[error("line {line}: weight {weight} exceeds the maximum {max}")]
    WeightTooLarge { line: usize, weight: u128, max: u128 },
    #[error("line {line}: vertex {vertex} out of range for n = {n}")]
    VertexOutOfRange {
        line: usize,
        vertex: VertexId,
        n: usize,
    },
    #[error("header declares {declared} edges but {found} were given")]
    EdgeCountMismatch { declared: usize, found: usize },
    #[error("graph has no vertices")]
    Empty,
    #[error("graph is not connected: vertex {vertex} is unreachable from vertex 0")]
    NotConnected { vertex: VertexId },
    #[error("invalid path: {0}")]
    InvalidPath(String),
}

/// Edge with `u < v`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Edge<W> {
    pub u: VertexId,
    pub v: VertexId,
    pub w: W,
}

/// Immutable undirected graph in CSR form.
///
/// Edges are stored once (`u < v`, sorted by endpoints); parallel edges are
/// merged keeping the minimum weight and self-loops are dropped at build time.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightedGraph<W> {
    n: usize,
    edges: Vec<Edge<W>>,
    offsets: Vec<usize>,
    adj: Vec<(u32, u32)>,
}

impl<W: Weight> WeightedGraph<W> {
    /// Builds a graph from arbitrary `(u, v, w)` triples: self-loops are
    /// dropped and parallel edges keep their minimum weight. No connectivity
    /// check is made.
    ///
    /// # Panics
    /// If an endpoint is `>= n` or `n` exceeds `u32::MAX`.
    pub fn from_edges<I>(n: usize, edges: I) -> Self
    where
        I: IntoIterator<Item = (VertexId, VertexId, W)>,
    {
        assert!(n <= u32::MAX as usize, "too many vertices");
        let mut list: Vec<Edge<W>> = edges
            .into_iter()
            .filter(|&(u, v, _)| u != v)
            .map(|(u, v, w)| {
                assert!(u < n && v < n, "edge ({u},{v}) out of range for n={n}");
                Edge {
                    u: u.min(v),
                    v: u.max(v),
                    w,
                }
            })
            .collect();
        list.sort_unstable_by(|a, b| (a.u, a.v, a.w).cmp(&(b.u, b.v, b.w)));
        list.dedup_by(|later, kept| later.u == kept.u && later.v == kept.v);
        Self::from_sorted_unique(n, list)
    }

    fn from_sorted_unique(n: usize, edges: Vec<Edge<W>>) -> Self {
        assert!(edges.len() <= u32::MAX as usize, "too many edges");
        let mut degree = vec![0usize; n + 1];
        for e in &edges {
            degree[e.u + 1] += 1;
            degree[e.v + 1] += 1;
        }
        for i in 0..n {
            degree[i + 1] += degree[i];
        }
        let offsets = degree;
        let mut fill = offsets.clone();
        let mut adj = vec![(0u32, 0u32); 2 * edges.len()];
        for (i, e) in edges.iter().enumerate() {
            adj[fill[e.u]] = (e.v as u32, i as u32);
            fill[e.u] += 1;
            adj[fill[e.v]] = (e.u as u32, i as u32);
            fill[e.v] += 1;
        }
        Self {
            n,
            edges,
            offsets,
            adj,
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.edges.len()
    }

    #[inline]
    pub fn edges(&self) -> &[Edge<W>] {
        &self.edges
    }

    #[inline]
    pub fn edge(&self, i: usize) -> Edge<W> {
        self.edges[i]
    }

    #[inline]
    pub fn degree(&self, v: VertexId) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    /// `(neighbour, weight)` pairs of `v`, sorted by neighbour id.
    #[inline]
    pub fn neighbors(&self, v: VertexId) -> impl Iterator<Item = (VertexId, W)> + '_ {
        self.adj[self.offsets[v]..self.offsets[v + 1]]
            .iter()
            .map(move |&(u, e)| (u as VertexId, self.edges[e as usize].w))
    }

    /// `(neighbour, edge index)` pairs of `v`.
    #[inline]
    pub fn incident(&self, v: VertexId) -> impl Iterator<Item = (VertexId, usize)> + '_ {
        self.adj[self.offsets[v]..self.offsets[v + 1]]
            .iter()
            .map(|&(u, e)| (u as VertexId, e as usize))
    }

    /// Index of the edge `{u, v}`, if present.
    pub fn edge_index(&self, u: VertexId, v: VertexId) -> Option<usize> {
        let key = (u.min(v), u.max(v));
        self.edges.binary_search_by(|e| (e.u, e.v).cmp(&key)).ok()
    }

    pub fn weight(&self, u: VertexId, v: VertexId) -> Option<W> {
        self.edge_index(u, v).map(|i| self.edges[i].w)
    }

    pub fn max_weight(&self) -> W {
        self.edges.iter().map(|e| e.w).max().unwrap_or_else(W::zero)
    }

    /// Returns the first vertex unreachable from vertex 0, if any.
    pub fn first_unreachable(&self) -> Option<VertexId> {
        if self.n == 0 {
            return None;
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for (u, _) in self.incident(v) {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen.iter().position(|&s| !s)
    }

    pub fn is_connected(&self) -> bool {
        self.first_unreachable().is_none()
    }

    pub fn ensure_connected(&self) -> Result<(), GraphError> {
        match self.first_unreachable() {
            None => Ok(()),
            Some(vertex) => Err(GraphError::NotConnected { vertex }),
        }
    }

    /// Same topology with every weight transformed.
    pub fn map_weights<V: Weight>(&self, mut f: impl FnMut(W) -> V) -> WeightedGraph<V> {
        let edges = self
            .edges
            .iter()
            .map(|e| Edge {
                u: e.u,
                v: e.v,
                w: f(e.w),
            })
            .collect();
        WeightedGraph {
            n: self.n,
            edges,
            offsets: self.offsets.clone(),
            adj: self.adj.clone(),
        }
    }

    /// Serializes to the `n m` / `u v w` edge-list format.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::with_capacity(16 * (self.m() + 1));
        let _ = writeln!(out, "{} {}", self.n, self.m());
        for e in &self.edges {
            let _ = writeln!(out, "{} {} {}", e.u, e.v, e.w);
        }
        out
    }

    /// Sum of edge weights along consecutive vertices; repeats cost nothing.
    pub fn walk_length(&self, vertices: &[VertexId]) -> Result<W, GraphError> {
        let mut total = W::zero();
        for pair in vertices.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if a >= self.n || b >= self.n {
                return Err(GraphError::InvalidPath(format!("vertex out of range in {a}-{b}")));
            }
            if a == b {
                continue;
            }
            match self.weight(a, b) {
                Some(w) => total = total.plus(w),
                None => return Err(GraphError::InvalidPath(format!("no edge {a}-{b}"))),
            }
        }
        Ok(total)
    }
}

/// A walk `u_0 .. u_h` in a host graph together with its total weight.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Path {
    pub vertices: Vec<VertexId>,
    pub length: u64,
}

impl Path {
    /// Validates consecutive vertices against `g` and computes the length.
    pub fn new(g: &WeightedGraph<u64>, vertices: Vec<VertexId>) -> Result<Self, GraphError> {
        if vertices.is_empty() {
            return Err(GraphError::InvalidPath("empty vertex list".into()));
        }
        let length = g.walk_length(&vertices)?;
        Ok(Self { vertices, length })
    }

    pub fn hops(&self) -> usize {
        self.vertices.len().saturating_sub(1)
    }

    pub fn source(&self) -> VertexId {
        self.vertices[0]
    }

    pub fn target(&self) -> VertexId {
        *self.vertices.last().expect("non-empty path")
    }

    pub fn is_simple(&self) -> bool {
        let mut seen = std::collections::HashSet::with_capacity(self.vertices.len());
        self.vertices.iter().all(|v| seen.insert(*v))
    }
}

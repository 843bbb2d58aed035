//! Multi-level subemulator towers, the distance oracle that walks them, and
//! the low-hop emulator read off a tower.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{
    all_pairs, bellman_ford_hops, parse_edge_list, GraphError, VertexId, WeightedGraph,
};
use crate::scalar::Weight;
use crate::seeds;
use crate::subemulator::{build_subemulator_with, SubemulatorError, DEFAULT_SAMPLE_CONST};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmulatorError {
    #[error("k = {k} outside [0.5, {max}]")]
    KOutOfRange { k: f64, max: f64 },
    #[error(transparent)]
    Subemulator(#[from] SubemulatorError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("malformed emulator header: {0}")]
    Header(String),
}

/// Default constant `c` in the initial ball size `ceil((c ln n)^2)`.
pub const DEFAULT_BALL_CONST: f64 = 75.0;

/// Per-level weight growth of the emulator.
pub const LEVEL_FACTOR: u128 = 27;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PreprocessConfig {
    /// Sparsity/stretch trade-off, in `[0.5, 0.5 log2 n]`.
    pub k: f64,
    /// `c` in `b_0 = max(ceil((c ln n)^2), ceil(n^(1/2k)))`.
    pub ball_const: f64,
    /// `c` in the per-level sampling rate `min(c ln n_i / b_i, 1/2)`.
    pub sample_const: f64,
}

impl PreprocessConfig {
    pub fn new(k: f64) -> Self {
        Self {
            k,
            ball_const: DEFAULT_BALL_CONST,
            sample_const: DEFAULT_SAMPLE_CONST,
        }
    }

    /// `k = 0.5 log2 n`, the sparsest setting, floored at 0.5.
    pub fn default_k(n: usize) -> f64 {
        (0.5 * (n.max(1) as f64).log2()).max(0.5)
    }

    pub fn with_constants(mut self, ball_const: f64, sample_const: f64) -> Self {
        self.ball_const = ball_const;
        self.sample_const = sample_const;
        self
    }
}

/// `4 ceil(log2 k + 1)`: the level-count bound for parameter `k`.
pub fn level_bound(k: f64) -> usize {
    (4.0 * (k.log2() + 1.0).ceil()).max(0.0) as usize
}

/// Initial ball size, never below 2 so the schedule strictly grows.
pub fn initial_ball_size(n: usize, k: f64, ball_const: f64) -> usize {
    let n = n.max(1) as f64;
    let a = (ball_const * n.ln()).powi(2).ceil();
    let b = n.powf(1.0 / (2.0 * k)).ceil();
    (a.max(b).min(usize::MAX as f64 / 2.0) as usize).max(2)
}

/// `ceil(b^1.25)`, forced to grow by at least one.
pub fn next_ball_size(b: usize) -> usize {
    let next = (b as f64).powf(1.25).ceil();
    (next.min(usize::MAX as f64 / 2.0) as usize).max(b + 1)
}

/// One non-terminal level of the tower.
#[derive(Clone, Debug)]
pub struct Level<W> {
    /// `H_i` on local ids.
    pub graph: WeightedGraph<W>,
    /// Local id to input vertex.
    pub vertices: Vec<VertexId>,
    pub b: usize,
    /// Local id of `q_i(v)` inside level `i + 1`.
    pub leader: Vec<u32>,
    /// `dist_{H_i}(v, q_i(v))`.
    pub leader_dist: Vec<W>,
    ball_offsets: Vec<usize>,
    /// `B_i(v) = B°(v) ∪ {q_i(v)}`, sorted by local id.
    ball: Vec<(u32, W)>,
}

impl<W: Weight> Level<W> {
    pub fn n(&self) -> usize {
        self.vertices.len()
    }

    pub fn ball(&self, v: usize) -> &[(u32, W)] {
        &self.ball[self.ball_offsets[v]..self.ball_offsets[v + 1]]
    }

    /// `dist_{H_i}(v, u)` if `u ∈ B_i(v)`.
    pub fn ball_distance(&self, v: usize, u: usize) -> Option<W> {
        let ball = self.ball(v);
        ball.binary_search_by_key(&(u as u32), |e| e.0)
            .ok()
            .map(|i| ball[i].1)
    }

    pub fn ball_entries(&self) -> usize {
        self.ball.len()
    }
}

/// The last level: every vertex sees every other vertex.
#[derive(Clone, Debug)]
pub struct TerminalLevel<W> {
    pub graph: WeightedGraph<W>,
    pub vertices: Vec<VertexId>,
    pub b: usize,
    dist: Vec<W>,
}

impl<W: Weight> TerminalLevel<W> {
    pub fn n(&self) -> usize {
        self.vertices.len()
    }

    pub fn distance(&self, u: usize, v: usize) -> W {
        self.dist[u * self.n() + v]
    }
}

/// The tower `H_0 = G, H_1, ..., H_t`.
#[derive(Clone, Debug)]
pub struct LevelStack<W> {
    pub levels: Vec<Level<W>>,
    pub terminal: TerminalLevel<W>,
    pub config: PreprocessConfig,
    pub seed: u64,
}

/// Oracle answer together with the number of levels inspected.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QueryTrace<W> {
    pub distance: W,
    pub levels_visited: usize,
}

impl<W: Weight> LevelStack<W> {
    /// Number of subemulator levels `t`.
    pub fn t(&self) -> usize {
        self.levels.len()
    }

    pub fn k(&self) -> f64 {
        self.config.k
    }

    pub fn n(&self) -> usize {
        self.levels
            .first()
            .map(|l| l.n())
            .unwrap_or_else(|| self.terminal.n())
    }

    /// Ball sizes `b_0 .. b_t`.
    pub fn ball_sizes(&self) -> Vec<usize> {
        self.levels
            .iter()
            .map(|l| l.b)
            .chain(std::iter::once(self.terminal.b))
            .collect()
    }

    /// Edge counts of `H_0 .. H_t`.
    pub fn edge_counts(&self) -> Vec<usize> {
        self.levels
            .iter()
            .map(|l| l.graph.m())
            .chain(std::iter::once(self.terminal.graph.m()))
            .collect()
    }

    /// Approximate distance between two input vertices.
    pub fn query(&self, u: VertexId, v: VertexId) -> W {
        self.query_traced(u, v).distance
    }

    /// Walks up the tower until one vertex lies in the other's ball.
    pub fn query_traced(&self, u: VertexId, v: VertexId) -> QueryTrace<W> {
        let (mut u, mut v) = (u, v);
        let mut acc = W::zero();
        for (i, level) in self.levels.iter().enumerate() {
            let hit = level
                .ball_distance(u, v)
                .or_else(|| level.ball_distance(v, u));
            if let Some(d) = hit {
                return QueryTrace {
                    distance: acc.plus(d),
                    levels_visited: i + 1,
                };
            }
            acc = acc.plus(level.leader_dist[u]).plus(level.leader_dist[v]);
            u = level.leader[u] as usize;
            v = level.leader[v] as usize;
        }
        QueryTrace {
            distance: acc.plus(self.terminal.distance(u, v)),
            levels_visited: self.levels.len() + 1,
        }
    }
}

/// Builds the level tower: repeatedly replace the current graph by a
/// subemulator with growing ball size while it has at least `b_i`
/// vertices, then store all-pairs distances of the last graph.
pub fn preprocess<W: Weight>(
    g: &WeightedGraph<W>,
    config: PreprocessConfig,
    seed: u64,
) -> Result<LevelStack<W>, EmulatorError> {
    let n = g.n();
    let k_max = PreprocessConfig::default_k(n);
    if !(config.k >= 0.5 && config.k <= k_max + 1e-12) {
        return Err(EmulatorError::KOutOfRange {
            k: config.k,
            max: k_max,
        });
    }
    g.ensure_connected()?;

    let mut levels = Vec::new();
    let mut graph = g.clone();
    let mut vertices: Vec<VertexId> = (0..n).collect();
    let mut b = initial_ball_size(n, config.k, config.ball_const);
    while graph.n() >= b {
        let level_seed = seeds::derive(seed, levels.len() as u64);
        let sub = build_subemulator_with(&graph, b, level_seed, config.sample_const)?;
        let ni = graph.n();
        let leader: Vec<u32> = (0..ni).map(|v| sub.leader_local(v) as u32).collect();

        let per_vertex: Vec<Vec<(u32, W)>> = (0..ni)
            .into_par_iter()
            .map(|v| {
                let mut ball: Vec<(u32, W)> = sub.balls.open_ball(v).to_vec();
                let q = sub.leader[v] as u32;
                if !ball.iter().any(|e| e.0 == q) {
                    ball.push((q, sub.dist_to_leader[v]));
                }
                ball.sort_unstable();
                ball
            })
            .collect();
        let mut ball_offsets = Vec::with_capacity(ni + 1);
        ball_offsets.push(0);
        let mut ball = Vec::new();
        for list in per_vertex {
            ball.extend(list);
            ball_offsets.push(ball.len());
        }

        let next_vertices = sub.vertices.iter().map(|&x| vertices[x]).collect();
        levels.push(Level {
            graph: std::mem::replace(&mut graph, sub.graph),
            vertices: std::mem::replace(&mut vertices, next_vertices),
            b,
            leader,
            leader_dist: sub.dist_to_leader,
            ball_offsets,
            ball,
        });
        b = next_ball_size(b);
    }

    let dist = all_pairs(&graph);
    Ok(LevelStack {
        levels,
        terminal: TerminalLevel {
            graph,
            vertices,
            b,
            dist,
        },
        config,
        seed,
    })
}

/// Header written in front of a serialized emulator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmulatorHeader {
    pub k: f64,
    pub t: usize,
    pub hop_bound: usize,
    pub stretch_bound: u128,
    pub seed: u64,
}

/// A graph on the input vertices whose distances dominate the input's,
/// exceed them by at most `stretch_bound`, and are realised by paths with at
/// most `hop_bound` edges.
#[derive(Clone, Debug, PartialEq)]
pub struct Emulator {
    pub graph: WeightedGraph<u128>,
    pub k: f64,
    pub t: usize,
    pub hop_bound: usize,
    pub stretch_bound: u128,
    pub seed: u64,
}

/// `max(16 ceil(log2 k + 1), 4t + 1)`.
pub fn hop_bound(k: f64, t: usize) -> usize {
    (4 * level_bound(k)).max(4 * t + 1)
}

/// `27^max(4 ceil(log2 k + 1), t)`, saturating.
pub fn stretch_bound(k: f64, t: usize) -> u128 {
    let e = level_bound(k).max(t) as u32;
    LEVEL_FACTOR.checked_pow(e).unwrap_or(u128::MAX)
}

/// Reads the emulator off the tower: for each level `i < t`, leader edges
/// `{v, q_i(v)}` weighted `27^(t-i-1) dist_{H_i}` and ball edges weighted
/// `27^(t-i) dist_{H_i}`; the terminal level contributes all its pairs at
/// their exact distances. Duplicate pairs keep the minimum.
pub fn build_emulator<W: Weight>(stack: &LevelStack<W>) -> Emulator {
    let t = stack.t();
    let scale = |exp: usize, d: W| -> u128 {
        let f = LEVEL_FACTOR.checked_pow(exp as u32).unwrap_or(u128::MAX);
        d.as_u128().saturating_mul(f)
    };
    let mut cand: Vec<(usize, usize, u128)> = Vec::new();
    for (i, level) in stack.levels.iter().enumerate() {
        let up = &stack
            .levels
            .get(i + 1)
            .map(|l| &l.vertices)
            .unwrap_or(&stack.terminal.vertices);
        cand.par_extend((0..level.n()).into_par_iter().flat_map_iter(|v| {
            let x = level.vertices[v];
            let leader = (
                x,
                up[level.leader[v] as usize],
                scale(t - i - 1, level.leader_dist[v]),
            );
            std::iter::once(leader).chain(
                level
                    .ball(v)
                    .iter()
                    .map(move |&(u, d)| (x, level.vertices[u as usize], scale(t - i, d))),
            )
        }));
    }
    let term = &stack.terminal;
    cand.par_extend((0..term.n()).into_par_iter().flat_map_iter(|a| {
        (a + 1..term.n()).map(move |c| {
            (
                term.vertices[a],
                term.vertices[c],
                term.distance(a, c).as_u128(),
            )
        })
    }));
    let graph = WeightedGraph::from_edges(stack.n(), cand);
    Emulator {
        graph,
        k: stack.k(),
        t,
        hop_bound: hop_bound(stack.k(), t),
        stretch_bound: stretch_bound(stack.k(), t),
        seed: stack.seed,
    }
}

impl Emulator {
    pub fn n(&self) -> usize {
        self.graph.n()
    }

    /// Distances from a weighted source set using `hop_bound` relaxation
    /// rounds.
    pub fn set_distance(&self, sources: &[(VertexId, u128)]) -> Vec<u128> {
        bellman_ford_hops(&self.graph, sources, self.hop_bound)
    }

    pub fn header(&self) -> EmulatorHeader {
        EmulatorHeader {
            k: self.k,
            t: self.t,
            hop_bound: self.hop_bound,
            stretch_bound: self.stretch_bound,
            seed: self.seed,
        }
    }

    /// Edge-list text preceded by a `#` comment line carrying the JSON
    /// header, so plain edge-list readers still accept it.
    pub fn to_text(&self) -> String {
        let header = serde_json::to_string(&self.header()).expect("header serializes");
        format!("# {header}\n{}", self.graph.to_edge_list())
    }

    pub fn from_text(text: &str) -> Result<Self, EmulatorError> {
        let first = text.lines().next().unwrap_or("");
        let json = first
            .strip_prefix('#')
            .ok_or_else(|| EmulatorError::Header("missing header line".into()))?;
        let header: EmulatorHeader =
            serde_json::from_str(json.trim()).map_err(|e| EmulatorError::Header(e.to_string()))?;
        let graph = parse_edge_list::<u128>(text, None)?;
        Ok(Self {
            graph,
            k: header.k,
            t: header.t,
            hop_bound: header.hop_bound,
            stretch_bound: header.stretch_bound,
            seed: header.seed,
        })
    }
}

//! Turning an approximate `s`–`t` flow into an actual path.
//!
//! Every vertex other than `t` samples one out-pointer along positive
//! flow. The pointer graph splits into a tree hanging off `t` and
//! components with exactly one cycle; contracting each component to a root
//! at least halves the vertex count, and the recursion on the contracted
//! graph yields a path that expands back edge by edge.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::flow::{min_cost_flow_with, Demand, FlowError, FlowSolution, SolverConfig};
use crate::graph::{ceil_log2, GraphError, Path, VertexId, WeightedGraph};
use crate::scalar::Real;
use crate::seeds;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathError {
    #[error("vertex {0} out of range")]
    VertexOutOfRange(VertexId),
    #[error("epsilon = {0} outside (0, 0.5)")]
    EpsilonOutOfRange(f64),
    #[error("vertex {0} receives flow but sends none")]
    StuckVertex(VertexId),
    #[error("flow has {found} entries, graph has {expected} edges")]
    FlowLength { expected: usize, found: usize },
    #[error("demand must be -1 at the sink and non-negative elsewhere")]
    InvalidWalkDemand,
    #[error("walk exceeded {0} steps")]
    WalkBudgetExceeded(usize),
    #[error("no attempt produced a feasible flow")]
    InfeasibleFlow,
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Flow magnitudes at or below this are ignored when sampling.
pub const FLOW_DUST: f64 = 1e-12;
/// Inflow above this at a vertex without outflow is an error.
pub const STUCK_TOLERANCE: f64 = 1e-9;

/// Positive outflow `f(u, v)` on each edge leaving `u`.
fn outflows<F: Real>(g: &WeightedGraph<u64>, f: &[F], u: VertexId) -> Vec<(VertexId, f64)> {
    g.incident(u)
        .filter_map(|(v, e)| {
            let x = f[e].to_f64_lossy();
            let out = if u < v { x } else { -x };
            (out > FLOW_DUST).then_some((v, out))
        })
        .collect()
}

fn inflow<F: Real>(g: &WeightedGraph<u64>, f: &[F], u: VertexId) -> f64 {
    g.incident(u)
        .map(|(v, e)| {
            let x = f[e].to_f64_lossy();
            let into = if u < v { -x } else { x };
            into.max(0.0)
        })
        .sum()
}

fn check_flow<F>(g: &WeightedGraph<u64>, f: &[F]) -> Result<(), PathError> {
    if f.len() != g.m() {
        return Err(PathError::FlowLength {
            expected: g.m(),
            found: f.len(),
        });
    }
    Ok(())
}

/// One out-neighbour per vertex other than `t`, drawn proportionally to
/// positive outflow. Vertices the flow never touches point at their
/// lightest neighbour (smallest id on ties), so every vertex is covered.
pub fn sample_pointers<F: Real>(
    g: &WeightedGraph<u64>,
    f: &[F],
    t: VertexId,
    seed: u64,
) -> Result<Vec<Option<VertexId>>, PathError> {
    check_flow(g, f)?;
    if t >= g.n() {
        return Err(PathError::VertexOutOfRange(t));
    }
    (0..g.n())
        .into_par_iter()
        .map(|u| {
            if u == t {
                return Ok(None);
            }
            let out = outflows(g, f, u);
            if out.is_empty() {
                if inflow(g, f, u) > STUCK_TOLERANCE {
                    return Err(PathError::StuckVertex(u));
                }
                return Ok(g.neighbors(u).min_by_key(|&(v, w)| (w, v)).map(|(v, _)| v));
            }
            let total: f64 = out.iter().map(|o| o.1).sum();
            let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, u as u64));
            let mut r = rng.random::<f64>() * total;
            for &(v, x) in &out {
                if r < x {
                    return Ok(Some(v));
                }
                r -= x;
            }
            Ok(Some(out[out.len() - 1].0))
        })
        .collect()
}

/// One level of the sample-and-contract recursion.
#[derive(Clone, Debug, PartialEq)]
pub struct ContractionLevel {
    /// Sampled pointer `p(u)`; `None` only at `t`.
    pub pointer: Vec<Option<VertexId>>,
    /// Root `rt(u)` of the component of `u`.
    pub root: Vec<VertexId>,
    /// `l(u)`: length of the pointer path from `u` to its root.
    pub depth: Vec<u64>,
    /// Contracted graph on the roots, in root-id order.
    pub graph: WeightedGraph<u64>,
    /// Contracted vertex to its root.
    pub roots: Vec<VertexId>,
    /// Original vertex to the contracted vertex of its root.
    pub contracted: Vec<VertexId>,
    /// Contracted edge to the original edge attaining its weight.
    pub witness: Vec<usize>,
}

impl ContractionLevel {
    /// `u, p(u), ..., rt(u)`.
    pub fn tree_path(&self, u: VertexId) -> Vec<VertexId> {
        let mut walk = vec![u];
        let mut x = u;
        while x != self.root[x] {
            x = self.pointer[x].expect("non-root vertices have pointers");
            walk.push(x);
        }
        walk
    }

    /// Walk in the original graph from root `roots[a]` to root `roots[b]`
    /// realising the contracted edge between `a` and `b`.
    pub fn expand_edge(&self, g: &WeightedGraph<u64>, a: VertexId, b: VertexId) -> Vec<VertexId> {
        let ce = self.graph.edge_index(a, b).expect("contracted edge exists");
        let e = g.edge(self.witness[ce]);
        let (x, y) = if self.contracted[e.u] == a {
            (e.u, e.v)
        } else {
            (e.v, e.u)
        };
        let mut walk = self.tree_path(x);
        walk.reverse();
        walk.extend(self.tree_path(y));
        walk
    }
}

/// Contracts every component of the pointer graph to its root.
///
/// The component of `t` is a tree rooted at `t`. Every other component
/// holds exactly one cycle; its root is the smallest id on that cycle, and
/// the pointer leaving the root is the edge left out of the spanning tree.
pub fn contract(
    g: &WeightedGraph<u64>,
    pointer: &[Option<VertexId>],
    t: VertexId,
) -> ContractionLevel {
    let n = g.n();
    assert_eq!(pointer.len(), n);
    const UNSEEN: u8 = 0;
    const ACTIVE: u8 = 1;
    const DONE: u8 = 2;
    let mut state = vec![UNSEEN; n];
    let mut root = vec![usize::MAX; n];
    state[t] = DONE;
    root[t] = t;
    for start in 0..n {
        if state[start] != UNSEEN {
            continue;
        }
        let mut trail = Vec::new();
        let mut x = start;
        while state[x] == UNSEEN {
            state[x] = ACTIVE;
            trail.push(x);
            x = pointer[x].expect("every vertex but t has a pointer");
        }
        let r = if state[x] == ACTIVE {
            // x closes a new cycle on the trail
            let from = trail.iter().position(|&y| y == x).expect("cycle on trail");
            let r = *trail[from..].iter().min().expect("non-empty cycle");
            for &y in &trail[from..] {
                root[y] = r;
            }
            r
        } else {
            root[x]
        };
        for &y in &trail {
            if root[y] == usize::MAX {
                root[y] = r;
            }
            state[y] = DONE;
        }
    }

    let mut depth = vec![u64::MAX; n];
    for u in 0..n {
        let mut trail = Vec::new();
        let mut x = u;
        while depth[x] == u64::MAX && x != root[x] {
            trail.push(x);
            x = pointer[x].expect("non-root vertices have pointers");
        }
        if x == root[x] {
            depth[x] = 0;
        }
        let mut d = depth[x];
        for &y in trail.iter().rev() {
            let p = pointer[y].expect("non-root vertices have pointers");
            d += g.weight(y, p).expect("pointer follows an edge");
            depth[y] = d;
        }
    }

    let mut roots: Vec<VertexId> = (0..n).filter(|&v| root[v] == v).collect();
    roots.sort_unstable();
    let mut index = vec![usize::MAX; n];
    for (i, &r) in roots.iter().enumerate() {
        index[r] = i;
    }
    let contracted: Vec<VertexId> = (0..n).map(|v| index[root[v]]).collect();

    // best (weight, original edge) per contracted pair
    let mut best: Vec<((usize, usize), (u64, usize))> = g
        .edges()
        .iter()
        .enumerate()
        .filter_map(|(i, e)| {
            let (a, b) = (contracted[e.u], contracted[e.v]);
            (a != b).then(|| ((a.min(b), a.max(b)), (depth[e.u] + e.w + depth[e.v], i)))
        })
        .collect();
    best.sort_unstable();
    best.dedup_by(|later, kept| later.0 == kept.0);
    let graph = WeightedGraph::from_edges(
        roots.len(),
        best.iter().map(|&((a, b), (w, _))| (a, b, w)),
    );
    let witness = best.iter().map(|&(_, (_, i))| i).collect();

    ContractionLevel {
        pointer: pointer.to_vec(),
        root,
        depth,
        graph,
        roots,
        contracted,
        witness,
    }
}

/// Drops every cycle of a walk: from each kept vertex, jump to just after
/// its last appearance.
pub fn shortcut_cycles(walk: &[VertexId]) -> Vec<VertexId> {
    let mut last = std::collections::HashMap::with_capacity(walk.len());
    for (i, &v) in walk.iter().enumerate() {
        last.insert(v, i);
    }
    let mut out = Vec::new();
    let mut i = 0;
    while i < walk.len() {
        let v = walk[i];
        out.push(v);
        i = last[&v] + 1;
    }
    out
}

/// Settings for path extraction.
#[derive(Clone, Debug, PartialEq)]
pub struct PathConfig {
    /// Trials are `trial_const * ceil(log2 n / ε)`.
    pub trial_const: f64,
    /// Flow solver settings; the accuracy is set per call.
    pub solver: SolverConfig,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self {
            trial_const: 4.0,
            solver: SolverConfig::new(0.1),
        }
    }
}

impl PathConfig {
    pub fn trials(&self, n: usize, epsilon: f64) -> usize {
        let base = (ceil_log2(n).max(1) as f64 / epsilon).ceil();
        ((self.trial_const * base).ceil() as usize).max(1)
    }

    /// `ε / (20 log2 n)`.
    pub fn inner_epsilon(n: usize, epsilon: f64) -> f64 {
        epsilon / (20.0 * (n.max(2) as f64).log2())
    }
}

fn validate(g: &WeightedGraph<u64>, s: VertexId, t: VertexId, epsilon: f64) -> Result<(), PathError> {
    for v in [s, t] {
        if v >= g.n() {
            return Err(PathError::VertexOutOfRange(v));
        }
    }
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(PathError::EpsilonOutOfRange(epsilon));
    }
    Ok(())
}

/// Unit `s`–`t` flow, re-solved with fresh seeds until its residual is
/// negligible (at most `3 ceil(log2 n)` attempts).
pub fn st_flow(
    g: &WeightedGraph<u64>,
    s: VertexId,
    t: VertexId,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<FlowSolution<f64>, PathError> {
    let demand = Demand::unit(g.n(), s, t);
    let attempts = 3 * ceil_log2(g.n()).max(1);
    for attempt in 0..attempts {
        let sol = min_cost_flow_with(g, &demand, cfg, seeds::derive(seed, attempt as u64))?;
        if sol.residual <= STUCK_TOLERANCE {
            return Ok(sol);
        }
    }
    Err(PathError::InfeasibleFlow)
}

/// A simple `s`–`t` path whose expected length is within
/// `(1+2ε)^{ceil(log2 n)}` of the distance.
pub fn find_path(
    g: &WeightedGraph<u64>,
    s: VertexId,
    t: VertexId,
    epsilon: f64,
    seed: u64,
) -> Result<Path, PathError> {
    find_path_with(g, s, t, epsilon, seed, &SolverConfig::new(epsilon))
}

/// [`find_path`] with explicit solver settings.
pub fn find_path_with(
    g: &WeightedGraph<u64>,
    s: VertexId,
    t: VertexId,
    epsilon: f64,
    seed: u64,
    solver: &SolverConfig,
) -> Result<Path, PathError> {
    validate(g, s, t, epsilon)?;
    let cfg = SolverConfig {
        epsilon,
        ..solver.clone()
    };
    let walk = extract(g, s, t, &cfg, seed, None, &FlowCache::new(seed))?;
    Ok(Path::new(g, shortcut_cycles(&walk))?)
}

/// Unit flows of one extraction run, keyed by instance. Each flow is
/// seeded from its instance alone, so a hit returns exactly what a fresh
/// solve would, whichever trial asks first.
struct FlowCache {
    seed: u64,
    flows: Mutex<HashMap<Vec<u64>, Arc<FlowSolution<f64>>>>,
}

impl FlowCache {
    fn new(seed: u64) -> Self {
        Self {
            seed,
            flows: Mutex::new(HashMap::new()),
        }
    }

    fn get(
        &self,
        g: &WeightedGraph<u64>,
        s: VertexId,
        t: VertexId,
        cfg: &SolverConfig,
    ) -> Result<Arc<FlowSolution<f64>>, PathError> {
        let mut key = Vec::with_capacity(3 + 3 * g.m());
        key.extend([g.n() as u64, s as u64, t as u64]);
        for e in g.edges() {
            key.extend([e.u as u64, e.v as u64, e.w]);
        }
        if let Some(f) = self.flows.lock().expect("cache lock").get(&key) {
            return Ok(f.clone());
        }
        // FNV-1a over the key keeps the seed independent of the platform
        let digest = key.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &x| {
            (h ^ x).wrapping_mul(0x0000_0100_0000_01b3)
        });
        let flow = Arc::new(st_flow(g, s, t, cfg, seeds::derive(self.seed, digest))?);
        self.flows
            .lock()
            .expect("cache lock")
            .insert(key, flow.clone());
        Ok(flow)
    }
}

/// One recursive extraction; `flow` replaces the top-level solve.
fn extract(
    g: &WeightedGraph<u64>,
    s: VertexId,
    t: VertexId,
    cfg: &SolverConfig,
    seed: u64,
    flow: Option<&FlowSolution<f64>>,
    cache: &FlowCache,
) -> Result<Vec<VertexId>, PathError> {
    if s == t {
        return Ok(vec![s]);
    }
    let solved;
    let f = match flow {
        Some(f) => f,
        None => {
            solved = cache.get(g, s, t, cfg)?;
            &solved
        }
    };
    let pointer = sample_pointers(g, &f.f, t, seeds::derive(seed, 1))?;
    let level = contract(g, &pointer, t);
    let (cs, ct) = (level.contracted[s], level.contracted[t]);
    let sub = extract(&level.graph, cs, ct, cfg, seeds::derive(seed, 2), None, cache)?;
    let mut walk = level.tree_path(s);
    for pair in sub.windows(2) {
        let piece = level.expand_edge(g, pair[0], pair[1]);
        walk.extend_from_slice(&piece[1..]);
    }
    Ok(walk)
}

/// Shortest of [`PathConfig::trials`] extractions, each with inner
/// accuracy `ε / (20 log2 n)`. Trials differ in their pointer samples;
/// flows of repeated subproblems, the top level included, are solved once.
pub fn approx_shortest_path(
    g: &WeightedGraph<u64>,
    s: VertexId,
    t: VertexId,
    epsilon: f64,
    seed: u64,
) -> Result<Path, PathError> {
    approx_shortest_path_with(g, s, t, epsilon, seed, &PathConfig::default())
}

/// [`approx_shortest_path`] with explicit settings.
pub fn approx_shortest_path_with(
    g: &WeightedGraph<u64>,
    s: VertexId,
    t: VertexId,
    epsilon: f64,
    seed: u64,
    config: &PathConfig,
) -> Result<Path, PathError> {
    validate(g, s, t, epsilon)?;
    if s == t {
        return Ok(Path::new(g, vec![s])?);
    }
    let cfg = SolverConfig {
        epsilon: PathConfig::inner_epsilon(g.n(), epsilon),
        ..config.solver.clone()
    };
    let cache = FlowCache::new(seed);
    let top = cache.get(g, s, t, &cfg)?;
    let trials = config.trials(g.n(), epsilon);
    let paths: Vec<Path> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let trial_seed = seeds::derive(seed, i as u64);
            let walk = extract(g, s, t, &cfg, trial_seed, Some(&top), &cache)?;
            Ok(Path::new(g, shortcut_cycles(&walk))?)
        })
        .collect::<Result<_, PathError>>()?;
    Ok(paths
        .into_iter()
        .min_by_key(|p| p.length)
        .expect("at least one trial"))
}

/// Summary of simulated flow walks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WalkStats {
    pub trials: usize,
    pub mean: f64,
    pub std_error: f64,
    /// `‖Wf‖₁`, the expected walk length.
    pub flow_cost: f64,
}

/// Simulates walks that start at `v` with probability `b_v`, step along
/// positive flow proportionally to it, and stop at the sink.
pub fn random_walk_length_check<F: Real>(
    g: &WeightedGraph<u64>,
    f: &[F],
    demand: &[F],
    trials: usize,
    max_steps: usize,
    seed: u64,
) -> Result<WalkStats, PathError> {
    check_flow(g, f)?;
    let b: Vec<f64> = demand.iter().map(|x| x.to_f64_lossy()).collect();
    let sinks: Vec<usize> = (0..b.len()).filter(|&v| b[v] < 0.0).collect();
    if b.len() != g.n() || sinks.len() != 1 || (b[sinks[0]] + 1.0).abs() > 1e-9 {
        return Err(PathError::InvalidWalkDemand);
    }
    let t = sinks[0];
    let sources: Vec<(VertexId, f64)> = (0..g.n()).filter(|&v| b[v] > 0.0).map(|v| (v, b[v])).collect();
    let out: Vec<Vec<(VertexId, f64)>> = (0..g.n()).map(|u| outflows(g, f, u)).collect();
    let pick = |rng: &mut ChaCha8Rng, options: &[(VertexId, f64)]| {
        let total: f64 = options.iter().map(|o| o.1).sum();
        let mut r = rng.random::<f64>() * total;
        for &(v, x) in options {
            if r < x {
                return v;
            }
            r -= x;
        }
        options[options.len() - 1].0
    };
    const CHUNK: usize = 1024;
    let lengths: Vec<f64> = (0..trials.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, c as u64));
            let count = CHUNK.min(trials - c * CHUNK);
            let mut lens = Vec::with_capacity(count);
            for _ in 0..count {
                let mut u = pick(&mut rng, &sources);
                let mut len = 0u64;
                let mut steps = 0;
                while u != t {
                    if out[u].is_empty() {
                        return Err(PathError::StuckVertex(u));
                    }
                    steps += 1;
                    if steps > max_steps {
                        return Err(PathError::WalkBudgetExceeded(max_steps));
                    }
                    let v = pick(&mut rng, &out[u]);
                    len += g.weight(u, v).expect("walk follows edges");
                    u = v;
                }
                lens.push(len as f64);
            }
            Ok(lens)
        })
        .collect::<Result<Vec<_>, PathError>>()?
        .concat();
    let k = lengths.len().max(1) as f64;
    let mean = lengths.iter().sum::<f64>() / k;
    let var = lengths.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
    Ok(WalkStats {
        trials,
        mean,
        std_error: (var / k).sqrt(),
        flow_cost: crate::flow::flow_cost(g, f).to_f64_lossy(),
    })
}

//! Strong subemulators: a graph on a sampled vertex subset whose distances
//! approximate the input graph's within a factor of 8, plus a leader map
//! routing every vertex to a nearby sampled vertex.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::graph::{compute_balls, BallData, VertexId, WeightedGraph};
use crate::scalar::Weight;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SubemulatorError {
    #[error("ball size {b} out of range for n = {n}")]
    BallSizeOutOfRange { b: usize, n: usize },
    #[error("vertex {vertex} has no selected vertex within its ball")]
    PreconditionViolated { vertex: VertexId },
}

/// Stretch factor between subemulator and input distances on `V'`.
pub const SUBEMULATOR_STRETCH: u64 = 8;
/// Slack factor on `dist(u, v)` in the leader-distance guarantee.
pub const LEADER_SLACK: u64 = 22;
/// Default constant `c` in the sampling rate `min(c ln n / b, 1/2)`.
pub const DEFAULT_SAMPLE_CONST: f64 = 50.0;

/// Which candidate edge families `connect_edges_with` emits. Both are
/// needed for the distance guarantees; switching one off exists to
/// demonstrate that.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdgeFamilies {
    /// Images `{q(u), q(v)}` of input edges.
    pub edges: bool,
    /// Images `{q(u), q(v)}` of open-ball memberships `u in B°(v)`.
    pub balls: bool,
}

impl Default for EdgeFamilies {
    fn default() -> Self {
        Self {
            edges: true,
            balls: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SubemulatorResult<W> {
    /// The subemulator on local ids `0..|V'|`.
    pub graph: WeightedGraph<W>,
    /// Local id to input vertex, increasing.
    pub vertices: Vec<VertexId>,
    /// Leader `q(v)` of every input vertex, as an input vertex id.
    pub leader: Vec<VertexId>,
    /// `dist_G(v, q(v))`.
    pub dist_to_leader: Vec<W>,
    pub balls: BallData<W>,
    pub seed: u64,
}

impl<W: Weight> SubemulatorResult<W> {
    /// Local id of an input vertex that belongs to `V'`.
    pub fn local(&self, v: VertexId) -> Option<usize> {
        self.vertices.binary_search(&v).ok()
    }

    /// Local id of `q(v)`.
    pub fn leader_local(&self, v: VertexId) -> usize {
        self.local(self.leader[v]).expect("leaders belong to V'")
    }
}

/// Probability with which each vertex joins the random sample.
pub fn sample_rate(n: usize, b: usize, sample_const: f64) -> f64 {
    if n <= 1 {
        return 0.5;
    }
    (sample_const * (n as f64).ln() / b as f64).min(0.5)
}

/// Samples `S` at [`sample_rate`] and returns `V' = S ∪ {v : B_b(v) ∩ S = ∅}`
/// as a membership mask.
pub fn sample_vertices<W: Weight>(
    balls: &BallData<W>,
    seed: u64,
    sample_const: f64,
) -> Vec<bool> {
    let n = balls.n();
    let p = sample_rate(n, balls.b(), sample_const);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let in_s: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < p).collect();
    (0..n)
        .into_par_iter()
        .map(|v| in_s[v] || balls.nearest(v).iter().all(|&(u, _)| !in_s[u as usize]))
        .collect()
}

/// Builds the subemulator edges and leader map for a selected subset.
pub fn connect_edges<W: Weight>(
    g: &WeightedGraph<W>,
    selected: &[bool],
    balls: &BallData<W>,
) -> Result<SubemulatorResult<W>, SubemulatorError> {
    connect_edges_with(g, selected, balls, EdgeFamilies::default())
}

/// [`connect_edges`] with a choice of candidate edge families.
pub fn connect_edges_with<W: Weight>(
    g: &WeightedGraph<W>,
    selected: &[bool],
    balls: &BallData<W>,
    families: EdgeFamilies,
) -> Result<SubemulatorResult<W>, SubemulatorError> {
    let n = g.n();
    assert_eq!(selected.len(), n);

    // nearest selected member of each ball; lists are in (distance, id) order
    let leaders: Vec<Option<(VertexId, W)>> = (0..n)
        .into_par_iter()
        .map(|v| {
            balls
                .nearest(v)
                .iter()
                .find(|&&(u, _)| selected[u as usize])
                .map(|&(u, d)| (u as VertexId, d))
        })
        .collect();
    if let Some(vertex) = leaders.iter().position(Option::is_none) {
        return Err(SubemulatorError::PreconditionViolated { vertex });
    }
    let (leader, dist_to_leader): (Vec<VertexId>, Vec<W>) =
        leaders.into_iter().map(Option::unwrap).unzip();

    let vertices: Vec<VertexId> = (0..n).filter(|&v| selected[v]).collect();
    let mut local = vec![usize::MAX; n];
    for (i, &v) in vertices.iter().enumerate() {
        local[v] = i;
    }

    let mut cand: Vec<(usize, usize, W)> = Vec::new();
    if families.edges {
        cand.par_extend(g.edges().par_iter().filter_map(|e| {
            let (a, b) = (leader[e.u], leader[e.v]);
            (a != b).then(|| {
                let w = dist_to_leader[e.u].plus(e.w).plus(dist_to_leader[e.v]);
                (local[a], local[b], w)
            })
        }));
    }
    if families.balls {
        cand.par_extend((0..n).into_par_iter().flat_map_iter(|v| {
            let qv = leader[v];
            let dv = dist_to_leader[v];
            let (leader, dist_to_leader, local) = (&leader, &dist_to_leader, &local);
            balls.open_ball(v).iter().filter_map(move |&(u, duv)| {
                let u = u as usize;
                let qu = leader[u];
                (qu != qv).then(|| {
                    let w = dist_to_leader[u].plus(duv).plus(dv);
                    (local[qu], local[qv], w)
                })
            })
        }));
    }
    let graph = WeightedGraph::from_edges(vertices.len(), cand);

    Ok(SubemulatorResult {
        graph,
        vertices,
        leader,
        dist_to_leader,
        balls: balls.clone(),
        seed: 0,
    })
}

/// Samples `V'` and connects it.
pub fn build_subemulator<W: Weight>(
    g: &WeightedGraph<W>,
    b: usize,
    seed: u64,
) -> Result<SubemulatorResult<W>, SubemulatorError> {
    build_subemulator_with(g, b, seed, DEFAULT_SAMPLE_CONST)
}

/// [`build_subemulator`] with an explicit sampling constant.
pub fn build_subemulator_with<W: Weight>(
    g: &WeightedGraph<W>,
    b: usize,
    seed: u64,
    sample_const: f64,
) -> Result<SubemulatorResult<W>, SubemulatorError> {
    let n = g.n();
    if b == 0 || b > n {
        return Err(SubemulatorError::BallSizeOutOfRange { b, n });
    }
    let balls = compute_balls(g, b);
    let selected = sample_vertices(&balls, seed, sample_const);
    let mut result = connect_edges(g, &selected, &balls)?;
    result.seed = seed;
    Ok(result)
}

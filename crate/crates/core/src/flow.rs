//! Uncapacitated minimum-cost flow (transshipment).
//!
//! The solver searches for the smallest scale `s` at which a
//! multiplicative-weights loop finds a unit-ℓ₁ edge vector whose
//! preconditioned image matches the preconditioned demand, composes the
//! resulting approximate solver with itself on the leftover demand, and
//! finally routes what is left along a minimum spanning tree.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::emulator::{build_emulator, preprocess, EmulatorError, PreprocessConfig};
use crate::graph::{
    all_pairs, ceil_log2, contract_zero_edges, dijkstra, VertexId, WeightedGraph,
};
use crate::metric::{bourgain_embed, Embedding, MetricError};
use crate::precond::{
    build_preconditioner, cv_norm1, matrix_vec, CompressedMatrix, PrecondError, SweepPlan,
};
use crate::scalar::{kahan_sum, Real};
use crate::seeds;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("demand has {found} entries, graph has {expected} vertices")]
    DemandLength { expected: usize, found: usize },
    #[error("demand entries sum to {0}, not zero")]
    Unbalanced(f64),
    #[error("demand contains a non-finite entry at vertex {0}")]
    NonFinite(VertexId),
    #[error("epsilon = {0} outside (0, 0.5)")]
    EpsilonOutOfRange(f64),
    #[error(
        "no scale up to kappa = {kappa} was feasible; kappa is probably an underestimate"
    )]
    AllScalesFailed { kappa: f64 },
    #[error("iteration budget exhausted at the largest scale {scale} after {iterations} iterations")]
    BudgetExhausted { scale: f64, iterations: u64 },
    #[error(transparent)]
    Emulator(#[from] EmulatorError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Precond(#[from] PrecondError),
}

/// Tolerance on `Σ b_v`.
pub const BALANCE_TOLERANCE: f64 = 1e-9;

/// Vertex demands: positive entries are supplies, negative entries sinks.
#[derive(Clone, Debug, PartialEq)]
pub struct Demand<F> {
    values: Vec<F>,
}

impl<F: Real> Demand<F> {
    pub fn new(values: Vec<F>) -> Result<Self, FlowError> {
        if let Some(v) = values.iter().position(|x| !x.is_finite()) {
            return Err(FlowError::NonFinite(v));
        }
        let sum = kahan_sum(values.iter().copied()).to_f64_lossy();
        let scale = values.iter().map(|x| x.abs().to_f64_lossy()).fold(1.0, f64::max);
        if sum.abs() > BALANCE_TOLERANCE * scale {
            return Err(FlowError::Unbalanced(sum));
        }
        Ok(Self { values })
    }

    /// One unit from `s` to `t`.
    pub fn unit(n: usize, s: VertexId, t: VertexId) -> Self {
        let mut values = vec![F::zero(); n];
        if s != t {
            values[s] = F::one();
            values[t] = -F::one();
        }
        Self { values }
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|x| *x == F::zero())
    }

    fn check_len(&self, n: usize) -> Result<(), FlowError> {
        if self.values.len() != n {
            return Err(FlowError::DemandLength {
                expected: n,
                found: self.values.len(),
            });
        }
        Ok(())
    }
}

/// Result of one multiplicative-weights run at a fixed scale.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeOutcome {
    Feasible,
    Infeasible,
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScaleProbe {
    pub round: usize,
    pub scale: f64,
    pub outcome: ProbeOutcome,
    pub iterations: u64,
}

/// A flow with its diagnostics. `f[e]` is positive when it moves from the
/// smaller to the larger endpoint of edge `e`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowSolution<F> {
    pub f: Vec<F>,
    /// `Σ w_e |f_e|`.
    pub cost: F,
    /// `‖Af - b‖₁`.
    pub residual: F,
    /// Total multiplicative-weights iterations.
    pub iterations: u64,
    pub trace: Vec<ScaleProbe>,
    /// Preconditioned leftover demand after each composition round.
    pub residual_trace: Vec<f64>,
}

impl<F: Real> FlowSolution<F> {
    /// Wraps a flow, recomputing cost and residual.
    pub fn evaluate(g: &WeightedGraph<u64>, b: &Demand<F>, f: Vec<F>) -> Self {
        let cost = flow_cost(g, &f);
        let residual = residual_norm(g, b.values(), &f);
        Self {
            f,
            cost,
            residual,
            iterations: 0,
            trace: Vec::new(),
            residual_trace: Vec::new(),
        }
    }
}

/// `Σ w_e |f_e|`.
pub fn flow_cost<F: Real>(g: &WeightedGraph<u64>, f: &[F]) -> F {
    kahan_sum(
        g.edges()
            .iter()
            .zip(f)
            .map(|(e, &x)| F::of(e.w as f64) * x.abs()),
    )
}

/// Net outflow `Af` of every vertex.
pub fn net_outflow<F: Real>(g: &WeightedGraph<u64>, f: &[F]) -> Vec<F> {
    let mut out = vec![F::zero(); g.n()];
    for (e, &x) in g.edges().iter().zip(f) {
        out[e.u] = out[e.u] + x;
        out[e.v] = out[e.v] - x;
    }
    out
}

/// `‖Af - b‖₁`.
pub fn residual_norm<F: Real>(g: &WeightedGraph<u64>, b: &[F], f: &[F]) -> F {
    kahan_sum(
        net_outflow(g, f)
            .iter()
            .zip(b)
            .map(|(&a, &bv)| (a - bv).abs()),
    )
}

/// Routes `b` along the forest `tree` (edge indices of `g`) by subtree
/// sums; exact whenever `b` sums to zero on every tree component.
pub fn tree_route<F: Real>(g: &WeightedGraph<u64>, tree: &[usize], b: &[F]) -> Vec<F> {
    let n = g.n();
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for &e in tree {
        let edge = g.edge(e);
        adj[edge.u].push((edge.v, e));
        adj[edge.v].push((edge.u, e));
    }
    let mut parent_edge = vec![usize::MAX; n];
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let start = order.len();
        order.push(root);
        let mut head = start;
        while head < order.len() {
            let v = order[head];
            head += 1;
            for &(u, e) in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    parent_edge[u] = e;
                    order.push(u);
                }
            }
        }
    }
    let mut subtree: Vec<F> = b.to_vec();
    let mut f = vec![F::zero(); g.m()];
    for &v in order.iter().rev() {
        let e = parent_edge[v];
        if e == usize::MAX {
            continue;
        }
        let edge = g.edge(e);
        let parent = if edge.u == v { edge.v } else { edge.u };
        // the subtree of v exports its net supply to the parent
        f[e] = if edge.u == v { subtree[v] } else { -subtree[v] };
        subtree[parent] = subtree[parent] + subtree[v];
    }
    f
}

/// Edge indices of a minimum spanning forest (Kruskal, ties by index).
pub fn minimum_spanning_forest(g: &WeightedGraph<u64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..g.m()).collect();
    order.sort_by_key(|&e| (g.edge(e).w, e));
    let mut parent: Vec<usize> = (0..g.n()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut tree = Vec::with_capacity(g.n().saturating_sub(1));
    for e in order {
        let edge = g.edge(e);
        let (a, b) = (find(&mut parent, edge.u), find(&mut parent, edge.v));
        if a != b {
            parent[a] = b;
            tree.push(e);
        }
    }
    tree
}

/// Exactly feasible flow supported on a minimum spanning tree; its cost is
/// at most `n` times optimal.
pub fn mst_routing<F: Real>(g: &WeightedGraph<u64>, b: &Demand<F>) -> FlowSolution<F> {
    let tree = minimum_spanning_forest(g);
    let f = tree_route(g, &tree, b.values());
    FlowSolution::evaluate(g, b, f)
}

/// Solver parameters. `None` fields take their defaults from the instance.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Target relative accuracy, in `(0, 0.5)`.
    pub epsilon: f64,
    /// Condition-number bound; defaults to the preconditioner certificate.
    /// Caps the scale search.
    pub kappa: Option<f64>,
    /// The `κ` entering the success tolerance `ε / 2κ`, the step size and
    /// the iteration count; defaults to `kappa`.
    pub tolerance_kappa: Option<f64>,
    /// Cap on the distortion entering the certificate, as a multiple of
    /// `log2 n`.
    pub distortion_clamp: f64,
    /// Cap on iterations per multiplicative-weights run.
    pub max_iterations: Option<u64>,
    /// Step size; defaults to `ε / 8κ`.
    pub eta: Option<f64>,
    /// Composition rounds; defaults to `1 + ceil(log2 n)`.
    pub rounds: Option<usize>,
    /// Embedding repetitions per scale; defaults to `4 ceil(log2 n)`.
    pub t_rep: Option<usize>,
    /// Emulator parameter; defaults to `0.5 log2 n`.
    pub k: Option<f64>,
    /// Lower bound on the inner accuracy `ε/5`; finer tolerances cannot be
    /// met within a capped iteration budget anyway.
    pub resolution_floor: f64,
}

/// Tolerance `κ` of [`SolverConfig::new`].
pub const PRACTICAL_TOLERANCE_KAPPA: f64 = 8.0;
/// Inner accuracy floor of [`SolverConfig::new`].
pub const PRACTICAL_RESOLUTION_FLOOR: f64 = 0.02;
/// Iteration cap of [`SolverConfig::new`].
pub const PRACTICAL_ITERATION_CAP: u64 = 250_000;

impl SolverConfig {
    /// Settings that finish at desk scale: a fixed tolerance `κ`, capped
    /// iterations and a one-repetition embedding. The scale search still
    /// spans the full certificate.
    pub fn new(epsilon: f64) -> Self {
        Self {
            tolerance_kappa: Some(PRACTICAL_TOLERANCE_KAPPA),
            max_iterations: Some(PRACTICAL_ITERATION_CAP),
            t_rep: Some(1),
            resolution_floor: PRACTICAL_RESOLUTION_FLOOR,
            ..Self::theoretical(epsilon)
        }
    }

    /// Every parameter from its worst-case formula. Iteration counts grow
    /// with the square of the certificate, which is large even for small
    /// graphs.
    pub fn theoretical(epsilon: f64) -> Self {
        Self {
            epsilon,
            kappa: None,
            tolerance_kappa: None,
            distortion_clamp: 64.0,
            max_iterations: None,
            eta: None,
            rounds: None,
            t_rep: None,
            k: None,
            resolution_floor: 0.0,
        }
    }
}

/// Preconditioner plus the certificate quantities derived from it.
#[derive(Clone, Debug)]
pub struct Preconditioner<F> {
    pub matrix: CompressedMatrix<F>,
    pub plan: SweepPlan<F>,
    pub embedding: Embedding,
    /// Smallest and largest `‖φ(u) - φ(v)‖₁ / dist(u, v)` over the pairs
    /// checked.
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// `2 L d α` with `α` the (clamped) distortion.
    pub certificate: f64,
}

impl<F: Real> Preconditioner<F> {
    /// Embeds the graph through its emulator and builds the grid matrix.
    pub fn build(
        g: &WeightedGraph<u64>,
        cfg: &SolverConfig,
        seed: u64,
    ) -> Result<Self, FlowError> {
        let n = g.n();
        let k = cfg.k.unwrap_or_else(|| PreprocessConfig::default_k(n));
        let stack = preprocess(g, PreprocessConfig::new(k), seeds::derive(seed, 0))?;
        let em = build_emulator(&stack);
        let t_rep = cfg.t_rep.unwrap_or_else(|| crate::metric::default_t_rep(n));
        let mut emb = bourgain_embed(&em, t_rep, seeds::derive(seed, 1))?;
        separate_duplicates(&em, &mut emb);
        let matrix = build_preconditioner::<F>(&emb)?;
        let plan = SweepPlan::new(&matrix);
        let (min_ratio, max_ratio) = ratio_range(g, &emb);
        let grid = matrix.grid().expect("grid metadata");
        let clamp = cfg.distortion_clamp * (n.max(2) as f64).log2();
        let alpha = (max_ratio / min_ratio).min(clamp).max(1.0);
        let certificate = 2.0 * grid.levels as f64 * grid.dim as f64 * alpha;
        Ok(Self {
            matrix,
            plan,
            embedding: emb,
            min_ratio,
            max_ratio,
            certificate,
        })
    }

    /// `‖Pb‖₁`, rescaled so it never underestimates the optimal cost.
    pub fn cost_estimate(&self, b: &[F]) -> f64 {
        let vals = self.plan.apply(b);
        self.plan.norm1(&vals).to_f64_lossy() / self.min_ratio
    }
}

/// Gives vertices that share a point an extra coordinate: their emulator
/// distance to one member, which keeps the embedding injective.
fn separate_duplicates(em: &crate::emulator::Emulator, emb: &mut Embedding) {
    let mut order: Vec<usize> = (0..emb.n).collect();
    order.sort_by(|&a, &b| emb.row(a).cmp(emb.row(b)).then(a.cmp(&b)));
    let mut anchors = Vec::new();
    for w in order.windows(2) {
        if emb.row(w[0]) == emb.row(w[1]) {
            anchors.push(w[0]);
        }
    }
    anchors.dedup();
    if anchors.is_empty() {
        return;
    }
    let extra: Vec<Vec<u128>> = anchors
        .par_iter()
        .map(|&a| em.set_distance(&[(a, 0)]))
        .collect();
    let rows: Vec<Vec<u64>> = (0..emb.n)
        .map(|v| {
            let mut r = emb.row(v).to_vec();
            r.extend(extra.iter().map(|col| col[v].min(u64::MAX as u128) as u64));
            r
        })
        .collect();
    *emb = Embedding::from_rows(rows);
    separate_duplicates(em, emb);
}

/// Extreme ratios `‖φ(u) - φ(v)‖₁ / dist(u, v)` over all pairs (or over
/// 64 sampled sources on large graphs).
fn ratio_range(g: &WeightedGraph<u64>, emb: &Embedding) -> (f64, f64) {
    let n = g.n();
    let sources: Vec<usize> = if n <= 1024 {
        (0..n).collect()
    } else {
        (0..64).map(|i| i * n / 64).collect()
    };
    let per_source: Vec<(f64, f64)> = sources
        .par_iter()
        .map(|&s| {
            let dist = dijkstra(g, s);
            let mut lo = f64::INFINITY;
            let mut hi: f64 = 0.0;
            for v in 0..n {
                if v == s || dist[v] == 0 {
                    continue;
                }
                let r = emb.l1(s, v) as f64 / dist[v] as f64;
                lo = lo.min(r);
                hi = hi.max(r);
            }
            (lo, hi)
        })
        .collect();
    let lo = per_source.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = per_source.iter().map(|p| p.1).fold(0.0, f64::max);
    if lo.is_finite() {
        (lo, hi)
    } else {
        (1.0, 1.0)
    }
}

/// The operator `P A W⁻¹` of one instance, normalised by its `1→1` norm.
#[derive(Clone, Debug)]
pub struct FlowOperator<'a, F> {
    pub graph: &'a WeightedGraph<u64>,
    pub precond: &'a Preconditioner<F>,
    weights: Vec<F>,
    /// `‖P A W⁻¹‖₁→₁`.
    pub norm: F,
    tree: Vec<usize>,
}

impl<'a, F: Real> FlowOperator<'a, F> {
    /// The graph must have positive weights.
    pub fn new(graph: &'a WeightedGraph<u64>, precond: &'a Preconditioner<F>) -> Self {
        let weights: Vec<F> = graph.edges().iter().map(|e| F::of(e.w as f64)).collect();
        let p = &precond.matrix;
        let norm = graph
            .edges()
            .par_iter()
            .zip(weights.par_iter())
            .map(|(e, &w)| {
                let col = matrix_vec(p, &[(e.u, F::one()), (e.v, -F::one())]);
                cv_norm1(&col) / w
            })
            .reduce(F::zero, |a, b| a.max(b));
        Self {
            graph,
            precond,
            weights,
            norm,
            tree: minimum_spanning_forest(graph),
        }
    }

    /// `N · ‖x_mst‖₁ / ‖Pb‖₁`: no optimal scale exceeds it, since the tree
    /// routing costs at least the optimum.
    pub fn scale_bound(&self, b: &[F]) -> f64 {
        let plan = &self.precond.plan;
        let pb = plan.norm1(&plan.apply(b)).to_f64_lossy();
        let mst = flow_cost(self.graph, &tree_route(self.graph, &self.tree, b)).to_f64_lossy();
        self.norm.to_f64_lossy() * mst / pb
    }

    /// `A W⁻¹ x` over vertices.
    fn image(&self, x: &[F]) -> Vec<F> {
        let mut out = vec![F::zero(); self.graph.n()];
        for ((e, &w), &xe) in self.graph.edges().iter().zip(&self.weights).zip(x) {
            let y = xe / w;
            out[e.u] = out[e.u] + y;
            out[e.v] = out[e.v] - y;
        }
        out
    }
}

/// Parameters of one multiplicative-weights run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MwuParams {
    pub epsilon: f64,
    /// Largest scale considered, `κ`.
    pub scale_limit: f64,
    /// Tolerance parameter; the run succeeds once the mismatch is at most
    /// `ε / 2·kappa`.
    pub kappa: f64,
    pub eta: f64,
    pub iterations: u64,
}

impl MwuParams {
    /// `T = min(cap, ceil(64 κ² ln(2m) / ε²))` and `η = sqrt(ln(2m) / T)`,
    /// which is `ε / 8κ` when no cap applies; `cfg` may override either.
    pub fn new(epsilon: f64, scale_limit: f64, m: usize, cfg: &SolverConfig) -> Self {
        let kappa = cfg.tolerance_kappa.unwrap_or(scale_limit);
        let log_dirs = ((2 * m.max(1)) as f64).ln();
        let full = (64.0 * kappa * kappa * log_dirs / (epsilon * epsilon)).ceil();
        let full = if full.is_finite() { full.min(u64::MAX as f64) as u64 } else { u64::MAX };
        let iterations = cfg.max_iterations.map_or(full, |cap| cap.min(full)).max(1);
        let eta = if iterations == full {
            epsilon / (8.0 * kappa)
        } else {
            (log_dirs / iterations as f64).sqrt().min(0.5)
        };
        Self {
            epsilon,
            scale_limit,
            kappa,
            eta: cfg.eta.unwrap_or(eta),
            iterations,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MwuOutcome<F> {
    /// `x' = p⁺ - p⁻` with `‖x'‖₁ ≤ 1` and
    /// `‖P A W⁻¹ x' / N - Pb / (s ‖Pb‖₁)‖₁ ≤ ε / 2κ`.
    Feasible { x: Vec<F>, iterations: u64 },
    /// Averaged sign vector `ȳ` (one value per elementary row interval of
    /// the preconditioner) with `ȳᵀ(±P A W⁻¹ e_j / N - Pb / (s‖Pb‖₁)) > 0`
    /// for every edge `j` and both signs, so no unit-norm `x'` matches.
    Infeasible { certificate: Vec<F>, iterations: u64 },
    /// The iteration budget ran out first.
    Undetermined { iterations: u64 },
}

impl<F> MwuOutcome<F> {
    pub fn iterations(&self) -> u64 {
        match self {
            Self::Feasible { iterations, .. }
            | Self::Infeasible { iterations, .. }
            | Self::Undetermined { iterations } => *iterations,
        }
    }

    pub fn probe(&self) -> ProbeOutcome {
        match self {
            Self::Feasible { .. } => ProbeOutcome::Feasible,
            Self::Infeasible { .. } => ProbeOutcome::Infeasible,
            Self::Undetermined { .. } => ProbeOutcome::Undetermined,
        }
    }
}

/// Multiplicative weights over the `2m` signed edge directions.
///
/// Each iteration forms `p` from the weights, measures the preconditioned
/// mismatch `P(A W⁻¹ x' / N - b / (s ‖Pb‖₁))`, and returns as soon as its
/// norm is at most `ε / 2κ`. Otherwise every direction is charged half its
/// correlation with the mismatch sign pattern and reweighted by
/// `1 - η·charge` (kept in log space). The run stops with a certificate as
/// soon as every direction's cumulative charge is positive.
pub fn mwu_feasibility<F: Real>(
    op: &FlowOperator<'_, F>,
    b: &[F],
    s: f64,
    params: &MwuParams,
) -> MwuOutcome<F> {
    let plan = &op.precond.plan;
    let m = op.graph.m();
    let pb = plan.norm1(&plan.apply(b));
    debug_assert!(pb > F::zero(), "preconditioned demand must be non-zero");
    let target_scale = F::one() / (F::of(s) * pb);
    let target: Vec<F> = b.iter().map(|&x| x * target_scale).collect();
    let target_vals = plan.apply(&target);
    let inv_n = F::one() / op.norm;
    let threshold = F::of(params.epsilon / (2.0 * params.kappa));
    let eta = F::of(params.eta);
    let half = F::of(0.5);
    // per edge: (u, v, 1 / (w N))
    let cols: Vec<(usize, usize, F)> = op
        .graph
        .edges()
        .iter()
        .zip(&op.weights)
        .map(|(e, &w)| (e.u, e.v, inv_n / w))
        .collect();

    // (plus, minus) pairs per edge
    let mut log_w = vec![(F::zero(), F::zero()); m];
    let mut charge = vec![(F::zero(), F::zero()); m];
    let mut y_count = vec![0i64; plan.intervals()];
    let mut x = vec![F::zero(); m];
    let mut g = vec![F::zero(); op.graph.n()];
    let (mut vals, mut y, mut prefix, mut z) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut t = 0u64;
    while t < params.iterations {
        t += 1;
        let top = log_w
            .iter()
            .fold(F::neg_infinity(), |acc, &(p, q)| acc.max(p).max(q));
        let mut total = F::zero();
        for (xe, &(p, q)) in x.iter_mut().zip(&log_w) {
            let (wp, wq) = ((p - top).exp(), (q - top).exp());
            total = total + wp + wq;
            *xe = wp - wq;
        }
        g.iter_mut().for_each(|v| *v = F::zero());
        for (xe, &(u, v, c)) in x.iter_mut().zip(&cols) {
            *xe = *xe / total;
            let flow = *xe * c;
            g[u] = g[u] + flow;
            g[v] = g[v] - flow;
        }
        plan.apply_into(&g, &mut vals);
        for (v, &tv) in vals.iter_mut().zip(&target_vals) {
            *v = *v - tv;
        }
        if plan.norm1(&vals) <= threshold {
            return MwuOutcome::Feasible { x, iterations: t };
        }
        y.clear();
        y.extend(vals.iter().zip(y_count.iter_mut()).map(|(&v, count)| {
            let sign = (v > F::zero()) as i64 - (v < F::zero()) as i64;
            *count += sign;
            F::of(sign as f64)
        }));
        plan.transpose_apply_into(&y, &mut prefix, &mut z);
        let zb = z
            .iter()
            .zip(&target)
            .fold(F::zero(), |acc, (&a, &c)| acc + a * c);
        let update = |((lw, ch), &(u, v, c)): ((&mut (F, F), &mut (F, F)), &(usize, usize, F))| {
            let a = (z[u] - z[v]) * c;
            let plus = (a - zb) * half;
            let minus = (-a - zb) * half;
            ch.0 = ch.0 + plus;
            ch.1 = ch.1 + minus;
            lw.0 = lw.0 + (-eta * plus).ln_1p();
            lw.1 = lw.1 + (-eta * minus).ln_1p();
            ch.0 > F::zero() && ch.1 > F::zero()
        };
        let all_positive = if m >= PARALLEL_EDGES {
            log_w
                .par_iter_mut()
                .zip(charge.par_iter_mut())
                .zip(cols.par_iter())
                .with_min_len(PARALLEL_EDGES / 4)
                .map(update)
                .reduce(|| true, |a, b| a && b)
        } else {
            log_w
                .iter_mut()
                .zip(charge.iter_mut())
                .zip(cols.iter())
                .map(update)
                .fold(true, |a, b| a && b)
        };
        if all_positive {
            let inv_t = F::one() / F::of(t as f64);
            let certificate = y_count.iter().map(|&c| F::of(c as f64) * inv_t).collect();
            return MwuOutcome::Infeasible {
                certificate,
                iterations: t,
            };
        }
    }
    MwuOutcome::Undetermined { iterations: t }
}

/// Edge count from which the per-iteration edge updates run in parallel.
const PARALLEL_EDGES: usize = 1 << 14;

/// Outcome of [`scale_search`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleSolution<F> {
    /// `x = W f` over edges.
    pub x: Vec<F>,
    pub scale: f64,
    pub probes: Vec<ScaleProbe>,
}

/// Binary search over `s = (1+ε)^j`, `0 ≤ j ≤ ceil(log_{1+ε} κ)`, for the
/// smallest scale at which [`mwu_feasibility`] succeeds; the returned
/// `x = x'·s·‖Pb‖₁ / N` approximately solves `A W⁻¹ x = b` with
/// `‖x‖₁ ≤ (1+ε)` times optimal.
pub fn scale_search<F: Real>(
    op: &FlowOperator<'_, F>,
    b: &[F],
    params: &MwuParams,
    round: usize,
) -> Result<ScaleSolution<F>, FlowError> {
    let m = op.graph.m();
    if b.iter().all(|x| *x == F::zero()) {
        return Ok(ScaleSolution {
            x: vec![F::zero(); m],
            scale: 1.0,
            probes: Vec::new(),
        });
    }
    let eps = params.epsilon;
    // one factor of (1+ε) above the tree bound keeps the top probe strictly
    // feasible when that bound is tight
    let limit = params.scale_limit.min(op.scale_bound(b) * (1.0 + eps)).max(1.0);
    let top = (limit.ln() / (1.0 + eps).ln()).ceil().max(0.0) as i64;
    let mut probes = Vec::new();
    let mut run = |j: i64| {
        let s = (1.0 + eps).powi(j as i32);
        let out = mwu_feasibility(op, b, s, params);
        probes.push(ScaleProbe {
            round,
            scale: s,
            outcome: out.probe(),
            iterations: out.iterations(),
        });
        (s, out)
    };
    let (mut best_s, best) = run(top);
    let mut best_x = match best {
        MwuOutcome::Feasible { x, .. } => x,
        MwuOutcome::Infeasible { .. } => {
            return Err(FlowError::AllScalesFailed {
                kappa: params.scale_limit,
            })
        }
        MwuOutcome::Undetermined { iterations } => {
            return Err(FlowError::BudgetExhausted {
                scale: best_s,
                iterations,
            })
        }
    };
    let (mut lo, mut hi) = (-1i64, top);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        match run(mid) {
            (s, MwuOutcome::Feasible { x, .. }) => {
                hi = mid;
                best_s = s;
                best_x = x;
            }
            _ => lo = mid,
        }
    }
    let plan = &op.precond.plan;
    let pb = plan.norm1(&plan.apply(b));
    let factor = F::of(best_s) * pb / op.norm;
    Ok(ScaleSolution {
        x: best_x.into_iter().map(|v| v * factor).collect(),
        scale: best_s,
        probes,
    })
}

/// `(1+ε)`-approximate minimum-cost flow meeting `b` exactly.
pub fn min_cost_flow<F: Real>(
    g: &WeightedGraph<u64>,
    b: &Demand<F>,
    epsilon: f64,
    seed: u64,
) -> Result<FlowSolution<F>, FlowError> {
    min_cost_flow_with(g, b, &SolverConfig::new(epsilon), seed)
}

/// [`min_cost_flow`] with explicit solver parameters.
///
/// Zero-weight edges are contracted first. The scale search with accuracy
/// `ε/5` is then applied to the leftover demand for up to `1 + ceil(log2 n)`
/// rounds, the remainder is routed along a minimum spanning tree, and the
/// flow is lifted back through the contraction.
pub fn min_cost_flow_with<F: Real>(
    g: &WeightedGraph<u64>,
    b: &Demand<F>,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<FlowSolution<F>, FlowError> {
    if !(cfg.epsilon > 0.0 && cfg.epsilon < 0.5) {
        return Err(FlowError::EpsilonOutOfRange(cfg.epsilon));
    }
    b.check_len(g.n())?;
    let contraction = contract_zero_edges(g);
    let gc = &contraction.graph;
    let mut bc = vec![F::zero(); gc.n()];
    for (v, &x) in b.values().iter().enumerate() {
        let c = contraction.remap[v];
        bc[c] = bc[c] + x;
    }

    let mut fc = vec![F::zero(); gc.m()];
    let mut iterations = 0;
    let mut trace = Vec::new();
    let mut residual_trace = Vec::new();
    if gc.n() > 1 && bc.iter().any(|x| *x != F::zero()) {
        let precond = Preconditioner::<F>::build(gc, cfg, seed)?;
        let op = FlowOperator::new(gc, &precond);
        let kappa = cfg.kappa.unwrap_or(precond.certificate);
        let inner = (cfg.epsilon / 5.0).max(cfg.resolution_floor);
        let params = MwuParams::new(inner, kappa, gc.m(), cfg);
        let rounds = cfg.rounds.unwrap_or(1 + ceil_log2(gc.n()));
        let plan = &precond.plan;
        let pnorm = |d: &[F]| plan.norm1(&plan.apply(d)).to_f64_lossy();
        let initial = pnorm(&bc);
        let mut x_total = vec![F::zero(); gc.m()];
        let mut left = bc.clone();
        for round in 0..rounds {
            if pnorm(&left) <= initial * f64::EPSILON {
                break;
            }
            if round > 0 {
                // stop once repairing the leftover costs at most ε' of the flow so far
                let repair = flow_cost(gc, &tree_route(gc, &op.tree, &left));
                if repair <= F::of(inner) * kahan_sum(x_total.iter().map(|v| v.abs())) {
                    break;
                }
            }
            let step = match scale_search(&op, &left, &params, round) {
                Ok(step) => step,
                Err(FlowError::BudgetExhausted { scale, iterations: used }) => {
                    // the tree repair below still yields a feasible flow
                    iterations += used;
                    trace.push(ScaleProbe {
                        round,
                        scale,
                        outcome: ProbeOutcome::Undetermined,
                        iterations: used,
                    });
                    break;
                }
                Err(e) => return Err(e),
            };
            iterations += step.probes.iter().map(|p| p.iterations).sum::<u64>();
            trace.extend(step.probes);
            for (acc, v) in x_total.iter_mut().zip(&step.x) {
                *acc = *acc + *v;
            }
            let routed = op.image(&x_total);
            left = bc.iter().zip(&routed).map(|(&d, &r)| d - r).collect();
            residual_trace.push(pnorm(&left));
        }
        for (e, edge) in gc.edges().iter().enumerate() {
            fc[e] = x_total[e] / F::of(edge.w as f64);
        }
        let repair = tree_route(gc, &op.tree, &left);
        for (a, r) in fc.iter_mut().zip(repair) {
            *a = *a + r;
        }
    }

    let f = lift_flow(g, &contraction, &fc, b.values());
    let mut sol = FlowSolution::evaluate(g, b, f);
    sol.iterations = iterations;
    sol.trace = trace;
    sol.residual_trace = residual_trace;
    Ok(sol)
}

/// Maps a flow on the contracted graph back to the original edges and
/// balances each contracted class along its zero-weight edges.
fn lift_flow<F: Real>(
    g: &WeightedGraph<u64>,
    contraction: &crate::graph::ZeroContraction<u64>,
    fc: &[F],
    b: &[F],
) -> Vec<F> {
    let mut f = vec![F::zero(); g.m()];
    for (ce, &x) in fc.iter().enumerate() {
        let oe = contraction.witness[ce];
        let orig = g.edge(oe);
        let cedge = contraction.graph.edge(ce);
        f[oe] = if contraction.remap[orig.u] == cedge.u { x } else { -x };
    }
    if contraction.is_identity() {
        return f;
    }
    let out = net_outflow(g, &f);
    let deficit: Vec<F> = b.iter().zip(&out).map(|(&bv, &o)| bv - o).collect();
    let zero_tree: Vec<usize> = {
        let mut parent: Vec<usize> = (0..g.n()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        g.edges()
            .iter()
            .enumerate()
            .filter(|(_, e)| e.w == 0)
            .filter_map(|(i, e)| {
                let (a, c) = (find(&mut parent, e.u), find(&mut parent, e.v));
                (a != c).then(|| {
                    parent[a] = c;
                    i
                })
            })
            .collect()
    };
    let inner = tree_route(g, &zero_tree, &deficit);
    for (a, r) in f.iter_mut().zip(inner) {
        *a = *a + r;
    }
    f
}

/// Exact transshipment cost for integer demands, as a minimum-cost
/// assignment of unit supplies to unit demands; a small-instance reference.
pub fn exact_transshipment_cost(g: &WeightedGraph<u64>, b: &[i64]) -> u64 {
    // uncapacitated: every unit travels along a shortest path, so the optimum
    // is a min-cost assignment of supply units to demand units
    let dist = all_pairs(g);
    let n = g.n();
    let mut supply: Vec<usize> = Vec::new();
    let mut sink: Vec<usize> = Vec::new();
    for (v, &x) in b.iter().enumerate() {
        for _ in 0..x.max(0) {
            supply.push(v);
        }
        for _ in 0..(-x).max(0) {
            sink.push(v);
        }
    }
    assert_eq!(supply.len(), sink.len(), "unbalanced demand");
    let cost: Vec<Vec<u64>> = supply
        .iter()
        .map(|&s| sink.iter().map(|&t| dist[s * n + t]).collect())
        .collect();
    hungarian(&cost)
}

/// Minimum-cost perfect assignment of a square cost matrix.
fn hungarian(cost: &[Vec<u64>]) -> u64 {
    let k = cost.len();
    if k == 0 {
        return 0;
    }
    let inf = i128::MAX / 4;
    let (mut u, mut v) = (vec![0i128; k + 1], vec![0i128; k + 1]);
    let mut p = vec![0usize; k + 1];
    let mut way = vec![0usize; k + 1];
    for i in 1..=k {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=k {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] as i128 - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=k {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=k).map(|j| cost[p[j] - 1][j - 1]).sum()
}

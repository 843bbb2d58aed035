//! Generators and brute-force reference oracles shared by the integration
//! tests. Nothing here calls into the library's own shortest-path or
//! matching code.
#![allow(dead_code)]

use hopflow_core::graph::WeightedGraph;
use hopflow_core::metric::Embedding;
use hopflow_core::precond::{CompressedMatrix, Segment};
use hopflow_core::Graph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const INF: u128 = u128::MAX;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random spanning tree plus random extra edges, `m ≤ max_m`, weights in
/// `1..=max_w`.
pub fn random_connected(rng: &mut impl Rng, n: usize, max_m: usize, max_w: u64) -> Graph {
    let mut edges = Vec::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        edges.push((u, v, rng.random_range(1..=max_w)));
    }
    let extra = max_m.saturating_sub(n - 1);
    for _ in 0..extra {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u != v {
            edges.push((u, v, rng.random_range(1..=max_w)));
        }
    }
    Graph::from_edges(n, edges)
}

/// Random connected graph with roughly `ratio · n` edges.
pub fn random_graph(seed: u64, n: usize, ratio: usize, max_w: u64) -> Graph {
    random_connected(&mut rng(seed), n, ratio * n, max_w)
}

/// Floyd–Warshall over any integer weight type.
pub fn floyd<W: Copy + Into<u128>>(g: &WeightedGraph<W>) -> Vec<Vec<u128>>
where
    W: hopflow_core::Weight,
{
    let n = g.n();
    let mut d = vec![vec![INF; n]; n];
    for (v, row) in d.iter_mut().enumerate() {
        row[v] = 0;
    }
    for e in g.edges() {
        let w: u128 = e.w.into();
        if w < d[e.u][e.v] {
            d[e.u][e.v] = w;
            d[e.v][e.u] = w;
        }
    }
    for k in 0..n {
        for i in 0..n {
            if d[i][k] == INF {
                continue;
            }
            for j in 0..n {
                let via = d[i][k].saturating_add(d[k][j]);
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

/// The `b` nearest vertices of `v` under `(distance, id)` order.
pub fn brute_nearest(dist: &[Vec<u128>], v: usize, b: usize) -> Vec<(usize, u128)> {
    let mut all: Vec<(u128, usize)> = (0..dist.len()).map(|u| (dist[v][u], u)).collect();
    all.sort_unstable();
    all.truncate(b);
    all.into_iter().map(|(d, u)| (u, d)).collect()
}

/// Minimum of `Σ cost[i][π(i)]` over permutations, `n ≤ 8`.
pub fn min_assignment(cost: &[Vec<u128>]) -> u128 {
    fn go(cost: &[Vec<u128>], row: usize, used: &mut [bool], acc: u128, best: &mut u128) {
        if acc >= *best {
            return;
        }
        if row == cost.len() {
            *best = acc;
            return;
        }
        for j in 0..cost.len() {
            if !used[j] {
                used[j] = true;
                go(cost, row + 1, used, acc + cost[row][j], best);
                used[j] = false;
            }
        }
    }
    let mut best = INF;
    go(cost, 0, &mut vec![false; cost.len()], 0, &mut best);
    best
}

/// Exact uncapacitated min-cost flow for integer demands by successive
/// shortest paths on the residual graph, one unit at a time.
pub fn ssp_min_cost(g: &Graph, b: &[i64]) -> u64 {
    let n = g.n();
    let m = g.m();
    let mut flow = vec![0i64; m];
    let mut excess = b.to_vec();
    let mut total = 0i64;
    loop {
        let Some(s) = (0..n).find(|&v| excess[v] > 0) else {
            break;
        };
        // Bellman-Ford from s over residual arcs
        let mut dist = vec![i64::MAX; n];
        let mut via: Vec<Option<(usize, i64)>> = vec![None; n];
        dist[s] = 0;
        for _ in 0..n {
            let mut changed = false;
            for (e, edge) in g.edges().iter().enumerate() {
                let w = edge.w as i64;
                for (a, c, dir) in [(edge.u, edge.v, 1i64), (edge.v, edge.u, -1)] {
                    if dist[a] == i64::MAX {
                        continue;
                    }
                    // pushing along `dir` costs w unless it cancels flow
                    let cost = if flow[e] * dir < 0 { -w } else { w };
                    if dist[a] + cost < dist[c] {
                        dist[c] = dist[a] + cost;
                        via[c] = Some((e, dir));
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let t = (0..n)
            .filter(|&v| excess[v] < 0 && dist[v] < i64::MAX)
            .min_by_key(|&v| (dist[v], v))
            .expect("connected graph has a reachable sink");
        let mut x = t;
        while x != s {
            let (e, dir) = via[x].unwrap();
            flow[e] += dir;
            let edge = g.edge(e);
            x = if dir == 1 { edge.u } else { edge.v };
        }
        total += dist[t];
        excess[s] -= 1;
        excess[t] += 1;
    }
    debug_assert_eq!(
        total,
        g.edges()
            .iter()
            .zip(&flow)
            .map(|(e, f)| e.w as i64 * f.abs())
            .sum::<i64>()
    );
    total as u64
}

/// Random integer demand in `[-lim, lim]` summing to zero, not all zero.
pub fn random_int_demand(rng: &mut impl Rng, n: usize, lim: i64) -> Vec<i64> {
    loop {
        let mut b: Vec<i64> = (0..n).map(|_| rng.random_range(-lim..=lim)).collect();
        let sum: i64 = b.iter().sum();
        let last = b[n - 1] - sum;
        if last.abs() > lim {
            continue;
        }
        b[n - 1] = last;
        if b.iter().any(|&x| x != 0) {
            return b;
        }
    }
}

/// Net outflow per vertex of a signed edge flow.
pub fn divergence(g: &Graph, f: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; g.n()];
    for (e, &x) in g.edges().iter().zip(f) {
        out[e.u] += x;
        out[e.v] -= x;
    }
    out
}

/// Checks that `walk` is an edge-valid walk in `g` and returns its length.
pub fn walk_length(g: &Graph, walk: &[usize]) -> Option<u64> {
    let mut len = 0u64;
    for w in walk.windows(2) {
        if w[0] != w[1] {
            len += g.weight(w[0], w[1])?;
        }
    }
    Some(len)
}

pub fn is_simple(walk: &[usize]) -> bool {
    let mut seen = walk.to_vec();
    seen.sort_unstable();
    seen.windows(2).all(|w| w[0] != w[1])
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson(k: usize, n: usize, z: f64) -> (f64, f64) {
    let n = n as f64;
    let p = k as f64 / n;
    let denom = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    (center - half, center + half)
}

/// `4 ceil(log2 k + 1)`, recomputed here rather than borrowed.
pub fn levels_for(k: f64) -> u32 {
    (4.0 * (k.log2() + 1.0).ceil()) as u32
}

/// Unit-weight tree: a path `p_0..p_{l-1}`, and from each `p_i` a branch of
/// `r` edges ending at a star centre `c_i` with `leaves` leaves. Returns the
/// graph and the centres.
pub fn star_path(l: usize, r: usize, leaves: usize) -> (Graph, Vec<usize>) {
    let group = r + 1 + leaves;
    let n = l * group;
    let mut edges = Vec::new();
    let mut centres = Vec::new();
    for i in 0..l {
        let p = i * group;
        if i + 1 < l {
            edges.push((p, p + group, 1));
        }
        // branch p = x_0, x_1, ..., x_r = centre
        for j in 0..r {
            edges.push((p + j, p + j + 1, 1));
        }
        let c = p + r;
        centres.push(c);
        for leaf in 0..leaves {
            edges.push((c, c + 1 + leaf, 1));
        }
    }
    (Graph::from_edges(n, edges), centres)
}

/// Two stars of `half` vertices each whose centres `0` and `half` are
/// joined by an edge of weight 2.
pub fn two_stars(half: usize) -> Graph {
    let mut edges = vec![(0, half, 2)];
    for c in [0, half] {
        for leaf in 1..half {
            edges.push((c, c + leaf, 1));
        }
    }
    Graph::from_edges(2 * half, edges)
}

/// `n` random points in `[0, range]^d`.
pub fn random_embedding(rng: &mut impl Rng, n: usize, d: usize, range: u64) -> Embedding {
    Embedding::from_rows(
        (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(0..=range)).collect())
            .collect(),
    )
}

/// Random matrix with `cols` columns of disjoint runs over `rows` rows.
pub fn random_matrix(rng: &mut impl Rng, rows: u64, cols: usize) -> CompressedMatrix<f64> {
    let columns = (0..cols).map(|_| random_runs(rng, rows)).collect();
    CompressedMatrix::from_columns(rows, columns).unwrap()
}

pub fn random_runs(rng: &mut impl Rng, rows: u64) -> Vec<Segment<f64>> {
    let mut runs = Vec::new();
    let mut at = 1u64;
    while at <= rows {
        let len = rng.random_range(1..=rows.div_ceil(3).max(1));
        let end = (at + len - 1).min(rows);
        if rng.random_bool(0.6) {
            runs.push(Segment { start: at, end, value: rng.random_range(-4.0..4.0) });
        }
        at = end + 1 + rng.random_range(0..3);
    }
    runs
}

/// Random sparse `g` over `cols` columns.
pub fn sparse_g(rng: &mut impl Rng, cols: usize) -> Vec<(usize, f64)> {
    let mut g = Vec::new();
    for i in 0..cols {
        if rng.random_bool(0.7) {
            g.push((i, rng.random_range(-3.0..3.0)));
        }
    }
    g
}

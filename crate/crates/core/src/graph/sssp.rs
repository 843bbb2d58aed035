use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use super::{VertexId, WeightedGraph};
use crate::scalar::Weight;

/// Exact single-source distances; unreachable vertices get `W::infinity()`.
pub fn dijkstra<W: Weight>(g: &WeightedGraph<W>, source: VertexId) -> Vec<W> {
    assert!(source < g.n(), "source {source} out of range");
    let mut dist = vec![W::infinity(); g.n()];
    let mut heap = BinaryHeap::new();
    dist[source] = W::zero();
    heap.push(Reverse((W::zero(), source)));
    while let Some(Reverse((d, v))) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        for (u, w) in g.neighbors(v) {
            let nd = d.plus(w);
            if nd < dist[u] {
                dist[u] = nd;
                heap.push(Reverse((nd, u)));
            }
        }
    }
    dist
}

/// Row-major `n x n` distance matrix from one Dijkstra run per vertex.
pub fn all_pairs<W: Weight>(g: &WeightedGraph<W>) -> Vec<W> {
    let n = g.n();
    let rows: Vec<Vec<W>> = (0..n).into_par_iter().map(|s| dijkstra(g, s)).collect();
    rows.concat()
}

/// Hop-limited distances from a weighted source set: entry `v` is the
/// minimum over sources `(s, o)` of `o + dist^(h)(s, v)`.
pub fn bellman_ford_hops<W: Weight>(
    g: &WeightedGraph<W>,
    sources: &[(VertexId, W)],
    h: usize,
) -> Vec<W> {
    let mut init = vec![(W::infinity(), ()); g.n()];
    for &(s, o) in sources {
        if o < init[s].0 {
            init[s].0 = o;
        }
    }
    bellman_ford_labeled(g, init, h)
        .into_iter()
        .map(|(d, _)| d)
        .collect()
}

/// Hop-limited relaxation over `(distance, label)` pairs compared
/// lexicographically; labels travel with the distance that produced them.
///
/// Each round recomputes every vertex from the previous round's values, so
/// after `h` rounds entry `v` is the best pair achievable with at most `h`
/// hops. Stops early once a round changes nothing.
pub fn bellman_ford_labeled<W, L>(
    g: &WeightedGraph<W>,
    init: Vec<(W, L)>,
    h: usize,
) -> Vec<(W, L)>
where
    W: Weight,
    L: Copy + Ord + Send + Sync,
{
    assert_eq!(init.len(), g.n());
    let mut cur = init;
    for _ in 0..h {
        let next: Vec<(W, L)> = (0..g.n())
            .into_par_iter()
            .with_min_len(256)
            .map(|v| {
                let mut best = cur[v];
                for (u, w) in g.neighbors(v) {
                    let (du, lu) = cur[u];
                    if du.is_infinite() {
                        continue;
                    }
                    let cand = (du.plus(w), lu);
                    if cand < best {
                        best = cand;
                    }
                }
                best
            })
            .collect();
        if next == cur {
            break;
        }
        cur = next;
    }
    cur
}

use rayon::prelude::*;

use super::{VertexId, WeightedGraph};
use crate::scalar::Weight;

/// The `b` nearest vertices of every vertex, ordered by `(distance, id)`.
///
/// `r_b(v)` is the distance of the `b`-th nearest vertex. The open ball
/// `B°_b(v)` is the prefix strictly closer than `r_b(v)`; the remaining
/// entries all sit at distance exactly `r_b(v)` and belong to the closed
/// ball `B_b(v)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BallData<W> {
    b: usize,
    offsets: Vec<usize>,
    entries: Vec<(u32, W)>,
    open_len: Vec<u32>,
}

impl<W: Weight> BallData<W> {
    pub fn b(&self) -> usize {
        self.b
    }

    pub fn n(&self) -> usize {
        self.open_len.len()
    }

    /// The `b` nearest vertices of `v` with their distances.
    pub fn nearest(&self, v: VertexId) -> &[(u32, W)] {
        &self.entries[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn radius(&self, v: VertexId) -> W {
        self.nearest(v).last().map(|e| e.1).unwrap_or_else(W::infinity)
    }

    /// Members of `B°_b(v)` with exact distances, in `(distance, id)` order.
    pub fn open_ball(&self, v: VertexId) -> &[(u32, W)] {
        &self.nearest(v)[..self.open_len[v] as usize]
    }

    /// Members of `B_b(v)` found at distance exactly `r_b(v)`.
    pub fn closed_witnesses(&self, v: VertexId) -> &[(u32, W)] {
        &self.nearest(v)[self.open_len[v] as usize..]
    }

    fn from_lists(b: usize, lists: Vec<Vec<(u32, W)>>) -> Self {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        offsets.push(0);
        let mut open_len = Vec::with_capacity(lists.len());
        let mut entries = Vec::with_capacity(lists.iter().map(Vec::len).sum());
        for list in lists {
            let r = list.last().map(|e| e.1);
            let open = list.iter().take_while(|e| Some(e.1) != r).count();
            open_len.push(open as u32);
            entries.extend(list);
            offsets.push(entries.len());
        }
        Self {
            b,
            offsets,
            entries,
            open_len,
        }
    }
}

/// Computes the `b` nearest neighbours of every vertex by list doubling.
///
/// Round 0 takes the best `b` of each closed one-hop neighbourhood. Each
/// later round replaces a list with the best `b` of all two-step
/// combinations through the current lists, doubling the hop range, for at
/// most `ceil(log2 n)` rounds (fewer if a round changes nothing). Ties are
/// broken by vertex id.
pub fn compute_balls<W: Weight>(g: &WeightedGraph<W>, b: usize) -> BallData<W> {
    let n = g.n();
    assert!(b >= 1 && b <= n.max(1), "ball size {b} out of range for n = {n}");

    let mut lists: Vec<Vec<(u32, W)>> = (0..n)
        .into_par_iter()
        .map(|v| {
            let mut cand: Vec<(W, u32)> = std::iter::once((W::zero(), v as u32))
                .chain(g.neighbors(v).map(|(u, w)| (w, u as u32)))
                .collect();
            keep_best(&mut cand, b);
            cand.into_iter().map(|(d, u)| (u, d)).collect()
        })
        .collect();

    let rounds = ceil_log2(n);
    for _ in 0..rounds {
        let next: Vec<Vec<(u32, W)>> = (0..n)
            .into_par_iter()
            .map_init(
                || (vec![W::infinity(); n], Vec::<u32>::new()),
                |(best, touched), v| {
                    for &(x, dvx) in &lists[v] {
                        for &(u, dxu) in &lists[x as usize] {
                            let d = dvx.plus(dxu);
                            let slot = &mut best[u as usize];
                            if slot.is_infinite() {
                                touched.push(u);
                            }
                            if d < *slot {
                                *slot = d;
                            }
                        }
                    }
                    let mut cand: Vec<(W, u32)> = touched
                        .iter()
                        .map(|&u| (best[u as usize], u))
                        .collect();
                    for &u in touched.iter() {
                        best[u as usize] = W::infinity();
                    }
                    touched.clear();
                    keep_best(&mut cand, b);
                    cand.into_iter().map(|(d, u)| (u, d)).collect()
                },
            )
            .collect();
        let changed = next != lists;
        lists = next;
        if !changed {
            break;
        }
    }
    BallData::from_lists(b, lists)
}

fn keep_best<W: Weight>(cand: &mut Vec<(W, u32)>, b: usize) {
    if cand.len() > b {
        cand.select_nth_unstable(b - 1);
        cand.truncate(b);
    }
    cand.sort_unstable();
}

pub fn ceil_log2(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::all_pairs;

    fn path(n: usize) -> WeightedGraph<u64> {
        WeightedGraph::from_edges(n, (0..n - 1).map(|i| (i, i + 1, 1)))
    }

    #[test]
    fn ceil_log2_values() {
        let got: Vec<usize> = [1, 2, 3, 4, 5, 8, 9].iter().map(|&n| ceil_log2(n)).collect();
        assert_eq!(got, vec![0, 1, 2, 2, 3, 3, 4]);
    }

    #[test]
    fn path_b2() {
        let balls = compute_balls(&path(4), 2);
        assert_eq!(balls.radius(1), 1);
        assert_eq!(balls.open_ball(1), &[(1, 0)]);
    }

    #[test]
    fn b1_is_degenerate() {
        let balls = compute_balls(&path(5), 1);
        for v in 0..5 {
            assert_eq!(balls.radius(v), 0);
            assert!(balls.open_ball(v).is_empty());
            assert_eq!(balls.closed_witnesses(v), &[(v as u32, 0)]);
        }
    }

    #[test]
    fn triangle_b3() {
        let g = WeightedGraph::<u64>::from_edges(3, [(0, 1, 1), (1, 2, 2), (0, 2, 4)]);
        let balls = compute_balls(&g, 3);
        assert_eq!(balls.radius(0), 3);
        assert_eq!(balls.open_ball(0), &[(0, 0), (1, 1)]);
    }

    #[test]
    fn long_path_needs_all_rounds() {
        let g = path(40);
        let balls = compute_balls(&g, 40);
        let apsp = all_pairs(&g);
        assert_eq!(balls.radius(0), apsp[39]);
    }
}

use super::{VertexId, WeightedGraph};
use crate::scalar::Weight;

/// Quotient of a graph by its zero-weight edges.
#[derive(Clone, Debug)]
pub struct ZeroContraction<W> {
    pub graph: WeightedGraph<W>,
    /// Original vertex to contracted vertex.
    pub remap: Vec<VertexId>,
    /// Contracted vertex to its smallest original member.
    pub representative: Vec<VertexId>,
    /// Contracted edge to an original edge index realising its weight.
    pub witness: Vec<usize>,
}

impl<W: Weight> ZeroContraction<W> {
    pub fn is_identity(&self) -> bool {
        self.graph.n() == self.remap.len()
    }
}

/// Contracts every zero-weight edge. Contracted vertices are numbered by
/// their smallest original member, so a graph without zero edges maps to
/// itself under the identity.
pub fn contract_zero_edges<W: Weight>(g: &WeightedGraph<W>) -> ZeroContraction<W> {
    let n = g.n();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for e in g.edges() {
        if e.w.is_zero() {
            let (a, b) = (find(&mut parent, e.u), find(&mut parent, e.v));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut remap = vec![usize::MAX; n];
    let mut representative = Vec::new();
    for v in 0..n {
        let root = find(&mut parent, v);
        if remap[root] == usize::MAX {
            remap[root] = representative.len();
            representative.push(v);
        }
        remap[v] = remap[root];
    }

    let mut cand: Vec<(usize, usize, W, usize)> = g
        .edges()
        .iter()
        .enumerate()
        .filter_map(|(i, e)| {
            let (a, b) = (remap[e.u], remap[e.v]);
            (a != b).then(|| (a.min(b), a.max(b), e.w, i))
        })
        .collect();
    cand.sort_unstable();
    cand.dedup_by(|later, kept| later.0 == kept.0 && later.1 == kept.1);
    let witness = cand.iter().map(|c| c.3).collect();
    let graph = WeightedGraph::from_edges(representative.len(), cand.iter().map(|c| (c.0, c.1, c.2)));
    ZeroContraction {
        graph,
        remap,
        representative,
        witness,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contracts_a_zero_edge() {
        let g = WeightedGraph::<u64>::from_edges(3, [(0, 1, 0), (1, 2, 5)]);
        let c = contract_zero_edges(&g);
        assert_eq!(c.graph.n(), 2);
        assert_eq!(c.graph.edges()[0].w, 5);
        assert_eq!(c.remap[0], c.remap[1]);
        assert_ne!(c.remap[1], c.remap[2]);
        assert_eq!(c.witness, vec![1]);
    }

    #[test]
    fn identity_without_zero_edges() {
        let g = WeightedGraph::<u64>::from_edges(3, [(0, 1, 2), (1, 2, 5), (0, 2, 9)]);
        let c = contract_zero_edges(&g);
        assert!(c.is_identity());
        assert_eq!(c.graph, g);
        assert_eq!(c.remap, vec![0, 1, 2]);
    }

    #[test]
    fn zero_star_collapses() {
        let g = WeightedGraph::<u64>::from_edges(4, [(0, 1, 0), (0, 2, 0), (0, 3, 0)]);
        let c = contract_zero_edges(&g);
        assert_eq!((c.graph.n(), c.graph.m()), (1, 0));
    }

    #[test]
    fn parallel_images_keep_the_lighter_witness() {
        // 1 and 2 merge; edges 0-1 (7) and 0-2 (3) become parallel
        let g = WeightedGraph::<u64>::from_edges(3, [(0, 1, 7), (0, 2, 3), (1, 2, 0)]);
        let c = contract_zero_edges(&g);
        assert_eq!(c.graph.m(), 1);
        assert_eq!(c.graph.edges()[0].w, 3);
        assert_eq!(g.edge(c.witness[0]).w, 3);
    }
}

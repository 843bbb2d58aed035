mod common;

use common::{floyd, is_simple, random_graph, walk_length, wilson};
use hopflow_core::flow::{min_cost_flow, mst_routing, Demand, FlowSolution};
use hopflow_core::graph::dijkstra;
use hopflow_core::path::{
    contract, random_walk_length_check, sample_pointers, shortcut_cycles, PathError,
};
use hopflow_core::{approx_shortest_path, find_path, Graph};
use proptest::prelude::*;

fn path(n: usize) -> Graph {
    Graph::from_edges(n, (0..n - 1).map(|i| (i, i + 1, 1)))
}

/// Signed flow over edges from `(u, v, amount)` triples, `u → v`.
fn flow_on(g: &Graph, moves: &[(usize, usize, f64)]) -> Vec<f64> {
    let mut f = vec![0.0; g.m()];
    for &(u, v, x) in moves {
        let e = g.edge_index(u, v).unwrap();
        f[e] += if u < v { x } else { -x };
    }
    f
}

#[test]
fn pointers_follow_the_flow() {
    let g = path(4);
    let p = sample_pointers(&g, &[1.0, 1.0, 1.0], 3, 0).unwrap();
    assert_eq!(p, vec![Some(1), Some(2), Some(3), None]);
    // the sink never points, even with outflow
    let tri = Graph::from_edges(3, [(0, 1, 1), (1, 2, 1), (0, 2, 1)]);
    let f = flow_on(&tri, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]);
    assert_eq!(sample_pointers(&tri, &f, 1, 0).unwrap(), vec![Some(1), None, Some(0)]);
    assert!(sample_pointers(&g, &[1.0, 1.0], 3, 0).is_err());
    assert!(matches!(
        sample_pointers(&g, &[1.0, 1.0, 1.0], 4, 0),
        Err(PathError::VertexOutOfRange(4))
    ));
}

#[test]
fn untouched_vertices_point_at_their_lightest_neighbour() {
    let g = Graph::from_edges(4, [(0, 1, 1), (1, 2, 1), (2, 3, 5), (1, 3, 2)]);
    let f = flow_on(&g, &[(0, 1, 1.0), (1, 3, 1.0)]);
    let p = sample_pointers(&g, &f, 3, 1).unwrap();
    assert_eq!(p[2], Some(1));
}

#[test]
fn stuck_vertices_are_reported() {
    let g = path(3);
    // vertex 1 absorbs flow it never sends on
    let f = [1.0, 0.0];
    assert!(matches!(sample_pointers(&g, &f, 2, 0), Err(PathError::StuckVertex(1))));
}

#[test]
fn sampling_matches_the_flow_split() {
    // 0 sends 3/4 to 1 and 1/4 to 2
    let g = Graph::from_edges(4, [(0, 1, 1), (0, 2, 1), (1, 3, 1), (2, 3, 1)]);
    let f = flow_on(&g, &[(0, 1, 0.75), (0, 2, 0.25), (1, 3, 0.75), (2, 3, 0.25)]);
    let draws = 10_000;
    let hits = (0..draws)
        .filter(|&seed| sample_pointers(&g, &f, 3, seed as u64).unwrap()[0] == Some(1))
        .count();
    let (lo, hi) = wilson(hits, draws, 2.576);
    assert!(lo <= 0.75 && 0.75 <= hi, "{hits} of {draws}");
}

#[test]
fn path_flow_contracts_to_one_vertex() {
    let g = path(5);
    let p = sample_pointers(&g, &[1.0; 4], 4, 0).unwrap();
    let level = contract(&g, &p, 4);
    assert_eq!(level.graph.n(), 1);
    assert_eq!(level.root, vec![4; 5]);
    assert_eq!(level.depth, vec![4, 3, 2, 1, 0]);
    assert_eq!(level.tree_path(1), vec![1, 2, 3, 4]);
}

#[test]
fn two_cycles_and_a_tree() {
    // 0 <-> 1 and 2 <-> 3 are 2-cycles; 4 is the sink
    let g = Graph::from_edges(5, [(0, 1, 2), (1, 2, 5), (2, 3, 1), (3, 4, 7), (0, 4, 20)]);
    let p = vec![Some(1), Some(0), Some(3), Some(2), None];
    let level = contract(&g, &p, 4);
    assert_eq!(level.roots, vec![0, 2, 4]);
    assert_eq!(level.root, vec![0, 0, 2, 2, 4]);
    assert_eq!(level.depth, vec![0, 2, 0, 1, 0]);
    // (1,2): 2 + 5 + 0; (3,4): 1 + 7 + 0; (0,4): 0 + 20 + 0
    assert_eq!(level.graph.weight(0, 1), Some(7));
    assert_eq!(level.graph.weight(1, 2), Some(8));
    assert_eq!(level.graph.weight(0, 2), Some(20));
    assert_eq!(level.expand_edge(&g, 0, 1), vec![0, 1, 2]);
    assert_eq!(level.expand_edge(&g, 1, 2), vec![2, 3, 4]);
}

#[test]
fn contracted_weights_dominate_root_distances() {
    for seed in 0..20u64 {
        let n = 30;
        let g = random_graph(seed, n, 3, 20);
        let d = floyd(&g);
        let t = 1 + (seed as usize * 7) % (n - 1);
        let demand = Demand::<f64>::unit(n, 0, t);
        // alternate between solver flows and tree flows
        let f = if seed % 2 == 0 {
            min_cost_flow(&g, &demand, 0.1, seed).unwrap().f
        } else {
            mst_routing(&g, &demand).f
        };
        let p = sample_pointers(&g, &f, t, seed).unwrap();
        let level = contract(&g, &p, t);
        assert!(level.roots.contains(&t));
        assert!(level.graph.n() <= n.div_ceil(2), "{} roots", level.graph.n());
        for e in level.graph.edges() {
            let (ra, rb) = (level.roots[e.u], level.roots[e.v]);
            assert!(e.w as u128 >= d[ra][rb]);
            let walk = level.expand_edge(&g, e.u, e.v);
            assert_eq!((walk[0], *walk.last().unwrap()), (ra, rb));
            assert_eq!(walk_length(&g, &walk), Some(e.w));
        }
    }
}

#[test]
fn shortcutting_examples() {
    assert_eq!(shortcut_cycles(&[0, 1, 2, 1, 3]), vec![0, 1, 3]);
    assert_eq!(shortcut_cycles(&[0, 1, 0, 2]), vec![0, 2]);
    assert_eq!(shortcut_cycles(&[4]), vec![4]);
}

#[test]
fn find_path_examples() {
    let g = Graph::from_edges(2, [(0, 1, 7)]);
    let p = find_path(&g, 0, 1, 0.1, 0).unwrap();
    assert_eq!(p.vertices, vec![0, 1]);
    assert_eq!(p.length, 7);
    let p = find_path(&g, 1, 1, 0.1, 0).unwrap();
    assert_eq!(p.vertices, vec![1]);
    assert_eq!(p.length, 0);
    assert!(matches!(find_path(&g, 0, 2, 0.1, 0), Err(PathError::VertexOutOfRange(2))));
    assert!(matches!(find_path(&g, 0, 1, 0.6, 0), Err(PathError::EpsilonOutOfRange(_))));
}

#[test]
fn shortest_path_on_a_path_graph_is_the_path() {
    let g = path(9);
    let p = approx_shortest_path(&g, 0, 8, 0.2, 3).unwrap();
    assert_eq!(p.vertices, (0..9).collect::<Vec<_>>());
    assert_eq!(p.length, 8);
}

#[test]
fn paths_are_simple_and_near_shortest_on_small_graphs() {
    for seed in 0..8u64 {
        let n = 6 + seed as usize % 5;
        let g = random_graph(seed + 300, n, 2, 15);
        let (s, t) = (0, n - 1);
        let p = approx_shortest_path(&g, s, t, 0.2, seed).unwrap();
        let dist = dijkstra(&g, s)[t];
        assert_eq!(walk_length(&g, &p.vertices), Some(p.length));
        assert!(is_simple(&p.vertices));
        assert_eq!((p.vertices[0], *p.vertices.last().unwrap()), (s, t));
        assert!(p.length >= dist);
        assert!(p.length as f64 <= 1.2 * dist as f64 + 1e-9, "{} vs {dist}", p.length);
    }
}

#[test]
fn walk_on_a_deterministic_path_flow() {
    let g = path(3);
    let b = [1.0, 0.0, -1.0];
    let stats = random_walk_length_check(&g, &[1.0, 1.0], &b, 1000, 10, 0).unwrap();
    assert_eq!(stats.mean, 2.0);
    assert_eq!(stats.std_error, 0.0);
    assert_eq!(stats.flow_cost, 2.0);
}

#[test]
fn walk_through_a_planted_cycle() {
    // 0 -> 1 -> 2 -> 0 circulates one extra unit beside the 0 -> 3 unit
    let g = Graph::from_edges(4, [(0, 1, 1), (1, 2, 1), (0, 2, 1), (0, 3, 1)]);
    let f = flow_on(&g, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0), (0, 3, 1.0)]);
    let stats = random_walk_length_check(&g, &f, &[1.0, 0.0, 0.0, -1.0], 100_000, 10_000, 4).unwrap();
    assert_eq!(stats.flow_cost, 4.0);
    assert!((stats.mean - 4.0).abs() <= 3.0 * stats.std_error, "{stats:?}");
}

#[test]
fn walk_demand_is_validated() {
    let g = path(3);
    assert!(matches!(
        random_walk_length_check(&g, &[1.0, 1.0], &[2.0, 0.0, -2.0], 10, 10, 0),
        Err(PathError::InvalidWalkDemand)
    ));
    assert!(matches!(
        random_walk_length_check(&g, &[1.0, 0.0], &[1.0, 0.0, -1.0], 10, 10, 0),
        Err(PathError::StuckVertex(1))
    ));
}

#[test]
fn walks_reproduce_solver_flow_costs() {
    let g = random_graph(12, 20, 3, 30);
    let demand = Demand::unit(20, 3, 17);
    let sol: FlowSolution<f64> = min_cost_flow(&g, &demand, 0.1, 2).unwrap();
    let stats = random_walk_length_check(&g, &sol.f, demand.values(), 100_000, 1_000_000, 9).unwrap();
    assert!((stats.mean - stats.flow_cost).abs() <= 3.0 * stats.std_error + 1e-9, "{stats:?}");
}

/// Optimal unit `s → t` flow spread over every shortest path, each path
/// weighted equally.
fn shortest_path_flow(g: &Graph, s: usize, t: usize) -> Vec<f64> {
    let d = floyd(g);
    let n = g.n();
    let on_dag = |u: usize, v: usize, w: u64| d[s][u] + w as u128 + d[v][t] == d[s][t];
    // path counts from s and to t along the shortest-path DAG
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| d[s][v]);
    let mut from_s = vec![0.0; n];
    from_s[s] = 1.0;
    for &v in &order {
        for e in g.edges() {
            for (a, b) in [(e.u, e.v), (e.v, e.u)] {
                if b == v && on_dag(a, b, e.w) {
                    from_s[v] += from_s[a];
                }
            }
        }
    }
    let mut to_t = vec![0.0; n];
    to_t[t] = 1.0;
    for &v in order.iter().rev() {
        for e in g.edges() {
            for (a, b) in [(e.u, e.v), (e.v, e.u)] {
                if a == v && on_dag(a, b, e.w) {
                    to_t[v] += to_t[b];
                }
            }
        }
    }
    g.edges()
        .iter()
        .map(|e| {
            let fwd = if on_dag(e.u, e.v, e.w) { from_s[e.u] * to_t[e.v] } else { 0.0 };
            let back = if on_dag(e.v, e.u, e.w) { from_s[e.v] * to_t[e.u] } else { 0.0 };
            (fwd - back) / to_t[s]
        })
        .collect()
}

#[test]
fn contraction_preserves_expected_distance_with_an_exact_flow() {
    let seeds = 4000;
    for case in 0..6u64 {
        let n = 5 + case as usize;
        // small weights give many tied shortest paths
        let g = random_graph(case + 50, n, 2, 3);
        let (s, t) = (0, n - 1);
        let f = shortest_path_flow(&g, s, t);
        let dist = dijkstra(&g, s)[t] as f64;
        let total: f64 = (0..seeds)
            .map(|seed| {
                let p = sample_pointers(&g, &f, t, seed).unwrap();
                let level = contract(&g, &p, t);
                let (a, b) = (level.contracted[s], level.contracted[t]);
                level.depth[s] as f64 + dijkstra(&level.graph, a)[b] as f64
            })
            .sum();
        let mean = total / seeds as f64;
        assert!(mean <= dist * 1.05, "case {case}: mean {mean} vs distance {dist}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn shortcut_output_is_a_simple_subwalk(walk in prop::collection::vec(0usize..6, 1..20)) {
        let out = shortcut_cycles(&walk);
        prop_assert!(is_simple(&out));
        prop_assert_eq!(out[0], walk[0]);
        prop_assert_eq!(out.last(), walk.last());
        prop_assert!(out.len() <= walk.len());
    }

    #[test]
    fn shortcutting_never_lengthens_a_graph_walk(seed in any::<u64>(), steps in 1usize..40) {
        let g = random_graph(seed, 8, 2, 9);
        let mut walk = vec![0];
        let mut x = 0;
        for i in 0..steps {
            let nb: Vec<usize> = g.neighbors(x).map(|(v, _)| v).collect();
            x = nb[(seed as usize).wrapping_add(i * 31) % nb.len()];
            walk.push(x);
        }
        let out = shortcut_cycles(&walk);
        prop_assert!(walk_length(&g, &out).unwrap() <= walk_length(&g, &walk).unwrap());
    }

    #[test]
    fn found_paths_are_valid(n in 2usize..14, seed in any::<u64>()) {
        let g = random_graph(seed, n, 2, 25);
        let t = n - 1;
        let p = find_path(&g, 0, t, 0.2, seed).unwrap();
        prop_assert!(is_simple(&p.vertices));
        prop_assert_eq!(walk_length(&g, &p.vertices), Some(p.length));
        prop_assert_eq!(p.vertices[0], 0);
        prop_assert_eq!(*p.vertices.last().unwrap(), t);
        prop_assert!(p.length >= dijkstra(&g, 0)[t]);
    }
}

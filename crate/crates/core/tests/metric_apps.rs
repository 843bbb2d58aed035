mod common;

use common::{floyd, random_graph, wilson};
use hopflow_core::emulator::Emulator;
use hopflow_core::graph::dijkstra;
use hopflow_core::metric::{
    approx_sssp, assign_shifted, bourgain_embed, default_t_rep, low_diameter_decomposition,
    SHIFT_QUANTUM,
};
use hopflow_core::{build_emulator, preprocess, Graph, PreprocessConfig};
use proptest::prelude::*;

fn emulator(g: &Graph, shallow: bool, seed: u64) -> Emulator {
    let mut cfg = PreprocessConfig::new(PreprocessConfig::default_k(g.n()));
    if shallow {
        cfg = cfg.with_constants(0.6, 1.0);
    }
    build_emulator(&preprocess(g, cfg, seed).unwrap())
}

#[test]
fn sssp_is_exact_on_a_single_level() {
    let g = random_graph(2, 40, 3, 20);
    let em = emulator(&g, false, 1);
    assert_eq!(em.t, 0);
    for s in [0, 13, 39] {
        let got = approx_sssp(&em, s).unwrap();
        let want: Vec<u128> = dijkstra(&g, s).into_iter().map(u128::from).collect();
        assert_eq!(got, want);
    }
}

#[test]
fn sssp_sandwich_on_256_vertices() {
    let g = random_graph(256, 256, 3, 100);
    for shallow in [false, true] {
        let em = emulator(&g, shallow, 4);
        for s in [0, 100, 255] {
            let out = approx_sssp(&em, s).unwrap();
            assert_eq!(out[s], 0);
            assert_eq!(out, em.set_distance(&[(s, 0)]));
            for (v, &d) in dijkstra(&g, s).iter().enumerate() {
                let d = d as u128;
                assert!(d <= out[v] && out[v] <= em.stretch_bound * d);
            }
        }
    }
    assert!(approx_sssp(&emulator(&g, false, 0), 256).is_err());
}

#[test]
fn two_vertex_embedding() {
    let g = Graph::from_edges(2, [(0, 1, 5)]);
    let em = emulator(&g, false, 0);
    let emb = bourgain_embed(&em, 3, 9).unwrap();
    for (a, b) in emb.row(0).iter().zip(emb.row(1)) {
        assert!(a.abs_diff(*b) <= 5);
    }
    assert_eq!(emb.l1(0, 0), 0);
    assert!(bourgain_embed(&em, 0, 9).is_err());
}

#[test]
fn embedding_on_128_vertices() {
    let n = 128;
    let g = random_graph(128, n, 3, 40);
    let em = emulator(&g, true, 7);
    let t_rep = default_t_rep(n);
    let emb = bourgain_embed(&em, t_rep, 3).unwrap();
    assert_eq!(emb.d, t_rep * 7);
    let de = floyd(&em.graph);
    let dg = floyd(&g);
    let diam = de.iter().flatten().copied().max().unwrap();
    let mut worst: f64 = 0.0;
    for u in 0..n {
        for &x in emb.row(u) {
            assert!(x as u128 <= diam);
        }
        for v in 0..n {
            for (a, b) in emb.row(u).iter().zip(emb.row(v)) {
                assert!(a.abs_diff(*b) as u128 <= de[u][v]);
            }
            if u != v {
                worst = worst.max(emb.l1(u, v) as f64 / dg[u][v] as f64);
            }
        }
    }
    let cap = em.stretch_bound as f64 * emb.d as f64;
    assert!(worst <= cap, "distortion {worst} above {cap}");
    let json = emb.to_json();
    assert_eq!(json["n"], n);
    assert_eq!(json["rows"].as_array().unwrap().len(), n);
    assert_eq!(json["Delta"], emb.delta);
}

#[test]
fn single_vertex_decomposition() {
    let g = Graph::from_edges(1, std::iter::empty());
    let em = emulator(&g, false, 0);
    let d = low_diameter_decomposition(&em, 0.5, 1).unwrap();
    assert_eq!(d.center, vec![0]);
    assert!(low_diameter_decomposition(&em, 0.0, 1).is_err());
    assert!(low_diameter_decomposition(&em, 1.5, 1).is_err());
}

#[test]
fn constant_shifts_give_voronoi_cells() {
    let g = random_graph(12, 60, 3, 9);
    let em = emulator(&g, true, 2);
    let de = floyd(&em.graph);
    let centers = assign_shifted(&em, &[5; 60]);
    for v in 0..60 {
        // every vertex is its own nearest vertex, so cells are singletons
        assert_eq!(centers[v], v);
    }
    // with one dominant shift everyone joins that vertex unless a
    // competing offset is closer
    let mut quanta = vec![0u128; 60];
    quanta[17] = 1_000_000 * 1_000_000_000_000;
    let centers = assign_shifted(&em, &quanta);
    assert!(centers.iter().all(|&c| c == 17));
    // two equal shifts: Voronoi cells of {17, 40} with ties to 17
    quanta[40] = quanta[17];
    let centers = assign_shifted(&em, &quanta);
    for v in 0..60 {
        let want = if de[v][17] <= de[v][40] { 17 } else { 40 };
        assert_eq!(centers[v], want, "vertex {v}");
    }
}

#[test]
fn separation_probability_on_256_vertices() {
    let n = 256;
    let g = random_graph(31, n, 3, 3);
    let em = emulator(&g, false, 5);
    let de = floyd(&em.graph);
    let beta = 0.1;
    let runs = 200;
    let mut split = vec![0usize; g.m()];
    for seed in 0..runs {
        let d = low_diameter_decomposition(&em, beta, seed).unwrap();
        let top = d.shift.iter().copied().fold(0.0, f64::max);
        for (v, &c) in d.center.iter().enumerate() {
            assert!(de[v][c] as f64 <= top + 1e-9, "v={v} too far from its centre");
        }
        for (e, edge) in g.edges().iter().enumerate() {
            split[e] += (d.center[edge.u] != d.center[edge.v]) as usize;
        }
    }
    let mut worst: f64 = 0.0;
    for (e, edge) in g.edges().iter().enumerate() {
        let dist = de[edge.u][edge.v] as f64;
        let (lo, _) = wilson(split[e], runs as usize, 2.576);
        assert!(lo <= 2.0 * beta * dist, "edge {e}: {} splits", split[e]);
        worst = worst.max(split[e] as f64 / runs as f64 / (beta * dist));
    }
    assert!(worst.is_finite());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn decomposition_is_a_seeded_partition(n in 1usize..80, seed in any::<u64>(), beta in 0.01f64..1.0) {
        let g = random_graph(seed, n, 2, 20);
        let em = emulator(&g, true, seed);
        let a = low_diameter_decomposition(&em, beta, seed).unwrap();
        let b = low_diameter_decomposition(&em, beta, seed).unwrap();
        prop_assert_eq!(&a, &b);
        let clusters = a.clusters();
        let total: usize = clusters.iter().map(|(_, m)| m.len()).sum();
        prop_assert_eq!(total, n);
        for (c, members) in &clusters {
            prop_assert!(members.contains(c), "centre belongs to its own cluster");
        }
        let quanta: Vec<u128> = a.shift.iter().map(|s| (s / SHIFT_QUANTUM).round() as u128).collect();
        prop_assert_eq!(assign_shifted(&em, &quanta), a.center.clone());
        let lifted: Vec<u128> = quanta.iter().map(|q| q + 12_345).collect();
        prop_assert_eq!(assign_shifted(&em, &lifted), a.center);
    }

    #[test]
    fn embedding_coordinates_are_lipschitz(n in 2usize..60, seed in any::<u64>(), t_rep in 1usize..5) {
        let g = random_graph(seed, n, 2, 30);
        let em = emulator(&g, true, seed);
        let emb = bourgain_embed(&em, t_rep, seed).unwrap();
        let de = floyd(&em.graph);
        for u in 0..n {
            for v in 0..n {
                for (a, b) in emb.row(u).iter().zip(emb.row(v)) {
                    prop_assert!(a.abs_diff(*b) as u128 <= de[u][v]);
                }
            }
        }
        prop_assert_eq!(bourgain_embed(&em, t_rep, seed).unwrap(), emb);
    }
}

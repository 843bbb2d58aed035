//! Applications of the emulator: approximate single-source distances,
//! an ℓ₁ embedding built from distances to random vertex sets, and a
//! low-diameter decomposition from exponentially shifted clusters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emulator::Emulator;
use crate::graph::{bellman_ford_labeled, VertexId};
use crate::scalar::Weight;
use crate::seeds;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("vertex {0} out of range")]
    VertexOutOfRange(VertexId),
    #[error("beta = {0} outside (0, 1]")]
    BetaOutOfRange(f64),
    #[error("repetition count must be positive")]
    ZeroRepetitions,
    #[error("coordinate {0} does not fit in 64 bits")]
    CoordinateOverflow(u128),
}

/// Approximate distances from `s`: the emulator's exact distances, which
/// dominate the input distances by at most the emulator stretch.
pub fn approx_sssp(em: &Emulator, s: VertexId) -> Result<Vec<u128>, MetricError> {
    if s >= em.n() {
        return Err(MetricError::VertexOutOfRange(s));
    }
    Ok(em.set_distance(&[(s, 0)]))
}

/// Integer coordinates for every vertex, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Embedding {
    pub n: usize,
    pub d: usize,
    /// Largest coordinate.
    pub delta: u64,
    pub coords: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct EmbeddingJson {
    n: usize,
    d: usize,
    #[serde(rename = "Delta")]
    delta: u64,
    rows: Vec<Vec<u64>>,
}

impl Embedding {
    pub fn from_rows(rows: Vec<Vec<u64>>) -> Self {
        let n = rows.len();
        let d = rows.first().map(Vec::len).unwrap_or(0);
        assert!(rows.iter().all(|r| r.len() == d), "ragged rows");
        let coords: Vec<u64> = rows.concat();
        let delta = coords.iter().copied().max().unwrap_or(0);
        Self {
            n,
            d,
            delta,
            coords,
        }
    }

    pub fn row(&self, v: VertexId) -> &[u64] {
        &self.coords[v * self.d..(v + 1) * self.d]
    }

    pub fn l1(&self, u: VertexId, v: VertexId) -> u128 {
        self.row(u)
            .iter()
            .zip(self.row(v))
            .map(|(&a, &b)| a.abs_diff(b) as u128)
            .sum()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(EmbeddingJson {
            n: self.n,
            d: self.d,
            delta: self.delta,
            rows: (0..self.n).map(|v| self.row(v).to_vec()).collect(),
        })
        .expect("embedding serializes")
    }
}

/// `4 ceil(log2 n)` repetitions per scale.
pub fn default_t_rep(n: usize) -> usize {
    4 * crate::graph::ceil_log2(n).max(1)
}

/// For each scale `i = 1..ceil(log2 n)` and repetition `j = 1..t_rep`, samples
/// a vertex set at rate `2^-i` and uses the emulator distance to it as one
/// coordinate. Empty samples are redrawn once, then replaced by a single
/// random vertex.
pub fn bourgain_embed(em: &Emulator, t_rep: usize, seed: u64) -> Result<Embedding, MetricError> {
    if t_rep == 0 {
        return Err(MetricError::ZeroRepetitions);
    }
    let n = em.n();
    let scales = crate::graph::ceil_log2(n).max(1);
    let d = scales * t_rep;
    let columns: Vec<Vec<u128>> = (0..d)
        .into_par_iter()
        .map(|c| {
            let i = c / t_rep + 1;
            let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, c as u64));
            let rate = 0.5f64.powi(i as i32);
            let mut sample = Vec::new();
            for _ in 0..2 {
                sample = (0..n).filter(|_| rng.random::<f64>() < rate).collect();
                if !sample.is_empty() {
                    break;
                }
            }
            if sample.is_empty() {
                sample.push(rng.random_range(0..n));
            }
            let sources: Vec<(VertexId, u128)> = sample.into_iter().map(|v| (v, 0)).collect();
            em.set_distance(&sources)
        })
        .collect();

    let mut coords = vec![0u64; n * d];
    for (c, col) in columns.iter().enumerate() {
        for v in 0..n {
            coords[v * d + c] =
                u64::try_from(col[v]).map_err(|_| MetricError::CoordinateOverflow(col[v]))?;
        }
    }
    let delta = coords.iter().copied().max().unwrap_or(0);
    Ok(Embedding {
        n,
        d,
        delta,
        coords,
    })
}

/// Resolution of the exponential shifts.
pub const SHIFT_QUANTUM: f64 = 1e-12;
const QUANTA_PER_UNIT: u128 = 1_000_000_000_000;

/// Cluster assignment: `center[v]` is the vertex whose region contains `v`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub center: Vec<VertexId>,
    pub beta: f64,
    /// The shifts `δ_v`, already quantized.
    pub shift: Vec<f64>,
}

impl Decomposition {
    /// Members of every cluster, keyed by center, in center order.
    pub fn clusters(&self) -> Vec<(VertexId, Vec<VertexId>)> {
        let mut map: std::collections::BTreeMap<VertexId, Vec<VertexId>> = Default::default();
        for (v, &c) in self.center.iter().enumerate() {
            map.entry(c).or_default().push(v);
        }
        map.into_iter().collect()
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters().len()
    }
}

/// Draws `δ_v ~ Exp(β)` for every vertex and assigns each vertex to the
/// minimiser of `dist(v, u) - δ_u`, ties to the smaller id.
pub fn low_diameter_decomposition(
    em: &Emulator,
    beta: f64,
    seed: u64,
) -> Result<Decomposition, MetricError> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(MetricError::BetaOutOfRange(beta));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let quanta: Vec<u128> = (0..em.n())
        .map(|_| {
            let u: f64 = rng.random();
            let x = -(1.0 - u).ln() / beta;
            (x / SHIFT_QUANTUM).round() as u128
        })
        .collect();
    let center = assign_shifted(em, &quanta);
    Ok(Decomposition {
        center,
        beta,
        shift: quanta.iter().map(|&q| q as f64 * SHIFT_QUANTUM).collect(),
    })
}

/// Assignment for given shifts expressed in units of [`SHIFT_QUANTUM`]:
/// a single hop-limited relaxation from all vertices with offsets
/// `max δ - δ_v`, carrying the source id as a tie-breaking label.
pub fn assign_shifted(em: &Emulator, quanta: &[u128]) -> Vec<VertexId> {
    assert_eq!(quanta.len(), em.n());
    let top = quanta.iter().copied().max().unwrap_or(0);
    let scaled = em
        .graph
        .map_weights(|w: u128| w.saturating_mul(QUANTA_PER_UNIT));
    let init: Vec<(u128, VertexId)> = quanta
        .iter()
        .enumerate()
        .map(|(v, &q)| (top - q, v))
        .collect();
    bellman_ford_labeled(&scaled, init, em.hop_bound)
        .into_iter()
        .map(|(d, c)| {
            debug_assert!(!d.is_infinite());
            c
        })
        .collect()
}

//! Low-hop emulators, distance oracles, metric embeddings and a
//! preconditioned multiplicative-weights solver for uncapacitated
//! minimum-cost flow on weighted undirected graphs.

pub mod emulator;
pub mod flow;
pub mod graph;
pub mod metric;
pub mod path;
pub mod precond;
pub mod scalar;
pub mod seeds;
pub mod subemulator;

pub use emulator::{build_emulator, preprocess, Emulator, PreprocessConfig};
pub use flow::{min_cost_flow, Demand, SolverConfig};
pub use graph::{GraphError, Path, VertexId, W_MAX};
pub use path::{approx_shortest_path, find_path, PathConfig};
pub use scalar::{Real, Weight};

/// Input graphs: integer weights up to [`W_MAX`].
pub type Graph = graph::WeightedGraph<u64>;
/// Emulator graphs: level scaling can exceed 64 bits.
pub type EmulatorGraph = graph::WeightedGraph<u128>;
/// Level tower over input graphs.
pub type LevelStack = emulator::LevelStack<u64>;
/// Subemulator of an input graph.
pub type Subemulator = subemulator::SubemulatorResult<u64>;
/// Double-precision compressed vector.
pub type CompressedVec = precond::CompressedVector<f64>;
/// Double-precision compressed matrix.
pub type CompressedMat = precond::CompressedMatrix<f64>;
/// Double-precision flow.
pub type FlowSolution = flow::FlowSolution<f64>;

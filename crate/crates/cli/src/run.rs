use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use hopflow_core::emulator::EmulatorError;
use hopflow_core::flow::{min_cost_flow_with, FlowError};
use hopflow_core::graph::{dijkstra, load_graph};
use hopflow_core::metric::{self, MetricError};
use hopflow_core::path::{approx_shortest_path_with, PathError};
use hopflow_core::subemulator::{build_subemulator, SubemulatorError};
use hopflow_core::{
    build_emulator, preprocess, seeds, Demand, Graph, GraphError, PathConfig, PreprocessConfig,
    SolverConfig,
};
use serde_json::{json, Value};
use thiserror::Error;

use crate::args::{Cli, Command, Common, EmulatorCommand, OracleCommand};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("thread pool: {0}")]
    Threads(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("vertex {vertex} out of range for n = {n}")]
    Vertex { vertex: usize, n: usize },
    #[error("demand file: {0}")]
    Demand(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Emulator(#[from] EmulatorError),
    #[error(transparent)]
    Subemulator(#[from] SubemulatorError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Path(#[from] PathError),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Threads(_) => "threads",
            CliError::Io { .. } => "io",
            CliError::Vertex { .. } => "vertex",
            CliError::Demand(_) => "demand",
            CliError::Graph(_) => "graph",
            CliError::Emulator(_) => "emulator",
            CliError::Subemulator(_) => "subemulator",
            CliError::Metric(_) => "metric",
            CliError::Flow(_) => "flow",
            CliError::Path(_) => "path",
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let c = &cli.common;
    let g = load(c)?;
    let n = g.n();
    let seed = c.seed.unwrap_or_else(auto_seed);
    let k = c.k.unwrap_or_else(|| PreprocessConfig::default_k(n));

    let (name, result) = match &cli.command {
        Command::Emulator(EmulatorCommand::Build { save }) => {
            let stack = preprocess(&g, PreprocessConfig::new(k), seed)?;
            let em = build_emulator(&stack);
            if let Some(path) = save {
                write_file(path, &em.to_text())?;
            }
            let result = json!({
                "n": n,
                "m": g.m(),
                "emulator_edges": em.graph.m(),
                "levels": stack.t(),
                "ball_sizes": stack.ball_sizes(),
                "level_edges": stack.edge_counts(),
                "hop_bound": em.hop_bound,
                "stretch_bound": em.stretch_bound.to_string(),
            });
            ("emulator build", result)
        }
        Command::Oracle(OracleCommand::Query { u, v }) => {
            check_vertex(*u, n)?;
            check_vertex(*v, n)?;
            let stack = preprocess(&g, PreprocessConfig::new(k), seed)?;
            let trace = stack.query_traced(*u, *v);
            let result = json!({
                "u": u,
                "v": v,
                "distance": trace.distance,
                "levels_visited": trace.levels_visited,
            });
            ("oracle query", result)
        }
        Command::Sssp { source } => {
            check_vertex(*source, n)?;
            let em = emulator(&g, k, seed)?;
            let dist = metric::approx_sssp(&em, *source)?;
            let dist: Vec<Value> = dist.into_iter().map(wide).collect();
            ("sssp", json!({ "source": source, "distances": dist }))
        }
        Command::Embed => {
            let em = emulator(&g, k, seed)?;
            let t_rep = c.t_rep.unwrap_or_else(|| metric::default_t_rep(n));
            let emb = metric::bourgain_embed(&em, t_rep, seeds::derive(seed, 1))?;
            ("embed", emb.to_json())
        }
        Command::Ldd => {
            let em = emulator(&g, k, seed)?;
            let d = metric::low_diameter_decomposition(&em, c.beta, seeds::derive(seed, 2))?;
            let result = json!({
                "beta": d.beta,
                "clusters": d.cluster_count(),
                "center": d.center,
            });
            ("ldd", result)
        }
        Command::Subemulator { b } => {
            let sub = build_subemulator(&g, *b, seed)?;
            let edges: Vec<Value> = sub
                .graph
                .edges()
                .iter()
                .map(|e| json!([sub.vertices[e.u], sub.vertices[e.v], e.w]))
                .collect();
            let result = json!({
                "b": b,
                "vertices": sub.vertices,
                "leader": sub.leader,
                "dist_to_leader": sub.dist_to_leader,
                "edges": edges,
            });
            ("subemulator", result)
        }
        Command::Flow { demand } => {
            let text = read_file(demand)?;
            let values: Vec<f64> =
                serde_json::from_str(&text).map_err(|e| CliError::Demand(e.to_string()))?;
            if values.len() != n {
                return Err(CliError::Demand(format!(
                    "{} entries for {} vertices",
                    values.len(),
                    n
                )));
            }
            let b = Demand::new(values)?;
            let sol = min_cost_flow_with(&g, &b, &solver(c, c.epsilon), seed)?;
            let edges: Vec<Value> = g
                .edges()
                .iter()
                .zip(&sol.f)
                .filter(|(_, &f)| f != 0.0)
                .map(|(e, &f)| json!([e.u, e.v, f]))
                .collect();
            let result = json!({
                "edges": edges,
                "cost": sol.cost,
                "residual": sol.residual,
                "iterations": sol.iterations,
            });
            ("flow", result)
        }
        Command::Stpath { s, t } => {
            let config = PathConfig {
                solver: solver(c, c.epsilon),
                ..PathConfig::default()
            };
            let path = approx_shortest_path_with(&g, *s, *t, c.epsilon, seed, &config)?;
            ("stpath", json!({ "vertices": path.vertices, "length": path.length }))
        }
        Command::Bench { sources } => {
            let csv = bench(&g, k, seed, *sources)?;
            return emit(c, &csv);
        }
    };

    let body = json!({
        "command": name,
        "seed": seed,
        "k": k,
        "epsilon": c.epsilon,
        "version": env!("CARGO_PKG_VERSION"),
        "result": result,
    });
    let mut text = serde_json::to_string_pretty(&body).expect("json values serialize");
    text.push('\n');
    emit(c, &text)
}

fn load(c: &Common) -> Result<Graph, CliError> {
    let path = c
        .graph
        .as_deref()
        .ok_or_else(|| CliError::Usage("--graph <FILE> is required".into()))?;
    Ok(load_graph(&read_file(path)?)?)
}

fn solver(c: &Common, epsilon: f64) -> SolverConfig {
    let mut cfg = SolverConfig::new(epsilon);
    cfg.k = c.k;
    cfg.t_rep = c.t_rep.or(cfg.t_rep);
    cfg
}

fn emulator(g: &Graph, k: f64, seed: u64) -> Result<hopflow_core::Emulator, CliError> {
    let stack = preprocess(g, PreprocessConfig::new(k), seed)?;
    Ok(build_emulator(&stack))
}

fn check_vertex(vertex: usize, n: usize) -> Result<(), CliError> {
    if vertex < n {
        Ok(())
    } else {
        Err(CliError::Vertex { vertex, n })
    }
}

/// Emulator distances can exceed what JSON readers hold exactly.
fn wide(x: u128) -> Value {
    match u64::try_from(x) {
        Ok(x) => json!(x),
        Err(_) => json!(x.to_string()),
    }
}

fn auto_seed() -> u64 {
    let nanos = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos() as u64)
        .unwrap_or(0);
    seeds::derive(nanos, std::process::id() as u64)
}

fn bench(g: &Graph, k: f64, seed: u64, sources: usize) -> Result<String, CliError> {
    let n = g.n();
    let picks: Vec<usize> = (0..sources.max(1)).map(|i| i * n / sources.max(1)).collect();
    let mut csv = String::from("task,n,m,runs,millis\n");
    let mut row = |task: &str, runs: usize, start: Instant| {
        let ms = start.elapsed().as_secs_f64() * 1e3;
        let _ = writeln!(csv, "{task},{n},{},{runs},{ms:.3}", g.m());
    };

    let start = Instant::now();
    for &s in &picks {
        std::hint::black_box(dijkstra(g, s));
    }
    row("dijkstra", picks.len(), start);

    let start = Instant::now();
    let stack = preprocess(g, PreprocessConfig::new(k), seed)?;
    row("preprocess", 1, start);

    let start = Instant::now();
    let em = build_emulator(&stack);
    row("build_emulator", 1, start);

    let start = Instant::now();
    for &s in &picks {
        std::hint::black_box(metric::approx_sssp(&em, s)?);
    }
    row("emulator_sssp", picks.len(), start);

    let start = Instant::now();
    for &s in &picks {
        for v in 0..n {
            std::hint::black_box(stack.query(s, v));
        }
    }
    row("oracle_query", picks.len() * n, start);
    Ok(csv)
}

fn emit(c: &Common, text: &str) -> Result<(), CliError> {
    match &c.out {
        Some(path) => write_file(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

use super::{GraphError, WeightedGraph, W_MAX};
use crate::scalar::Weight;

/// Parses the edge-list text format and validates it as a connected graph
/// with weights in `[0, W_MAX]`.
pub fn load_graph(text: &str) -> Result<WeightedGraph<u64>, GraphError> {
    let g = parse_edge_list::<u64>(text, Some(W_MAX))?;
    g.ensure_connected()?;
    Ok(g)
}

/// Parses the edge-list text format without the connectivity check.
///
/// Lines whose first non-blank character is `#` are ignored, as are blank
/// lines. `max_weight` caps accepted weights.
pub fn parse_edge_list<W: Weight>(
    text: &str,
    max_weight: Option<W>,
) -> Result<WeightedGraph<W>, GraphError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (hline, header) = lines.next().ok_or(GraphError::Empty)?;
    let malformed = |line: usize, content: &str| GraphError::MalformedLine {
        line,
        content: content.to_string(),
    };
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 2 {
        return Err(malformed(hline, header));
    }
    let n: usize = head[0].parse().map_err(|_| malformed(hline, header))?;
    let m: usize = head[1].parse().map_err(|_| malformed(hline, header))?;
    if n == 0 {
        return Err(GraphError::Empty);
    }
    if n > u32::MAX as usize {
        return Err(malformed(hline, header));
    }

    let mut edges = Vec::with_capacity(m);
    for (line, content) in lines {
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(malformed(line, content));
        }
        let u: usize = fields[0].parse().map_err(|_| malformed(line, content))?;
        let v: usize = fields[1].parse().map_err(|_| malformed(line, content))?;
        for vertex in [u, v] {
            if vertex >= n {
                return Err(GraphError::VertexOutOfRange { line, vertex, n });
            }
        }
        let w = parse_weight::<W>(fields[2], line, content, max_weight)?;
        if u == v {
            return Err(GraphError::SelfLoop { line, vertex: u });
        }
        edges.push((u, v, w));
    }
    if edges.len() != m {
        return Err(GraphError::EdgeCountMismatch {
            declared: m,
            found: edges.len(),
        });
    }
    Ok(WeightedGraph::from_edges(n, edges))
}

fn parse_weight<W: Weight>(
    field: &str,
    line: usize,
    content: &str,
    max_weight: Option<W>,
) -> Result<W, GraphError> {
    let malformed = || GraphError::MalformedLine {
        line,
        content: content.to_string(),
    };
    if let Some(rest) = field.strip_prefix('-') {
        let magnitude: u128 = rest.parse().map_err(|_| malformed())?;
        if magnitude == 0 {
            return Ok(W::zero());
        }
        let weight = i128::try_from(magnitude).map(|x| -x).unwrap_or(i128::MIN);
        return Err(GraphError::NegativeWeight { line, weight });
    }
    let raw: u128 = field.parse().map_err(|_| malformed())?;
    let cap = max_weight.map(|m| m.as_u128()).unwrap_or(W::max_value().as_u128());
    if raw > cap {
        return Err(GraphError::WeightTooLarge {
            line,
            weight: raw,
            max: cap,
        });
    }
    W::from(raw).ok_or(GraphError::WeightTooLarge {
        line,
        weight: raw,
        max: cap,
    })
}

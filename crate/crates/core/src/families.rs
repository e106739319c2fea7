//! Finite truncations of the graph families used as worked examples.
//!
//! Each constructor returns the graph together with its truncation
//! boundary: the retained vertices that lost adjacent edges when the
//! infinite family was cut off. Level sets containing a boundary vertex
//! are truncation-sensitive.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, VertexId};

#[derive(Clone, Debug)]
pub struct Truncated {
    pub graph: DirectedGraph,
    pub boundary: BTreeSet<VertexId>,
    pub parameter: usize,
}

fn build(
    vertices: Vec<String>,
    edges: Vec<(String, String, String)>,
    boundary: &[String],
    parameter: usize,
) -> Truncated {
    let graph = DirectedGraph::new(vertices, edges).expect("family graphs are well formed");
    let boundary = boundary
        .iter()
        .map(|b| graph.vertex_id(b).expect("boundary vertex exists"))
        .collect();
    Truncated {
        graph,
        boundary,
        parameter,
    }
}

fn e(id: String, s: String, r: String) -> (String, String, String) {
    (id, s, r)
}

/// The twelve-plus vertex example: a cycle through `v2, v3, v4`, a loop at
/// `v8`, and a fan `v9 → v_k` for `k = 10..=n`.
pub fn example_graph(n: usize) -> Result<Truncated> {
    if n < 10 {
        return Err(Error::NotApplicable(format!(
            "example graph needs n >= 10, got {n}"
        )));
    }
    let v = |i: usize| format!("v{i}");
    let vertices = (1..=n).map(v).collect();
    let fixed = [
        (1, 1, 2),
        (2, 2, 3),
        (3, 2, 4),
        (4, 4, 3),
        (5, 4, 5),
        (6, 5, 6),
        (7, 5, 7),
        (8, 8, 8),
        (9, 3, 9),
    ];
    let mut edges: Vec<_> = fixed
        .iter()
        .map(|&(i, s, r)| e(format!("e{i}"), v(s), v(r)))
        .collect();
    edges.extend((10..=n).map(|k| e(format!("e{k}"), v(9), v(k))));
    Ok(build(vertices, edges, &[v(9)], n))
}

/// The two-sided line `… → v₋₁ → v₀ → v₁ → …` cut to `v₋ₖ … vₖ`, with
/// `eᵢ: vᵢ₋₁ → vᵢ`.
pub fn two_sided_line(k: usize) -> Truncated {
    let k = k as i64;
    let v = |i: i64| format!("v{i}");
    let vertices = (-k..=k).map(v).collect();
    let edges = (-k + 1..=k)
        .map(|i| e(format!("e{i}"), v(i - 1), v(i)))
        .collect();
    build(vertices, edges, &[v(-k), v(k)], k as usize)
}

/// The star with center `v0` and edges `eᵢ: v0 → vᵢ`, `i = 1..=n`.
pub fn star(n: usize) -> Truncated {
    let v = |i: usize| format!("v{i}");
    let vertices = (0..=n).map(v).collect();
    let edges = (1..=n).map(|i| e(format!("e{i}"), v(0), v(i))).collect();
    build(vertices, edges, &[v(0)], n)
}

/// `v1 → v2 → … → vn` with `eᵢ: vᵢ → vᵢ₊₁`. Not a truncation.
pub fn directed_path(n: usize) -> DirectedGraph {
    let v = |i: usize| format!("v{i}");
    DirectedGraph::new(
        (1..=n).map(v),
        (1..n).map(|i| e(format!("e{i}"), v(i), v(i + 1))),
    )
    .expect("path graph is well formed")
}

/// Resolves a family name (`example`, `line`, `star`) at truncation `n`.
pub fn by_name(name: &str, n: usize) -> Result<Truncated> {
    match name {
        "example" => example_graph(n),
        "line" => Ok(two_sided_line(n)),
        "star" => Ok(star(n)),
        "path" => Ok(Truncated {
            graph: directed_path(n),
            boundary: BTreeSet::new(),
            parameter: n,
        }),
        other => Err(Error::NotApplicable(format!("unknown graph family `{other}`"))),
    }
}

#![allow(dead_code)]

use std::collections::BTreeMap;

use branchsys::graph::DirectedGraph;
use rand::seq::SliceRandom;
use rand::Rng;

/// Random tree on `n` vertices: vertex `i` hangs off a uniformly chosen
/// earlier vertex, each edge oriented by a coin flip, and the vertex list
/// shuffled so document order carries no structure.
pub fn random_tree(rng: &mut impl Rng, n: usize, prefix: &str) -> DirectedGraph {
    let name = |i: usize| format!("{prefix}v{i}");
    let mut edges = Vec::new();
    for i in 1..n {
        let parent = rng.random_range(0..i);
        let (s, r) = if rng.random_bool(0.5) { (parent, i) } else { (i, parent) };
        edges.push((format!("{prefix}e{i}"), name(s), name(r)));
    }
    edges.shuffle(rng);
    let mut vertices: Vec<String> = (0..n).map(name).collect();
    vertices.shuffle(rng);
    DirectedGraph::new(vertices, edges).expect("tree is well formed")
}

/// Random acyclic multigraph: edges only go forward in a hidden random
/// order, with occasional parallel edges and isolated vertices.
pub fn random_dag(rng: &mut impl Rng, n: usize) -> DirectedGraph {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let density = rng.random_range(0.1..0.5);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(density) {
                let copies = if rng.random_bool(0.1) { 2 } else { 1 };
                for _ in 0..copies {
                    let id = format!("e{}", edges.len() + 1);
                    edges.push((id, format!("v{}", order[a]), format!("v{}", order[b])));
                }
            }
        }
    }
    DirectedGraph::new((0..n).map(|i| format!("v{i}")), edges).expect("dag is well formed")
}

/// A dimension in `1..=max` for every sink that has an edge; isolated
/// vertices get one half the time.
pub fn random_sink_dims(rng: &mut impl Rng, g: &DirectedGraph, max: usize) -> BTreeMap<String, usize> {
    let mut dims = BTreeMap::new();
    for v in g.vertices().filter(|&v| g.is_sink(v)) {
        if !g.is_isolated(v) || rng.random_bool(0.5) {
            dims.insert(g.vertex_name(v).to_string(), rng.random_range(1..=max));
        }
    }
    dims
}

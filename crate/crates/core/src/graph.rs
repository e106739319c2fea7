//! Directed multigraphs `E = (E⁰, E¹, r, s)` and the undirected path
//! machinery built on top of them.
//!
//! Vertices and edges are addressed by dense indices ([`VertexId`],
//! [`EdgeId`]) in document order; string ids are kept for I/O. All
//! orderings in this crate are index orderings, so every construction is
//! reproducible from the input document alone.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VertexId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeId(pub usize);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub id: String,
    pub src: VertexId,
    pub rng: VertexId,
}

impl Edge {
    pub fn is_loop(&self) -> bool {
        self.src == self.rng
    }

    /// The endpoint opposite to `v`, or `None` if `v` is not an endpoint.
    pub fn other_end(&self, v: VertexId) -> Option<VertexId> {
        if self.src == v {
            Some(self.rng)
        } else if self.rng == v {
            Some(self.src)
        } else {
            None
        }
    }

    pub fn touches(&self, v: VertexId) -> bool {
        self.src == v || self.rng == v
    }
}

/// A finite directed multigraph. Parallel edges and loops are allowed.
#[derive(Clone, Debug)]
pub struct DirectedGraph {
    vertices: Vec<String>,
    edges: Vec<Edge>,
    vertex_index: HashMap<String, VertexId>,
    edge_index: HashMap<String, EdgeId>,
    emitted: Vec<Vec<EdgeId>>,
    received: Vec<Vec<EdgeId>>,
}

impl PartialEq for DirectedGraph {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.edges == other.edges
    }
}

impl DirectedGraph {
    /// Builds a graph from vertex ids and `(edge id, source id, range id)`
    /// triples, in the order given.
    pub fn new<V, E>(vertices: V, edges: E) -> Result<Self>
    where
        V: IntoIterator,
        V::Item: Into<String>,
        E: IntoIterator<Item = (String, String, String)>,
    {
        let vertices: Vec<String> = vertices.into_iter().map(Into::into).collect();
        let mut vertex_index = HashMap::with_capacity(vertices.len());
        for (i, v) in vertices.iter().enumerate() {
            if vertex_index.insert(v.clone(), VertexId(i)).is_some() {
                return Err(Error::DuplicateId {
                    kind: "vertex",
                    id: v.clone(),
                    location: format!("vertices[{i}]"),
                });
            }
        }

        let mut built = Vec::new();
        let mut edge_index = HashMap::new();
        for (i, (id, src, rng)) in edges.into_iter().enumerate() {
            let location = format!("edges[{i}]");
            let lookup = |name: &str, endpoint| {
                vertex_index
                    .get(name)
                    .copied()
                    .ok_or_else(|| Error::DanglingEndpoint {
                        edge: id.clone(),
                        endpoint,
                        vertex: name.to_string(),
                        location: location.clone(),
                    })
            };
            let src = lookup(&src, "source")?;
            let rng = lookup(&rng, "range")?;
            if edge_index.insert(id.clone(), EdgeId(i)).is_some() {
                return Err(Error::DuplicateId {
                    kind: "edge",
                    id,
                    location,
                });
            }
            built.push(Edge { id, src, rng });
        }

        let mut emitted = vec![Vec::new(); vertices.len()];
        let mut received = vec![Vec::new(); vertices.len()];
        for (i, e) in built.iter().enumerate() {
            emitted[e.src.0].push(EdgeId(i));
            received[e.rng.0].push(EdgeId(i));
        }

        Ok(Self {
            vertices,
            edges: built,
            vertex_index,
            edge_index,
            emitted,
            received,
        })
    }

    /// Convenience constructor for tests and fixtures.
    pub fn from_names(vertices: &[&str], edges: &[(&str, &str, &str)]) -> Result<Self> {
        Self::new(
            vertices.iter().copied(),
            edges
                .iter()
                .map(|(e, s, r)| (e.to_string(), s.to_string(), r.to_string())),
        )
    }

    /// Both graphs side by side. Ids must not collide.
    pub fn disjoint_union(&self, other: &DirectedGraph) -> Result<Self> {
        let triples = |g: &DirectedGraph| {
            g.edges
                .iter()
                .map(|e| {
                    (
                        e.id.clone(),
                        g.vertices[e.src.0].clone(),
                        g.vertices[e.rng.0].clone(),
                    )
                })
                .collect::<Vec<_>>()
        };
        Self::new(
            self.vertices.iter().chain(&other.vertices).cloned(),
            triples(self).into_iter().chain(triples(other)),
        )
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> impl ExactSizeIterator<Item = VertexId> + Clone {
        (0..self.vertices.len()).map(VertexId)
    }

    pub fn edge_ids(&self) -> impl ExactSizeIterator<Item = EdgeId> + Clone {
        (0..self.edges.len()).map(EdgeId)
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e.0]
    }

    pub fn source(&self, e: EdgeId) -> VertexId {
        self.edges[e.0].src
    }

    pub fn range(&self, e: EdgeId) -> VertexId {
        self.edges[e.0].rng
    }

    pub fn vertex_name(&self, v: VertexId) -> &str {
        &self.vertices[v.0]
    }

    pub fn edge_name(&self, e: EdgeId) -> &str {
        &self.edges[e.0].id
    }

    pub fn vertex_id(&self, name: &str) -> Result<VertexId> {
        self.vertex_index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownVertex(name.to_string()))
    }

    pub fn edge_id(&self, name: &str) -> Result<EdgeId> {
        self.edge_index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownEdge(name.to_string()))
    }

    pub(crate) fn check_vertex(&self, v: VertexId) -> Result<()> {
        if v.0 < self.vertices.len() {
            Ok(())
        } else {
            Err(Error::UnknownVertex(v.to_string()))
        }
    }

    /// `s⁻¹(v)` in edge order.
    pub fn emitted(&self, v: VertexId) -> &[EdgeId] {
        &self.emitted[v.0]
    }

    /// `r⁻¹(v)` in edge order.
    pub fn received(&self, v: VertexId) -> &[EdgeId] {
        &self.received[v.0]
    }

    /// `r⁻¹(v) ∪ s⁻¹(v)` in edge order; a loop appears once.
    pub fn incident(&self, v: VertexId) -> Vec<EdgeId> {
        let mut out: Vec<EdgeId> = self.emitted[v.0]
            .iter()
            .chain(&self.received[v.0])
            .copied()
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn is_sink(&self, v: VertexId) -> bool {
        self.emitted[v.0].is_empty()
    }

    /// True when `v ∉ r(E¹) ∪ s(E¹)`.
    pub fn is_isolated(&self, v: VertexId) -> bool {
        self.emitted[v.0].is_empty() && self.received[v.0].is_empty()
    }

    /// `r(E¹) ∪ s(E¹)`.
    pub fn touched_vertices(&self) -> BTreeSet<VertexId> {
        self.vertices().filter(|&v| !self.is_isolated(v)).collect()
    }

    pub fn names<'a>(&'a self, vs: impl IntoIterator<Item = &'a VertexId>) -> Vec<String> {
        vs.into_iter()
            .map(|&v| self.vertex_name(v).to_string())
            .collect()
    }

    pub fn edge_names<'a>(&'a self, es: impl IntoIterator<Item = &'a EdgeId>) -> Vec<String> {
        es.into_iter()
            .map(|&e| self.edge_name(e).to_string())
            .collect()
    }

    /// The subgraph spanned by `vertices` and every edge with both
    /// endpoints in it. Relative order is preserved.
    pub fn induced_subgraph(&self, vertices: &BTreeSet<VertexId>) -> DirectedGraph {
        let names = vertices.iter().map(|&v| self.vertex_name(v).to_string());
        let edges = self
            .edges
            .iter()
            .filter(|e| vertices.contains(&e.src) && vertices.contains(&e.rng))
            .map(|e| {
                (
                    e.id.clone(),
                    self.vertex_name(e.src).to_string(),
                    self.vertex_name(e.rng).to_string(),
                )
            });
        DirectedGraph::new(names, edges).expect("subgraph of a valid graph is valid")
    }

    pub fn to_document(&self) -> GraphDocument {
        GraphDocument {
            vertices: self.vertices.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeRecord {
                    id: e.id.clone(),
                    src: self.vertex_name(e.src).to_string(),
                    rng: self.vertex_name(e.rng).to_string(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("graph serializes")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub vertices: Vec<String>,
    pub edges: Vec<EdgeRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub id: String,
    pub src: String,
    pub rng: String,
}

/// Parses the JSON graph format
/// `{"vertices": [...], "edges": [{"id", "src", "rng"}, ...]}`.
pub fn parse_graph(text: &str) -> Result<DirectedGraph> {
    let doc: GraphDocument = serde_json::from_str(text).map_err(|e| Error::malformed(&e))?;
    DirectedGraph::new(
        doc.vertices,
        doc.edges.into_iter().map(|e| (e.id, e.src, e.rng)),
    )
}

/// Undirected adjacency: `a ≠ b` and some edge has endpoint set `{a, b}`.
pub fn adjacent(g: &DirectedGraph, a: VertexId, b: VertexId) -> Result<bool> {
    g.check_vertex(a)?;
    g.check_vertex(b)?;
    if a == b {
        return Ok(false);
    }
    Ok(g.incident(a).iter().any(|&e| g.edge(e).touches(b)))
}

/// An undirected path `(u₀…uₙ; e₁…eₙ)` with pairwise distinct edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Path {
    pub vertices: Vec<VertexId>,
    pub edges: Vec<EdgeId>,
}

impl Path {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn is_cycle(&self) -> bool {
        self.vertices.first() == self.vertices.last()
    }

    /// Re-checks the path invariants against `g`.
    pub fn is_valid_in(&self, g: &DirectedGraph) -> bool {
        let n = self.edges.len();
        if n == 0 || self.vertices.len() != n + 1 {
            return false;
        }
        if self.vertices.iter().any(|v| v.0 >= g.vertex_count())
            || self.edges.iter().any(|e| e.0 >= g.edge_count())
        {
            return false;
        }
        let distinct: BTreeSet<_> = self.edges.iter().collect();
        if distinct.len() != n {
            return false;
        }
        self.edges.iter().enumerate().all(|(i, &e)| {
            let edge = g.edge(e);
            let (a, b) = (self.vertices[i], self.vertices[i + 1]);
            (edge.src == a && edge.rng == b) || (edge.src == b && edge.rng == a)
        })
    }
}

/// Enumerates up to `limit` paths from `u` to `v` in lexicographic order of
/// their edge sequences. Vertices may repeat; edges never do.
pub fn find_paths(g: &DirectedGraph, u: VertexId, v: VertexId, limit: usize) -> Result<Vec<Path>> {
    g.check_vertex(u)?;
    g.check_vertex(v)?;
    let mut found = Vec::new();
    if limit == 0 {
        return Ok(found);
    }
    let mut used = vec![false; g.edge_count()];
    let mut vertices = vec![u];
    let mut edges = Vec::new();
    walk(g, v, limit, &mut used, &mut vertices, &mut edges, &mut found);
    Ok(found)
}

fn walk(
    g: &DirectedGraph,
    target: VertexId,
    limit: usize,
    used: &mut [bool],
    vertices: &mut Vec<VertexId>,
    edges: &mut Vec<EdgeId>,
    found: &mut Vec<Path>,
) {
    let here = *vertices.last().expect("walk starts at a vertex");
    if !edges.is_empty() && here == target {
        found.push(Path {
            vertices: vertices.clone(),
            edges: edges.clone(),
        });
        if found.len() >= limit {
            return;
        }
    }
    for e in g.incident(here) {
        if used[e.0] {
            continue;
        }
        let next = g.edge(e).other_end(here).expect("incident edge");
        used[e.0] = true;
        vertices.push(next);
        edges.push(e);
        walk(g, target, limit, used, vertices, edges, found);
        edges.pop();
        vertices.pop();
        used[e.0] = false;
        if found.len() >= limit {
            return;
        }
    }
}

/// P-simplicity via the cycle-free characterization: no loop, and no edge
/// closes an undirected cycle (parallel edges count as a cycle).
pub fn is_p_simple(g: &DirectedGraph) -> bool {
    let mut uf = UnionFind::<usize>::new(g.vertex_count());
    g.edge_ids().all(|e| {
        let edge = g.edge(e);
        !edge.is_loop() && uf.union(edge.src.0, edge.rng.0)
    })
}

/// `E⁰ = (⋃ Zᵢ) ∪ R`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentDecomposition {
    pub components: Vec<BTreeSet<VertexId>>,
    pub isolated: BTreeSet<VertexId>,
}

impl ComponentDecomposition {
    pub fn component_of(&self, v: VertexId) -> Option<&BTreeSet<VertexId>> {
        self.components.iter().find(|c| c.contains(&v))
    }
}

/// Connected maximal subsets of `r(E¹) ∪ s(E¹)`, ordered by smallest
/// member, plus the isolated vertices.
pub fn decompose(g: &DirectedGraph) -> ComponentDecomposition {
    let mut uf = UnionFind::<usize>::new(g.vertex_count());
    for e in g.edge_ids() {
        let edge = g.edge(e);
        uf.union(edge.src.0, edge.rng.0);
    }
    let mut by_root: HashMap<usize, BTreeSet<VertexId>> = HashMap::new();
    let mut isolated = BTreeSet::new();
    for v in g.vertices() {
        if g.is_isolated(v) {
            isolated.insert(v);
        } else {
            by_root.entry(uf.find(v.0)).or_default().insert(v);
        }
    }
    let mut components: Vec<_> = by_root.into_values().collect();
    components.sort_by_key(|c| *c.first().expect("components are nonempty"));
    ComponentDecomposition {
        components,
        isolated,
    }
}

/// Edges with both endpoints in `vertices`, in edge order.
pub fn edges_within(g: &DirectedGraph, vertices: &BTreeSet<VertexId>) -> Vec<EdgeId> {
    g.edge_ids()
        .filter(|&e| {
            let edge = g.edge(e);
            vertices.contains(&edge.src) && vertices.contains(&edge.rng)
        })
        .collect()
}

/// Finds a directed cycle, returning one vertex on it.
pub fn find_directed_cycle(g: &DirectedGraph) -> Option<VertexId> {
    topological_order(g).err()
}

/// Vertices ordered so that every edge goes from an earlier to a later
/// vertex (sources first). Ties break by vertex index. On failure returns
/// a vertex lying on a directed cycle.
pub fn topological_order(g: &DirectedGraph) -> std::result::Result<Vec<VertexId>, VertexId> {
    let mut indegree: Vec<usize> = g.vertices().map(|v| g.received(v).len()).collect();
    let mut ready: BTreeSet<VertexId> = g.vertices().filter(|v| indegree[v.0] == 0).collect();
    let mut order = Vec::with_capacity(g.vertex_count());
    while let Some(v) = ready.pop_first() {
        order.push(v);
        for &e in g.emitted(v) {
            let r = g.range(e);
            indegree[r.0] -= 1;
            if indegree[r.0] == 0 {
                ready.insert(r);
            }
        }
    }
    if order.len() == g.vertex_count() {
        Ok(order)
    } else {
        // Walk forward along remaining edges until a vertex repeats.
        let start = g
            .vertices()
            .find(|v| indegree[v.0] > 0)
            .expect("leftover vertex");
        let mut seen = BTreeSet::new();
        let mut v = start;
        while seen.insert(v) {
            v = g
                .received(v)
                .iter()
                .map(|&e| g.source(e))
                .find(|s| indegree[s.0] > 0)
                .expect("vertex on a cycle has a pending predecessor");
        }
        Err(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_edge() -> DirectedGraph {
        DirectedGraph::from_names(&["u", "v"], &[("e", "u", "v")]).unwrap()
    }

    #[test]
    fn parses_smallest_graph() {
        let g = parse_graph(r#"{"vertices":["u","v"],"edges":[{"id":"e","src":"u","rng":"v"}]}"#)
            .unwrap();
        assert_eq!(g.vertex_count(), 2);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.source(EdgeId(0)), VertexId(0));
        assert_eq!(g.range(EdgeId(0)), VertexId(1));
    }

    #[test]
    fn dangling_endpoint_is_reported_with_location() {
        let err = parse_graph(r#"{"vertices":["u"],"edges":[{"id":"e","src":"u","rng":"w"}]}"#)
            .unwrap_err();
        match err {
            Error::DanglingEndpoint {
                vertex, location, ..
            } => {
                assert_eq!(vertex, "w");
                assert_eq!(location, "edges[0]");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = parse_graph(r#"{"vertices":["u","u"],"edges":[]}"#).unwrap_err();
        assert!(matches!(err, Error::DuplicateId { kind: "vertex", .. }));
        let err = parse_graph(
            r#"{"vertices":["u","v"],"edges":[{"id":"e","src":"u","rng":"v"},{"id":"e","src":"v","rng":"u"}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::DuplicateId { kind: "edge", .. }));
    }

    #[test]
    fn unknown_fields_and_syntax_errors_rejected() {
        let err = parse_graph(r#"{"vertices":[],"edges":[],"extra":1}"#).unwrap_err();
        assert!(matches!(err, Error::Malformed { .. }));
        let err = parse_graph("{\n\"vertices\": [\"u\",").unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 2, .. }));
    }

    #[test]
    fn loop_is_not_self_adjacency() {
        let g = DirectedGraph::from_names(&["v"], &[("e", "v", "v")]).unwrap();
        assert!(!adjacent(&g, VertexId(0), VertexId(0)).unwrap());
        assert!(!is_p_simple(&g));
    }

    #[test]
    fn adjacency_basics() {
        let g = single_edge();
        assert!(adjacent(&g, VertexId(0), VertexId(1)).unwrap());
        assert!(adjacent(&g, VertexId(1), VertexId(0)).unwrap());
        assert!(matches!(
            adjacent(&g, VertexId(0), VertexId(5)),
            Err(Error::UnknownVertex(_))
        ));
    }

    #[test]
    fn single_edge_has_one_path() {
        let g = single_edge();
        let paths = find_paths(&g, VertexId(0), VertexId(1), 10).unwrap();
        assert_eq!(
            paths,
            vec![Path {
                vertices: vec![VertexId(0), VertexId(1)],
                edges: vec![EdgeId(0)]
            }]
        );
        assert!(!paths[0].is_cycle());
    }

    #[test]
    fn parallel_edges_give_two_paths() {
        let g = DirectedGraph::from_names(&["u", "v"], &[("e", "u", "v"), ("f", "v", "u")]).unwrap();
        let paths = find_paths(&g, VertexId(0), VertexId(1), 10).unwrap();
        assert_eq!(paths.len(), 2);
        assert!(paths.iter().all(|p| p.is_valid_in(&g)));
        assert!(!is_p_simple(&g));
    }

    #[test]
    fn paths_respect_limit_and_order() {
        // Triangle u-v-w with a pendant: u→v two ways.
        let g = DirectedGraph::from_names(
            &["u", "v", "w"],
            &[("a", "u", "v"), ("b", "v", "w"), ("c", "w", "u")],
        )
        .unwrap();
        let paths = find_paths(&g, VertexId(0), VertexId(1), 10).unwrap();
        assert_eq!(paths.len(), 2);
        assert_eq!(paths[0].edges, vec![EdgeId(0)]);
        assert_eq!(paths[1].edges, vec![EdgeId(2), EdgeId(1)]);
        assert_eq!(find_paths(&g, VertexId(0), VertexId(1), 1).unwrap().len(), 1);
        let cycles = find_paths(&g, VertexId(0), VertexId(0), 10).unwrap();
        assert!(cycles.iter().all(Path::is_cycle));
        assert_eq!(cycles.len(), 2);
    }

    #[test]
    fn decompose_trivial_cases() {
        let g = DirectedGraph::from_names(&["v"], &[]).unwrap();
        let d = decompose(&g);
        assert!(d.components.is_empty());
        assert_eq!(d.isolated, BTreeSet::from([VertexId(0)]));

        let d = decompose(&single_edge());
        assert_eq!(d.components, vec![BTreeSet::from([VertexId(0), VertexId(1)])]);
        assert!(d.isolated.is_empty());
    }

    #[test]
    fn topological_order_detects_cycles() {
        let g = DirectedGraph::from_names(
            &["a", "b", "c", "d"],
            &[("x", "a", "b"), ("y", "b", "c"), ("z", "c", "b"), ("w", "d", "a")],
        )
        .unwrap();
        let v = find_directed_cycle(&g).unwrap();
        assert!(v == VertexId(1) || v == VertexId(2));

        let dag = DirectedGraph::from_names(&["a", "b", "c"], &[("x", "c", "a"), ("y", "a", "b")])
            .unwrap();
        assert_eq!(
            topological_order(&dag).unwrap(),
            vec![VertexId(2), VertexId(0), VertexId(1)]
        );
    }
}

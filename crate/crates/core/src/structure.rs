//! Extreme-vertex peeling and the level structure it induces.
//!
//! Round `n` removes the extreme vertices of the graph left after rounds
//! `1..n` together with their unique edges; the removed sets are the level
//! `n` vertices `Xₙ` and edges `Yₙ`. Peeling stops at the first round with
//! no extreme vertex. For a finite connected cycle-free component the
//! leftover is empty or a single center vertex, and every leveled vertex
//! below the top level has exactly one neighbor of higher level. The
//! direction of that neighbor's edge makes the vertex *final* (edge points
//! in) or *initial* (edge points out).

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::graph::{decompose, is_p_simple, ComponentDecomposition, DirectedGraph, EdgeId, VertexId};
use crate::report::{CheckEntry, Report};

/// Live vertex and edge masks over a fixed graph.
struct Peeling<'g> {
    graph: &'g DirectedGraph,
    live_vertices: Vec<bool>,
    live_edges: Vec<bool>,
}

impl<'g> Peeling<'g> {
    fn new(graph: &'g DirectedGraph) -> Self {
        Self {
            graph,
            live_vertices: vec![true; graph.vertex_count()],
            live_edges: vec![true; graph.edge_count()],
        }
    }

    fn live_incident(&self, v: VertexId) -> Vec<EdgeId> {
        self.graph
            .incident(v)
            .into_iter()
            .filter(|e| self.live_edges[e.0])
            .collect()
    }

    /// Extreme vertices of the live graph, each with its extreme edge.
    fn extreme(&self) -> BTreeMap<VertexId, EdgeId> {
        self.graph
            .vertices()
            .filter(|v| self.live_vertices[v.0])
            .filter_map(|v| match self.live_incident(v).as_slice() {
                [e] if !self.graph.edge(*e).is_loop() => Some((v, *e)),
                _ => None,
            })
            .collect()
    }

    fn remove(&mut self, extreme: &BTreeMap<VertexId, EdgeId>) {
        for (v, e) in extreme {
            self.live_vertices[v.0] = false;
            self.live_edges[e.0] = false;
        }
    }
}

/// Vertices with exactly one adjacent edge, that edge not a loop.
pub fn extreme_vertices(g: &DirectedGraph) -> BTreeSet<VertexId> {
    Peeling::new(g).extreme().into_keys().collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelDecomposition {
    pub vertex_levels: Vec<BTreeSet<VertexId>>,
    pub edge_levels: Vec<BTreeSet<EdgeId>>,
    pub residual_vertices: BTreeSet<VertexId>,
    pub residual_edges: BTreeSet<EdgeId>,
    level: Vec<Option<usize>>,
}

impl LevelDecomposition {
    /// `m`, the number of nonempty rounds.
    pub fn max_level(&self) -> usize {
        self.vertex_levels.len()
    }

    /// 1-based level of `v`, `None` when unleveled.
    pub fn level_of(&self, v: VertexId) -> Option<usize> {
        self.level.get(v.0).copied().flatten()
    }

    /// `Xₙ` for 1-based `n`.
    pub fn level(&self, n: usize) -> &BTreeSet<VertexId> {
        &self.vertex_levels[n - 1]
    }

    pub fn leveled(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.vertex_levels.iter().flatten().copied()
    }

    /// Highest level reached inside `comp` (0 if none of it is leveled).
    pub fn max_level_within(&self, comp: &BTreeSet<VertexId>) -> usize {
        comp.iter().filter_map(|&v| self.level_of(v)).max().unwrap_or(0)
    }

    /// Levels (1-based) whose vertex set meets `boundary`.
    pub fn truncation_sensitive_levels(&self, boundary: &BTreeSet<VertexId>) -> Vec<usize> {
        self.vertex_levels
            .iter()
            .enumerate()
            .filter(|(_, x)| !x.is_disjoint(boundary))
            .map(|(i, _)| i + 1)
            .collect()
    }
}

pub fn level_decomposition(g: &DirectedGraph) -> LevelDecomposition {
    let mut peeling = Peeling::new(g);
    let mut vertex_levels = Vec::new();
    let mut edge_levels = Vec::new();
    let mut level = vec![None; g.vertex_count()];
    loop {
        let extreme = peeling.extreme();
        if extreme.is_empty() {
            break;
        }
        for v in extreme.keys() {
            level[v.0] = Some(vertex_levels.len() + 1);
        }
        vertex_levels.push(extreme.keys().copied().collect());
        edge_levels.push(extreme.values().copied().collect());
        peeling.remove(&extreme);
    }
    LevelDecomposition {
        vertex_levels,
        edge_levels,
        residual_vertices: g.vertices().filter(|v| peeling.live_vertices[v.0]).collect(),
        residual_edges: g.edge_ids().filter(|e| peeling.live_edges[e.0]).collect(),
        level,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Classification {
    AllLevels,
    LevelsPlusCenter(VertexId),
    Irregular,
}

impl Classification {
    pub fn center(&self) -> Option<VertexId> {
        match self {
            Classification::LevelsPlusCenter(c) => Some(*c),
            _ => None,
        }
    }

    pub fn to_json(&self, g: &DirectedGraph) -> Value {
        match self {
            Classification::AllLevels => json!({"kind": "AllLevels"}),
            Classification::LevelsPlusCenter(c) => {
                json!({"kind": "LevelsPlusCenter", "center": g.vertex_name(*c)})
            }
            Classification::Irregular => json!({"kind": "Irregular"}),
        }
    }
}

fn ensure_component(g: &DirectedGraph, comp: &BTreeSet<VertexId>) -> Result<()> {
    if decompose(g).components.iter().any(|c| c == comp) {
        Ok(())
    } else {
        Err(Error::NotAComponent(format!("{:?}", g.names(comp))))
    }
}

fn classify_unchecked(d: &LevelDecomposition, comp: &BTreeSet<VertexId>) -> Classification {
    let unleveled: Vec<VertexId> = comp
        .iter()
        .copied()
        .filter(|&v| d.level_of(v).is_none())
        .collect();
    match unleveled.as_slice() {
        [] => Classification::AllLevels,
        [c] => Classification::LevelsPlusCenter(*c),
        _ => Classification::Irregular,
    }
}

pub fn classify(
    g: &DirectedGraph,
    d: &LevelDecomposition,
    comp: &BTreeSet<VertexId>,
) -> Result<Classification> {
    ensure_component(g, comp)?;
    Ok(classify_unchecked(d, comp))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Role {
    Final,
    Initial,
    Center,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VertexRole {
    pub role: Role,
    pub witness_edge: Option<EdgeId>,
}

/// Rank used to compare neighbors: the level, with the center one above
/// the top level of its component.
fn rank(d: &LevelDecomposition, c: &Classification, top: usize, v: VertexId) -> Option<usize> {
    match d.level_of(v) {
        Some(n) => Some(n),
        None if c.center() == Some(v) => Some(top + 1),
        None => None,
    }
}

/// Non-loop edges at `v` leading to a vertex of strictly higher rank, or at
/// equal rank when `v` sits on the top level of an all-levels component.
fn upward_edges(
    g: &DirectedGraph,
    d: &LevelDecomposition,
    c: &Classification,
    top: usize,
    v: VertexId,
) -> Vec<EdgeId> {
    let own = rank(d, c, top, v).expect("upward edges are asked of ranked vertices");
    let same_level_counts = *c == Classification::AllLevels && own == top;
    g.incident(v)
        .into_iter()
        .filter(|&e| {
            let Some(w) = g.edge(e).other_end(v).filter(|&w| w != v) else {
                return false;
            };
            match rank(d, c, top, w) {
                Some(r) => r > own || (same_level_counts && r == own),
                None => true,
            }
        })
        .collect()
}

/// Final/initial roles of every vertex of a non-irregular component.
pub fn vertex_roles(
    g: &DirectedGraph,
    d: &LevelDecomposition,
    comp: &BTreeSet<VertexId>,
    c: &Classification,
) -> Result<BTreeMap<VertexId, VertexRole>> {
    if *c == Classification::Irregular {
        return Err(Error::NotApplicable(
            "component classifies as Irregular".into(),
        ));
    }
    let top = d.max_level_within(comp);
    let mut roles = BTreeMap::new();
    for &v in comp {
        if c.center() == Some(v) {
            roles.insert(
                v,
                VertexRole {
                    role: Role::Center,
                    witness_edge: None,
                },
            );
            continue;
        }
        if d.level_of(v).is_none() {
            return Err(Error::LevelViolation {
                vertex: g.vertex_name(v).to_string(),
                reason: "unleveled vertex outside the center".into(),
            });
        }
        let up = upward_edges(g, d, c, top, v);
        let [e] = up.as_slice() else {
            return Err(Error::LevelViolation {
                vertex: g.vertex_name(v).to_string(),
                reason: format!(
                    "expected exactly one edge to a higher level, found {:?}",
                    g.edge_names(&up)
                ),
            });
        };
        let role = if g.range(*e) == v {
            Role::Final
        } else {
            Role::Initial
        };
        roles.insert(
            v,
            VertexRole {
                role,
                witness_edge: Some(*e),
            },
        );
    }
    Ok(roles)
}

/// Leveled vertices of `comp` ordered by (level, id).
pub fn level_schedule(d: &LevelDecomposition, comp: &BTreeSet<VertexId>) -> Vec<VertexId> {
    let mut order: Vec<VertexId> = comp
        .iter()
        .copied()
        .filter(|&v| d.level_of(v).is_some())
        .collect();
    order.sort_by_key(|&v| (d.level_of(v), v));
    order
}

fn neighbors(g: &DirectedGraph, v: VertexId) -> BTreeSet<VertexId> {
    g.incident(v)
        .into_iter()
        .filter_map(|e| g.edge(e).other_end(v))
        .filter(|&w| w != v)
        .collect()
}

fn edges_between(g: &DirectedGraph, a: VertexId, b: VertexId) -> Vec<EdgeId> {
    g.incident(a)
        .into_iter()
        .filter(|&e| g.edge(e).other_end(a) == Some(b))
        .collect()
}

/// Structural checks of one component. Items: `1`, `2a`, `2b`, `3a`,
/// `3b`, `4`.
pub fn check_component(
    g: &DirectedGraph,
    d: &LevelDecomposition,
    comp: &BTreeSet<VertexId>,
) -> Report {
    let c = classify_unchecked(d, comp);
    let top = d.max_level_within(comp);
    let level_or_inf = |w: VertexId| d.level_of(w).unwrap_or(usize::MAX);
    let name = |v: VertexId| g.vertex_name(v).to_string();
    let mut report = Report::default();

    // 1: at most one neighbor of level >= n.
    let witness = comp.iter().find_map(|&v| {
        let n = d.level_of(v)?;
        let high: Vec<_> = neighbors(g, v)
            .into_iter()
            .filter(|&w| level_or_inf(w) >= n)
            .collect();
        (high.len() > 1).then(|| json!({"vertex": name(v), "level": n, "neighbors": g.names(&high)}))
    });
    report.push(CheckEntry::from_witness("1", witness));

    // 2a / 3a: exactly one neighbor of strictly higher level below the top.
    let below_top = |center: Option<VertexId>| {
        comp.iter().find_map(|&v| {
            let n = d.level_of(v)?;
            if n >= top {
                return None;
            }
            let higher: Vec<_> = neighbors(g, v)
                .into_iter()
                .filter(|&w| level_or_inf(w) > n && (d.level_of(w).is_some() || Some(w) == center))
                .collect();
            (higher.len() != 1)
                .then(|| json!({"vertex": name(v), "level": n, "higher": g.names(&higher)}))
        })
    };

    match c {
        Classification::AllLevels => {
            report.push(CheckEntry::from_witness("2a", below_top(None)));
            let top_set: Vec<VertexId> = comp
                .iter()
                .copied()
                .filter(|&v| d.level_of(v) == Some(top))
                .collect();
            let witness = match top_set.as_slice() {
                [a, b] => {
                    let joining = edges_between(g, *a, *b);
                    (joining.len() != 1).then(|| {
                        json!({"top": g.names(&top_set), "edges": g.edge_names(&joining)})
                    })
                }
                _ => Some(json!({"top": g.names(&top_set)})),
            };
            report.push(CheckEntry::from_witness("2b", witness));
            report.push(CheckEntry::not_applicable("3a"));
            report.push(CheckEntry::not_applicable("3b"));
        }
        Classification::LevelsPlusCenter(center) => {
            report.push(CheckEntry::not_applicable("2a"));
            report.push(CheckEntry::not_applicable("2b"));
            report.push(CheckEntry::from_witness("3a", below_top(Some(center))));
            let witness = comp.iter().find_map(|&v| {
                if d.level_of(v) != Some(top) {
                    return None;
                }
                let joining = edges_between(g, v, center);
                (joining.len() != 1)
                    .then(|| json!({"vertex": name(v), "edges": g.edge_names(&joining)}))
            });
            report.push(CheckEntry::from_witness("3b", witness));
        }
        Classification::Irregular => {
            for item in ["2a", "2b", "3a", "3b"] {
                report.push(CheckEntry::not_applicable(item));
            }
        }
    }

    // 4: finite, connected and P-simple components are never irregular.
    if is_p_simple(&g.induced_subgraph(comp)) {
        let witness = (c == Classification::Irregular).then(|| {
            let unleveled: Vec<_> = comp
                .iter()
                .copied()
                .filter(|&v| d.level_of(v).is_none())
                .collect();
            json!({"unleveled": g.names(&unleveled)})
        });
        report.push(CheckEntry::from_witness("4", witness));
    } else {
        report.push(CheckEntry::not_applicable("4"));
    }
    report
}

/// Per-component structural report for the whole graph.
pub fn check_structure(g: &DirectedGraph, d: &LevelDecomposition) -> Vec<(BTreeSet<VertexId>, Report)> {
    decompose(g)
        .components
        .into_iter()
        .map(|comp| {
            let report = check_component(g, d, &comp);
            (comp, report)
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct ComponentStructure {
    pub vertices: BTreeSet<VertexId>,
    pub p_simple: bool,
    pub classification: Classification,
    pub roles: std::result::Result<BTreeMap<VertexId, VertexRole>, String>,
    pub checks: Report,
}

/// Everything the structural pass knows about a graph.
#[derive(Clone, Debug)]
pub struct StructureAnalysis {
    pub decomposition: ComponentDecomposition,
    pub levels: LevelDecomposition,
    pub components: Vec<ComponentStructure>,
}

impl StructureAnalysis {
    pub fn passed(&self) -> bool {
        self.components.iter().all(|c| c.checks.passed())
    }

    pub fn to_json(&self, g: &DirectedGraph, boundary: &BTreeSet<VertexId>) -> Value {
        let levels = &self.levels;
        let components: Vec<Value> = self
            .components
            .iter()
            .map(|c| {
                let roles = match &c.roles {
                    Ok(roles) => {
                        let map: serde_json::Map<String, Value> = roles
                            .iter()
                            .map(|(v, r)| {
                                (
                                    g.vertex_name(*v).to_string(),
                                    json!({
                                        "role": r.role,
                                        "witnessEdge": r.witness_edge.map(|e| g.edge_name(e)),
                                    }),
                                )
                            })
                            .collect();
                        Value::Object(map)
                    }
                    Err(reason) => json!({"notApplicable": reason}),
                };
                json!({
                    "vertices": g.names(&c.vertices),
                    "pSimple": c.p_simple,
                    "maxLevel": levels.max_level_within(&c.vertices),
                    "classification": c.classification.to_json(g),
                    "roles": roles,
                    "checks": c.checks,
                })
            })
            .collect();
        json!({
            "components": components,
            "isolated": g.names(&self.decomposition.isolated),
            "levels": {
                "vertexLevels": levels.vertex_levels.iter().map(|x| g.names(x)).collect::<Vec<_>>(),
                "edgeLevels": levels.edge_levels.iter().map(|y| g.edge_names(y)).collect::<Vec<_>>(),
                "residualVertices": g.names(&levels.residual_vertices),
                "residualEdges": g.edge_names(&levels.residual_edges),
                "truncationBoundary": g.names(boundary),
                "truncationSensitiveLevels": levels.truncation_sensitive_levels(boundary),
            },
            "passed": self.passed(),
        })
    }
}

pub fn analyze(g: &DirectedGraph) -> StructureAnalysis {
    let decomposition = decompose(g);
    let levels = level_decomposition(g);
    let components = decomposition
        .components
        .iter()
        .map(|comp| {
            let classification = classify_unchecked(&levels, comp);
            let p_simple = is_p_simple(&g.induced_subgraph(comp));
            let roles = if classification == Classification::Irregular {
                Err("component classifies as Irregular".to_string())
            } else if !p_simple {
                Err("component is not P-simple".to_string())
            } else {
                vertex_roles(g, &levels, comp, &classification).map_err(|e| e.to_string())
            };
            ComponentStructure {
                vertices: comp.clone(),
                p_simple,
                classification,
                roles,
                checks: check_component(g, &levels, comp),
            }
        })
        .collect();
    StructureAnalysis {
        decomposition,
        levels,
        components,
    }
}

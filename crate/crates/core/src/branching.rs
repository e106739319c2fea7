//! Discrete `E`-branching systems: a finite index set with positive point
//! masses, range sets `R_e`, domain sets `D_v` and bijections
//! `f_e: D_{r(e)} → R_e`.
//!
//! With strictly positive point masses every "almost everywhere" clause
//! becomes an exact set identity, and the Radon-Nikodym derivative of
//! `μ∘f_e` is the weight ratio `w(f_e(x)) / w(x)`.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use indexmap::IndexMap;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::graph::{topological_order, DirectedGraph, EdgeId, VertexId};
use crate::report::{CheckEntry, Report};

pub type IndexSet = BTreeSet<usize>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteBranchingSystem {
    pub universe: Vec<usize>,
    /// Point masses; indices without an entry weigh 1.
    #[serde(default)]
    pub weights: BTreeMap<usize, f64>,
    #[serde(rename = "R")]
    pub range_sets: IndexMap<String, IndexSet>,
    #[serde(rename = "D")]
    pub domain_sets: IndexMap<String, IndexSet>,
    #[serde(rename = "f")]
    pub edge_maps: IndexMap<String, BTreeMap<usize, usize>>,
}

/// Exact rational value of a finite float.
pub(crate) fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("weights are finite")
}

impl DiscreteBranchingSystem {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::malformed(&e))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("branching system serializes")
    }

    pub fn weight(&self, j: usize) -> f64 {
        self.weights.get(&j).copied().unwrap_or(1.0)
    }

    pub fn exact_weight(&self, j: usize) -> BigRational {
        exact(self.weight(j))
    }

    pub fn has_unit_weights(&self) -> bool {
        self.weights.values().all(|&w| w == 1.0)
    }

    /// Replaces the point masses.
    pub fn with_weights(mut self, weights: BTreeMap<usize, f64>) -> Self {
        self.weights = weights;
        self
    }

    fn range_set(&self, e: &str) -> &IndexSet {
        &self.range_sets[e]
    }

    fn domain_set(&self, v: &str) -> &IndexSet {
        &self.domain_sets[v]
    }

    /// Universe indices lying in no `D_v`.
    pub fn slack_indices(&self) -> IndexSet {
        let covered: IndexSet = self.domain_sets.values().flatten().copied().collect();
        self.universe
            .iter()
            .copied()
            .filter(|j| !covered.contains(j))
            .collect()
    }

    /// Places `other` after `self`, shifting its indices past the largest
    /// index in use. Generator ids must not collide.
    pub fn disjoint_union(&self, other: &Self) -> Result<Self> {
        let offset = self.universe.iter().max().map_or(0, |m| m + 1);
        let shift_set = |s: &IndexSet| s.iter().map(|j| j + offset).collect::<IndexSet>();
        let mut out = self.clone();
        out.universe.extend(other.universe.iter().map(|j| j + offset));
        out.weights
            .extend(other.weights.iter().map(|(j, w)| (j + offset, *w)));
        for (key, set) in &other.range_sets {
            if out.range_sets.insert(key.clone(), shift_set(set)).is_some() {
                return Err(duplicate("edge", key));
            }
        }
        for (key, set) in &other.domain_sets {
            if out.domain_sets.insert(key.clone(), shift_set(set)).is_some() {
                return Err(duplicate("vertex", key));
            }
        }
        for (key, map) in &other.edge_maps {
            let shifted = map.iter().map(|(x, y)| (x + offset, y + offset)).collect();
            if out.edge_maps.insert(key.clone(), shifted).is_some() {
                return Err(duplicate("edge", key));
            }
        }
        Ok(out)
    }
}

fn duplicate(kind: &'static str, id: &str) -> Error {
    Error::DuplicateId {
        kind,
        id: id.to_string(),
        location: "disjoint union".into(),
    }
}

fn check_keys<V>(
    what: &str,
    map: &IndexMap<String, V>,
    expected: impl Iterator<Item = String>,
) -> Result<()> {
    let expected: BTreeSet<String> = expected.collect();
    let actual: BTreeSet<String> = map.keys().cloned().collect();
    if expected == actual {
        return Ok(());
    }
    let missing: Vec<_> = expected.difference(&actual).collect();
    let extra: Vec<_> = actual.difference(&expected).collect();
    Err(Error::KeyMismatch(format!(
        "{what}: missing {missing:?}, unexpected {extra:?}"
    )))
}

pub(crate) fn check_system_keys(bs: &DiscreteBranchingSystem, g: &DirectedGraph) -> Result<()> {
    let edges = || g.edge_ids().map(|e| g.edge_name(e).to_string());
    check_keys("R", &bs.range_sets, edges())?;
    check_keys("f", &bs.edge_maps, edges())?;
    check_keys(
        "D",
        &bs.domain_sets,
        g.vertices().map(|v| g.vertex_name(v).to_string()),
    )
}

fn well_formed(bs: &DiscreteBranchingSystem) -> Option<serde_json::Value> {
    let universe: IndexSet = bs.universe.iter().copied().collect();
    if universe.len() != bs.universe.len() {
        return Some(json!({"reason": "duplicate universe index"}));
    }
    let outside = |j: &usize| !universe.contains(j);
    for (j, w) in &bs.weights {
        if outside(j) {
            return Some(json!({"reason": "weight outside universe", "index": j}));
        }
        if !(w.is_finite() && *w > 0.0) {
            return Some(json!({"reason": "non-positive weight", "index": j}));
        }
    }
    for (key, set) in bs.range_sets.iter().chain(&bs.domain_sets) {
        if let Some(j) = set.iter().find(|j| outside(j)) {
            return Some(json!({"reason": "index outside universe", "set": key, "index": j}));
        }
    }
    for (key, map) in &bs.edge_maps {
        if let Some((x, y)) = map.iter().find(|(x, y)| outside(x) || outside(y)) {
            return Some(json!({"reason": "map entry outside universe", "edge": key, "index": x, "image": y}));
        }
    }
    None
}

fn first_overlap<'a>(
    sets: impl Iterator<Item = (&'a String, &'a IndexSet)>,
    kind: &str,
) -> Option<serde_json::Value> {
    let mut owner: BTreeMap<usize, &String> = BTreeMap::new();
    for (key, set) in sets {
        for &j in set {
            if let Some(prev) = owner.insert(j, key) {
                return Some(json!({kind: [prev, key], "index": j}));
            }
        }
    }
    None
}

/// Checks the six branching-system conditions. A `well-formed` entry comes
/// first; if it fails the remaining conditions are not evaluated.
pub fn validate(bs: &DiscreteBranchingSystem, g: &DirectedGraph) -> Result<Report> {
    check_system_keys(bs, g)?;
    let mut report = Report::default();
    if let Some(w) = well_formed(bs) {
        report.push(CheckEntry::fail("well-formed", w));
        for item in ["1", "2", "3", "4", "5", "6"] {
            report.push(CheckEntry::not_applicable(item));
        }
        return Ok(report);
    }
    report.push(CheckEntry::pass("well-formed"));

    let edge_key = |e: EdgeId| g.edge_name(e).to_string();
    let vertex_key = |v: VertexId| g.vertex_name(v).to_string();

    report.push(CheckEntry::from_witness(
        "1",
        first_overlap(
            g.edge_ids()
                .map(|e| bs.range_sets.get_key_value(g.edge_name(e)).unwrap()),
            "edges",
        ),
    ));
    report.push(CheckEntry::from_witness(
        "2",
        first_overlap(
            g.vertices()
                .map(|v| bs.domain_sets.get_key_value(g.vertex_name(v)).unwrap()),
            "vertices",
        ),
    ));

    let cond3 = g.edge_ids().find_map(|e| {
        let source = bs.domain_set(g.vertex_name(g.source(e)));
        bs.range_set(g.edge_name(e))
            .iter()
            .find(|j| !source.contains(j))
            .map(|j| json!({"edge": edge_key(e), "index": j}))
    });
    report.push(CheckEntry::from_witness("3", cond3));

    let cond4 = g.vertices().find_map(|v| {
        let emitted = g.emitted(v);
        if emitted.is_empty() {
            return None;
        }
        let union: IndexSet = emitted
            .iter()
            .flat_map(|&e| bs.range_set(g.edge_name(e)).iter().copied())
            .collect();
        bs.domain_set(g.vertex_name(v))
            .symmetric_difference(&union)
            .next()
            .map(|j| json!({"vertex": vertex_key(v), "index": j}))
    });
    report.push(CheckEntry::from_witness("4", cond4));

    let cond5 = g.edge_ids().find_map(|e| {
        let map = &bs.edge_maps[g.edge_name(e)];
        let domain = bs.domain_set(g.vertex_name(g.range(e)));
        let range = bs.range_set(g.edge_name(e));
        let keys: IndexSet = map.keys().copied().collect();
        if let Some(j) = keys.symmetric_difference(domain).next() {
            return Some(json!({"edge": edge_key(e), "reason": "domain differs from D_r(e)", "index": j}));
        }
        let image: IndexSet = map.values().copied().collect();
        if let Some(j) = image.symmetric_difference(range).next() {
            return Some(json!({"edge": edge_key(e), "reason": "image differs from R_e", "index": j}));
        }
        map.iter()
            .find(|(x, y)| !(bs.weight(**y) / bs.weight(**x) > 0.0))
            .map(|(x, _)| json!({"edge": edge_key(e), "reason": "derivative not positive", "index": x}))
    });
    report.push(CheckEntry::from_witness("5", cond5));

    let cond6 = g.edge_ids().find_map(|e| {
        let mut preimage = BTreeMap::new();
        bs.edge_maps[g.edge_name(e)].iter().find_map(|(x, y)| {
            preimage
                .insert(*y, *x)
                .map(|other| json!({"edge": edge_key(e), "indices": [other, x], "image": y}))
        })
    });
    report.push(CheckEntry::from_witness("6", cond6));
    Ok(report)
}

/// Radon-Nikodym derivatives `(Φ_{f_e} on D_r(e), Φ_{f_e⁻¹} on R_e)`.
pub fn radon_nikodym(
    bs: &DiscreteBranchingSystem,
    edge: &str,
) -> Result<(BTreeMap<usize, f64>, BTreeMap<usize, f64>)> {
    let map = bs
        .edge_maps
        .get(edge)
        .ok_or_else(|| Error::UnknownEdge(edge.to_string()))?;
    let forward = map
        .iter()
        .map(|(&x, &y)| (x, bs.weight(y) / bs.weight(x)))
        .collect();
    let inverse = map
        .iter()
        .map(|(&x, &y)| (y, bs.weight(x) / bs.weight(y)))
        .collect();
    Ok((forward, inverse))
}

/// `|D_v|` forced by the branching conditions: given at sinks, summed over
/// emitted edges elsewhere. Isolated vertices without an entry get 0.
pub fn vertex_dimensions(g: &DirectedGraph, sink_dims: &BTreeMap<String, usize>) -> Result<Vec<usize>> {
    let order = topological_order(g)
        .map_err(|v| Error::DirectedCycle(g.vertex_name(v).to_string()))?;
    for key in sink_dims.keys() {
        let v = g.vertex_id(key)?;
        if !g.is_sink(v) {
            return Err(Error::KeyMismatch(format!(
                "sink dimension given for emitter `{key}`"
            )));
        }
    }
    let mut dims = vec![0; g.vertex_count()];
    for &v in order.iter().rev() {
        let name = g.vertex_name(v);
        dims[v.0] = if g.is_sink(v) {
            match sink_dims.get(name) {
                Some(0) => return Err(Error::ZeroDim(name.to_string())),
                Some(&d) => d,
                None if g.is_isolated(v) => 0,
                None => return Err(Error::MissingSinkDim(name.to_string())),
            }
        } else {
            g.emitted(v).iter().map(|&e| dims[g.range(e).0]).sum()
        };
    }
    Ok(dims)
}

/// Contiguous index blocks: one per vertex in vertex order, each emitter's
/// block split into consecutive edge blocks in edge order, then slack.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockLayout {
    pub vertex_blocks: Vec<Range<usize>>,
    pub edge_blocks: Vec<Range<usize>>,
    pub slack: Range<usize>,
}

impl BlockLayout {
    pub fn new(g: &DirectedGraph, dims: &[usize], slack: usize) -> Self {
        let mut cursor = 0;
        let mut vertex_blocks = Vec::with_capacity(g.vertex_count());
        let mut edge_blocks = vec![0..0; g.edge_count()];
        for v in g.vertices() {
            let start = cursor;
            for &e in g.emitted(v) {
                let len = dims[g.range(e).0];
                edge_blocks[e.0] = cursor..cursor + len;
                cursor += len;
            }
            cursor = start + dims[v.0];
            vertex_blocks.push(start..cursor);
        }
        Self {
            vertex_blocks,
            edge_blocks,
            slack: cursor..cursor + slack,
        }
    }

    pub fn total(&self) -> usize {
        self.slack.end
    }
}

/// Builds a unit-weight system whose sets are forced by the sink
/// dimensions. `f_e` is the order-preserving bijection.
pub fn synthesize(
    g: &DirectedGraph,
    sink_dims: &BTreeMap<String, usize>,
    slack: usize,
) -> Result<DiscreteBranchingSystem> {
    let dims = vertex_dimensions(g, sink_dims)?;
    let layout = BlockLayout::new(g, &dims, slack);
    let universe: Vec<usize> = (0..layout.total()).collect();
    let weights = universe.iter().map(|&j| (j, 1.0)).collect();
    let domain_sets = g
        .vertices()
        .map(|v| {
            (
                g.vertex_name(v).to_string(),
                layout.vertex_blocks[v.0].clone().collect(),
            )
        })
        .collect();
    let range_sets = g
        .edge_ids()
        .map(|e| {
            (
                g.edge_name(e).to_string(),
                layout.edge_blocks[e.0].clone().collect(),
            )
        })
        .collect();
    let edge_maps = g
        .edge_ids()
        .map(|e| {
            let map = layout.vertex_blocks[g.range(e).0]
                .clone()
                .zip(layout.edge_blocks[e.0].clone())
                .collect();
            (g.edge_name(e).to_string(), map)
        })
        .collect();
    Ok(DiscreteBranchingSystem {
        universe,
        weights,
        range_sets,
        domain_sets,
        edge_maps,
    })
}

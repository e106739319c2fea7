//! Concrete finite-dimensional representations of a graph algebra and the
//! construction that turns one into a representation induced by a
//! branching system: subspace extraction, level-wise basis alignment,
//! extraction of the system and of the intertwining unitary, and residual
//! verification.

use std::collections::BTreeMap;

use indexmap::IndexMap;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::branching::{vertex_dimensions, BlockLayout, DiscreteBranchingSystem};
use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, EdgeId, VertexId};
use crate::linalg::{columns, complexify, orthonormal_range, CMatrix, CVector, GaussianStream, RankPolicy};
use crate::operators::{induce, to_matrix, DEFAULT_MATRIX_LIMIT};
use crate::report::{CheckEntry, Report};
use crate::structure::{analyze, Classification, Role, StructureAnalysis};

/// Named numerical thresholds. Names accepted by [`Tolerances::set`]:
/// `ck`, `rank`, `unstable-low`, `unstable-high`, `match`, `residual`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub ck: f64,
    pub rank: RankPolicy,
    pub matching: f64,
    pub residual: f64,
    /// Accept B2B matches up to a unit scalar. Only [`check_b2b`] honors it.
    pub phase_slack: bool,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            ck: 1e-10,
            rank: RankPolicy::default(),
            matching: 1e-9,
            residual: 1e-8,
            phase_slack: false,
        }
    }
}

impl Tolerances {
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::Degenerate(format!(
                "tolerance `{name}` must be a non-negative number"
            )));
        }
        match name {
            "ck" => self.ck = value,
            "rank" => self.rank.cutoff = value,
            "unstable-low" => self.rank.unstable_low = value,
            "unstable-high" => self.rank.unstable_high = value,
            "match" => self.matching = value,
            "residual" => self.residual = value,
            _ => return Err(Error::Degenerate(format!("unknown tolerance `{name}`"))),
        }
        Ok(())
    }
}

type DenseRows = Vec<Vec<[f64; 2]>>;

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RepresentationDocument {
    dim: usize,
    #[serde(default)]
    complement_dim: usize,
    vertex_projections: IndexMap<String, DenseRows>,
    edge_operators: IndexMap<String, DenseRows>,
}

fn to_rows(m: &CMatrix) -> DenseRows {
    m.row_iter()
        .map(|row| row.iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

fn from_rows(id: &str, rows: &DenseRows, dim: usize) -> Result<CMatrix> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::InvalidRepresentation(format!(
            "matrix `{id}` is not {dim}×{dim}"
        )));
    }
    Ok(CMatrix::from_fn(dim, dim, |r, c| {
        let [re, im] = rows[r][c];
        Complex64::new(re, im)
    }))
}

/// Projections `P_v` and partial isometries `S_e` on `C^dim`, keyed by
/// graph ids.
#[derive(Clone, Debug, PartialEq)]
pub struct ConcreteRepresentation {
    pub dim: usize,
    pub complement_dim: usize,
    pub vertex_projections: IndexMap<String, CMatrix>,
    pub edge_operators: IndexMap<String, CMatrix>,
}

impl ConcreteRepresentation {
    /// Parses the interchange format. Only shapes are checked here; see
    /// [`ConcreteRepresentation::check`] and [`ConcreteRepresentation::validated`].
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: RepresentationDocument =
            serde_json::from_str(text).map_err(|e| Error::malformed(&e))?;
        let convert = |map: &IndexMap<String, DenseRows>| -> Result<IndexMap<String, CMatrix>> {
            map.iter()
                .map(|(k, rows)| Ok((k.clone(), from_rows(k, rows, doc.dim)?)))
                .collect()
        };
        Ok(Self {
            dim: doc.dim,
            complement_dim: doc.complement_dim,
            vertex_projections: convert(&doc.vertex_projections)?,
            edge_operators: convert(&doc.edge_operators)?,
        })
    }

    pub fn to_json(&self) -> String {
        let convert = |map: &IndexMap<String, CMatrix>| {
            map.iter().map(|(k, m)| (k.clone(), to_rows(m))).collect()
        };
        let doc = RepresentationDocument {
            dim: self.dim,
            complement_dim: self.complement_dim,
            vertex_projections: convert(&self.vertex_projections),
            edge_operators: convert(&self.edge_operators),
        };
        serde_json::to_string(&doc).expect("representation serializes")
    }

    pub fn projection(&self, g: &DirectedGraph, v: VertexId) -> &CMatrix {
        &self.vertex_projections[g.vertex_name(v)]
    }

    pub fn operator(&self, g: &DirectedGraph, e: EdgeId) -> &CMatrix {
        &self.edge_operators[g.edge_name(e)]
    }

    fn check_keys(&self, g: &DirectedGraph) -> Result<()> {
        let vertices: Vec<&str> = g.vertices().map(|v| g.vertex_name(v)).collect();
        let edges: Vec<&str> = g.edge_ids().map(|e| g.edge_name(e)).collect();
        let same = |keys: indexmap::map::Keys<'_, String, CMatrix>, ids: &[&str]| {
            let mut a: Vec<&str> = keys.map(String::as_str).collect();
            let mut b = ids.to_vec();
            a.sort_unstable();
            b.sort_unstable();
            a == b
        };
        if !same(self.vertex_projections.keys(), &vertices) {
            return Err(Error::KeyMismatch(
                "vertexProjections keys differ from the graph's vertices".into(),
            ));
        }
        if !same(self.edge_operators.keys(), &edges) {
            return Err(Error::KeyMismatch(
                "edgeOperators keys differ from the graph's edges".into(),
            ));
        }
        Ok(())
    }

    /// Dense relation checks at tolerance `tol` (Frobenius norm of each
    /// defect). Items: `projections`, `i`..`v`, `complement`.
    pub fn check(&self, g: &DirectedGraph, tol: f64) -> Result<Report> {
        self.check_keys(g)?;
        let p = |v: VertexId| self.projection(g, v);
        let s = |e: EdgeId| self.operator(g, e);
        let defect = |a: &CMatrix, b: &CMatrix| (a - b).norm();
        let zero = CMatrix::zeros(self.dim, self.dim);
        let witness = |ids: Vec<&str>, d: f64| json!({"ids": ids, "defect": d});
        let mut report = Report::default();

        let bad = g.vertices().find_map(|v| {
            let pv = p(v);
            let d = defect(&(pv * pv), pv).max(defect(&pv.adjoint(), pv));
            (d > tol).then(|| witness(vec![g.vertex_name(v)], d))
        });
        report.push(CheckEntry::from_witness("projections", bad));

        let bad = g.vertices().find_map(|u| {
            g.vertices().filter(|&v| v > u).find_map(|v| {
                let d = defect(&(p(u) * p(v)), &zero);
                (d > tol).then(|| witness(vec![g.vertex_name(u), g.vertex_name(v)], d))
            })
        });
        report.push(CheckEntry::from_witness("i", bad));

        let bad = g.edge_ids().find_map(|e| {
            let d = defect(&(s(e).adjoint() * s(e)), p(g.range(e)));
            (d > tol).then(|| witness(vec![g.edge_name(e)], d))
        });
        report.push(CheckEntry::from_witness("ii", bad));

        let bad = g.edge_ids().find_map(|e| {
            let q = s(e) * s(e).adjoint();
            let d = defect(&(p(g.source(e)) * &q), &q);
            (d > tol).then(|| witness(vec![g.edge_name(e)], d))
        });
        report.push(CheckEntry::from_witness("iii", bad));

        let bad = g.edge_ids().find_map(|e| {
            g.edge_ids().filter(|&f| f != e).find_map(|f| {
                let d = defect(&(s(e).adjoint() * s(f)), &zero);
                (d > tol).then(|| witness(vec![g.edge_name(e), g.edge_name(f)], d))
            })
        });
        report.push(CheckEntry::from_witness("iv", bad));

        let bad = g.vertices().filter(|&v| !g.is_sink(v)).find_map(|v| {
            let sum = g
                .emitted(v)
                .iter()
                .fold(zero.clone(), |acc, &e| acc + s(e) * s(e).adjoint());
            let d = defect(&sum, p(v));
            (d > tol).then(|| witness(vec![g.vertex_name(v)], d))
        });
        report.push(CheckEntry::from_witness("v", bad));

        let traced: f64 = g.vertices().map(|v| p(v).trace().re).sum();
        let complement = self.dim as f64 - traced;
        let d = (complement - self.complement_dim as f64).abs();
        report.push(CheckEntry::from_witness(
            "complement",
            (d > 1e-8).then(|| {
                json!({"declared": self.complement_dim, "traced": complement})
            }),
        ));
        Ok(report)
    }

    /// Returns `self` if every relation holds at 1e-10.
    pub fn validated(self, g: &DirectedGraph) -> Result<Self> {
        let report = self.check(g, Tolerances::default().ck)?;
        if report.passed() {
            return Ok(self);
        }
        let failed: Vec<&str> = report.failures().map(|c| c.item.as_str()).collect();
        Err(Error::InvalidRepresentation(format!(
            "relations fail: {}",
            failed.join(", ")
        )))
    }

    /// `X ↦ U X U*` applied to every generator.
    pub fn conjugated(&self, u: &CMatrix) -> Self {
        let conj = |m: &CMatrix| u * m * u.adjoint();
        Self {
            dim: self.dim,
            complement_dim: self.complement_dim,
            vertex_projections: self
                .vertex_projections
                .iter()
                .map(|(k, m)| (k.clone(), conj(m)))
                .collect(),
            edge_operators: self
                .edge_operators
                .iter()
                .map(|(k, m)| (k.clone(), conj(m)))
                .collect(),
        }
    }

    /// Block-diagonal sum, for the disjoint union of the two graphs.
    pub fn direct_sum(&self, other: &Self) -> Result<Self> {
        let n = self.dim + other.dim;
        let place = |m: &CMatrix, offset: usize| {
            let mut out = CMatrix::zeros(n, n);
            out.view_mut((offset, offset), (m.nrows(), m.ncols())).copy_from(m);
            out
        };
        let merge = |kind: &str,
                     a: &IndexMap<String, CMatrix>,
                     b: &IndexMap<String, CMatrix>|
         -> Result<IndexMap<String, CMatrix>> {
            let mut out = IndexMap::new();
            for (src, offset) in [(a, 0), (b, self.dim)] {
                for (k, m) in src {
                    if out.insert(k.clone(), place(m, offset)).is_some() {
                        return Err(Error::KeyMismatch(format!("{kind} `{k}` in both summands")));
                    }
                }
            }
            Ok(out)
        };
        let vertex_projections = merge("vertex", &self.vertex_projections, &other.vertex_projections)?;
        let edge_operators = merge("edge", &self.edge_operators, &other.edge_operators)?;
        Ok(Self {
            dim: n,
            complement_dim: self.complement_dim + other.complement_dim,
            vertex_projections,
            edge_operators,
        })
    }
}

/// How a random representation is rotated away from coordinate axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mixing {
    /// Random unitary on every edge block, then a global random unitary.
    Haar,
    /// No randomness: the generators induced by the synthesized system.
    AxisAligned,
}

/// Representation of an acyclic graph with `H_v` dimensions forced by the
/// sink dimensions and a complement of `complement_dim`.
///
/// Gaussian draws, all from one stream seeded with `seed`: a unitary of
/// size `dim H_{r(e)}` per edge in edge order, then the global `N × N`
/// unitary.
pub fn random_representation(
    g: &DirectedGraph,
    sink_dims: &BTreeMap<String, usize>,
    complement_dim: usize,
    seed: u64,
    mixing: Mixing,
) -> Result<ConcreteRepresentation> {
    let dims = vertex_dimensions(g, sink_dims)?;
    let layout = BlockLayout::new(g, &dims, complement_dim);
    let n = layout.total();
    let mut stream = GaussianStream::new(seed);

    let vertex_projections = g
        .vertices()
        .map(|v| {
            let mut p = CMatrix::zeros(n, n);
            for j in layout.vertex_blocks[v.0].clone() {
                p[(j, j)] = Complex64::new(1.0, 0.0);
            }
            (g.vertex_name(v).to_string(), p)
        })
        .collect();
    let edge_operators = g
        .edge_ids()
        .map(|e| {
            let rows = layout.edge_blocks[e.0].clone();
            let cols = layout.vertex_blocks[g.range(e).0].clone();
            let block = match mixing {
                Mixing::Haar => stream.unitary(cols.len()),
                Mixing::AxisAligned => CMatrix::identity(cols.len(), cols.len()),
            };
            let mut s = CMatrix::zeros(n, n);
            s.view_mut((rows.start, cols.start), (rows.len(), cols.len()))
                .copy_from(&block);
            (g.edge_name(e).to_string(), s)
        })
        .collect();
    let rep = ConcreteRepresentation {
        dim: n,
        complement_dim,
        vertex_projections,
        edge_operators,
    };
    Ok(match mixing {
        Mixing::Haar => rep.conjugated(&stream.unitary(n)),
        Mixing::AxisAligned => rep,
    })
}

/// Orthonormal bases of `H_v = P_v H`, `H_e = S_e S_e^* H` and of the
/// complement of `⊕ H_v`, indexed by vertex and edge id.
#[derive(Clone, Debug)]
pub struct Subspaces {
    pub vertices: Vec<Vec<CVector>>,
    pub edges: Vec<Vec<CVector>>,
    pub complement: Vec<CVector>,
}

pub fn extract_subspaces(
    rep: &ConcreteRepresentation,
    g: &DirectedGraph,
    policy: &RankPolicy,
) -> Result<Subspaces> {
    let vertices = g
        .vertices()
        .map(|v| orthonormal_range(rep.projection(g, v), policy))
        .collect::<Result<_>>()?;
    let edges = g
        .edge_ids()
        .map(|e| {
            let s = rep.operator(g, e);
            orthonormal_range(&(s * s.adjoint()), policy)
        })
        .collect::<Result<_>>()?;
    let rest = g.vertices().fold(CMatrix::identity(rep.dim, rep.dim), |acc, v| {
        acc - rep.projection(g, v)
    });
    Ok(Subspaces {
        vertices,
        edges,
        complement: orthonormal_range(&rest, policy)?,
    })
}

/// An orthonormal basis of `H` together with the index sets spanning each
/// `H_v` and `H_e`. Indices point into `global`.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisAssignment {
    pub global: Vec<CVector>,
    pub vertex_bases: Vec<Vec<usize>>,
    pub edge_bases: Vec<Vec<usize>>,
    pub complement: Vec<usize>,
}

impl BasisAssignment {
    pub fn dim(&self) -> usize {
        self.global.len()
    }

    /// Matrix whose `j`-th column is `h_j`.
    pub fn matrix(&self) -> CMatrix {
        let rows = self.global.first().map_or(0, |h| h.len());
        columns(&self.global, rows)
    }

    pub fn to_json(&self, g: &DirectedGraph) -> Value {
        let vertex_bases: serde_json::Map<String, Value> = g
            .vertices()
            .map(|v| (g.vertex_name(v).to_string(), json!(self.vertex_bases[v.0])))
            .collect();
        let edge_bases: serde_json::Map<String, Value> = g
            .edge_ids()
            .map(|e| (g.edge_name(e).to_string(), json!(self.edge_bases[e.0])))
            .collect();
        json!({
            "dim": self.dim(),
            "vertexBases": vertex_bases,
            "edgeBases": edge_bases,
            "complement": self.complement,
        })
    }
}

struct Aligner<'a> {
    rep: &'a ConcreteRepresentation,
    g: &'a DirectedGraph,
    subspaces: &'a Subspaces,
    vertex: Vec<Option<Vec<CVector>>>,
    edge: Vec<Option<Vec<CVector>>>,
}

impl Aligner<'_> {
    /// Sets `B_v`: the concatenated out-edge bases at an emitter, the
    /// range basis of `P_v` at a sink. Then pushes it along every edge
    /// received by `v`.
    fn visit(&mut self, v: VertexId) -> Result<()> {
        let g = self.g;
        let basis = if g.is_sink(v) {
            self.subspaces.vertices[v.0].clone()
        } else {
            let mut basis = Vec::new();
            for &e in g.emitted(v) {
                let Some(be) = &self.edge[e.0] else {
                    return Err(Error::NotApplicable(format!(
                        "basis of edge `{}` unavailable when visiting `{}`",
                        g.edge_name(e),
                        g.vertex_name(v)
                    )));
                };
                basis.extend(be.iter().cloned());
            }
            if basis.len() != self.subspaces.vertices[v.0].len() {
                return Err(Error::InvalidRepresentation(format!(
                    "edge subspaces at `{}` have total dimension {}, H_v has {}",
                    g.vertex_name(v),
                    basis.len(),
                    self.subspaces.vertices[v.0].len()
                )));
            }
            basis
        };
        for &e in g.received(v) {
            let edge_dim = self.subspaces.edges[e.0].len();
            if edge_dim != basis.len() {
                return Err(Error::RankMismatch {
                    edge: g.edge_name(e).to_string(),
                    range_dim: basis.len(),
                    edge_dim,
                });
            }
            let s = self.rep.operator(g, e);
            let pushed = basis.iter().map(|h| s * h).collect();
            assert!(self.edge[e.0].is_none(), "edge basis assigned twice");
            self.edge[e.0] = Some(pushed);
        }
        assert!(self.vertex[v.0].is_none(), "vertex basis assigned twice");
        self.vertex[v.0] = Some(basis);
        Ok(())
    }
}

/// Bases satisfying `B_e ⊆ B_{s(e)}`, `B_v = ⋃ B_e` at emitters and
/// `S_e(B_{r(e)}) = B_e`, built level by level. Final vertices are visited
/// by ascending level, then the center, then initial vertices by
/// descending level.
pub fn align_bases(
    rep: &ConcreteRepresentation,
    g: &DirectedGraph,
    analysis: &StructureAnalysis,
    policy: &RankPolicy,
) -> Result<BasisAssignment> {
    let subspaces = extract_subspaces(rep, g, policy)?;
    let mut aligner = Aligner {
        rep,
        g,
        subspaces: &subspaces,
        vertex: vec![None; g.vertex_count()],
        edge: vec![None; g.edge_count()],
    };
    for &v in &analysis.decomposition.isolated {
        aligner.visit(v)?;
    }
    for comp in &analysis.components {
        if comp.classification == Classification::Irregular {
            return Err(Error::NotApplicable(format!(
                "component {:?} classifies as Irregular",
                g.names(&comp.vertices)
            )));
        }
        let roles = comp.roles.as_ref().map_err(|reason| {
            Error::NotApplicable(format!("component {:?}: {reason}", g.names(&comp.vertices)))
        })?;
        let level = |v: VertexId| analysis.levels.level_of(v).unwrap_or(usize::MAX);
        let with_role = |role: Role| roles.iter().filter(move |(_, r)| r.role == role).map(|(&v, _)| v);
        let mut finals: Vec<VertexId> = with_role(Role::Final).collect();
        finals.sort_by_key(|&v| (level(v), v));
        let mut initials: Vec<VertexId> = with_role(Role::Initial).collect();
        initials.sort_by_key(|&v| (std::cmp::Reverse(level(v)), v));
        let order = finals
            .into_iter()
            .chain(with_role(Role::Center))
            .chain(initials);
        for v in order {
            aligner.visit(v)?;
        }
    }

    let mut global = Vec::with_capacity(rep.dim);
    let mut vertex_bases = vec![Vec::new(); g.vertex_count()];
    let mut edge_bases = vec![Vec::new(); g.edge_count()];
    for v in g.vertices() {
        let start = global.len();
        global.extend(aligner.vertex[v.0].take().expect("every vertex visited"));
        vertex_bases[v.0] = (start..global.len()).collect();
        if !g.is_sink(v) {
            let mut cursor = start;
            for &e in g.emitted(v) {
                let len = aligner.edge[e.0].as_ref().expect("every edge assigned").len();
                edge_bases[e.0] = (cursor..cursor + len).collect();
                cursor += len;
            }
        }
    }
    let start = global.len();
    global.extend(subspaces.complement.iter().cloned());
    let complement: Vec<usize> = (start..global.len()).collect();
    if global.len() != rep.dim {
        return Err(Error::InvalidRepresentation(format!(
            "aligned bases have {} vectors in dimension {}",
            global.len(),
            rep.dim
        )));
    }
    Ok(BasisAssignment {
        global,
        vertex_bases,
        edge_bases,
        complement,
    })
}

/// Matches `S_e h_j` for `j ∈ B_{r(e)}` against `B_e`. Returns `j ↦ i`
/// or a witness for the first vector left unmatched.
fn match_edge(
    rep: &ConcreteRepresentation,
    ba: &BasisAssignment,
    g: &DirectedGraph,
    e: EdgeId,
    tol: f64,
    phase_slack: bool,
) -> std::result::Result<BTreeMap<usize, usize>, Value> {
    let s = rep.operator(g, e);
    let source = &ba.vertex_bases[g.range(e).0];
    let target = &ba.edge_bases[e.0];
    let mut used = vec![false; target.len()];
    let mut map = BTreeMap::new();
    for &j in source {
        let y = s * &ba.global[j];
        let mut best = f64::INFINITY;
        let mut found = None;
        for (k, &i) in target.iter().enumerate() {
            if used[k] {
                continue;
            }
            let h = &ba.global[i];
            let mut d = (&y - h).norm();
            if d > tol && phase_slack {
                let c = h.dotc(&y);
                if c.norm() > 0.0 {
                    d = d.min((&y - h * (c / c.norm())).norm());
                }
            }
            best = best.min(d);
            if d <= tol {
                found = Some(k);
                break;
            }
        }
        let Some(k) = found else {
            return Err(json!({"edge": g.edge_name(e), "unmatched": j, "distance": best}));
        };
        used[k] = true;
        map.insert(j, target[k]);
    }
    if let Some(k) = used.iter().position(|u| !u) {
        return Err(json!({"edge": g.edge_name(e), "unreached": target[k]}));
    }
    Ok(map)
}

/// Checks an assignment. Items: `orthonormal`, `spans`, `1` (inclusion and
/// union at emitters), then `b2b:<edge>` for every edge.
pub fn check_b2b(
    rep: &ConcreteRepresentation,
    ba: &BasisAssignment,
    g: &DirectedGraph,
    tol: &Tolerances,
) -> Report {
    let mut report = Report::default();
    let n = ba.dim();
    let mut worst = (0.0f64, 0, 0);
    for a in 0..n {
        for b in a..n {
            let expected = if a == b { 1.0 } else { 0.0 };
            let d = (ba.global[a].dotc(&ba.global[b]) - Complex64::new(expected, 0.0)).norm();
            if d > worst.0 {
                worst = (d, a, b);
            }
        }
    }
    let dim_ok = n == rep.dim && ba.global.iter().all(|h| h.len() == rep.dim);
    report.push(CheckEntry::from_witness(
        "orthonormal",
        (!dim_ok || worst.0 > tol.ck).then(|| {
            json!({"vectors": n, "dim": rep.dim, "defect": worst.0, "pair": [worst.1, worst.2]})
        }),
    ));
    if !dim_ok {
        for item in std::iter::once("spans".to_string())
            .chain(std::iter::once("1".to_string()))
            .chain(g.edge_ids().map(|e| format!("b2b:{}", g.edge_name(e))))
        {
            report.push(CheckEntry::not_applicable(item));
        }
        return report;
    }

    let spans = g.vertices().find_map(|v| {
        let p = rep.projection(g, v);
        let rank = p.trace().re.round() as usize;
        let basis = &ba.vertex_bases[v.0];
        if basis.len() != rank {
            return Some(json!({"vertex": g.vertex_name(v), "basis": basis.len(), "rank": rank}));
        }
        basis.iter().find_map(|&j| {
            let h = &ba.global[j];
            let d = (p * h - h).norm();
            (d > tol.matching).then(|| json!({"vertex": g.vertex_name(v), "index": j, "defect": d}))
        })
    });
    report.push(CheckEntry::from_witness("spans", spans));

    let inclusion = g.vertices().find_map(|v| {
        let bv = &ba.vertex_bases[v.0];
        for &e in g.emitted(v) {
            if let Some(j) = ba.edge_bases[e.0].iter().find(|j| !bv.contains(j)) {
                return Some(json!({"edge": g.edge_name(e), "index": j, "missing from": g.vertex_name(v)}));
            }
        }
        if g.is_sink(v) {
            return None;
        }
        let covered: std::collections::BTreeSet<usize> =
            g.emitted(v).iter().flat_map(|e| ba.edge_bases[e.0].iter().copied()).collect();
        bv.iter()
            .find(|j| !covered.contains(j))
            .map(|j| json!({"vertex": g.vertex_name(v), "index": j, "uncovered": true}))
    });
    report.push(CheckEntry::from_witness("1", inclusion));

    for e in g.edge_ids() {
        let outcome = match_edge(rep, ba, g, e, tol.matching, tol.phase_slack);
        report.push(CheckEntry::from_witness(
            format!("b2b:{}", g.edge_name(e)),
            outcome.err(),
        ));
    }
    report
}

/// Frobenius residuals `‖U* π̃(x) U − π(x)‖` per generator.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Residuals {
    #[serde(rename = "S")]
    pub edges: IndexMap<String, f64>,
    #[serde(rename = "P")]
    pub vertices: IndexMap<String, f64>,
    /// `‖U*U − I‖`.
    pub unitarity: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.edges
            .values()
            .chain(self.vertices.values())
            .fold(self.unitarity, |a, &b| a.max(b))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquivalenceCertificate {
    pub system: DiscreteBranchingSystem,
    pub unitary: CMatrix,
    pub residuals: Option<Residuals>,
}

impl EquivalenceCertificate {
    pub fn passed(&self, tol: f64) -> bool {
        self.residuals.as_ref().is_some_and(|r| r.max() <= tol)
    }
}

/// Branching system on `{1, …, N}` read off an assignment, and the unitary
/// sending `h_j` to the `j`-th coordinate vector.
pub fn extract_branching_system(
    rep: &ConcreteRepresentation,
    ba: &BasisAssignment,
    g: &DirectedGraph,
    tol: &Tolerances,
) -> Result<EquivalenceCertificate> {
    let label = |j: usize| j + 1;
    let mut edge_maps = IndexMap::new();
    for e in g.edge_ids() {
        let map = match_edge(rep, ba, g, e, tol.matching, false)
            .map_err(|_| Error::B2bViolation(g.edge_name(e).to_string()))?;
        edge_maps.insert(
            g.edge_name(e).to_string(),
            map.into_iter().map(|(j, i)| (label(j), label(i))).collect(),
        );
    }
    let universe: Vec<usize> = (0..ba.dim()).map(label).collect();
    let system = DiscreteBranchingSystem {
        weights: universe.iter().map(|&j| (j, 1.0)).collect(),
        universe,
        range_sets: g
            .edge_ids()
            .map(|e| {
                let set = ba.edge_bases[e.0].iter().map(|&j| label(j)).collect();
                (g.edge_name(e).to_string(), set)
            })
            .collect(),
        domain_sets: g
            .vertices()
            .map(|v| {
                let set = ba.vertex_bases[v.0].iter().map(|&j| label(j)).collect();
                (g.vertex_name(v).to_string(), set)
            })
            .collect(),
        edge_maps,
    };
    Ok(EquivalenceCertificate {
        system,
        unitary: ba.matrix().adjoint(),
        residuals: None,
    })
}

/// Fills in the residuals of a certificate.
pub fn verify_equivalence(
    rep: &ConcreteRepresentation,
    cert: &EquivalenceCertificate,
    g: &DirectedGraph,
) -> Result<EquivalenceCertificate> {
    let family = induce(&cert.system, g)?;
    let u = &cert.unitary;
    let residual = |id: &str, target: &CMatrix| -> Result<f64> {
        let induced = complexify(&to_matrix(&family, id, DEFAULT_MATRIX_LIMIT)?);
        Ok((u.adjoint() * induced * u - target).norm())
    };
    let mut residuals = Residuals {
        unitarity: (u.adjoint() * u - CMatrix::identity(u.nrows(), u.ncols())).norm(),
        ..Residuals::default()
    };
    for e in g.edge_ids() {
        let id = g.edge_name(e);
        residuals
            .edges
            .insert(id.to_string(), residual(id, rep.operator(g, e))?);
    }
    for v in g.vertices() {
        let id = g.vertex_name(v);
        residuals
            .vertices
            .insert(id.to_string(), residual(id, rep.projection(g, v))?);
    }
    Ok(EquivalenceCertificate {
        residuals: Some(residuals),
        ..cert.clone()
    })
}

/// Everything [`run_pipeline`] produces.
#[derive(Clone, Debug)]
pub struct PipelineOutcome {
    pub relations: Report,
    pub assignment: BasisAssignment,
    pub b2b: Report,
    pub certificate: EquivalenceCertificate,
}

impl PipelineOutcome {
    pub fn passed(&self, tol: &Tolerances) -> bool {
        self.relations.passed() && self.b2b.passed() && self.certificate.passed(tol.residual)
    }
}

/// Relation check, alignment, extraction and verification in sequence.
/// Fails with [`Error::InvalidRepresentation`] when a relation does not
/// hold.
pub fn run_pipeline(
    rep: &ConcreteRepresentation,
    g: &DirectedGraph,
    tol: &Tolerances,
) -> Result<PipelineOutcome> {
    let relations = rep.check(g, tol.ck)?;
    if !relations.passed() {
        let failed: Vec<&str> = relations.failures().map(|c| c.item.as_str()).collect();
        return Err(Error::InvalidRepresentation(format!(
            "relations fail: {}",
            failed.join(", ")
        )));
    }
    let analysis = analyze(g);
    let assignment = align_bases(rep, g, &analysis, &tol.rank)?;
    let b2b = check_b2b(rep, &assignment, g, tol);
    let certificate = extract_branching_system(rep, &assignment, g, tol)?;
    let certificate = verify_equivalence(rep, &certificate, g)?;
    Ok(PipelineOutcome {
        relations,
        assignment,
        b2b,
        certificate,
    })
}

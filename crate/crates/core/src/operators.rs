//! Generators of the representation induced by a discrete branching
//! system, kept in exact form.
//!
//! `π(S_e)` sends the point mass at `x ∈ D_{r(e)}` to `f_e(x)` scaled by
//! `sqrt(w(x) / w(f_e(x)))`; `π(P_v)` multiplies by the indicator of `D_v`.
//! Amplitudes are stored through their exact rational squares, so products
//! and relation checks never round.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use indexmap::IndexMap;
use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};
use serde_json::json;

use crate::branching::{exact, validate, DiscreteBranchingSystem};
use crate::error::{Error, Result};
use crate::graph::DirectedGraph;
use crate::report::{CheckEntry, Report};

/// Dense export is refused above this many universe points by default.
pub const DEFAULT_MATRIX_LIMIT: usize = 4096;

/// A positive real held as its exact rational square.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Amplitude {
    square: BigRational,
}

impl fmt::Debug for Amplitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sqrt({})", self.square)
    }
}

impl Amplitude {
    pub fn one() -> Self {
        Self {
            square: BigRational::one(),
        }
    }

    /// `sqrt(square)`; `None` unless `square > 0`.
    pub fn from_square(square: BigRational) -> Option<Self> {
        square.is_positive().then_some(Self { square })
    }

    /// The amplitude with value `a`; `None` unless `a` is finite and positive.
    pub fn from_f64(a: f64) -> Option<Self> {
        if !(a.is_finite() && a > 0.0) {
            return None;
        }
        let r = exact(a);
        Some(Self { square: &r * &r })
    }

    pub fn square(&self) -> &BigRational {
        &self.square
    }

    pub fn value(&self) -> f64 {
        self.square.to_f64().expect("finite square").sqrt()
    }

    pub fn is_one(&self) -> bool {
        self.square.is_one()
    }

    pub fn mul(&self, other: &Amplitude) -> Amplitude {
        Amplitude {
            square: &self.square * &other.square,
        }
    }

    /// Multiplies by the positive rational `r` (not its square root).
    pub fn scale(&self, r: &BigRational) -> Amplitude {
        Amplitude {
            square: &self.square * r * r,
        }
    }
}

/// A partial injection on universe indices with positive amplitudes:
/// `(Tφ)(j) = a(i)·φ(i)` when `i ↦ j`, zero elsewhere.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WeightedPartialIsometry {
    entries: BTreeMap<usize, (usize, Amplitude)>,
}

impl WeightedPartialIsometry {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Builds from `(domain index, image index, amplitude)` triples; fails
    /// when two indices share an image or a domain index repeats.
    pub fn new(entries: impl IntoIterator<Item = (usize, usize, Amplitude)>) -> Result<Self> {
        let mut out = BTreeMap::new();
        let mut images = BTreeSet::new();
        for (i, j, a) in entries {
            if !images.insert(j) || out.insert(i, (j, a)).is_some() {
                return Err(Error::InvalidSystem(format!(
                    "mapping is not a partial injection at {i} -> {j}"
                )));
            }
        }
        Ok(Self { entries: out })
    }

    /// Identity on `support` with unit amplitude.
    pub fn identity_on(support: &BTreeSet<usize>) -> Self {
        Self {
            entries: support.iter().map(|&i| (i, (i, Amplitude::one()))).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn mapping(&self) -> BTreeMap<usize, usize> {
        self.entries.iter().map(|(&i, (j, _))| (i, *j)).collect()
    }

    pub fn amplitude(&self, i: usize) -> Option<&Amplitude> {
        self.entries.get(&i).map(|(_, a)| a)
    }

    pub fn image(&self, i: usize) -> Option<usize> {
        self.entries.get(&i).map(|(j, _)| *j)
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, &Amplitude)> {
        self.entries.iter().map(|(&i, (j, a))| (i, *j, a))
    }

    pub fn domain(&self) -> BTreeSet<usize> {
        self.entries.keys().copied().collect()
    }

    pub fn range(&self) -> BTreeSet<usize> {
        self.entries.values().map(|(j, _)| *j).collect()
    }

    /// True when the operator is the identity map with unit amplitudes on
    /// its domain, i.e. the diagonal projection onto it.
    pub fn is_projection(&self) -> bool {
        self.entries.iter().all(|(i, (j, a))| i == j && a.is_one())
    }

    /// Applies the operator to a vector given by its nonzero coordinates.
    pub fn apply(&self, phi: &BTreeMap<usize, f64>) -> BTreeMap<usize, f64> {
        phi.iter()
            .filter_map(|(i, x)| self.entries.get(i).map(|(j, a)| (*j, a.value() * x)))
            .collect()
    }
}

/// Transpose: `j ↦ i` whenever `i ↦ j`, same amplitude. This is the
/// Hilbert-space adjoint for the counting measure.
pub fn adjoint(t: &WeightedPartialIsometry) -> WeightedPartialIsometry {
    WeightedPartialIsometry {
        entries: t
            .entries
            .iter()
            .map(|(&i, (j, a))| (*j, (i, a.clone())))
            .collect(),
    }
}

/// Adjoint in `L²(X, μ)` with point masses `w`: the amplitude of `j ↦ i`
/// becomes `a(i)·w(j)/w(i)`.
pub fn adjoint_weighted(
    t: &WeightedPartialIsometry,
    weights: &BTreeMap<usize, BigRational>,
) -> WeightedPartialIsometry {
    let w = |j: usize| weights.get(&j).cloned().unwrap_or_else(BigRational::one);
    WeightedPartialIsometry {
        entries: t
            .entries
            .iter()
            .map(|(&i, (j, a))| (*j, (i, a.scale(&(w(*j) / w(i))))))
            .collect(),
    }
}

/// `a ∘ b`: apply `b` first.
pub fn compose(a: &WeightedPartialIsometry, b: &WeightedPartialIsometry) -> WeightedPartialIsometry {
    WeightedPartialIsometry {
        entries: b
            .entries
            .iter()
            .filter_map(|(&i, (j, beta))| {
                a.entries
                    .get(j)
                    .map(|(k, alpha)| (i, (*k, alpha.mul(beta))))
            })
            .collect(),
    }
}

/// Multiplication by the indicator of `support`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DiagonalProjection {
    pub support: BTreeSet<usize>,
}

impl DiagonalProjection {
    pub fn as_operator(&self) -> WeightedPartialIsometry {
        WeightedPartialIsometry::identity_on(&self.support)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorFamily {
    pub universe: Vec<usize>,
    pub weights: BTreeMap<usize, BigRational>,
    pub edge_ops: IndexMap<String, WeightedPartialIsometry>,
    pub vertex_projs: IndexMap<String, DiagonalProjection>,
}

impl GeneratorFamily {
    pub fn weight(&self, j: usize) -> f64 {
        self.weights
            .get(&j)
            .map_or(1.0, |w| w.to_f64().expect("finite weight"))
    }

    /// `⟨φ, φ⟩ = Σ w(j)|φ(j)|²`.
    pub fn weighted_norm(&self, phi: &BTreeMap<usize, f64>) -> f64 {
        phi.iter()
            .map(|(&j, x)| self.weight(j) * x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn adjoint(&self, t: &WeightedPartialIsometry) -> WeightedPartialIsometry {
        adjoint_weighted(t, &self.weights)
    }
}

/// The generators of the representation induced by a valid system.
pub fn induce(bs: &DiscreteBranchingSystem, g: &DirectedGraph) -> Result<GeneratorFamily> {
    let report = validate(bs, g)?;
    if let Some(failure) = report.failures().next() {
        return Err(Error::InvalidSystem(format!(
            "condition {} fails: {}",
            failure.item, failure.witness
        )));
    }
    let weights: BTreeMap<usize, BigRational> =
        bs.universe.iter().map(|&j| (j, bs.exact_weight(j))).collect();
    let edge_ops = g
        .edge_ids()
        .map(|e| {
            let name = g.edge_name(e);
            let op = WeightedPartialIsometry::new(bs.edge_maps[name].iter().map(|(&x, &y)| {
                let square = &weights[&x] / &weights[&y];
                (x, y, Amplitude::from_square(square).expect("positive weights"))
            }))
            .expect("validated maps are injective");
            (name.to_string(), op)
        })
        .collect();
    let vertex_projs = g
        .vertices()
        .map(|v| {
            let name = g.vertex_name(v);
            (
                name.to_string(),
                DiagonalProjection {
                    support: bs.domain_sets[name].clone(),
                },
            )
        })
        .collect();
    Ok(GeneratorFamily {
        universe: bs.universe.clone(),
        weights,
        edge_ops,
        vertex_projs,
    })
}

fn first_difference(
    lhs: &WeightedPartialIsometry,
    rhs: &WeightedPartialIsometry,
) -> Option<usize> {
    lhs.entries
        .keys()
        .chain(rhs.entries.keys())
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .find(|i| lhs.entries.get(i) != rhs.entries.get(i))
}

/// Cuntz-Krieger relations, checked exactly:
/// `i` orthogonal vertex projections, `ii` `S_e*S_e = P_r(e)`,
/// `iii` `S_eS_e* ≤ P_s(e)`, `iv` `S_e*S_f = 0` for `e ≠ f`,
/// `v` `P_v = Σ_{s(e)=v} S_eS_e*` at emitters.
pub fn verify_ck(fam: &GeneratorFamily, g: &DirectedGraph) -> Report {
    let mut report = Report::default();
    let missing: Vec<String> = g
        .edge_ids()
        .map(|e| g.edge_name(e))
        .filter(|e| !fam.edge_ops.contains_key(*e))
        .chain(
            g.vertices()
                .map(|v| g.vertex_name(v))
                .filter(|v| !fam.vertex_projs.contains_key(*v)),
        )
        .map(str::to_string)
        .collect();
    if !missing.is_empty() {
        report.push(CheckEntry::fail("well-formed", json!({"missing": missing})));
        for item in ["i", "ii", "iii", "iv", "v"] {
            report.push(CheckEntry::not_applicable(item));
        }
        return report;
    }
    report.push(CheckEntry::pass("well-formed"));

    let op = |e| &fam.edge_ops[g.edge_name(e)];
    let proj = |v| &fam.vertex_projs[g.vertex_name(v)];

    let mut witness = None;
    'outer: for u in g.vertices() {
        for v in g.vertices().filter(|&v| v > u) {
            if let Some(j) = proj(u).support.intersection(&proj(v).support).next() {
                witness = Some(json!({"vertices": [g.vertex_name(u), g.vertex_name(v)], "index": j}));
                break 'outer;
            }
        }
    }
    report.push(CheckEntry::from_witness("i", witness));

    let witness = g.edge_ids().find_map(|e| {
        let lhs = compose(&fam.adjoint(op(e)), op(e));
        let rhs = proj(g.range(e)).as_operator();
        first_difference(&lhs, &rhs).map(|j| json!({"edge": g.edge_name(e), "index": j}))
    });
    report.push(CheckEntry::from_witness("ii", witness));

    let witness = g.edge_ids().find_map(|e| {
        let range_proj = compose(op(e), &fam.adjoint(op(e)));
        let source = &proj(g.source(e)).support;
        let outside = range_proj
            .entries()
            .find(|(i, _, _)| !source.contains(i))
            .map(|(i, _, _)| json!({"edge": g.edge_name(e), "index": i}));
        outside
    });
    report.push(CheckEntry::from_witness("iii", witness));

    let mut witness = None;
    'outer: for e in g.edge_ids() {
        for f in g.edge_ids().filter(|&f| f != e) {
            let product = compose(&fam.adjoint(op(e)), op(f));
            let first = product.entries().next().map(|(i, _, _)| i);
            if let Some(i) = first {
                witness = Some(json!({"edges": [g.edge_name(e), g.edge_name(f)], "index": i}));
                break 'outer;
            }
        }
    }
    report.push(CheckEntry::from_witness("iv", witness));

    let witness = g.vertices().find_map(|v| {
        let emitted = g.emitted(v);
        if emitted.is_empty() {
            return None;
        }
        // Diagonal of Σ S_eS_e*; a single contribution is compared exactly.
        let mut diagonal: BTreeMap<usize, Vec<Amplitude>> = BTreeMap::new();
        let mut off_diagonal = None;
        for &e in emitted {
            for (i, j, a) in compose(op(e), &fam.adjoint(op(e))).entries() {
                if i != j {
                    off_diagonal.get_or_insert(i);
                }
                diagonal.entry(j).or_default().push(a.clone());
            }
        }
        let support = &proj(v).support;
        let bad = off_diagonal.or_else(|| {
            support
                .iter()
                .chain(diagonal.keys())
                .copied()
                .collect::<BTreeSet<_>>()
                .into_iter()
                .find(|j| {
                    let expected_one = support.contains(j);
                    match diagonal.get(j).map(Vec::as_slice) {
                        None => expected_one,
                        Some([a]) => a.is_one() != expected_one,
                        Some(many) => {
                            let sum: f64 = many.iter().map(Amplitude::value).sum();
                            let target = if expected_one { 1.0 } else { 0.0 };
                            (sum - target).abs() > 1e-12
                        }
                    }
                })
        });
        bad.map(|j| json!({"vertex": g.vertex_name(v), "index": j}))
    });
    report.push(CheckEntry::from_witness("v", witness));
    report
}

/// Dense matrix of one generator, rows and columns in universe order.
pub fn to_matrix(fam: &GeneratorFamily, id: &str, limit: usize) -> Result<DMatrix<f64>> {
    let n = fam.universe.len();
    if n > limit {
        return Err(Error::UniverseTooLarge { size: n, limit });
    }
    let op = if let Some(op) = fam.edge_ops.get(id) {
        op.clone()
    } else if let Some(p) = fam.vertex_projs.get(id) {
        p.as_operator()
    } else {
        return Err(Error::UnknownEdge(id.to_string()));
    };
    operator_matrix(&fam.universe, &op)
}

/// Dense matrix of an arbitrary operator over `universe`.
pub fn operator_matrix(universe: &[usize], op: &WeightedPartialIsometry) -> Result<DMatrix<f64>> {
    let position: BTreeMap<usize, usize> =
        universe.iter().enumerate().map(|(p, &j)| (j, p)).collect();
    let n = universe.len();
    let mut m = DMatrix::zeros(n, n);
    for (i, j, a) in op.entries() {
        let (Some(&col), Some(&row)) = (position.get(&i), position.get(&j)) else {
            return Err(Error::InvalidSystem(format!(
                "operator entry {i} -> {j} leaves the universe"
            )));
        };
        m[(row, col)] = a.value();
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::Status;
    use num_bigint::BigInt;

    fn rational(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn amp(a: f64) -> Amplitude {
        Amplitude::from_f64(a).unwrap()
    }

    fn single_edge() -> (DirectedGraph, DiscreteBranchingSystem) {
        let g = DirectedGraph::from_names(&["u", "v"], &[("e", "u", "v")]).unwrap();
        let bs = DiscreteBranchingSystem::from_json(
            r#"{"universe":[0,1],"R":{"e":[0]},"D":{"u":[0],"v":[1]},"f":{"e":{"1":0}}}"#,
        )
        .unwrap();
        (g, bs)
    }

    #[test]
    fn unit_system_induces_partial_permutation() {
        let (g, bs) = single_edge();
        let fam = induce(&bs, &g).unwrap();
        let s = &fam.edge_ops["e"];
        assert_eq!(s.mapping(), BTreeMap::from([(1, 0)]));
        assert!(s.amplitude(1).unwrap().is_one());
        assert!(verify_ck(&fam, &g).passed());
        let m = to_matrix(&fam, "e", 16).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]));
        let p = to_matrix(&fam, "v", 16).unwrap();
        assert_eq!(p, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]));
        assert!(matches!(
            to_matrix(&fam, "e", 1),
            Err(Error::UniverseTooLarge { size: 2, limit: 1 })
        ));
    }

    #[test]
    fn weighted_amplitude_is_square_root_of_ratio() {
        let g = DirectedGraph::from_names(&["u", "v"], &[("e", "u", "v")]).unwrap();
        let bs = DiscreteBranchingSystem::from_json(
            r#"{"universe":[1,2],"weights":{"1":1.0,"2":4.0},"R":{"e":[1]},"D":{"u":[1],"v":[2]},"f":{"e":{"2":1}}}"#,
        )
        .unwrap();
        let fam = induce(&bs, &g).unwrap();
        let a = fam.edge_ops["e"].amplitude(2).unwrap();
        assert_eq!(a.square(), &rational(4, 1));
        assert_eq!(a.value(), 2.0);
        // Still a partial isometry for the weighted inner product.
        let report = verify_ck(&fam, &g);
        assert!(report.passed(), "{report:?}");
        let phi = BTreeMap::from([(2, 0.5)]);
        let out = fam.edge_ops["e"].apply(&phi);
        assert_eq!(fam.weighted_norm(&out), fam.weighted_norm(&phi));
        // Against the plain transpose the product is not a projection.
        let plain = compose(&adjoint(&fam.edge_ops["e"]), &fam.edge_ops["e"]);
        assert!(!plain.is_projection());
    }

    #[test]
    fn empty_edge_set_gives_projections_only() {
        let g = DirectedGraph::from_names(&["a", "b"], &[]).unwrap();
        let bs = DiscreteBranchingSystem::from_json(
            r#"{"universe":[0,1,2],"R":{},"D":{"a":[0],"b":[1,2]},"f":{}}"#,
        )
        .unwrap();
        let fam = induce(&bs, &g).unwrap();
        assert!(fam.edge_ops.is_empty());
        assert_eq!(fam.vertex_projs.len(), 2);
        assert!(verify_ck(&fam, &g).passed());
    }

    #[test]
    fn invalid_system_is_rejected() {
        let (g, mut bs) = single_edge();
        bs.range_sets["e"] = BTreeSet::from([1]);
        bs.edge_maps["e"] = BTreeMap::from([(1, 1)]);
        assert!(matches!(induce(&bs, &g), Err(Error::InvalidSystem(_))));
    }

    #[test]
    fn adjoint_transposes_single_entry() {
        let t = WeightedPartialIsometry::new([(2, 1, amp(2.0))]).unwrap();
        let a = adjoint(&t);
        assert_eq!(a.mapping(), BTreeMap::from([(1, 2)]));
        assert_eq!(a.amplitude(1).unwrap().value(), 2.0);
        assert_eq!(adjoint(&a), t);
        let id = WeightedPartialIsometry::identity_on(&BTreeSet::from([0, 3, 5]));
        assert_eq!(adjoint(&id), id);
    }

    #[test]
    fn compose_adjoint_with_self_squares_amplitudes() {
        let s = WeightedPartialIsometry::new([(0, 3, amp(1.5)), (1, 2, amp(0.5))]).unwrap();
        let d = compose(&adjoint(&s), &s);
        assert_eq!(d.mapping(), BTreeMap::from([(0, 0), (1, 1)]));
        assert_eq!(d.amplitude(0).unwrap().value(), 2.25);
        assert_eq!(d.amplitude(1).unwrap().value(), 0.25);
    }

    #[test]
    fn compose_disjoint_is_zero() {
        let a = WeightedPartialIsometry::new([(0, 1, amp(1.0))]).unwrap();
        let b = WeightedPartialIsometry::new([(2, 3, amp(1.0))]).unwrap();
        assert!(compose(&a, &b).is_zero());
    }

    #[test]
    fn non_injective_mapping_rejected() {
        assert!(WeightedPartialIsometry::new([(0, 1, amp(1.0)), (2, 1, amp(1.0))]).is_err());
    }

    #[test]
    fn broken_containment_fails_relation_three() {
        let (g, bs) = single_edge();
        let mut fam = induce(&bs, &g).unwrap();
        // Move the range of S_e onto index 1, outside D_u = {0}.
        fam.edge_ops["e"] = WeightedPartialIsometry::new([(1, 1, Amplitude::one())]).unwrap();
        let report = verify_ck(&fam, &g);
        let entry = report.get("iii").unwrap();
        assert_eq!(entry.status, Status::Fail);
        assert_eq!(entry.witness["index"], 1);
    }

    #[test]
    fn relation_five_mutation() {
        let g = DirectedGraph::from_names(
            &["v", "a", "b"],
            &[("e", "v", "a"), ("f", "v", "b")],
        )
        .unwrap();
        let sinks = BTreeMap::from([("a".to_string(), 1), ("b".to_string(), 2)]);
        let bs = crate::branching::synthesize(&g, &sinks, 0).unwrap();
        let mut fam = induce(&bs, &g).unwrap();
        assert!(verify_ck(&fam, &g).passed());
        let f = &fam.edge_ops["f"];
        let (i, _, _) = f.entries().last().unwrap();
        let trimmed = WeightedPartialIsometry::new(
            f.entries().filter(|(x, _, _)| *x != i).map(|(x, y, a)| (x, y, a.clone())),
        )
        .unwrap();
        fam.edge_ops["f"] = trimmed;
        let report = verify_ck(&fam, &g);
        assert_eq!(report.status("v"), Some(Status::Fail));
    }

    #[test]
    fn missing_generator_is_reported() {
        let (g, bs) = single_edge();
        let mut fam = induce(&bs, &g).unwrap();
        fam.edge_ops.clear();
        let report = verify_ck(&fam, &g);
        assert_eq!(report.status("well-formed"), Some(Status::Fail));
    }

    #[test]
    fn weighted_adjoint_of_induced_generator_inverts_amplitude() {
        let mut weights = BTreeMap::new();
        weights.insert(0, rational(2, 1));
        weights.insert(1, rational(1, 3));
        let s = WeightedPartialIsometry::new([(
            1,
            0,
            Amplitude::from_square(rational(1, 6)).unwrap(),
        )])
        .unwrap();
        let a = adjoint_weighted(&s, &weights);
        assert_eq!(a.amplitude(0).unwrap().square(), &rational(6, 1));
        assert!(compose(&a, &s).is_projection());
    }
}

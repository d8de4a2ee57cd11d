//! Signatures and finite symmetric irreflexive structures.
//!
//! A relation of arity `k` holds on `k`-element vertex *sets*, so every
//! hyperedge is stored once, as a strictly increasing vertex array. Each
//! relation keeps a CSR incidence index (vertex → incident edge ids) so that
//! membership tests and neighbourhood scans cost `O(log deg)` and `O(deg)`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::scalar::Scalar;
use crate::{Error, Result};

/// Dense vertex index.
pub type Vertex = u32;

/// A relation weight `α`, held both exactly and as the nearest `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Weight {
    text: String,
    exact: BigRational,
    value: f64,
}

impl Weight {
    /// Parses a plain decimal such as `"0.55"` exactly.
    pub fn parse_decimal(text: &str) -> Result<Self> {
        let t = text.trim();
        let (int_part, frac_part) = match t.split_once('.') {
            Some((i, f)) => (i, f),
            None => (t, ""),
        };
        let digits_ok = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
        if (int_part.is_empty() && frac_part.is_empty())
            || !digits_ok(int_part)
            || !digits_ok(frac_part)
        {
            return Err(Error::InvalidSignature(format!(
                "`{text}` is not a decimal weight"
            )));
        }
        let mut digits = String::with_capacity(int_part.len() + frac_part.len());
        digits.push_str(int_part);
        digits.push_str(frac_part);
        let numer: BigInt = digits
            .parse()
            .map_err(|_| Error::InvalidSignature(text.to_string()))?;
        let denom = num_traits::pow(BigInt::from(10), frac_part.len());
        let value = t
            .parse::<f64>()
            .map_err(|_| Error::InvalidSignature(format!("`{text}` is not a decimal weight")))?;
        Ok(Self {
            text: t.to_string(),
            exact: BigRational::new(numer, denom),
            value,
        })
    }

    pub fn from_ratio(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::InvalidSignature(
                "weight with zero denominator".into(),
            ));
        }
        Ok(Self {
            text: format!("{num}/{den}"),
            exact: BigRational::new(num.into(), den.into()),
            value: num as f64 / den as f64,
        })
    }

    pub fn exact(&self) -> &BigRational {
        &self.exact
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

impl FromStr for Weight {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse_decimal(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Relation {
    pub name: String,
    pub arity: usize,
    pub alpha: Weight,
    pub gamma: f64,
}

impl Relation {
    pub fn new(name: impl Into<String>, arity: usize, alpha: Weight, gamma: f64) -> Self {
        Self {
            name: name.into(),
            arity,
            alpha,
            gamma,
        }
    }
}

/// The expanded language: relation names, arities, weights `αᵢ` and scale
/// factors `γᵢ`.
///
/// With `independence_mode` on, the weights are taken to be linearly
/// independent with `1` over ℚ, so a dimension form is zero only when all of
/// its coefficients are.
#[derive(Clone, Debug, PartialEq)]
pub struct Signature {
    relations: Vec<Relation>,
    independence_mode: bool,
}

impl Signature {
    pub fn new(relations: Vec<Relation>, independence_mode: bool) -> Result<Self> {
        for (i, r) in relations.iter().enumerate() {
            if r.arity == 0 {
                return Err(Error::InvalidSignature(format!(
                    "relation `{}` has arity 0",
                    r.name
                )));
            }
            if relations[..i].iter().any(|q| q.name == r.name) {
                return Err(Error::InvalidSignature(format!(
                    "duplicate relation `{}`",
                    r.name
                )));
            }
            let a = r.alpha.exact();
            if !(a > &BigRational::zero() && a <= &BigRational::one()) {
                return Err(Error::InvalidSignature(format!(
                    "alpha of `{}` must lie in (0, 1], got {}",
                    r.name,
                    r.alpha.text()
                )));
            }
            if !(0.0..=1.0).contains(&r.gamma) {
                return Err(Error::InvalidSignature(format!(
                    "gamma of `{}` must lie in [0, 1], got {}",
                    r.name, r.gamma
                )));
            }
        }
        Ok(Self {
            relations,
            independence_mode,
        })
    }

    /// One symmetric binary relation `R` with the given decimal weight and `γ = 1`.
    pub fn graph(alpha: &str) -> Result<Arc<Self>> {
        let r = Relation::new("R", 2, Weight::parse_decimal(alpha)?, 1.0);
        Ok(Arc::new(Self::new(vec![r], true)?))
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn relation(&self, i: usize) -> &Relation {
        &self.relations[i]
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    pub fn independence_mode(&self) -> bool {
        self.independence_mode
    }

    pub fn with_independence_mode(mut self, on: bool) -> Self {
        self.independence_mode = on;
        self
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.relations.iter().position(|r| r.name == name)
    }

    /// Largest arity in the language.
    pub fn max_arity(&self) -> usize {
        self.relations.iter().map(|r| r.arity).max().unwrap_or(0)
    }

    /// The weights converted into `T`.
    pub fn alphas<T: Scalar>(&self) -> Vec<T> {
        self.relations
            .iter()
            .map(|r| T::from_exact(r.alpha.exact()))
            .collect()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawSignature = serde_json::from_str(text)?;
        let relations = raw
            .relations
            .into_iter()
            .map(|r| {
                let alpha = match r.alpha {
                    RawAlpha::Decimal(s) => Weight::parse_decimal(&s)?,
                    RawAlpha::Ratio { num, den } => Weight::from_ratio(num, den)?,
                };
                Ok(Relation::new(r.name, r.arity, alpha, r.gamma))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(relations, raw.independence_mode)
    }

    pub fn to_json(&self) -> String {
        let raw = RawSignature {
            independence_mode: self.independence_mode,
            relations: self
                .relations
                .iter()
                .map(|r| RawRelation {
                    name: r.name.clone(),
                    arity: r.arity,
                    alpha: match r.alpha.text().split_once('/') {
                        Some((n, d)) => RawAlpha::Ratio {
                            num: n.parse().expect("ratio weight text"),
                            den: d.parse().expect("ratio weight text"),
                        },
                        None => RawAlpha::Decimal(r.alpha.text().to_string()),
                    },
                    gamma: r.gamma,
                })
                .collect(),
        };
        serde_json::to_string(&raw).expect("signature serializes")
    }
}

#[derive(Serialize, Deserialize)]
struct RawSignature {
    #[serde(default = "default_true")]
    independence_mode: bool,
    relations: Vec<RawRelation>,
}

#[derive(Serialize, Deserialize)]
struct RawRelation {
    name: String,
    arity: usize,
    alpha: RawAlpha,
    #[serde(default = "default_gamma")]
    gamma: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawAlpha {
    Decimal(String),
    Ratio { num: i64, den: i64 },
}

fn default_true() -> bool {
    true
}

fn default_gamma() -> f64 {
    1.0
}

/// Hyperedges of one relation plus an incidence index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct EdgeSet {
    arity: usize,
    /// Edges in lexicographic order, `arity` vertices each.
    flat: Vec<Vertex>,
    /// CSR offsets into `incident`, length `n + 1`.
    offsets: Vec<u32>,
    /// Incident edge ids per vertex, ascending (hence lexicographic).
    incident: Vec<u32>,
    /// For binary relations: the other endpoint, parallel to `incident`.
    nbrs: Vec<Vertex>,
}

impl EdgeSet {
    /// `flat` must already be sorted, deduplicated and validated.
    fn from_sorted(arity: usize, n: usize, flat: Vec<Vertex>) -> Self {
        let m = flat.len().checked_div(arity).unwrap_or(0);
        let mut offsets = vec![0u32; n + 1];
        for &v in &flat {
            offsets[v as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut incident = vec![0u32; flat.len()];
        for id in 0..m {
            for &v in &flat[id * arity..(id + 1) * arity] {
                incident[fill[v as usize] as usize] = id as u32;
                fill[v as usize] += 1;
            }
        }
        let nbrs = if arity == 2 {
            let mut nbrs = vec![0; incident.len()];
            for v in 0..n {
                for slot in offsets[v] as usize..offsets[v + 1] as usize {
                    let id = incident[slot] as usize;
                    let (a, b) = (flat[2 * id], flat[2 * id + 1]);
                    nbrs[slot] = if a as usize == v { b } else { a };
                }
            }
            nbrs
        } else {
            Vec::new()
        };
        Self {
            arity,
            flat,
            offsets,
            incident,
            nbrs,
        }
    }

    fn len(&self) -> usize {
        self.flat.len().checked_div(self.arity).unwrap_or(0)
    }

    fn edge(&self, id: usize) -> &[Vertex] {
        &self.flat[id * self.arity..(id + 1) * self.arity]
    }

    fn incident(&self, v: Vertex) -> &[u32] {
        let v = v as usize;
        &self.incident[self.offsets[v] as usize..self.offsets[v + 1] as usize]
    }

    fn contains(&self, edge: &[Vertex]) -> bool {
        debug_assert_eq!(edge.len(), self.arity);
        let ids = self.incident(edge[0]);
        ids.binary_search_by(|&id| self.edge(id as usize).cmp(edge))
            .is_ok()
    }
}

/// A finite structure on the universe `0..n`.
///
/// Immutable once built; clones share the signature.
#[derive(Clone, Debug)]
pub struct FiniteStructure {
    sig: Arc<Signature>,
    n: usize,
    rels: Vec<EdgeSet>,
}

impl PartialEq for FiniteStructure {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && (Arc::ptr_eq(&self.sig, &other.sig) || self.sig == other.sig)
            && self
                .rels
                .iter()
                .zip(&other.rels)
                .all(|(a, b)| a.flat == b.flat)
    }
}

impl Eq for FiniteStructure {}

impl FiniteStructure {
    pub fn empty(sig: Arc<Signature>, n: usize) -> Self {
        let rels = sig
            .relations()
            .iter()
            .map(|r| EdgeSet::from_sorted(r.arity, n, Vec::new()))
            .collect();
        Self { sig, n, rels }
    }

    /// Builds a structure from per-relation hyperedge lists. Vertices inside a
    /// hyperedge may come in any order; duplicates are merged.
    pub fn from_edges(sig: Arc<Signature>, n: usize, edges: Vec<Vec<Vec<Vertex>>>) -> Result<Self> {
        if edges.len() > sig.len() {
            return Err(Error::Malformed(format!(
                "{} relations given, signature has {}",
                edges.len(),
                sig.len()
            )));
        }
        let mut rels = Vec::with_capacity(sig.len());
        for (i, rel) in sig.relations().iter().enumerate() {
            let mut list: Vec<Vec<Vertex>> = Vec::new();
            for mut e in edges.get(i).cloned().unwrap_or_default() {
                if e.len() != rel.arity {
                    return Err(Error::ArityMismatch {
                        relation: rel.name.clone(),
                        got: e.len(),
                        edge: e,
                        arity: rel.arity,
                    });
                }
                if let Some(&v) = e.iter().find(|&&v| v as usize >= n) {
                    return Err(Error::VertexOutOfRange {
                        vertex: v,
                        n,
                        context: Some(format!("relation {} hyperedge {:?}", rel.name, e)),
                    });
                }
                let original = e.clone();
                e.sort_unstable();
                if e.windows(2).any(|w| w[0] == w[1]) {
                    return Err(Error::Irreflexive {
                        relation: rel.name.clone(),
                        edge: original,
                    });
                }
                list.push(e);
            }
            list.sort_unstable();
            list.dedup();
            let flat = list.into_iter().flatten().collect();
            rels.push(EdgeSet::from_sorted(rel.arity, n, flat));
        }
        Ok(Self { sig, n, rels })
    }

    /// Graph on `0..n` for a signature whose first relation is binary.
    pub fn graph(sig: Arc<Signature>, n: usize, edges: &[(Vertex, Vertex)]) -> Result<Self> {
        let list = edges.iter().map(|&(a, b)| vec![a, b]).collect();
        Self::from_edges(sig, n, vec![list])
    }

    /// Trusted constructor: each `flat[i]` is sorted, deduplicated and valid.
    pub(crate) fn from_sorted_flat(sig: Arc<Signature>, n: usize, flat: Vec<Vec<Vertex>>) -> Self {
        let rels = sig
            .relations()
            .iter()
            .zip(flat)
            .map(|(r, f)| EdgeSet::from_sorted(r.arity, n, f))
            .collect();
        Self { sig, n, rels }
    }

    pub fn sig(&self) -> &Arc<Signature> {
        &self.sig
    }

    /// Universe size.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn relation_count(&self) -> usize {
        self.rels.len()
    }

    pub fn arity(&self, rel: usize) -> usize {
        self.rels[rel].arity
    }

    /// `w_rel`: number of hyperedges of relation `rel`.
    pub fn edge_count(&self, rel: usize) -> usize {
        self.rels[rel].len()
    }

    pub fn edge_counts(&self) -> Vec<usize> {
        self.rels.iter().map(EdgeSet::len).collect()
    }

    pub fn total_edges(&self) -> usize {
        self.rels.iter().map(EdgeSet::len).sum()
    }

    /// Hyperedges of `rel` in lexicographic order.
    pub fn edges(&self, rel: usize) -> impl Iterator<Item = &[Vertex]> + '_ {
        let r = &self.rels[rel];
        r.flat.chunks_exact(r.arity.max(1))
    }

    pub fn edge(&self, rel: usize, id: usize) -> &[Vertex] {
        self.rels[rel].edge(id)
    }

    /// Ids of the `rel`-hyperedges containing `v`, ascending.
    pub fn incident(&self, rel: usize, v: Vertex) -> &[u32] {
        self.rels[rel].incident(v)
    }

    /// Sorted neighbour list of `v` in a binary relation.
    pub fn neighbors(&self, rel: usize, v: Vertex) -> &[Vertex] {
        let r = &self.rels[rel];
        assert_eq!(r.arity, 2, "neighbors() needs a binary relation");
        &r.nbrs[r.offsets[v as usize] as usize..r.offsets[v as usize + 1] as usize]
    }

    /// Number of hyperedges (all relations) containing `v`.
    pub fn degree(&self, v: Vertex) -> usize {
        self.rels.iter().map(|r| r.incident(v).len()).sum()
    }

    /// Membership test for a hyperedge given in increasing vertex order.
    pub fn contains_sorted(&self, rel: usize, edge: &[Vertex]) -> bool {
        let r = &self.rels[rel];
        edge.len() == r.arity && edge.iter().all(|&v| (v as usize) < self.n) && r.contains(edge)
    }

    /// Membership test for a hyperedge in any vertex order.
    pub fn has_edge(&self, rel: usize, edge: &[Vertex]) -> bool {
        let mut e = edge.to_vec();
        e.sort_unstable();
        self.contains_sorted(rel, &e)
    }

    /// Vertices sharing at least one hyperedge with `v`, sorted.
    pub fn primal_neighbors(&self, v: Vertex) -> Vec<Vertex> {
        let mut out = Vec::new();
        for (i, r) in self.rels.iter().enumerate() {
            if r.arity == 2 {
                out.extend_from_slice(self.neighbors(i, v));
            } else {
                for &id in r.incident(v) {
                    out.extend(r.edge(id as usize).iter().copied().filter(|&u| u != v));
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Substructure induced on `subset`, relabelled `0..|subset|` in increasing
    /// vertex order.
    pub fn induced_substructure(&self, subset: &[Vertex]) -> Result<Self> {
        let mut s = subset.to_vec();
        s.sort_unstable();
        s.dedup();
        if let Some(&v) = s.iter().find(|&&v| v as usize >= self.n) {
            return Err(Error::VertexOutOfRange {
                vertex: v,
                n: self.n,
                context: Some("induced substructure".into()),
            });
        }
        let mut rels = Vec::with_capacity(self.rels.len());
        for r in &self.rels {
            let mut flat = Vec::new();
            for &v in &s {
                for &id in r.incident(v) {
                    let e = r.edge(id as usize);
                    if e[0] != v {
                        continue;
                    }
                    if e.iter().all(|u| s.binary_search(u).is_ok()) {
                        flat.extend(e.iter().map(|u| s.binary_search(u).unwrap() as Vertex));
                    }
                }
            }
            rels.push(EdgeSet::from_sorted(r.arity, s.len(), flat));
        }
        Ok(Self {
            sig: self.sig.clone(),
            n: s.len(),
            rels,
        })
    }

    /// Per-relation count of hyperedges lying inside `subset` (sorted).
    pub fn edge_counts_within(&self, subset: &[Vertex]) -> Vec<usize> {
        self.rels
            .iter()
            .map(|r| {
                subset
                    .iter()
                    .flat_map(|&v| r.incident(v).iter().map(move |&id| (v, id)))
                    .filter(|&(v, id)| {
                        let e = r.edge(id as usize);
                        e[0] == v && e.iter().all(|u| subset.binary_search(u).is_ok())
                    })
                    .count()
            })
            .collect()
    }

    /// Parses `{"n": int, "edges": {relname: [[v, …], …]}}`.
    pub fn from_json(text: &str, sig: Arc<Signature>) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        Self::from_json_value(&value, sig)
    }

    pub fn from_json_value(value: &Value, sig: Arc<Signature>) -> Result<Self> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Malformed("structure must be a JSON object".into()))?;
        let n = obj
            .get("n")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Malformed("missing non-negative integer field `n`".into()))?
            as usize;
        let mut lists: Vec<Vec<Vec<Vertex>>> = vec![Vec::new(); sig.len()];
        if let Some(edges) = obj.get("edges") {
            let edges = edges
                .as_object()
                .ok_or_else(|| Error::Malformed("`edges` must be an object".into()))?;
            for (name, list) in edges {
                let rel = sig
                    .index_of(name)
                    .ok_or_else(|| Error::UnknownRelation(name.clone()))?;
                let list = list.as_array().ok_or_else(|| {
                    Error::Malformed(format!("edges of `{name}` must be an array"))
                })?;
                for e in list {
                    let e = e.as_array().ok_or_else(|| {
                        Error::Malformed(format!("hyperedge {e} of `{name}` must be an array"))
                    })?;
                    let verts = e
                        .iter()
                        .map(|v| {
                            v.as_u64()
                                .filter(|&v| v <= Vertex::MAX as u64)
                                .map(|v| v as Vertex)
                                .ok_or_else(|| {
                                    Error::Malformed(format!("bad vertex {v} in relation `{name}`"))
                                })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    lists[rel].push(verts);
                }
            }
        }
        Self::from_edges(sig, n, lists)
    }

    /// Canonical text: relations in signature order, hyperedges sorted.
    pub fn to_json(&self) -> String {
        let mut out = format!("{{\"n\":{},\"edges\":{{", self.n);
        for (i, rel) in self.sig.relations().iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&serde_json::to_string(&rel.name).expect("string serializes"));
            out.push_str(":[");
            for (j, e) in self.edges(i).enumerate() {
                if j > 0 {
                    out.push(',');
                }
                out.push('[');
                for (k, v) in e.iter().enumerate() {
                    if k > 0 {
                        out.push(',');
                    }
                    out.push_str(&v.to_string());
                }
                out.push(']');
            }
            out.push(']');
        }
        out.push_str("}}");
        out
    }

    pub fn to_json_value(&self) -> Value {
        serde_json::from_str(&self.to_json()).expect("canonical form is valid JSON")
    }
}

impl fmt::Display for FiniteStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_json())
    }
}

/// Sorted, deduplicated copy of a vertex list.
pub fn vertex_set(vs: &[Vertex]) -> Vec<Vertex> {
    let mut v = vs.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

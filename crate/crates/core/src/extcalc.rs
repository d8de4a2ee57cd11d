//! Strong, intrinsic and primitive extensions, closures and copy counts.
//!
//! All extension tests are exhaustive over the `2^v` intermediate sets of an
//! extension adding `v` vertices. A [`Frame`] precomputes, for a base `A` and
//! added vertices `Y`, the hyperedges inside `A ∪ Y` that meet `Y` as bit
//! masks over `Y`, so `δ(A∪S₁ / A∪S₀)` for `S₀ ⊆ S₁ ⊆ Y` is a popcount-free
//! subset test per edge.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use serde_json::Value;
use smallvec::SmallVec;

use crate::dimension::{self, for_each_combination, DimForm, Sign};
use crate::embed::EmbeddingSearch;
use crate::structure::{vertex_set, FiniteStructure, Signature, Vertex};
use crate::{Error, Result};

/// Largest number of added vertices the exhaustive tests accept.
pub const MAX_EXTENSION: usize = 30;

/// Hyperedges of `A ∪ Y` meeting `Y`, as `(relation, mask over Y)`.
pub(crate) struct Frame {
    v: usize,
    edges: Vec<(usize, u64)>,
    symbols: usize,
}

impl Frame {
    /// `base` sorted; `extra` disjoint from it.
    pub(crate) fn new(m: &FiniteStructure, base: &[Vertex], extra: &[Vertex]) -> Self {
        assert!(
            extra.len() <= 63,
            "frame supports at most 63 added vertices"
        );
        let mut slot: Vec<(Vertex, usize)> =
            extra.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        slot.sort_unstable();
        let find = |v: Vertex| {
            slot.binary_search_by_key(&v, |&(u, _)| u)
                .ok()
                .map(|p| slot[p].1)
        };
        let mut edges = Vec::new();
        for (j, &y) in extra.iter().enumerate() {
            for r in 0..m.relation_count() {
                'edge: for &id in m.incident(r, y) {
                    let mut mask = 0u64;
                    for &u in m.edge(r, id as usize) {
                        match find(u) {
                            Some(i) => mask |= 1 << i,
                            None if base.binary_search(&u).is_ok() => {}
                            None => continue 'edge,
                        }
                    }
                    if mask.trailing_zeros() as usize == j {
                        edges.push((r, mask));
                    }
                }
            }
        }
        Self {
            v: extra.len(),
            edges,
            symbols: m.relation_count(),
        }
    }

    fn full(&self) -> u64 {
        if self.v == 64 {
            u64::MAX
        } else {
            (1u64 << self.v) - 1
        }
    }

    /// `δ(A∪outer / A∪inner)` for `inner ⊆ outer`.
    pub(crate) fn form(&self, outer: u64, inner: u64) -> DimForm {
        let mut coeffs: SmallVec<[i64; 4]> = SmallVec::from_elem(0, self.symbols);
        for &(r, mask) in &self.edges {
            if mask & !outer == 0 && mask & !inner != 0 {
                coeffs[r] -= 1;
            }
        }
        DimForm::new((outer.count_ones() - inner.count_ones()) as i64, &coeffs)
    }

    fn sign(&self, sig: &Signature, outer: u64, inner: u64) -> Sign {
        sig.sign(&self.form(outer, inner))
    }

    pub(crate) fn is_strong(&self, sig: &Signature) -> bool {
        (1..=self.full()).all(|s| self.sign(sig, s, 0) == Sign::Positive)
    }

    pub(crate) fn is_intrinsic(&self, sig: &Signature) -> bool {
        let full = self.full();
        (0..full).all(|s| self.sign(sig, full, s) == Sign::Negative)
    }

    fn is_primitive(&self, sig: &Signature) -> bool {
        let full = self.full();
        self.sign(sig, full, 0) == Sign::Positive
            && (1..=full).all(|s| self.sign(sig, full, s) != Sign::Positive)
    }
}

fn split(a: &[Vertex], b: &[Vertex]) -> Result<(Vec<Vertex>, Vec<Vertex>)> {
    let a = vertex_set(a);
    let b = vertex_set(b);
    if let Some(&v) = a.iter().find(|v| b.binary_search(v).is_err()) {
        return Err(Error::Malformed(format!(
            "vertex {v} of the base is not in the extension"
        )));
    }
    let extra: Vec<Vertex> = b
        .iter()
        .copied()
        .filter(|v| a.binary_search(v).is_err())
        .collect();
    if extra.len() > MAX_EXTENSION {
        return Err(Error::PatternTooLarge(extra.len(), MAX_EXTENSION));
    }
    Ok((a, extra))
}

/// `A ≤ₛ B` for vertex sets `A ⊆ B` of `m`.
pub fn is_strong_in(m: &FiniteStructure, a: &[Vertex], b: &[Vertex]) -> Result<bool> {
    let (a, extra) = split(a, b)?;
    Ok(Frame::new(m, &a, &extra).is_strong(m.sig()))
}

/// `A ≤ᵢ B` for vertex sets `A ⊆ B` of `m`.
pub fn is_intrinsic_in(m: &FiniteStructure, a: &[Vertex], b: &[Vertex]) -> Result<bool> {
    let (a, extra) = split(a, b)?;
    Ok(Frame::new(m, &a, &extra).is_intrinsic(m.sig()))
}

/// Whether `B` is a primitive extension of `A`, for vertex sets of `m`.
pub fn is_primitive_in(m: &FiniteStructure, a: &[Vertex], b: &[Vertex]) -> Result<bool> {
    let (a, extra) = split(a, b)?;
    Ok(Frame::new(m, &a, &extra).is_primitive(m.sig()))
}

/// A pair `A ⊆ B`: the structure `B` with a designated base vertex set.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtensionPattern {
    whole: FiniteStructure,
    base: Vec<Vertex>,
    extra: Vec<Vertex>,
    e_rel: DimForm,
    delta_rel: DimForm,
    gamma: f64,
}

impl ExtensionPattern {
    pub fn new(whole: FiniteStructure, base: &[Vertex]) -> Result<Self> {
        let base = vertex_set(base);
        if let Some(&v) = base.iter().find(|&&v| v as usize >= whole.n()) {
            return Err(Error::VertexOutOfRange {
                vertex: v,
                n: whole.n(),
                context: Some("pattern base".into()),
            });
        }
        let extra: Vec<Vertex> = (0..whole.n() as Vertex)
            .filter(|v| base.binary_search(v).is_err())
            .collect();
        if extra.len() > MAX_EXTENSION {
            return Err(Error::PatternTooLarge(extra.len(), MAX_EXTENSION));
        }
        Ok(Self {
            e_rel: dimension::e_rel(&whole, &base),
            delta_rel: dimension::delta_rel(&whole, &base),
            gamma: dimension::gamma_prod(&whole, &base),
            whole,
            base,
            extra,
        })
    }

    /// `{"structure": <structure>, "base": [v, …]}`.
    pub fn from_json(text: &str, sig: Arc<Signature>) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        let structure = value
            .get("structure")
            .ok_or_else(|| Error::Malformed("pattern needs a `structure` field".into()))?;
        let whole = FiniteStructure::from_json_value(structure, sig)?;
        let base = value
            .get("base")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Malformed("pattern needs a `base` array".into()))?
            .iter()
            .map(|v| {
                v.as_u64()
                    .map(|v| v as Vertex)
                    .ok_or_else(|| Error::Malformed(format!("bad base vertex {v}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(whole, &base)
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({"structure": self.whole.to_json_value(), "base": self.base}).to_string()
    }

    /// One vertex extended by a neighbour in relation 0 (binary).
    pub fn point_to_edge(sig: Arc<Signature>) -> Result<Self> {
        Self::new(FiniteStructure::graph(sig, 2, &[(0, 1)])?, &[0])
    }

    pub fn whole(&self) -> &FiniteStructure {
        &self.whole
    }

    pub fn sig(&self) -> &Arc<Signature> {
        self.whole.sig()
    }

    pub fn base(&self) -> &[Vertex] {
        &self.base
    }

    /// Vertices of `B − A`, ascending.
    pub fn extra(&self) -> &[Vertex] {
        &self.extra
    }

    /// `v(B/A) = |B − A|`.
    pub fn v(&self) -> usize {
        self.extra.len()
    }

    pub fn e_rel(&self) -> &DimForm {
        &self.e_rel
    }

    pub fn delta_rel(&self) -> &DimForm {
        &self.delta_rel
    }

    pub fn gamma_prod(&self) -> f64 {
        self.gamma
    }

    fn frame(&self) -> Frame {
        Frame::new(&self.whole, &self.base, &self.extra)
    }

    pub fn is_strong(&self) -> bool {
        self.frame().is_strong(self.sig())
    }

    pub fn is_intrinsic(&self) -> bool {
        self.frame().is_intrinsic(self.sig())
    }

    pub fn is_primitive(&self) -> bool {
        self.frame().is_primitive(self.sig())
    }

    /// Chain `A = A₀ ⊂ A₁ ⊂ … ⊂ Aₖ = B` of minimal intrinsic steps.
    ///
    /// Each step takes the first intrinsic proper extension of smallest size
    /// in lexicographic order; a smallest one admits no intrinsic intermediate.
    pub fn intrinsic_chain(&self) -> Result<Vec<Vec<Vertex>>> {
        if !self.is_intrinsic() {
            return Err(Error::NotIntrinsic);
        }
        let all: Vec<Vertex> = (0..self.whole.n() as Vertex).collect();
        let mut chain = vec![self.base.clone()];
        let mut current = self.base.clone();
        let mut buf = Vec::new();
        while current.len() < all.len() {
            let rest: Vec<Vertex> = all
                .iter()
                .copied()
                .filter(|v| current.binary_search(v).is_err())
                .collect();
            let mut next = None;
            for size in 1..=rest.len() {
                for_each_combination(rest.len(), size, &mut buf, &mut |idx| {
                    if next.is_some() {
                        return;
                    }
                    let add: Vec<Vertex> = idx.iter().map(|&i| rest[i]).collect();
                    if Frame::new(&self.whole, &current, &add).is_intrinsic(self.sig()) {
                        let mut z = current.clone();
                        z.extend(add);
                        z.sort_unstable();
                        next = Some(z);
                    }
                });
                if next.is_some() {
                    break;
                }
            }
            current = next.expect("an intrinsic extension contains B itself as a step");
            chain.push(current.clone());
        }
        Ok(chain)
    }
}

/// Minimum-cardinality `X` with `A ⊆ X ⊆ C` and `X ≤ₛ C`; the first such in
/// lexicographic order. Such an `X` also satisfies `A ≤ᵢ X`.
pub fn strong_hull(m: &FiniteStructure, a: &[Vertex], c: &[Vertex]) -> Result<Vec<Vertex>> {
    let (a, rest) = split(a, c)?;
    let c = vertex_set(c);
    let mut buf = Vec::new();
    for size in 0..=rest.len() {
        let mut found = None;
        for_each_combination(rest.len(), size, &mut buf, &mut |idx| {
            if found.is_some() {
                return;
            }
            let mut x = a.clone();
            x.extend(idx.iter().map(|&i| rest[i]));
            x.sort_unstable();
            let outside: Vec<Vertex> = c
                .iter()
                .copied()
                .filter(|v| x.binary_search(v).is_err())
                .collect();
            if Frame::new(m, &x, &outside).is_strong(m.sig()) {
                found = Some(x);
            }
        });
        if let Some(x) = found {
            return Ok(x);
        }
    }
    unreachable!("C ≤ₛ C always holds")
}

/// Removes vertices whose weighted degree inside the remaining set is at most
/// 1. Every inclusion-minimal set of negative `δ` survives.
pub(crate) fn peel(m: &FiniteStructure, vertices: &[Vertex]) -> Vec<Vertex> {
    let sig = m.sig();
    let mut alive: HashSet<Vertex> = vertices.iter().copied().collect();
    let load = |v: Vertex, alive: &HashSet<Vertex>| -> Vec<i64> {
        (0..m.relation_count())
            .map(|r| {
                m.incident(r, v)
                    .iter()
                    .filter(|&&id| m.edge(r, id as usize).iter().all(|u| alive.contains(u)))
                    .count() as i64
            })
            .collect()
    };
    let heavy = |counts: &[i64]| {
        let neg: Vec<i64> = counts.iter().map(|c| -c).collect();
        sig.sign_of(1, &neg) == Sign::Negative
    };
    let mut queue: Vec<Vertex> = vertices.to_vec();
    while let Some(v) = queue.pop() {
        if !alive.contains(&v) || heavy(&load(v, &alive)) {
            continue;
        }
        alive.remove(&v);
        queue.extend(
            m.primal_neighbors(v)
                .into_iter()
                .filter(|u| alive.contains(u)),
        );
    }
    let mut out: Vec<Vertex> = alive.into_iter().collect();
    out.sort_unstable();
    out
}

/// Whether `δ(A′) ≥ 0` for every `A′ ⊆ M`.
pub fn in_k0_plus(m: &FiniteStructure) -> bool {
    negative_subset(m).is_none()
}

/// A vertex set of negative `δ`, if one exists (of minimum `δ`).
pub fn negative_subset(m: &FiniteStructure) -> Option<Vec<Vertex>> {
    let all: Vec<Vertex> = (0..m.n() as Vertex).collect();
    let core = peel(m, &all);
    if core.is_empty() {
        return None;
    }
    let (side, d) = crate::flow::min_delta_subset(m, &core);
    (m.sig().sign(&d) == Sign::Negative).then_some(side)
}

/// Visits each nonempty `Y ⊆ V∖X` with `|Y| ≤ limit` such that `Y` together
/// with `X` (contracted to one node) is connected in the primal graph. Each
/// set is visited once, unsorted. Only vertices passing `allowed` are used.
fn for_each_attached(
    m: &FiniteStructure,
    x: &[Vertex],
    limit: usize,
    allowed: &dyn Fn(Vertex) -> bool,
    f: &mut dyn FnMut(&[Vertex]),
) {
    if limit == 0 || x.is_empty() {
        return;
    }
    let mut closed: HashSet<Vertex> = x.iter().copied().collect();
    let mut ext = Vec::new();
    for &a in x {
        for u in m.primal_neighbors(a) {
            if allowed(u) && closed.insert(u) {
                ext.push(u);
            }
        }
    }
    ext.sort_unstable();
    let mut sub = Vec::new();
    esu(m, &mut sub, ext, &closed, limit, None, allowed, f);
}

/// Visits each connected `D` with `|D| ≤ limit` among vertices passing `allowed`.
pub(crate) fn for_each_connected(
    m: &FiniteStructure,
    limit: usize,
    allowed: &dyn Fn(Vertex) -> bool,
    f: &mut dyn FnMut(&[Vertex]),
) {
    if limit == 0 {
        return;
    }
    for v in (0..m.n() as Vertex).filter(|&v| allowed(v)) {
        let mut sub = vec![v];
        f(&sub);
        let mut closed: HashSet<Vertex> = HashSet::from([v]);
        let mut ext = Vec::new();
        for u in m.primal_neighbors(v) {
            if allowed(u) {
                closed.insert(u);
                if u > v {
                    ext.push(u);
                }
            }
        }
        esu(m, &mut sub, ext, &closed, limit, Some(v), allowed, f);
    }
}

/// Wernicke's ESU step: extend `sub` by exclusive neighbours only.
#[allow(clippy::too_many_arguments)]
fn esu(
    m: &FiniteStructure,
    sub: &mut Vec<Vertex>,
    mut ext: Vec<Vertex>,
    closed: &HashSet<Vertex>,
    limit: usize,
    root: Option<Vertex>,
    allowed: &dyn Fn(Vertex) -> bool,
    f: &mut dyn FnMut(&[Vertex]),
) {
    while let Some(w) = ext.pop() {
        sub.push(w);
        f(sub);
        if sub.len() < limit {
            let mut ext2 = ext.clone();
            let mut closed2 = closed.clone();
            for u in m.primal_neighbors(w) {
                if !allowed(u) {
                    continue;
                }
                if !closed.contains(&u) && root.is_none_or(|r| u > r) {
                    ext2.push(u);
                }
                closed2.insert(u);
            }
            esu(m, sub, ext2, &closed2, limit, root, allowed, f);
        }
        sub.pop();
    }
}

/// Memoises the closure ingredients that do not depend on the base set.
pub struct ClosureIndex<'a> {
    m: &'a FiniteStructure,
    detached: HashMap<usize, Vec<Vec<Vertex>>>,
}

impl<'a> ClosureIndex<'a> {
    pub fn new(m: &'a FiniteStructure) -> Self {
        Self {
            m,
            detached: HashMap::new(),
        }
    }

    pub fn structure(&self) -> &'a FiniteStructure {
        self.m
    }

    /// Connected sets `D` with `1 < |D| < bound` and `∅ ≤ᵢ D`.
    fn detached(&mut self, bound: usize) -> &[Vec<Vertex>] {
        let m = self.m;
        self.detached.entry(bound).or_insert_with(|| {
            let mut found = Vec::new();
            if bound < 3 {
                return found;
            }
            let all: Vec<Vertex> = (0..m.n() as Vertex).collect();
            let core: HashSet<Vertex> = peel(m, &all).into_iter().collect();
            if core.is_empty() {
                return found;
            }
            for_each_connected(m, bound - 1, &|v| core.contains(&v), &mut |d| {
                if d.len() > 1 && Frame::new(m, &[], d).is_intrinsic(m.sig()) {
                    found.push(vertex_set(d));
                }
            });
            found
        })
    }

    /// `cl^bound_M(A)`: the union of all `B` with `A ≤ᵢ B ⊆ M` and `|B − A| < bound`.
    ///
    /// Only candidate sets that are connected to `A`, or are themselves
    /// intrinsic over `∅`, are examined; see [`closure`].
    pub fn closure(&mut self, a: &[Vertex], bound: usize) -> Vec<Vertex> {
        let m = self.m;
        let x = vertex_set(a);
        let mut result: HashSet<Vertex> = x.iter().copied().collect();
        if bound < 2 {
            return x;
        }
        let sig = m.sig().clone();
        for_each_attached(m, &x, bound - 1, &|_| true, &mut |y| {
            if y.iter().all(|v| result.contains(v)) {
                return;
            }
            if Frame::new(m, &x, y).is_intrinsic(&sig) {
                result.extend(y.iter().copied());
            }
        });
        let detached = self.detached(bound).to_vec();
        for d in detached {
            if d.iter().any(|v| x.binary_search(v).is_ok()) || d.iter().all(|v| result.contains(v))
            {
                continue;
            }
            if Frame::new(m, &x, &d).is_intrinsic(&sig) {
                result.extend(d);
            }
        }
        let mut out: Vec<Vertex> = result.into_iter().collect();
        out.sort_unstable();
        out
    }
}

/// `cl^bound_M(A)`.
///
/// If `A ≤ᵢ B` then every piece of `B − A` that is not hyperedge-connected to
/// `A` inside `B` is intrinsic over `∅` on its own, and the rest stays
/// intrinsic over `A`. So it suffices to test sets connected to `A` in the
/// primal graph, plus connected sets `D` with `∅ ≤ᵢ D`, which are collected
/// once per structure.
pub fn closure(m: &FiniteStructure, a: &[Vertex], bound: usize) -> Vec<Vertex> {
    ClosureIndex::new(m).closure(a, bound)
}

/// Distinct images (sorted vertex sets) of embeddings of `pat.whole` into `m`
/// extending `f`, where `f[i]` is the image of `pat.base()[i]`.
pub fn copies(
    m: &FiniteStructure,
    pat: &ExtensionPattern,
    f: &[Vertex],
) -> Result<Vec<Vec<Vertex>>> {
    if f.len() != pat.base().len() {
        return Err(Error::Malformed(format!(
            "base map has {} images for {} base vertices",
            f.len(),
            pat.base().len()
        )));
    }
    let partial: Vec<(Vertex, Vertex)> =
        pat.base().iter().copied().zip(f.iter().copied()).collect();
    let mut out = Vec::new();
    let mut search = EmbeddingSearch::distinct_images(pat.whole(), m, &partial);
    while let Some(map) = search.next_map() {
        out.push(vertex_set(map));
    }
    Ok(out)
}

/// `χ_M(B/A)` at `f`: number of distinct copies of `B` over `f(A)`.
pub fn chi(m: &FiniteStructure, pat: &ExtensionPattern, f: &[Vertex]) -> Result<usize> {
    Ok(copies(m, pat, f)?.len())
}

fn conflicts(copies: &[Vec<Vertex>], base_image: &[Vertex]) -> Vec<Vec<bool>> {
    let base = vertex_set(base_image);
    let outside: Vec<Vec<Vertex>> = copies
        .iter()
        .map(|c| {
            c.iter()
                .copied()
                .filter(|v| base.binary_search(v).is_err())
                .collect()
        })
        .collect();
    let k = copies.len();
    let mut adj = vec![vec![false; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let clash = outside[i]
                .iter()
                .any(|v| outside[j].binary_search(v).is_ok());
            adj[i][j] = clash;
            adj[j][i] = clash;
        }
    }
    adj
}

/// `χ*_M(B/A)` at `f`: the largest family of copies pairwise disjoint
/// outside `f(A)`.
pub fn chi_star(m: &FiniteStructure, pat: &ExtensionPattern, f: &[Vertex]) -> Result<usize> {
    let cs = copies(m, pat, f)?;
    Ok(max_disjoint_family(&cs, f))
}

/// Size of a maximum family of `copies` pairwise disjoint outside `base_image`.
pub fn max_disjoint_family(copies: &[Vec<Vertex>], base_image: &[Vertex]) -> usize {
    let adj = conflicts(copies, base_image);
    let mut best = 0;
    let cands: Vec<usize> = (0..copies.len()).collect();
    mis(&adj, &cands, 0, &mut best);
    best
}

fn mis(adj: &[Vec<bool>], cands: &[usize], size: usize, best: &mut usize) {
    if size + cands.len() <= *best {
        return;
    }
    let Some((&v, rest)) = cands.split_first() else {
        *best = (*best).max(size);
        return;
    };
    let without_nbrs: Vec<usize> = rest.iter().copied().filter(|&u| !adj[v][u]).collect();
    mis(adj, &without_nbrs, size + 1, best);
    mis(adj, rest, size, best);
}

/// Every maximal family of pairwise disjoint (outside `base_image`) copies,
/// as index lists into `copies`.
pub fn maximal_disjoint_families(copies: &[Vec<Vertex>], base_image: &[Vertex]) -> Vec<Vec<usize>> {
    let adj = conflicts(copies, base_image);
    let k = copies.len();
    let mut out = Vec::new();
    let mut r = Vec::new();
    bron_kerbosch(&adj, &mut r, (0..k).collect(), Vec::new(), &mut out);
    out
}

/// Maximal cliques of the compatibility (non-conflict) graph.
fn bron_kerbosch(
    adj: &[Vec<bool>],
    r: &mut Vec<usize>,
    p: Vec<usize>,
    x: Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if p.is_empty() && x.is_empty() {
        let mut fam = r.clone();
        fam.sort_unstable();
        out.push(fam);
        return;
    }
    let compatible = |a: usize, b: usize| a != b && !adj[a][b];
    let pivot = p
        .iter()
        .chain(&x)
        .copied()
        .max_by_key(|&u| p.iter().filter(|&&w| compatible(u, w)).count())
        .expect("p or x nonempty");
    let mut p = p;
    let mut x = x;
    let branch: Vec<usize> = p
        .iter()
        .copied()
        .filter(|&v| !compatible(pivot, v))
        .collect();
    for v in branch {
        r.push(v);
        let p2 = p.iter().copied().filter(|&w| compatible(v, w)).collect();
        let x2 = x.iter().copied().filter(|&w| compatible(v, w)).collect();
        bron_kerbosch(adj, r, p2, x2, out);
        r.pop();
        p.retain(|&w| w != v);
        x.push(v);
    }
}

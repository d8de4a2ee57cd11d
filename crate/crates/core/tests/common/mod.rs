//! Brute-force oracles and generators shared by the integration tests.
//!
//! Everything here recomputes from raw edge lists and subset enumeration,
//! without calling the library's dimension or extension code.

#![allow(dead_code)]

use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Signed;
use proptest::prelude::*;
use rand::Rng;
use rslab::{FiniteStructure, Relation, Sign, Signature, Vertex, Weight};

/// Weights used by the fuzzers. Ties such as `1 − 2·0.5` are possible for some
/// of them, which exercises the zero handling as well.
pub const ALPHAS: &[&str] = &["0.3", "0.45", "0.5", "0.55", "0.7", "0.85", "1"];

pub fn graph_sig(alpha: &str) -> Arc<Signature> {
    Signature::graph(alpha).unwrap()
}

/// A binary relation `R` and a ternary relation `T`.
pub fn mixed_sig(binary: &str, ternary: &str) -> Arc<Signature> {
    Arc::new(
        Signature::new(
            vec![
                Relation::new("R", 2, Weight::parse_decimal(binary).unwrap(), 1.0),
                Relation::new("T", 3, Weight::parse_decimal(ternary).unwrap(), 1.0),
            ],
            true,
        )
        .unwrap(),
    )
}

/// `(|S|, −w_i(S))` counted straight from the hyperedge lists.
pub fn raw_delta(m: &FiniteStructure, set: &[Vertex]) -> (i64, Vec<i64>) {
    let inside = |v: &Vertex| set.contains(v);
    let coeffs = (0..m.relation_count())
        .map(|r| -(m.edges(r).filter(|e| e.iter().all(inside)).count() as i64))
        .collect();
    (set.len() as i64, coeffs)
}

pub fn raw_delta_rel(m: &FiniteStructure, outer: &[Vertex], inner: &[Vertex]) -> (i64, Vec<i64>) {
    let (a0, ac) = raw_delta(m, outer);
    let (b0, bc) = raw_delta(m, inner);
    (a0 - b0, ac.iter().zip(&bc).map(|(x, y)| x - y).collect())
}

/// Exact value of `c0 + Σ cᵢ·αᵢ`.
pub fn exact_value(sig: &Signature, c0: i64, coeffs: &[i64]) -> BigRational {
    let mut acc = BigRational::from_integer(BigInt::from(c0));
    for (i, &c) in coeffs.iter().enumerate() {
        acc += sig.relation(i).alpha.exact() * BigInt::from(c);
    }
    acc
}

/// Sign by exact rational evaluation. When the rational value is zero but the
/// form is not, the weights stand for linearly independent irrationals and
/// the form is resolved by its first nonzero coefficient.
pub fn exact_sign(sig: &Signature, c0: i64, coeffs: &[i64]) -> Sign {
    let v = exact_value(sig, c0, coeffs);
    if v.is_positive() {
        Sign::Positive
    } else if v.is_negative() {
        Sign::Negative
    } else if !sig.independence_mode() || coeffs.iter().all(|&c| c == 0) {
        Sign::Zero
    } else if coeffs.iter().find(|&&c| c != 0).unwrap() > &0 {
        Sign::Positive
    } else {
        Sign::Negative
    }
}

pub fn rel_sign(m: &FiniteStructure, outer: &[Vertex], inner: &[Vertex]) -> Sign {
    let (c0, cs) = raw_delta_rel(m, outer, inner);
    exact_sign(m.sig(), c0, &cs)
}

/// All subsets of `items`, each in the order of `items`.
pub fn subsets(items: &[Vertex]) -> Vec<Vec<Vertex>> {
    assert!(items.len() < 24);
    (0u32..1 << items.len())
        .map(|mask| {
            items
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &v)| v)
                .collect()
        })
        .collect()
}

pub fn sorted(mut v: Vec<Vertex>) -> Vec<Vertex> {
    v.sort_unstable();
    v.dedup();
    v
}

pub fn union(a: &[Vertex], b: &[Vertex]) -> Vec<Vertex> {
    sorted(a.iter().chain(b).copied().collect())
}

pub fn minus(a: &[Vertex], b: &[Vertex]) -> Vec<Vertex> {
    a.iter().copied().filter(|v| !b.contains(v)).collect()
}

pub fn universe(m: &FiniteStructure) -> Vec<Vertex> {
    (0..m.n() as Vertex).collect()
}

/// `A ≤ₛ B`: every `B₁` with `A ⊂ B₁ ⊆ B` has `δ(B₁/A) > 0`.
pub fn strong(m: &FiniteStructure, a: &[Vertex], b: &[Vertex]) -> bool {
    let extra = minus(b, a);
    subsets(&extra)
        .into_iter()
        .filter(|y| !y.is_empty())
        .all(|y| rel_sign(m, &union(a, &y), a) == Sign::Positive)
}

/// `A ≤ᵢ B`: every `B₁` with `A ⊆ B₁ ⊂ B` has `δ(B/B₁) < 0`.
pub fn intrinsic(m: &FiniteStructure, a: &[Vertex], b: &[Vertex]) -> bool {
    let extra = minus(b, a);
    subsets(&extra)
        .into_iter()
        .filter(|y| y.len() < extra.len())
        .all(|y| rel_sign(m, b, &union(a, &y)) == Sign::Negative)
}

/// Union of every `B ⊆ M` with `A ≤ᵢ B` and `|B − A| < bound`, over all
/// subsets of `M − A`.
pub fn closure(m: &FiniteStructure, a: &[Vertex], bound: usize) -> Vec<Vertex> {
    let a = sorted(a.to_vec());
    let rest = minus(&universe(m), &a);
    let mut out = a.clone();
    for x in subsets_below(&rest, bound) {
        let b = union(&a, &x);
        if intrinsic(m, &a, &b) {
            out = union(&out, &b);
        }
    }
    out
}

/// All subsets of `items` with fewer than `bound` elements.
pub fn subsets_below(items: &[Vertex], bound: usize) -> Vec<Vec<Vertex>> {
    fn rec(items: &[Vertex], bound: usize, cur: &mut Vec<Vertex>, out: &mut Vec<Vec<Vertex>>) {
        if cur.len() >= bound {
            return;
        }
        out.push(cur.clone());
        for (i, &v) in items.iter().enumerate() {
            cur.push(v);
            rec(&items[i + 1..], bound, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(items, bound, &mut Vec::new(), &mut out);
    out
}

/// Every subset has `δ ≥ 0`.
pub fn k0_plus(m: &FiniteStructure) -> bool {
    subsets(&universe(m)).iter().all(|s| {
        let (c0, cs) = raw_delta(m, s);
        exact_sign(m.sig(), c0, &cs) != Sign::Negative
    })
}

/// Each possible hyperedge of each relation independently with probability `p`.
pub fn random_structure<R: Rng>(
    rng: &mut R,
    sig: &Arc<Signature>,
    n: usize,
    p: f64,
) -> FiniteStructure {
    let mut edges = vec![Vec::new(); sig.len()];
    for (r, list) in edges.iter_mut().enumerate() {
        let k = sig.relation(r).arity;
        for s in subsets(&(0..n as Vertex).collect::<Vec<_>>()) {
            if s.len() == k && rng.random_bool(p) {
                list.push(s);
            }
        }
    }
    FiniteStructure::from_edges(sig.clone(), n, edges).unwrap()
}

/// Graphs on at most `max_n` vertices with weight drawn from [`ALPHAS`].
pub fn arb_graph(max_n: usize) -> impl Strategy<Value = FiniteStructure> {
    let pairs = max_n * max_n.saturating_sub(1) / 2;
    (
        0..=max_n,
        0..ALPHAS.len(),
        proptest::collection::vec(0u8..100, pairs),
        5u8..70,
    )
        .prop_map(move |(n, a, rolls, density)| {
            let sig = graph_sig(ALPHAS[a]);
            let mut edges = Vec::new();
            let mut k = 0;
            for i in 0..n as Vertex {
                for j in i + 1..n as Vertex {
                    if rolls[k] < density {
                        edges.push((i, j));
                    }
                    k += 1;
                }
            }
            FiniteStructure::graph(sig, n, &edges).unwrap()
        })
}

/// Structures over [`mixed_sig`] on at most `max_n` vertices.
pub fn arb_mixed(max_n: usize) -> impl Strategy<Value = FiniteStructure> {
    (1..=max_n, 0..ALPHAS.len(), 0..ALPHAS.len(), any::<u64>()).prop_map(move |(n, a, b, seed)| {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        random_structure(&mut rng, &mixed_sig(ALPHAS[a], ALPHAS[b]), n, 0.3)
    })
}

/// A random subset of `0..n`, sorted.
pub fn random_subset<R: Rng>(rng: &mut R, n: usize, p: f64) -> Vec<Vertex> {
    (0..n as Vertex).filter(|_| rng.random_bool(p)).collect()
}

/// A random structure on at most 8 vertices for the law fuzzers: a graph or a
/// mixed binary/ternary structure, with density varied so that strong and
/// intrinsic pairs both occur.
pub fn law_structure<R: Rng>(rng: &mut R) -> FiniteStructure {
    let n = rng.random_range(1..=8);
    let p = [0.15, 0.3, 0.5][rng.random_range(0..3)];
    let a = ALPHAS[rng.random_range(0..ALPHAS.len())];
    let sig = if rng.random_bool(0.5) {
        graph_sig(a)
    } else {
        mixed_sig(a, ALPHAS[rng.random_range(0..ALPHAS.len())])
    };
    random_structure(rng, &sig, n, p)
}

/// Nested random sets `A ⊆ B ⊆ C ⊆ universe`.
pub fn nested<R: Rng>(rng: &mut R, n: usize) -> (Vec<Vertex>, Vec<Vertex>, Vec<Vertex>) {
    let c = random_subset(rng, n, 0.8);
    let b: Vec<Vertex> = c.iter().copied().filter(|_| rng.random_bool(0.6)).collect();
    let a: Vec<Vertex> = b.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
    (a, b, c)
}

/// Outcome of one law instance: `Ok(true)` if the hypotheses held and the
/// conclusion was checked, `Ok(false)` if the instance was vacuous.
pub type LawResult = Result<bool, String>;

pub fn law_strong_transitive(
    m: &FiniteStructure,
    a: &[Vertex],
    b: &[Vertex],
    c: &[Vertex],
) -> LawResult {
    use rslab::extcalc::is_strong_in;
    if !(is_strong_in(m, a, b).unwrap() && is_strong_in(m, b, c).unwrap()) {
        return Ok(false);
    }
    match is_strong_in(m, a, c).unwrap() {
        true => Ok(true),
        false => Err(format!("{a:?} ≤ₛ {b:?} ≤ₛ {c:?} but not {a:?} ≤ₛ {c:?}")),
    }
}

pub fn law_intrinsic_transitive(
    m: &FiniteStructure,
    a: &[Vertex],
    b: &[Vertex],
    c: &[Vertex],
) -> LawResult {
    use rslab::extcalc::is_intrinsic_in;
    if !(is_intrinsic_in(m, a, b).unwrap() && is_intrinsic_in(m, b, c).unwrap()) {
        return Ok(false);
    }
    match is_intrinsic_in(m, a, c).unwrap() {
        true => Ok(true),
        false => Err(format!("{a:?} ≤ᵢ {b:?} ≤ᵢ {c:?} but not {a:?} ≤ᵢ {c:?}")),
    }
}

/// `M ≤ₛ N` and `N′ ⊆ N` give `M ∩ N′ ≤ₛ N′`. Here `N` is `c`, `M` is `b`
/// and `N′` is `other`.
pub fn law_a4(m: &FiniteStructure, b: &[Vertex], c: &[Vertex], other: &[Vertex]) -> LawResult {
    use rslab::extcalc::is_strong_in;
    if !is_strong_in(m, b, c).unwrap() {
        return Ok(false);
    }
    let n2: Vec<Vertex> = other.iter().copied().filter(|v| c.contains(v)).collect();
    let meet: Vec<Vertex> = b.iter().copied().filter(|v| n2.contains(v)).collect();
    match is_strong_in(m, &meet, &n2).unwrap() {
        true => Ok(true),
        false => Err(format!("{b:?} ≤ₛ {c:?} but {meet:?} not ≤ₛ {n2:?}")),
    }
}

/// `A ⊆ B ⊆ C` and `cl^k_C(A) ⊆ B` give `cl^k_C(A) = cl^k_B(A)`, with `C`
/// the whole structure.
pub fn law_closure_restricts(
    m: &FiniteStructure,
    a: &[Vertex],
    b: &[Vertex],
    k: usize,
) -> LawResult {
    let b = union(a, b);
    let cl_c = rslab::extcalc::closure(m, a, k);
    if !cl_c.iter().all(|v| b.contains(v)) {
        return Ok(false);
    }
    let sub = m.induced_substructure(&b).unwrap();
    let pos = |v: &Vertex| b.binary_search(v).unwrap() as Vertex;
    let a_in_b: Vec<Vertex> = a.iter().map(pos).collect();
    let cl_b: Vec<Vertex> = rslab::extcalc::closure(&sub, &a_in_b, k)
        .into_iter()
        .map(|i| b[i as usize])
        .collect();
    match cl_b == cl_c {
        true => Ok(true),
        false => Err(format!(
            "cl^{k}(A={a:?}) is {cl_c:?} in M and {cl_b:?} in B={b:?}"
        )),
    }
}

/// The minimal strong superset `B` of `A` inside `C` has `A ≤ᵢ B ≤ₛ C`,
/// checked with the exhaustive oracles.
pub fn law_dichotomy(m: &FiniteStructure, a: &[Vertex], c: &[Vertex]) -> LawResult {
    let a = union(a, &[]);
    let c = union(&a, c);
    let b = rslab::extcalc::strong_hull(m, &a, &c).unwrap();
    if !(a.iter().all(|v| b.contains(v)) && b.iter().all(|v| c.contains(v))) {
        return Err(format!("hull {b:?} not between {a:?} and {c:?}"));
    }
    if !intrinsic(m, &a, &b) || !strong(m, &b, &c) {
        return Err(format!("hull {b:?} of {a:?} in {c:?} fails A ≤ᵢ B ≤ₛ C"));
    }
    // Minimality: no smaller superset of A is strong in C.
    let extra = minus(&c, &a);
    for y in subsets(&extra) {
        if a.len() + y.len() < b.len() && strong(m, &union(&a, &y), &c) {
            return Err(format!(
                "{:?} is strong in {c:?} and smaller than {b:?}",
                union(&a, &y)
            ));
        }
    }
    Ok(true)
}

/// Any two maximal families of copies of `B` over the same base image,
/// pairwise disjoint outside it, have sizes within a factor `|B − A|`.
pub fn law_disjoint_families<R: Rng>(rng: &mut R, m: &FiniteStructure) -> LawResult {
    if m.n() < 2 {
        return Ok(false);
    }
    // A pattern from a random induced piece of `m`, base its first vertex or none.
    let size = rng.random_range(1..=3.min(m.n()));
    let mut piece = random_subset(rng, m.n(), 0.5);
    piece.truncate(size);
    if piece.is_empty() {
        return Ok(false);
    }
    let whole = m.induced_substructure(&piece).unwrap();
    let base: Vec<Vertex> = if rng.random_bool(0.5) {
        vec![0]
    } else {
        vec![]
    };
    if base.len() == whole.n() {
        return Ok(false);
    }
    let pat = rslab::ExtensionPattern::new(whole, &base).unwrap();
    let f: Vec<Vertex> = base
        .iter()
        .map(|_| rng.random_range(0..m.n() as Vertex))
        .collect();
    let copies = rslab::extcalc::copies(m, &pat, &f).unwrap();
    let families = rslab::extcalc::maximal_disjoint_families(&copies, &f);
    let v = pat.v();
    for x in &families {
        for y in &families {
            if x.len() > v * y.len() {
                return Err(format!(
                    "maximal families of sizes {} and {} with |B−A| = {v}",
                    x.len(),
                    y.len()
                ));
            }
        }
    }
    Ok(!families.is_empty())
}

/// Copies of `pat` over `f`, by trying every injection of the extra vertices.
pub fn copies_oracle(
    m: &FiniteStructure,
    pat: &rslab::ExtensionPattern,
    f: &[Vertex],
) -> Vec<Vec<Vertex>> {
    let whole = pat.whole();
    let mut out = Vec::new();
    let mut map = vec![Vertex::MAX; whole.n()];
    for (&b, &x) in pat.base().iter().zip(f) {
        map[b as usize] = x;
    }
    let extra = pat.extra().to_vec();
    fn rec(
        m: &FiniteStructure,
        whole: &FiniteStructure,
        extra: &[Vertex],
        map: &mut Vec<Vertex>,
        out: &mut Vec<Vec<Vertex>>,
    ) {
        let Some((&v, rest)) = extra.split_first() else {
            let verts = universe(whole);
            for r in 0..whole.relation_count() {
                for e in subsets(&verts)
                    .into_iter()
                    .filter(|s| s.len() == whole.arity(r))
                {
                    let img = sorted(e.iter().map(|&u| map[u as usize]).collect());
                    if whole.has_edge(r, &e) != m.has_edge(r, &img) {
                        return;
                    }
                }
            }
            out.push(sorted(map.clone()));
            return;
        };
        for x in 0..m.n() as Vertex {
            if !map.contains(&x) {
                map[v as usize] = x;
                rec(m, whole, rest, map, out);
                map[v as usize] = Vertex::MAX;
            }
        }
    }
    rec(m, whole, &extra, &mut map, &mut out);
    out.sort();
    out.dedup();
    out
}

/// Weight strings mixing rationally dependent values (halves, quarters) with
/// unrelated ones, so forms with exact cancellation occur.
pub const FORM_ALPHAS: &[&str] = &[
    "0.5", "0.25", "0.75", "1", "0.55", "0.7", "0.3141", "0.8660", "0.123456",
];

/// A signature of `k` unnamed binary relations with the given weights.
pub fn weights_sig(alphas: &[&str], independence: bool) -> Arc<Signature> {
    let rels = alphas
        .iter()
        .enumerate()
        .map(|(i, a)| Relation::new(format!("R{i}"), 2, Weight::parse_decimal(a).unwrap(), 1.0))
        .collect();
    Arc::new(Signature::new(rels, independence).unwrap())
}

/// Sign of `c0 + Σ cᵢ·αᵢ` evaluated in 256-bit binary floating point from the
/// decimal weight strings. Values below `2⁻²⁰⁰` in magnitude read as zero:
/// decimal weights with at most 8 digits and coefficients of size at most
/// `2³¹` give either exactly zero or at least `10⁻⁸`.
pub fn sign_256(alphas: &[&str], c0: i64, coeffs: &[i64]) -> Sign {
    use astro_float::{BigFloat, Consts, Radix, RoundingMode};
    const P: usize = 256;
    let rm = RoundingMode::ToEven;
    let mut cc = Consts::new().unwrap();
    let mut acc = BigFloat::from_i64(c0, P);
    for (a, &c) in alphas.iter().zip(coeffs) {
        let w = BigFloat::parse(a, Radix::Dec, P, rm, &mut cc);
        acc = acc.add(&w.mul(&BigFloat::from_i64(c, P), P, rm), P, rm);
    }
    let tiny = BigFloat::from_f64(2f64.powi(-200), P);
    // `abs_cmp` compares signed values in this astro-float release.
    if acc.abs().cmp(&tiny).unwrap() < 0 {
        Sign::Zero
    } else if acc.is_positive() {
        Sign::Positive
    } else {
        Sign::Negative
    }
}

/// What `sign` must return given the numeric verdict: the numeric sign when it
/// is nonzero, otherwise zero or, with independence mode on and a nonzero
/// form, the sign of the first nonzero weight coefficient.
pub fn expected_sign(alphas: &[&str], independence: bool, c0: i64, coeffs: &[i64]) -> Sign {
    match sign_256(alphas, c0, coeffs) {
        Sign::Zero if independence => match coeffs.iter().find(|&&c| c != 0) {
            Some(&c) if c > 0 => Sign::Positive,
            Some(_) => Sign::Negative,
            None if c0 > 0 => Sign::Positive,
            None if c0 < 0 => Sign::Negative,
            None => Sign::Zero,
        },
        s => s,
    }
}

/// Extends `a` by `extra` new vertices (numbered after `a`'s), adding each
/// possible hyperedge that meets a new vertex with probability `p`.
pub fn extend<R: Rng>(rng: &mut R, a: &FiniteStructure, extra: usize, p: f64) -> FiniteStructure {
    let n = a.n() + extra;
    let old = a.n() as Vertex;
    let mut edges: Vec<Vec<Vec<Vertex>>> = (0..a.relation_count())
        .map(|r| a.edges(r).map(<[Vertex]>::to_vec).collect())
        .collect();
    for (r, list) in edges.iter_mut().enumerate() {
        for s in subsets(&(0..n as Vertex).collect::<Vec<_>>()) {
            if s.len() == a.arity(r) && s.iter().any(|&v| v >= old) && rng.random_bool(p) {
                list.push(s);
            }
        }
    }
    FiniteStructure::from_edges(a.sig().clone(), n, edges).unwrap()
}

/// A random `A ⊆ B, C` with `B, C ∈ K₀⁺` and `A ≤ₛ B`, where `A` is the
/// substructure on `0..|A|` of both.
pub fn amalgamation_triple<R: Rng>(rng: &mut R) -> (FiniteStructure, FiniteStructure, Vec<Vertex>) {
    loop {
        let sig = if rng.random_bool(0.5) {
            graph_sig(ALPHAS[rng.random_range(0..ALPHAS.len())])
        } else {
            mixed_sig(
                ALPHAS[rng.random_range(0..ALPHAS.len())],
                ALPHAS[rng.random_range(0..ALPHAS.len())],
            )
        };
        let k = rng.random_range(0..=3);
        let a = random_structure(rng, &sig, k, 0.4);
        if !k0_plus(&a) {
            continue;
        }
        let base: Vec<Vertex> = (0..k as Vertex).collect();
        let size = rng.random_range(1..=4);
        let b = extend(rng, &a, size, 0.35);
        if !k0_plus(&b) || !strong(&b, &base, &universe(&b)) {
            continue;
        }
        let size = rng.random_range(0..=4);
        let c = extend(rng, &a, size, 0.35);
        if !k0_plus(&c) {
            continue;
        }
        return (b, c, base);
    }
}

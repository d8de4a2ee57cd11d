//! Agreement of shallow existential formulas on tuples with isomorphic closures.
//!
//! The formula schema at depth `d` is every `∃ y₁…y_j τ(ā, ȳ)` with `j ≤ d`
//! and `τ` an atomic type (equalities plus relation facts). Two tuples agree
//! at depth `d` when they realise the same atomic types at every `j ≤ d`.

use std::collections::{BTreeSet, HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::{ExperimentReport, Outcome, Row};
use crate::dimension::for_each_combination;
use crate::embed::{EmbeddingMode, EmbeddingSearch};
use crate::extcalc::ClosureIndex;
use crate::structure::{vertex_set, FiniteStructure, Vertex};
use crate::{Error, Result};

/// Knobs for [`qe_probe`].
#[derive(Clone, Debug)]
pub struct QeConfig {
    /// Closure bounds to sweep; each becomes one report row.
    pub ells: Vec<usize>,
    /// Quantifier depth, at most 2.
    pub depth: usize,
    /// Length of the probed tuples, 1 or 2.
    pub tuple_len: usize,
    /// Tuples drawn from each structure.
    pub samples: usize,
    pub seed: u64,
}

/// Equality pattern and relation facts of a tuple, by position.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AtomicType {
    /// `eq[i]` is the first position holding the same vertex as position `i`.
    eq: Vec<u8>,
    facts: Vec<(usize, Vec<u8>)>,
}

fn atomic_type(g: &FiniteStructure, tuple: &[Vertex]) -> AtomicType {
    let eq: Vec<u8> = (0..tuple.len())
        .map(|i| tuple.iter().position(|&v| v == tuple[i]).expect("present") as u8)
        .collect();
    let reps: Vec<usize> = (0..tuple.len()).filter(|&i| eq[i] as usize == i).collect();
    let mut facts = Vec::new();
    let mut buf = Vec::new();
    let mut edge = Vec::new();
    for r in 0..g.relation_count() {
        for_each_combination(reps.len(), g.arity(r), &mut buf, &mut |c| {
            edge.clear();
            edge.extend(c.iter().map(|&i| tuple[reps[i]]));
            if g.has_edge(r, &edge) {
                facts.push((r, c.iter().map(|&i| reps[i] as u8).collect()));
            }
        });
    }
    AtomicType { eq, facts }
}

/// Realised atomic types of a tuple at quantifier depths 0, 1 and 2.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FormulaProfile {
    pub atomic: AtomicType,
    pub one: BTreeSet<AtomicType>,
    pub two: BTreeSet<AtomicType>,
}

impl FormulaProfile {
    /// Whether the two tuples satisfy the same schema formulas up to `depth`.
    pub fn agrees(&self, other: &Self, depth: usize) -> bool {
        self.atomic == other.atomic
            && (depth < 1 || self.one == other.one)
            && (depth < 2 || self.two == other.two)
    }
}

/// Profile of `tuple` in `g` up to `depth` (deeper sets are left empty).
pub fn formula_profile(g: &FiniteStructure, tuple: &[Vertex], depth: usize) -> FormulaProfile {
    let atomic = atomic_type(g, tuple);
    let mut one = BTreeSet::new();
    let mut two = BTreeSet::new();
    if depth == 0 {
        return FormulaProfile { atomic, one, two };
    }
    let in_tuple = |v: Vertex| tuple.contains(&v);
    let mut ext = tuple.to_vec();
    let mut class_of: Vec<usize> = vec![0; g.n()];
    let mut classes: Vec<AtomicType> = Vec::new();
    let mut members: Vec<Vec<Vertex>> = Vec::new();
    let mut ids: HashMap<AtomicType, usize> = HashMap::new();
    for y in 0..g.n() as Vertex {
        ext.truncate(tuple.len());
        ext.push(y);
        let t = atomic_type(g, &ext);
        let next = classes.len();
        let id = *ids.entry(t.clone()).or_insert(next);
        if id == next {
            classes.push(t);
            members.push(Vec::new());
        }
        class_of[y as usize] = id;
        if !in_tuple(y) {
            members[id].push(y);
        }
    }
    one.extend(classes.iter().cloned());
    if depth == 1 {
        return FormulaProfile { atomic, one, two };
    }
    let mut eval = |y1: Vertex, y2: Vertex, two: &mut BTreeSet<AtomicType>| {
        ext.truncate(tuple.len());
        ext.push(y1);
        ext.push(y2);
        two.insert(atomic_type(g, &ext));
    };
    // Pairs touching the tuple, and the diagonal.
    for &a in tuple {
        for y in 0..g.n() as Vertex {
            eval(a, y, &mut two);
            eval(y, a, &mut two);
        }
    }
    for m in members.iter().filter(|m| !m.is_empty()) {
        eval(m[0], m[0], &mut two);
    }
    // Distinct outside pairs lying together in a hyperedge over the tuple.
    let mut joint: HashSet<(Vertex, Vertex)> = HashSet::new();
    for r in 0..g.relation_count() {
        for e in g.edges(r) {
            let outside: Vec<Vertex> = e.iter().copied().filter(|&v| !in_tuple(v)).collect();
            if outside.len() == 2 {
                joint.insert((outside[0], outside[1]));
                joint.insert((outside[1], outside[0]));
            }
        }
    }
    for &(y1, y2) in &joint {
        eval(y1, y2, &mut two);
    }
    // Remaining outside pairs: their type depends only on the two classes.
    let mut per_class_pair: HashMap<(usize, usize), usize> = HashMap::new();
    for &(y1, y2) in &joint {
        *per_class_pair
            .entry((class_of[y1 as usize], class_of[y2 as usize]))
            .or_default() += 1;
    }
    for c1 in 0..members.len() {
        for c2 in 0..members.len() {
            let total = members[c1].len() * members[c2].len()
                - if c1 == c2 { members[c1].len() } else { 0 };
            if total <= per_class_pair.get(&(c1, c2)).copied().unwrap_or(0) {
                continue;
            }
            'find: for &y1 in &members[c1] {
                for &y2 in &members[c2] {
                    if y1 != y2 && !joint.contains(&(y1, y2)) {
                        eval(y1, y2, &mut two);
                        break 'find;
                    }
                }
            }
        }
    }
    FormulaProfile { atomic, one, two }
}

/// Closure of a tuple as a structure, with the tuple's positions inside it.
struct PinnedClosure {
    structure: FiniteStructure,
    pins: Vec<Vertex>,
    key: (usize, Vec<usize>),
}

fn pinned_closure(
    index: &mut ClosureIndex<'_>,
    tuple: &[Vertex],
    ell: usize,
) -> Result<PinnedClosure> {
    let cl = index.closure(tuple, ell);
    let structure = index.structure().induced_substructure(&cl)?;
    let pins = tuple
        .iter()
        .map(|v| cl.binary_search(v).expect("closure contains the tuple") as Vertex)
        .collect();
    let key = (structure.n(), structure.edge_counts());
    Ok(PinnedClosure {
        structure,
        pins,
        key,
    })
}

fn pinned_isomorphic(a: &PinnedClosure, b: &PinnedClosure) -> bool {
    if a.key != b.key {
        return false;
    }
    let partial: Vec<(Vertex, Vertex)> =
        a.pins.iter().copied().zip(b.pins.iter().copied()).collect();
    EmbeddingSearch::new(
        &a.structure,
        &b.structure,
        &partial,
        EmbeddingMode::Isomorphism,
    )
    .exists()
}

fn draw_tuples(rng: &mut ChaCha8Rng, n: usize, len: usize, count: usize) -> Vec<Vec<Vertex>> {
    (0..count)
        .map(|_| loop {
            let t: Vec<Vertex> = (0..len).map(|_| rng.random_range(0..n as Vertex)).collect();
            if vertex_set(&t).len() == len {
                break t;
            }
        })
        .collect()
}

/// For each closure bound `ell`, pairs tuples of `g1` and `g2` whose closures
/// are isomorphic over the tuple and reports the fraction of pairs whose
/// formula profiles agree. Each `g1` tuple is matched with the first
/// unmatched `g2` tuple that qualifies.
pub fn qe_probe(
    g1: &FiniteStructure,
    g2: &FiniteStructure,
    cfg: &QeConfig,
) -> Result<ExperimentReport> {
    if cfg.depth > 2 {
        return Err(Error::Config(format!(
            "formula depth {} exceeds 2",
            cfg.depth
        )));
    }
    if !(1..=2).contains(&cfg.tuple_len) {
        return Err(Error::Config(format!(
            "tuple length {} is not 1 or 2",
            cfg.tuple_len
        )));
    }
    if g1.sig() != g2.sig() {
        return Err(Error::Config("structures have different signatures".into()));
    }
    if g1.n() < cfg.tuple_len || g2.n() < cfg.tuple_len {
        return Err(Error::Config(
            "structure smaller than the tuple length".into(),
        ));
    }
    if cfg.ells.is_empty() {
        return Err(Error::Config("no closure bounds given".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let t1 = draw_tuples(&mut rng, g1.n(), cfg.tuple_len, cfg.samples);
    let t2 = draw_tuples(&mut rng, g2.n(), cfg.tuple_len, cfg.samples);
    let mut p1: HashMap<usize, FormulaProfile> = HashMap::new();
    let mut p2: HashMap<usize, FormulaProfile> = HashMap::new();
    let mut idx1 = ClosureIndex::new(g1);
    let mut idx2 = ClosureIndex::new(g2);
    let mut rows = Vec::new();
    for &ell in &cfg.ells {
        let c1 = t1
            .iter()
            .map(|t| pinned_closure(&mut idx1, t, ell))
            .collect::<Result<Vec<_>>>()?;
        let c2 = t2
            .iter()
            .map(|t| pinned_closure(&mut idx2, t, ell))
            .collect::<Result<Vec<_>>>()?;
        let mut used = vec![false; c2.len()];
        let mut outcomes = Vec::new();
        for (i, a) in c1.iter().enumerate() {
            let Some(j) = (0..c2.len()).find(|&j| !used[j] && pinned_isomorphic(a, &c2[j])) else {
                continue;
            };
            used[j] = true;
            let pa = p1
                .entry(i)
                .or_insert_with(|| formula_profile(g1, &t1[i], cfg.depth));
            let pb = p2
                .entry(j)
                .or_insert_with(|| formula_profile(g2, &t2[j], cfg.depth));
            let agree = pa.agrees(pb, cfg.depth);
            outcomes.push(Outcome::new(if agree { 1.0 } else { 0.0 }, agree));
        }
        rows.push(Row::aggregate(ell, &outcomes, 0.0));
    }
    let config = json!({
        "ells": cfg.ells,
        "depth": cfg.depth,
        "tuple_len": cfg.tuple_len,
        "samples": cfg.samples,
        "seed": cfg.seed,
        "n1": g1.n(),
        "n2": g2.n(),
    });
    let mut report = ExperimentReport::new("qe-probe", config, rows, "freq");
    report.grid_label = "ell".into();
    report.fit = None;
    if let Some(r) = report.rows.iter().find(|r| r.trials == 0) {
        report.inconclusive = true;
        report.notes.push(format!(
            "no tuple pairs with isomorphic closures at ell = {}",
            r.n
        ));
    }
    Ok(report)
}

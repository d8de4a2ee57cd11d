//! Free joins, full amalgamation, a generic-chain builder and semantic checks
//! of the semigenericity conditions.

use std::collections::{HashSet, VecDeque};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::dimension::for_each_combination;
use crate::embed::{Embedding, EmbeddingMode, EmbeddingSearch};
use crate::extcalc::{closure, in_k0_plus, is_strong_in, ClosureIndex, ExtensionPattern, Frame};
use crate::structure::{vertex_set, FiniteStructure, Signature, Vertex};
use crate::{Error, Result};

/// `B ⊗_A C`, where `a_in_b[i]` and `a_in_c[i]` are the same point of `A`.
///
/// The universe is `B`'s vertices followed by `C − A` in ascending order. Also
/// returns where each vertex of `C` lands.
pub fn free_join(
    b: &FiniteStructure,
    a_in_b: &[Vertex],
    c: &FiniteStructure,
    a_in_c: &[Vertex],
) -> Result<(FiniteStructure, Vec<Vertex>)> {
    if b.sig() != c.sig() {
        return Err(Error::NotIsomorphism(
            "structures have different signatures".into(),
        ));
    }
    if a_in_b.len() != a_in_c.len() {
        return Err(Error::NotIsomorphism(format!(
            "{} base points in B, {} in C",
            a_in_b.len(),
            a_in_c.len()
        )));
    }
    for (&x, n) in a_in_b
        .iter()
        .map(|x| (x, b.n()))
        .chain(a_in_c.iter().map(|x| (x, c.n())))
    {
        if x as usize >= n {
            return Err(Error::VertexOutOfRange {
                vertex: x,
                n,
                context: Some("free join base".into()),
            });
        }
    }
    if vertex_set(a_in_b).len() != a_in_b.len() || vertex_set(a_in_c).len() != a_in_c.len() {
        return Err(Error::NotIsomorphism(
            "base correspondence is not injective".into(),
        ));
    }
    let mut to_d: Vec<Vertex> = vec![Vertex::MAX; c.n()];
    for (&xb, &xc) in a_in_b.iter().zip(a_in_c) {
        to_d[xc as usize] = xb;
    }
    let mut next = b.n() as Vertex;
    for slot in to_d.iter_mut().filter(|s| **s == Vertex::MAX) {
        *slot = next;
        next += 1;
    }
    let in_a_c: HashSet<Vertex> = a_in_c.iter().copied().collect();
    let in_a_b: HashSet<Vertex> = a_in_b.iter().copied().collect();
    let mut edges = Vec::with_capacity(b.relation_count());
    for r in 0..b.relation_count() {
        let mut list: Vec<Vec<Vertex>> = b.edges(r).map(<[Vertex]>::to_vec).collect();
        let on_a_b = b
            .edges(r)
            .filter(|e| e.iter().all(|v| in_a_b.contains(v)))
            .count();
        let mut on_a_c = 0;
        for e in c.edges(r) {
            let img: Vec<Vertex> = e.iter().map(|&v| to_d[v as usize]).collect();
            if e.iter().all(|v| in_a_c.contains(v)) {
                on_a_c += 1;
                if !b.has_edge(r, &img) {
                    return Err(Error::NotIsomorphism(format!(
                        "hyperedge {e:?} of C over the base has no counterpart in B"
                    )));
                }
            } else {
                list.push(img);
            }
        }
        if on_a_b != on_a_c {
            return Err(Error::NotIsomorphism(format!(
                "relation {}: base carries {on_a_b} hyperedges in B and {on_a_c} in C",
                b.sig().relation(r).name
            )));
        }
        edges.push(list);
    }
    let d = FiniteStructure::from_edges(b.sig().clone(), next as usize, edges)?;
    Ok((d, to_d))
}

/// Whether `D = B ⊗_A C` lies in `K₀⁺` with `C ≤ₛ D`. Fails with
/// [`Error::NotStrong`] unless `A ≤ₛ B`.
pub fn check_full_amalgamation(
    b: &FiniteStructure,
    a_in_b: &[Vertex],
    c: &FiniteStructure,
    a_in_c: &[Vertex],
) -> Result<bool> {
    let all_b: Vec<Vertex> = (0..b.n() as Vertex).collect();
    if !is_strong_in(b, a_in_b, &all_b)? {
        return Err(Error::NotStrong);
    }
    let (d, c_to_d) = free_join(b, a_in_b, c, a_in_c)?;
    let all_d: Vec<Vertex> = (0..d.n() as Vertex).collect();
    Ok(in_k0_plus(&d) && is_strong_in(&d, &c_to_d, &all_d)?)
}

/// Isomorphism types of pairs `A ≤ₛ B` with `B ∈ K₀⁺`, `|A| ≤ base_max` and
/// `1 ≤ |B − A| ≤ v_max`. In each pattern the base is `0..|A|`.
pub fn task_types(
    sig: &Arc<Signature>,
    base_max: usize,
    v_max: usize,
) -> Result<Vec<ExtensionPattern>> {
    let mut out = Vec::new();
    for k in 0..=base_max {
        for v in 1..=v_max {
            let t = k + v;
            let mut slots: Vec<(usize, Vec<Vertex>)> = Vec::new();
            let mut buf = Vec::new();
            for r in 0..sig.len() {
                for_each_combination(t, sig.relation(r).arity, &mut buf, &mut |c| {
                    slots.push((r, c.iter().map(|&x| x as Vertex).collect()));
                });
            }
            if slots.len() > 20 {
                return Err(Error::PatternTooLarge(slots.len(), 20));
            }
            let perms = block_permutations(k, v);
            let mut seen = HashSet::new();
            let base: Vec<Vertex> = (0..k as Vertex).collect();
            for bits in 0u32..1 << slots.len() {
                let chosen: Vec<&(usize, Vec<Vertex>)> = slots
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| bits >> i & 1 == 1)
                    .map(|(_, s)| s)
                    .collect();
                let key = perms
                    .iter()
                    .map(|p| {
                        let mut es: Vec<(usize, Vec<Vertex>)> = chosen
                            .iter()
                            .map(|(r, e)| {
                                (
                                    *r,
                                    vertex_set(
                                        &e.iter().map(|&x| p[x as usize]).collect::<Vec<_>>(),
                                    ),
                                )
                            })
                            .collect();
                        es.sort();
                        es
                    })
                    .min()
                    .expect("identity permutation");
                if !seen.insert(key) {
                    continue;
                }
                let mut edges = vec![Vec::new(); sig.len()];
                for (r, e) in &chosen {
                    edges[*r].push(e.clone());
                }
                let whole = FiniteStructure::from_edges(sig.clone(), t, edges)?;
                if !in_k0_plus(&whole) {
                    continue;
                }
                let pat = ExtensionPattern::new(whole, &base)?;
                if pat.is_strong() {
                    out.push(pat);
                }
            }
        }
    }
    Ok(out)
}

/// Permutations of `0..k+v` that fix `0..k` and `k..k+v` setwise.
fn block_permutations(k: usize, v: usize) -> Vec<Vec<Vertex>> {
    let lows = permutations(&(0..k as Vertex).collect::<Vec<_>>());
    let highs = permutations(&(k as Vertex..(k + v) as Vertex).collect::<Vec<_>>());
    let mut out = Vec::new();
    for lo in &lows {
        for hi in &highs {
            out.push(lo.iter().chain(hi).copied().collect());
        }
    }
    out
}

fn permutations(items: &[Vertex]) -> Vec<Vec<Vertex>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

/// One served extension task.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskRecord {
    /// Index of the stage the task was served in; the result is `stage + 1`.
    pub stage: usize,
    /// Index into [`GenericChain::types`].
    pub type_index: usize,
    /// Image of the pattern base, in base order.
    pub base_image: Vec<Vertex>,
    /// Image of every pattern vertex in the new stage.
    pub embedding: Vec<Vertex>,
}

/// A chain `A₀ ⊆ A₁ ⊆ …` of strong extensions with the log of tasks served.
#[derive(Clone, Debug)]
pub struct GenericChain {
    pub stages: Vec<FiniteStructure>,
    pub types: Vec<ExtensionPattern>,
    pub task_log: Vec<TaskRecord>,
    pub size_bound: usize,
    /// Tasks still queued when the size bound was reached.
    pub unserved: usize,
}

/// Options for [`build_generic`].
#[derive(Clone, Debug)]
pub struct GenericConfig {
    pub size_bound: usize,
    pub v_max: usize,
    pub base_max: usize,
    pub seed: u64,
}

impl GenericConfig {
    pub fn new(size_bound: usize, v_max: usize, seed: u64) -> Self {
        Self {
            size_bound,
            v_max,
            base_max: 1,
            seed,
        }
    }
}

struct Task {
    base_image: Vec<Vertex>,
    type_index: usize,
}

/// Grows a strong chain by serving extension tasks in FIFO order.
///
/// A task is a certified set `S` of the current stage together with a task
/// type `A ≤ₛ B` and an isomorphism `A → S`; it is served by the free join of
/// the stage with `B` over `S`. Certified sets are the subsets `S` of size at
/// most `base_max` with `S ≤ₛ B′` for some served image `B′`. Since `S ≤ₛ`
/// stage implies `B′ ≤ₛ` the join, and `≤ₛ` is transitive, every certified
/// set stays strong in every later stage. Each certified set enqueues all its
/// tasks in an order shuffled by the seed.
pub fn build_generic(sig: &Arc<Signature>, cfg: &GenericConfig) -> Result<GenericChain> {
    if cfg.size_bound > 64 {
        return Err(Error::Config(format!(
            "size bound {} exceeds 64",
            cfg.size_bound
        )));
    }
    let types = task_types(sig, cfg.base_max, cfg.v_max)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut stage = FiniteStructure::empty(sig.clone(), 0);
    let mut stages = vec![stage.clone()];
    let mut certified: HashSet<Vec<Vertex>> = HashSet::new();
    let mut queue: VecDeque<Task> = VecDeque::new();
    let mut task_log = Vec::new();
    let mut enqueue = |set: Vec<Vertex>,
                       stage: &FiniteStructure,
                       queue: &mut VecDeque<Task>,
                       rng: &mut ChaCha8Rng| {
        if !certified.insert(set.clone()) {
            return;
        }
        let mut fresh = Vec::new();
        for (t, pat) in types.iter().enumerate() {
            if pat.base().len() != set.len() {
                continue;
            }
            let a = pat
                .whole()
                .induced_substructure(pat.base())
                .expect("base in range");
            let s = stage
                .induced_substructure(&set)
                .expect("certified set in range");
            let mut search = EmbeddingSearch::new(&a, &s, &[], EmbeddingMode::Isomorphism);
            while let Some(map) = search.next_map() {
                fresh.push(Task {
                    base_image: map.iter().map(|&i| set[i as usize]).collect(),
                    type_index: t,
                });
            }
        }
        fresh.shuffle(rng);
        queue.extend(fresh);
    };
    enqueue(Vec::new(), &stage, &mut queue, &mut rng);
    while let Some(task) = queue.front() {
        let pat = &types[task.type_index];
        if stage.n() + pat.v() > cfg.size_bound {
            break;
        }
        let task = queue.pop_front().expect("front exists");
        let (next, c_to_d) = free_join(&stage, &task.base_image, pat.whole(), pat.base())?;
        let added: Vec<Vertex> = (stage.n() as Vertex..next.n() as Vertex).collect();
        let old: Vec<Vertex> = (0..stage.n() as Vertex).collect();
        if !Frame::new(&next, &old, &added).is_strong(next.sig()) || !in_k0_plus(&next) {
            return Err(Error::NotStrong);
        }
        let image = vertex_set(&c_to_d);
        task_log.push(TaskRecord {
            stage: stages.len() - 1,
            type_index: task.type_index,
            base_image: task.base_image,
            embedding: c_to_d,
        });
        stage = next;
        stages.push(stage.clone());
        let mut buf = Vec::new();
        for size in 0..=cfg.base_max.min(image.len()) {
            let mut found = Vec::new();
            for_each_combination(image.len(), size, &mut buf, &mut |idx| {
                let s: Vec<Vertex> = idx.iter().map(|&i| image[i]).collect();
                let rest: Vec<Vertex> = image
                    .iter()
                    .copied()
                    .filter(|v| s.binary_search(v).is_err())
                    .collect();
                if Frame::new(&stage, &s, &rest).is_strong(stage.sig()) {
                    found.push(s);
                }
            });
            for s in found {
                enqueue(s, &stage, &mut queue, &mut rng);
            }
        }
    }
    Ok(GenericChain {
        stages,
        types,
        task_log,
        size_bound: cfg.size_bound,
        unserved: queue.len(),
    })
}

impl GenericChain {
    pub fn last(&self) -> &FiniteStructure {
        self.stages.last().expect("a chain has at least one stage")
    }

    /// Re-checks the certificate: induced prefixes, consecutive strength,
    /// `K₀⁺` membership and that every log entry is an embedding of its type
    /// over its base image.
    pub fn validate(&self) -> Result<()> {
        for (i, pair) in self.stages.windows(2).enumerate() {
            let (prev, next) = (&pair[0], &pair[1]);
            let old: Vec<Vertex> = (0..prev.n() as Vertex).collect();
            if next.n() < prev.n() || &next.induced_substructure(&old)? != prev {
                return Err(Error::Malformed(format!(
                    "stage {i} is not an induced prefix of stage {}",
                    i + 1
                )));
            }
            let all: Vec<Vertex> = (0..next.n() as Vertex).collect();
            if !is_strong_in(next, &old, &all)? {
                return Err(Error::Malformed(format!(
                    "stage {i} is not strong in stage {}",
                    i + 1
                )));
            }
        }
        if let Some(i) = self.stages.iter().position(|s| !in_k0_plus(s)) {
            return Err(Error::Malformed(format!(
                "stage {i} has a subset of negative dimension"
            )));
        }
        for (k, rec) in self.task_log.iter().enumerate() {
            let pat = self
                .types
                .get(rec.type_index)
                .ok_or_else(|| Error::Malformed(format!("task {k}: unknown type")))?;
            let target = self
                .stages
                .get(rec.stage + 1)
                .ok_or_else(|| Error::Malformed(format!("task {k}: stage out of range")))?;
            let emb = Embedding {
                map: rec.embedding.clone(),
                mode: EmbeddingMode::Isomorphism,
            };
            let base_ok = pat
                .base()
                .iter()
                .map(|&a| rec.embedding[a as usize])
                .eq(rec.base_image.iter().copied());
            if !emb.is_valid(pat.whole(), target) || !base_ok {
                return Err(Error::Malformed(format!(
                    "task {k}: embedding does not match its type"
                )));
            }
        }
        Ok(())
    }

    /// Indices of task types served at least once.
    pub fn served_types(&self) -> Vec<usize> {
        let mut t: Vec<usize> = self.task_log.iter().map(|r| r.type_index).collect();
        t.sort_unstable();
        t.dedup();
        t
    }

    pub fn to_json_value(&self) -> Value {
        json!({
            "size_bound": self.size_bound,
            "unserved": self.unserved,
            "types": self.types.iter().map(|p| json!({
                "structure": p.whole().to_json_value(),
                "base": p.base(),
            })).collect::<Vec<_>>(),
            "stages": self.stages.iter().map(FiniteStructure::to_json_value).collect::<Vec<_>>(),
            "tasks": self.task_log.iter().map(|r| json!({
                "stage": r.stage,
                "type": r.type_index,
                "base_image": r.base_image,
                "embedding": r.embedding,
            })).collect::<Vec<_>>(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("json values serialise")
    }
}

/// Whether `cl^m_G(A) = C`.
pub fn closure_matches(g: &FiniteStructure, a: &[Vertex], c: &[Vertex], m: usize) -> bool {
    closure(g, a, m) == vertex_set(c)
}

/// First extension `ĝ` of `f` (the image of `pat.base()` in order) to an
/// isomorphic copy of `B` such that `cl^m(ĝB) = ĝB ∪ cl^m(fA)` and
/// `cl^m(fA) ∪ ĝB` is the free join of its two parts over `fA`.
pub fn semigeneric_witness(
    g: &FiniteStructure,
    f: &[Vertex],
    pat: &ExtensionPattern,
    m: usize,
) -> Result<Option<Embedding>> {
    let mut index = ClosureIndex::new(g);
    semigeneric_witness_with(&mut index, f, pat, m)
}

/// [`semigeneric_witness`] reusing the closure cache of `index`.
pub fn semigeneric_witness_with(
    index: &mut ClosureIndex<'_>,
    f: &[Vertex],
    pat: &ExtensionPattern,
    m: usize,
) -> Result<Option<Embedding>> {
    if !pat.is_strong() {
        return Err(Error::NotStrong);
    }
    let g = index.structure();
    if f.len() != pat.base().len() {
        return Err(Error::Malformed(format!(
            "base map has {} images for {} base vertices",
            f.len(),
            pat.base().len()
        )));
    }
    let fa = vertex_set(f);
    let cl_a = index.closure(&fa, m);
    let partial: Vec<(Vertex, Vertex)> =
        pat.base().iter().copied().zip(f.iter().copied()).collect();
    let mut search = EmbeddingSearch::new(pat.whole(), g, &partial, EmbeddingMode::Isomorphism);
    while let Some(map) = search.next_map() {
        let gb = vertex_set(map);
        if gb
            .iter()
            .any(|v| fa.binary_search(v).is_err() && cl_a.binary_search(v).is_ok())
        {
            continue;
        }
        if crosses(g, &cl_a, &fa, &gb) {
            continue;
        }
        let mut expected = cl_a.clone();
        expected.extend_from_slice(&gb);
        let expected = vertex_set(&expected);
        if index.closure(&gb, m) == expected {
            return Ok(Some(Embedding {
                map: map.to_vec(),
                mode: EmbeddingMode::Isomorphism,
            }));
        }
    }
    Ok(None)
}

/// Whether a hyperedge inside `cl ∪ gb` meets both `cl − fa` and `gb − fa`.
fn crosses(g: &FiniteStructure, cl: &[Vertex], fa: &[Vertex], gb: &[Vertex]) -> bool {
    let inside = |v: &Vertex| cl.binary_search(v).is_ok() || gb.binary_search(v).is_ok();
    let left = |v: &Vertex| cl.binary_search(v).is_ok() && fa.binary_search(v).is_err();
    gb.iter()
        .filter(|v| fa.binary_search(v).is_err())
        .any(|&y| {
            (0..g.relation_count()).any(|r| {
                g.incident(r, y).iter().any(|&id| {
                    let e = g.edge(r, id as usize);
                    e.iter().all(inside) && e.iter().any(left)
                })
            })
        })
}

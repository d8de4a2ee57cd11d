//! Backtracking embedding search.
//!
//! Source vertices are visited in a static order: pinned vertices first, then
//! repeatedly the unplaced vertex that touches a placed one, breaking ties by
//! descending degree and then by index. Candidates for a vertex are the
//! intersection of the target neighbourhoods forced by its already-placed
//! neighbours, so on sparse targets the branching factor is the degree rather
//! than `n`. Results come out in lexicographic order of the assignment read in
//! visiting order.

use smallvec::SmallVec;

use crate::structure::{FiniteStructure, Vertex};

const NONE: Vertex = Vertex::MAX;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EmbeddingMode {
    /// Hyperedges are preserved and reflected: the map is an isomorphism onto
    /// its image.
    Isomorphism,
    /// Every source hyperedge with a vertex outside `base` must map onto a
    /// target hyperedge. Nothing is reflected and relations inside the base
    /// are ignored.
    RelativeTo(Vec<Vertex>),
}

impl EmbeddingMode {
    /// `RelativeTo` with the base normalised to a sorted set.
    pub fn relative_to(base: &[Vertex]) -> Self {
        EmbeddingMode::RelativeTo(crate::structure::vertex_set(base))
    }

    fn constrains(&self, edge: &[Vertex]) -> bool {
        match self {
            EmbeddingMode::Isomorphism => true,
            EmbeddingMode::RelativeTo(base) => edge.iter().any(|v| base.binary_search(v).is_err()),
        }
    }
}

/// An injective vertex map `map[v]` from a source into a target structure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Embedding {
    pub map: Vec<Vertex>,
    pub mode: EmbeddingMode,
}

impl Embedding {
    /// Sorted image set.
    pub fn image(&self) -> Vec<Vertex> {
        crate::structure::vertex_set(&self.map)
    }

    /// `then ∘ self`, for `self: A → B` and `then: B → C`.
    pub fn compose(&self, then: &Embedding) -> Embedding {
        Embedding {
            map: self.map.iter().map(|&v| then.map[v as usize]).collect(),
            mode: self.mode.clone(),
        }
    }

    /// Checks every invariant of the mode directly, without search.
    pub fn is_valid(&self, source: &FiniteStructure, target: &FiniteStructure) -> bool {
        if self.map.len() != source.n() || source.relation_count() != target.relation_count() {
            return false;
        }
        if self.map.iter().any(|&x| x as usize >= target.n()) {
            return false;
        }
        let mut inverse = vec![NONE; target.n()];
        for (v, &x) in self.map.iter().enumerate() {
            if inverse[x as usize] != NONE {
                return false;
            }
            inverse[x as usize] = v as Vertex;
        }
        for r in 0..source.relation_count() {
            for e in source.edges(r) {
                if !self.mode.constrains(e) {
                    continue;
                }
                let img: Vec<Vertex> = e.iter().map(|&v| self.map[v as usize]).collect();
                if !target.has_edge(r, &img) {
                    return false;
                }
            }
            if self.mode == EmbeddingMode::Isomorphism {
                for e in target.edges(r) {
                    if e.iter().all(|&x| inverse[x as usize] != NONE) {
                        let pre: Vec<Vertex> = e.iter().map(|&x| inverse[x as usize]).collect();
                        if !source.has_edge(r, &pre) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum State {
    Fresh,
    Yielded,
    Done,
}

/// Lazy stream of all embeddings extending a partial assignment.
pub struct EmbeddingSearch<'a> {
    source: &'a FiniteStructure,
    target: &'a FiniteStructure,
    mode: EmbeddingMode,
    iso: bool,
    order: Vec<Vertex>,
    forced: Vec<Option<Vertex>>,
    /// Constrained source edges `(rel, id)` completed at each depth.
    complete: Vec<Vec<(usize, u32)>>,
    /// Whether `order[d]` lies on a constrained edge with an earlier vertex.
    anchored: Vec<bool>,
    /// Anchor edges of arity above 2, as `(rel, id)`.
    hyper_anchors: Vec<Vec<(usize, u32)>>,
    /// Binary anchors as `(rel, earlier source endpoint)`.
    pair_anchors: Vec<Vec<(usize, Vertex)>>,
    /// Isomorphism mode: `(rel, earlier w)` for binary relations where
    /// `{order[d], w}` is not an edge, so its image must not be one either.
    non_edges: Vec<Vec<(usize, Vertex)>>,
    /// Earlier source vertices whose images must lie below the image of
    /// `order[d]`; empty unless the search yields one map per image set.
    below: Vec<Vec<Vertex>>,
    map: Vec<Vertex>,
    inverse: Vec<Vertex>,
    cands: Vec<Vec<Vertex>>,
    pos: Vec<usize>,
    depth: usize,
    state: State,
    scratch: Vec<Vertex>,
    lists: Vec<Vec<Vertex>>,
}

impl<'a> EmbeddingSearch<'a> {
    /// `partial` pins source vertices to target vertices. An out-of-range or
    /// non-injective pin, or mismatched signatures, yields an empty stream.
    pub fn new(
        source: &'a FiniteStructure,
        target: &'a FiniteStructure,
        partial: &[(Vertex, Vertex)],
        mode: EmbeddingMode,
    ) -> Self {
        let ns = source.n();
        let mut search = Self {
            source,
            target,
            iso: mode == EmbeddingMode::Isomorphism,
            mode,
            order: Vec::with_capacity(ns),
            forced: Vec::with_capacity(ns),
            complete: Vec::new(),
            anchored: Vec::new(),
            hyper_anchors: Vec::new(),
            pair_anchors: Vec::new(),
            non_edges: Vec::new(),
            below: Vec::new(),
            map: vec![NONE; ns],
            inverse: vec![NONE; target.n()],
            cands: vec![Vec::new(); ns],
            pos: vec![0; ns],
            depth: 0,
            state: State::Fresh,
            scratch: Vec::new(),
            lists: Vec::new(),
        };

        let compatible = source.relation_count() == target.relation_count()
            && (0..source.relation_count()).all(|r| source.arity(r) == target.arity(r));
        let mut pinned = vec![NONE; ns];
        let mut used = std::collections::HashSet::new();
        let mut ok = compatible && ns <= target.n();
        for &(v, x) in partial {
            if v as usize >= ns || x as usize >= target.n() || !used.insert(x) {
                ok = false;
                break;
            }
            if pinned[v as usize] != NONE && pinned[v as usize] != x {
                ok = false;
                break;
            }
            pinned[v as usize] = x;
        }
        if !ok {
            search.state = State::Done;
            return search;
        }

        let mut placed = vec![false; ns];
        for v in 0..ns {
            if pinned[v] != NONE {
                placed[v] = true;
                search.order.push(v as Vertex);
                search.forced.push(Some(pinned[v]));
            }
        }
        while search.order.len() < ns {
            let next = (0..ns as Vertex)
                .filter(|&v| !placed[v as usize])
                .max_by_key(|&v| {
                    let touches = source
                        .primal_neighbors(v)
                        .iter()
                        .any(|&u| placed[u as usize]);
                    (touches, source.degree(v), std::cmp::Reverse(v))
                })
                .expect("unplaced vertex remains");
            placed[next as usize] = true;
            search.order.push(next);
            search.forced.push(None);
        }

        let mut rank = vec![0usize; ns];
        for (d, &v) in search.order.iter().enumerate() {
            rank[v as usize] = d;
        }
        search.complete = vec![Vec::new(); ns];
        search.anchored = vec![false; ns];
        search.hyper_anchors = vec![Vec::new(); ns];
        search.pair_anchors = vec![Vec::new(); ns];
        for r in 0..source.relation_count() {
            for (id, e) in source.edges(r).enumerate() {
                if !search.mode.constrains(e) {
                    continue;
                }
                let last = e
                    .iter()
                    .map(|&v| rank[v as usize])
                    .max()
                    .expect("edge is nonempty");
                search.complete[last].push((r, id as u32));
                let first = e
                    .iter()
                    .map(|&v| rank[v as usize])
                    .min()
                    .expect("edge is nonempty");
                for &v in e {
                    let d = rank[v as usize];
                    if d > first {
                        search.anchored[d] = true;
                        if e.len() == 2 {
                            let w = if e[0] == v { e[1] } else { e[0] };
                            search.pair_anchors[d].push((r, w));
                        } else {
                            search.hyper_anchors[d].push((r, id as u32));
                        }
                    }
                }
            }
        }
        search.below = vec![Vec::new(); ns];
        search.non_edges = vec![Vec::new(); ns];
        if search.iso {
            for (d, &u) in search.order.iter().enumerate() {
                for &w in &search.order[..d] {
                    for r in (0..source.relation_count()).filter(|&r| source.arity(r) == 2) {
                        if !source.contains_sorted(r, &[u.min(w), u.max(w)]) {
                            search.non_edges[d].push((r, w));
                        }
                    }
                }
            }
        }
        search
    }

    /// Isomorphic copies of `source` in `target` extending `partial`, one
    /// embedding per image set.
    ///
    /// Two such embeddings share an image exactly when they differ by an
    /// automorphism of `source` fixing the pinned vertices. Walking the
    /// visiting order, each vertex's orbit under the automorphisms fixing all
    /// earlier vertices must map above it, which leaves one representative
    /// per class.
    pub fn distinct_images(
        source: &'a FiniteStructure,
        target: &'a FiniteStructure,
        partial: &[(Vertex, Vertex)],
    ) -> Self {
        let mut search = Self::new(source, target, partial, EmbeddingMode::Isomorphism);
        if search.state == State::Done {
            return search;
        }
        let mut fixed: Vec<(Vertex, Vertex)> = search
            .order
            .iter()
            .zip(&search.forced)
            .filter(|(_, f)| f.is_some())
            .map(|(&v, _)| (v, v))
            .collect();
        let ns = search.order.len();
        for i in fixed.len()..ns {
            let v = search.order[i];
            for j in i + 1..ns {
                let w = search.order[j];
                let mut pins = fixed.clone();
                pins.push((v, w));
                if Self::new(source, source, &pins, EmbeddingMode::Isomorphism).exists() {
                    search.below[j].push(v);
                }
            }
            fixed.push((v, v));
        }
        search
    }

    /// Advances to the next embedding; the slice is indexed by source vertex.
    pub fn next_map(&mut self) -> Option<&[Vertex]> {
        let len = self.order.len();
        match self.state {
            State::Done => return None,
            State::Fresh => {
                if len == 0 {
                    self.state = State::Yielded;
                    return Some(&self.map);
                }
                self.depth = 0;
                self.fill_candidates(0);
            }
            State::Yielded => {
                if len == 0 {
                    self.state = State::Done;
                    return None;
                }
                self.unassign(self.depth);
            }
        }
        loop {
            let d = self.depth;
            if self.pos[d] < self.cands[d].len() {
                let x = self.cands[d][self.pos[d]];
                self.pos[d] += 1;
                if self.try_assign(d, x) {
                    if d + 1 == len {
                        self.state = State::Yielded;
                        return Some(&self.map);
                    }
                    self.depth = d + 1;
                    self.fill_candidates(d + 1);
                }
            } else {
                if d == 0 {
                    self.state = State::Done;
                    return None;
                }
                self.depth = d - 1;
                self.unassign(d - 1);
            }
        }
    }

    /// Number of remaining embeddings.
    pub fn count_all(mut self) -> u64 {
        let mut c = 0;
        while self.next_map().is_some() {
            c += 1;
        }
        c
    }

    /// Whether at least one embedding remains.
    pub fn exists(mut self) -> bool {
        self.next_map().is_some()
    }

    fn unassign(&mut self, d: usize) {
        let u = self.order[d] as usize;
        let x = self.map[u];
        if x != NONE {
            self.inverse[x as usize] = NONE;
            self.map[u] = NONE;
        }
    }

    fn try_assign(&mut self, d: usize, x: Vertex) -> bool {
        if self.inverse[x as usize] != NONE {
            return false;
        }
        let u = self.order[d];
        self.map[u as usize] = x;
        self.inverse[x as usize] = u;
        if self.check(d, x) {
            true
        } else {
            self.map[u as usize] = NONE;
            self.inverse[x as usize] = NONE;
            false
        }
    }

    fn check(&mut self, d: usize, x: Vertex) -> bool {
        let (src, tgt) = (self.source, self.target);
        // Unforced candidates already lie on every anchor edge, which covers
        // each completed edge of arity at least 2.
        let anchored = self.forced[d].is_none();
        for &(r, id) in &self.complete[d] {
            let e = src.edge(r, id as usize);
            if anchored && e.len() >= 2 {
                continue;
            }
            if e.len() == 2 {
                let (a, b) = (self.map[e[0] as usize], self.map[e[1] as usize]);
                if !tgt.contains_sorted(r, &[a.min(b), a.max(b)]) {
                    return false;
                }
            } else {
                self.scratch.clear();
                self.scratch.extend(e.iter().map(|&v| self.map[v as usize]));
                self.scratch.sort_unstable();
                if !tgt.contains_sorted(r, &self.scratch) {
                    return false;
                }
            }
        }
        if self.iso {
            for &(r, w) in &self.non_edges[d] {
                let y = self.map[w as usize];
                if tgt.contains_sorted(r, &[x.min(y), x.max(y)]) {
                    return false;
                }
            }
            for r in 0..tgt.relation_count() {
                if tgt.arity(r) != 2 {
                    for &id in tgt.incident(r, x) {
                        let e = tgt.edge(r, id as usize);
                        if e.iter().all(|&y| self.inverse[y as usize] != NONE) {
                            self.scratch.clear();
                            self.scratch
                                .extend(e.iter().map(|&y| self.inverse[y as usize]));
                            self.scratch.sort_unstable();
                            if !src.contains_sorted(r, &self.scratch) {
                                return false;
                            }
                        }
                    }
                }
            }
        }
        true
    }

    fn fill_candidates(&mut self, d: usize) {
        self.pos[d] = 0;
        let mut out = std::mem::take(&mut self.cands[d]);
        out.clear();
        if let Some(x) = self.forced[d] {
            out.push(x);
            self.cands[d] = out;
            return;
        }
        // Candidates must exceed `floor`; NONE means unconstrained.
        let floor = self.below[d]
            .iter()
            .map(|&v| self.map[v as usize])
            .max()
            .unwrap_or(NONE);
        if !self.anchored[d] {
            let start = if floor == NONE { 0 } else { floor + 1 };
            out.extend(
                (start..self.target.n() as Vertex).filter(|&x| self.inverse[x as usize] == NONE),
            );
            self.cands[d] = out;
            return;
        }

        let (src, tgt) = (self.source, self.target);
        if self.hyper_anchors[d].is_empty() {
            // Start from the shortest neighbour list and merge the others in.
            let (map, inverse) = (&self.map, &self.inverse);
            let list = |&(r, w): &(usize, Vertex)| above(tgt.neighbors(r, map[w as usize]), floor);
            let anchors = &self.pair_anchors[d];
            if let [a, b] = anchors.as_slice() {
                let (a, b) = (list(a), list(b));
                let (mut i, mut j) = (0, 0);
                while i < a.len() && j < b.len() {
                    match a[i].cmp(&b[j]) {
                        std::cmp::Ordering::Less => i += 1,
                        std::cmp::Ordering::Greater => j += 1,
                        std::cmp::Ordering::Equal => {
                            if inverse[a[i] as usize] == NONE {
                                out.push(a[i]);
                            }
                            i += 1;
                            j += 1;
                        }
                    }
                }
                self.cands[d] = out;
                return;
            }
            let shortest = (0..anchors.len())
                .min_by_key(|&i| list(&anchors[i]).len())
                .expect("anchored vertex has a binary anchor");
            out.extend(
                list(&anchors[shortest])
                    .iter()
                    .copied()
                    .filter(|&z| inverse[z as usize] == NONE),
            );
            for (i, anchor) in anchors.iter().enumerate() {
                if out.is_empty() {
                    break;
                }
                if i != shortest {
                    retain_common(&mut out, list(anchor));
                }
            }
            self.cands[d] = out;
            return;
        }
        let u = self.order[d];
        let mut lists = std::mem::take(&mut self.lists);
        let mut used_lists = 0;
        let mut slices: SmallVec<[&[Vertex]; 8]> = SmallVec::new();
        // Owned lists for hyperedges of arity > 2 are built first, then borrowed.
        for &(r, id) in &self.hyper_anchors[d] {
            let e = src.edge(r, id as usize);
            if lists.len() <= used_lists {
                lists.push(Vec::new());
            }
            let list = &mut lists[used_lists];
            used_lists += 1;
            list.clear();
            let assigned: Vec<Vertex> = e
                .iter()
                .filter(|&&v| v != u && self.map[v as usize] != NONE)
                .map(|&v| self.map[v as usize])
                .collect();
            let pivot = *assigned
                .iter()
                .min_by_key(|&&y| tgt.incident(r, y).len())
                .expect("anchor has an assigned vertex");
            for &tid in tgt.incident(r, pivot) {
                let te = tgt.edge(r, tid as usize);
                if assigned.iter().all(|y| te.binary_search(y).is_ok()) {
                    list.extend(te.iter().copied().filter(|y| !assigned.contains(y)));
                }
            }
            list.sort_unstable();
            list.dedup();
        }
        for &(r, w) in &self.pair_anchors[d] {
            slices.push(above(tgt.neighbors(r, self.map[w as usize]), floor));
        }
        slices.extend(lists[..used_lists].iter().map(|l| above(l, floor)));
        slices.sort_unstable_by_key(|s| s.len());
        let (first, rest) = slices.split_first().expect("at least one anchor");
        let inverse = &self.inverse;
        out.extend(
            first
                .iter()
                .copied()
                .filter(|&z| inverse[z as usize] == NONE),
        );
        // All lists are sorted, so each pass is a linear merge.
        for s in rest {
            if out.is_empty() {
                break;
            }
            retain_common(&mut out, s);
        }
        drop(slices);
        self.lists = lists;
        self.cands[d] = out;
    }
}

/// Keeps the elements of sorted `out` that also occur in sorted `other`.
fn retain_common(out: &mut Vec<Vertex>, other: &[Vertex]) {
    let mut j = 0;
    out.retain(|&z| {
        while j < other.len() && other[j] < z {
            j += 1;
        }
        j < other.len() && other[j] == z
    });
}

/// Suffix of a sorted list above `floor`; NONE leaves it whole.
fn above(list: &[Vertex], floor: Vertex) -> &[Vertex] {
    if floor == NONE {
        list
    } else {
        &list[list.partition_point(|&z| z <= floor)..]
    }
}

impl Iterator for EmbeddingSearch<'_> {
    type Item = Embedding;

    fn next(&mut self) -> Option<Embedding> {
        let map = self.next_map()?.to_vec();
        Some(Embedding {
            map,
            mode: self.mode.clone(),
        })
    }
}

/// All extensions of `partial` to embeddings of `source` into `target`.
pub fn enumerate_embeddings<'a>(
    source: &'a FiniteStructure,
    target: &'a FiniteStructure,
    partial: &[(Vertex, Vertex)],
    mode: EmbeddingMode,
) -> EmbeddingSearch<'a> {
    EmbeddingSearch::new(source, target, partial, mode)
}

pub fn are_isomorphic(a: &FiniteStructure, b: &FiniteStructure) -> bool {
    a.n() == b.n()
        && a.edge_counts() == b.edge_counts()
        && EmbeddingSearch::new(a, b, &[], EmbeddingMode::Isomorphism).exists()
}

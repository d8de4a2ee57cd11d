//! Hereditary nonnegativity of `δ` via a minimum cut.
//!
//! For a vertex set `V′`, `δ(V′) = |V′| − Σ_{h ⊆ V′} α_h`. In the network
//! `s → h` (capacity `α_h`), `h → v ∈ h` (unbounded), `v → t` (capacity 1),
//! a finite cut with source side `V′` costs `Σα − Σ_{h ⊆ V′} α_h + |V′|`,
//! so `min_{V′} δ(V′) = mincut − Σα`. Capacities are [`DimForm`]s compared
//! with [`Signature::sign`], which makes Edmonds–Karp exact.

use std::collections::VecDeque;

use crate::dimension::{DimForm, Sign};
use crate::structure::{FiniteStructure, Signature, Vertex};

struct Arc {
    to: usize,
    rev: usize,
    cap: Option<DimForm>,
    flow: DimForm,
}

struct Network<'s> {
    sig: &'s Signature,
    adj: Vec<Vec<Arc>>,
}

impl<'s> Network<'s> {
    fn new(sig: &'s Signature, nodes: usize) -> Self {
        Self {
            sig,
            adj: (0..nodes).map(|_| Vec::new()).collect(),
        }
    }

    fn add_arc(&mut self, from: usize, to: usize, cap: Option<DimForm>) {
        let zero = DimForm::zero(self.sig.len());
        let rf = self.adj[to].len();
        let rt = self.adj[from].len();
        self.adj[from].push(Arc {
            to,
            rev: rf,
            cap,
            flow: zero.clone(),
        });
        self.adj[to].push(Arc {
            to: from,
            rev: rt,
            cap: Some(zero.clone()),
            flow: zero,
        });
    }

    fn residual(&self, arc: &Arc) -> Option<DimForm> {
        arc.cap.as_ref().map(|c| c - &arc.flow)
    }

    fn has_residual(&self, arc: &Arc) -> bool {
        match self.residual(arc) {
            None => true,
            Some(r) => self.sig.sign(&r) == Sign::Positive,
        }
    }

    /// Augments along shortest paths until none remain; returns the set of
    /// nodes reachable from `s` in the final residual graph.
    fn max_flow(&mut self, s: usize, t: usize) -> Vec<bool> {
        loop {
            let mut prev: Vec<Option<(usize, usize)>> = vec![None; self.adj.len()];
            let mut seen = vec![false; self.adj.len()];
            seen[s] = true;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                if u == t {
                    break;
                }
                for (i, arc) in self.adj[u].iter().enumerate() {
                    if !seen[arc.to] && self.has_residual(arc) {
                        seen[arc.to] = true;
                        prev[arc.to] = Some((u, i));
                        queue.push_back(arc.to);
                    }
                }
            }
            if !seen[t] {
                return seen;
            }
            let mut bottleneck: Option<DimForm> = None;
            let mut v = t;
            while let Some((u, i)) = prev[v] {
                if let Some(r) = self.residual(&self.adj[u][i]) {
                    bottleneck = Some(match bottleneck {
                        Some(b) if self.sig.cmp_forms(&b, &r).is_le() => b,
                        _ => r,
                    });
                }
                v = u;
            }
            let b = bottleneck.expect("every augmenting path crosses a finite arc");
            let mut v = t;
            while let Some((u, i)) = prev[v] {
                let rev = self.adj[u][i].rev;
                self.adj[u][i].flow += &b;
                self.adj[v][rev].flow -= &b;
                v = u;
            }
        }
    }
}

/// A vertex set of minimum `δ` among subsets of `vertices` (sorted), with its
/// `δ`. Ties resolve to the smallest source side of a minimum cut.
pub(crate) fn min_delta_subset(m: &FiniteStructure, vertices: &[Vertex]) -> (Vec<Vertex>, DimForm) {
    let sig = m.sig().as_ref();
    let p = sig.len();
    let mut edges: Vec<(usize, Vec<Vertex>)> = Vec::new();
    for r in 0..m.relation_count() {
        for &v in vertices {
            for &id in m.incident(r, v) {
                let e = m.edge(r, id as usize);
                if e[0] == v && e.iter().all(|u| vertices.binary_search(u).is_ok()) {
                    edges.push((r, e.to_vec()));
                }
            }
        }
    }
    let (s, t) = (0, 1);
    let vbase = 2 + edges.len();
    let mut net = Network::new(sig, vbase + vertices.len());
    let mut total = DimForm::zero(p);
    for (i, (r, e)) in edges.iter().enumerate() {
        let mut unit = vec![0i64; p];
        unit[*r] = 1;
        let cap = DimForm::new(0, &unit);
        total += &cap;
        net.add_arc(s, 2 + i, Some(cap));
        for u in e {
            let pos = vertices.binary_search(u).expect("edge inside vertex set");
            net.add_arc(2 + i, vbase + pos, None);
        }
    }
    let one = DimForm::new(1, &vec![0; p]);
    for pos in 0..vertices.len() {
        net.add_arc(vbase + pos, t, Some(one.clone()));
    }
    let reach = net.max_flow(s, t);
    let side: Vec<Vertex> = vertices
        .iter()
        .enumerate()
        .filter(|&(pos, _)| reach[vbase + pos])
        .map(|(_, &v)| v)
        .collect();
    let d = crate::dimension::delta_of_set(m, &side);
    (side, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dimension::delta_of_set;

    #[test]
    fn k4_has_negative_subset() {
        let sig = Signature::graph("0.7").unwrap();
        let k4 = FiniteStructure::graph(
            sig.clone(),
            4,
            &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
        )
        .unwrap();
        let (side, d) = min_delta_subset(&k4, &[0, 1, 2, 3]);
        assert_eq!(side, vec![0, 1, 2, 3]);
        assert_eq!(d, DimForm::new(4, &[-6]));
        let tri = FiniteStructure::graph(sig, 3, &[(0, 1), (0, 2), (1, 2)]).unwrap();
        let (side, d) = min_delta_subset(&tri, &[0, 1, 2]);
        assert!(side.is_empty());
        assert!(d.is_zero());
        assert_eq!(delta_of_set(&tri, &side), d);
    }
}

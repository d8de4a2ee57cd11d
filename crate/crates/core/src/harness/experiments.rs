//! Experiments over a grid of universe sizes.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::{ExperimentReport, Outcome, RunConfig};
use crate::amalgam::semigeneric_witness_with;
use crate::dimension::{delta, delta_of_set, Sign};
use crate::embed::{EmbeddingMode, EmbeddingSearch};
use crate::extcalc::{for_each_connected, ClosureIndex, ExtensionPattern};
use crate::sampler::sample_with;
use crate::structure::{vertex_set, FiniteStructure, Signature, Vertex};
use crate::{Error, Result};

fn sig_value(sig: &Signature) -> Value {
    serde_json::from_str(&sig.to_json()).expect("signature json parses")
}

fn pattern_value(pat: &ExtensionPattern) -> Value {
    json!({"structure": pat.whole().to_json_value(), "base": pat.base()})
}

/// Knobs for [`ext_stats`].
#[derive(Clone, Debug)]
pub struct ExtStatsConfig {
    /// Largest number of base maps examined per trial.
    pub cap: usize,
    /// Constant in the upper bound `N < c1·n^δ`.
    pub c1: f64,
}

impl Default for ExtStatsConfig {
    fn default() -> Self {
        Self { cap: 200, c1: 10.0 }
    }
}

/// All injections `0..k → 0..n` if there are at most `cap`, otherwise `cap`
/// uniform draws (with replacement). The flag reports subsampling.
fn base_maps(rng: &mut ChaCha8Rng, n: usize, k: usize, cap: usize) -> (Vec<Vec<Vertex>>, bool) {
    if k > n {
        return (Vec::new(), false);
    }
    let count = (n - k + 1..=n).try_fold(1usize, |acc, x| acc.checked_mul(x));
    match count {
        Some(c) if c <= cap => {
            let mut out = Vec::with_capacity(c);
            let mut cur = Vec::with_capacity(k);
            let mut used = vec![false; n];
            injections(n, k, &mut cur, &mut used, &mut out);
            (out, false)
        }
        _ => {
            let draws = (0..cap)
                .map(|_| loop {
                    let f: Vec<Vertex> = (0..k).map(|_| rng.random_range(0..n as Vertex)).collect();
                    if vertex_set(&f).len() == k {
                        break f;
                    }
                })
                .collect();
            (draws, true)
        }
    }
}

fn injections(
    n: usize,
    k: usize,
    cur: &mut Vec<Vertex>,
    used: &mut [bool],
    out: &mut Vec<Vec<Vertex>>,
) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for x in 0..n {
        if !used[x] {
            used[x] = true;
            cur.push(x as Vertex);
            injections(n, k, cur, used, out);
            cur.pop();
            used[x] = false;
        }
    }
}

/// Counts `N(f) = |{g ⊇ f : g maps B relative to A}|` (maps, not images) for
/// base maps `f` into a sampled structure.
///
/// Per trial the statistic is the mean of `N(f)` over the examined `f`; the
/// event is that `n^δ (ln n)^{−(v+1)} < N(f) < c1·n^δ` holds for all of them,
/// with `δ = δ(B/A)` and `v = |B − A|`.
pub fn ext_stats(
    pat: &ExtensionPattern,
    run: &RunConfig,
    cfg: &ExtStatsConfig,
) -> Result<ExperimentReport> {
    if !pat.is_strong() {
        return Err(Error::NotStrong);
    }
    if cfg.cap == 0 {
        return Err(Error::Config("embedding cap must be positive".into()));
    }
    let sig = pat.sig().clone();
    let d = pat.delta_rel().value(&sig);
    let v = pat.v() as i32;
    let mode = EmbeddingMode::relative_to(pat.base());
    let rows = run.rows(|n, rng| {
        let g = sample_with(rng, n, sig.clone())?;
        let (maps, capped) = base_maps(rng, n, pat.base().len(), cfg.cap);
        let nf = n as f64;
        let lower = nf.powf(d) * nf.ln().powi(-(v + 1));
        let upper = cfg.c1 * nf.powf(d);
        let mut total = 0.0;
        let mut all = !maps.is_empty();
        for f in &maps {
            let partial: Vec<(Vertex, Vertex)> =
                pat.base().iter().copied().zip(f.iter().copied()).collect();
            let count =
                EmbeddingSearch::new(pat.whole(), &g, &partial, mode.clone()).count_all() as f64;
            total += count;
            all &= lower < count && count < upper;
        }
        let mean = if maps.is_empty() {
            0.0
        } else {
            total / maps.len() as f64
        };
        Ok(Outcome {
            capped,
            ..Outcome::new(mean, all)
        })
    })?;
    let config = json!({
        "sig": sig_value(&sig),
        "pattern": pattern_value(pat),
        "run": run.echo(),
        "cap": cfg.cap,
        "c1": cfg.c1,
        "delta": pat.delta_rel().to_json(&sig),
    });
    Ok(ExperimentReport::new("ext-stats", config, rows, "mean"))
}

/// Frequency of a copy of `b` (isomorphic onto its image) in samples.
pub fn rare_substructure(b: &FiniteStructure, run: &RunConfig) -> Result<ExperimentReport> {
    let sig = b.sig().clone();
    let d = delta(b);
    if sig.sign(&d) != Sign::Negative {
        return Err(Error::Config(format!(
            "δ(B) = {} is not negative",
            d.describe(&sig)
        )));
    }
    let rows = run.rows(|n, rng| {
        let g = sample_with(rng, n, sig.clone())?;
        let found = EmbeddingSearch::distinct_images(b, &g, &[]).exists();
        Ok(Outcome::new(if found { 1.0 } else { 0.0 }, found))
    })?;
    let config = json!({
        "sig": sig_value(&sig),
        "structure": b.to_json_value(),
        "run": run.echo(),
        "delta": d.to_json(&sig),
    });
    Ok(ExperimentReport::new("rare", config, rows, "freq"))
}

/// Frequency of `cl^m(∅) = ∅`, cross-checked against the absence of a
/// connected set of fewer than `m` vertices with negative `δ`.
///
/// The statistic is `|cl^m(∅)|`.
pub fn empty_closure(sig: &Arc<Signature>, m: usize, run: &RunConfig) -> Result<ExperimentReport> {
    if m > 6 {
        return Err(Error::Config(format!("closure bound {m} exceeds 6")));
    }
    let rows = run.rows(|n, rng| {
        let g = sample_with(rng, n, sig.clone())?;
        let cl = ClosureIndex::new(&g).closure(&[], m);
        let mut negative = false;
        for_each_connected(&g, m.saturating_sub(1), &|_| true, &mut |s| {
            if !negative && sig.sign(&delta_of_set(&g, &vertex_set(s))) == Sign::Negative {
                negative = true;
            }
        });
        Ok(Outcome {
            disagreement: cl.is_empty() == negative,
            ..Outcome::new(cl.len() as f64, cl.is_empty())
        })
    })?;
    let config = json!({"sig": sig_value(sig), "m": m, "run": run.echo()});
    Ok(ExperimentReport::new("empty-closure", config, rows, "mean"))
}

/// Frequency of "every base copy `f` has a semigeneric witness for `pat` at
/// closure bound `m`". Base copies are iso-mode embeddings of `A`, reservoir
/// subsampled to `cap`. The statistic is the fraction of copies with a witness.
pub fn zero_one(
    pat: &ExtensionPattern,
    m: usize,
    run: &RunConfig,
    cap: usize,
) -> Result<ExperimentReport> {
    if !pat.is_strong() {
        return Err(Error::NotStrong);
    }
    if cap == 0 {
        return Err(Error::Config("embedding cap must be positive".into()));
    }
    let sig = pat.sig().clone();
    let a = pat.whole().induced_substructure(pat.base())?;
    let rows = run.rows(|n, rng| {
        let g = sample_with(rng, n, sig.clone())?;
        let mut seen = 0usize;
        let mut reservoir: Vec<Vec<Vertex>> = Vec::with_capacity(cap);
        let mut search = EmbeddingSearch::new(&a, &g, &[], EmbeddingMode::Isomorphism);
        while let Some(map) = search.next_map() {
            if reservoir.len() < cap {
                reservoir.push(map.to_vec());
            } else {
                let j = rng.random_range(0..=seen);
                if j < cap {
                    reservoir[j] = map.to_vec();
                }
            }
            seen += 1;
        }
        let mut index = ClosureIndex::new(&g);
        let mut hits = 0usize;
        for f in &reservoir {
            if semigeneric_witness_with(&mut index, f, pat, m)?.is_some() {
                hits += 1;
            }
        }
        let value = if reservoir.is_empty() {
            1.0
        } else {
            hits as f64 / reservoir.len() as f64
        };
        Ok(Outcome {
            capped: seen > cap,
            ..Outcome::new(value, hits == reservoir.len())
        })
    })?;
    let config = json!({
        "sig": sig_value(&sig),
        "pattern": pattern_value(pat),
        "m": m,
        "cap": cap,
        "run": run.echo(),
    });
    Ok(ExperimentReport::new("zero-one", config, rows, "freq"))
}

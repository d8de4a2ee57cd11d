//! Sparse sampling from the product measure `Pₙ` and exact log-probabilities.
//!
//! Each `kᵢ`-subset of `0..n` carries `Rᵢ` independently with probability
//! `γᵢ·n^{−αᵢ}`. A sample draws the edge count from the binomial law and then
//! a uniform set of that many distinct `kᵢ`-subsets, which has the same law
//! as one coin per subset.

use std::sync::Arc;

use num_traits::Float;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::dimension::for_each_combination;
use crate::structure::{FiniteStructure, Relation, Signature, Vertex};
use crate::{Error, Result};

/// One draw from `Pₙ`: universe size, signature and the `(seed, trial)` stream.
#[derive(Clone, Debug)]
pub struct SampleConfig {
    pub n: usize,
    pub sig: Arc<Signature>,
    pub seed: u64,
    pub trial_index: u64,
}

impl SampleConfig {
    pub fn new(n: usize, sig: Arc<Signature>, seed: u64, trial_index: u64) -> Result<Self> {
        let cfg = Self {
            n,
            sig,
            seed,
            trial_index,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("universe size must be at least 1".into()));
        }
        if self.n >= 2 {
            for rel in self.sig.relations() {
                let p = edge_probability(rel, self.n);
                if !(0.0..1.0).contains(&p) {
                    return Err(Error::Config(format!(
                        "relation {}: edge probability {p} outside [0, 1) at n = {}",
                        rel.name, self.n
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `γ·n^{−α}`.
pub fn edge_probability(rel: &Relation, n: usize) -> f64 {
    rel.gamma * (n as f64).powf(-rel.alpha.value())
}

/// `C(n, k)`, or `None` past `u128`.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc·(n−i) is divisible by (i+1) after the multiplication.
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// SplitMix64 finaliser of `seed` and `salt`; distinct salts give unrelated seeds.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The generator for trial `trial_index`: ChaCha8 keyed by `seed`, one stream
/// per trial.
pub fn trial_rng(seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial_index);
    rng
}

pub fn sample(cfg: &SampleConfig) -> Result<FiniteStructure> {
    cfg.validate()?;
    let mut rng = trial_rng(cfg.seed, cfg.trial_index);
    sample_with(&mut rng, cfg.n, cfg.sig.clone())
}

/// Draws from `Pₙ` using `rng`.
pub fn sample_with<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    sig: Arc<Signature>,
) -> Result<FiniteStructure> {
    if n == 0 {
        return Err(Error::Config("universe size must be at least 1".into()));
    }
    let mut flat = Vec::with_capacity(sig.len());
    for rel in sig.relations() {
        flat.push(sample_relation(rng, n, rel)?);
    }
    Ok(FiniteStructure::from_sorted_flat(sig, n, flat))
}

fn sample_relation<R: Rng + ?Sized>(rng: &mut R, n: usize, rel: &Relation) -> Result<Vec<Vertex>> {
    let k = rel.arity;
    let total = binomial(n as u64, k as u64)
        .filter(|&t| t <= u64::MAX as u128)
        .ok_or_else(|| Error::Config(format!("C({n}, {k}) exceeds 64 bits")))?
        as u64;
    let p = if n == 1 {
        rel.gamma
    } else {
        edge_probability(rel, n)
    };
    if total == 0 || p <= 0.0 {
        return Ok(Vec::new());
    }
    let count = Binomial::new(total, p.min(1.0))
        .map_err(|e| Error::Config(format!("relation {}: {e}", rel.name)))?
        .sample(rng) as usize;
    if count == 0 {
        return Ok(Vec::new());
    }
    if count as u64 > total / 2 {
        return Ok(dense_choice(rng, n, k, total as usize, count));
    }
    let mut buf: Vec<Vertex> = Vec::with_capacity(k);
    let width = (n as u128).checked_pow(k as u32);
    let flat = match width {
        Some(w) if w <= u32::MAX as u128 => {
            let keys = distinct_draws(
                count,
                || {
                    draw_subset(rng, n, &mut buf, k);
                    buf.iter().fold(0u32, |acc, &v| acc * n as u32 + v)
                },
                radsort::sort,
            );
            decode(&keys, n, k)
        }
        Some(w) if w <= u64::MAX as u128 => {
            let keys = distinct_draws(
                count,
                || {
                    draw_subset(rng, n, &mut buf, k);
                    buf.iter().fold(0u64, |acc, &v| acc * n as u64 + v as u64)
                },
                radsort::sort,
            );
            decode(&keys, n, k)
        }
        Some(_) => {
            let keys = distinct_draws(
                count,
                || {
                    draw_subset(rng, n, &mut buf, k);
                    buf.iter()
                        .fold(0u128, |acc, &v| acc * n as u128 + v as u128)
                },
                radsort::sort,
            );
            decode(&keys, n, k)
        }
        None => distinct_draws(
            count,
            || {
                draw_subset(rng, n, &mut buf, k);
                buf.clone()
            },
            <[Vec<Vertex>]>::sort_unstable,
        )
        .concat(),
    };
    Ok(flat)
}

/// Base-`n` digits of each key, most significant first.
fn decode<K>(keys: &[K], n: usize, k: usize) -> Vec<Vertex>
where
    K: Copy + From<u32> + TryInto<u32> + std::ops::Rem<Output = K> + std::ops::Div<Output = K>,
{
    let base = K::from(n as u32);
    let mut flat = vec![0 as Vertex; keys.len() * k];
    for (chunk, &key) in flat.chunks_exact_mut(k).zip(keys) {
        let mut key = key;
        for d in chunk.iter_mut().rev() {
            *d = (key % base).try_into().ok().expect("digit below n");
            key = key / base;
        }
    }
    flat
}

/// A uniformly random `k`-subset into `buf`, sorted, by rejection on `k`-tuples.
fn draw_subset<R: Rng + ?Sized>(rng: &mut R, n: usize, buf: &mut Vec<Vertex>, k: usize) {
    loop {
        buf.clear();
        buf.extend((0..k).map(|_| rng.random_range(0..n as Vertex)));
        buf.sort_unstable();
        if buf.windows(2).all(|w| w[0] < w[1]) {
            return;
        }
    }
}

/// Sorted set of `count` distinct values; redraws only the shortfall.
fn distinct_draws<K: Ord + Clone>(
    count: usize,
    mut draw: impl FnMut() -> K,
    sort: impl Fn(&mut [K]),
) -> Vec<K> {
    let mut keys: Vec<K> = (0..count).map(|_| draw()).collect();
    sort(&mut keys);
    keys.dedup();
    while keys.len() < count {
        let mut extra: Vec<K> = (0..count - keys.len()).map(|_| draw()).collect();
        extra.sort_unstable();
        let mut merged = Vec::with_capacity(count);
        let mut old = std::mem::take(&mut keys).into_iter().peekable();
        for k in extra {
            while let Some(o) = old.next_if(|o| *o < k) {
                merged.push(o);
            }
            if merged.last() != Some(&k) && old.peek() != Some(&k) {
                merged.push(k);
            }
        }
        merged.extend(old);
        keys = merged;
    }
    keys
}

/// `count` of the `total` subsets, chosen uniformly by index, in lexicographic order.
fn dense_choice<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    k: usize,
    total: usize,
    count: usize,
) -> Vec<Vertex> {
    let mut picked = vec![false; total];
    for i in index::sample(rng, total, count) {
        picked[i] = true;
    }
    let mut flat = Vec::with_capacity(count * k);
    let mut buf = Vec::new();
    let mut i = 0;
    for_each_combination(n, k, &mut buf, &mut |c| {
        if picked[i] {
            flat.extend(c.iter().map(|&v| v as Vertex));
        }
        i += 1;
    });
    flat
}

/// `ln Pₙ(N)` with `n = n_param`; `−∞` for outcomes of probability zero.
pub fn log_prob<T: Float>(structure: &FiniteStructure, n_param: usize) -> Result<T> {
    if structure.n() != n_param {
        return Err(Error::Config(format!(
            "structure has {} vertices, measure is on {n_param}",
            structure.n()
        )));
    }
    let cast = |x: f64| T::from(x).expect("finite f64 converts to any Float");
    let n = cast(n_param as f64);
    let mut total = T::zero();
    for (r, rel) in structure.sig().relations().iter().enumerate() {
        let all = binomial(n_param as u64, rel.arity as u64)
            .ok_or_else(|| Error::Config(format!("C({n_param}, {}) overflows", rel.arity)))?;
        let present = structure.edge_count(r) as u128;
        let absent = all - present;
        let p = if n_param == 1 {
            cast(rel.gamma)
        } else {
            cast(rel.gamma) * n.powf(-cast(rel.alpha.value()))
        };
        if present > 0 {
            total = total + cast(present as f64) * p.ln();
        }
        if absent > 0 {
            total = total + cast(absent as f64) * (-p).ln_1p();
        }
    }
    Ok(total)
}

mod common;

use std::collections::HashMap;
use std::sync::Arc;

use common::*;
use proptest::prelude::*;
use rslab::sampler::{edge_probability, log_prob, sample, sample_with, trial_rng, SampleConfig};
use rslab::{FiniteStructure, Relation, Signature, Vertex, Weight};

/// Every structure on `n` vertices over `sig`, by choosing each possible
/// hyperedge in or out.
fn all_structures(sig: &Arc<Signature>, n: usize) -> Vec<FiniteStructure> {
    let slots: Vec<(usize, Vec<Vertex>)> = (0..sig.len())
        .flat_map(|r| {
            subsets(&(0..n as Vertex).collect::<Vec<_>>())
                .into_iter()
                .filter(move |s| s.len() == sig.relation(r).arity)
                .map(move |s| (r, s))
        })
        .collect();
    assert!(slots.len() <= 16);
    (0u32..1 << slots.len())
        .map(|mask| {
            let mut edges = vec![Vec::new(); sig.len()];
            for (i, (r, s)) in slots.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    edges[*r].push(s.clone());
                }
            }
            FiniteStructure::from_edges(sig.clone(), n, edges).unwrap()
        })
        .collect()
}

/// `ln Pₙ(N)` from the edge probabilities, one factor per possible hyperedge.
fn log_prob_oracle(m: &FiniteStructure) -> f64 {
    let n = m.n() as f64;
    (0..m.relation_count())
        .map(|r| {
            let rel = m.sig().relation(r);
            let p = rel.gamma * n.powf(-rel.alpha.value());
            let all = subsets(&universe(m))
                .into_iter()
                .filter(|s| s.len() == rel.arity)
                .count();
            let e = m.edge_count(r);
            e as f64 * p.ln() + (all - e) as f64 * (1.0 - p).ln()
        })
        .sum()
}

fn gamma_sig(alpha: &str, gamma: f64) -> Arc<Signature> {
    let rel = Relation::new("R", 2, Weight::parse_decimal(alpha).unwrap(), gamma);
    Arc::new(Signature::new(vec![rel], true).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn probabilities_sum_to_one(n in 2usize..=4, a in 0..ALPHAS.len(), b in 0..ALPHAS.len(), mixed in any::<bool>()) {
        let sig = if mixed { mixed_sig(ALPHAS[a], ALPHAS[b]) } else { graph_sig(ALPHAS[a]) };
        let mut total = 0.0;
        for m in all_structures(&sig, n) {
            let lp: f64 = log_prob(&m, n).unwrap();
            prop_assert!((lp - log_prob_oracle(&m)).abs() < 1e-12);
            total += lp.exp();
        }
        prop_assert!((total - 1.0).abs() < 1e-10, "total {}", total);
    }

    #[test]
    fn same_seed_and_trial_give_the_same_structure(seed in any::<u64>(), trial in any::<u64>(), n in 2usize..300) {
        let sig = mixed_sig("0.55", "0.85");
        let cfg = SampleConfig::new(n, sig, seed, trial).unwrap();
        let x = sample(&cfg).unwrap();
        prop_assert_eq!(&x, &sample(&cfg).unwrap());
        let mut rng = trial_rng(seed, trial);
        prop_assert_eq!(&x, &sample_with(&mut rng, n, cfg.sig.clone()).unwrap());
    }
}

#[test]
fn small_structures_appear_at_their_probabilities() {
    let sig = graph_sig("0.55");
    let trials = 10_000u64;
    let mut seen: HashMap<String, u64> = HashMap::new();
    for t in 0..trials {
        let m = sample(&SampleConfig::new(3, sig.clone(), 17, t).unwrap()).unwrap();
        *seen.entry(m.to_json()).or_default() += 1;
    }
    for m in all_structures(&sig, 3) {
        let p = log_prob_oracle(&m).exp();
        let got = *seen.get(&m.to_json()).unwrap_or(&0) as f64;
        let sd = (trials as f64 * p * (1.0 - p)).sqrt();
        assert!(
            (got - trials as f64 * p).abs() < 4.0 * sd,
            "{} seen {got}, expected {}",
            m.to_json(),
            trials as f64 * p
        );
    }
}

#[test]
fn edge_counts_have_binomial_moments() {
    let sig = mixed_sig("0.5", "0.85");
    let n = 120;
    let trials = 10_000u64;
    let mut counts = [Vec::new(), Vec::new()];
    // Indicators of one fixed pair and one fixed triple.
    let mut fixed = [0u64; 2];
    for t in 0..trials {
        let m = sample(&SampleConfig::new(n, sig.clone(), 5, t).unwrap()).unwrap();
        for (r, c) in counts.iter_mut().enumerate() {
            c.push(m.edge_count(r) as f64);
        }
        fixed[0] += m.has_edge(0, &[17, 90]) as u64;
        fixed[1] += m.has_edge(1, &[0, 60, 119]) as u64;
    }
    for r in 0..2 {
        let rel = sig.relation(r);
        let total = subsets_count(n, rel.arity);
        let p = edge_probability(rel, n);
        let (mean, var) = (total * p, total * p * (1.0 - p));
        let got_mean = counts[r].iter().sum::<f64>() / trials as f64;
        let got_var = counts[r]
            .iter()
            .map(|x| (x - got_mean).powi(2))
            .sum::<f64>()
            / (trials - 1) as f64;
        assert!(
            (got_mean - mean).abs() < 4.0 * (var / trials as f64).sqrt(),
            "relation {r}: mean {got_mean} vs {mean}"
        );
        assert!(
            (got_var / var - 1.0).abs() < 0.2,
            "relation {r}: variance {got_var} vs {var}"
        );

        let hits = fixed[r] as f64;
        let sd = (trials as f64 * p * (1.0 - p)).sqrt();
        assert!(
            (hits - trials as f64 * p).abs() < 4.0 * sd,
            "relation {r}: fixed edge {hits} times"
        );
    }
    // Relations are drawn independently: the counts are uncorrelated.
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (m0, m1) = (mean(&counts[0]), mean(&counts[1]));
    let cov: f64 = counts[0]
        .iter()
        .zip(&counts[1])
        .map(|(x, y)| (x - m0) * (y - m1))
        .sum::<f64>()
        / trials as f64;
    let sd =
        |v: &[f64], m: f64| (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / trials as f64).sqrt();
    let corr = cov / (sd(&counts[0], m0) * sd(&counts[1], m1));
    // Standard error of a null correlation is 1/√trials = 0.01.
    assert!(corr.abs() < 0.04, "correlation {corr}");
}

fn subsets_count(n: usize, k: usize) -> f64 {
    (0..k).map(|i| (n - i) as f64).product::<f64>() / (1..=k).map(|i| i as f64).product::<f64>()
}

#[test]
fn gamma_scales_the_edge_probability() {
    let sig = gamma_sig("0.5", 0.5);
    assert!((edge_probability(sig.relation(0), 100) - 0.05).abs() < 1e-15);
    let m = sample(&SampleConfig::new(100, sig, 1, 0).unwrap()).unwrap();
    assert!(m
        .edges(0)
        .all(|e| e.len() == 2 && e[0] < e[1] && (e[1] as usize) < 100));
}

#[test]
fn out_of_range_parameters_are_refused() {
    let rel = || Relation::new("R", 2, Weight::parse_decimal("0.5").unwrap(), 2.0);
    assert!(Signature::new(vec![rel()], true).is_err());
    assert!(SampleConfig::new(0, graph_sig("0.5"), 0, 0).is_err());
}

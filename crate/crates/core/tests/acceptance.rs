//! End-to-end acceptance run. Criteria execute one after another (the
//! experiments parallelise internally) and each prints a single line.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rslab::amalgam::{build_generic, check_full_amalgamation, GenericConfig};
use rslab::extcalc::closure;
use rslab::harness::{ext_stats, rare_substructure, zero_one, ExtStatsConfig, RunConfig};
use rslab::sampler::log_prob;
use rslab::{DimForm, ExtensionPattern, FiniteStructure, Sign, Vertex};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn grid(lo: usize, hi: usize) -> Vec<usize> {
    std::iter::successors(Some(lo), |&n| Some(n * 2))
        .take_while(|&n| n <= hi)
        .collect()
}

fn extension_scaling() -> Verdict {
    let pat = ExtensionPattern::point_to_edge(graph_sig("0.55")).unwrap();
    let run = RunConfig::new(grid(256, 4096), 20, 1);
    let rep = ext_stats(&pat, &run, &ExtStatsConfig::default()).unwrap();
    let slope = rep.slope().unwrap();
    verdict(
        (0.35..=0.55).contains(&slope),
        format!("slope of ln mean N = {slope:.4}, want [0.35, 0.55]"),
    )
}

/// Trials per grid point for the rare-copy frequency. Sized so that sampling
/// noise leaves at most one inversion along the grid with high probability.
const RARE_TRIALS: usize = 15_000;

fn rare_substructure_frequency() -> Verdict {
    let k4 = FiniteStructure::graph(
        graph_sig("0.7"),
        4,
        &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
    )
    .unwrap();
    let run = RunConfig::new(grid(256, 8192), RARE_TRIALS, 2);
    let rep = rare_substructure(&k4, &run).unwrap();
    let slope = rep.slope().unwrap_or(f64::NAN);
    let inv = rep.freq_increases();
    let freqs: Vec<String> = rep.rows.iter().map(|r| format!("{:.4}", r.freq)).collect();
    verdict(
        inv <= 1 && (-0.35..=-0.05).contains(&slope),
        format!(
            "freq [{}], {inv} increases (≤ 1), slope {slope:.4}, want [-0.35, -0.05]",
            freqs.join(", ")
        ),
    )
}

fn normalization() -> Verdict {
    let sig = graph_sig("0.55");
    let pairs = [(0, 1), (0, 2), (1, 2)];
    let total: f64 = (0u32..8)
        .map(|mask| {
            let e: Vec<_> = pairs
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &p)| p)
                .collect();
            let m = FiniteStructure::graph(sig.clone(), 3, &e).unwrap();
            log_prob::<f64>(&m, 3).unwrap().exp()
        })
        .sum();
    let err = (total - 1.0).abs();
    verdict(
        err < 1e-10,
        format!("Σ P = {total:.15}, |error| = {err:.2e}"),
    )
}

fn closure_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut cases, mut nontrivial, mut bad) = (0usize, 0usize, Vec::new());
    for s in 0..200 {
        let n = rng.random_range(1..=12);
        let a = ALPHAS[rng.random_range(0..ALPHAS.len())];
        let sig = if s % 2 == 0 {
            graph_sig(a)
        } else {
            mixed_sig(a, ALPHAS[rng.random_range(0..ALPHAS.len())])
        };
        let p = [0.2, 0.35, 0.5][rng.random_range(0..3)];
        let m = random_structure(&mut rng, &sig, n, p);
        for set in subsets_below(&universe(&m), 4) {
            for bound in 0..=3 {
                let got = closure(&m, &set, bound);
                let want = common::closure(&m, &set, bound);
                cases += 1;
                nontrivial += (want.len() > set.len()) as usize;
                if got != want && bad.len() < 3 {
                    bad.push(format!(
                        "structure {s} A={set:?} m={bound}: {got:?} vs {want:?}"
                    ));
                }
            }
        }
    }
    verdict(
        bad.is_empty(),
        format!("{cases} (A, m) cases, {nontrivial} with cl ≠ A, mismatches: {bad:?}"),
    )
}

fn law_fuzzing() -> Verdict {
    const INSTANCES: usize = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut summary = Vec::new();
    let mut pass = true;
    type Law<'a> = (&'a str, &'a dyn Fn(&mut ChaCha8Rng) -> LawResult);
    let laws: [Law; 6] = [
        ("≤ₛ transitive", &|r| {
            let m = law_structure(r);
            let (a, b, c) = nested(r, m.n());
            law_strong_transitive(&m, &a, &b, &c)
        }),
        ("≤ᵢ transitive", &|r| {
            let m = law_structure(r);
            let (a, b, c) = nested(r, m.n());
            law_intrinsic_transitive(&m, &a, &b, &c)
        }),
        ("A4", &|r| {
            let m = law_structure(r);
            let (_, b, c) = nested(r, m.n());
            let other = random_subset(r, m.n(), 0.6);
            law_a4(&m, &b, &c, &other)
        }),
        ("closure restriction", &|r| {
            let m = law_structure(r);
            let (a, b, _) = nested(r, m.n());
            let k = r.random_range(1..=4);
            law_closure_restricts(&m, &a, &b, k)
        }),
        ("dichotomy", &|r| {
            let m = law_structure(r);
            let (a, _, c) = nested(r, m.n());
            law_dichotomy(&m, &a, &c)
        }),
        ("disjoint families", &|r| {
            let m = law_structure(r);
            law_disjoint_families(r, &m)
        }),
    ];
    for (name, law) in laws {
        let (mut checked, mut failures, mut first) = (0, 0, None);
        for _ in 0..INSTANCES {
            match law(&mut rng) {
                Ok(true) => checked += 1,
                Ok(false) => {}
                Err(e) => {
                    failures += 1;
                    first.get_or_insert(e);
                }
            }
        }
        pass &= failures == 0;
        summary.push(match first {
            None => format!("{name}: 0/{INSTANCES} ({checked} non-vacuous)"),
            Some(e) => format!("{name}: {failures}/{INSTANCES} e.g. {e}"),
        });
    }
    verdict(pass, summary.join("; "))
}

fn full_amalgamation() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut failures = 0;
    for _ in 0..1000 {
        let (b, c, base) = amalgamation_triple(&mut rng);
        if !check_full_amalgamation(&b, &base, &c, &base).unwrap() {
            failures += 1;
        }
    }
    verdict(
        failures == 0,
        format!("{failures} failures in 1000 triples"),
    )
}

/// Minimum of `10·|S| − 7·e(S)` (that is `10·δ(S)` at α = 0.7) over vertex
/// sets of size at most `k`, with the set attaining it.
fn min_scaled_delta(g: &FiniteStructure, k: usize) -> (i64, Vec<Vertex>) {
    fn rec(
        g: &FiniteStructure,
        k: usize,
        from: Vertex,
        cur: &mut Vec<Vertex>,
        edges: i64,
        best: &mut (i64, Vec<Vertex>),
    ) {
        let val = 10 * cur.len() as i64 - 7 * edges;
        if val < best.0 {
            *best = (val, cur.clone());
        }
        if cur.len() == k {
            return;
        }
        for v in from..g.n() as Vertex {
            let added = cur.iter().filter(|&&u| g.has_edge(0, &[u, v])).count() as i64;
            cur.push(v);
            rec(g, k, v + 1, cur, edges + added, best);
            cur.pop();
        }
    }
    let mut best = (0, Vec::new());
    rec(g, k, 0, &mut Vec::new(), 0, &mut best);
    best
}

fn generic_builder() -> Verdict {
    let sig = graph_sig("0.7");
    let chain = build_generic(&sig, &GenericConfig::new(48, 2, 7)).unwrap();
    let valid = chain.validate();
    let last = chain.last();
    let mut strong_steps = true;
    for w in chain.stages.windows(2) {
        let old: Vec<Vertex> = (0..w[0].n() as Vertex).collect();
        strong_steps &= rslab::extcalc::is_strong_in(&w[1], &old, &universe(&w[1])).unwrap();
    }
    let (low, at) = min_scaled_delta(last, 6);
    let served = chain.served_types();
    let all_served = served == (0..chain.types.len()).collect::<Vec<_>>();
    verdict(
        valid.is_ok() && strong_steps && low >= 0 && all_served,
        format!(
            "{} stages, final size {}, validate {:?}, min 10·δ over ≤ 6-sets {low} at {at:?}, served {}/{} types",
            chain.stages.len(),
            last.n(),
            valid.map_err(|e| e.to_string()),
            served.len(),
            chain.types.len()
        ),
    )
}

fn semigenericity_trend() -> Verdict {
    let pat = ExtensionPattern::point_to_edge(graph_sig("0.55")).unwrap();
    let run = RunConfig::new(grid(128, 2048), 50, 8);
    let rep = zero_one(&pat, 2, &run, 200).unwrap();
    let lo = rep.row(128).unwrap().freq;
    let hi = rep.row(2048).unwrap().freq;
    let freqs: Vec<String> = rep.rows.iter().map(|r| format!("{:.2}", r.freq)).collect();
    verdict(
        hi > lo && hi >= 0.8,
        format!(
            "freq [{}]; want freq(2048) > freq(128) and ≥ 0.8",
            freqs.join(", ")
        ),
    )
}

fn dimform_soundness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut mismatches, mut zero_errors, mut exact_zeros) = (0, 0, 0);
    for _ in 0..10_000 {
        let alphas: Vec<&str> = (0..3)
            .map(|_| FORM_ALPHAS[rng.random_range(0..FORM_ALPHAS.len())])
            .collect();
        let indep = rng.random_bool(0.5);
        let sig = weights_sig(&alphas, indep);
        // A quarter of the coefficients are zero so that the zero form and
        // partial cancellations both occur.
        let mut coef = || {
            if rng.random_bool(0.25) {
                0
            } else {
                rng.random_range(-50..=50)
            }
        };
        let c0 = coef();
        let cs: Vec<i64> = (0..3).map(|_| coef()).collect();
        let got = sig.sign_of(c0, &cs);
        if got != expected_sign(&alphas, indep, c0, &cs) {
            mismatches += 1;
        }
        let all_zero = c0 == 0 && cs.iter().all(|&c| c == 0);
        exact_zeros += (sign_256(&alphas, c0, &cs) == Sign::Zero) as usize;
        let independent = weights_sig(&alphas, true);
        if (independent.sign_of(c0, &cs) == Sign::Zero) != all_zero
            || DimForm::new(c0, &cs).is_zero() != all_zero
        {
            zero_errors += 1;
        }
    }
    verdict(
        mismatches == 0 && zero_errors == 0,
        format!("{mismatches} sign mismatches, {zero_errors} zero-test errors in 10000 forms ({exact_zeros} evaluate to 0)"),
    )
}

fn main() -> ExitCode {
    // Name, check, wall-clock limit in seconds.
    type Criterion = (&'static str, fn() -> Verdict, Option<f64>);
    let criteria: [Criterion; 9] = [
        ("extension-count scaling", extension_scaling, Some(300.0)),
        (
            "rare substructure",
            rare_substructure_frequency,
            Some(600.0),
        ),
        ("normalization", normalization, None),
        ("closure oracle equivalence", closure_equivalence, None),
        ("law fuzzing", law_fuzzing, None),
        ("full amalgamation", full_amalgamation, None),
        ("generic builder", generic_builder, None),
        ("semigenericity trend", semigenericity_trend, Some(900.0)),
        ("dimension form soundness", dimform_soundness, None),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .and_then(|s| s.parse().ok());
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.into_iter().enumerate() {
        if only.is_some_and(|k| k != i + 1) {
            continue;
        }
        let start = Instant::now();
        let v = run();
        let secs = start.elapsed().as_secs_f64();
        let in_time = limit.is_none_or(|l| secs < l);
        let pass = v.pass && in_time;
        failed += !pass as usize;
        let budget = limit
            .map(|l| format!(" (limit {l:.0}s)"))
            .unwrap_or_default();
        println!(
            "criterion {} {} {name}: {} [{secs:.1}s{budget}]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}

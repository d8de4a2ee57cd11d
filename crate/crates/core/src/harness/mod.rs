//! Seeded Monte Carlo experiments and their reports.
//!
//! Every trial `t` at universe size `n` draws from its own generator,
//! `trial_rng(derive_seed(seed, n), t)`, so results do not depend on the
//! number of worker threads or on scheduling. Aggregation folds trials in
//! index order.

mod experiments;
mod qe;

use std::fmt::Write as _;
use std::time::Instant;

use num_traits::Float;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::sampler::{derive_seed, trial_rng};
use crate::{Error, Result};

pub use experiments::{empty_closure, ext_stats, rare_substructure, zero_one, ExtStatsConfig};
pub use qe::{formula_profile, qe_probe, AtomicType, FormulaProfile, QeConfig};

/// Grid, trial count and scheduling shared by all experiments.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
    /// Record wall-clock seconds per row. Off makes reports byte-reproducible.
    pub timings: bool,
}

impl RunConfig {
    pub fn new(n_grid: Vec<usize>, trials: usize, seed: u64) -> Self {
        Self {
            n_grid,
            trials,
            seed,
            threads: None,
            timings: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return Err(Error::Config("empty n-grid".into()));
        }
        if self.n_grid.contains(&0) {
            return Err(Error::Config("n-grid entries must be positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("at least one trial is required".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("thread count must be positive".into()));
        }
        Ok(())
    }

    fn echo(&self) -> Value {
        serde_json::json!({"n_grid": self.n_grid, "trials": self.trials, "seed": self.seed})
    }

    /// Runs `trial(n, rng)` for every trial of every grid point.
    fn rows<F>(&self, trial: F) -> Result<Vec<Row>>
    where
        F: Fn(usize, &mut ChaCha8Rng) -> Result<Outcome> + Sync,
    {
        self.validate()?;
        let run = || -> Result<Vec<Row>> {
            let mut rows = Vec::with_capacity(self.n_grid.len());
            for &n in &self.n_grid {
                let started = Instant::now();
                let stream = derive_seed(self.seed, n as u64);
                let outcomes = (0..self.trials as u64)
                    .into_par_iter()
                    .map(|t| trial(n, &mut trial_rng(stream, t)))
                    .collect::<Result<Vec<Outcome>>>()?;
                let seconds = if self.timings {
                    started.elapsed().as_secs_f64()
                } else {
                    0.0
                };
                rows.push(Row::aggregate(n, &outcomes, seconds));
            }
            Ok(rows)
        };
        match self.threads {
            None => run(),
            Some(k) => rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?
                .install(run),
        }
    }
}

/// Result of a single trial: the measured statistic and the event indicator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Outcome {
    pub value: f64,
    pub event: bool,
    pub capped: bool,
    /// Set when two independent checks of the same quantity disagree.
    pub disagreement: bool,
}

impl Outcome {
    pub fn new(value: f64, event: bool) -> Self {
        Self {
            value,
            event,
            capped: false,
            disagreement: false,
        }
    }
}

/// Per-grid-point statistics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub n: usize,
    pub trials: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Sample standard deviation (zero for a single trial).
    pub stddev: f64,
    /// Fraction of trials in which the event held.
    pub freq: f64,
    pub seconds: f64,
    pub capped: bool,
    pub disagreements: usize,
}

impl Row {
    pub fn aggregate(n: usize, outcomes: &[Outcome], seconds: f64) -> Self {
        let k = outcomes.len();
        let values: Vec<f64> = outcomes.iter().map(|o| o.value).collect();
        let (mean, stddev) = mean_stddev(&values);
        Self {
            n,
            trials: k,
            mean,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            stddev,
            freq: if k == 0 {
                0.0
            } else {
                outcomes.iter().filter(|o| o.event).count() as f64 / k as f64
            },
            seconds,
            capped: outcomes.iter().any(|o| o.capped),
            disagreements: outcomes.iter().filter(|o| o.disagreement).count(),
        }
    }
}

/// Mean and sample standard deviation.
pub fn mean_stddev<T: Float>(xs: &[T]) -> (T, T) {
    if xs.is_empty() {
        return (T::nan(), T::nan());
    }
    let k = T::from(xs.len()).expect("length fits a float");
    let mean = xs.iter().fold(T::zero(), |a, &x| a + x) / k;
    if xs.len() == 1 {
        return (mean, T::zero());
    }
    let ss = xs
        .iter()
        .fold(T::zero(), |a, &x| a + (x - mean) * (x - mean));
    (mean, (ss / (k - T::one())).sqrt())
}

/// Ordinary least squares fit of `y` against `x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square of the residuals.
    pub residual: f64,
    pub points: usize,
}

/// Least squares line through `points`; `None` with fewer than two distinct `x`.
pub fn fit_line<T: Float>(points: &[(T, T)]) -> Option<(T, T, T)> {
    if points.len() < 2 {
        return None;
    }
    let k = T::from(points.len())?;
    let mx = points.iter().fold(T::zero(), |a, p| a + p.0) / k;
    let my = points.iter().fold(T::zero(), |a, p| a + p.1) / k;
    let sxx = points
        .iter()
        .fold(T::zero(), |a, p| a + (p.0 - mx) * (p.0 - mx));
    if sxx == T::zero() {
        return None;
    }
    let sxy = points
        .iter()
        .fold(T::zero(), |a, p| a + (p.0 - mx) * (p.1 - my));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse = points.iter().fold(T::zero(), |a, p| {
        let r = p.1 - (intercept + slope * p.0);
        a + r * r
    });
    Some((slope, intercept, (sse / k).sqrt()))
}

/// Fit of `ln y` against `ln n` over the rows with `y > 0`.
pub fn loglog_fit(rows: &[Row], y: impl Fn(&Row) -> f64) -> Option<SlopeFit> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| y(r) > 0.0)
        .map(|r| ((r.n as f64).ln(), y(r).ln()))
        .collect();
    fit_line(&pts).map(|(slope, intercept, residual)| SlopeFit {
        slope,
        intercept,
        residual,
        points: pts.len(),
    })
}

/// Outcome of one experiment over a grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub config: Value,
    /// What the `n` column holds: universe size, or the closure bound for probes.
    pub grid_label: String,
    pub rows: Vec<Row>,
    /// Which column the fit uses: `mean` or `freq`.
    pub fit_target: String,
    pub fit: Option<SlopeFit>,
    pub capped: bool,
    pub inconclusive: bool,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    fn new(experiment: &str, config: Value, rows: Vec<Row>, fit_target: &str) -> Self {
        let fit = match fit_target {
            "freq" => loglog_fit(&rows, |r| r.freq),
            _ => loglog_fit(&rows, |r| r.mean),
        };
        let capped = rows.iter().any(|r| r.capped);
        let mut notes = Vec::new();
        if capped {
            notes.push("base embeddings were subsampled on capped rows".to_string());
        }
        let disagreements: usize = rows.iter().map(|r| r.disagreements).sum();
        if disagreements > 0 {
            notes.push(format!(
                "independent checks disagreed in {disagreements} trials"
            ));
        }
        Self {
            experiment: experiment.into(),
            config,
            grid_label: "n".into(),
            rows,
            fit_target: fit_target.into(),
            fit,
            capped,
            inconclusive: false,
            notes,
        }
    }

    pub fn slope(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }

    pub fn row(&self, n: usize) -> Option<&Row> {
        self.rows.iter().find(|r| r.n == n)
    }

    /// Copy with every `seconds` field zeroed.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        r.rows.iter_mut().for_each(|row| row.seconds = 0.0);
        r
    }

    /// Number of adjacent grid pairs where `freq` increases.
    pub fn freq_increases(&self) -> usize {
        self.rows
            .windows(2)
            .filter(|w| w[1].freq > w[0].freq)
            .count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// `n,trials,mean,min,max,stddev,freq,seconds`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,trials,mean,min,max,stddev,freq,seconds\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.n, r.trials, r.mean, r.min, r.max, r.stddev, r.freq, r.seconds
            )
            .expect("writing to a String cannot fail");
        }
        out
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use rslab::amalgam::{build_generic, GenericConfig};
use rslab::dimension::{delta, delta_rel};
use rslab::extcalc::{closure, ClosureIndex};
use rslab::harness::{
    empty_closure, ext_stats, qe_probe, rare_substructure, zero_one, ExperimentReport,
    ExtStatsConfig, QeConfig, RunConfig,
};
use rslab::sampler::{derive_seed, sample, SampleConfig};
use rslab::{ExtensionPattern, FiniteStructure, Signature, Vertex};
use serde_json::json;

/// Largest `|B − A|` the command line accepts; every extension test walks
/// all `2^v` intermediate sets.
const CLI_MAX_EXTENSION: usize = 16;

#[derive(Parser)]
#[command(
    name = "rslab",
    version,
    about = "Sparse random structures, dimension calculus and generic models built by amalgamation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one structure from P_n and print it as JSON.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
    /// δ of a structure, or δ(B/A) when --base is given.
    Delta {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        structure: PathBuf,
        #[arg(long, value_delimiter = ',')]
        base: Option<Vec<Vertex>>,
    },
    /// cl^m(A) inside a structure.
    Closure {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        structure: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "")]
        set: Vec<String>,
        #[arg(long)]
        bound: usize,
    },
    /// Extension counts N(f) against n^δ(B/A).
    ExtStats {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: Grid,
        /// Pattern JSON; defaults to point→edge over the first binary relation.
        #[arg(long)]
        pattern: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        cap: usize,
        #[arg(long, default_value_t = 10.0)]
        c1: f64,
    },
    /// Frequency of a copy of a structure with negative δ.
    Rare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: Grid,
        #[arg(long, conflicts_with = "clique")]
        structure: Option<PathBuf>,
        /// Use the complete graph K_k on the first binary relation.
        #[arg(long)]
        clique: Option<usize>,
    },
    /// Size of cl^m(∅) in random structures.
    EmptyClosure {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: Grid,
        #[arg(long)]
        m: usize,
    },
    /// Semigeneric witnesses for every copy of the pattern base.
    ZeroOne {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: Grid,
        #[arg(long)]
        pattern: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[arg(long, default_value_t = 200)]
        cap: usize,
    },
    /// Build a finite approximation of the generic model.
    GenericBuild {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        size: usize,
        #[arg(long, default_value_t = 2)]
        v_max: usize,
        #[arg(long, default_value_t = 1)]
        base_max: usize,
    },
    /// Agreement of formula profiles on tuples with isomorphic closures.
    QeProbe {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        ells: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        depth: usize,
        #[arg(long, default_value_t = 1)]
        tuple_len: usize,
        #[arg(long, default_value_t = 50)]
        samples: usize,
    },
}

#[derive(Args)]
struct Common {
    /// Signature JSON file, inline JSON, or a bare weight such as 0.7 for
    /// one binary relation `R`.
    #[arg(long, default_value = "0.7")]
    sig: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Grid {
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, value_delimiter = ',', default_value = "256,512,1024,2048")]
    n_grid: Vec<usize>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Exit with status 3 unless the fitted slope lies in lo:hi.
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    assert_slope: Option<(f64, f64)>,
    /// Zero the per-row wall-clock column so reports are byte-identical.
    #[arg(long)]
    no_timings: bool,
}

impl Grid {
    fn run(&self, seed: u64) -> RunConfig {
        RunConfig {
            threads: self.threads,
            timings: !self.no_timings,
            ..RunConfig::new(self.n_grid.clone(), self.trials, seed)
        }
    }
}

/// Failures that map to exit status 2.
#[derive(Debug)]
struct ConfigError(anyhow::Error);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config<T>(r: anyhow::Result<T>) -> anyhow::Result<T> {
    r.map_err(|e| ConfigError(e).into())
}

/// Library errors all stem from the inputs or the configuration.
fn lib<T>(r: rslab::Result<T>) -> anyhow::Result<T> {
    r.map_err(|e| ConfigError(e.into()).into())
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or("expected lo:hi")?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("lo: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("hi: {e}"))?;
    if lo > hi {
        return Err(format!("empty range {lo}:{hi}"));
    }
    Ok((lo, hi))
}

fn load_sig(arg: &str) -> anyhow::Result<Arc<Signature>> {
    let text = arg.trim();
    let sig = if text.starts_with('{') {
        Signature::from_json(text)?
    } else if Path::new(text).is_file() {
        let body = std::fs::read_to_string(text).with_context(|| format!("reading {text}"))?;
        Signature::from_json(&body)?
    } else {
        return Signature::graph(text).with_context(|| format!("signature {text:?}"));
    };
    Ok(Arc::new(sig))
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_structure(path: &Path, sig: &Arc<Signature>) -> anyhow::Result<FiniteStructure> {
    Ok(FiniteStructure::from_json(&read(path)?, sig.clone())?)
}

fn load_pattern(path: Option<&Path>, sig: &Arc<Signature>) -> anyhow::Result<ExtensionPattern> {
    let pat = match path {
        Some(p) => ExtensionPattern::from_json(&read(p)?, sig.clone())?,
        None => ExtensionPattern::point_to_edge(sig.clone())?,
    };
    if pat.v() > CLI_MAX_EXTENSION {
        bail!(
            "pattern adds {} vertices; the limit is {CLI_MAX_EXTENSION}",
            pat.v()
        );
    }
    Ok(pat)
}

fn binary_relation(sig: &Signature) -> anyhow::Result<usize> {
    (0..sig.len())
        .find(|&r| sig.relation(r).arity == 2)
        .ok_or_else(|| anyhow!("the signature has no binary relation"))
}

fn clique(sig: &Arc<Signature>, k: usize) -> anyhow::Result<FiniteStructure> {
    let r = binary_relation(sig)?;
    let mut edges = vec![Vec::new(); sig.len()];
    for i in 0..k as Vertex {
        for j in i + 1..k as Vertex {
            edges[r].push(vec![i, j]);
        }
    }
    Ok(FiniteStructure::from_edges(sig.clone(), k, edges)?)
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, format!("{text}\n"))
            .with_context(|| format!("writing {}", p.display())),
        None => {
            use std::io::Write;
            writeln!(std::io::stdout().lock(), "{text}").context("writing to stdout")
        }
    }
}

/// Writes the report and returns whether the slope assertion (if any) held.
fn finish(report: ExperimentReport, common: &Common, grid: &Grid) -> anyhow::Result<bool> {
    emit(common.out.as_deref(), &report.to_json())?;
    if let Some(csv) = &grid.csv {
        std::fs::write(csv, report.to_csv())
            .with_context(|| format!("writing {}", csv.display()))?;
    }
    let Some((lo, hi)) = grid.assert_slope else {
        return Ok(true);
    };
    match report.slope() {
        Some(s) if (lo..=hi).contains(&s) => {
            eprintln!("slope {s:.4} within [{lo}, {hi}]");
            Ok(true)
        }
        Some(s) => {
            eprintln!("slope {s:.4} outside [{lo}, {hi}]");
            Ok(false)
        }
        None => {
            eprintln!("no slope could be fitted");
            Ok(false)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Sample { common, n, trial } => {
            let sig = config(load_sig(&common.sig))?;
            let cfg = lib(SampleConfig::new(n, sig, common.seed, trial))?;
            let g = lib(sample(&cfg))?;
            emit(common.out.as_deref(), &g.to_json())?;
        }
        Command::Delta {
            common,
            structure,
            base,
        } => {
            let sig = config(load_sig(&common.sig))?;
            let m = config(load_structure(&structure, &sig))?;
            let d = match &base {
                None => delta(&m),
                Some(base) => {
                    if base.iter().any(|&v| v as usize >= m.n()) {
                        return config(Err(anyhow!("base vertex out of range")));
                    }
                    if m.n() - rslab::structure::vertex_set(base).len() > CLI_MAX_EXTENSION {
                        return config(Err(anyhow!(
                            "extension exceeds {CLI_MAX_EXTENSION} vertices"
                        )));
                    }
                    delta_rel(&m, base)
                }
            };
            let value = json!({
                "delta": d.to_json(&sig),
                "sign": format!("{:?}", sig.sign(&d)),
                "text": d.describe(&sig),
            });
            emit(common.out.as_deref(), &value.to_string())?;
        }
        Command::Closure {
            common,
            structure,
            set,
            bound,
        } => {
            let sig = config(load_sig(&common.sig))?;
            let m = config(load_structure(&structure, &sig))?;
            let a = config(
                set.iter()
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| {
                        s.trim()
                            .parse::<Vertex>()
                            .with_context(|| format!("vertex {s:?}"))
                    })
                    .collect::<anyhow::Result<Vec<_>>>(),
            )?;
            if a.iter().any(|&v| v as usize >= m.n()) {
                return config(Err(anyhow!("vertex out of range")));
            }
            let cl = if bound >= 3 {
                ClosureIndex::new(&m).closure(&a, bound)
            } else {
                closure(&m, &a, bound)
            };
            emit(
                common.out.as_deref(),
                &json!({ "set": a, "bound": bound, "closure": cl }).to_string(),
            )?;
        }
        Command::ExtStats {
            common,
            grid,
            pattern,
            cap,
            c1,
        } => {
            let sig = config(load_sig(&common.sig))?;
            let pat = config(load_pattern(pattern.as_deref(), &sig))?;
            let report = lib(ext_stats(
                &pat,
                &grid.run(common.seed),
                &ExtStatsConfig { cap, c1 },
            ))?;
            return finish(report, &common, &grid);
        }
        Command::Rare {
            common,
            grid,
            structure,
            clique: k,
        } => {
            let sig = config(load_sig(&common.sig))?;
            let b = config(match (structure, k) {
                (Some(p), _) => load_structure(&p, &sig),
                (None, Some(k)) => clique(&sig, k),
                (None, None) => Err(anyhow!("give --structure or --clique")),
            })?;
            let report = lib(rare_substructure(&b, &grid.run(common.seed)))?;
            return finish(report, &common, &grid);
        }
        Command::EmptyClosure { common, grid, m } => {
            let sig = config(load_sig(&common.sig))?;
            let report = lib(empty_closure(&sig, m, &grid.run(common.seed)))?;
            return finish(report, &common, &grid);
        }
        Command::ZeroOne {
            common,
            grid,
            pattern,
            m,
            cap,
        } => {
            let sig = config(load_sig(&common.sig))?;
            let pat = config(load_pattern(pattern.as_deref(), &sig))?;
            let report = lib(zero_one(&pat, m, &grid.run(common.seed), cap))?;
            return finish(report, &common, &grid);
        }
        Command::GenericBuild {
            common,
            size,
            v_max,
            base_max,
        } => {
            let sig = config(load_sig(&common.sig))?;
            if v_max > CLI_MAX_EXTENSION {
                return config(Err(anyhow!("v_max {v_max} exceeds {CLI_MAX_EXTENSION}")));
            }
            let cfg = GenericConfig {
                base_max,
                ..GenericConfig::new(size, v_max, common.seed)
            };
            let chain = lib(build_generic(&sig, &cfg))?;
            lib(chain.validate())?;
            emit(common.out.as_deref(), &chain.to_json())?;
        }
        Command::QeProbe {
            common,
            n,
            ells,
            depth,
            tuple_len,
            samples,
        } => {
            let sig = config(load_sig(&common.sig))?;
            let draw = |salt: u64| -> anyhow::Result<FiniteStructure> {
                let cfg = lib(SampleConfig::new(
                    n,
                    sig.clone(),
                    derive_seed(common.seed, salt),
                    0,
                ))?;
                lib(sample(&cfg))
            };
            let (g1, g2) = (draw(1)?, draw(2)?);
            let cfg = QeConfig {
                ells,
                depth,
                tuple_len,
                samples,
                seed: common.seed,
            };
            let report = lib(qe_probe(&g1, &g2, &cfg))?;
            emit(common.out.as_deref(), &report.to_json())?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<ConfigError>() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

//! Command-line front end: single-shot estimation, configured experiment
//! sweeps, the separation demonstration, and the exact oracle sweeps.
//!
//! Exit codes: 0 on success, 2 on a usage error (bad flags, malformed
//! config or dataset), 1 on a numeric or I/O failure at runtime. The worker
//! pool size comes from ROBUSTLAB_THREADS when set, otherwise `--threads`;
//! results are byte-identical regardless of the pool size.

mod plot;

use clap::{Args, Parser, Subcommand};
use robustlab::{
    binomial_anticoncentration_sweep, blowup_random_sweep, high_prob_from_robust, run_experiment,
    separation_demo, CleanSampleSpec, Dataset, Error, EstimatorKind, ExperimentConfig, Result,
    RngStream, SeparationConfig,
};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "robustlab", version, about = "Robust mean estimation laboratory")]
struct Cli {
    /// Worker threads; ROBUSTLAB_THREADS overrides this flag.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one estimator on a dataset file and print the estimate as JSON.
    Estimate(EstimateArgs),
    /// Run a configured trial sweep and write records as CSV.
    Experiment(RunArgs),
    /// Compare the two-stage estimator and the filter center under a
    /// symmetric spread attack, radius by radius.
    SeparationDemo(RunArgs),
    /// Exact combinatorial and failure-rate oracle sweeps.
    Theorycheck(TheoryArgs),
}

#[derive(Args)]
struct EstimateArgs {
    /// Dataset CSV: one point per row, d columns, no header.
    data: PathBuf,
    /// One of: empirical_mean, median_of_means:<k>, trimmed_mean:<tau>,
    /// filter_center[:<rho>], subg.
    #[arg(long)]
    estimator: String,
    /// Contamination budget handed to robust estimators.
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Confidence level for the two-stage estimator.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write an SVG chart of the results (presentation only).
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Args)]
struct TheoryArgs {
    #[command(subcommand)]
    which: TheoryCmd,
}

#[derive(Subcommand)]
enum TheoryCmd {
    /// Dilation sweep over random high-mass subsets of the binary cube.
    Blowup {
        #[arg(long, default_value_t = 16)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        #[arg(long, default_value_t = 200)]
        sets: usize,
        #[arg(long, default_value_t = 0.9)]
        mass_floor: f64,
        /// Comma-separated dilation fractions; defaults to 1/16..4/16.
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact binomial upper tail against its closed-form lower bound over
    /// the full (n, p, eps) grid. Violations are reported, not hidden: the
    /// bound genuinely fails for small n.
    Binomial {
        #[arg(long, default_value_t = 50)]
        n_max: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Failure-rate decay of an estimator as n grows.
    Reduction {
        /// JSON job file.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Job description for the failure-rate sweep.
#[derive(Serialize, Deserialize)]
struct ReductionJob {
    estimator: String,
    sample: CleanSampleSpec,
    eps: f64,
    n_grid: Vec<usize>,
    trials: usize,
    envelope_mult: f64,
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads(cli.threads) {
        eprintln!("{e}");
        return ExitCode::from(2);
    }
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(match e {
                Error::Usage(_) => 2,
                _ => 1,
            })
        }
    }
}

fn init_threads(flag: Option<usize>) -> Result<()> {
    let n = match std::env::var("ROBUSTLAB_THREADS") {
        Ok(s) => Some(s.trim().parse::<usize>().map_err(|_| {
            Error::usage(format!("ROBUSTLAB_THREADS = {s:?} is not a thread count"))
        })?),
        Err(std::env::VarError::NotPresent) => flag,
        Err(e) => return Err(Error::usage(format!("ROBUSTLAB_THREADS: {e}"))),
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(Error::usage("thread count must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::usage(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn dispatch(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Estimate(a) => cmd_estimate(a),
        Cmd::Experiment(a) => cmd_experiment(a),
        Cmd::SeparationDemo(a) => cmd_separation(a),
        Cmd::Theorycheck(a) => cmd_theory(a.which),
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let body = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&body)
        .map_err(|e| Error::usage(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let body = serde_json::to_string_pretty(value)
        .map_err(|e| Error::numeric(format!("serialization failed: {e}")))?;
    std::fs::write(path, body + "\n").map_err(|e| Error::io(path.display().to_string(), e))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let body = serde_json::to_string_pretty(value)
        .map_err(|e| Error::numeric(format!("serialization failed: {e}")))?;
    println!("{body}");
    Ok(())
}

/// Headerless CSV, one point per row, `d` columns of decimal numbers.
fn read_dataset(path: &Path) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path.display().to_string(), io),
            other => Error::usage(format!("{}: {other:?}", path.display())),
        })?;
    let mut flat = Vec::new();
    let mut d = 0usize;
    let mut n = 0usize;
    for (row_idx, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| Error::usage(format!("{}: {e}", path.display())))?;
        if n == 0 {
            d = row.len();
        } else if row.len() != d {
            return Err(Error::usage(format!(
                "{}: row {} has {} fields, expected {d}",
                path.display(),
                row_idx + 1,
                row.len()
            )));
        }
        for field in row.iter() {
            let v: f64 = field.parse().map_err(|_| {
                Error::usage(format!(
                    "{}: row {}: {field:?} is not a number",
                    path.display(),
                    row_idx + 1
                ))
            })?;
            flat.push(v);
        }
        n += 1;
    }
    Dataset::from_flat(n, d, flat)
}

#[derive(Serialize)]
struct EstimateOutput {
    estimator: String,
    n: usize,
    d: usize,
    eps: f64,
    delta: Option<f64>,
    seed: u64,
    estimate: Vec<f64>,
}

fn cmd_estimate(a: EstimateArgs) -> Result<()> {
    let kind = EstimatorKind::parse(&a.estimator)?;
    let x = read_dataset(&a.data)?;
    let mut rng = RngStream::new(a.seed, 0);
    let estimate = kind.estimate(&x, a.eps, a.delta, &mut rng)?;
    let doc = EstimateOutput {
        estimator: kind.label(),
        n: x.n(),
        d: x.d(),
        eps: a.eps,
        delta: a.delta,
        seed: a.seed,
        estimate,
    };
    if let Some(out) = &a.out {
        write_json(out, &doc)?;
    }
    print_json(&doc)
}

fn cmd_experiment(a: RunArgs) -> Result<()> {
    let mut cfg: ExperimentConfig = read_json(&a.config)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(o) = &a.out {
        cfg.out = Some(o.clone());
    }
    let records = run_experiment(&cfg)?;
    if let Some(p) = &a.plot {
        plot::write_experiment_plot(p, &cfg, &records)?;
    }
    match &cfg.out {
        Some(p) => println!("{} records -> {}", records.len(), p.display()),
        None => println!("{} records (no output path configured)", records.len()),
    }
    Ok(())
}

fn cmd_separation(a: RunArgs) -> Result<()> {
    let mut cfg: SeparationConfig = read_json(&a.config)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(o) = &a.out {
        cfg.out = Some(o.clone());
    }
    let report = separation_demo(&cfg)?;
    if let Some(p) = &a.plot {
        plot::write_separation_plot(p, &report)?;
    }
    for s in &report.summaries {
        println!(
            "r = {:>10.3}: two-stage worst {:>9.4} (max {:>9.4}), filter {:>8.4}, >=5x in {:.0}% of trials",
            s.r,
            s.mean_subg_worst,
            s.max_subg_worst,
            s.mean_filter,
            100.0 * s.frac_subg_at_least_5x
        );
    }
    let st = &report.stable;
    println!(
        "stable set: {}/{} solves converged, min fraction {} (floor {:.4}), spectral mult {}",
        st.successes,
        st.trials,
        st.min_fraction.map_or("n/a".into(), |v| format!("{v:.4}")),
        st.required_fraction,
        st.spectral_mult.map_or("n/a".into(), |v| format!("{v:.3}")),
    );
    if let Some(p) = &cfg.out {
        println!("report -> {}", p.display());
    }
    Ok(())
}

fn cmd_theory(cmd: TheoryCmd) -> Result<()> {
    match cmd {
        TheoryCmd::Blowup {
            n,
            p,
            sets,
            mass_floor,
            eps,
            seed,
            out,
        } => {
            let grid = if eps.is_empty() {
                vec![1.0 / 16.0, 2.0 / 16.0, 3.0 / 16.0, 4.0 / 16.0]
            } else {
                eps
            };
            let mut rng = RngStream::new(seed, 0);
            let sweep = blowup_random_sweep(n, p, sets, mass_floor, &grid, &mut rng)?;
            if let Some(path) = &out {
                write_json(path, &sweep)?;
            }
            print_json(&sweep)
        }
        TheoryCmd::Binomial { n_max, out } => {
            let sweep = binomial_anticoncentration_sweep(n_max)?;
            if let Some(path) = &out {
                write_json(path, &sweep)?;
            }
            print_json(&sweep)
        }
        TheoryCmd::Reduction { config, seed, out } => {
            let mut job: ReductionJob = read_json(&config)?;
            if let Some(s) = seed {
                job.seed = s;
            }
            let mut rng = RngStream::new(job.seed, 0);
            let report = high_prob_from_robust(
                &job.estimator,
                &job.sample,
                job.eps,
                &job.n_grid,
                job.trials,
                job.envelope_mult,
                &mut rng,
            )?;
            if let Some(path) = &out {
                write_json(path, &report)?;
            }
            print_json(&report)
        }
    }
}

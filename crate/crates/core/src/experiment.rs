//! Experiment orchestration: seeded trial sweeps over a parameter grid, flat
//! record output (CSV plus a JSON sidecar with the full config), and the
//! adversarial-vs-heavy-tailed separation demonstration.
//!
//! Determinism contract: every trial derives its own [`RngStream`] from the
//! config seed and the trial's position in the sweep, so outputs are
//! byte-identical across runs and worker counts. Wall-clock timings are the
//! one nondeterministic measurement; they stay in memory and out of the
//! serialized rows.

use crate::baselines::{empirical_mean, implied_delta, median_of_means, trimmed_mean, EstimatorKind};
use crate::contamination::{corrupt, sample_clean, AttackSpec, CleanSampleSpec};
use crate::dataset::{Dataset, UnitDirection};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::spread::subg_estimate;
use crate::stability::{extract_stable_set, solve_rob_sdp_default};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Sweep variable: either the contamination budget or the confidence level.
/// A delta grid implies clean-data confidence sweeps; attacks need an eps
/// grid because the corruption fraction is the value being swept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "grid", content = "values", rename_all = "snake_case")]
pub enum ParameterGrid {
    Eps(Vec<f64>),
    Delta(Vec<f64>),
}

impl ParameterGrid {
    pub fn len(&self) -> usize {
        match self {
            ParameterGrid::Eps(v) | ParameterGrid::Delta(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self, n: usize) -> Result<()> {
        match self {
            ParameterGrid::Eps(v) => {
                if v.is_empty() {
                    return Err(Error::usage("eps grid is empty"));
                }
                for &e in v {
                    if !e.is_finite() || !(0.0..0.5).contains(&e) {
                        return Err(Error::usage(format!("grid eps = {e} outside [0, 1/2)")));
                    }
                }
            }
            ParameterGrid::Delta(v) => {
                if v.is_empty() {
                    return Err(Error::usage("delta grid is empty"));
                }
                for &dl in v {
                    if !dl.is_finite() || !(dl > 0.0 && dl <= 0.25) {
                        return Err(Error::usage(format!("grid delta = {dl} outside (0, 1/4]")));
                    }
                    if (4.0 / dl).ln() / n as f64 >= 0.5 {
                        return Err(Error::usage(format!(
                            "delta = {dl} needs log(4/delta)/n < 1/2 but n = {n}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Multipliers shared by reports and plots rather than by the estimators
/// themselves: `mult` scales the theoretical error envelope drawn next to
/// measured errors, `c1` is the weight-threshold constant used when a
/// filter run also reports its surviving stable set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeConstants {
    pub mult: f64,
    pub c1: f64,
}

impl Default for EnvelopeConstants {
    fn default() -> Self {
        EnvelopeConstants { mult: 1.0, c1: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub estimators: Vec<EstimatorKind>,
    pub sample: CleanSampleSpec,
    #[serde(default)]
    pub attack: Option<AttackSpec>,
    pub grid: ParameterGrid,
    pub trials: usize,
    pub seed: u64,
    /// CSV destination; a JSON sidecar with the full config lands next to it.
    /// `None` keeps the records in memory only.
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub envelope: EnvelopeConstants,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.estimators.is_empty() {
            return Err(Error::usage("no estimators configured"));
        }
        if self.trials == 0 {
            return Err(Error::usage("trials must be at least 1"));
        }
        self.sample.validate()?;
        self.grid.validate(self.sample.n)?;
        if self.attack.is_some() && matches!(self.grid, ParameterGrid::Delta(_)) {
            return Err(Error::usage(
                "attack sweeps need an eps grid; a delta grid leaves the corruption fraction unspecified",
            ));
        }
        if !(self.envelope.mult > 0.0) || !self.envelope.mult.is_finite() {
            return Err(Error::usage(format!(
                "envelope mult = {} must be positive",
                self.envelope.mult
            )));
        }
        if !(self.envelope.c1 > 0.0) || self.envelope.c1 > 1.0 {
            return Err(Error::usage(format!(
                "envelope c1 = {} outside (0, 1]",
                self.envelope.c1
            )));
        }
        Ok(())
    }
}

/// One estimator evaluation. Optional fields hold whatever the estimator
/// actually produced: `sigma_v` and `s` for the two-stage estimator,
/// `objective` and `stable_set_size` for filter runs, `delta` whenever a
/// confidence level was in play. `seed` is the trial's stream id, so any row
/// can be replayed from the sidecar config alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub estimator: String,
    pub n: usize,
    pub d: usize,
    pub eps: f64,
    pub delta: Option<f64>,
    pub s: Option<i8>,
    pub error: f64,
    pub sigma_v: Option<f64>,
    pub objective: Option<f64>,
    pub stable_set_size: Option<usize>,
    pub seed: u64,
    /// Measured, not replayed: excluded from serialization so identical
    /// seeds produce byte-identical files.
    #[serde(skip)]
    pub wall_time_ms: f64,
}

fn l2_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

struct ArmOutcome {
    mu_hat: Vec<f64>,
    sigma_v: Option<f64>,
    objective: Option<f64>,
    stable_set_size: Option<usize>,
    delta: Option<f64>,
    s: Option<i8>,
}

/// Runs one estimator arm. Both signs of the two-stage estimator are driven
/// from identical stream clones by the caller, so a (+1, -1) record pair
/// shares its first-stage center and spread direction.
fn run_arm(
    kind: &EstimatorKind,
    data: &Dataset,
    eps: f64,
    delta: Option<f64>,
    s: i8,
    c1: f64,
    rng: &mut RngStream,
) -> Result<ArmOutcome> {
    match kind {
        EstimatorKind::EmpiricalMean => Ok(ArmOutcome {
            mu_hat: empirical_mean(data),
            sigma_v: None,
            objective: None,
            stable_set_size: None,
            delta,
            s: None,
        }),
        EstimatorKind::MedianOfMeans { blocks } => Ok(ArmOutcome {
            mu_hat: median_of_means(data, *blocks, rng)?,
            sigma_v: None,
            objective: None,
            stable_set_size: None,
            delta,
            s: None,
        }),
        EstimatorKind::TrimmedMean { tau } => Ok(ArmOutcome {
            mu_hat: trimmed_mean(data, *tau)?,
            sigma_v: None,
            objective: None,
            stable_set_size: None,
            delta,
            s: None,
        }),
        EstimatorKind::FilterCenter { rho } => {
            let sol = solve_rob_sdp_default(data, rho.unwrap_or(eps), rng)?;
            let stable = if eps > 0.0 {
                Some(extract_stable_set(data, &sol, eps, c1)?.indices.len())
            } else {
                None
            };
            Ok(ArmOutcome {
                mu_hat: sol.center,
                sigma_v: None,
                objective: Some(sol.objective),
                stable_set_size: stable,
                delta,
                s: None,
            })
        }
        EstimatorKind::SubGaussian => {
            let dl = delta.unwrap_or_else(|| implied_delta(eps, data.n()));
            let est = subg_estimate(data, dl, s, rng)?;
            Ok(ArmOutcome {
                mu_hat: est.mu_hat,
                sigma_v: Some(est.sigma_v),
                objective: None,
                stable_set_size: None,
                delta: Some(dl),
                s: Some(s),
            })
        }
    }
}

/// Substream layout within one trial: 0 draws the clean sample, 1 drives the
/// attack, and estimator i works from 2 + i (shared by both signs).
const SALT_DATA: u64 = 0;
const SALT_ATTACK: u64 = 1;
const SALT_ESTIMATORS: u64 = 2;

/// Runs the full sweep and returns the records in deterministic order (grid
/// value, then trial, then estimator, then sign). Emits exactly
/// trials * |grid| * (2 for the two-stage estimator, 1 otherwise) records
/// per estimator. When `cfg.out` is set, writes the CSV and its JSON
/// sidecar; I/O failures carry the offending path.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let mu = cfg.sample.population_moments()?.mean;
    let n_decl = cfg.sample.n;
    let cells: Vec<(f64, Option<f64>)> = match &cfg.grid {
        ParameterGrid::Eps(v) => v.iter().map(|&e| (e, None)).collect(),
        ParameterGrid::Delta(v) => v
            .iter()
            .map(|&dl| ((4.0 / dl).ln() / n_decl as f64, Some(dl)))
            .collect(),
    };
    let total = cells.len() * cfg.trials;
    let nested: Vec<Vec<TrialRecord>> = (0..total)
        .into_par_iter()
        .map(|cell| -> Result<Vec<TrialRecord>> {
            let gi = cell / cfg.trials;
            let (eps, delta) = cells[gi];
            let trial_rng = RngStream::new(cfg.seed, cell as u64);
            let clean = sample_clean(&cfg.sample, &mut trial_rng.substream(SALT_DATA))?;
            let data = match &cfg.attack {
                Some(att) => {
                    corrupt(&clean, eps, att, &mut trial_rng.substream(SALT_ATTACK))?.data
                }
                None => clean,
            };
            let mut out = Vec::new();
            for (ei, kind) in cfg.estimators.iter().enumerate() {
                let signs: &[i8] = match kind {
                    EstimatorKind::SubGaussian => &[1, -1],
                    _ => &[1],
                };
                for &s in signs {
                    let mut erng = trial_rng.substream(SALT_ESTIMATORS + ei as u64);
                    let t0 = Instant::now();
                    let arm = run_arm(kind, &data, eps, delta, s, cfg.envelope.c1, &mut erng)?;
                    let wall_time_ms = t0.elapsed().as_secs_f64() * 1e3;
                    out.push(TrialRecord {
                        estimator: kind.label(),
                        n: data.n(),
                        d: data.d(),
                        eps,
                        delta: arm.delta,
                        s: arm.s,
                        error: l2_dist(&arm.mu_hat, &mu),
                        sigma_v: arm.sigma_v,
                        objective: arm.objective,
                        stable_set_size: arm.stable_set_size,
                        seed: cell as u64,
                        wall_time_ms,
                    });
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let records: Vec<TrialRecord> = nested.into_iter().flatten().collect();
    if let Some(path) = &cfg.out {
        write_records(path, &records, cfg)?;
    }
    Ok(records)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let p = path.display().to_string();
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(p, io),
        other => Error::io(
            p,
            std::io::Error::new(std::io::ErrorKind::Other, format!("{other:?}")),
        ),
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    config: &'a ExperimentConfig,
    records: usize,
}

/// One row per record, plus `<out>.json` carrying the config (seed included)
/// and the record count.
pub fn write_records(path: &Path, records: &[TrialRecord], cfg: &ExperimentConfig) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in records {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush()
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let side = path.with_extension("json");
    let doc = Sidecar {
        config: cfg,
        records: records.len(),
    };
    let body = serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::numeric(format!("sidecar serialization failed: {e}")))?;
    std::fs::write(&side, body + "\n").map_err(|e| Error::io(side.display().to_string(), e))?;
    Ok(())
}

/// Reads records back from a CSV produced by [`write_records`].
pub fn read_records(path: &Path) -> Result<Vec<TrialRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec.map_err(|e| csv_error(path, e))?);
    }
    Ok(out)
}

/// Setup for the adversarial separation demonstration: a symmetric spread
/// attack at fixed eps, swept over the planting radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationConfig {
    pub sample: CleanSampleSpec,
    pub eps: f64,
    pub r_values: Vec<f64>,
    /// Attack direction; `None` uses the first coordinate axis.
    #[serde(default)]
    pub direction: Option<UnitDirection>,
    pub trials: usize,
    /// Confidence for the two-stage estimator; `None` picks the delta whose
    /// implied budget log(4/delta)/n equals the attack eps, which puts both
    /// estimators on the same robustness footing.
    #[serde(default)]
    pub delta: Option<f64>,
    /// Stable-set threshold constant.
    pub c1: f64,
    pub seed: u64,
    /// Optional JSON report destination.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl SeparationConfig {
    pub fn validate(&self) -> Result<()> {
        self.sample.validate()?;
        if !self.eps.is_finite() || !(0.0 < self.eps && self.eps < 0.5) {
            return Err(Error::usage(format!("eps = {} outside (0, 1/2)", self.eps)));
        }
        if self.r_values.is_empty() {
            return Err(Error::usage("radius sweep is empty"));
        }
        for &r in &self.r_values {
            if !r.is_finite() || r < 0.0 {
                return Err(Error::usage(format!("radius {r} must be finite and >= 0")));
            }
        }
        if self.trials == 0 {
            return Err(Error::usage("trials must be at least 1"));
        }
        if let Some(dl) = self.delta {
            if !(dl > 0.0 && dl <= 0.25) {
                return Err(Error::usage(format!("delta = {dl} outside (0, 1/4]")));
            }
            if (4.0 / dl).ln() / self.sample.n as f64 >= 0.5 {
                return Err(Error::usage(format!(
                    "delta = {dl} needs log(4/delta)/n < 1/2 but n = {}",
                    self.sample.n
                )));
            }
        }
        if !(self.c1 > 0.0) || self.c1 > 1.0 {
            return Err(Error::usage(format!("c1 = {} outside (0, 1]", self.c1)));
        }
        if let Some(v) = &self.direction {
            if v.as_slice().len() != self.sample.d {
                return Err(Error::usage(format!(
                    "attack direction has {} coordinates, expected {}",
                    v.as_slice().len(),
                    self.sample.d
                )));
            }
        }
        Ok(())
    }
}

/// Errors of both estimators on one corrupted sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationTrial {
    pub r: f64,
    pub trial: usize,
    pub err_subg_plus: f64,
    pub err_subg_minus: f64,
    /// max over the two signs; this is what the worst-case guarantee covers.
    pub err_subg_worst: f64,
    pub err_filter: f64,
    pub corrupted_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationSummary {
    pub r: f64,
    pub mean_subg_worst: f64,
    pub max_subg_worst: f64,
    pub mean_filter: f64,
    pub max_filter: f64,
    /// Fraction of trials where the worst-sign error is at least five times
    /// the filter center's error on the same sample.
    pub frac_subg_at_least_5x: f64,
}

/// Stable-set statistics over the clean samples. A success is a converged
/// solve of the weight-capped program at rho = c1 eps / 4, the cap for which
/// the extraction's size bound is a theorem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StableSetStats {
    pub trials: usize,
    pub successes: usize,
    /// min over successes of |I| / n.
    pub min_fraction: Option<f64>,
    /// 1 - c1 eps / 2, the guaranteed floor.
    pub required_fraction: f64,
    pub all_meet_bound: bool,
    /// max over successes of the spectral norm of the extracted set's second
    /// moment about its own mean.
    pub max_spectral_norm: Option<f64>,
    /// Reference scale eta^2 = op_norm * eps * log(1/eps) for clean data.
    pub eta_sq: f64,
    /// Reported constant: max spectral norm expressed in units of eta^2/eps.
    pub spectral_mult: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub eps: f64,
    pub delta: f64,
    pub c1: f64,
    pub rows: Vec<SeparationTrial>,
    pub summaries: Vec<SeparationSummary>,
    pub stable: StableSetStats,
}

struct SeparationBundle {
    rows: Vec<SeparationTrial>,
    converged: bool,
    fraction: f64,
    spectral: f64,
    meets_bound: bool,
}

/// Head-to-head on identical corrupted samples: for every radius and trial,
/// the two-stage estimate under both signs and the filter center, plus
/// stable-set extraction on the clean sample of each trial. One clean sample
/// is drawn per trial and re-corrupted at every radius, so the sweep
/// isolates the attack strength.
pub fn separation_demo(cfg: &SeparationConfig) -> Result<SeparationReport> {
    cfg.validate()?;
    let moments = cfg.sample.population_moments()?;
    let mu = moments.mean.clone();
    let n = cfg.sample.n;
    let delta = cfg
        .delta
        .unwrap_or_else(|| implied_delta(cfg.eps, n));
    let dir = cfg
        .direction
        .clone()
        .unwrap_or_else(|| UnitDirection::axis(cfg.sample.d, 0));
    let rho_stable = cfg.c1 * cfg.eps / 4.0;
    let required_fraction = 1.0 - cfg.c1 * cfg.eps / 2.0;
    let bundles: Vec<SeparationBundle> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> Result<SeparationBundle> {
            let base = RngStream::new(cfg.seed, t as u64);
            let clean = sample_clean(&cfg.sample, &mut base.substream(SALT_DATA))?;
            let sol = solve_rob_sdp_default(&clean, rho_stable, &mut base.substream(SALT_ATTACK))?;
            let stable = extract_stable_set(&clean, &sol, cfg.eps, cfg.c1)?;
            let fraction = stable.indices.len() as f64 / n as f64;
            let mut rows = Vec::with_capacity(cfg.r_values.len());
            for (ri, &r) in cfg.r_values.iter().enumerate() {
                let salt = SALT_ESTIMATORS + 2 * ri as u64;
                let attack = AttackSpec::SymmetricSpread {
                    r,
                    v: dir.clone(),
                };
                let corrupted =
                    corrupt(&clean, cfg.eps, &attack, &mut base.substream(salt))?;
                // Shared stream clone: the two signs form a genuine +- pair
                // around one first-stage center.
                let plus = subg_estimate(&corrupted.data, delta, 1, &mut base.substream(salt + 1))?;
                let minus =
                    subg_estimate(&corrupted.data, delta, -1, &mut base.substream(salt + 1))?;
                let filt =
                    solve_rob_sdp_default(&corrupted.data, cfg.eps, &mut base.substream(salt + 1))?;
                let err_plus = l2_dist(&plus.mu_hat, &mu);
                let err_minus = l2_dist(&minus.mu_hat, &mu);
                rows.push(SeparationTrial {
                    r,
                    trial: t,
                    err_subg_plus: err_plus,
                    err_subg_minus: err_minus,
                    err_subg_worst: err_plus.max(err_minus),
                    err_filter: l2_dist(&filt.center, &mu),
                    corrupted_rows: corrupted.corrupted.len(),
                });
            }
            Ok(SeparationBundle {
                rows,
                converged: sol.converged,
                fraction,
                spectral: stable.second_moment_norm,
                meets_bound: stable.size_bound_ok,
            })
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(cfg.r_values.len() * cfg.trials);
    for ri in 0..cfg.r_values.len() {
        for b in &bundles {
            rows.push(b.rows[ri].clone());
        }
    }
    let summaries = cfg
        .r_values
        .iter()
        .enumerate()
        .map(|(ri, &r)| {
            let slice = &rows[ri * cfg.trials..(ri + 1) * cfg.trials];
            let tn = slice.len() as f64;
            let mean_subg = slice.iter().map(|x| x.err_subg_worst).sum::<f64>() / tn;
            let mean_filt = slice.iter().map(|x| x.err_filter).sum::<f64>() / tn;
            let hits = slice
                .iter()
                .filter(|x| x.err_subg_worst >= 5.0 * x.err_filter)
                .count();
            SeparationSummary {
                r,
                mean_subg_worst: mean_subg,
                max_subg_worst: slice.iter().map(|x| x.err_subg_worst).fold(0.0, f64::max),
                mean_filter: mean_filt,
                max_filter: slice.iter().map(|x| x.err_filter).fold(0.0, f64::max),
                frac_subg_at_least_5x: hits as f64 / tn,
            }
        })
        .collect();
    let successes: Vec<&SeparationBundle> = bundles.iter().filter(|b| b.converged).collect();
    let eta_sq = moments.op_norm * cfg.eps * (1.0 / cfg.eps).ln();
    let max_spectral = successes
        .iter()
        .map(|b| b.spectral)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
    let stable = StableSetStats {
        trials: cfg.trials,
        successes: successes.len(),
        min_fraction: successes
            .iter()
            .map(|b| b.fraction)
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v)))),
        required_fraction,
        all_meet_bound: successes.iter().all(|b| b.meets_bound),
        max_spectral_norm: max_spectral,
        eta_sq,
        spectral_mult: max_spectral.map(|m| m * cfg.eps / eta_sq),
    };
    let report = SeparationReport {
        eps: cfg.eps,
        delta,
        c1: cfg.c1,
        rows,
        summaries,
        stable,
    };
    if let Some(path) = &cfg.out {
        let body = serde_json::to_string_pretty(&report)
            .map_err(|e| Error::numeric(format!("report serialization failed: {e}")))?;
        std::fs::write(path, body + "\n")
            .map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(report)
}

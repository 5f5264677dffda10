//! Sample generation: heavy-tailed families, inspecting adversaries, and
//! tail-decay diagnostics.
//!
//! The adversaries here implement the strong contamination model: they see
//! the clean sample (and its empirical mean) and replace up to a ceil(eps*n)
//! fraction of rows, leaving every other row bitwise intact. The diagnostics
//! check the two properties that separate genuine heavy tails from
//! adversarial planting: exceedance counts over a geometric threshold ladder
//! and truncated moment envelopes along sampled directions.

use crate::dataset::{dot, Dataset, UnitDirection};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::spread::spread;
use rand::Rng;
use rand_distr::{Distribution, Pareto, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

/// Distribution family for clean draws. Heavy-tailed families are affinely
/// standardized so the population mean and covariance match the enclosing
/// [`CleanSampleSpec`] exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    /// Student t with df > 2, scaled by sqrt((df-2)/df) to unit variance.
    StudentT { df: f64 },
    /// Pareto with shape > 2, shifted to mean zero and scaled to unit
    /// variance per coordinate before the affine map.
    Pareto { shape: f64, scale: f64 },
    /// Two-point distribution: the zero vector with probability 1 - p, the
    /// point `magnitude * e1` with probability p. Ignores the spec's mean
    /// and covariance fields; its population moments follow from (p, L).
    PointMassMixture { p: f64, magnitude: f64 },
}

/// Population covariance, restricted to diagonal shapes. Every experiment
/// in the suite uses isotropic or per-coordinate scaling; full matrices
/// would need a factorization step nothing here exercises.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum CovarianceSpec {
    Spherical { variance: f64 },
    Diagonal { variances: Vec<f64> },
}

impl CovarianceSpec {
    pub fn variances(&self, d: usize) -> Result<Vec<f64>> {
        let out = match self {
            CovarianceSpec::Spherical { variance } => vec![*variance; d],
            CovarianceSpec::Diagonal { variances } => {
                if variances.len() != d {
                    return Err(Error::usage(format!(
                        "{} diagonal variances for dimension {d}",
                        variances.len()
                    )));
                }
                variances.clone()
            }
        };
        if let Some(bad) = out.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::usage(format!("variance {bad} must be finite, >= 0")));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanSampleSpec {
    pub family: Family,
    pub mean: Vec<f64>,
    pub covariance: CovarianceSpec,
    pub d: usize,
    pub n: usize,
}

/// Exact low-order moments of the population a spec describes; the
/// truncation diagnostics normalize against these.
#[derive(Debug, Clone, Serialize)]
pub struct PopulationMoments {
    pub mean: Vec<f64>,
    pub trace: f64,
    pub op_norm: f64,
}

impl CleanSampleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.n == 0 {
            return Err(Error::usage(format!(
                "sample shape n={}, d={} must be positive",
                self.n, self.d
            )));
        }
        if self.mean.len() != self.d {
            return Err(Error::usage(format!(
                "mean has {} coordinates for dimension {}",
                self.mean.len(),
                self.d
            )));
        }
        if let Some(bad) = self.mean.iter().find(|v| !v.is_finite()) {
            return Err(Error::usage(format!("non-finite mean coordinate {bad}")));
        }
        self.covariance.variances(self.d)?;
        match &self.family {
            Family::Gaussian => {}
            // Finite covariance needs df > 2 / shape > 2.
            Family::StudentT { df } => {
                if !(*df > 2.0) || !df.is_finite() {
                    return Err(Error::usage(format!("student_t df = {df} must be > 2")));
                }
            }
            Family::Pareto { shape, scale } => {
                if !(*shape > 2.0) || !shape.is_finite() {
                    return Err(Error::usage(format!("pareto shape = {shape} must be > 2")));
                }
                if !(*scale > 0.0) || !scale.is_finite() {
                    return Err(Error::usage(format!("pareto scale = {scale} must be > 0")));
                }
            }
            Family::PointMassMixture { p, magnitude } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::usage(format!("mixture p = {p} outside [0, 1]")));
                }
                if !magnitude.is_finite() {
                    return Err(Error::usage(format!("mixture magnitude {magnitude}")));
                }
            }
        }
        Ok(())
    }

    pub fn population_moments(&self) -> Result<PopulationMoments> {
        self.validate()?;
        if let Family::PointMassMixture { p, magnitude } = self.family {
            let mut mean = vec![0.0; self.d];
            mean[0] = p * magnitude;
            let var = p * (1.0 - p) * magnitude * magnitude;
            return Ok(PopulationMoments {
                mean,
                trace: var,
                op_norm: var,
            });
        }
        let variances = self.covariance.variances(self.d)?;
        Ok(PopulationMoments {
            mean: self.mean.clone(),
            trace: variances.iter().sum(),
            op_norm: variances.iter().fold(0.0_f64, |a, &b| a.max(b)),
        })
    }
}

/// Draws n i.i.d. rows. Standardized draws satisfy the spec's mean and
/// covariance exactly at the population level; entries are consumed from
/// `rng` in row-major order, so a fixed stream fixes the sample.
pub fn sample_clean(spec: &CleanSampleSpec, rng: &mut RngStream) -> Result<Dataset> {
    spec.validate()?;
    let (n, d) = (spec.n, spec.d);
    let mut data = Vec::with_capacity(n * d);
    match &spec.family {
        Family::PointMassMixture { p, magnitude } => {
            for _ in 0..n {
                let hit = rng.gen::<f64>() < *p;
                data.push(if hit { *magnitude } else { 0.0 });
                data.extend(std::iter::repeat(0.0).take(d - 1));
            }
        }
        family => {
            let sds: Vec<f64> = spec
                .covariance
                .variances(d)?
                .iter()
                .map(|v| v.sqrt())
                .collect();
            for _ in 0..n {
                for k in 0..d {
                    let z = standard_draw(family, rng)?;
                    data.push(spec.mean[k] + sds[k] * z);
                }
            }
        }
    }
    Dataset::from_flat(n, d, data)
}

/// One mean-zero unit-variance draw from the family.
fn standard_draw(family: &Family, rng: &mut RngStream) -> Result<f64> {
    match family {
        Family::Gaussian => Ok(StandardNormal.sample(rng)),
        Family::StudentT { df } => {
            let t = StudentT::new(*df)
                .map_err(|e| Error::usage(format!("student_t({df}): {e}")))?;
            Ok(t.sample(rng) * ((df - 2.0) / df).sqrt())
        }
        Family::Pareto { shape, scale } => {
            let p = Pareto::new(*scale, *shape)
                .map_err(|e| Error::usage(format!("pareto({shape}, {scale}): {e}")))?;
            let (a, s) = (*shape, *scale);
            let mean = s * a / (a - 1.0);
            let sd = (s * s * a / ((a - 1.0) * (a - 1.0) * (a - 2.0))).sqrt();
            Ok((p.sample(rng) - mean) / sd)
        }
        Family::PointMassMixture { .. } => unreachable!("sampled per row"),
    }
}

/// Adversary descriptor. All three inspect the sample and its empirical
/// mean before choosing victims.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "attack", rename_all = "snake_case")]
pub enum AttackSpec {
    /// Replace the points nearest the empirical mean with a single cluster
    /// at mean + r * v.
    ShiftCluster { r: f64, v: UnitDirection },
    /// Replace the middle ranks (by signed projection onto v) with equal
    /// halves at mean +- r * v: inflates spread along v while the planted
    /// and removed masses both cancel, leaving the mean nearly fixed.
    SymmetricSpread { r: f64, v: UnitDirection },
    /// Reflect the points farthest from the empirical mean through it,
    /// scaled by r.
    SignFlipScale { r: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct CorruptedSample {
    pub data: Dataset,
    /// Replaced row indices, sorted ascending; at most ceil(eps * n).
    pub corrupted: Vec<usize>,
    pub attack: AttackSpec,
    pub eps: f64,
}

/// Number of rows an eps-fraction adversary may replace.
pub fn corruption_count(n: usize, eps: f64) -> usize {
    // Guard against the product landing one ulp above an integer.
    (eps * n as f64 - 1e-9).ceil().max(0.0) as usize
}

pub fn corrupt(
    x: &Dataset,
    eps: f64,
    attack: &AttackSpec,
    rng: &mut RngStream,
) -> Result<CorruptedSample> {
    if !(0.0..0.5).contains(&eps) {
        return Err(Error::usage(format!("eps = {eps} outside [0, 1/2)")));
    }
    let n = x.n();
    let d = x.d();
    let m = corruption_count(n, eps);
    if m == 0 {
        return Ok(CorruptedSample {
            data: x.clone(),
            corrupted: Vec::new(),
            attack: attack.clone(),
            eps,
        });
    }
    let mut mean = vec![0.0; d];
    for p in x.points() {
        for (s, &v) in mean.iter_mut().zip(p) {
            *s += v;
        }
    }
    for s in mean.iter_mut() {
        *s /= n as f64;
    }
    let replacements: Vec<(usize, Vec<f64>)> = match attack {
        AttackSpec::ShiftCluster { r, v } => {
            check_direction(v, d)?;
            let victims = rank_by(n, |i| {
                x.point(i)
                    .iter()
                    .zip(&mean)
                    .map(|(&a, &b)| (a - b) * (a - b))
                    .sum::<f64>()
            });
            let target: Vec<f64> = mean
                .iter()
                .zip(v.as_slice())
                .map(|(&mu, &vk)| mu + r * vk)
                .collect();
            victims[..m].iter().map(|&i| (i, target.clone())).collect()
        }
        AttackSpec::SymmetricSpread { r, v } => {
            check_direction(v, d)?;
            let by_proj = rank_by(n, |i| {
                x.point(i)
                    .iter()
                    .zip(v.as_slice())
                    .zip(&mean)
                    .map(|((&a, &vk), &mu)| (a - mu) * vk)
                    .sum::<f64>()
            });
            // Middle window of the projection order: on a symmetric sample
            // the removed values cancel in pairs, so only window parity and
            // the placement parity move the mean.
            let start = (n - m) / 2;
            let window = &by_proj[start..start + m];
            let plus: Vec<f64> = mean
                .iter()
                .zip(v.as_slice())
                .map(|(&mu, &vk)| mu + r * vk)
                .collect();
            let minus: Vec<f64> = mean
                .iter()
                .zip(v.as_slice())
                .map(|(&mu, &vk)| mu - r * vk)
                .collect();
            // Random half assignment; counts differ by at most 1.
            let mut signs: Vec<bool> = (0..m).map(|k| k < m / 2).collect();
            for k in (1..m).rev() {
                let j = rng.gen_range(0..=k);
                signs.swap(k, j);
            }
            window
                .iter()
                .zip(&signs)
                .map(|(&i, &up)| (i, if up { plus.clone() } else { minus.clone() }))
                .collect()
        }
        AttackSpec::SignFlipScale { r } => {
            let mut victims = rank_by(n, |i| {
                x.point(i)
                    .iter()
                    .zip(&mean)
                    .map(|(&a, &b)| (a - b) * (a - b))
                    .sum::<f64>()
            });
            victims.reverse();
            victims[..m]
                .iter()
                .map(|&i| {
                    let row: Vec<f64> = x
                        .point(i)
                        .iter()
                        .zip(&mean)
                        .map(|(&a, &mu)| mu - r * (a - mu))
                        .collect();
                    (i, row)
                })
                .collect()
        }
    };
    let data = x.with_replaced_rows(&replacements)?;
    let mut corrupted: Vec<usize> = replacements.iter().map(|(i, _)| *i).collect();
    corrupted.sort_unstable();
    Ok(CorruptedSample {
        data,
        corrupted,
        attack: attack.clone(),
        eps,
    })
}

fn check_direction(v: &UnitDirection, d: usize) -> Result<()> {
    if v.d() != d {
        return Err(Error::usage(format!(
            "attack direction has {} coordinates, expected {d}",
            v.d()
        )));
    }
    Ok(())
}

/// Indices 0..n sorted ascending by `key`, ties by index.
fn rank_by(n: usize, key: impl Fn(usize) -> f64) -> Vec<usize> {
    let keys: Vec<f64> = (0..n).map(key).collect();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| keys[a].partial_cmp(&keys[b]).unwrap());
    idx
}

/// One rung of the exceedance ladder: projections may land at or above
/// `tau_j` in absolute value at most `allowed` times.
#[derive(Debug, Clone, Serialize)]
pub struct LadderLevel {
    pub j: usize,
    pub tau_j: f64,
    /// 2 (n eps + j) / (3 j); fractional on purpose, counts are compared
    /// as reals.
    pub allowed: f64,
}

/// Geometric threshold ladder tau_j = (C1/64) e^{4j} max{(1/eps) sqrt(Tr
/// Sigma / n), 1/sqrt(eps)} with per-level exceedance budgets, under the
/// normalization ||Sigma|| = 1 (scale data first). The base truncation
/// level tau uses the same max term with prefactor C1.
#[derive(Debug, Clone, Serialize)]
pub struct TailLadder {
    pub n: usize,
    pub eps: f64,
    pub c1: f64,
    /// Base truncation level C1 * max-term.
    pub tau: f64,
    pub levels: Vec<LadderLevel>,
}

pub fn tail_ladder(
    n: usize,
    eps: f64,
    trace_over_n: f64,
    c1: f64,
    j_max: usize,
) -> Result<TailLadder> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::usage(format!("eps = {eps} outside (0, 1/2)")));
    }
    if !(c1 > 0.0) || !c1.is_finite() {
        return Err(Error::usage(format!("C1 = {c1} must be positive")));
    }
    if !(trace_over_n >= 0.0) || !trace_over_n.is_finite() {
        return Err(Error::usage(format!(
            "Tr/n = {trace_over_n} must be finite, >= 0"
        )));
    }
    if n == 0 || j_max == 0 {
        return Err(Error::usage("n and j_max must be positive"));
    }
    let max_term = (trace_over_n.sqrt() / eps).max(1.0 / eps.sqrt());
    let levels = (1..=j_max)
        .map(|j| LadderLevel {
            j,
            tau_j: c1 / 64.0 * (4.0 * j as f64).exp() * max_term,
            allowed: 2.0 * (n as f64 * eps + j as f64) / (3.0 * j as f64),
        })
        .collect();
    Ok(TailLadder {
        n,
        eps,
        c1,
        tau: c1 * max_term,
        levels,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TailViolation {
    pub direction: usize,
    pub j: usize,
    pub count: usize,
    pub allowed: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TailDecayReport {
    pub violations: Vec<TailViolation>,
    pub pass: bool,
}

/// Counts |<X_i, v>| >= tau_j per direction and level. A sample passes iff
/// no (direction, level) pair exceeds its budget. Projections are taken
/// about the origin: callers feed data that is population-mean centered
/// (clean diagnostics) or deliberately not (attack detection).
pub fn check_tail_decay(
    x: &Dataset,
    directions: &[UnitDirection],
    ladder: &TailLadder,
) -> Result<TailDecayReport> {
    let mut proj = Vec::with_capacity(x.n());
    let mut violations = Vec::new();
    for (vi, v) in directions.iter().enumerate() {
        check_direction(v, x.d())?;
        x.project_into(v.as_slice(), &mut proj);
        for level in &ladder.levels {
            let count = proj.iter().filter(|p| p.abs() >= level.tau_j).count();
            if count as f64 > level.allowed {
                violations.push(TailViolation {
                    direction: vi,
                    j: level.j,
                    count,
                    allowed: level.allowed,
                });
            }
        }
    }
    Ok(TailDecayReport {
        pass: violations.is_empty(),
        violations,
    })
}

/// Pointwise clamp to [-tau, tau], preserving sign: the truncation map the
/// moment envelopes are stated through. 1-Lipschitz and idempotent.
pub fn truncate(values: &[f64], tau: f64) -> Result<Vec<f64>> {
    if !(tau >= 0.0) {
        return Err(Error::usage(format!("tau = {tau} must be >= 0")));
    }
    Ok(values.iter().map(|&v| v.clamp(-tau, tau)).collect())
}

/// Worst-case (over the sampled directions) ratios of the three truncated
/// functionals to their envelopes.
#[derive(Debug, Clone, Serialize)]
pub struct TruncationReport {
    /// Truncation level used: C1 * max{(1/eps) sqrt(Tr/n), sqrt(op/eps)}.
    pub tau: f64,
    /// max_v sum phi_tau(<X_i - mu, v>)^2 over (Tr/eps + n * op).
    pub second_moment_ratio: f64,
    /// max_v |sum phi_tau(<X_i - mu, v>)| over (sqrt(n Tr) + n sqrt(eps)).
    pub mean_ratio: f64,
    /// max_v spread about 0 with m = eps n, over (sqrt(Tr/(eps n)) + sqrt(op)).
    pub spread_ratio: f64,
    pub ceiling: f64,
    pub pass: bool,
}

/// Evaluates the three truncated-moment envelopes on clean data with known
/// population moments, reporting each empirical constant (envelope constant
/// C = 1) and a pass/fail against `ceiling`.
pub fn check_truncated_lemmas(
    x: &Dataset,
    eps: f64,
    directions: &[UnitDirection],
    c1: f64,
    moments: &PopulationMoments,
    ceiling: f64,
) -> Result<TruncationReport> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::usage(format!("eps = {eps} outside (0, 1/2)")));
    }
    if !(c1 > 0.0) || !(ceiling > 0.0) {
        return Err(Error::usage("C1 and ceiling must be positive"));
    }
    if moments.mean.len() != x.d() {
        return Err(Error::usage(format!(
            "population mean has {} coordinates, expected {}",
            moments.mean.len(),
            x.d()
        )));
    }
    let n = x.n() as f64;
    let (trace, op) = (moments.trace, moments.op_norm);
    let tau = c1 * ((trace / x.n() as f64).sqrt() / eps).max((op / eps).sqrt());
    let second_env = trace / eps + n * op;
    let mean_env = (n * trace).sqrt() + n * eps.sqrt();
    let spread_env = (trace / (eps * n)).sqrt() + op.sqrt();
    let mut proj = Vec::with_capacity(x.n());
    let (mut worst_second, mut worst_mean, mut worst_spread) = (0.0_f64, 0.0_f64, 0.0_f64);
    for v in directions {
        check_direction(v, x.d())?;
        let center = dot(&moments.mean, v.as_slice());
        x.project_into(v.as_slice(), &mut proj);
        for p in proj.iter_mut() {
            *p -= center;
        }
        let (mut sq, mut sm) = (0.0, 0.0);
        for &p in proj.iter() {
            let t = p.clamp(-tau, tau);
            sq += t * t;
            sm += t;
        }
        worst_second = worst_second.max(sq / second_env);
        worst_mean = worst_mean.max(sm.abs() / mean_env);
        let sp = spread(&proj, 0.0, eps * n)?;
        worst_spread = worst_spread.max(sp / spread_env);
    }
    Ok(TruncationReport {
        tau,
        second_moment_ratio: worst_second,
        mean_ratio: worst_mean,
        spread_ratio: worst_spread,
        ceiling,
        pass: worst_second <= ceiling && worst_mean <= ceiling && worst_spread <= ceiling,
    })
}

/// Direction set for the sampled-direction checks: the d coordinate axes
/// followed by `extra` fixed-seed random unit vectors.
pub fn direction_set(d: usize, extra: usize, rng: &mut RngStream) -> Vec<UnitDirection> {
    let mut out: Vec<UnitDirection> = (0..d).map(|k| UnitDirection::axis(d, k)).collect();
    for _ in 0..extra {
        let v = crate::direction::random_unit(d, rng);
        out.push(UnitDirection::new(v).expect("random_unit returns unit norm"));
    }
    out
}

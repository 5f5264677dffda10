//! Exact small-scale oracles and the corruption-to-confidence reduction study.
//!
//! Everything here is brute force on purpose. Product measures on the
//! Boolean cube are enumerated bit by bit, binomial tails are summed term by
//! term, and the claim that a corruption-robust estimator automatically
//! enjoys exponentially small failure probability on clean heavy-tailed data
//! is measured head-on by Monte Carlo. At small n every quantity is
//! computable without approximation, which is what makes these useful as
//! ground truth for the asymptotic arguments implemented elsewhere.

use crate::baselines::EstimatorKind;
use crate::contamination::{sample_clean, CleanSampleSpec};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;

/// Subset of the Boolean cube {0,1}^n carrying a p-biased product measure.
///
/// Points are indexed by the integers 0..2^n, coordinate k being bit k. The
/// indicator lives in a bitset, so dilation by one Hamming step is a handful
/// of shifts and word swaps per coordinate.
#[derive(Debug, Clone)]
pub struct CubeSet {
    n: usize,
    p: f64,
    // 2^n indicator bits, little-endian within and across words. Bits at
    // positions >= 2^n are always zero.
    words: Vec<u64>,
    members: usize,
}

// Word positions whose index has bit k set, for k = 0..6.
const BIT_MASKS: [u64; 6] = [
    0xAAAA_AAAA_AAAA_AAAA,
    0xCCCC_CCCC_CCCC_CCCC,
    0xF0F0_F0F0_F0F0_F0F0,
    0xFF00_FF00_FF00_FF00,
    0xFFFF_0000_FFFF_0000,
    0xFFFF_FFFF_0000_0000,
];

impl CubeSet {
    pub fn empty(n: usize, p: f64) -> Result<Self> {
        if n == 0 || n > 20 {
            return Err(Error::usage(format!(
                "cube dimension n = {n} outside 1..=20 (enumeration would not fit)"
            )));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::usage(format!("coordinate bias p = {p} outside (0, 1)")));
        }
        let size = 1usize << n;
        Ok(CubeSet {
            n,
            p,
            words: vec![0; (size + 63) / 64],
            members: 0,
        })
    }

    pub fn full(n: usize, p: f64) -> Result<Self> {
        let mut s = CubeSet::empty(n, p)?;
        let size = 1usize << n;
        if size < 64 {
            s.words[0] = (1u64 << size) - 1;
        } else {
            s.words.fill(!0);
        }
        s.members = size;
        Ok(s)
    }

    pub fn from_members(n: usize, p: f64, members: &[usize]) -> Result<Self> {
        let mut s = CubeSet::empty(n, p)?;
        for &m in members {
            if m >= (1usize << n) {
                return Err(Error::usage(format!(
                    "point index {m} outside the {n}-cube"
                )));
            }
            s.set_bit(m);
        }
        Ok(s)
    }

    /// Grows a set by uniformly random points until its measure reaches
    /// `threshold`. The resulting sets are unstructured, which is the point:
    /// they exercise the blowup bound without geometric coincidences.
    pub fn random_with_mass(n: usize, p: f64, threshold: f64, rng: &mut RngStream) -> Result<Self> {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(Error::usage(format!(
                "mass threshold {threshold} outside (0, 1]"
            )));
        }
        let mut s = CubeSet::empty(n, p)?;
        let size = 1usize << n;
        let q = 1.0 - p;
        let mut mass = 0.0;
        while mass < threshold && s.members < size {
            let idx = rng.gen_range(0..size);
            if s.set_bit(idx) {
                let k = (idx as u64).count_ones() as i32;
                mass += p.powi(k) * q.powi(n as i32 - k);
            }
        }
        Ok(s)
    }

    fn set_bit(&mut self, idx: usize) -> bool {
        let w = &mut self.words[idx / 64];
        let bit = 1u64 << (idx % 64);
        if *w & bit == 0 {
            *w |= bit;
            self.members += 1;
            true
        } else {
            false
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn len(&self) -> usize {
        self.members
    }

    pub fn is_empty(&self) -> bool {
        self.members == 0
    }

    pub fn contains(&self, idx: usize) -> bool {
        assert!(idx < (1usize << self.n), "point index outside the cube");
        self.words[idx / 64] >> (idx % 64) & 1 == 1
    }

    pub fn is_subset_of(&self, other: &CubeSet) -> bool {
        self.n == other.n && self.words.iter().zip(&other.words).all(|(&a, &b)| a & !b == 0)
    }

    /// Exact product measure of the set: sum over members of
    /// p^{ones} (1-p)^{zeros}, accumulated per popcount class. For p = 1/2
    /// every weight is a power of two and the result is exact.
    pub fn mass(&self) -> f64 {
        let mut counts = vec![0u64; self.n + 1];
        for (wi, &w) in self.words.iter().enumerate() {
            let mut bits = w;
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let idx = (wi * 64 + b) as u64;
                counts[idx.count_ones() as usize] += 1;
            }
        }
        let q = 1.0 - self.p;
        counts
            .iter()
            .enumerate()
            .map(|(k, &c)| c as f64 * self.p.powi(k as i32) * q.powi((self.n - k) as i32))
            .sum()
    }

    /// Union of the set with every point at Hamming distance <= radius,
    /// computed by `radius` rounds of one-bit-flip dilation.
    pub fn dilate_by(&self, radius: usize) -> CubeSet {
        let mut cur = self.clone();
        for _ in 0..radius.min(self.n) {
            if cur.members == 1usize << self.n {
                break;
            }
            cur = cur.dilate_once();
        }
        cur
    }

    fn dilate_once(&self) -> CubeSet {
        let mut out = self.words.clone();
        for k in 0..self.n.min(6) {
            let s = 1u32 << k;
            for (o, &w) in out.iter_mut().zip(&self.words) {
                *o |= (w & BIT_MASKS[k]) >> s | (w & !BIT_MASKS[k]) << s;
            }
        }
        for k in 6..self.n {
            let stride = 1usize << (k - 6);
            for wi in 0..out.len() {
                out[wi] |= self.words[wi ^ stride];
            }
        }
        let members = out.iter().map(|w| w.count_ones() as usize).sum();
        CubeSet {
            n: self.n,
            p: self.p,
            words: out,
            members,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BlowupReport {
    pub n: usize,
    pub p: f64,
    pub eps: f64,
    /// Hamming radius actually dilated: floor(eps * n).
    pub radius: usize,
    pub mass_s: f64,
    pub mass_s_eps: f64,
    /// 1 - 2 e^{-eps^2 n}; negative (hence vacuous) at small eps^2 n.
    pub bound: f64,
    pub holds: bool,
}

/// Exact check that a set of measure >= 0.9 blows up to measure
/// >= 1 - 2e^{-eps^2 n} within Hamming distance eps*n. Sets below the 0.9
/// hypothesis pass vacuously.
pub fn hamming_blowup_exact(s: &CubeSet, eps: f64) -> Result<BlowupReport> {
    if s.is_empty() {
        return Err(Error::usage("blowup of an empty set"));
    }
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::usage(format!("eps = {eps} must be finite and >= 0")));
    }
    let n = s.n();
    // Hamming distance is integral, so the eps*n threshold dilates by its
    // floor; the epsilon guard absorbs representation error in eps*n.
    let radius = (eps * n as f64 + 1e-9).floor() as usize;
    let mass_s = s.mass();
    let mass_s_eps = s.dilate_by(radius).mass();
    let bound = 1.0 - 2.0 * (-eps * eps * n as f64).exp();
    Ok(BlowupReport {
        n,
        p: s.p(),
        eps,
        radius,
        mass_s,
        mass_s_eps,
        bound,
        holds: mass_s < 0.9 || mass_s_eps >= bound,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BlowupViolation {
    pub set_index: usize,
    pub report: BlowupReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlowupSweep {
    pub sets: usize,
    pub checks: usize,
    pub violations: Vec<BlowupViolation>,
}

/// Runs [`hamming_blowup_exact`] over `n_sets` random sets of measure at
/// least `mass_floor`, at every eps in `eps_grid`. Sets are built and
/// checked in parallel, one derived stream per set, so the outcome does not
/// depend on thread count.
pub fn blowup_random_sweep(
    n: usize,
    p: f64,
    n_sets: usize,
    mass_floor: f64,
    eps_grid: &[f64],
    rng: &mut RngStream,
) -> Result<BlowupSweep> {
    if n_sets == 0 || eps_grid.is_empty() {
        return Err(Error::usage("need at least one set and one eps"));
    }
    let base = rng.clone();
    let per_set: Vec<Vec<BlowupViolation>> = (0..n_sets)
        .into_par_iter()
        .map(|i| -> Result<Vec<BlowupViolation>> {
            let mut sub = base.substream(i as u64);
            let s = CubeSet::random_with_mass(n, p, mass_floor, &mut sub)?;
            let mut bad = Vec::new();
            for &eps in eps_grid {
                let rep = hamming_blowup_exact(&s, eps)?;
                if !rep.holds {
                    bad.push(BlowupViolation {
                        set_index: i,
                        report: rep,
                    });
                }
            }
            Ok(bad)
        })
        .collect::<Result<_>>()?;
    Ok(BlowupSweep {
        sets: n_sets,
        checks: n_sets * eps_grid.len(),
        violations: per_set.into_iter().flatten().collect(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BinomialTailCheck {
    pub n: usize,
    pub p: f64,
    pub eps: f64,
    /// Smallest k with k/n >= p + eps; the tail sums from here.
    pub threshold: usize,
    pub exact_tail: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Exact lower-tail-bound check for the binomial: compares
/// P(S/n >= p + eps) against (1/sqrt(2n)) e^{-n eps^2 / (p(1-p))}.
///
/// The tail is summed term by term from ln-factorials, smallest terms
/// first, so it is accurate to roughly a unit of 1e-15 relative error.
pub fn binomial_anticoncentration_check(n: usize, p: f64, eps: f64) -> Result<BinomialTailCheck> {
    if n == 0 || n > 1000 {
        return Err(Error::usage(format!("n = {n} outside 1..=1000")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::usage(format!("p = {p} outside (0, 1)")));
    }
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::usage(format!("eps = {eps} must be finite and >= 0")));
    }
    if p + eps > 1.0 + 1e-12 {
        return Err(Error::usage(format!("p + eps = {} exceeds 1", p + eps)));
    }
    // ceil with a guard against n(p+eps) landing one ulp above an integer
    let threshold = ((n as f64 * (p + eps) - 1e-9).ceil().max(0.0) as usize).min(n);
    let exact_tail = if threshold == 0 {
        1.0
    } else {
        let mut lnfact = vec![0.0f64; n + 1];
        for i in 1..=n {
            lnfact[i] = lnfact[i - 1] + (i as f64).ln();
        }
        let (lp, lq) = (p.ln(), (1.0 - p).ln());
        // Terms shrink as k moves up past the mode, so summing from k = n
        // downward accumulates small to large; compensation mops up the rest.
        let mut sum = 0.0;
        let mut comp = 0.0;
        for k in (threshold..=n).rev() {
            let t = (lnfact[n] - lnfact[k] - lnfact[n - k]
                + k as f64 * lp
                + (n - k) as f64 * lq)
                .exp();
            let y = t - comp;
            let s = sum + y;
            comp = (s - sum) - y;
            sum = s;
        }
        sum.min(1.0)
    };
    let bound = (2.0 * n as f64).sqrt().recip() * (-(n as f64) * eps * eps / (p * (1.0 - p))).exp();
    Ok(BinomialTailCheck {
        n,
        p,
        eps,
        threshold,
        exact_tail,
        bound,
        holds: exact_tail >= bound,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BinomialSweep {
    pub checks: usize,
    pub violations: Vec<BinomialTailCheck>,
}

/// Sweeps [`binomial_anticoncentration_check`] over n = 1..=n_max,
/// p in {0.1, ..., 0.9} and eps in {0, 0.05, ...} with p + eps <= 1.
///
/// The claimed inequality is not true uniformly: at small n the integrality
/// of the tail threshold costs more than the 1/sqrt(2n) prefactor covers
/// (n = 4, p = 0.1, eps = 0 already fails: tail 0.3439 < bound 0.3536).
/// The sweep reports every such case rather than hiding them.
pub fn binomial_anticoncentration_sweep(n_max: usize) -> Result<BinomialSweep> {
    let mut checks = 0;
    let mut violations = Vec::new();
    for n in 1..=n_max {
        for pj in 1..=9u32 {
            let p = f64::from(pj) / 10.0;
            for ei in 0.. {
                let mut eps = f64::from(ei) * 0.05;
                if p + eps > 1.0 + 1e-9 {
                    break;
                }
                if p + eps > 1.0 {
                    eps = 1.0 - p;
                }
                let rep = binomial_anticoncentration_check(n, p, eps)?;
                checks += 1;
                if !rep.holds {
                    violations.push(rep);
                }
            }
        }
    }
    Ok(BinomialSweep { checks, violations })
}

#[derive(Debug, Clone, Serialize)]
pub struct FailureRateRow {
    pub n: usize,
    pub trials: usize,
    pub failures: usize,
    pub rate: f64,
    /// Error radius counted as success at this n:
    /// mult * (sqrt(trace/n) + sqrt(op_norm * eps)).
    pub envelope: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReductionReport {
    pub estimator: String,
    pub eps: f64,
    pub envelope_mult: f64,
    pub rows: Vec<FailureRateRow>,
    /// Least-squares slope of ln(max(rate, 1/(2 trials))) against n; the
    /// floor keeps empty cells finite without changing the sign story.
    pub slope: f64,
    /// 95% percentile bootstrap interval for the slope (binomial resampling
    /// of each row's failure count).
    pub slope_ci: (f64, f64),
    /// Whole bootstrap interval below zero.
    pub decays: bool,
}

const BOOTSTRAP_REPS: usize = 1000;

/// Measures how fast an estimator's failure probability falls with n on
/// clean heavy-tailed data.
///
/// For each n in `n_grid`, draws `trials` fresh samples, runs the estimator,
/// and counts how often the error leaves the envelope
/// `envelope_mult * (sqrt(trace/n) + sqrt(op_norm * eps))`. A corruption-robust
/// estimator should show failure rates decaying exponentially in n; the
/// fitted log-rate slope and its bootstrap interval quantify that. Trials
/// run in parallel on derived streams, so the report is reproducible.
pub fn high_prob_from_robust(
    estimator_id: &str,
    sample: &CleanSampleSpec,
    eps: f64,
    n_grid: &[usize],
    trials: usize,
    envelope_mult: f64,
    rng: &mut RngStream,
) -> Result<ReductionReport> {
    let estimator = EstimatorKind::parse(estimator_id)?;
    if n_grid.len() < 2 || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::usage(
            "n_grid must be strictly increasing with at least two sizes",
        ));
    }
    if trials == 0 {
        return Err(Error::usage("trials must be positive"));
    }
    if !(envelope_mult > 0.0) || !envelope_mult.is_finite() {
        return Err(Error::usage(format!(
            "envelope multiplier {envelope_mult} must be positive"
        )));
    }
    if !(0.0..0.5).contains(&eps) {
        return Err(Error::usage(format!("eps = {eps} outside [0, 1/2)")));
    }
    let moments = sample.population_moments()?;
    let base = rng.clone();
    let mut rows = Vec::with_capacity(n_grid.len());
    for (row_idx, &n) in n_grid.iter().enumerate() {
        let spec_n = CleanSampleSpec {
            n,
            ..sample.clone()
        };
        let envelope = envelope_mult
            * ((moments.trace / n as f64).sqrt() + (moments.op_norm * eps).sqrt());
        let fails: Vec<usize> = (0..trials)
            .into_par_iter()
            .map(|t| -> Result<usize> {
                let mut sub = base.substream(row_idx as u64 * trials as u64 + t as u64);
                let x = sample_clean(&spec_n, &mut sub)?;
                let est = estimator.estimate(&x, eps, None, &mut sub)?;
                let err: f64 = est
                    .iter()
                    .zip(&moments.mean)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                Ok(usize::from(err > envelope))
            })
            .collect::<Result<_>>()?;
        let failures: usize = fails.iter().sum();
        rows.push(FailureRateRow {
            n,
            trials,
            failures,
            rate: failures as f64 / trials as f64,
            envelope,
        });
    }
    let floor = 0.5 / trials as f64;
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.rate.max(floor).ln()).collect();
    let slope = ls_slope(&xs, &ys);
    let mut boot = rng.substream(u64::MAX);
    let mut slopes: Vec<f64> = (0..BOOTSTRAP_REPS)
        .map(|_| {
            let ys_b: Vec<f64> = rows
                .iter()
                .map(|r| {
                    let draw = Binomial::new(r.trials as u64, r.rate)
                        .expect("rate is a probability")
                        .sample(&mut boot);
                    (draw as f64 / r.trials as f64).max(floor).ln()
                })
                .collect();
            ls_slope(&xs, &ys_b)
        })
        .collect();
    slopes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = slopes[(BOOTSTRAP_REPS as f64 * 0.025).ceil() as usize - 1];
    let hi = slopes[(BOOTSTRAP_REPS as f64 * 0.975).ceil() as usize - 1];
    Ok(ReductionReport {
        estimator: estimator.label(),
        eps,
        envelope_mult,
        rows,
        slope,
        slope_ci: (lo, hi),
        decays: hi < 0.0,
    })
}

// Simple least squares; callers guarantee at least two distinct abscissae.
fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|&x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(&x, &y)| (x - xbar) * (y - ybar)).sum();
    sxy / sxx
}

//! Capped probability simplices.
//!
//! W_rho is the set of weight vectors with 0 <= w_i <= 1/((1-rho)n) and
//! sum w_i = 1: probability vectors that cannot concentrate more than a
//! 1/(1-rho) factor above uniform on any coordinate. They model "soft
//! deletion" of up to a rho fraction of the sample. Linear functions are
//! minimized over W_rho exactly by a greedy water-filling argument, which is
//! the inner oracle for everything spectral in this crate.

use crate::error::{Error, Result};
use crate::rng::RngStream;
use serde::{Deserialize, Serialize};

const SUM_TOL: f64 = 1e-10;
const CAP_TOL: f64 = 1e-12;

/// Element of W_rho. Construction validates membership; the vector is
/// immutable afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CappedWeights {
    w: Vec<f64>,
    rho: f64,
}

impl CappedWeights {
    pub fn new(w: Vec<f64>, rho: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::usage(format!("rho = {rho} outside [0, 1)")));
        }
        if w.is_empty() {
            return Err(Error::usage("weight vector must be non-empty"));
        }
        let cap = cap_for(w.len(), rho);
        let mut sum = 0.0;
        for (i, &wi) in w.iter().enumerate() {
            if !wi.is_finite() || wi < -CAP_TOL || wi > cap + CAP_TOL {
                return Err(Error::usage(format!(
                    "weight w[{i}] = {wi} outside [0, {cap}] for rho = {rho}"
                )));
            }
            sum += wi;
        }
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::usage(format!(
                "weights sum to {sum}, expected 1 within {SUM_TOL}"
            )));
        }
        Ok(CappedWeights { w, rho })
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn cap(&self) -> f64 {
        cap_for(self.w.len(), self.rho)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn get(&self, i: usize) -> f64 {
        self.w[i]
    }
}

pub fn cap_for(n: usize, rho: f64) -> f64 {
    1.0 / ((1.0 - rho) * n as f64)
}

/// Uniform weights 1/n, valid in every W_rho.
pub fn uniform_weights(n: usize, rho: f64) -> Result<CappedWeights> {
    if n == 0 {
        return Err(Error::usage("n must be positive"));
    }
    if !(0.0..=0.5).contains(&rho) {
        return Err(Error::usage(format!("rho = {rho} outside [0, 1/2]")));
    }
    CappedWeights::new(vec![1.0 / n as f64; n], rho)
}

#[derive(Debug, Clone)]
pub struct LinearMinimizer {
    pub value: f64,
    pub weights: CappedWeights,
}

/// Exact minimizer of sum_i w_i a_i over W_rho: put the cap on the
/// floor((1-rho) n) smallest entries and the leftover mass on the next one.
/// Sorting ties break by original index, so the minimizer is unique and
/// deterministic even with repeated objective values.
pub fn min_linear_over_capped_simplex(objective: &[f64], rho: f64) -> Result<LinearMinimizer> {
    let n = objective.len();
    if n == 0 {
        return Err(Error::usage("objective must be non-empty"));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::usage(format!("rho = {rho} outside [0, 1)")));
    }
    if let Some(bad) = objective.iter().find(|v| !v.is_finite()) {
        return Err(Error::usage(format!("non-finite objective entry {bad}")));
    }
    let cap = cap_for(n, rho);
    // floor with slack: (1-rho)*n can land epsilon below an integer.
    let k = (((1.0 - rho) * n as f64) + 1e-9).floor() as usize;
    let k = k.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| objective[i].partial_cmp(&objective[j]).unwrap());
    let mut w = vec![0.0; n];
    for &i in &order[..k] {
        w[i] = cap;
    }
    let rem = 1.0 - cap * k as f64;
    if rem > 1e-15 && k < n {
        w[order[k]] = rem;
    }
    // Renormalize away the last-ulp drift so membership always validates.
    let sum: f64 = w.iter().sum();
    for wi in &mut w {
        *wi /= sum;
    }
    let value = w
        .iter()
        .zip(objective)
        .map(|(&wi, &ai)| wi * ai)
        .sum::<f64>();
    Ok(LinearMinimizer {
        value,
        weights: CappedWeights::new(w, rho)?,
    })
}

/// Value-only variant of [`min_linear_over_capped_simplex`] for hot loops:
/// no weight vector is materialized and the caller-owned `order` buffer is
/// reused across calls. Stable sort keeps the by-index tie-break and runs
/// near-linearly when consecutive objectives differ little.
pub(crate) fn min_linear_value(objective: &[f64], rho: f64, order: &mut Vec<usize>) -> f64 {
    let n = objective.len();
    debug_assert!(n > 0 && (0.0..1.0).contains(&rho));
    let cap = cap_for(n, rho);
    let k = ((((1.0 - rho) * n as f64) + 1e-9).floor() as usize).min(n);
    if order.len() != n {
        order.clear();
        order.extend(0..n);
    }
    order.sort_by(|&i, &j| objective[i].partial_cmp(&objective[j]).unwrap());
    let mut acc = 0.0;
    for &i in &order[..k] {
        acc += objective[i];
    }
    let mut val = cap * acc;
    let mut total = cap * k as f64;
    let rem = 1.0 - total;
    if rem > 1e-15 && k < n {
        val += rem * objective[order[k]];
        total += rem;
    }
    val / total
}

/// Total variation distance between two weight vectors of equal length:
/// sum_i max(w_i, w'_i) - 1.
pub fn tv_distance(w: &CappedWeights, w2: &CappedWeights) -> Result<f64> {
    if w.len() != w2.len() {
        return Err(Error::usage(format!(
            "weight lengths differ: {} vs {}",
            w.len(),
            w2.len()
        )));
    }
    let s: f64 = w
        .as_slice()
        .iter()
        .zip(w2.as_slice())
        .map(|(&a, &b)| a.max(b))
        .sum();
    Ok((s - 1.0).max(0.0))
}

#[derive(Debug, Clone, Serialize)]
pub struct MeanProximityReport {
    pub mu: f64,
    pub mu_alt: f64,
    pub sigma: f64,
    pub sigma_alt: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Checks that two weighted means of the same scalar sample are within
/// 2 sqrt(rho) (sigma + sigma_alt) of each other, where each sigma is the
/// weighted standard deviation about its own mean. Requires both weight
/// vectors to share rho <= 1/4.
pub fn mean_proximity_bound_check(
    y: &[f64],
    w: &CappedWeights,
    w2: &CappedWeights,
) -> Result<MeanProximityReport> {
    if y.len() != w.len() || y.len() != w2.len() {
        return Err(Error::usage(format!(
            "sample length {} does not match weight lengths {} / {}",
            y.len(),
            w.len(),
            w2.len()
        )));
    }
    if (w.rho() - w2.rho()).abs() > 1e-12 {
        return Err(Error::usage(format!(
            "weight vectors use different rho: {} vs {}",
            w.rho(),
            w2.rho()
        )));
    }
    let rho = w.rho();
    if rho > 0.25 + 1e-12 {
        return Err(Error::usage(format!("rho = {rho} exceeds 1/4")));
    }
    let stats = |ws: &CappedWeights| {
        let mu: f64 = ws.as_slice().iter().zip(y).map(|(&wi, &yi)| wi * yi).sum();
        let var: f64 = ws
            .as_slice()
            .iter()
            .zip(y)
            .map(|(&wi, &yi)| wi * (yi - mu) * (yi - mu))
            .sum();
        (mu, var.max(0.0).sqrt())
    };
    let (mu, sigma) = stats(w);
    let (mu_alt, sigma_alt) = stats(w2);
    let bound = 2.0 * rho.sqrt() * (sigma + sigma_alt);
    Ok(MeanProximityReport {
        mu,
        mu_alt,
        sigma,
        sigma_alt,
        bound,
        holds: (mu - mu_alt).abs() <= bound + 1e-9,
    })
}

/// Normalizes and projects onto the capped simplex by exact proportional
/// water-filling: the result is min(cap, t * w_i / sum(w)) for the unique
/// t >= 1 restoring total mass 1, found in closed form from the descending
/// order of w. Two degenerate corners are completed deterministically: when
/// the positive support cannot carry full mass even at the cap, the
/// remainder spreads uniformly over the zero entries; when the input has no
/// mass at all, the output is uniform.
pub(crate) fn recap_in_place(w: &mut [f64], cap: f64) {
    let n = w.len();
    debug_assert!(cap * n as f64 >= 1.0 - 1e-9, "cap too small to be feasible");
    for wi in w.iter_mut() {
        if !(*wi > 0.0) {
            *wi = 0.0;
        }
    }
    let sum: f64 = w.iter().sum();
    if !(sum > 0.0) || !sum.is_finite() {
        w.fill(1.0 / n as f64);
        return;
    }
    w.iter_mut().for_each(|x| *x /= sum);
    if w.iter().all(|&x| x <= cap) {
        return;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| w[j].partial_cmp(&w[i]).unwrap());
    // j = number of entries pinned at the cap, scanned in descending order.
    let mut prefix: f64 = 0.0;
    for j in 0..=n {
        let budget = 1.0 - cap * j as f64;
        if budget <= 0.0 {
            // j caps already reach full mass; equalize them exactly
            // (1/j <= cap because j * cap >= 1).
            for (r, &i) in idx.iter().enumerate() {
                w[i] = if r < j { 1.0 / j as f64 } else { 0.0 };
            }
            return;
        }
        let rest = (1.0 - prefix).max(0.0);
        if j == n || w[idx[j]] <= 0.0 || rest <= 0.0 {
            // Positive support exhausted: uniform top-up of the remainder,
            // which fits under the cap because n * cap >= 1.
            let z = n - j;
            if z == 0 {
                w.iter_mut().for_each(|x| *x = cap);
                return;
            }
            let add = budget / z as f64;
            for (r, &i) in idx.iter().enumerate() {
                w[i] = if r < j { cap } else { add };
            }
            return;
        }
        let t = budget / rest;
        let boundary_ok = j == 0 || t * w[idx[j - 1]] >= cap * (1.0 - 1e-12);
        let interior_ok = t * w[idx[j]] <= cap * (1.0 + 1e-12);
        if boundary_ok && interior_ok {
            for (r, &i) in idx.iter().enumerate() {
                if r < j {
                    w[i] = cap;
                } else {
                    w[i] *= t;
                }
            }
            return;
        }
        prefix += w[idx[j]];
    }
    // Unreachable: the scan above always returns by j = n.
    w.fill(1.0 / n as f64);
}

/// Random element of W_rho: i.i.d. exponential mass, normalized, then
/// re-capped. Used by diagnostics and property sweeps.
pub fn sample_capped_weights(n: usize, rho: f64, rng: &mut RngStream) -> Result<CappedWeights> {
    if n == 0 {
        return Err(Error::usage("n must be positive"));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::usage(format!("rho = {rho} outside [0, 1)")));
    }
    use rand::Rng;
    let mut w: Vec<f64> = (0..n)
        .map(|_| -(1.0 - rng.gen::<f64>()).ln())
        .collect();
    recap_in_place(&mut w, cap_for(n, rho));
    CappedWeights::new(w, rho)
}

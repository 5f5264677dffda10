//! Quantile-weighted spread and the two-stage sub-Gaussian estimator.
//!
//! The estimator runs in two stages. Stage one solves the capped-simplex
//! spectral program to get a preliminary center mu_tilde. Stage two measures
//! the one-dimensional spread of the projections along every direction,
//! down-weighting order-statistic ranks near the edges exponentially, finds
//! the direction of maximum spread, and nudges the center along it by
//! s * sqrt(eps) * sigma_v with a caller-chosen sign s. The nudge converts
//! the preliminary estimate's deviation into a certified sub-Gaussian one:
//! either sign works for the guarantee, which is why s is an input.

use crate::dataset::{dot, norm, Dataset, UnitDirection};
use crate::direction::{multi_start_search, DirectionSearchConfig, SphereObjective};
use crate::error::{Error, Result};
use crate::matrix::{sym_eigen, wsecond_moment_slice};
use crate::rng::RngStream;
use crate::stability::solve_rob_sdp;
use crate::weights::CappedWeights;
use serde::Serialize;

/// Rank weights for the spread functional: rank i (1-indexed, from either
/// edge) carries unnormalized weight exp(-m / min(i, n+1-i)). Ranks near the
/// edges are suppressed exponentially in m, the middle half never falls
/// below exp(-4m/n).
#[derive(Debug, Clone, Serialize)]
pub struct TailWeightProfile {
    pub n: usize,
    /// Down-weighting strength; the estimator uses m = n * eps.
    pub m: f64,
    /// Unnormalized weights, symmetric under rank reversal.
    pub wtilde: Vec<f64>,
    /// wtilde normalized to sum 1.
    pub w: Vec<f64>,
}

pub fn quantile_weights(n: usize, m: f64) -> Result<TailWeightProfile> {
    if n == 0 {
        return Err(Error::usage("n must be positive"));
    }
    if !(m >= 0.0) || !m.is_finite() {
        return Err(Error::usage(format!("m = {m} must be finite and >= 0")));
    }
    let wtilde: Vec<f64> = (1..=n)
        .map(|i| (-m / (i.min(n + 1 - i) as f64)).exp())
        .collect();
    let sum: f64 = wtilde.iter().sum();
    let w = wtilde.iter().map(|&v| v / sum).collect();
    Ok(TailWeightProfile { n, m, wtilde, w })
}

/// Weighted root-mean-square deviation of the order statistics of `y` from
/// `center`, under [`quantile_weights`]. Down-weighting by rank means the
/// value is NOT monotone in m for arbitrary centers; it is non-increasing in
/// m whenever `center` lies between the two middle order statistics (rank
/// pairs then bracket the center, so deviations decrease toward the middle
/// while growing m shifts weight the same way).
pub fn spread(y: &[f64], center: f64, m: f64) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::usage("spread of an empty sample"));
    }
    if let Some(bad) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::usage(format!("non-finite sample entry {bad}")));
    }
    if !center.is_finite() {
        return Err(Error::usage(format!("non-finite center {center}")));
    }
    let profile = quantile_weights(y.len(), m)?;
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut acc = 0.0;
    for (&wi, &yi) in profile.w.iter().zip(&sorted) {
        let d = yi - center;
        acc += wi * d * d;
    }
    Ok(acc.sqrt())
}

/// Canonical sign representative of {v, -v}: zero stays zero, otherwise the
/// first nonzero coordinate is made positive. The zero test is exact, so
/// -0.0 entries are skipped like +0.0.
pub fn comparison(v: &[f64]) -> Vec<f64> {
    match v.iter().find(|&&x| x != 0.0) {
        None => v.to_vec(),
        Some(&first) => {
            if first > 0.0 {
                v.to_vec()
            } else {
                v.iter().map(|&x| -x).collect()
            }
        }
    }
}

struct SpreadObjective<'a> {
    x: &'a Dataset,
    mu: &'a [f64],
    /// Normalized quantile weights by rank.
    w: Vec<f64>,
    proj: Vec<f64>,
    keys: Vec<f64>,
    /// Persistent permutation: consecutive evaluations along an ascent path
    /// keep it nearly sorted, so the stable sort runs near-linearly.
    order: Vec<usize>,
    /// Point of the last `eval`, with its value; lets `gradient` skip the
    /// projection and sort when asked at that exact point.
    last_u: Vec<f64>,
    last_raw: f64,
}

fn spread_of_keys(w: &[f64], keys: &[f64], order: &mut Vec<usize>, center: f64) -> f64 {
    if order.len() != keys.len() {
        order.clear();
        order.extend(0..keys.len());
    }
    order.sort_by(|&i, &j| keys[i].partial_cmp(&keys[j]).unwrap());
    let mut acc = 0.0;
    for (&wi, &i) in w.iter().zip(order.iter()) {
        let d = keys[i] - center;
        acc += wi * d * d;
    }
    acc.sqrt()
}

impl SphereObjective for SpreadObjective<'_> {
    fn dim(&self) -> usize {
        self.x.d()
    }

    fn eval(&mut self, u: &[f64]) -> f64 {
        self.x.project_into(u, &mut self.proj);
        let c = dot(self.mu, u);
        let raw = spread_of_keys(&self.w, &self.proj, &mut self.order, c);
        self.last_u.clear();
        self.last_u.extend_from_slice(u);
        self.last_raw = raw;
        raw
    }

    /// Exact gradient of raw(u)/||u||. With ranks frozen at u's sort order,
    /// raw^2 = sum_i w_{rank(i)} (key_i - c)^2 is smooth in u and
    /// grad raw = (1/raw) sum_i w_{rank(i)} (key_i - c) (x_i - mu). Rank ties
    /// pick one valid subgradient, which is all the ascent needs. The ascent
    /// loop always asks at the point it last evaluated, so the projections
    /// and sort are normally reused; any other caller gets a fresh pass.
    fn gradient(&mut self, u: &[f64], _fu: f64, _h: f64, out: &mut Vec<f64>) {
        let d = u.len();
        let n = self.x.n();
        let c = dot(self.mu, u);
        let raw = if self.last_u == u {
            self.last_raw
        } else {
            self.x.project_into(u, &mut self.proj);
            let raw = spread_of_keys(&self.w, &self.proj, &mut self.order, c);
            self.last_u.clear();
            self.last_u.extend_from_slice(u);
            self.last_raw = raw;
            raw
        };
        out.clear();
        out.resize(d, 0.0);
        if raw <= 0.0 {
            return;
        }
        // a_i = w_{rank(i)} (key_i - c); grad raw = (sum_i a_i x_i - (sum_i a_i) mu) / raw.
        self.keys.resize(n, 0.0);
        let mut a_sum = 0.0;
        for (&wr, &i) in self.w.iter().zip(self.order.iter()) {
            let a = wr * (self.proj[i] - c);
            self.keys[i] = a;
            a_sum += a;
        }
        let flat = self.x.as_flat();
        for (i, row) in flat.chunks_exact(d).enumerate() {
            let a = self.keys[i];
            if a != 0.0 {
                for (o, &xk) in out.iter_mut().zip(row) {
                    *o += a * xk;
                }
            }
        }
        let nrm_sq = dot(u, u);
        let nrm = nrm_sq.sqrt();
        // grad (raw/||u||) = grad raw / ||u|| - raw u / ||u||^3.
        let radial = raw / (nrm_sq * nrm);
        for ((o, &mk), &uk) in out.iter_mut().zip(self.mu).zip(u) {
            *o = (*o - a_sum * mk) / (raw * nrm) - radial * uk;
        }
    }
}

/// Direction maximizing the quantile-weighted spread of the projections
/// about the projected center. Candidates: top-3 eigenvectors of the
/// centered second moment under uniform weights and (when given) under
/// `weights`, plus random restarts; each is refined by sphere ascent. The
/// returned sigma is exactly the spread along the returned direction, hence
/// a valid lower bound on the true maximum.
pub fn max_spread_direction(
    x: &Dataset,
    mu_tilde: &[f64],
    m: f64,
    weights: Option<&CappedWeights>,
    search: &DirectionSearchConfig,
    rng: &mut RngStream,
) -> Result<(UnitDirection, f64)> {
    if mu_tilde.len() != x.d() {
        return Err(Error::usage(format!(
            "center has {} coordinates, expected {}",
            mu_tilde.len(),
            x.d()
        )));
    }
    if let Some(w) = weights {
        if w.len() != x.n() {
            return Err(Error::usage(format!(
                "weights have length {}, expected {}",
                w.len(),
                x.n()
            )));
        }
    }
    let n = x.n();
    let profile = quantile_weights(n, m)?;
    let mut obj = SpreadObjective {
        x,
        mu: mu_tilde,
        w: profile.w,
        proj: Vec::with_capacity(n),
        keys: Vec::new(),
        order: Vec::new(),
        last_u: Vec::new(),
        last_raw: 0.0,
    };
    let mut candidates: Vec<Vec<f64>> = Vec::new();
    let uniform = vec![1.0 / n as f64; n];
    for (lam, v) in sym_eigen(&wsecond_moment_slice(x, &uniform, mu_tilde))
        .into_iter()
        .take(3)
    {
        if lam.is_finite() && norm(&v) > 0.0 {
            candidates.push(v);
        }
    }
    if let Some(w) = weights {
        for (lam, v) in sym_eigen(&wsecond_moment_slice(x, w.as_slice(), mu_tilde))
            .into_iter()
            .take(3)
        {
            if lam.is_finite() && norm(&v) > 0.0 {
                candidates.push(v);
            }
        }
    }
    let (u, sigma) = multi_start_search(&mut obj, &candidates, search, rng);
    Ok((UnitDirection::normalized(&u)?, sigma))
}

/// Full trace of one estimator run.
#[derive(Debug, Clone, Serialize)]
pub struct SubGaussianEstimate {
    /// Stage-one center (weighted mean of the spectral program solution).
    pub mu_tilde: Vec<f64>,
    /// Canonicalized max-spread direction.
    pub v: UnitDirection,
    /// Spread along `v`.
    pub sigma_v: f64,
    /// log(4/delta) / n.
    pub eps: f64,
    /// Perturbation sign, +1 or -1.
    pub s: i8,
    /// mu_tilde + s * sqrt(eps) * sigma_v * v.
    pub mu_hat: Vec<f64>,
}

/// Two-stage sub-Gaussian mean estimate at confidence delta in (0, 1/4]:
/// spectral-program center, then a max-spread nudge of magnitude
/// sqrt(eps) * sigma_v with sign `s`. Deterministic given (X, delta, s) and
/// the stream state.
pub fn subg_estimate(
    x: &Dataset,
    delta: f64,
    s: i8,
    rng: &mut RngStream,
) -> Result<SubGaussianEstimate> {
    if !(delta > 0.0 && delta <= 0.25) {
        return Err(Error::usage(format!("delta = {delta} outside (0, 1/4]")));
    }
    if s != 1 && s != -1 {
        return Err(Error::usage(format!("s = {s} must be +1 or -1")));
    }
    let n = x.n();
    let eps = (4.0 / delta).ln() / n as f64;
    if eps >= 0.5 {
        return Err(Error::usage(format!(
            "delta = {delta} too small for n = {n}: eps = {eps} >= 1/2"
        )));
    }
    let sol = solve_rob_sdp(x, eps, 1e-6, None, rng)?;
    let m = n as f64 * eps;
    let (v_raw, sigma_v) = max_spread_direction(
        x,
        &sol.center,
        m,
        Some(&sol.weights),
        &DirectionSearchConfig::default(),
        rng,
    )?;
    // Spread is even in the direction (symmetric rank weights), so
    // canonicalizing the sign leaves sigma_v valid.
    let v = UnitDirection::new(comparison(v_raw.as_slice()))?;
    let scale = f64::from(s) * eps.sqrt() * sigma_v;
    let mu_hat: Vec<f64> = sol
        .center
        .iter()
        .zip(v.as_slice())
        .map(|(&mk, &vk)| mk + scale * vk)
        .collect();
    Ok(SubGaussianEstimate {
        mu_tilde: sol.center,
        v,
        sigma_v,
        eps,
        s,
        mu_hat,
    })
}

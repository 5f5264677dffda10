//! Direction search on the unit sphere.
//!
//! Both directional objectives in this crate (quantile-weighted spread and
//! the capped inner minimum of squared projections) are even, non-concave
//! functions of a unit vector, so they are maximized by multi-start local
//! ascent: a handful of spectral candidate directions plus random restarts,
//! each refined by projected finite-difference ascent until stall. The
//! search never reports anything it did not evaluate exactly, so the result
//! is always a valid lower bound on the true maximum.

use crate::dataset::{dot, norm};
use crate::rng::RngStream;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirectionSearchConfig {
    /// Random unit-vector restarts appended to the candidate list.
    pub restarts: usize,
    /// Hard cap on ascent steps per candidate; stall usually ends earlier.
    pub max_ascent_steps: usize,
    /// Finite-difference probe length for the sphere gradient.
    pub fd_step: f64,
    /// Extra exact sweep over this many angles (d = 2 only, 0 disables).
    pub angular_grid: usize,
}

impl Default for DirectionSearchConfig {
    fn default() -> Self {
        DirectionSearchConfig {
            restarts: 4,
            max_ascent_steps: 200,
            fd_step: 1e-4,
            angular_grid: 0,
        }
    }
}

pub(crate) trait SphereObjective {
    fn dim(&self) -> usize;
    fn eval(&mut self, u: &[f64]) -> f64;

    /// Gradient at unit `u` of the normalized objective g(u) = eval(u/|u|),
    /// given the value `fu` there. The default probes normalized coordinate
    /// perturbations of length `h`; implementations with cheap exact
    /// gradients should override it (the caller projects out any radial
    /// component, so the override may skip that correction).
    fn gradient(&mut self, u: &[f64], fu: f64, h: f64, out: &mut Vec<f64>) {
        let d = u.len();
        out.clear();
        let mut probe = vec![0.0; d];
        for k in 0..d {
            probe.copy_from_slice(u);
            probe[k] += h;
            let nrm = norm(&probe);
            probe.iter_mut().for_each(|x| *x /= nrm);
            out.push((self.eval(&probe) - fu) / h);
        }
    }
}

/// Projected gradient ascent on the sphere from `start`, with a warm-started
/// backtracking step size. Stops on gradient stall, step-size collapse, or
/// the step cap. All accept/reject decisions compare objective ratios, so
/// the trajectory is invariant under positive rescaling of the objective.
pub(crate) fn ascend(
    obj: &mut impl SphereObjective,
    start: &[f64],
    cfg: &DirectionSearchConfig,
) -> (Vec<f64>, f64) {
    let d = start.len();
    let mut u = start.to_vec();
    let nrm = norm(&u);
    debug_assert!(nrm > 0.0);
    u.iter_mut().for_each(|x| *x /= nrm);
    let mut fu = obj.eval(&u);
    if d == 1 {
        // The sphere is {+1, -1} and every objective here is even.
        return (u, fu);
    }
    let mut g: Vec<f64> = Vec::with_capacity(d);
    let mut step = 0.1;
    let mut cand = vec![0.0; d];
    for _ in 0..cfg.max_ascent_steps {
        obj.gradient(&u, fu, cfg.fd_step, &mut g);
        let gu = dot(&g, &u);
        for (gk, &uk) in g.iter_mut().zip(&u) {
            *gk -= gu * uk;
        }
        let gn = norm(&g);
        if gn <= 1e-13 * fu.abs().max(1e-300) {
            break;
        }
        let mut improved = false;
        while step >= 1e-7 {
            for ((c, &uk), &gk) in cand.iter_mut().zip(&u).zip(&g) {
                *c = uk + step * gk / gn;
            }
            let cn = norm(&cand);
            cand.iter_mut().for_each(|x| *x /= cn);
            let fc = obj.eval(&cand);
            if fc > fu * (1.0 + 1e-12) {
                u.copy_from_slice(&cand);
                fu = fc;
                step = (step * 1.5).min(0.5);
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (u, fu)
}

/// Runs [`ascend`] from every candidate plus `cfg.restarts` random unit
/// starts and returns the best direction with its exact objective value.
pub(crate) fn multi_start_search(
    obj: &mut impl SphereObjective,
    candidates: &[Vec<f64>],
    cfg: &DirectionSearchConfig,
    rng: &mut RngStream,
) -> (Vec<f64>, f64) {
    let d = obj.dim();
    let mut best_u: Option<Vec<f64>> = None;
    let mut best_f = f64::NEG_INFINITY;
    let consider = |u: &[f64], f: f64, best_u: &mut Option<Vec<f64>>, best_f: &mut f64| {
        if f > *best_f {
            *best_f = f;
            *best_u = Some(u.to_vec());
        }
    };
    for c in candidates {
        if norm(c) == 0.0 {
            continue;
        }
        let (u, f) = ascend(obj, c, cfg);
        consider(&u, f, &mut best_u, &mut best_f);
    }
    for _ in 0..cfg.restarts {
        let start = random_unit(d, rng);
        let (u, f) = ascend(obj, &start, cfg);
        consider(&u, f, &mut best_u, &mut best_f);
    }
    if best_u.is_none() {
        // No usable candidate; fall back to the first axis.
        let mut e = vec![0.0; d];
        e[0] = 1.0;
        let f = obj.eval(&e);
        return (e, f);
    }
    (best_u.unwrap(), best_f)
}

pub(crate) fn random_unit(d: usize, rng: &mut RngStream) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

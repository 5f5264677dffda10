//! Dense symmetric matrices and the spectral primitives built on them.
//!
//! Dimensions here are desk-scale (d up to a few dozen), so everything is
//! plain dense arithmetic: weighted first and second moments, a power
//! iteration for the top eigenpair, and a cyclic Jacobi eigensolver for the
//! occasional full decomposition (covariance factors, candidate directions).

use crate::dataset::{dot, norm, Dataset, UnitDirection};
use crate::error::{Error, Result};
use crate::weights::CappedWeights;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricMatrix {
    d: usize,
    // Row-major d*d buffer, kept exactly symmetric.
    a: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(d: usize) -> Self {
        SymmetricMatrix {
            d,
            a: vec![0.0; d * d],
        }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = SymmetricMatrix::zeros(d);
        for i in 0..d {
            m.a[i * d + i] = 1.0;
        }
        m
    }

    /// Validates symmetry within an absolute tolerance scaled by the largest
    /// entry, then stores the exactly symmetrized average.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if d == 0 || rows.iter().any(|r| r.len() != d) {
            return Err(Error::usage("matrix must be square and non-empty"));
        }
        let scale = rows
            .iter()
            .flatten()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
            .max(1.0);
        let mut a = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let (x, y) = (rows[i][j], rows[j][i]);
                if !x.is_finite() {
                    return Err(Error::usage(format!("non-finite entry at ({i},{j})")));
                }
                if (x - y).abs() > 1e-9 * scale {
                    return Err(Error::usage(format!(
                        "asymmetric entries at ({i},{j}): {x} vs {y}"
                    )));
                }
                a[i * d + j] = 0.5 * (x + y);
            }
        }
        Ok(SymmetricMatrix { d, a })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.d + j]
    }

    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.d + j] = v;
        self.a[j * self.d + i] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.d).map(|i| self.a[i * self.d + i]).sum()
    }

    pub fn matvec_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.d);
        debug_assert_eq!(out.len(), self.d);
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(&self.a[i * self.d..(i + 1) * self.d], v);
        }
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        self.matvec_into(v, &mut out);
        out
    }

    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        dot(&self.matvec(v), v)
    }

    /// self += c * v v^T
    pub fn add_scaled_outer(&mut self, c: f64, v: &[f64]) {
        debug_assert_eq!(v.len(), self.d);
        for i in 0..self.d {
            let cvi = c * v[i];
            for j in 0..self.d {
                self.a[i * self.d + j] += cvi * v[j];
            }
        }
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.a {
            *v *= c;
        }
    }
}

/// Mean under explicit weights; `w` must already be a valid capped simplex
/// element, which guarantees the weights sum to 1 within 1e-10.
pub fn weighted_mean(x: &Dataset, w: &CappedWeights) -> Result<Vec<f64>> {
    if w.len() != x.n() {
        return Err(Error::usage(format!(
            "weight length {} does not match n = {}",
            w.len(),
            x.n()
        )));
    }
    Ok(wmean_slice(x, w.as_slice()))
}

pub(crate) fn wmean_slice(x: &Dataset, w: &[f64]) -> Vec<f64> {
    let mut mu = vec![0.0; x.d()];
    for (p, &wi) in x.points().zip(w) {
        for (m, &v) in mu.iter_mut().zip(p) {
            *m += wi * v;
        }
    }
    mu
}

/// Weighted second moment about `center`: sum_i w_i (x_i - c)(x_i - c)^T.
/// Positive semidefinite by construction.
pub fn weighted_second_moment(
    x: &Dataset,
    w: &CappedWeights,
    center: &[f64],
) -> Result<SymmetricMatrix> {
    if w.len() != x.n() {
        return Err(Error::usage(format!(
            "weight length {} does not match n = {}",
            w.len(),
            x.n()
        )));
    }
    if center.len() != x.d() {
        return Err(Error::usage(format!(
            "center has {} coordinates, expected {}",
            center.len(),
            x.d()
        )));
    }
    Ok(wsecond_moment_slice(x, w.as_slice(), center))
}

pub(crate) fn wsecond_moment_slice(x: &Dataset, w: &[f64], center: &[f64]) -> SymmetricMatrix {
    let d = x.d();
    let mut upper = vec![0.0; d * (d + 1) / 2];
    let mut z = vec![0.0; d];
    for (p, &wi) in x.points().zip(w) {
        if wi == 0.0 {
            continue;
        }
        for (zi, (&pv, &cv)) in z.iter_mut().zip(p.iter().zip(center)) {
            *zi = pv - cv;
        }
        let mut k = 0;
        for i in 0..d {
            let wzi = wi * z[i];
            for &zj in &z[i..] {
                upper[k] += wzi * zj;
                k += 1;
            }
        }
    }
    let mut m = SymmetricMatrix::zeros(d);
    let mut k = 0;
    for i in 0..d {
        for j in i..d {
            m.set_sym(i, j, upper[k]);
            k += 1;
        }
    }
    m
}

const POWER_ITER_CAP: usize = 20_000;

/// Below this dimension a full Jacobi decomposition beats power iteration:
/// its cost does not depend on the spectral gap, and near-isotropic inputs
/// (clean data around the right center) make that gap arbitrarily small.
const DENSE_EIG_DIM: usize = 32;

/// Largest eigenvalue and an accompanying eigenvector of a symmetric PSD
/// matrix. Small dimensions go straight to the dense Jacobi decomposition;
/// larger ones use power iteration from a deterministic all-ones start plus
/// one fixed-seed pseudorandom restart (which covers starts orthogonal to
/// the top eigenspace), converged when ||Mv - lambda v|| <= tol * max(lambda, 1).
pub fn top_eigenpair(m: &SymmetricMatrix, tol: f64) -> Result<(f64, UnitDirection)> {
    top_eigenpair_multi(m, tol, &[])
}

/// Same contract as [`top_eigenpair`] but considers caller-provided extra
/// start vectors as well; the best converged run wins.
pub(crate) fn top_eigenpair_multi(
    m: &SymmetricMatrix,
    tol: f64,
    extra_starts: &[Vec<f64>],
) -> Result<(f64, UnitDirection)> {
    if !(tol > 0.0) {
        return Err(Error::usage(format!("eigensolve tolerance {tol} must be positive")));
    }
    let d = m.dim();
    if d <= DENSE_EIG_DIM {
        // Unconditional: Jacobi leaves nothing for the starts to improve on.
        if let Some((lam, v)) = sym_eigen(m).into_iter().next() {
            return Ok((lam, UnitDirection::normalized(&v)?));
        }
    }
    let ones = vec![1.0 / (d as f64).sqrt(); d];
    let probe = fixed_probe(d);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut last_residual = f64::INFINITY;
    for start in std::iter::once(&ones)
        .chain(std::iter::once(&probe))
        .chain(extra_starts.iter())
    {
        match power_iterate(m, start, tol) {
            Ok((lam, v)) => {
                if best.as_ref().map_or(true, |(bl, _)| lam > *bl) {
                    best = Some((lam, v));
                }
            }
            Err(resid) => last_residual = last_residual.min(resid),
        }
    }
    if let Some((lam, v)) = best {
        return Ok((lam, UnitDirection::normalized(&v)?));
    }
    // Near-tied top eigenvalues can defeat power iteration; fall back to the
    // dense decomposition, which does not depend on the spectral gap.
    if let Some((lam, v)) = sym_eigen(m).into_iter().next() {
        return Ok((lam, UnitDirection::normalized(&v)?));
    }
    Err(Error::numeric(format!(
        "power iteration did not reach tolerance {tol} within {POWER_ITER_CAP} steps \
         (best residual {last_residual:.3e})"
    )))
}

fn power_iterate(
    m: &SymmetricMatrix,
    start: &[f64],
    tol: f64,
) -> std::result::Result<(f64, Vec<f64>), f64> {
    let d = m.dim();
    let mut v = start.to_vec();
    let nrm = norm(&v);
    debug_assert!(nrm > 0.0);
    v.iter_mut().for_each(|x| *x /= nrm);
    let mut mv = vec![0.0; d];
    let mut resid = f64::INFINITY;
    let mut lam_prev = f64::INFINITY;
    let mut stall = 0usize;
    for _ in 0..POWER_ITER_CAP {
        m.matvec_into(&v, &mut mv);
        let lam = dot(&v, &mv);
        resid = (0..d)
            .map(|i| (mv[i] - lam * v[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        if resid <= tol * lam.abs().max(1.0) {
            return Ok((lam, v));
        }
        // A stationary Rayleigh quotient with a stuck residual means a
        // near-degenerate top eigenspace: any vector in it is acceptable.
        if (lam - lam_prev).abs() <= 1e-15 * lam.abs().max(f64::MIN_POSITIVE) {
            stall += 1;
            if stall >= 32 {
                return Ok((lam, v));
            }
        } else {
            stall = 0;
        }
        lam_prev = lam;
        let mv_norm = norm(&mv);
        if mv_norm == 0.0 {
            // Start vector lies in the kernel; eigenvalue 0 with residual 0.
            return Ok((0.0, v));
        }
        for (vi, &mi) in v.iter_mut().zip(&mv) {
            *vi = mi / mv_norm;
        }
    }
    Err(resid)
}

fn fixed_probe(d: usize) -> Vec<f64> {
    // xorshift from a constant so the restart is reproducible everywhere.
    let mut state = 0x243f_6a88_85a3_08d3_u64 ^ (d as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    let mut v = Vec::with_capacity(d);
    for _ in 0..d {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        // Uniform in [-1, 1), never all-zero across a full vector.
        v.push((state >> 11) as f64 / (1u64 << 52) as f64 - 1.0);
    }
    if norm(&v) == 0.0 {
        v[0] = 1.0;
    }
    v
}

/// Full symmetric eigendecomposition by cyclic Jacobi sweeps; returns
/// (eigenvalue, eigenvector) pairs sorted descending. Exact enough for the
/// small dimensions used here (off-diagonal mass driven below 1e-12 * scale).
pub fn sym_eigen(m: &SymmetricMatrix) -> Vec<(f64, Vec<f64>)> {
    let d = m.dim();
    let mut a: Vec<f64> = (0..d * d).map(|k| m.a[k]).collect();
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    let scale = a.iter().fold(0.0_f64, |acc, x| acc.max(x.abs())).max(1.0);
    for _sweep in 0..100 {
        let mut off = 0.0_f64;
        for p in 0..d {
            for q in (p + 1)..d {
                off = off.max(a[p * d + q].abs());
            }
        }
        if off <= 1e-13 * scale {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a[p * d + p];
                let aqq = a[q * d + q];
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..d)
        .map(|i| (a[i * d + i], (0..d).map(|k| v[k * d + i]).collect()))
        .collect();
    pairs.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
    pairs
}

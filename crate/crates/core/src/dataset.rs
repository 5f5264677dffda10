//! Point clouds and unit directions.
//!
//! A [`Dataset`] is an immutable n-by-d batch of finite points stored
//! row-major. Estimators never mutate their input; contamination produces a
//! fresh dataset and records which rows it replaced.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    n: usize,
    d: usize,
    // Row-major, length n * d, all entries finite.
    data: Vec<f64>,
}

impl Dataset {
    pub fn from_flat(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::usage(format!(
                "dataset must be non-empty: n={n}, d={d}"
            )));
        }
        if data.len() != n * d {
            return Err(Error::usage(format!(
                "flat buffer has {} entries, expected n*d = {}",
                data.len(),
                n * d
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::usage(format!("non-finite entry {bad} in dataset")));
        }
        Ok(Dataset { n, d, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::usage("dataset must have at least one point"));
        }
        let d = rows[0].len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(Error::usage(format!(
                    "row {i} has {} coordinates, expected {d}",
                    r.len()
                )));
            }
        }
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        Dataset::from_flat(rows.len(), d, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.d)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Projections onto `v`, one per point, written into `out`.
    pub fn project_into(&self, v: &[f64], out: &mut Vec<f64>) {
        debug_assert_eq!(v.len(), self.d);
        out.clear();
        out.extend(self.points().map(|p| dot(p, v)));
    }

    /// Copy with row `i` replaced. Used by contamination; other rows are
    /// moved over bit-for-bit.
    pub(crate) fn with_replaced_rows(&self, replacements: &[(usize, Vec<f64>)]) -> Result<Self> {
        let mut data = self.data.clone();
        for (i, row) in replacements {
            if *i >= self.n {
                return Err(Error::usage(format!("row index {i} out of range")));
            }
            if row.len() != self.d {
                return Err(Error::usage(format!(
                    "replacement row has {} coordinates, expected {}",
                    row.len(),
                    self.d
                )));
            }
            data[i * self.d..(i + 1) * self.d].copy_from_slice(row);
        }
        Dataset::from_flat(self.n, self.d, data)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Direction on the unit sphere. The zero vector is not representable;
/// normalization of a zero input is an error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitDirection(Vec<f64>);

impl UnitDirection {
    /// Validates that `v` already has unit norm (within 1e-9).
    pub fn new(v: Vec<f64>) -> Result<Self> {
        let nrm = norm(&v);
        if !nrm.is_finite() || (nrm - 1.0).abs() > 1e-9 {
            return Err(Error::usage(format!(
                "direction norm {nrm} is not 1 within 1e-9"
            )));
        }
        Ok(UnitDirection(v))
    }

    /// Normalizes `v` to unit length.
    pub fn normalized(v: &[f64]) -> Result<Self> {
        let nrm = norm(v);
        if !nrm.is_finite() || nrm == 0.0 {
            return Err(Error::usage("cannot normalize a zero direction"));
        }
        Ok(UnitDirection(v.iter().map(|x| x / nrm).collect()))
    }

    pub fn axis(d: usize, k: usize) -> Self {
        let mut v = vec![0.0; d];
        v[k] = 1.0;
        UnitDirection(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn d(&self) -> usize {
        self.0.len()
    }
}

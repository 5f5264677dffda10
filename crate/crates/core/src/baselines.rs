//! Classical mean estimators and the estimator registry.
//!
//! The two-stage estimator is only interesting relative to what simpler
//! methods do on the same draws, so the harness carries three reference
//! estimators: the arithmetic mean, a coordinate-wise median of block means,
//! and a truncated mean about the coordinate-wise median. [`EstimatorKind`]
//! names all of them (plus the filter center and the two-stage estimator)
//! so configs and CLI flags can select estimators as data.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::spread::subg_estimate;
use crate::stability::solve_rob_sdp_default;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Arithmetic mean of the rows. Emptiness is unrepresentable: [`Dataset`]
/// construction rejects n = 0, so this is total.
pub fn empirical_mean(x: &Dataset) -> Vec<f64> {
    let n = x.n() as f64;
    let mut out = vec![0.0; x.d()];
    for p in x.points() {
        for (o, &v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
    for o in &mut out {
        *o /= n;
    }
    out
}

/// Coordinate-wise median of `k` block means over a random partition.
///
/// Rows are shuffled, the trailing `n mod k` rows are dropped, and the rest
/// split into `k` equal blocks. With `k = 1` this is the empirical mean up
/// to summation order.
pub fn median_of_means(x: &Dataset, k: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::usage("block count must be positive"));
    }
    if k > x.n() {
        return Err(Error::usage(format!(
            "block count {k} exceeds sample size {}",
            x.n()
        )));
    }
    let mut idx: Vec<usize> = (0..x.n()).collect();
    for i in (1..idx.len()).rev() {
        let j = rng.gen_range(0..=i);
        idx.swap(i, j);
    }
    Ok(median_of_means_indexed(x, k, &idx))
}

fn median_of_means_indexed(x: &Dataset, k: usize, idx: &[usize]) -> Vec<f64> {
    let b = idx.len() / k;
    let d = x.d();
    let mut block_means = vec![0.0; k * d];
    for blk in 0..k {
        let m = &mut block_means[blk * d..(blk + 1) * d];
        for &r in &idx[blk * b..(blk + 1) * b] {
            for (mi, &v) in m.iter_mut().zip(x.point(r)) {
                *mi += v;
            }
        }
        for mi in m.iter_mut() {
            *mi /= b as f64;
        }
    }
    let mut col = vec![0.0; k];
    (0..d)
        .map(|c| {
            for (ci, blk) in col.iter_mut().zip(0..k) {
                *ci = block_means[blk * d + c];
            }
            column_median(&mut col)
        })
        .collect()
}

/// Truncated mean: per coordinate, deviations from the coordinate median are
/// clamped to [-tau, tau], averaged, and added back to the median. A huge
/// `tau` recovers the empirical mean; `tau = 0` is the coordinate median.
pub fn trimmed_mean(x: &Dataset, tau: f64) -> Result<Vec<f64>> {
    if tau.is_nan() || tau < 0.0 {
        return Err(Error::usage(format!("tau = {tau} must be >= 0")));
    }
    let n = x.n() as f64;
    let mut out = Vec::with_capacity(x.d());
    let mut col = vec![0.0; x.n()];
    for c in 0..x.d() {
        for (ci, p) in col.iter_mut().zip(x.points()) {
            *ci = p[c];
        }
        let med = column_median(&mut col);
        let s: f64 = col.iter().map(|&v| (v - med).clamp(-tau, tau)).sum();
        out.push(med + s / n);
    }
    Ok(out)
}

// Sorts in place; even lengths average the two middle order statistics.
// Callers guarantee finite, nonempty input.
fn column_median(vals: &mut [f64]) -> f64 {
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = vals.len();
    if n % 2 == 1 {
        vals[n / 2]
    } else {
        0.5 * (vals[n / 2 - 1] + vals[n / 2])
    }
}

/// A named estimator with its fixed parameters. The string form accepted by
/// [`EstimatorKind::parse`] (and emitted by [`EstimatorKind::label`]) is the
/// id used in configs, CLI flags, and output records:
///
/// - `empirical_mean`
/// - `median_of_means:<blocks>`
/// - `trimmed_mean:<tau>`
/// - `filter_center` or `filter_center:<rho>` (bare form caps at the ambient
///   eps of the run)
/// - `subg` (the two-stage estimator; sign chosen uniformly at random)
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case")]
pub enum EstimatorKind {
    EmpiricalMean,
    MedianOfMeans {
        blocks: usize,
    },
    TrimmedMean {
        tau: f64,
    },
    FilterCenter {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rho: Option<f64>,
    },
    #[serde(rename = "subg")]
    SubGaussian,
}

impl EstimatorKind {
    pub fn parse(id: &str) -> Result<Self> {
        let (name, arg) = match id.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (id.trim(), None),
        };
        match (name, arg) {
            ("empirical_mean", None) => Ok(EstimatorKind::EmpiricalMean),
            ("median_of_means", Some(a)) => {
                let blocks = a.parse::<usize>().map_err(|_| {
                    Error::usage(format!("median_of_means block count {a:?} is not a count"))
                })?;
                Ok(EstimatorKind::MedianOfMeans { blocks })
            }
            ("median_of_means", None) => Err(Error::usage(
                "median_of_means takes a block count, e.g. median_of_means:10",
            )),
            ("trimmed_mean", Some(a)) => {
                let tau = a.parse::<f64>().map_err(|_| {
                    Error::usage(format!("trimmed_mean radius {a:?} is not a number"))
                })?;
                Ok(EstimatorKind::TrimmedMean { tau })
            }
            ("trimmed_mean", None) => Err(Error::usage(
                "trimmed_mean takes a truncation radius, e.g. trimmed_mean:3.0",
            )),
            ("filter_center", None) => Ok(EstimatorKind::FilterCenter { rho: None }),
            ("filter_center", Some(a)) => {
                let rho = a.parse::<f64>().map_err(|_| {
                    Error::usage(format!("filter_center cap {a:?} is not a number"))
                })?;
                Ok(EstimatorKind::FilterCenter { rho: Some(rho) })
            }
            ("subg", None) => Ok(EstimatorKind::SubGaussian),
            _ => Err(Error::usage(format!(
                "unknown estimator id {id:?}; known ids: empirical_mean, \
                 median_of_means:<blocks>, trimmed_mean:<tau>, filter_center[:<rho>], subg"
            ))),
        }
    }

    /// Round-trips through [`EstimatorKind::parse`].
    pub fn label(&self) -> String {
        match self {
            EstimatorKind::EmpiricalMean => "empirical_mean".into(),
            EstimatorKind::MedianOfMeans { blocks } => format!("median_of_means:{blocks}"),
            EstimatorKind::TrimmedMean { tau } => format!("trimmed_mean:{tau}"),
            EstimatorKind::FilterCenter { rho: None } => "filter_center".into(),
            EstimatorKind::FilterCenter { rho: Some(r) } => format!("filter_center:{r}"),
            EstimatorKind::SubGaussian => "subg".into(),
        }
    }

    /// Runs the estimator on `x`.
    ///
    /// `eps` is the ambient corruption budget of the experiment: the filter
    /// uses it as its weight cap when no explicit `rho` is pinned, and the
    /// two-stage estimator converts it to the confidence level
    /// `delta = 4 e^{-eps n}` (the inverse of its own `eps = ln(4/delta)/n`
    /// rule, clamped to the validity range) when no `delta` is given. The
    /// classical baselines ignore both.
    pub fn estimate(
        &self,
        x: &Dataset,
        eps: f64,
        delta: Option<f64>,
        rng: &mut RngStream,
    ) -> Result<Vec<f64>> {
        match self {
            EstimatorKind::EmpiricalMean => Ok(empirical_mean(x)),
            EstimatorKind::MedianOfMeans { blocks } => median_of_means(x, *blocks, rng),
            EstimatorKind::TrimmedMean { tau } => trimmed_mean(x, *tau),
            EstimatorKind::FilterCenter { rho } => {
                Ok(solve_rob_sdp_default(x, rho.unwrap_or(eps), rng)?.center)
            }
            EstimatorKind::SubGaussian => {
                let dl = delta.unwrap_or_else(|| implied_delta(eps, x.n()));
                let s: i8 = if rng.gen::<bool>() { 1 } else { -1 };
                Ok(subg_estimate(x, dl, s, rng)?.mu_hat)
            }
        }
    }
}

/// Confidence level whose induced budget log(4/delta)/n equals `eps`,
/// clamped into the estimator's (0, 1/4] domain. The lower clamp only fires
/// when e^{-eps n} underflows, where the exact value is unrepresentable
/// anyway.
pub(crate) fn implied_delta(eps: f64, n: usize) -> f64 {
    (4.0 * (-eps * n as f64).exp())
        .min(0.25)
        .max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contamination::{sample_clean, CleanSampleSpec, CovarianceSpec, Family};
    use proptest::prelude::*;

    fn rng() -> RngStream {
        RngStream::new(61, 0)
    }

    fn d1(vals: &[f64]) -> Dataset {
        Dataset::from_flat(vals.len(), 1, vals.to_vec()).unwrap()
    }

    #[test]
    fn empirical_mean_hand_sums() {
        assert_eq!(empirical_mean(&d1(&[0.0, 3.0, 6.0])), vec![3.0]);
        assert_eq!(empirical_mean(&d1(&[-1.0, 1.0])), vec![0.0]);
        assert_eq!(empirical_mean(&d1(&[5.0, 5.0, 5.0, 5.0])), vec![5.0]);
        let x = Dataset::from_rows(&[vec![1.0, 10.0], vec![3.0, 30.0]]).unwrap();
        assert_eq!(empirical_mean(&x), vec![2.0, 20.0]);
    }

    #[test]
    fn median_of_means_identity_shuffle_oracle() {
        let x = d1(&[1.0, 2.0, 3.0, 4.0, 5.0, 100.0]);
        let idx: Vec<usize> = (0..6).collect();
        // Blocks {1,2}, {3,4}, {5,100}; means 1.5, 3.5, 52.5; median 3.5.
        assert_eq!(median_of_means_indexed(&x, 3, &idx), vec![3.5]);
        // Even block count averages the middle two means.
        let y = d1(&[1.0, 2.0, 3.0, 4.0]);
        let idx4: Vec<usize> = (0..4).collect();
        assert_eq!(median_of_means_indexed(&y, 2, &idx4), vec![2.5]);
    }

    #[test]
    fn median_of_means_drops_remainder() {
        // n = 7, k = 3: block size 2, the 7th shuffled point is unused.
        let x = d1(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 1000.0]);
        let idx: Vec<usize> = (0..7).collect();
        assert_eq!(median_of_means_indexed(&x, 3, &idx), vec![3.5]);
    }

    #[test]
    fn median_of_means_one_block_is_empirical_mean() {
        let x = d1(&[0.3, -1.7, 2.9, 8.1, -4.4]);
        let got = median_of_means(&x, 1, &mut rng()).unwrap();
        let want = empirical_mean(&x);
        assert!((got[0] - want[0]).abs() < 1e-12);
    }

    #[test]
    fn median_of_means_rejects_bad_block_counts() {
        let x = d1(&[1.0, 2.0]);
        assert!(median_of_means(&x, 0, &mut rng()).is_err());
        assert!(median_of_means(&x, 3, &mut rng()).is_err());
    }

    #[test]
    fn trimmed_mean_frozen_example() {
        // Median 2, deviations (-12,-1,0,1,8) clamp to (-3,-1,0,1,3), mean 0.
        let x = d1(&[-10.0, 1.0, 2.0, 3.0, 10.0]);
        assert_eq!(trimmed_mean(&x, 3.0).unwrap(), vec![2.0]);
    }

    #[test]
    fn trimmed_mean_extremes() {
        let x = d1(&[-10.0, 1.0, 2.0, 3.0, 10.0]);
        let loose = trimmed_mean(&x, 1e12).unwrap();
        let want = empirical_mean(&x);
        assert!((loose[0] - want[0]).abs() < 1e-9);
        // tau = 0 collapses to the coordinate median.
        assert_eq!(trimmed_mean(&x, 0.0).unwrap(), vec![2.0]);
        let c = d1(&[4.0, 4.0, 4.0]);
        assert_eq!(trimmed_mean(&c, 2.0).unwrap(), vec![4.0]);
    }

    #[test]
    fn trimmed_mean_rejects_negative_tau() {
        let x = d1(&[1.0, 2.0]);
        assert!(trimmed_mean(&x, -1.0).is_err());
        assert!(trimmed_mean(&x, f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn trimmed_mean_stays_inside_the_data_range(
            vals in proptest::collection::vec(-50.0f64..50.0, 1..40),
            tau in 0.0f64..20.0,
        ) {
            let x = d1(&vals);
            let est = trimmed_mean(&x, tau).unwrap()[0];
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(est >= lo - 1e-9 && est <= hi + 1e-9);
            let mut sorted = vals.clone();
            let med = column_median(&mut sorted);
            prop_assert!((est - med).abs() <= tau + 1e-9);
        }

        #[test]
        fn median_of_means_stays_inside_the_data_range(
            vals in proptest::collection::vec(-50.0f64..50.0, 1..40),
            k in 1usize..8,
            seed in 0u64..1000,
        ) {
            let x = d1(&vals);
            prop_assume!(k <= vals.len());
            let est = median_of_means(&x, k, &mut RngStream::new(seed, 1)).unwrap()[0];
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(est >= lo - 1e-9 && est <= hi + 1e-9);
        }
    }

    #[test]
    fn estimator_ids_round_trip() {
        let cases = [
            "empirical_mean",
            "median_of_means:8",
            "trimmed_mean:3.5",
            "filter_center",
            "filter_center:0.2",
            "subg",
        ];
        for id in cases {
            let kind = EstimatorKind::parse(id).unwrap();
            assert_eq!(kind.label(), id);
            assert_eq!(EstimatorKind::parse(&kind.label()).unwrap(), kind);
        }
    }

    #[test]
    fn estimator_parse_rejects_malformed_ids() {
        for bad in [
            "mean",
            "median_of_means",
            "median_of_means:x",
            "trimmed_mean",
            "trimmed_mean:abc",
            "filter_center:wide",
            "subg:1",
            "empirical_mean:3",
            "",
        ] {
            assert!(EstimatorKind::parse(bad).is_err(), "accepted {bad:?}");
        }
    }

    #[test]
    fn estimator_serde_uses_the_public_ids() {
        let kind = EstimatorKind::MedianOfMeans { blocks: 4 };
        let json = serde_json::to_string(&kind).unwrap();
        assert_eq!(json, r#"{"id":"median_of_means","blocks":4}"#);
        let back: EstimatorKind = serde_json::from_str(&json).unwrap();
        assert_eq!(back, kind);
        let subg: EstimatorKind = serde_json::from_str(r#"{"id":"subg"}"#).unwrap();
        assert_eq!(subg, EstimatorKind::SubGaussian);
        assert!(serde_json::from_str::<EstimatorKind>(r#"{"id":"nope"}"#).is_err());
    }

    #[test]
    fn every_registered_estimator_runs() {
        let spec = CleanSampleSpec {
            family: Family::Gaussian,
            mean: vec![1.0, -2.0, 0.5],
            covariance: CovarianceSpec::Spherical { variance: 1.0 },
            d: 3,
            n: 80,
        };
        let x = sample_clean(&spec, &mut rng()).unwrap();
        let kinds = [
            EstimatorKind::EmpiricalMean,
            EstimatorKind::MedianOfMeans { blocks: 8 },
            EstimatorKind::TrimmedMean { tau: 5.0 },
            EstimatorKind::FilterCenter { rho: None },
            EstimatorKind::FilterCenter { rho: Some(0.05) },
            EstimatorKind::SubGaussian,
        ];
        let mut r = rng();
        for kind in kinds {
            let est = kind.estimate(&x, 0.1, None, &mut r).unwrap();
            assert_eq!(est.len(), 3, "{}", kind.label());
            assert!(est.iter().all(|v| v.is_finite()), "{}", kind.label());
            let err: f64 = est
                .iter()
                .zip(&spec.mean)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(err < 1.5, "{} err {err}", kind.label());
        }
    }

    #[test]
    fn subg_dispatch_accepts_explicit_delta() {
        let spec = CleanSampleSpec {
            family: Family::Gaussian,
            mean: vec![0.0, 0.0],
            covariance: CovarianceSpec::Spherical { variance: 1.0 },
            d: 2,
            n: 60,
        };
        let x = sample_clean(&spec, &mut rng()).unwrap();
        let mut r = rng();
        let est = EstimatorKind::SubGaussian
            .estimate(&x, 0.0, Some(0.05), &mut r)
            .unwrap();
        assert_eq!(est.len(), 2);
    }
}

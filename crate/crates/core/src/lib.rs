//! Robust mean estimation laboratory.
//!
//! The centerpiece is a two-stage estimator for the mean of a distribution
//! with finite covariance: a spectral reweighting step produces a stable
//! center, and a directional spread measurement perturbs that center by a
//! signed step whose length tracks the confidence level. Around it sit the
//! supporting pieces needed to study the estimator empirically: capped
//! probability simplices and their exact linear minimization, a soft spectral
//! filter with certified non-increasing objective, randomized rounding of the
//! filter's matrix relaxation, contamination attacks and heavy-tailed
//! samplers, exact small-cube and binomial oracles, and an experiment harness
//! with reproducible seeded streams.
//!
//! Everything is deterministic given a seed: randomness flows through
//! [`RngStream`], which derives independent substreams from a base seed, so
//! experiment outputs are byte-identical across runs and thread counts.

pub mod baselines;
pub mod contamination;
pub mod dataset;
pub mod direction;
pub mod error;
pub mod experiment;
pub mod matrix;
pub mod rng;
pub mod spread;
pub mod stability;
pub mod theorycheck;
pub mod weights;

pub use baselines::{empirical_mean, median_of_means, trimmed_mean, EstimatorKind};
pub use contamination::{
    check_tail_decay, check_truncated_lemmas, corrupt, sample_clean, tail_ladder, AttackSpec,
    CleanSampleSpec, CorruptedSample, CovarianceSpec, Family, PopulationMoments, TailLadder,
};
pub use dataset::{Dataset, UnitDirection};
pub use error::{Error, Result};
pub use experiment::{
    read_records, run_experiment, separation_demo, write_records, EnvelopeConstants,
    ExperimentConfig, ParameterGrid, SeparationConfig, SeparationReport, SeparationSummary,
    SeparationTrial, StableSetStats, TrialRecord,
};
pub use matrix::{top_eigenpair, weighted_mean, weighted_second_moment, SymmetricMatrix};
pub use rng::RngStream;
pub use spread::{
    comparison, max_spread_direction, quantile_weights, spread, subg_estimate,
    SubGaussianEstimate, TailWeightProfile,
};
pub use stability::{
    check_stability, extract_stable_set, gaussian_round, solve_rob_sdp, solve_rob_sdp_default,
    RobSdpSolution, StabilityCertificate, StabilityMode,
};
pub use theorycheck::{
    binomial_anticoncentration_check, binomial_anticoncentration_sweep, blowup_random_sweep,
    hamming_blowup_exact, high_prob_from_robust, BinomialSweep, BinomialTailCheck, BlowupReport,
    BlowupSweep, CubeSet, FailureRateRow, ReductionReport,
};
pub use weights::CappedWeights;

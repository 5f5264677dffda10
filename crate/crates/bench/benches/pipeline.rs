//! Timings for the pieces that dominate experiment wall time: the filter
//! solve, the full two-stage estimate, the spread direction search, the
//! exact cube blowup oracle, and the capped-simplex linear minimizer.
//!
//! Inputs are drawn once per benchmark from fixed streams; the solver and
//! search benches hand each iteration a fresh substream clone so every
//! iteration replays identical work.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use robustlab::direction::DirectionSearchConfig;
use robustlab::weights::min_linear_over_capped_simplex;
use robustlab::{
    corrupt, hamming_blowup_exact, max_spread_direction, sample_clean, solve_rob_sdp_default,
    subg_estimate, AttackSpec, CleanSampleSpec, CovarianceSpec, CubeSet, Family, RngStream,
    UnitDirection,
};

fn gaussian_spec(d: usize, n: usize) -> CleanSampleSpec {
    CleanSampleSpec {
        family: Family::Gaussian,
        mean: vec![0.0; d],
        covariance: CovarianceSpec::Spherical { variance: 1.0 },
        d,
        n,
    }
}

fn filter_solve(c: &mut Criterion) {
    let mut rng = RngStream::new(3, 0);
    let clean = sample_clean(&gaussian_spec(10, 500), &mut rng).unwrap();
    let att = AttackSpec::ShiftCluster {
        r: 20.0,
        v: UnitDirection::axis(10, 0),
    };
    let x = corrupt(&clean, 0.1, &att, &mut rng).unwrap().data;
    c.bench_function("filter_solve_corrupted_n500_d10", |b| {
        b.iter_batched(
            || rng.substream(1),
            |mut r| solve_rob_sdp_default(&x, 0.1, &mut r).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn two_stage_estimate(c: &mut Criterion) {
    let mut rng = RngStream::new(3, 1);
    let x = sample_clean(&gaussian_spec(20, 2000), &mut rng).unwrap();
    let mut g = c.benchmark_group("two_stage");
    g.sample_size(10);
    g.bench_function("subg_estimate_n2000_d20", |b| {
        b.iter_batched(
            || rng.substream(1),
            |mut r| subg_estimate(&x, 0.01, 1, &mut r).unwrap(),
            BatchSize::SmallInput,
        )
    });
    g.finish();
}

fn spread_search(c: &mut Criterion) {
    let mut rng = RngStream::new(3, 2);
    let x = sample_clean(&gaussian_spec(20, 2000), &mut rng).unwrap();
    let center = vec![0.0; 20];
    let cfg = DirectionSearchConfig::default();
    let mut g = c.benchmark_group("spread");
    g.sample_size(20);
    g.bench_function("max_spread_direction_n2000_d20", |b| {
        b.iter_batched(
            || rng.substream(1),
            |mut r| max_spread_direction(&x, &center, 12.0, None, &cfg, &mut r).unwrap(),
            BatchSize::SmallInput,
        )
    });
    g.finish();
}

fn cube_blowup(c: &mut Criterion) {
    let mut rng = RngStream::new(3, 3);
    let s = CubeSet::random_with_mass(16, 0.5, 0.9, &mut rng).unwrap();
    c.bench_function("hamming_blowup_exact_n16", |b| {
        b.iter(|| hamming_blowup_exact(&s, 0.25).unwrap())
    });
}

fn linear_minimizer(c: &mut Criterion) {
    use rand::Rng;
    let mut rng = RngStream::new(3, 4);
    let objective: Vec<f64> = (0..10_000).map(|_| rng.gen::<f64>()).collect();
    c.bench_function("min_linear_over_capped_simplex_n10000", |b| {
        b.iter(|| min_linear_over_capped_simplex(&objective, 0.1).unwrap())
    });
}

criterion_group!(
    benches,
    filter_solve,
    two_stage_estimate,
    spread_search,
    cube_blowup,
    linear_minimizer
);
criterion_main!(benches);

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use twistkey::channel::{build_gamma, detection_stats, ChannelParams};
use twistkey::evegram::{key_basis_stats, solve_eve};
use twistkey::keyrate::config::DistanceRange;
use twistkey::qmath::{c, eig2_hermitian, CMatrix, RMatrix};
use twistkey::sdp::{solve_sdp, SdpProblem, Sense, SolverOptions};
use twistkey::states::{model_states, ModelParams, SignalEnsemble, UNIFORM_PRIORS};
use twistkey::twist::{optimize_phase_errors, TwistProblem};
use twistkey::{keyrate_point, scan, KeyRateOptions, ScanConfig};

fn model(delta: f64, depol: f64) -> SignalEnsemble {
    model_states(ModelParams::new(delta, depol).unwrap(), UNIFORM_PRIORS).unwrap()
}

fn eig2(cr: &mut Criterion) {
    let m = CMatrix::from_row_slice(2, 2, &[c(0.7, 0.0), c(0.1, -0.2), c(0.1, 0.2), c(0.3, 0.0)]);
    cr.bench_function("eig2_hermitian", |b| b.iter(|| eig2_hermitian(black_box(&m)).unwrap()));
}

/// Lowest eigenvalue of a fixed symmetric matrix as a density-matrix SDP.
fn sdp(cr: &mut Criterion) {
    let mut group = cr.benchmark_group("solve_sdp");
    for n in [4usize, 8, 16] {
        let cost = RMatrix::from_fn(n, n, |i, j| ((i * 7 + j * 7 + i * j) % 11) as f64 / 11.0 - 0.5);
        let mut p = SdpProblem::new(cost, Sense::Min);
        p.add_equality(RMatrix::identity(n, n), 1.0);
        group.bench_with_input(BenchmarkId::from_parameter(n), &p, |b, p| b.iter(|| solve_sdp(p, &SolverOptions::default()).unwrap()));
    }
    group.finish();
}

fn twist(cr: &mut Criterion) {
    let e = model(0.1, 0.05);
    let stats = detection_stats(&e, &e, &ChannelParams::new(0.5, 1e-5, 60.0).unwrap());
    let eve = solve_eve(&build_gamma(&e, &e), &stats).unwrap();
    let (p00, ez) = key_basis_stats(&stats).unwrap();
    let problem = TwistProblem::from_ensembles(&e, &e, eve, p00, ez).unwrap();
    cr.bench_function("optimize_phase_errors", |b| b.iter(|| optimize_phase_errors(black_box(&problem), &SolverOptions::default()).unwrap()));
}

fn point(cr: &mut Criterion) {
    let e = model(0.1, 0.05);
    let channel = ChannelParams::new(0.5, 1e-5, 60.0).unwrap();
    cr.bench_function("keyrate_point", |b| b.iter(|| keyrate_point(&e, &e, black_box(&channel), &KeyRateOptions::default()).unwrap()));
}

fn grid(cr: &mut Criterion) {
    let config = ScanConfig::new(vec![0.0, 0.063], vec![0.01, 0.05], 0.5, 1e-5, DistanceRange { min: 0.0, max: 100.0, step: 25.0 });
    let mut group = cr.benchmark_group("scan");
    group.sample_size(10);
    group.bench_function("2x2x5", |b| b.iter(|| scan(black_box(&config), &SolverOptions::default()).unwrap()));
    group.finish();
}

criterion_group!(benches, eig2, sdp, twist, point, grid);
criterion_main!(benches);

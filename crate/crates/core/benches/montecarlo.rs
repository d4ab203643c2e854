use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use funlp::flp::{irf_profile, EstimateOptions, HacSpec};
use funlp::hilbert::{FunctionElement, ProductElement};
use funlp::simlab::{run_coverage, Dgp, ExperimentA, ExperimentAConfig, ExperimentB, ExperimentBConfig, McSettings};
use funlp::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn coverage(c: &mut Criterion) {
    let dgp = ExperimentA::new(ExperimentAConfig::default()).unwrap();
    let zeta = ProductElement::functional(1, FunctionElement::constant(dgp.basis(), 1.0));
    let opts = EstimateOptions::default();
    let hac = HacSpec::default();
    let mut group = c.benchmark_group("coverage_64_reps");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                let mc = McSettings { reps: 64, master_seed: 1, exec };
                run_coverage(&dgp, 250, &[1, 3, 5], &zeta, 0.95, &opts, &hac, mc).unwrap()
            })
        });
    }
    group.finish();
}

fn profile(c: &mut Criterion) {
    let dgp = ExperimentB::new(ExperimentBConfig { t: 1000, ..Default::default() }).unwrap();
    let path = dgp.simulate(&mut funlp::simlab::rep_rng(2, 0)).unwrap();
    let data = dgp.lp_data(&path, 1).unwrap();
    let zeta = ProductElement::functional(1, FunctionElement::constant(dgp.basis(), 1.0));
    let horizons: Vec<usize> = (1..=12).collect();
    let opts = EstimateOptions::default();
    let hac = HacSpec::default();
    let mut group = c.benchmark_group("irf_profile_12");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| irf_profile(&data, &horizons, &zeta, 0.95, &opts, &hac, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, coverage, profile);
criterion_main!(benches);

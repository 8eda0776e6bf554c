use batchlab::calibration::{expected_metric, TreatmentKind, TreatmentSpec};
use batchlab::ctmc::{build_generator, solve_poisson, transient_distribution};
use batchlab::des::{couple, estimate_metrics, simulate, EstimateOptions};
use batchlab::{RewardSpec, Strategy, StrategyProfile, SystemParams};
use batchlab_bench::{shift, wide_params, wide_profile};
use criterion::{black_box, criterion_group, criterion_main, Criterion};

fn analysis(c: &mut Criterion) {
    let params = SystemParams::experimental();
    let profile = StrategyProfile::experimental(Strategy::Batch);
    let reward = RewardSpec::PersonalThroughput { focal: 0 };
    c.bench_function("generator + poisson, experimental", |b| {
        b.iter(|| {
            let gen = build_generator(&params, &profile).unwrap();
            solve_poisson(&gen, &reward, &params.empty_state()).unwrap()
        })
    });

    let wide = wide_params();
    let wide_profile = wide_profile();
    let gen = build_generator(&wide, &wide_profile).unwrap();
    c.bench_function(&format!("poisson, {} states", gen.len()), |b| {
        b.iter(|| solve_poisson(&gen, &RewardSpec::GroupThroughput, &wide.empty_state()).unwrap())
    });

    let gen = build_generator(&params, &profile).unwrap();
    let start = params.empty_state();
    c.bench_function("transient distribution over a shift", |b| {
        b.iter(|| transient_distribution(&gen, &start, black_box(600.0), 1e-12).unwrap())
    });

    let spec = TreatmentSpec::paper(TreatmentKind::GtSt).unwrap();
    c.bench_function("expected shift metric", |b| {
        b.iter(|| expected_metric(&spec, black_box(Strategy::NoBatch)).unwrap())
    });
}

fn simulation(c: &mut Criterion) {
    let params = SystemParams::experimental();
    let profile = StrategyProfile::experimental(Strategy::Batch);
    let path = shift(1);
    c.bench_function("simulate one shift", |b| {
        b.iter(|| simulate(black_box(&path), &params, &profile).unwrap())
    });
    c.bench_function("couple one shift", |b| b.iter(|| couple(black_box(&path), &params, &profile).unwrap()));

    let mut group = c.benchmark_group("replications");
    group.sample_size(10);
    let options = EstimateOptions::new(64, 10_000.0, 0);
    group.bench_function("64 x 10000 units", |b| {
        b.iter(|| estimate_metrics(&params, &profile, &options).unwrap())
    });
    group.finish();
}

criterion_group!(benches, analysis, simulation);
criterion_main!(benches);

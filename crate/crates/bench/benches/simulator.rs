use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use pimfft_core::fft::fft;
use pimfft_core::orchestrator::{build_stream, run_tile};
use pimfft_core::planner::plan;
use pimfft_core::{FftProblem, MachineConfig, MappingLayout, MappingScheme, ScheduleVariant};

fn reference_fft(c: &mut Criterion) {
    let mut g = c.benchmark_group("reference_fft");
    for l in [8u32, 13] {
        let p = FftProblem::random(1 << l, 1, 0xF47).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(l), &p, |b, p| b.iter(|| fft(black_box(p.transform(0)))));
    }
    g.finish();
}

fn stream_build(c: &mut Criterion) {
    let cfg = MachineConfig::default();
    let mut g = c.benchmark_group("build_stream");
    for l in [5u32, 9, 13] {
        let layout = MappingLayout::new(MappingScheme::Strided, 1 << l, 8, &cfg).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(l), &layout, |b, layout| {
            b.iter(|| build_stream(layout, ScheduleVariant::SwHwOpt, &cfg).unwrap())
        });
    }
    g.finish();
}

fn execute(c: &mut Criterion) {
    let cfg = MachineConfig::default();
    let mut g = c.benchmark_group("run_tile");
    g.sample_size(10);
    for (l, batch) in [(5u32, 1024), (10, 64)] {
        let p = FftProblem::random(1 << l, batch, 1).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(l), &p, |b, p| {
            b.iter(|| run_tile(p, MappingScheme::Strided, ScheduleVariant::SwHwOpt, &cfg).unwrap())
        });
    }
    g.finish();
}

fn planner(c: &mut Criterion) {
    let cfg = MachineConfig::default();
    // Warm the stream-count cache so the bench measures plan evaluation.
    plan(1 << 26, 1, ScheduleVariant::SwHwOpt, &cfg).unwrap();
    c.bench_function("plan_2^26", |b| b.iter(|| plan(black_box(1 << 26), 1, ScheduleVariant::SwHwOpt, &cfg).unwrap()));
}

criterion_group!(benches, reference_fft, stream_build, execute, planner);
criterion_main!(benches);

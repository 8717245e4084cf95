use num_complex::Complex32;
use pimfft_core::fft::{butterfly, relative_error, twiddle, twiddle_census};
use pimfft_core::machine::{count_commands, StatsSink};
use pimfft_core::orchestrator::{
    avg_compute_per_butterfly, build_stream, emit_stream, output_position, run_butterfly, run_tile,
    schedule_butterfly, stream_stats,
};
use pimfft_core::{
    FftProblem, MachineConfig, MappingLayout, MappingScheme, OrchestratorError, ScheduleVariant, TwiddleClass,
};
use proptest::prelude::*;

/// Twiddles of every class, including upper-half-plane values.
fn samples(class: TwiddleClass) -> Vec<Complex32> {
    match class {
        TwiddleClass::One => vec![twiddle(2, 0).unwrap()],
        TwiddleClass::MinusJ => vec![twiddle(4, 1).unwrap()],
        TwiddleClass::SqrtHalf => {
            let (a, b) = (twiddle(8, 1).unwrap(), twiddle(8, 3).unwrap());
            vec![a, b, a.conj(), b.conj()]
        }
        TwiddleClass::Generic => vec![twiddle(16, 1).unwrap(), twiddle(64, 21).unwrap(), twiddle(32, 7).unwrap().conj()],
    }
}

fn lanes(seed: u64) -> Vec<Complex32> {
    FftProblem::random(8, 1, seed).unwrap().transform(0).to_vec()
}

#[test]
fn butterfly_schedules_match_reference() {
    let cfg = MachineConfig::default();
    for v in ScheduleVariant::ALL {
        for class in TwiddleClass::ALL {
            for w in samples(class) {
                let s = schedule_butterfly(v, class, w).unwrap();
                assert_eq!(s.compute_count(), v.compute_count(class) as usize, "{v:?} {class:?}");
                let (x1, x2) = (lanes(1), lanes(2));
                let (y1, y2) = run_butterfly(&s, &x1, &x2, &cfg).unwrap();
                for l in 0..8 {
                    let (e1, e2) = butterfly(x1[l], x2[l], w);
                    assert!((y1[l] - e1).norm() < 1e-6 && (y2[l] - e2).norm() < 1e-6, "{v:?} {class:?} {w}");
                }
            }
        }
    }
}

#[test]
fn compute_count_table() {
    use ScheduleVariant::*;
    use TwiddleClass::*;
    let table = [
        (PimBase, [6, 6, 6, 6]),
        (SwOpt, [4, 4, 6, 6]),
        (HwOpt, [4, 4, 4, 4]),
        (SwHwOpt, [2, 2, 3, 4]),
    ];
    for (v, counts) in table {
        for (class, n) in [One, MinusJ, SqrtHalf, Generic].into_iter().zip(counts) {
            assert_eq!(v.compute_count(class), n);
        }
    }
}

#[test]
fn census_weighted_averages() {
    let avg = |v, l: u32| avg_compute_per_butterfly(v, 1 << l).unwrap();
    assert!((avg(ScheduleVariant::SwOpt, 5) - 4.85).abs() < 1e-12);
    assert!((avg(ScheduleVariant::SwOpt, 13) - 5.538).abs() < 1e-3);
    assert!((avg(ScheduleVariant::SwHwOpt, 5) - 2.675).abs() < 1e-12);
    assert_eq!(avg(ScheduleVariant::PimBase, 9), 6.0);
    assert_eq!(avg(ScheduleVariant::HwOpt, 9), 4.0);
}

#[test]
fn strided_streams_audit_against_census() {
    let cfg = MachineConfig::default();
    for l in 3..=13u32 {
        let n = 1usize << l;
        let census = twiddle_census(n).unwrap();
        for v in ScheduleVariant::ALL {
            let s = stream_stats(MappingScheme::Strided, n, v, &cfg).unwrap();
            let expect: u64 = TwiddleClass::ALL.iter().map(|c| census.get(*c) * v.compute_count(*c) as u64).sum();
            assert_eq!(s.compute(), expect, "2^{l} {v:?}");
            assert_eq!(s.shift, 0);
            assert_eq!(s.tras_violations, 0);
            if !v.uses_maddsub() {
                assert_eq!(s.maddsub, 0);
            }
        }
    }
}

#[test]
fn materialized_stream_counts_equal_dry_run() {
    let cfg = MachineConfig::default();
    for s in [MappingScheme::Strided, MappingScheme::Baseline] {
        for l in [3u32, 6, 9] {
            for v in ScheduleVariant::ALL {
                let layout = MappingLayout::new(s, 1 << l, 8, &cfg).unwrap();
                let stream = build_stream(&layout, v, &cfg).unwrap();
                assert_eq!(count_commands(&stream.commands, &cfg), stream_stats(s, 1 << l, v, &cfg).unwrap());
            }
        }
    }
}

#[test]
fn row_switches() {
    let cfg = MachineConfig::default();
    for v in ScheduleVariant::ALL {
        for l in 1..=5u32 {
            assert!(stream_stats(MappingScheme::Strided, 1 << l, v, &cfg).unwrap().row_switches <= 2);
        }
        let mut last = 0;
        for l in 1..=13u32 {
            let s = stream_stats(MappingScheme::Strided, 1 << l, v, &cfg).unwrap();
            assert!(s.row_switches >= last, "{v:?} 2^{l}");
            last = s.row_switches;
        }
    }
}

#[test]
fn baseline_needs_shifts_and_is_slower() {
    let cfg = MachineConfig::default();
    for l in 5..=13u32 {
        let b = stream_stats(MappingScheme::Baseline, 1 << l, ScheduleVariant::PimBase, &cfg).unwrap();
        let s = stream_stats(MappingScheme::Strided, 1 << l, ScheduleVariant::PimBase, &cfg).unwrap();
        assert!(b.shift > 0);
        assert_eq!(b.tras_violations, 0);
        assert!(b.column_commands() > s.column_commands());
    }
}

#[test]
fn register_peak_within_file() {
    for rf in [16usize, 32] {
        let cfg = MachineConfig::default().with("rf_registers", &rf.to_string()).unwrap();
        for s in [MappingScheme::Strided, MappingScheme::Baseline] {
            for l in [3u32, 5, 8, 11] {
                for v in ScheduleVariant::ALL {
                    let layout = MappingLayout::new(s, 1 << l, 8, &cfg).unwrap();
                    let mut sink = StatsSink::new(&cfg);
                    let peak = emit_stream(&mut sink, &layout, v, &cfg).unwrap();
                    assert!(peak <= rf, "{s:?} 2^{l} {v:?}: {peak}");
                }
            }
        }
    }
}

#[test]
fn fused_command_required() {
    let cfg = MachineConfig::default().with("maddsub_support", "false").unwrap();
    let p = FftProblem::random(32, 8, 0).unwrap();
    assert!(matches!(
        run_tile(&p, MappingScheme::Strided, ScheduleVariant::HwOpt, &cfg),
        Err(OrchestratorError::Unsupported("hw"))
    ));
    assert!(run_tile(&p, MappingScheme::Strided, ScheduleVariant::SwOpt, &cfg).is_ok());
}

#[test]
fn trivial_twiddle_folding_is_exact() {
    // Folding 1 and -j drops multiplications by 0 and 1 only, so results are bit-identical.
    let cfg = MachineConfig::default();
    for l in [3u32, 6, 9, 12] {
        let p = FftProblem::random(1 << l, 16, l as u64).unwrap();
        for s in [MappingScheme::Strided, MappingScheme::Baseline] {
            let a = run_tile(&p, s, ScheduleVariant::PimBase, &cfg).unwrap();
            let b = run_tile(&p, s, ScheduleVariant::SwOpt, &cfg).unwrap();
            assert_eq!(a, b, "2^{l} {s:?}");
        }
    }
}

#[test]
fn several_rounds() {
    // A machine with two units forces several rounds for a modest batch.
    let cfg = MachineConfig::default()
        .with("stacks", "1").unwrap()
        .with("pseudo_channels_per_stack", "1").unwrap()
        .with("pim_units_per_pseudo_channel", "2").unwrap();
    let p = FftProblem::random(256, 40, 9).unwrap();
    for v in ScheduleVariant::ALL {
        let out = run_tile(&p, MappingScheme::Strided, v, &cfg).unwrap();
        assert!(relative_error(out.data(), p.fft_all().data()) < 1e-5);
    }
}

#[test]
fn output_positions_are_bit_reversed() {
    assert_eq!(output_position(8, 1), 4);
    assert_eq!(output_position(8, 3), 6);
    assert_eq!(output_position(32, 1), 16);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn tiles_match_reference(
        l in 3u32..=10,
        batch in 1usize..20,
        v in 0usize..4,
        baseline in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let cfg = MachineConfig::default();
        let s = if baseline { MappingScheme::Baseline } else { MappingScheme::Strided };
        let p = FftProblem::random(1 << l, batch, seed).unwrap();
        let out = run_tile(&p, s, ScheduleVariant::ALL[v], &cfg).unwrap();
        prop_assert!(relative_error(out.data(), p.fft_all().data()) < 1e-5);
    }
}

use pimfft_core::experiments::{driver, DRIVERS, HEADLINE_GPU_UTILIZATION};
use pimfft_core::fft::relative_error;
use pimfft_core::planner::{best_collaborative, enumerate_tiles, plan, simulate_plan, FUNCTIONAL_LIMIT};
use pimfft_core::timing::{
    bw_multiplier, full_batch, gpu_kernel_count, gpu_time_ns, single_command_speedup, tile_report,
};
use pimfft_core::{ConfigError, FftProblem, MachineConfig, MappingScheme, PlannerError, ScheduleVariant};
use proptest::prelude::*;

#[test]
fn config_round_trip_and_errors() {
    let cfg = MachineConfig::default();
    assert_eq!(MachineConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
    let partial = MachineConfig::from_toml_str("rf_registers = 32\nrow_bytes = 2048\n").unwrap();
    assert_eq!((partial.rf_registers, partial.row_bytes, partial.stacks), (32, 2048, 4));
    match MachineConfig::from_toml_str("rf_regs = 3") {
        Err(ConfigError::Parse(msg)) => assert!(msg.contains("rf_regs")),
        other => panic!("{other:?}"),
    }
    match cfg.with("nope", "1") {
        Err(ConfigError::UnknownKey { valid, .. }) => assert!(valid.contains("rf_registers")),
        other => panic!("{other:?}"),
    }
    assert_eq!(cfg.with("rows_per_bank", "2^12").unwrap().rows_per_bank, 4096);
    assert!(matches!(cfg.with("rf_registers", "x"), Err(ConfigError::BadValue { .. })));
    assert!(matches!(cfg.with("row_bytes", "1000"), Err(ConfigError::Invalid(_))));
    assert!(matches!(cfg.with("gpu_utilization", "1.5"), Err(ConfigError::Invalid(_))));
    let headline = MachineConfig::from_toml_str(include_str!("../../../configs/headline.toml")).unwrap();
    assert_eq!(headline.gpu_utilization, HEADLINE_GPU_UTILIZATION);
}

#[test]
fn derived_quantities() {
    let cfg = MachineConfig::default();
    assert_eq!(cfg.total_units(), 1024);
    assert_eq!(full_batch(&cfg), 8192);
    assert!((cfg.pim_op_period_ns() - 3.333_333).abs() < 1e-6);
    assert_eq!(cfg.row_switch_ns(), 30.0);
    assert!((gpu_time_ns(1 << 20, 1, 2, &cfg) - 13_653.33).abs() < 0.01);
    assert_eq!(gpu_kernel_count(1 << 13, &cfg), 1);
    assert_eq!(gpu_kernel_count(1 << 14, &cfg), 2);
}

#[test]
fn multiplier_is_a_quarter_of_the_banks() {
    for banks in [8usize, 16, 32, 64] {
        let cfg = MachineConfig::default()
            .with("banks_per_pseudo_channel", &banks.to_string()).unwrap()
            .with("pim_units_per_pseudo_channel", &(banks / 2).to_string()).unwrap();
        assert_eq!(bw_multiplier(&cfg), banks as f64 / 4.0);
    }
}

#[test]
fn report_fields_consistent() {
    let cfg = MachineConfig::default();
    let r = tile_report(MappingScheme::Strided, 1 << 7, 3 * full_batch(&cfg), ScheduleVariant::HwOpt, &cfg).unwrap();
    let gpu = gpu_time_ns(1 << 7, r.batch, 1, &cfg);
    assert!((r.speedup - gpu / r.pim_ns).abs() < 1e-12);
    assert!((r.dm_savings - r.bytes_gpu_only / r.bytes_plan).abs() < 1e-12);
    assert_eq!(r.offload_fraction, 1.0);
    assert_eq!(r.row_switches % 3, 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn doubling_units_halves_time(l in 5u32..=13, v in 0usize..4) {
        let cfg = MachineConfig::default();
        let doubled = cfg.with("pim_units_per_pseudo_channel", "16").unwrap();
        let batch = full_batch(&doubled);
        let v = ScheduleVariant::ALL[v];
        let a = tile_report(MappingScheme::Strided, 1 << l, batch, v, &cfg).unwrap();
        let b = tile_report(MappingScheme::Strided, 1 << l, batch, v, &doubled).unwrap();
        prop_assert_eq!(a.pim_ns, 2.0 * b.pim_ns);
    }

    #[test]
    fn plans_never_lose_to_the_gpu(l in 13u32..=30, v in 0usize..4, u in 0.3f64..=1.0) {
        let cfg = MachineConfig::default().with("gpu_utilization", &u.to_string()).unwrap();
        let p = plan(1 << l, 1, ScheduleVariant::ALL[v], &cfg).unwrap();
        prop_assert!(p.report.speedup >= 1.0);
        prop_assert_eq!(p.uses_pim(), p.report.offload_fraction > 0.0);
        let staged: f64 = p.stages.iter().map(|s| s.ns).sum();
        prop_assert!((staged - p.total_ns()).abs() < 1e-6 * staged);
    }
}

#[test]
fn better_variants_never_plan_slower() {
    for u in ["1.0", "0.55"] {
        let cfg = MachineConfig::default().with("gpu_utilization", u).unwrap();
        for l in 13..=30u32 {
            let t: Vec<f64> = ScheduleVariant::ALL.iter().map(|v| plan(1 << l, 1, *v, &cfg).unwrap().total_ns()).collect();
            assert!(t.windows(2).all(|w| w[1] <= w[0]), "2^{l} at {u}: {t:?}");
        }
    }
    let cfg = MachineConfig::default();
    for l in 5..=13u32 {
        let t: Vec<f64> = ScheduleVariant::ALL
            .iter()
            .map(|v| tile_report(MappingScheme::Strided, 1 << l, full_batch(&cfg), *v, &cfg).unwrap().pim_ns)
            .collect();
        assert!(t.windows(2).all(|w| w[1] <= w[0]), "tile 2^{l}: {t:?}");
    }
}

#[test]
fn planner_tiles_and_errors() {
    let cfg = MachineConfig::default();
    assert!(enumerate_tiles(1 << 13, &cfg).unwrap().is_empty());
    assert!(best_collaborative(1 << 13, 1, ScheduleVariant::SwHwOpt, &cfg).unwrap().is_none());
    assert!(matches!(plan(1 << 31, 1, ScheduleVariant::SwHwOpt, &cfg), Err(PlannerError::TooLarge { .. })));
    assert!(plan(3 << 20, 1, ScheduleVariant::SwHwOpt, &cfg).is_err());
    let p = plan(1 << 20, 1, ScheduleVariant::SwHwOpt, &cfg).unwrap();
    assert_eq!(p.tile, None);
    assert_eq!(p.report.speedup, 1.0);
    assert!(p.describe().contains("GPU only"));
    assert!(p.to_toml().contains("tile = 0"));
}

#[test]
fn collaborative_plans_compute_the_transform() {
    let cfg = MachineConfig::default();
    for l in 14..=20u32 {
        let v = ScheduleVariant::ALL[(l % 4) as usize];
        let p = best_collaborative(1 << l, 1, v, &cfg).unwrap().unwrap();
        let problem = FftProblem::random(1 << l, 1, l as u64).unwrap();
        let out = simulate_plan(&problem, &p, &cfg).unwrap();
        let err = relative_error(out.data(), problem.fft_all().data());
        assert!(err < 1e-4, "2^{l} tile {:?}: {err}", p.tile);
    }
    let p = plan(1 << 21, 1, ScheduleVariant::SwHwOpt, &cfg).unwrap();
    let big = FftProblem::zeros(1 << 21, 1).unwrap();
    assert!(matches!(simulate_plan(&big, &p, &cfg), Err(PlannerError::FunctionalLimit(_))));
    assert_eq!(FUNCTIONAL_LIMIT, 1 << 20);
    let small = FftProblem::zeros(1 << 14, 1).unwrap();
    assert!(matches!(simulate_plan(&small, &p, &cfg), Err(PlannerError::Mismatch { .. })));
}

#[test]
fn single_command_bound() {
    let cfg = MachineConfig::default();
    for l in 5..=13u32 {
        let base = tile_report(MappingScheme::Strided, 1 << l, full_batch(&cfg), ScheduleVariant::PimBase, &cfg).unwrap();
        assert!(single_command_speedup(1 << l, &cfg).unwrap() > base.speedup);
    }
}

#[test]
fn drivers_are_deterministic() {
    let cfg = MachineConfig::default();
    assert_eq!(DRIVERS.len(), 10);
    for d in DRIVERS {
        let a = (d.run)(&cfg).unwrap();
        let b = (d.run)(&cfg).unwrap();
        assert!(!a.rows.is_empty(), "{}", d.name);
        assert!(a.rows.iter().all(|r| r.len() == a.columns.len() && r.iter().all(|v| v.is_finite())));
        assert_eq!(a.to_csv(), b.to_csv());
        assert!(a.to_xy().starts_with("# "));
        assert_eq!(a.to_txt().lines().count(), a.rows.len() + 2);
    }
    assert!(driver("nope").is_err());
}

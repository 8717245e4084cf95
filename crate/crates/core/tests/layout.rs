use std::collections::HashSet;

use pimfft_core::layout::capacity;
use pimfft_core::{Component, FftProblem, LayoutError, MachineConfig, MappingLayout, MappingScheme};
use proptest::prelude::*;

fn scheme() -> impl Strategy<Value = MappingScheme> {
    prop_oneof![Just(MappingScheme::Strided), Just(MappingScheme::Baseline)]
}

proptest! {
    #[test]
    fn load_readback_round_trip(s in scheme(), l in 3u32..=10, batch in 1usize..40, seed in any::<u64>()) {
        let cfg = MachineConfig::default();
        let p = FftProblem::random(1 << l, batch, seed).unwrap();
        let layout = MappingLayout::new(s, p.size(), batch, &cfg).unwrap();
        let state = layout.load(&p, &cfg).unwrap();
        prop_assert_eq!(layout.readback(&state), p);
    }

    #[test]
    fn addresses_are_distinct(s in scheme(), l in 3u32..=8, batch in 1usize..24) {
        let cfg = MachineConfig::default().with("stacks", "1").unwrap()
            .with("pseudo_channels_per_stack", "1").unwrap();
        let layout = MappingLayout::new(s, 1 << l, batch, &cfg).unwrap();
        let mut seen = HashSet::new();
        for j in 0..batch {
            for i in 0..1usize << l {
                for c in [Component::Real, Component::Imag] {
                    let a = layout.address_of(j, i, c);
                    prop_assert!((a.word as usize) < cfg.words_per_row() && a.lane < cfg.lanes());
                    prop_assert!(seen.insert((a.stack, a.pseudo_channel, a.unit, a.parity, a.row, a.word, a.lane)));
                }
            }
        }
    }
}

#[test]
fn strided_keeps_a_transform_in_one_lane() {
    let cfg = MachineConfig::default();
    let layout = MappingLayout::new(MappingScheme::Strided, 64, 16, &cfg).unwrap();
    let a = layout.address_of(3, 40, Component::Imag);
    assert_eq!((a.unit, a.row, a.word, a.lane), (0, 1, 8, 3));
    let b = layout.address_of(11, 40, Component::Real);
    assert_eq!((b.unit, b.row, b.word, b.lane), (1, 1, 8, 3));
}

#[test]
fn baseline_spreads_a_transform_over_lanes() {
    let cfg = MachineConfig::default();
    let layout = MappingLayout::new(MappingScheme::Baseline, 64, 8, &cfg).unwrap();
    let lanes: HashSet<usize> = (0..8).map(|i| layout.address_of(0, i, Component::Real).lane).collect();
    assert_eq!(lanes.len(), 8);
    assert_eq!(layout.address_of(2, 9, Component::Real).word, 2 * 8 + 1);
}

#[test]
fn capacity_limits() {
    let cfg = MachineConfig::default();
    assert_eq!(capacity(MappingScheme::Strided, &cfg), 1 << 18);
    assert_eq!(capacity(MappingScheme::Baseline, &cfg), 1 << 21);
    assert!(matches!(
        MappingLayout::new(MappingScheme::Strided, 1 << 19, 8, &cfg),
        Err(LayoutError::Capacity { capacity: 262_144, .. })
    ));
    assert!(MappingLayout::new(MappingScheme::Baseline, 1 << 19, 8, &cfg).is_ok());
    assert!(matches!(MappingLayout::new(MappingScheme::Baseline, 4, 8, &cfg), Err(LayoutError::TooSmall { .. })));
    assert!(matches!(MappingLayout::new(MappingScheme::Strided, 1 << 18, 1 << 15, &cfg), Err(LayoutError::Rows { .. })));
}

#[test]
fn rounds_and_replication() {
    let cfg = MachineConfig::default();
    let full = cfg.total_units() * cfg.lanes();
    let layout = MappingLayout::new(MappingScheme::Strided, 32, 2 * full + 1, &cfg).unwrap();
    assert_eq!(layout.rounds(), 3);
    let r = layout.replication();
    assert_eq!((r.stacks, r.pseudo_channels, r.units), (4, 128, 1024));
    let small = MappingLayout::new(MappingScheme::Strided, 32, 16, &cfg).unwrap().replication();
    assert_eq!((small.stacks, small.pseudo_channels, small.units, small.rounds), (1, 1, 2, 1));
}

#[test]
fn shape_mismatch() {
    let cfg = MachineConfig::default();
    let layout = MappingLayout::new(MappingScheme::Strided, 32, 8, &cfg).unwrap();
    let p = FftProblem::zeros(32, 9).unwrap();
    assert!(matches!(layout.load(&p, &cfg), Err(LayoutError::Shape { .. })));
}

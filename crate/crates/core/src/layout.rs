//! Placement of a batch of transforms onto bank pairs.
//!
//! Every unit owns an even bank (real parts) and an odd bank (imaginary parts)
//! and holds `lanes` transforms. A unit's storage is addressed by *slot*: slot
//! `s` is word `s mod words_per_row` of row `s div words_per_row`, one slot per
//! element position, so a round of `n` slots spans `n / words_per_row` rows.

use thiserror::Error;

use crate::config::MachineConfig;
use crate::fft::{ComplexSample, FftError, FftProblem};
use crate::machine::{MachineState, Parity, Replication};

/// Largest transform the strided layout accepts.
pub const STRIDED_CAP: usize = 1 << 18;
/// Largest transform the baseline layout accepts.
pub const BASELINE_CAP: usize = 1 << 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MappingScheme {
    /// Element `i` of transform `j` sits in lane `j mod lanes`, slot `i`.
    Strided,
    /// Element `i` sits in lane `i mod lanes`; each transform owns a
    /// contiguous range of slots.
    Baseline,
}

impl MappingScheme {
    pub fn name(self) -> &'static str {
        match self {
            MappingScheme::Strided => "strided",
            MappingScheme::Baseline => "baseline",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Component {
    Real,
    Imag,
}

impl Component {
    pub fn parity(self) -> Parity {
        match self {
            Component::Real => Parity::Even,
            Component::Imag => Parity::Odd,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PimAddress {
    pub stack: usize,
    pub pseudo_channel: usize,
    pub unit: usize,
    pub parity: Parity,
    pub row: u32,
    pub word: u32,
    pub lane: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LayoutError {
    #[error("size {size} exceeds the {scheme} capacity of {capacity}")]
    Capacity { scheme: &'static str, size: usize, capacity: usize },
    #[error("the baseline layout needs at least {lanes} elements per transform, got {size}")]
    TooSmall { size: usize, lanes: usize },
    #[error("{needed} rows per bank needed, rows_per_bank is {available}")]
    Rows { needed: usize, available: usize },
    #[error("problem has size {got_size} x {got_batch}, layout expects {size} x {batch}")]
    Shape { size: usize, batch: usize, got_size: usize, got_batch: usize },
    #[error(transparent)]
    Fft(#[from] FftError),
}

/// Largest transform size `scheme` supports under `cfg`.
pub fn capacity(scheme: MappingScheme, cfg: &MachineConfig) -> usize {
    let slots = cfg.rows_per_bank * cfg.words_per_row();
    match scheme {
        MappingScheme::Strided => STRIDED_CAP.min(slots),
        MappingScheme::Baseline => BASELINE_CAP.min(slots * cfg.lanes()),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingLayout {
    scheme: MappingScheme,
    size: usize,
    batch: usize,
    lanes: usize,
    words_per_row: usize,
    units_per_pch: usize,
    pch_per_stack: usize,
    total_units: usize,
    rows_per_round: usize,
    rounds: usize,
    active_units: usize,
}

impl MappingLayout {
    pub fn new(
        scheme: MappingScheme,
        size: usize,
        batch: usize,
        cfg: &MachineConfig,
    ) -> Result<Self, LayoutError> {
        if !size.is_power_of_two() {
            return Err(FftError::NotPowerOfTwo(size).into());
        }
        if batch == 0 {
            return Err(FftError::EmptyBatch.into());
        }
        let cap = capacity(scheme, cfg);
        if size > cap {
            return Err(LayoutError::Capacity { scheme: scheme.name(), size, capacity: cap });
        }
        let lanes = cfg.lanes();
        if scheme == MappingScheme::Baseline && size < lanes {
            return Err(LayoutError::TooSmall { size, lanes });
        }
        let wpr = cfg.words_per_row();
        let rows_per_round = size.div_ceil(wpr);
        let total_units = cfg.total_units();
        let groups = batch.div_ceil(lanes);
        let rounds = groups.div_ceil(total_units);
        let needed = rounds * rows_per_round;
        if needed > cfg.rows_per_bank {
            return Err(LayoutError::Rows { needed, available: cfg.rows_per_bank });
        }
        Ok(MappingLayout {
            scheme,
            size,
            batch,
            lanes,
            words_per_row: wpr,
            units_per_pch: cfg.pim_units_per_pseudo_channel,
            pch_per_stack: cfg.pseudo_channels_per_stack,
            total_units,
            rows_per_round,
            rounds,
            active_units: groups.min(total_units),
        })
    }

    pub fn scheme(&self) -> MappingScheme {
        self.scheme
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn lanes(&self) -> usize {
        self.lanes
    }

    pub fn words_per_row(&self) -> usize {
        self.words_per_row
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn rows_per_round(&self) -> usize {
        self.rows_per_round
    }

    /// Units holding data in each round.
    pub fn active_units(&self) -> usize {
        self.active_units
    }

    /// Transforms sharing one unit's slot space.
    pub fn regions(&self) -> usize {
        match self.scheme {
            MappingScheme::Strided => 1,
            MappingScheme::Baseline => self.lanes,
        }
    }

    /// Slots per region.
    pub fn region_len(&self) -> usize {
        self.size / self.regions()
    }

    pub fn replication(&self) -> Replication {
        let pch = self.active_units.div_ceil(self.units_per_pch);
        Replication {
            stacks: pch.div_ceil(self.pch_per_stack),
            pseudo_channels: pch,
            units: self.active_units,
            rounds: self.rounds,
        }
    }

    /// Round, unit within the round, slot and lane of element `i` of transform `j`.
    fn place(&self, j: usize, i: usize) -> (usize, usize, usize, usize) {
        let group = j / self.lanes;
        let (round, unit) = (group / self.total_units, group % self.total_units);
        let (slot, lane) = match self.scheme {
            MappingScheme::Strided => (i, j % self.lanes),
            MappingScheme::Baseline => {
                ((j % self.lanes) * self.region_len() + i / self.lanes, i % self.lanes)
            }
        };
        (round, unit, slot, lane)
    }

    pub fn address_of(&self, j: usize, i: usize, comp: Component) -> PimAddress {
        assert!(j < self.batch && i < self.size, "element ({j}, {i}) outside the layout");
        let (round, unit, slot, lane) = self.place(j, i);
        let pch = unit / self.units_per_pch;
        PimAddress {
            stack: pch / self.pch_per_stack,
            pseudo_channel: pch % self.pch_per_stack,
            unit: unit % self.units_per_pch,
            parity: comp.parity(),
            row: (round * self.rows_per_round + slot / self.words_per_row) as u32,
            word: (slot % self.words_per_row) as u32,
            lane,
        }
    }

    fn check(&self, p: &FftProblem) -> Result<(), LayoutError> {
        if p.size() != self.size || p.batch() != self.batch {
            return Err(LayoutError::Shape {
                size: self.size,
                batch: self.batch,
                got_size: p.size(),
                got_batch: p.batch(),
            });
        }
        Ok(())
    }

    fn locate(&self, j: usize, i: usize) -> (usize, u32, u32, usize) {
        let (round, unit, slot, lane) = self.place(j, i);
        let row = (round * self.rows_per_round + slot / self.words_per_row) as u32;
        (unit, row, (slot % self.words_per_row) as u32, lane)
    }

    /// Writes the problem into a fresh memory image.
    pub fn load(&self, problem: &FftProblem, cfg: &MachineConfig) -> Result<MachineState, LayoutError> {
        self.check(problem)?;
        let mut state = MachineState::new(cfg, self.active_units);
        for j in 0..self.batch {
            for (i, z) in problem.transform(j).iter().enumerate() {
                let (u, row, word, lane) = self.locate(j, i);
                state.write(u, Parity::Even, row, word, lane, z.re);
                state.write(u, Parity::Odd, row, word, lane, z.im);
            }
        }
        Ok(state)
    }

    /// Reads every transform back in natural order.
    pub fn readback(&self, state: &MachineState) -> FftProblem {
        self.readback_with(state, |k| k)
    }

    /// Reads output element `k` of each transform from element position `position(k)`.
    pub fn readback_with(&self, state: &MachineState, position: impl Fn(usize) -> usize) -> FftProblem {
        let mut data = Vec::with_capacity(self.size * self.batch);
        for j in 0..self.batch {
            for k in 0..self.size {
                let (u, row, word, lane) = self.locate(j, position(k));
                data.push(ComplexSample::new(
                    state.read(u, Parity::Even, row, word, lane),
                    state.read(u, Parity::Odd, row, word, lane),
                ));
            }
        }
        FftProblem::new(self.size, self.batch, data).expect("layout shape is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capacities() {
        let cfg = MachineConfig::default();
        assert_eq!(capacity(MappingScheme::Strided, &cfg), 1 << 18);
        assert_eq!(capacity(MappingScheme::Baseline, &cfg), 1 << 21);
        let small = cfg.with("rows_per_bank", "1024").unwrap();
        assert_eq!(capacity(MappingScheme::Strided, &small), 1 << 15);
    }

    #[test]
    fn address_examples() {
        let cfg = MachineConfig::default();
        let l = MappingLayout::new(MappingScheme::Strided, 64, 8, &cfg).unwrap();
        let a = l.address_of(3, 5, Component::Imag);
        assert_eq!(
            (a.unit, a.parity, a.row, a.word, a.lane),
            (0, Parity::Odd, 0, 5, 3)
        );
        assert_eq!(l.address_of(0, 31, Component::Real).row, 0);
        assert_eq!(l.address_of(0, 32, Component::Real).row, 1);
        let b = MappingLayout::new(MappingScheme::Baseline, 64, 8, &cfg).unwrap();
        let a = b.address_of(0, 1, Component::Real);
        assert_eq!((a.unit, a.parity, a.row, a.word, a.lane), (0, Parity::Even, 0, 0, 1));
    }

    #[test]
    fn capacity_error() {
        let cfg = MachineConfig::default();
        assert!(matches!(
            MappingLayout::new(MappingScheme::Strided, 1 << 19, 8, &cfg),
            Err(LayoutError::Capacity { .. })
        ));
    }
}

use std::collections::HashMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::config::MachineConfig;

use super::command::{Coef, MovDir, Operand, Parity, PimCommand, Reg};

const MAX_LANES: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StreamFault {
    #[error("row {row} is beyond the bank")]
    Row { row: u64 },
    #[error("word {word} is beyond the row")]
    Word { word: u32 },
    #[error("register {reg} is beyond the register file")]
    Register { reg: u16 },
    #[error("{parity} bank read or written before any row was opened")]
    ReadBeforeOpen { parity: Parity },
    #[error("shift by {lanes} lanes")]
    Shift { lanes: i32 },
    #[error("lane-wise coefficient has {got} lanes")]
    CoefWidth { got: usize },
    #[error("fused add/subtract writes the same register twice")]
    SameDestination,
}

/// A stream fault together with the index of the offending command.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("command {index}: {fault}")]
pub struct Violation {
    pub index: usize,
    pub fault: StreamFault,
}

/// Static checks: operand bounds and row-buffer use before a row is open.
pub fn validate(commands: &[PimCommand], cfg: &MachineConfig) -> Vec<Violation> {
    let lanes = cfg.lanes();
    let words = cfg.words_per_row() as u32;
    let mut opened = [false; 2];
    let mut out = Vec::new();
    for (index, cmd) in commands.iter().enumerate() {
        let mut faults = Vec::new();
        let was_open = opened;
        let reg = |r: &Reg, faults: &mut Vec<StreamFault>| {
            if r.0 as usize >= cfg.rf_registers {
                faults.push(StreamFault::Register { reg: r.0 });
            }
        };
        let rowbuf = |p: Parity, w: u32, faults: &mut Vec<StreamFault>| {
            if w >= words {
                faults.push(StreamFault::Word { word: w });
            }
            if !was_open[p.index()] {
                faults.push(StreamFault::ReadBeforeOpen { parity: p });
            }
        };
        let operand = |o: &Operand, faults: &mut Vec<StreamFault>| match o {
            Operand::RowBufWord { parity, word } => rowbuf(*parity, *word, faults),
            Operand::Register(r) => reg(r, faults),
        };
        let coef = |c: &Coef, faults: &mut Vec<StreamFault>| {
            if let Coef::Lanes(v) = c {
                if v.len() != lanes {
                    faults.push(StreamFault::CoefWidth { got: v.len() });
                }
            }
        };
        match cmd {
            PimCommand::RowOpen { parity, row } => {
                if *row as usize >= cfg.rows_per_bank {
                    faults.push(StreamFault::Row { row: *row as u64 });
                } else {
                    opened[parity.index()] = true;
                }
            }
            PimCommand::Madd { dst, a, sa, b, sb } => {
                operand(a, &mut faults);
                operand(b, &mut faults);
                coef(sa, &mut faults);
                coef(sb, &mut faults);
                reg(dst, &mut faults);
            }
            PimCommand::MaddSub { dst_add, dst_sub, c, m, s } => {
                operand(c, &mut faults);
                operand(m, &mut faults);
                coef(s, &mut faults);
                reg(dst_add, &mut faults);
                reg(dst_sub, &mut faults);
                if dst_add == dst_sub {
                    faults.push(StreamFault::SameDestination);
                }
            }
            PimCommand::Mov { reg: r, parity, word, .. } => {
                reg(r, &mut faults);
                rowbuf(*parity, *word, &mut faults);
            }
            PimCommand::Shift { reg: r, lanes: k } => {
                reg(r, &mut faults);
                if k.unsigned_abs() as usize >= lanes {
                    faults.push(StreamFault::Shift { lanes: *k });
                }
            }
        }
        out.extend(faults.into_iter().map(|fault| Violation { index, fault }));
    }
    out
}

#[derive(Debug, Clone, Default)]
struct Bank {
    rows: HashMap<u32, Box<[f32]>>,
    open: Option<u32>,
}

/// Banks and register file of one PIM unit.
#[derive(Debug, Clone)]
pub struct UnitState {
    banks: [Bank; 2],
    regs: Vec<f32>,
}

/// Memory image and register state of the active PIM units.
///
/// Rows are allocated on first touch and read as zero before that.
#[derive(Debug, Clone)]
pub struct MachineState {
    lanes: usize,
    words_per_row: usize,
    rows_per_bank: usize,
    units: Vec<UnitState>,
}

impl MachineState {
    pub fn new(cfg: &MachineConfig, units: usize) -> Self {
        let unit = UnitState {
            banks: [Bank::default(), Bank::default()],
            regs: vec![0.0; cfg.rf_registers * cfg.lanes()],
        };
        MachineState {
            lanes: cfg.lanes(),
            words_per_row: cfg.words_per_row(),
            rows_per_bank: cfg.rows_per_bank,
            units: vec![unit; units],
        }
    }

    pub fn units(&self) -> usize {
        self.units.len()
    }

    pub fn lanes(&self) -> usize {
        self.lanes
    }

    fn row_len(&self) -> usize {
        self.lanes * self.words_per_row
    }

    pub fn read(&self, unit: usize, parity: Parity, row: u32, word: u32, lane: usize) -> f32 {
        let bank = &self.units[unit].banks[parity.index()];
        bank.rows
            .get(&row)
            .map_or(0.0, |r| r[word as usize * self.lanes + lane])
    }

    pub fn write(&mut self, unit: usize, parity: Parity, row: u32, word: u32, lane: usize, v: f32) {
        let len = self.row_len();
        let lanes = self.lanes;
        let bank = &mut self.units[unit].banks[parity.index()];
        let r = bank.rows.entry(row).or_insert_with(|| vec![0.0; len].into_boxed_slice());
        r[word as usize * lanes + lane] = v;
    }

    pub fn register(&self, unit: usize, reg: Reg) -> &[f32] {
        let l = self.lanes;
        &self.units[unit].regs[reg.0 as usize * l..(reg.0 as usize + 1) * l]
    }

    pub fn open_row(&self, unit: usize, parity: Parity) -> Option<u32> {
        self.units[unit].banks[parity.index()].open
    }

    /// Runs `commands` on every unit, with every row address shifted by
    /// `row_offset`. Invalid streams fault before anything executes.
    pub fn execute(
        &mut self,
        commands: &[PimCommand],
        cfg: &MachineConfig,
        row_offset: u32,
    ) -> Result<(), Violation> {
        if let Some(v) = validate(commands, cfg).into_iter().next() {
            return Err(v);
        }
        for (index, c) in commands.iter().enumerate() {
            if let PimCommand::RowOpen { row, .. } = c {
                let r = *row as u64 + row_offset as u64;
                if r >= self.rows_per_bank as u64 {
                    return Err(Violation { index, fault: StreamFault::Row { row: r } });
                }
            }
        }
        let lanes = self.lanes;
        let row_len = self.row_len();
        self.units
            .par_iter_mut()
            .for_each(|u| run_unit(u, commands, lanes, row_len, row_offset));
        Ok(())
    }
}

fn fetch(u: &UnitState, op: &Operand, lanes: usize, out: &mut [f32; MAX_LANES]) {
    match op {
        Operand::Register(r) => {
            let s = r.0 as usize * lanes;
            out[..lanes].copy_from_slice(&u.regs[s..s + lanes]);
        }
        Operand::RowBufWord { parity, word } => {
            let bank = &u.banks[parity.index()];
            let row = bank.open.expect("validated: row open");
            let data = &bank.rows[&row];
            let s = *word as usize * lanes;
            out[..lanes].copy_from_slice(&data[s..s + lanes]);
        }
    }
}

fn store(u: &mut UnitState, reg: Reg, lanes: usize, v: &[f32; MAX_LANES]) {
    let s = reg.0 as usize * lanes;
    u.regs[s..s + lanes].copy_from_slice(&v[..lanes]);
}

fn run_unit(u: &mut UnitState, commands: &[PimCommand], lanes: usize, row_len: usize, offset: u32) {
    let mut a = [0.0f32; MAX_LANES];
    let mut b = [0.0f32; MAX_LANES];
    let mut y = [0.0f32; MAX_LANES];
    let mut z = [0.0f32; MAX_LANES];
    for cmd in commands {
        match cmd {
            PimCommand::RowOpen { parity, row } => {
                let row = row + offset;
                let bank = &mut u.banks[parity.index()];
                bank.rows.entry(row).or_insert_with(|| vec![0.0; row_len].into_boxed_slice());
                bank.open = Some(row);
            }
            PimCommand::Madd { dst, a: sa_op, sa, b: sb_op, sb } => {
                fetch(u, sa_op, lanes, &mut a);
                fetch(u, sb_op, lanes, &mut b);
                for l in 0..lanes {
                    let p = sa.at(l) * a[l];
                    let q = sb.at(l) * b[l];
                    y[l] = p + q;
                }
                store(u, *dst, lanes, &y);
            }
            PimCommand::MaddSub { dst_add, dst_sub, c, m, s } => {
                fetch(u, c, lanes, &mut a);
                fetch(u, m, lanes, &mut b);
                for l in 0..lanes {
                    let p = s.at(l) * b[l];
                    y[l] = a[l] + p;
                    z[l] = a[l] - p;
                }
                store(u, *dst_add, lanes, &y);
                store(u, *dst_sub, lanes, &z);
            }
            PimCommand::Mov { dir, reg, parity, word } => {
                let bank = &mut u.banks[parity.index()];
                let row = bank.open.expect("validated: row open");
                let data = bank.rows.get_mut(&row).expect("allocated on open");
                let s = *word as usize * lanes;
                let r = reg.0 as usize * lanes;
                match dir {
                    MovDir::ToRegister => u.regs[r..r + lanes].copy_from_slice(&data[s..s + lanes]),
                    MovDir::ToRowBuf => data[s..s + lanes].copy_from_slice(&u.regs[r..r + lanes]),
                }
            }
            PimCommand::Shift { reg, lanes: k } => {
                let r = reg.0 as usize * lanes;
                let k = k.rem_euclid(lanes as i32) as usize;
                u.regs[r..r + lanes].rotate_right(k);
            }
        }
    }
}

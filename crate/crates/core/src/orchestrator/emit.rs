//! Register allocation and the per-butterfly command templates.

use num_complex::Complex32;

use crate::fft::TwiddleClass;
use crate::machine::{Coef, CommandSink, MovDir, Operand, Parity, PimCommand, Reg};

use super::{OrchestratorError, ScheduleVariant};

/// Real and imaginary part of one element, wherever they currently live.
pub(crate) type Elem = [Operand; 2];

pub(crate) fn rowbuf(word: u32) -> Elem {
    [
        Operand::RowBufWord { parity: Parity::Even, word },
        Operand::RowBufWord { parity: Parity::Odd, word },
    ]
}

fn as_reg(o: Operand) -> Option<Reg> {
    match o {
        Operand::Register(r) => Some(r),
        Operand::RowBufWord { .. } => None,
    }
}

pub(crate) fn reg_of(o: Operand) -> Reg {
    as_reg(o).expect("element held in a register")
}

/// Emits commands while tracking the register file and the open rows.
///
/// Register operands handed to the butterfly helpers are consumed: the helper
/// either reuses them as destinations or frees them.
pub(crate) struct Emitter<'a, S: CommandSink> {
    sink: &'a mut S,
    free: Vec<bool>,
    in_use: usize,
    peak: usize,
    open: [Option<u32>; 2],
}

impl<'a, S: CommandSink> Emitter<'a, S> {
    pub fn new(sink: &'a mut S, registers: usize) -> Self {
        Emitter { sink, free: vec![true; registers], in_use: 0, peak: 0, open: [None, None] }
    }

    pub fn peak(&self) -> usize {
        self.peak
    }

    pub fn open_row(&self) -> Option<u32> {
        self.open[0]
    }

    pub fn alloc(&mut self) -> Result<Reg, OrchestratorError> {
        let i = self
            .free
            .iter()
            .position(|f| *f)
            .ok_or(OrchestratorError::RegisterPressure { registers: self.free.len() })?;
        self.free[i] = false;
        self.in_use += 1;
        self.peak = self.peak.max(self.in_use);
        Ok(Reg(i as u16))
    }

    pub fn release(&mut self, r: Reg) {
        debug_assert!(!self.free[r.0 as usize], "double free of {r}");
        self.free[r.0 as usize] = true;
        self.in_use -= 1;
    }

    fn release_op(&mut self, o: Operand) {
        if let Some(r) = as_reg(o) {
            self.release(r);
        }
    }

    /// Opens `row` in both banks of the pair.
    pub fn activate(&mut self, row: u32) {
        for parity in Parity::BOTH {
            if self.open[parity.index()] != Some(row) {
                self.sink.push(PimCommand::RowOpen { parity, row });
                self.open[parity.index()] = Some(row);
            }
        }
    }

    pub fn madd(&mut self, dst: Reg, a: Operand, sa: impl Into<Coef>, b: Operand, sb: impl Into<Coef>) {
        self.sink.push(PimCommand::Madd { dst, a, sa: sa.into(), b, sb: sb.into() });
    }

    pub fn maddsub(&mut self, dst_add: Reg, dst_sub: Reg, c: Operand, m: Operand, s: impl Into<Coef>) {
        self.sink.push(PimCommand::MaddSub { dst_add, dst_sub, c, m, s: s.into() });
    }

    pub fn load(&mut self, parity: Parity, word: u32) -> Result<Reg, OrchestratorError> {
        let reg = self.alloc()?;
        self.sink.push(PimCommand::Mov { dir: MovDir::ToRegister, reg, parity, word });
        Ok(reg)
    }

    /// Writes a register back into the open row and frees it.
    pub fn store(&mut self, reg: Reg, parity: Parity, word: u32) {
        self.sink.push(PimCommand::Mov { dir: MovDir::ToRowBuf, reg, parity, word });
        self.release(reg);
    }

    pub fn store_elem(&mut self, e: Elem, word: u32) {
        self.store(reg_of(e[0]), Parity::Even, word);
        self.store(reg_of(e[1]), Parity::Odd, word);
    }

    pub fn shift(&mut self, reg: Reg, lanes: i32) {
        self.sink.push(PimCommand::Shift { reg, lanes });
    }

    /// `(c + s*m, c - s*m)` as two multiply-adds.
    pub fn pair_madd(
        &mut self,
        c: Operand,
        m: Operand,
        s: Coef,
    ) -> Result<(Reg, Reg), OrchestratorError> {
        let add = self.alloc()?;
        self.madd(add, c, 1.0, m, s.clone());
        let neg = match s {
            Coef::Splat(v) => Coef::Splat(-v),
            Coef::Lanes(v) => Coef::Lanes(v.iter().map(|x| -x).collect()),
        };
        let sub = match (as_reg(m), as_reg(c)) {
            (Some(r), _) => {
                self.release_op(c);
                r
            }
            (None, Some(r)) => r,
            (None, None) => self.alloc()?,
        };
        self.madd(sub, c, 1.0, m, neg);
        Ok((add, sub))
    }

    /// `(c + s*m, c - s*m)` as one fused command.
    pub fn pair_maddsub(
        &mut self,
        c: Operand,
        m: Operand,
        s: Coef,
    ) -> Result<(Reg, Reg), OrchestratorError> {
        let add = match as_reg(c) {
            Some(r) => r,
            None => self.alloc()?,
        };
        let sub = match as_reg(m) {
            Some(r) => r,
            None => self.alloc()?,
        };
        self.maddsub(add, sub, c, m, s);
        Ok((add, sub))
    }

    pub fn pair(
        &mut self,
        fused: bool,
        c: Operand,
        m: Operand,
        s: Coef,
    ) -> Result<(Reg, Reg), OrchestratorError> {
        if fused {
            self.pair_maddsub(c, m, s)
        } else {
            self.pair_madd(c, m, s)
        }
    }
}

/// Command template of one butterfly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Template {
    /// `t = w*x2` in two multiply-adds, then four multiply-adds.
    Generic6,
    /// Trivial twiddle folded into four multiply-adds.
    Add4,
    /// `t = w*x2`, then one fused command per component.
    Fused4,
    /// Trivial twiddle, one fused command per component.
    Fused2,
    /// `x2r +- x2i` once, then one fused command per component.
    Fused3,
}

pub(crate) fn template(variant: ScheduleVariant, class: TwiddleClass) -> Template {
    use ScheduleVariant::*;
    use TwiddleClass::*;
    match (variant, class) {
        (PimBase, _) => Template::Generic6,
        (SwOpt, One | MinusJ) => Template::Add4,
        (SwOpt, _) => Template::Generic6,
        (HwOpt, _) => Template::Fused4,
        (SwHwOpt, One | MinusJ) => Template::Fused2,
        (SwHwOpt, SqrtHalf) => Template::Fused3,
        (SwHwOpt, Generic) => Template::Fused4,
    }
}

/// The part of a butterfly that only needs `x2`.
pub(crate) enum Prepared {
    /// `w*x2`.
    Product(Reg, Reg),
    /// `x2` itself.
    Held(Elem),
    /// `x2r + x2i` and `x2r - x2i`.
    SumDiff(Reg, Reg),
}

pub(crate) struct Butterfly {
    pub template: Template,
    pub class: TwiddleClass,
    pub w: Complex32,
}

impl Butterfly {
    pub fn new(variant: ScheduleVariant, class: TwiddleClass, w: Complex32) -> Self {
        Butterfly { template: template(variant, class), class, w }
    }

    /// First half of the butterfly. With `hold`, row-buffer operands of `x2`
    /// are copied into registers so the row may be closed afterwards.
    pub fn prepare<S: CommandSink>(
        &self,
        em: &mut Emitter<'_, S>,
        x2: Elem,
        hold: bool,
    ) -> Result<Prepared, OrchestratorError> {
        let [x2r, x2i] = x2;
        let (wr, wi) = (self.w.re, self.w.im);
        match self.template {
            Template::Generic6 | Template::Fused4 => {
                let tr = em.alloc()?;
                em.madd(tr, x2r, wr, x2i, -wi);
                let ti = match as_reg(x2r) {
                    Some(r) => r,
                    None => em.alloc()?,
                };
                em.madd(ti, x2i, wr, x2r, wi);
                em.release_op(x2i);
                Ok(Prepared::Product(tr, ti))
            }
            Template::Add4 | Template::Fused2 => {
                if !hold {
                    return Ok(Prepared::Held(x2));
                }
                let mut e = x2;
                for (k, o) in e.iter_mut().enumerate() {
                    if let Operand::RowBufWord { parity, word } = *o {
                        debug_assert_eq!(parity.index(), k);
                        *o = Operand::Register(em.load(parity, word)?);
                    }
                }
                Ok(Prepared::Held(e))
            }
            Template::Fused3 => {
                let (a, b) = em.pair_maddsub(x2r, x2i, Coef::Splat(1.0))?;
                Ok(Prepared::SumDiff(a, b))
            }
        }
    }

    /// Second half: returns `(x1 + w*x2, x1 - w*x2)`, both in registers.
    pub fn finish<S: CommandSink>(
        &self,
        em: &mut Emitter<'_, S>,
        x1: Elem,
        p: Prepared,
    ) -> Result<(Elem, Elem), OrchestratorError> {
        let fused = matches!(self.template, Template::Fused2 | Template::Fused3 | Template::Fused4);
        let [x1r, x1i] = x1;
        let one = Coef::Splat(1.0);
        let ((mr, sr), (mi, si)) = match p {
            Prepared::Product(tr, ti) => ((tr.into(), one.clone()), (ti.into(), one)),
            Prepared::Held([x2r, x2i]) => match self.class {
                TwiddleClass::One => ((x2r, one.clone()), (x2i, one)),
                TwiddleClass::MinusJ => ((x2i, one), (x2r, Coef::Splat(-1.0))),
                _ => unreachable!("held operands only for trivial twiddles"),
            },
            Prepared::SumDiff(a, b) => {
                let c = std::f32::consts::FRAC_1_SQRT_2;
                let (a, b) = (Operand::from(a), Operand::from(b));
                match (self.w.re > 0.0, self.w.im > 0.0) {
                    (true, false) => ((a, Coef::Splat(c)), (b, Coef::Splat(-c))),
                    (false, false) => ((b, Coef::Splat(-c)), (a, Coef::Splat(-c))),
                    (true, true) => ((b, Coef::Splat(c)), (a, Coef::Splat(c))),
                    (false, true) => ((a, Coef::Splat(-c)), (b, Coef::Splat(c))),
                }
            }
        };
        let (y1r, y2r) = em.pair(fused, x1r, mr, sr)?;
        let (y1i, y2i) = em.pair(fused, x1i, mi, si)?;
        Ok(([y1r.into(), y1i.into()], [y2r.into(), y2i.into()]))
    }
}

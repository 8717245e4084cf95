//! Pass partitioning and emission of a whole transform.
//!
//! The transform runs in place as radix-2 DIT on naturally ordered input, so
//! step `s` pairs positions that differ in bit `log2(n) - s` and the result
//! ends up at bit-reversed positions. Consecutive steps are fused into passes
//! that keep a group of `2^k` elements in registers. A pass whose first step
//! crosses rows computes `w*x2` while the row holding `x2` is open, switches
//! once, and finishes a batch of groups against the other row.

use std::sync::Arc;

use crate::config::MachineConfig;
use crate::fft::{bit_reverse, class_of_index, to32, twiddle64};
use crate::layout::{MappingLayout, MappingScheme};
use crate::machine::{Coef, CommandSink, Parity, StatsSink};

use super::emit::{rowbuf, Butterfly, Elem, Emitter};
use super::{OrchestratorError, ScheduleVariant};

/// Scratch registers a group needs on top of the values it holds.
const SCRATCH: usize = 2;

#[derive(Debug, Clone)]
pub(crate) struct Geometry {
    log_n: u32,
    lanes: usize,
    lane_log: u32,
    regions: usize,
    region_len: usize,
    /// Steps whose partners sit in different slots.
    word_steps: u32,
    w_log: u32,
}

impl Geometry {
    pub fn new(layout: &MappingLayout) -> Self {
        let n = layout.size();
        let lanes = layout.lanes();
        let baseline = layout.scheme() == MappingScheme::Baseline;
        let lane_log = if baseline { lanes.trailing_zeros() } else { 0 };
        Geometry {
            log_n: n.trailing_zeros(),
            lanes,
            lane_log,
            regions: layout.regions(),
            region_len: layout.region_len(),
            word_steps: n.trailing_zeros() - lane_log,
            w_log: layout.words_per_row().trailing_zeros(),
        }
    }

    fn slot(&self, region: usize, idx: usize) -> usize {
        region * self.region_len + idx
    }

    fn row_word(&self, slot: usize) -> (u32, u32) {
        ((slot >> self.w_log) as u32, (slot & ((1 << self.w_log) - 1)) as u32)
    }

    /// Slot-index bit paired by word-level step `step`.
    fn bit(&self, step: u32) -> u32 {
        self.word_steps - step
    }

    fn crosses_rows(&self, step: u32) -> bool {
        self.bit(step) >= self.w_log
    }

    /// Twiddle of the butterfly whose lower partner is at element position `q`.
    fn twiddle(&self, step: u32, q: usize) -> (usize, usize) {
        let j = bit_reverse(q, self.log_n) & ((1 << (step - 1)) - 1);
        (1 << step, j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Pass {
    pub first: u32,
    pub steps: u32,
}

pub(crate) struct Plan {
    pub passes: Vec<Pass>,
}

/// Largest group exponent whose registers fit the register file.
fn max_depth(registers: usize) -> u32 {
    let mut k = 1;
    while 2 * (1usize << (k + 1)) + SCRATCH <= registers {
        k += 1;
    }
    k
}

/// Groups finished per row switch in a row-crossing pass.
fn batch_size(registers: usize, group: usize) -> usize {
    registers.saturating_sub(SCRATCH + group) / group
}

struct Ctx<'g> {
    g: &'g Geometry,
    variant: ScheduleVariant,
    registers: usize,
}

impl Ctx<'_> {
    fn butterfly(&self, step: u32, idx: usize) -> Butterfly {
        let (m, j) = self.g.twiddle(step, idx << self.g.lane_log);
        Butterfly::new(self.variant, class_of_index(m, j), to32(twiddle64(m, j)))
    }

    fn valid(&self, p: Pass) -> bool {
        if p.steps == 0 || p.steps > max_depth(self.registers) {
            return false;
        }
        let cross = (p.first..p.first + p.steps).filter(|s| self.g.crosses_rows(*s)).count();
        match cross {
            0 => true,
            1 => {
                self.g.crosses_rows(p.first)
                    && batch_size(self.registers, 1 << p.steps) >= 1
            }
            _ => false,
        }
    }

    /// Slot index of member `t` of the group at `base`.
    fn member(&self, p: Pass, base: usize, t: usize) -> usize {
        let mut idx = base;
        for m in 0..p.steps {
            if (t >> (p.steps - 1 - m)) & 1 == 1 {
                idx |= 1 << self.g.bit(p.first + m);
            }
        }
        idx
    }

    /// Group bases in slot order, as (region, base index).
    fn bases(&self, p: Pass) -> Vec<(usize, usize)> {
        let mask: usize = (0..p.steps).map(|m| 1usize << self.g.bit(p.first + m)).sum();
        let mut out = Vec::with_capacity((self.g.regions * self.g.region_len) >> p.steps);
        for r in 0..self.g.regions {
            out.extend((0..self.g.region_len).filter(|i| i & mask == 0).map(|i| (r, i)));
        }
        out
    }

    /// Runs steps `from..` of the pass on a group whose members are already
    /// placed in `elems`.
    fn run_steps<S: CommandSink>(
        &self,
        em: &mut Emitter<'_, S>,
        p: Pass,
        base: usize,
        elems: &mut [Elem],
        from: u32,
    ) -> Result<(), OrchestratorError> {
        let g = elems.len();
        for m in from..p.steps {
            let half = g >> (m + 1);
            for t in (0..g).filter(|t| t & half == 0) {
                let bf = self.butterfly(p.first + m, self.member(p, base, t));
                let prep = bf.prepare(em, elems[t + half], false)?;
                let (y1, y2) = bf.finish(em, elems[t], prep)?;
                elems[t] = y1;
                elems[t + half] = y2;
            }
        }
        Ok(())
    }

    fn emit_pass<S: CommandSink>(&self, em: &mut Emitter<'_, S>, p: Pass) -> Result<(), OrchestratorError> {
        if self.g.crosses_rows(p.first) {
            self.emit_cross(em, p)
        } else {
            self.emit_local(em, p)
        }
    }

    fn emit_local<S: CommandSink>(&self, em: &mut Emitter<'_, S>, p: Pass) -> Result<(), OrchestratorError> {
        let mut bases = self.bases(p);
        let last = bases.last().map(|&(r, b)| self.g.row_word(self.g.slot(r, b)).0);
        if em.open_row().is_some() && em.open_row() == last {
            bases.reverse();
        }
        let g = 1usize << p.steps;
        let mut elems = vec![rowbuf(0); g];
        for (r, base) in bases {
            let row = self.g.row_word(self.g.slot(r, base)).0;
            em.activate(row);
            for (t, e) in elems.iter_mut().enumerate() {
                *e = rowbuf(self.g.row_word(self.g.slot(r, self.member(p, base, t))).1);
            }
            self.run_steps(em, p, base, &mut elems, 0)?;
            for (t, e) in elems.iter().enumerate() {
                em.store_elem(*e, self.g.row_word(self.g.slot(r, self.member(p, base, t))).1);
            }
        }
        Ok(())
    }

    fn emit_cross<S: CommandSink>(&self, em: &mut Emitter<'_, S>, p: Pass) -> Result<(), OrchestratorError> {
        let g = 1usize << p.steps;
        let half = g / 2;
        let b = batch_size(self.registers, g);
        let addr = |r: usize, idx: usize| self.g.row_word(self.g.slot(r, idx));
        let bases = self.bases(p);
        let mut start = 0;
        while start < bases.len() {
            // A family shares the same pair of rows.
            let row_a = addr(bases[start].0, bases[start].1).0;
            let mut end = start;
            while end < bases.len() && addr(bases[end].0, bases[end].1).0 == row_a {
                end += 1;
            }
            for chunk in bases[start..end].chunks(b) {
                let row_b = addr(chunk[0].0, self.member(p, chunk[0].1, half)).0;
                em.activate(row_b);
                let mut pending = Vec::with_capacity(chunk.len());
                for &(r, base) in chunk {
                    let mut preps = Vec::with_capacity(half);
                    for t in 0..half {
                        let bf = self.butterfly(p.first, self.member(p, base, t));
                        let x2 = rowbuf(addr(r, self.member(p, base, t + half)).1);
                        preps.push(bf.prepare(em, x2, true)?);
                    }
                    pending.push(preps);
                }
                em.activate(row_a);
                let mut outputs: Vec<Vec<Elem>> = Vec::with_capacity(chunk.len());
                for (&(r, base), preps) in chunk.iter().zip(pending) {
                    let mut elems = vec![rowbuf(0); g];
                    for (t, prep) in preps.into_iter().enumerate() {
                        let bf = self.butterfly(p.first, self.member(p, base, t));
                        let x1 = rowbuf(addr(r, self.member(p, base, t)).1);
                        let (y1, y2) = bf.finish(em, x1, prep)?;
                        elems[t] = y1;
                        elems[t + half] = y2;
                    }
                    self.run_steps(em, p, base, &mut elems, 1)?;
                    for (t, e) in elems.iter().enumerate().take(half) {
                        em.store_elem(*e, addr(r, self.member(p, base, t)).1);
                    }
                    outputs.push(elems);
                }
                em.activate(row_b);
                for (&(r, base), elems) in chunk.iter().zip(outputs) {
                    for (t, e) in elems.iter().enumerate().skip(half) {
                        em.store_elem(*e, addr(r, self.member(p, base, t)).1);
                    }
                }
            }
            start = end;
        }
        Ok(())
    }

    /// A step whose partners share a word (baseline layout only). Each word
    /// holds `lanes/2` butterflies with lane-dependent twiddles: the partner
    /// half is rotated into place, combined, and the lower outputs rotated back.
    fn emit_in_word<S: CommandSink>(
        &self,
        em: &mut Emitter<'_, S>,
        step: u32,
    ) -> Result<(), OrchestratorError> {
        let lanes = self.g.lanes;
        let d = 1usize << (self.g.log_n - step);
        let fused = self.variant.uses_maddsub();
        let mask: Arc<[f32]> = (0..lanes).map(|l| if l & d == 0 { 1.0 } else { 0.0 }).collect();
        let inv: Arc<[f32]> = mask.iter().map(|m| 1.0 - m).collect();
        let slots = self.g.regions * self.g.region_len;
        let mut order: Vec<usize> = (0..slots).collect();
        if em.open_row().is_some() && em.open_row() == Some(self.g.row_word(slots - 1).0) {
            order.reverse();
        }
        for slot in order {
            let (row, word) = self.g.row_word(slot);
            em.activate(row);
            let idx = slot % self.g.region_len;
            let mut wr = vec![0.0f32; lanes];
            let mut wi = vec![0.0f32; lanes];
            for l in (0..lanes).filter(|l| l & d == 0) {
                let (m, j) = self.g.twiddle(step, idx * lanes + l);
                let w = to32(twiddle64(m, j));
                wr[l] = w.re;
                wi[l] = w.im;
            }
            let neg_wi: Arc<[f32]> = wi.iter().map(|x| -x).collect();
            let (wr, wi): (Arc<[f32]>, Arc<[f32]>) = (wr.into(), wi.into());
            let pr = em.load(Parity::Even, word)?;
            em.shift(pr, -(d as i32));
            let pi = em.load(Parity::Odd, word)?;
            em.shift(pi, -(d as i32));
            let tr = em.alloc()?;
            em.madd(tr, pr.into(), Coef::Lanes(wr.clone()), pi.into(), Coef::Lanes(neg_wi));
            em.madd(pr, pi.into(), Coef::Lanes(wr), pr.into(), Coef::Lanes(wi));
            em.release(pi);
            let [own_r, own_i] = rowbuf(word);
            let one = Coef::Splat(1.0);
            let (y1r, y2r) = em.pair(fused, own_r, tr.into(), one.clone())?;
            let (y1i, y2i) = em.pair(fused, own_i, pr.into(), one)?;
            for (y1, y2, parity) in [(y1r, y2r, Parity::Even), (y1i, y2i, Parity::Odd)] {
                em.shift(y2, d as i32);
                em.madd(y1, y1.into(), Coef::Lanes(mask.clone()), y2.into(), Coef::Lanes(inv.clone()));
                em.release(y2);
                em.store(y1, parity, word);
            }
        }
        Ok(())
    }
}

/// Chooses the pass partition with the fewest issue slots, counting a row
/// switch as `tRP + tRCD` worth of slots.
pub(crate) fn plan_passes(
    g: &Geometry,
    variant: ScheduleVariant,
    cfg: &MachineConfig,
) -> Result<Plan, OrchestratorError> {
    let ctx = Ctx { g, variant, registers: cfg.rf_registers };
    let steps = g.word_steps;
    let switch = cfg.row_switch_ns() / cfg.pim_op_period_ns();
    let cost = |p: Pass| -> Result<f64, OrchestratorError> {
        let mut sink = StatsSink::new(cfg);
        let mut em = Emitter::new(&mut sink, cfg.rf_registers);
        ctx.emit_pass(&mut em, p)?;
        let s = sink.stats();
        Ok(s.column_commands() as f64 + switch * s.row_switches as f64)
    };
    // best[s]: cheapest way to run steps s..=steps.
    let mut best: Vec<Option<(f64, u32)>> = vec![None; steps as usize + 2];
    best[steps as usize + 1] = Some((0.0, 0));
    for s in (1..=steps).rev() {
        for k in 1..=steps - s + 1 {
            let p = Pass { first: s, steps: k };
            if !ctx.valid(p) {
                continue;
            }
            let Some((rest, _)) = best[(s + k) as usize] else { continue };
            let c = cost(p)? + rest;
            if best[s as usize].is_none_or(|(b, _)| c < b) {
                best[s as usize] = Some((c, k));
            }
        }
        if best[s as usize].is_none() {
            return Err(OrchestratorError::RegisterPressure { registers: cfg.rf_registers });
        }
    }
    let mut passes = Vec::new();
    let mut s = 1;
    while s <= steps {
        let k = best[s as usize].expect("filled above").1;
        passes.push(Pass { first: s, steps: k });
        s += k;
    }
    Ok(Plan { passes })
}

/// Emits the full transform for one unit.
pub(crate) fn emit_transform<S: CommandSink>(
    sink: &mut S,
    g: &Geometry,
    plan: &Plan,
    variant: ScheduleVariant,
    cfg: &MachineConfig,
) -> Result<usize, OrchestratorError> {
    let ctx = Ctx { g, variant, registers: cfg.rf_registers };
    let mut em = Emitter::new(sink, cfg.rf_registers);
    for p in &plan.passes {
        ctx.emit_pass(&mut em, *p)?;
    }
    for step in g.word_steps + 1..=g.log_n {
        ctx.emit_in_word(&mut em, step)?;
    }
    Ok(em.peak())
}

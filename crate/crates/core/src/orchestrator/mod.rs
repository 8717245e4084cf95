//! Compiles batched transforms into PIM command streams.

mod emit;
mod passes;

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use num_complex::Complex32;
use thiserror::Error;

use crate::config::MachineConfig;
use crate::fft::{bit_reverse, twiddle_census, FftError, FftProblem, TwiddleClass};
use crate::layout::{LayoutError, MappingLayout, MappingScheme};
use crate::machine::{
    CommandSink, CommandStream, MachineState, Parity, PimCommand, Reg, StatsSink, StreamStats,
    Violation,
};

use emit::{rowbuf, Butterfly, Emitter};
use passes::Geometry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScheduleVariant {
    /// Six multiply-adds per butterfly.
    PimBase,
    /// Trivial twiddles folded into plain additions.
    SwOpt,
    /// Fused add/subtract command.
    HwOpt,
    SwHwOpt,
}

impl ScheduleVariant {
    pub const ALL: [ScheduleVariant; 4] = [
        ScheduleVariant::PimBase,
        ScheduleVariant::SwOpt,
        ScheduleVariant::HwOpt,
        ScheduleVariant::SwHwOpt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScheduleVariant::PimBase => "base",
            ScheduleVariant::SwOpt => "sw",
            ScheduleVariant::HwOpt => "hw",
            ScheduleVariant::SwHwOpt => "swhw",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == s)
    }

    pub fn uses_maddsub(self) -> bool {
        matches!(self, ScheduleVariant::HwOpt | ScheduleVariant::SwHwOpt)
    }

    /// Compute commands (multiply-add or fused) per butterfly of `class`.
    pub fn compute_count(self, class: TwiddleClass) -> u32 {
        use TwiddleClass::*;
        match (self, class) {
            (ScheduleVariant::PimBase, _) => 6,
            (ScheduleVariant::SwOpt, One | MinusJ) => 4,
            (ScheduleVariant::SwOpt, _) => 6,
            (ScheduleVariant::HwOpt, _) => 4,
            (ScheduleVariant::SwHwOpt, One | MinusJ) => 2,
            (ScheduleVariant::SwHwOpt, SqrtHalf) => 3,
            (ScheduleVariant::SwHwOpt, Generic) => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OrchestratorError {
    #[error("schedule needs more than {registers} registers")]
    RegisterPressure { registers: usize },
    #[error("variant `{0}` needs the fused add/subtract command, which this machine lacks")]
    Unsupported(&'static str),
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Fft(#[from] FftError),
    #[error("stream fault at {0}")]
    Exec(#[from] Violation),
}

/// Commands of one butterfly with inputs in row-buffer words 0 (`x1`) and
/// 1 (`x2`) of the open rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ButterflySchedule {
    pub class: TwiddleClass,
    pub commands: Vec<PimCommand>,
    /// Registers holding `y1.re, y1.im, y2.re, y2.im`.
    pub outputs: [Reg; 4],
}

impl ButterflySchedule {
    pub fn compute_count(&self) -> usize {
        self.commands
            .iter()
            .filter(|c| matches!(c, PimCommand::Madd { .. } | PimCommand::MaddSub { .. }))
            .count()
    }
}

pub fn schedule_butterfly(
    variant: ScheduleVariant,
    class: TwiddleClass,
    w: Complex32,
) -> Result<ButterflySchedule, OrchestratorError> {
    let mut commands = Vec::new();
    let mut em = Emitter::new(&mut commands, 16);
    let bf = Butterfly::new(variant, class, w);
    let prep = bf.prepare(&mut em, rowbuf(1), false)?;
    let (y1, y2) = bf.finish(&mut em, rowbuf(0), prep)?;
    let outputs = [y1[0], y1[1], y2[0], y2[1]].map(emit::reg_of);
    Ok(ButterflySchedule { class, commands, outputs })
}

/// Census-weighted compute commands per butterfly over a size-`n` transform.
pub fn avg_compute_per_butterfly(variant: ScheduleVariant, n: usize) -> Result<f64, FftError> {
    let census = twiddle_census(n)?;
    let total: u64 = TwiddleClass::ALL
        .iter()
        .map(|c| census.get(*c) * variant.compute_count(*c) as u64)
        .sum();
    Ok(total as f64 / census.total() as f64)
}

/// Element position holding output `k` after the in-place transform.
pub fn output_position(n: usize, k: usize) -> usize {
    bit_reverse(k, n.trailing_zeros())
}

fn check_variant(variant: ScheduleVariant, cfg: &MachineConfig) -> Result<(), OrchestratorError> {
    if variant.uses_maddsub() && !cfg.maddsub_support {
        return Err(OrchestratorError::Unsupported(variant.name()));
    }
    Ok(())
}

/// Emits the per-unit stream for `layout` into `sink` and returns the peak
/// number of live registers.
pub fn emit_stream<S: CommandSink>(
    sink: &mut S,
    layout: &MappingLayout,
    variant: ScheduleVariant,
    cfg: &MachineConfig,
) -> Result<usize, OrchestratorError> {
    check_variant(variant, cfg)?;
    let g = Geometry::new(layout);
    let plan = passes::plan_passes(&g, variant, cfg)?;
    passes::emit_transform(sink, &g, &plan, variant, cfg)
}

/// The command stream every active unit runs for one round of `layout`.
pub fn build_stream(
    layout: &MappingLayout,
    variant: ScheduleVariant,
    cfg: &MachineConfig,
) -> Result<CommandStream, OrchestratorError> {
    let mut commands = Vec::new();
    emit_stream(&mut commands, layout, variant, cfg)?;
    Ok(CommandStream { commands, replication: layout.replication() })
}

type StatsKey = (usize, MappingScheme, ScheduleVariant, String);

fn stats_cache() -> &'static Mutex<HashMap<StatsKey, StreamStats>> {
    static CACHE: OnceLock<Mutex<HashMap<StatsKey, StreamStats>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Counts of the per-unit stream for size-`n` transforms, without
/// materializing it. Results are memoized per configuration.
pub fn stream_stats(
    scheme: MappingScheme,
    n: usize,
    variant: ScheduleVariant,
    cfg: &MachineConfig,
) -> Result<StreamStats, OrchestratorError> {
    let key = (n, scheme, variant, cfg.to_toml_string());
    if let Some(s) = stats_cache().lock().expect("cache lock").get(&key) {
        return Ok(*s);
    }
    let layout = MappingLayout::new(scheme, n, cfg.lanes(), cfg)?;
    let mut sink = StatsSink::new(cfg);
    emit_stream(&mut sink, &layout, variant, cfg)?;
    let stats = sink.stats();
    stats_cache().lock().expect("cache lock").insert(key, stats);
    Ok(stats)
}

/// Loads `problem`, runs the compiled stream round by round and reads the
/// transforms back in natural order.
pub fn run_tile(
    problem: &FftProblem,
    scheme: MappingScheme,
    variant: ScheduleVariant,
    cfg: &MachineConfig,
) -> Result<FftProblem, OrchestratorError> {
    let layout = MappingLayout::new(scheme, problem.size(), problem.batch(), cfg)?;
    let stream = build_stream(&layout, variant, cfg)?;
    let mut state = layout.load(problem, cfg)?;
    for round in 0..layout.rounds() {
        state.execute(&stream.commands, cfg, (round * layout.rows_per_round()) as u32)?;
    }
    let n = problem.size();
    Ok(layout.readback_with(&state, |k| output_position(n, k)))
}

/// Executes a single butterfly schedule on one unit and returns `(y1, y2)`.
pub fn run_butterfly(
    schedule: &ButterflySchedule,
    x1: &[Complex32],
    x2: &[Complex32],
    cfg: &MachineConfig,
) -> Result<(Vec<Complex32>, Vec<Complex32>), OrchestratorError> {
    let lanes = cfg.lanes();
    assert!(x1.len() == lanes && x2.len() == lanes);
    let mut state = MachineState::new(cfg, 1);
    for l in 0..lanes {
        for (word, x) in [(0u32, x1[l]), (1, x2[l])] {
            state.write(0, Parity::Even, 0, word, l, x.re);
            state.write(0, Parity::Odd, 0, word, l, x.im);
        }
    }
    let mut cmds = vec![
        PimCommand::RowOpen { parity: Parity::Even, row: 0 },
        PimCommand::RowOpen { parity: Parity::Odd, row: 0 },
    ];
    cmds.extend(schedule.commands.iter().cloned());
    state.execute(&cmds, cfg, 0)?;
    let [a, b, c, d] = schedule.outputs.map(|r| state.register(0, r).to_vec());
    let join = |re: &[f32], im: &[f32]| -> Vec<Complex32> {
        re.iter().zip(im).map(|(r, i)| Complex32::new(*r, *i)).collect()
    };
    Ok((join(&a, &b), join(&c, &d)))
}

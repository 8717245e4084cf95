//! First-order time and data-movement model.
//!
//! GPU kernels are bandwidth bound: each kernel reads and writes every
//! element once. PIM time is the command count of one unit's stream times
//! the issue period, plus `tRP + tRCD` per row switch, per round.

use crate::config::MachineConfig;
use crate::layout::{MappingLayout, MappingScheme};
use crate::machine::StreamStats;
use crate::orchestrator::{stream_stats, OrchestratorError, ScheduleVariant};

/// Bytes a GPU kernel moves per element: read and write of a complex `f32`.
pub const GPU_BYTES_PER_ELEMENT: f64 = 16.0;

/// Kernels the GPU needs for a size-`n` transform: `ceil(log2 n / log2 lds)`.
pub fn gpu_kernel_count(n: usize, cfg: &MachineConfig) -> usize {
    let bits = n.max(2).trailing_zeros() as usize;
    let per = cfg.lds_max_elements.trailing_zeros() as usize;
    bits.div_ceil(per)
}

pub fn gpu_time_ns(n: usize, batch: usize, kernels: usize, cfg: &MachineConfig) -> f64 {
    gpu_bytes(n, batch, kernels) / cfg.gpu_bw_gbs()
}

pub fn gpu_bytes(n: usize, batch: usize, kernels: usize) -> f64 {
    kernels as f64 * GPU_BYTES_PER_ELEMENT * n as f64 * batch as f64
}

/// Time of `rounds` executions of a stream with counts `s`.
pub fn pim_time_ns(s: &StreamStats, rounds: usize, cfg: &MachineConfig) -> f64 {
    rounds as f64
        * (s.column_commands() as f64 * cfg.pim_op_period_ns()
            + s.row_switches as f64 * cfg.row_switch_ns())
}

/// Peak PIM compute bandwidth relative to the GPU's view of memory.
pub fn bw_multiplier(cfg: &MachineConfig) -> f64 {
    cfg.pim_units_per_pseudo_channel as f64 / cfg.pim_issue_factor
}

/// Peak multiplier discounted by the stream's row-switch stalls.
pub fn workload_multiplier(s: &StreamStats, cfg: &MachineConfig) -> f64 {
    let column = s.column_commands() as f64 * cfg.pim_op_period_ns();
    let stall = s.row_switches as f64 * cfg.row_switch_ns();
    bw_multiplier(cfg) / (1.0 + stall / column)
}

/// Command bytes of a PIM stage: each pseudo channel receives its own copy
/// of the stream per round, shared by the units behind it.
pub fn command_bytes(s: &StreamStats, layout: &MappingLayout) -> f64 {
    let r = layout.replication();
    s.command_bytes as f64 * r.pseudo_channels as f64 * r.rounds as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataMovement {
    pub bytes_gpu_only: f64,
    pub bytes_plan: f64,
}

impl DataMovement {
    pub fn savings(&self) -> f64 {
        self.bytes_gpu_only / self.bytes_plan
    }
}

/// One row of every timing table.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    pub size: usize,
    pub batch: usize,
    pub variant: String,
    pub mapping: String,
    /// Command counts summed over rounds, for one pseudo channel.
    pub madd: u64,
    pub maddsub: u64,
    pub mov: u64,
    pub shift: u64,
    pub row_switches: u64,
    pub pim_ns: f64,
    pub gpu_ns: f64,
    /// Time of the GPU-only reference divided by this configuration's time.
    pub speedup: f64,
    pub bytes_gpu_only: f64,
    pub bytes_plan: f64,
    pub dm_savings: f64,
    pub offload_fraction: f64,
}

impl TimingReport {
    pub const CSV_HEADER: &'static str = "size,batch,variant,mapping,madd,maddsub,mov,shift,row_switches,pim_ns,gpu_ns,speedup,bytes_gpu_only,bytes_plan,dm_savings,offload_fraction";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{:.3},{:.3},{:.6},{:.0},{:.0},{:.6},{:.6}",
            self.size,
            self.batch,
            self.variant,
            self.mapping,
            self.madd,
            self.maddsub,
            self.mov,
            self.shift,
            self.row_switches,
            self.pim_ns,
            self.gpu_ns,
            self.speedup,
            self.bytes_gpu_only,
            self.bytes_plan,
            self.dm_savings,
            self.offload_fraction
        )
    }

    pub fn total_ns(&self) -> f64 {
        self.pim_ns + self.gpu_ns
    }
}

/// Timing of a PIM stage: `batch` transforms of size `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PimStage {
    pub stats: StreamStats,
    pub rounds: usize,
    pub pim_ns: f64,
    pub command_bytes: f64,
}

pub fn pim_stage(
    scheme: MappingScheme,
    n: usize,
    batch: usize,
    variant: ScheduleVariant,
    cfg: &MachineConfig,
) -> Result<PimStage, OrchestratorError> {
    let layout = MappingLayout::new(scheme, n, batch, cfg)?;
    let stats = stream_stats(scheme, n, variant, cfg)?;
    Ok(PimStage {
        stats,
        rounds: layout.rounds(),
        pim_ns: pim_time_ns(&stats, layout.rounds(), cfg),
        command_bytes: command_bytes(&stats, &layout),
    })
}

/// A whole batch run on PIM, compared with the GPU running it alone.
pub fn tile_report(
    scheme: MappingScheme,
    n: usize,
    batch: usize,
    variant: ScheduleVariant,
    cfg: &MachineConfig,
) -> Result<TimingReport, OrchestratorError> {
    let stage = pim_stage(scheme, n, batch, variant, cfg)?;
    let kernels = gpu_kernel_count(n, cfg);
    let gpu_ref = gpu_time_ns(n, batch, kernels, cfg);
    let r = stage.rounds as u64;
    let bytes_gpu_only = gpu_bytes(n, batch, kernels);
    Ok(TimingReport {
        size: n,
        batch,
        variant: variant.name().into(),
        mapping: scheme.name().into(),
        madd: stage.stats.madd * r,
        maddsub: stage.stats.maddsub * r,
        mov: stage.stats.mov * r,
        shift: stage.stats.shift * r,
        row_switches: stage.stats.row_switches * r,
        pim_ns: stage.pim_ns,
        gpu_ns: 0.0,
        speedup: gpu_ref / stage.pim_ns,
        bytes_gpu_only,
        bytes_plan: stage.command_bytes,
        dm_savings: bytes_gpu_only / stage.command_bytes,
        offload_fraction: 1.0,
    })
}

/// A batch that fills every lane of every unit exactly once.
pub fn full_batch(cfg: &MachineConfig) -> usize {
    cfg.total_units() * cfg.lanes()
}

/// Tile speedup if every butterfly took a single compute command, with data
/// movement and row switching left as scheduled.
pub fn single_command_speedup(
    n: usize,
    cfg: &MachineConfig,
) -> Result<f64, OrchestratorError> {
    let batch = full_batch(cfg);
    let stage = pim_stage(MappingScheme::Strided, n, batch, ScheduleVariant::PimBase, cfg)?;
    let mut s = stage.stats;
    let butterflies = (n / 2 * n.trailing_zeros() as usize) as u64;
    s.madd = butterflies;
    s.maddsub = 0;
    let t = pim_time_ns(&s, stage.rounds, cfg);
    Ok(gpu_time_ns(n, batch, gpu_kernel_count(n, cfg), cfg) / t)
}

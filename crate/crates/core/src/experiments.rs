//! Named experiment drivers. Each returns a numeric table that the CLI writes
//! as CSV, aligned text or x-y data.

use thiserror::Error;

use crate::config::MachineConfig;
use crate::layout::MappingScheme;
use crate::orchestrator::{stream_stats, OrchestratorError, ScheduleVariant};
use crate::planner::{best_collaborative, plan, PlannerError};
use crate::timing::{
    bw_multiplier, full_batch, pim_time_ns, single_command_speedup, tile_report, workload_multiplier,
};

/// GPU bandwidth utilization at which the SwHwOpt collaborative peak speedup
/// comes out at 1.38x. `configs/headline.toml` sets it.
pub const HEADLINE_GPU_UTILIZATION: f64 = 0.55;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("unknown experiment `{0}`")]
    Unknown(String),
    #[error(transparent)]
    Orchestrator(#[from] OrchestratorError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
}

type Result<T> = std::result::Result<T, ExperimentError>;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(name: &str, title: &str, columns: &[&str]) -> Self {
        Table {
            name: name.into(),
            title: title.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| fmt_num(*v)).collect();
            s += &cells.join(",");
            s.push('\n');
        }
        s
    }

    /// Whitespace-separated columns preceded by a `#` legend.
    pub fn to_xy(&self) -> String {
        let mut s = format!("# {}\n", self.title);
        for (i, c) in self.columns.iter().enumerate() {
            s += &format!("# column {}: {}\n", i + 1, c);
        }
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| fmt_num(*v)).collect();
            s += &cells.join(" ");
            s.push('\n');
        }
        s
    }

    pub fn to_txt(&self) -> String {
        let cells: Vec<Vec<String>> =
            self.rows.iter().map(|r| r.iter().map(|v| fmt_num(*v)).collect()).collect();
        let widths: Vec<usize> = (0..self.columns.len())
            .map(|i| cells.iter().map(|r| r[i].len()).chain([self.columns[i].len()]).max().unwrap_or(0))
            .collect();
        let line = |items: Vec<&str>| -> String {
            let parts: Vec<String> =
                items.iter().zip(&widths).map(|(s, w)| format!("{s:>w$}")).collect();
            parts.join("  ") + "\n"
        };
        let mut s = format!("{}\n", self.title);
        s += &line(self.columns.iter().map(|c| c.as_str()).collect());
        for r in &cells {
            s += &line(r.iter().map(|c| c.as_str()).collect());
        }
        s
    }
}

fn fmt_num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{v:.0}")
    } else {
        format!("{v:.6}")
    }
}

pub struct Driver {
    pub name: &'static str,
    pub about: &'static str,
    pub run: fn(&MachineConfig) -> Result<Table>,
}

pub const DRIVERS: &[Driver] = &[
    Driver { name: "multiplier", about: "peak and workload-adjusted PIM bandwidth multiplier", run: multiplier },
    Driver { name: "base-speedup", about: "unoptimized PIM tile speedup over the GPU, 2^5..2^18", run: base_speedup },
    Driver { name: "mapping", about: "strided vs baseline layout, 2^5..2^13", run: mapping },
    Driver { name: "tile-breakdown", about: "time shares of unoptimized PIM tiles", run: tile_breakdown },
    Driver { name: "colab-speedup", about: "collaborative plans with unoptimized tiles, 2^13..2^30", run: colab_speedup },
    Driver { name: "tile-speedup", about: "tile speedup of every schedule variant", run: tile_speedup },
    Driver { name: "opt-speedup", about: "collaborative plan speedup of every schedule variant", run: opt_speedup },
    Driver { name: "data-movement", about: "data-movement savings and offload fraction", run: data_movement },
    Driver { name: "sensitivity", about: "tile speedup with doubled registers, row buffer or units", run: sensitivity },
    Driver { name: "limit", about: "tile speedup with a single-command butterfly", run: limit },
];

pub fn driver(name: &str) -> Result<&'static Driver> {
    DRIVERS.iter().find(|d| d.name == name).ok_or_else(|| ExperimentError::Unknown(name.into()))
}

const TILES: std::ops::RangeInclusive<u32> = 5..=13;
const PLANS: std::ops::RangeInclusive<u32> = 13..=30;

fn multiplier(cfg: &MachineConfig) -> Result<Table> {
    let mut t = Table::new(
        "multiplier",
        "PIM bandwidth multiplier: peak and discounted by row-switch stalls of unoptimized tiles",
        &["banks_per_pseudo_channel", "units_per_pseudo_channel", "peak", "adjusted_2^5", "adjusted_2^10", "adjusted_2^13"],
    );
    for banks in [16usize, 32] {
        for units in [banks / 2, banks] {
            let c = cfg
                .with("banks_per_pseudo_channel", &banks.to_string())?
                .with("pim_units_per_pseudo_channel", &units.to_string())?;
            let mut row = vec![
                banks as f64,
                units as f64,
                bw_multiplier(&c),
            ];
            for l in [5, 10, 13] {
                let s = stream_stats(MappingScheme::Strided, 1 << l, ScheduleVariant::PimBase, &c)?;
                row.push(workload_multiplier(&s, &c));
            }
            t.push(row);
        }
    }
    Ok(t)
}

fn base_speedup(cfg: &MachineConfig) -> Result<Table> {
    let mut t = Table::new(
        "base-speedup",
        "Unoptimized PIM tile speedup over the GPU (strided layout, full batch)",
        &["log2_size", "speedup"],
    );
    for l in 5..=18u32 {
        let r = tile_report(MappingScheme::Strided, 1 << l, full_batch(cfg), ScheduleVariant::PimBase, cfg)?;
        t.push(vec![l as f64, r.speedup]);
    }
    Ok(t)
}

fn mapping(cfg: &MachineConfig) -> Result<Table> {
    let mut t = Table::new(
        "mapping",
        "Strided vs baseline layout, unoptimized tiles (time shares of the baseline run)",
        &[
            "log2_size",
            "strided_ns",
            "baseline_ns",
            "baseline_over_strided",
            "baseline_madd_share",
            "baseline_shift_share",
            "baseline_rest_share",
        ],
    );
    let b = full_batch(cfg);
    let period = cfg.pim_op_period_ns();
    for l in TILES {
        let n = 1 << l;
        let s = tile_report(MappingScheme::Strided, n, b, ScheduleVariant::PimBase, cfg)?;
        let bl = tile_report(MappingScheme::Baseline, n, b, ScheduleVariant::PimBase, cfg)?;
        let madd = bl.madd as f64 * period / bl.pim_ns;
        let shift = bl.shift as f64 * period / bl.pim_ns;
        t.push(vec![
            l as f64,
            s.pim_ns,
            bl.pim_ns,
            bl.pim_ns / s.pim_ns,
            madd,
            shift,
            1.0 - madd - shift,
        ]);
    }
    Ok(t)
}

fn tile_breakdown(cfg: &MachineConfig) -> Result<Table> {
    let mut t = Table::new(
        "tile-breakdown",
        "Time shares of unoptimized PIM tiles",
        &["log2_size", "madd_share", "mov_share", "row_switch_share", "madd_of_compute_and_mov", "ns_per_butterfly"],
    );
    let period = cfg.pim_op_period_ns();
    for l in TILES {
        let n = 1usize << l;
        let s = stream_stats(MappingScheme::Strided, n, ScheduleVariant::PimBase, cfg)?;
        let total = pim_time_ns(&s, 1, cfg);
        let madd = s.madd as f64 * period;
        let mov = s.mov as f64 * period;
        t.push(vec![
            l as f64,
            madd / total,
            mov / total,
            s.row_switches as f64 * cfg.row_switch_ns() / total,
            madd / (madd + mov),
            total / (n / 2 * l as usize) as f64,
        ]);
    }
    Ok(t)
}

fn plan_row(l: u32, variants: &[ScheduleVariant], cfg: &MachineConfig) -> Result<Vec<f64>> {
    let mut row = vec![l as f64];
    for v in variants {
        let p = plan(1 << l, 1, *v, cfg)?;
        row.push(p.report.speedup);
        row.push(p.tile.map_or(0.0, |t| t.trailing_zeros() as f64));
    }
    Ok(row)
}

fn colab_speedup(cfg: &MachineConfig) -> Result<Table> {
    let mut t = Table::new(
        "colab-speedup",
        "Collaborative GPU+PIM plans with unoptimized tiles (tile 0 = GPU only)",
        &["log2_size", "speedup", "log2_tile"],
    );
    for l in PLANS {
        t.push(plan_row(l, &[ScheduleVariant::PimBase], cfg)?);
    }
    Ok(t)
}

fn tile_speedup(cfg: &MachineConfig) -> Result<Table> {
    let mut t = Table::new(
        "tile-speedup",
        "PIM tile speedup over the GPU per schedule variant",
        &["log2_size", "base", "sw", "hw", "swhw"],
    );
    for l in TILES {
        let mut row = vec![l as f64];
        for v in ScheduleVariant::ALL {
            row.push(tile_report(MappingScheme::Strided, 1 << l, full_batch(cfg), v, cfg)?.speedup);
        }
        t.push(row);
    }
    Ok(t)
}

fn opt_speedup(cfg: &MachineConfig) -> Result<Table> {
    let mut t = Table::new(
        "opt-speedup",
        "Collaborative plan speedup per schedule variant (tile 0 = GPU only)",
        &[
            "log2_size", "base", "base_tile", "sw", "sw_tile", "hw", "hw_tile", "swhw", "swhw_tile",
        ],
    );
    for l in PLANS {
        t.push(plan_row(l, &ScheduleVariant::ALL, cfg)?);
    }
    Ok(t)
}

fn data_movement(cfg: &MachineConfig) -> Result<Table> {
    let mut t = Table::new(
        "data-movement",
        "Data-movement savings over GPU-only execution (SwHwOpt tiles)",
        &["log2_size", "best_colab_savings", "best_colab_offload", "plan_savings", "plan_offload"],
    );
    for l in 14..=30u32 {
        let n = 1 << l;
        let Some(c) = best_collaborative(n, 1, ScheduleVariant::SwHwOpt, cfg)? else { continue };
        let p = plan(n, 1, ScheduleVariant::SwHwOpt, cfg)?;
        t.push(vec![
            l as f64,
            c.report.dm_savings,
            c.report.offload_fraction,
            p.report.dm_savings,
            p.report.offload_fraction,
        ]);
    }
    Ok(t)
}

fn sensitivity(cfg: &MachineConfig) -> Result<Table> {
    let mut t = Table::new(
        "sensitivity",
        "Unoptimized tile speedup relative to the base machine with one resource doubled",
        &["log2_size", "speedup", "rf_x2", "row_x2", "units_x2"],
    );
    let doubled = [
        cfg.with("rf_registers", &(2 * cfg.rf_registers).to_string())?,
        cfg.with("row_bytes", &(2 * cfg.row_bytes).to_string())?,
        cfg.with("pim_units_per_pseudo_channel", &(2 * cfg.pim_units_per_pseudo_channel).to_string())?,
    ];
    let batch = 2 * full_batch(cfg);
    for l in TILES {
        let n = 1 << l;
        let base = tile_report(MappingScheme::Strided, n, batch, ScheduleVariant::PimBase, cfg)?.pim_ns;
        let mut row = vec![l as f64, tile_report(MappingScheme::Strided, n, batch, ScheduleVariant::PimBase, cfg)?.speedup];
        for c in &doubled {
            row.push(base / tile_report(MappingScheme::Strided, n, batch, ScheduleVariant::PimBase, c)?.pim_ns);
        }
        t.push(row);
    }
    Ok(t)
}

fn limit(cfg: &MachineConfig) -> Result<Table> {
    let mut t = Table::new(
        "limit",
        "Tile speedup over the GPU if a butterfly were one compute command",
        &["log2_size", "base", "single_command", "gain"],
    );
    for l in TILES {
        let n = 1 << l;
        let base = tile_report(MappingScheme::Strided, n, full_batch(cfg), ScheduleVariant::PimBase, cfg)?.speedup;
        let one = single_command_speedup(n, cfg)?;
        t.push(vec![l as f64, base, one, one / base]);
    }
    Ok(t)
}

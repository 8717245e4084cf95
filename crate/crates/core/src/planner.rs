//! Splits a large transform between GPU kernels and one PIM tile.
//!
//! A size-`n` transform factors as `n = m1 * m2`. The GPU runs the size-`m1`
//! transforms and the inter-stage twiddles; PIM then runs `m1` transforms of
//! size `m2` (the tile) in the strided layout. Sizes that would need three GPU
//! kernels keep two on the GPU and hand the last one to PIM.

use serde::Serialize;
use thiserror::Error;

use crate::config::MachineConfig;
use crate::fft::{four_step_stage1, to32, to64, FftError, FftProblem};
use crate::layout::MappingScheme;
use crate::orchestrator::{run_tile, OrchestratorError, ScheduleVariant};
use crate::timing::{gpu_bytes, gpu_kernel_count, gpu_time_ns, pim_stage, TimingReport};

/// Largest transform [`simulate_plan`] executes functionally.
pub const FUNCTIONAL_LIMIT: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlannerError {
    #[error("size {size} exceeds the supported maximum of {max}")]
    TooLarge { size: usize, max: usize },
    #[error("functional simulation is limited to {FUNCTIONAL_LIMIT} points, got {0}")]
    FunctionalLimit(usize),
    #[error("plan is for {plan} points, problem has {problem}")]
    Mismatch { plan: usize, problem: usize },
    #[error(transparent)]
    Fft(#[from] FftError),
    #[error(transparent)]
    Orchestrator(#[from] OrchestratorError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stage {
    /// `gpu` or `pim`.
    pub unit: String,
    pub size: usize,
    pub batch: usize,
    pub ns: f64,
}

/// An evaluated execution plan for `batch` transforms of size `size`.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub size: usize,
    pub batch: usize,
    pub variant: ScheduleVariant,
    /// PIM tile size, `None` for GPU-only execution.
    pub tile: Option<usize>,
    pub stages: Vec<Stage>,
    pub report: TimingReport,
}

impl Plan {
    pub fn total_ns(&self) -> f64 {
        self.report.total_ns()
    }

    pub fn uses_pim(&self) -> bool {
        self.tile.is_some()
    }

    /// Human-readable summary.
    pub fn describe(&self) -> String {
        let mut s = format!(
            "size 2^{} x {}: {}\n",
            self.size.trailing_zeros(),
            self.batch,
            match self.tile {
                Some(t) => format!("GPU + PIM tile 2^{} ({})", t.trailing_zeros(), self.variant.name()),
                None => "GPU only".into(),
            }
        );
        for st in &self.stages {
            s += &format!(
                "  {:3} fft 2^{:<2} x {:>10}  {:>14.1} ns\n",
                st.unit,
                st.size.trailing_zeros(),
                st.batch,
                st.ns
            );
        }
        s += &format!(
            "  total {:.1} ns, speedup {:.3}, data movement savings {:.3}, offload {:.3}\n",
            self.total_ns(),
            self.report.speedup,
            self.report.dm_savings,
            self.report.offload_fraction
        );
        s
    }

    /// Machine-readable TOML record.
    pub fn to_toml(&self) -> String {
        #[derive(Serialize)]
        struct Record<'a> {
            size: usize,
            batch: usize,
            variant: &'a str,
            tile: usize,
            total_ns: f64,
            gpu_ns: f64,
            pim_ns: f64,
            speedup: f64,
            bytes_gpu_only: f64,
            bytes_plan: f64,
            dm_savings: f64,
            offload_fraction: f64,
            stages: &'a [Stage],
        }
        let r = &self.report;
        toml::to_string(&Record {
            size: self.size,
            batch: self.batch,
            variant: self.variant.name(),
            tile: self.tile.unwrap_or(0),
            total_ns: self.total_ns(),
            gpu_ns: r.gpu_ns,
            pim_ns: r.pim_ns,
            speedup: r.speedup,
            bytes_gpu_only: r.bytes_gpu_only,
            bytes_plan: r.bytes_plan,
            dm_savings: r.dm_savings,
            offload_fraction: r.offload_fraction,
            stages: &self.stages,
        })
        .expect("plan serializes")
    }
}

fn check_size(n: usize, cfg: &MachineConfig) -> Result<(), PlannerError> {
    if !n.is_power_of_two() || n < 2 {
        return Err(FftError::NotPowerOfTwo(n).into());
    }
    if n > cfg.max_fft_elements {
        return Err(PlannerError::TooLarge { size: n, max: cfg.max_fft_elements });
    }
    Ok(())
}

/// Splits `n` into `kernels` near-equal power-of-two factors.
pub fn gpu_factors(n: usize, kernels: usize) -> Vec<usize> {
    let bits = n.trailing_zeros() as usize;
    (0..kernels)
        .map(|i| 1usize << (bits / kernels + usize::from(i < bits % kernels)))
        .collect()
}

/// Candidate `(m1, m2)` splits: tile `m2` within the configured tile range
/// and at least one GPU kernel saved.
pub fn enumerate_tiles(n: usize, cfg: &MachineConfig) -> Result<Vec<(usize, usize)>, PlannerError> {
    check_size(n, cfg)?;
    let k = gpu_kernel_count(n, cfg);
    let cap = crate::layout::capacity(MappingScheme::Strided, cfg);
    let mut out = Vec::new();
    let mut m2 = cfg.tile_min;
    while m2 <= cfg.tile_max.min(cap) && m2 < n {
        let m1 = n / m2;
        if gpu_kernel_count(m1, cfg) < k {
            out.push((m1, m2));
        }
        m2 *= 2;
    }
    Ok(out)
}

/// Evaluates running `batch` size-`n` transforms with PIM tile `tile`, or
/// GPU-only when `tile` is `None`.
pub fn evaluate(
    n: usize,
    batch: usize,
    tile: Option<usize>,
    variant: ScheduleVariant,
    cfg: &MachineConfig,
) -> Result<Plan, PlannerError> {
    check_size(n, cfg)?;
    let k_ref = gpu_kernel_count(n, cfg);
    let gpu_ref = gpu_time_ns(n, batch, k_ref, cfg);
    let bytes_gpu_only = gpu_bytes(n, batch, k_ref);
    let (m1, pim) = match tile {
        Some(m2) => {
            if m2 >= n || !n.is_multiple_of(m2) {
                return Err(FftError::BadFactorization { n, m1: n / m2.max(1), m2 }.into());
            }
            let m1 = n / m2;
            (m1, Some((m2, pim_stage(MappingScheme::Strided, m2, m1 * batch, variant, cfg)?)))
        }
        None => (n, None),
    };
    let kernels = gpu_kernel_count(m1, cfg);
    let per_kernel = gpu_time_ns(n, batch, 1, cfg);
    let mut stages: Vec<Stage> = gpu_factors(m1, kernels)
        .into_iter()
        .map(|f| Stage { unit: "gpu".into(), size: f, batch: batch * n / f, ns: per_kernel })
        .collect();
    let gpu_ns = gpu_time_ns(n, batch, kernels, cfg);
    let mut bytes_plan = gpu_bytes(n, batch, kernels);
    let mut report = TimingReport {
        size: n,
        batch,
        variant: variant.name().into(),
        mapping: "gpu".into(),
        madd: 0,
        maddsub: 0,
        mov: 0,
        shift: 0,
        row_switches: 0,
        pim_ns: 0.0,
        gpu_ns,
        speedup: 1.0,
        bytes_gpu_only,
        bytes_plan,
        dm_savings: 1.0,
        offload_fraction: 0.0,
    };
    if let Some((m2, st)) = pim {
        let r = st.rounds as u64;
        stages.push(Stage { unit: "pim".into(), size: m2, batch: m1 * batch, ns: st.pim_ns });
        bytes_plan += st.command_bytes;
        report.mapping = MappingScheme::Strided.name().into();
        report.madd = st.stats.madd * r;
        report.maddsub = st.stats.maddsub * r;
        report.mov = st.stats.mov * r;
        report.shift = st.stats.shift * r;
        report.row_switches = st.stats.row_switches * r;
        report.pim_ns = st.pim_ns;
        report.bytes_plan = bytes_plan;
        report.offload_fraction = m2.trailing_zeros() as f64 / n.trailing_zeros() as f64;
    }
    report.speedup = gpu_ref / report.total_ns();
    report.dm_savings = bytes_gpu_only / report.bytes_plan;
    Ok(Plan { size: n, batch, variant, tile, stages, report })
}

/// `a` is preferred over `b`: faster, then larger data-movement savings,
/// then the smaller tile.
fn better(a: &Plan, b: &Plan) -> bool {
    let (ta, tb) = (a.total_ns(), b.total_ns());
    if (ta - tb).abs() > 1e-9 * ta.max(tb) {
        return ta < tb;
    }
    if a.report.dm_savings != b.report.dm_savings {
        return a.report.dm_savings > b.report.dm_savings;
    }
    a.tile.unwrap_or(0) < b.tile.unwrap_or(0)
}

fn pick(plans: Vec<Plan>) -> Option<Plan> {
    plans.into_iter().reduce(|best, p| if better(&p, &best) { p } else { best })
}

/// Fastest predicted plan, GPU-only included.
pub fn plan(
    n: usize,
    batch: usize,
    variant: ScheduleVariant,
    cfg: &MachineConfig,
) -> Result<Plan, PlannerError> {
    let mut plans = vec![evaluate(n, batch, None, variant, cfg)?];
    for (_, m2) in enumerate_tiles(n, cfg)? {
        plans.push(evaluate(n, batch, Some(m2), variant, cfg)?);
    }
    Ok(pick(plans).expect("GPU-only plan always present"))
}

/// Fastest plan that uses PIM, if any split qualifies.
pub fn best_collaborative(
    n: usize,
    batch: usize,
    variant: ScheduleVariant,
    cfg: &MachineConfig,
) -> Result<Option<Plan>, PlannerError> {
    let mut plans = Vec::new();
    for (_, m2) in enumerate_tiles(n, cfg)? {
        plans.push(evaluate(n, batch, Some(m2), variant, cfg)?);
    }
    Ok(pick(plans))
}

/// Executes a plan functionally: GPU stages through the reference transform,
/// the PIM tile through the machine model.
pub fn simulate_plan(
    problem: &FftProblem,
    plan: &Plan,
    cfg: &MachineConfig,
) -> Result<FftProblem, PlannerError> {
    let n = problem.size();
    if n != plan.size {
        return Err(PlannerError::Mismatch { plan: plan.size, problem: n });
    }
    if n > FUNCTIONAL_LIMIT {
        return Err(PlannerError::FunctionalLimit(n));
    }
    let Some(m2) = plan.tile else {
        return Ok(problem.fft_all());
    };
    let m1 = n / m2;
    let batch = problem.batch();
    let mut tiles = Vec::with_capacity(n * batch);
    for j in 0..batch {
        let x: Vec<_> = problem.transform(j).iter().map(|z| to64(*z)).collect();
        tiles.extend(four_step_stage1(&x, m1, m2).into_iter().map(to32));
    }
    let tiles = FftProblem::new(m2, m1 * batch, tiles)?;
    let out = run_tile(&tiles, MappingScheme::Strided, plan.variant, cfg)?;
    let mut result = FftProblem::zeros(n, batch)?;
    for j in 0..batch {
        let dst = result.transform_mut(j);
        for k1 in 0..m1 {
            for (k2, v) in out.transform(j * m1 + k1).iter().enumerate() {
                dst[k1 + m1 * k2] = *v;
            }
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiles() {
        let cfg = MachineConfig::default();
        assert!(enumerate_tiles(1 << 13, &cfg).unwrap().is_empty());
        let t = enumerate_tiles(1 << 14, &cfg).unwrap();
        assert_eq!(t.first(), Some(&(1 << 9, 1 << 5)));
        assert_eq!(t.last(), Some(&(2, 1 << 13)));
        for (m1, m2) in enumerate_tiles(1 << 30, &cfg).unwrap() {
            assert_eq!(gpu_kernel_count(m1, &cfg), 2);
            assert!((1 << 5..=1 << 13).contains(&m2));
        }
    }

    #[test]
    fn factors() {
        assert_eq!(gpu_factors(1 << 25, 2), vec![1 << 13, 1 << 12]);
        assert_eq!(gpu_factors(1 << 10, 1), vec![1 << 10]);
    }
}

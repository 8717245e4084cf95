use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use pimfft_core::experiments::{self, Table, DRIVERS};
use pimfft_core::fft::relative_error;
use pimfft_core::orchestrator::{build_stream, run_tile};
use pimfft_core::planner::{plan, simulate_plan};
use pimfft_core::timing::{full_batch, tile_report, TimingReport};
use pimfft_core::{FftProblem, MachineConfig, MappingLayout, MappingScheme, ScheduleVariant};


#[derive(Parser)]
#[command(name = "pimfft", version, about = "FFT on HBM-PIM: functional and timing simulator")]
struct Cli {
    /// Machine description (TOML key = value pairs); defaults apply otherwise.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (a directory for `report all`); stdout if omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads; all cores if omitted.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed of the random test vectors.
    #[arg(long, global = true, default_value_t = 0xF47, value_parser = parse_seed)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Txt,
    Xy,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Base,
    Sw,
    Hw,
    Swhw,
    All,
}

impl VariantArg {
    fn variants(self) -> Vec<ScheduleVariant> {
        match self {
            VariantArg::Base => vec![ScheduleVariant::PimBase],
            VariantArg::Sw => vec![ScheduleVariant::SwOpt],
            VariantArg::Hw => vec![ScheduleVariant::HwOpt],
            VariantArg::Swhw => vec![ScheduleVariant::SwHwOpt],
            VariantArg::All => ScheduleVariant::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MappingArg {
    Strided,
    Baseline,
    Both,
}

impl MappingArg {
    fn schemes(self) -> Vec<MappingScheme> {
        match self {
            MappingArg::Strided => vec![MappingScheme::Strided],
            MappingArg::Baseline => vec![MappingScheme::Baseline],
            MappingArg::Both => vec![MappingScheme::Strided, MappingScheme::Baseline],
        }
    }
}

#[derive(Args, Clone)]
struct Select {
    /// Sizes: `2^k`, a power of two, a comma list, or an exponent range
    /// `a..b` / `2^a..2^b`.
    #[arg(long)]
    size: Option<String>,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    #[arg(long, value_enum, default_value_t = MappingArg::Strided)]
    mapping: MappingArg,
}

#[derive(Subcommand)]
enum Command {
    /// Run transforms on the functional machine and compare with the reference FFT.
    Simulate {
        #[command(flatten)]
        sel: Select,
        #[arg(long, default_value_t = 16)]
        batch: usize,
        /// Run each size through the GPU/PIM planner instead of a single tile.
        #[arg(long)]
        plan: bool,
        /// Accepted for scripts; the oracle check always runs.
        #[arg(long)]
        check: bool,
        /// Largest relative error against the reference FFT that counts as a match.
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
        /// Write the per-unit command stream of the first point to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Timing model of whole-batch PIM tiles.
    Model {
        #[command(flatten)]
        sel: Select,
        /// Defaults to one transform per lane of every unit.
        #[arg(long)]
        batch: Option<usize>,
    },
    /// Best GPU/PIM split of large transforms.
    Plan {
        #[command(flatten)]
        sel: Select,
        #[arg(long, default_value_t = 1)]
        batch: usize,
    },
    /// Timing model with one config key varied.
    Sweep {
        #[command(flatten)]
        sel: Select,
        #[arg(long)]
        key: String,
        /// Comma-separated values of `key`.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        /// Defaults to one transform per lane of every unit of the largest swept machine.
        #[arg(long)]
        batch: Option<usize>,
        /// Sweep collaborative plans instead of tiles.
        #[arg(long)]
        plan: bool,
    },
    /// Named experiment tables; `all` writes every one into the `--out` directory.
    Report {
        /// Experiment name, `all` or `list`.
        name: String,
    },
}

/// Failure category, mapped to the process exit code.
#[derive(Debug)]
struct OracleMismatch;

impl std::fmt::Display for OracleMismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "simulated output differs from the reference transform")
    }
}

impl std::error::Error for OracleMismatch {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<OracleMismatch>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global()?;
    }
    let cfg = match &cli.config {
        Some(p) => MachineConfig::load(p)?,
        None => MachineConfig::default(),
    };
    cfg.validate()?;
    let fmt = cli.format;
    match &cli.command {
        Command::Simulate { sel, batch, plan, check: _, tolerance, trace } => {
            let sizes = parse_sizes(sel.size.as_deref().unwrap_or("2^5"))?;
            let variants = sel.variant.unwrap_or(VariantArg::All).variants();
            let (text, ok) = simulate(&cfg, &sizes, *batch, &variants, &sel.mapping.schemes(), *plan, cli.seed, *tolerance, fmt)?;
            if let Some(path) = trace {
                let layout = MappingLayout::new(sel.mapping.schemes()[0], sizes[0], *batch, &cfg)?;
                let stream = build_stream(&layout, variants[0], &cfg)?;
                fs::write(path, stream.to_text()).with_context(|| format!("writing {}", path.display()))?;
            }
            emit(cli.out.as_deref(), &text)?;
            if !ok {
                return Err(OracleMismatch.into());
            }
        }
        Command::Model { sel, batch } => {
            let sizes = parse_sizes(sel.size.as_deref().unwrap_or("5..13"))?;
            let variants = sel.variant.unwrap_or(VariantArg::All).variants();
            let batch = batch.unwrap_or_else(|| full_batch(&cfg));
            let rows = model_rows(&cfg, &sizes, batch, &variants, &sel.mapping.schemes())?;
            let t = Grid::timing(rows);
            emit(cli.out.as_deref(), &t.render(fmt, "PIM tile timing"))?;
        }
        Command::Plan { sel, batch } => {
            let sizes = parse_sizes(sel.size.as_deref().unwrap_or("13..30"))?;
            let variants = sel.variant.unwrap_or(VariantArg::Swhw).variants();
            let points: Vec<_> = sizes.iter().flat_map(|n| variants.iter().map(move |v| (*n, *v))).collect();
            let plans = points
                .par_iter()
                .map(|(n, v)| plan(*n, *batch, *v, &cfg))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let text = if fmt == Format::Txt {
                plans.iter().map(|p| format!("{}\n{}", p.describe(), p.to_toml())).collect::<Vec<_>>().join("\n")
            } else {
                let rows = plans
                    .iter()
                    .map(|p| (vec![], p.report.clone(), p.tile.map_or(0, |t| t.trailing_zeros())))
                    .collect();
                Grid::plans(rows, &[]).render(fmt, "Collaborative plans")
            };
            emit(cli.out.as_deref(), &text)?;
        }
        Command::Sweep { sel, key, values, batch, plan: plans } => {
            let text = sweep(&cfg, sel, key, values, *batch, *plans, fmt)?;
            emit(cli.out.as_deref(), &text)?;
        }
        Command::Report { name } => report(&cfg, name, cli.out.as_deref(), fmt)?,
    }
    Ok(())
}

fn parse_seed(s: &str) -> std::result::Result<u64, String> {
    let r = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(h) => u64::from_str_radix(h, 16),
        None => s.parse(),
    };
    r.map_err(|e| e.to_string())
}

fn parse_size(s: &str) -> Result<usize> {
    let s = s.trim();
    let n = if let Some(e) = s.strip_prefix("2^") {
        let e: u32 = e.parse().with_context(|| format!("bad exponent in `{s}`"))?;
        1usize.checked_shl(e).filter(|_| e < usize::BITS).ok_or_else(|| anyhow!("size `{s}` too large"))?
    } else {
        s.parse().with_context(|| format!("bad size `{s}`"))?
    };
    if !n.is_power_of_two() || n < 2 {
        bail!("size {n} is not a power of two >= 2");
    }
    Ok(n)
}

fn parse_exponent(s: &str) -> Result<u32> {
    let s = s.trim();
    s.strip_prefix("2^").unwrap_or(s).parse().with_context(|| format!("bad exponent `{s}`"))
}

/// Sizes from `2^k`, `n`, comma lists and exponent ranges.
fn parse_sizes(text: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in text.split(',') {
        if let Some((a, b)) = part.split_once("..") {
            let (a, b) = (parse_exponent(a)?, parse_exponent(b.trim_start_matches('='))?);
            if a > b || b >= usize::BITS {
                bail!("bad size range `{part}`");
            }
            out.extend((a..=b).map(|e| 1usize << e));
        } else {
            out.push(parse_size(part)?);
        }
    }
    if out.is_empty() {
        bail!("no sizes given");
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    cfg: &MachineConfig,
    sizes: &[usize],
    batch: usize,
    variants: &[ScheduleVariant],
    schemes: &[MappingScheme],
    use_plan: bool,
    seed: u64,
    tolerance: f64,
    fmt: Format,
) -> Result<(String, bool)> {
    let mut points = Vec::new();
    for &n in sizes {
        for &v in variants {
            if use_plan {
                points.push((n, v, None));
            } else {
                points.extend(schemes.iter().map(|s| (n, v, Some(*s))));
            }
        }
    }
    let results = points
        .par_iter()
        .map(|&(n, v, scheme)| -> Result<Vec<String>> {
            let problem = FftProblem::random(n, batch, seed)?;
            let (out, how) = match scheme {
                Some(s) => (run_tile(&problem, s, v, cfg)?, s.name().to_string()),
                None => {
                    let p = plan(n, batch, v, cfg)?;
                    let how = p.tile.map_or("gpu".into(), |t| format!("plan-2^{}", t.trailing_zeros()));
                    (simulate_plan(&problem, &p, cfg)?, how)
                }
            };
            let reference = problem.fft_all();
            let err = relative_error(out.data(), reference.data());
            let status = if err <= tolerance { "ok" } else { "MISMATCH" };
            Ok(vec![n.to_string(), batch.to_string(), v.name().into(), how, format!("{err:.3e}"), status.into()])
        })
        .collect::<Result<Vec<_>>>()?;
    let ok = results.iter().all(|r| r[5] == "ok");
    let grid = Grid {
        columns: ["size", "batch", "variant", "mapping", "max_rel_error", "status"].map(String::from).to_vec(),
        rows: results,
    };
    let title = format!("Functional simulation vs reference FFT, seed {seed:#x}");
    let mut text = match fmt {
        Format::Csv => format!("# {title}\n{}", grid.render(fmt, &title)),
        _ => grid.render(fmt, &title),
    };
    text += &format!("# {}\n", if ok { "all transforms match" } else { "oracle mismatch" });
    Ok((text, ok))
}

fn model_rows(
    cfg: &MachineConfig,
    sizes: &[usize],
    batch: usize,
    variants: &[ScheduleVariant],
    schemes: &[MappingScheme],
) -> Result<Vec<TimingReport>> {
    let mut points = Vec::new();
    for &n in sizes {
        for &v in variants {
            points.extend(schemes.iter().map(|s| (n, v, *s)));
        }
    }
    Ok(points
        .par_iter()
        .map(|&(n, v, s)| tile_report(s, n, batch, v, cfg))
        .collect::<std::result::Result<Vec<_>, _>>()?)
}

fn sweep(
    cfg: &MachineConfig,
    sel: &Select,
    key: &str,
    values: &[String],
    batch: Option<usize>,
    plans: bool,
    fmt: Format,
) -> Result<String> {
    let cfgs = values
        .iter()
        .map(|v| {
            let c = cfg.with(key, v)?;
            c.validate()?;
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    let variants = sel.variant.unwrap_or(if plans { VariantArg::Swhw } else { VariantArg::Base }).variants();
    let title = format!("Sweep of {key}");
    if plans {
        let sizes = parse_sizes(sel.size.as_deref().unwrap_or("13..30"))?;
        let batch = batch.unwrap_or(1);
        let mut points = Vec::new();
        for (value, c) in values.iter().zip(&cfgs) {
            for &n in &sizes {
                points.extend(variants.iter().map(|v| (value, c, n, *v)));
            }
        }
        let rows = points
            .par_iter()
            .map(|(value, c, n, v)| {
                let p = plan(*n, batch, *v, c)?;
                Ok((vec![key.to_string(), value.to_string()], p.report, p.tile.map_or(0, |t| t.trailing_zeros())))
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok(Grid::plans(rows, &["key", "value"]).render(fmt, &title));
    }
    let sizes = parse_sizes(sel.size.as_deref().unwrap_or("5..13"))?;
    let batch = batch.unwrap_or_else(|| cfgs.iter().map(full_batch).max().unwrap_or(1));
    let per = cfgs
        .par_iter()
        .map(|c| model_rows(c, &sizes, batch, &variants, &sel.mapping.schemes()))
        .collect::<Result<Vec<_>>>()?;
    let rows = values
        .iter()
        .zip(per)
        .flat_map(|(value, rs)| rs.into_iter().map(move |r| (vec![key.to_string(), value.clone()], r)))
        .collect();
    Ok(Grid::timing_with(rows, &["key", "value"]).render(fmt, &title))
}

fn report(cfg: &MachineConfig, name: &str, out: Option<&Path>, fmt: Format) -> Result<()> {
    let render = |t: &Table| match fmt {
        Format::Csv => t.to_csv(),
        Format::Txt => t.to_txt(),
        Format::Xy => t.to_xy(),
    };
    match name {
        "list" => {
            let text: String = DRIVERS.iter().map(|d| format!("{:15} {}\n", d.name, d.about)).collect();
            emit(out, &text)
        }
        "all" => {
            let dir = out.ok_or_else(|| anyhow!("`report all` needs --out <directory>"))?;
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let tables = DRIVERS.par_iter().map(|d| (d.run)(cfg)).collect::<std::result::Result<Vec<_>, _>>()?;
            let ext = match fmt {
                Format::Csv => "csv",
                Format::Txt => "txt",
                Format::Xy => "dat",
            };
            for t in &tables {
                let path = dir.join(format!("{}.{ext}", t.name));
                fs::write(&path, render(t)).with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(())
        }
        _ => {
            let d = experiments::driver(name)?;
            emit(out, &render(&(d.run)(cfg)?))
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// String table for the timing-contract outputs.
struct Grid {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Grid {
    fn timing(rows: Vec<TimingReport>) -> Grid {
        Grid::timing_with(rows.into_iter().map(|r| (vec![], r)).collect(), &[])
    }

    fn timing_with(rows: Vec<(Vec<String>, TimingReport)>, prefix: &[&str]) -> Grid {
        let mut columns: Vec<String> = prefix.iter().map(|s| s.to_string()).collect();
        columns.extend(TimingReport::CSV_HEADER.split(',').map(String::from));
        let rows = rows
            .into_iter()
            .map(|(mut p, r)| {
                p.extend(r.csv_row().split(',').map(String::from));
                p
            })
            .collect();
        Grid { columns, rows }
    }

    fn plans(rows: Vec<(Vec<String>, TimingReport, u32)>, prefix: &[&str]) -> Grid {
        let mut g = Grid::timing_with(rows.iter().map(|(p, r, _)| (p.clone(), r.clone())).collect(), prefix);
        g.columns.push("log2_tile".into());
        for (row, (_, _, t)) in g.rows.iter_mut().zip(&rows) {
            row.push(t.to_string());
        }
        g
    }

    fn render(&self, fmt: Format, title: &str) -> String {
        match fmt {
            Format::Csv => {
                let mut s = self.columns.join(",") + "\n";
                for r in &self.rows {
                    s += &(r.join(",") + "\n");
                }
                s
            }
            Format::Xy => {
                let mut s = format!("# {title}\n");
                for (i, c) in self.columns.iter().enumerate() {
                    s += &format!("# column {}: {c}\n", i + 1);
                }
                for r in &self.rows {
                    s += &(r.join(" ") + "\n");
                }
                s
            }
            Format::Txt => {
                let widths: Vec<usize> = (0..self.columns.len())
                    .map(|i| self.rows.iter().map(|r| r[i].len()).chain([self.columns[i].len()]).max().unwrap_or(0))
                    .collect();
                let line = |cells: &[String]| {
                    cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect::<Vec<_>>().join("  ") + "\n"
                };
                let mut s = format!("{title}\n") + &line(&self.columns);
                for r in &self.rows {
                    s += &line(r);
                }
                s
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        assert_eq!(parse_sizes("2^5").unwrap(), vec![32]);
        assert_eq!(parse_sizes("64").unwrap(), vec![64]);
        assert_eq!(parse_sizes("2^3..2^5").unwrap(), vec![8, 16, 32]);
        assert_eq!(parse_sizes("3..4,2^10").unwrap(), vec![8, 16, 1024]);
        assert!(parse_sizes("12").is_err());
        assert!(parse_sizes("6..5").is_err());
    }

    #[test]
    fn seeds() {
        assert_eq!(parse_seed("0xF47").unwrap(), 0xF47);
        assert_eq!(parse_seed("12").unwrap(), 12);
    }
}

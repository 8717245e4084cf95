use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

/// Bank of a unit's pair: the even bank holds real parts, the odd bank imaginary parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub const BOTH: [Parity; 2] = [Parity::Even, Parity::Odd];

    pub fn index(self) -> usize {
        match self {
            Parity::Even => 0,
            Parity::Odd => 1,
        }
    }
}

/// A register of the per-unit register file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Reg(pub u16);

/// Source operand. Destinations are always registers; the fused add/subtract
/// command writes a register pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operand {
    /// A word of the currently open row of one bank.
    RowBufWord { parity: Parity, word: u32 },
    Register(Reg),
}

impl From<Reg> for Operand {
    fn from(r: Reg) -> Self {
        Operand::Register(r)
    }
}

/// Scalar coefficient of a multiply-add. Normally one value broadcast to every
/// lane; lane-wise vectors only appear when a word holds elements that need
/// different twiddles.
#[derive(Debug, Clone, PartialEq)]
pub enum Coef {
    Splat(f32),
    Lanes(Arc<[f32]>),
}

impl Coef {
    #[inline]
    pub fn at(&self, lane: usize) -> f32 {
        match self {
            Coef::Splat(v) => *v,
            Coef::Lanes(v) => v[lane],
        }
    }

    /// Number of scalars the command has to carry for this coefficient.
    pub fn scalars(&self) -> usize {
        match self {
            Coef::Splat(_) => 1,
            Coef::Lanes(v) => v.len(),
        }
    }
}

impl From<f32> for Coef {
    fn from(v: f32) -> Self {
        Coef::Splat(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MovDir {
    ToRegister,
    ToRowBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PimCommand {
    /// Precharge the bank if a different row is open, then activate `row`.
    RowOpen { parity: Parity, row: u32 },
    /// `dst = sa*a + sb*b`, lane-wise, each product rounded before the sum.
    Madd { dst: Reg, a: Operand, sa: Coef, b: Operand, sb: Coef },
    /// `dst_add = c + s*m` and `dst_sub = c - s*m`; all sources are read first.
    MaddSub { dst_add: Reg, dst_sub: Reg, c: Operand, m: Operand, s: Coef },
    Mov { dir: MovDir, reg: Reg, parity: Parity, word: u32 },
    /// Rotate lanes: lane `l` receives old lane `l - lanes` (mod lane count).
    Shift { reg: Reg, lanes: i32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CommandKind {
    RowOpen,
    Madd,
    MaddSub,
    Mov,
    Shift,
}

impl PimCommand {
    pub fn kind(&self) -> CommandKind {
        match self {
            PimCommand::RowOpen { .. } => CommandKind::RowOpen,
            PimCommand::Madd { .. } => CommandKind::Madd,
            PimCommand::MaddSub { .. } => CommandKind::MaddSub,
            PimCommand::Mov { .. } => CommandKind::Mov,
            PimCommand::Shift { .. } => CommandKind::Shift,
        }
    }

    /// Scalars carried in the command payload.
    pub fn scalars(&self) -> usize {
        match self {
            PimCommand::Madd { sa, sb, .. } => sa.scalars() + sb.scalars(),
            PimCommand::MaddSub { s, .. } => s.scalars(),
            _ => 0,
        }
    }
}

/// How one stream is replicated over the machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Replication {
    pub stacks: usize,
    pub pseudo_channels: usize,
    pub units: usize,
    pub rounds: usize,
}

/// Commands broadcast identically to every active unit.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CommandStream {
    pub commands: Vec<PimCommand>,
    pub replication: Replication,
}

/// Anything the orchestrator can emit commands into.
pub trait CommandSink {
    fn push(&mut self, cmd: PimCommand);
}

impl CommandSink for Vec<PimCommand> {
    fn push(&mut self, cmd: PimCommand) {
        Vec::push(self, cmd)
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        })
    }
}

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::RowBufWord { parity, word } => write!(f, "{parity}[{word}]"),
            Operand::Register(r) => write!(f, "{r}"),
        }
    }
}

impl fmt::Display for Coef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coef::Splat(v) => write!(f, "{v:?}"),
            Coef::Lanes(v) => {
                f.write_str("[")?;
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{x:?}")?;
                }
                f.write_str("]")
            }
        }
    }
}

impl fmt::Display for PimCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PimCommand::RowOpen { parity, row } => write!(f, "rowopen {parity} {row}"),
            PimCommand::Madd { dst, a, sa, b, sb } => {
                write!(f, "madd {dst} = {sa}*{a} + {sb}*{b}")
            }
            PimCommand::MaddSub { dst_add, dst_sub, c, m, s } => {
                write!(f, "maddsub {dst_add} {dst_sub} = {c} +- {s}*{m}")
            }
            PimCommand::Mov { dir: MovDir::ToRegister, reg, parity, word } => {
                write!(f, "mov {parity}[{word}] -> {reg}")
            }
            PimCommand::Mov { dir: MovDir::ToRowBuf, reg, parity, word } => {
                write!(f, "mov {reg} -> {parity}[{word}]")
            }
            PimCommand::Shift { reg, lanes } => write!(f, "shift {reg} {lanes}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {msg}")]
pub struct TraceError {
    pub line: usize,
    pub msg: String,
}

fn bad(msg: impl Into<String>) -> TraceError {
    TraceError { line: 0, msg: msg.into() }
}

fn parse_parity(s: &str) -> Result<Parity, TraceError> {
    match s {
        "even" => Ok(Parity::Even),
        "odd" => Ok(Parity::Odd),
        _ => Err(bad(format!("expected even or odd, got `{s}`"))),
    }
}

fn parse_reg(s: &str) -> Result<Reg, TraceError> {
    s.strip_prefix('r')
        .and_then(|n| n.parse().ok())
        .map(Reg)
        .ok_or_else(|| bad(format!("expected a register, got `{s}`")))
}

fn parse_rowbuf(s: &str) -> Option<(Parity, u32)> {
    let (p, rest) = s.split_once('[')?;
    let w = rest.strip_suffix(']')?.parse().ok()?;
    Some((parse_parity(p).ok()?, w))
}

fn parse_operand(s: &str) -> Result<Operand, TraceError> {
    if let Some((parity, word)) = parse_rowbuf(s) {
        return Ok(Operand::RowBufWord { parity, word });
    }
    parse_reg(s).map(Operand::Register)
}

fn parse_coef(s: &str) -> Result<Coef, TraceError> {
    let num = |t: &str| t.parse::<f32>().map_err(|_| bad(format!("bad scalar `{t}`")));
    if let Some(inner) = s.strip_prefix('[').and_then(|t| t.strip_suffix(']')) {
        let v: Result<Vec<f32>, _> = inner.split(',').map(num).collect();
        return Ok(Coef::Lanes(v?.into()));
    }
    num(s).map(Coef::Splat)
}

/// Splits `coef*operand`; the coefficient may itself contain no `*`.
fn parse_term(s: &str) -> Result<(Coef, Operand), TraceError> {
    let (c, o) = s.rsplit_once('*').ok_or_else(|| bad(format!("expected coef*operand, got `{s}`")))?;
    Ok((parse_coef(c)?, parse_operand(o)?))
}

impl FromStr for PimCommand {
    type Err = TraceError;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let t: Vec<&str> = line.split_whitespace().collect();
        match t.as_slice() {
            ["rowopen", p, row] => Ok(PimCommand::RowOpen {
                parity: parse_parity(p)?,
                row: row.parse().map_err(|_| bad("bad row"))?,
            }),
            ["madd", dst, "=", ta, "+", tb] => {
                let (sa, a) = parse_term(ta)?;
                let (sb, b) = parse_term(tb)?;
                Ok(PimCommand::Madd { dst: parse_reg(dst)?, a, sa, b, sb })
            }
            ["maddsub", da, ds, "=", c, "+-", tm] => {
                let (s, m) = parse_term(tm)?;
                Ok(PimCommand::MaddSub {
                    dst_add: parse_reg(da)?,
                    dst_sub: parse_reg(ds)?,
                    c: parse_operand(c)?,
                    m,
                    s,
                })
            }
            ["mov", from, "->", to] => {
                if let Some((parity, word)) = parse_rowbuf(from) {
                    Ok(PimCommand::Mov { dir: MovDir::ToRegister, reg: parse_reg(to)?, parity, word })
                } else {
                    let (parity, word) =
                        parse_rowbuf(to).ok_or_else(|| bad(format!("bad row buffer word `{to}`")))?;
                    Ok(PimCommand::Mov { dir: MovDir::ToRowBuf, reg: parse_reg(from)?, parity, word })
                }
            }
            ["shift", reg, n] => Ok(PimCommand::Shift {
                reg: parse_reg(reg)?,
                lanes: n.parse().map_err(|_| bad("bad lane count"))?,
            }),
            _ => Err(bad(format!("unrecognized command `{line}`"))),
        }
    }
}

impl CommandStream {
    /// Line-oriented trace: a replication header followed by one command per line.
    pub fn to_text(&self) -> String {
        let r = &self.replication;
        let mut out = format!(
            "# replication stacks={} pseudo_channels={} units={} rounds={}\n",
            r.stacks, r.pseudo_channels, r.units, r.rounds
        );
        for c in &self.commands {
            out.push_str(&c.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, TraceError> {
        let mut stream = CommandStream::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            let at = |mut e: TraceError| {
                e.line = i + 1;
                e
            };
            if let Some(header) = line.strip_prefix("# replication") {
                for kv in header.split_whitespace() {
                    let (k, v) = kv.split_once('=').ok_or_else(|| at(bad("bad header")))?;
                    let v: usize = v.parse().map_err(|_| at(bad("bad header value")))?;
                    match k {
                        "stacks" => stream.replication.stacks = v,
                        "pseudo_channels" => stream.replication.pseudo_channels = v,
                        "units" => stream.replication.units = v,
                        "rounds" => stream.replication.rounds = v,
                        _ => return Err(at(bad(format!("unknown header key `{k}`")))),
                    }
                }
                continue;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            stream.commands.push(line.parse().map_err(at)?);
        }
        Ok(stream)
    }
}

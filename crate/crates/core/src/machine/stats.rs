use crate::config::MachineConfig;

use super::command::{CommandSink, PimCommand};

/// Per-kind command counts of one stream, plus the row traffic and payload
/// needed by the timing model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StreamStats {
    pub madd: u64,
    pub maddsub: u64,
    pub mov: u64,
    pub shift: u64,
    pub row_open: u64,
    /// `RowOpen` commands that replace the open row of their bank. The first
    /// open of a bank counts.
    pub row_switches: u64,
    /// Bytes broadcast over the command bus for one copy of the stream.
    pub command_bytes: u64,
    /// Rows that were precharged before being open for `tRAS`.
    pub tras_violations: u64,
}

impl StreamStats {
    pub fn compute(&self) -> u64 {
        self.madd + self.maddsub
    }

    /// Commands that occupy a column-command issue slot.
    pub fn column_commands(&self) -> u64 {
        self.madd + self.maddsub + self.mov + self.shift
    }

    pub fn commands(&self) -> u64 {
        self.column_commands() + self.row_open
    }
}

impl std::ops::Add for StreamStats {
    type Output = StreamStats;

    fn add(self, o: StreamStats) -> StreamStats {
        StreamStats {
            madd: self.madd + o.madd,
            maddsub: self.maddsub + o.maddsub,
            mov: self.mov + o.mov,
            shift: self.shift + o.shift,
            row_open: self.row_open + o.row_open,
            row_switches: self.row_switches + o.row_switches,
            command_bytes: self.command_bytes + o.command_bytes,
            tras_violations: self.tras_violations + o.tras_violations,
        }
    }
}

/// Counts commands as they are emitted, without storing them.
///
/// Also replays the stream on a single clock (one column slot per column
/// command, `tRP + tRCD` per row switch) to flag rows closed before `tRAS`.
#[derive(Debug, Clone)]
pub struct StatsSink {
    stats: StreamStats,
    open: [Option<u32>; 2],
    activated: [f64; 2],
    clock: f64,
    period: f64,
    switch_ns: f64,
    t_ras: f64,
    t_rcd: f64,
    scalar_bytes: u64,
    header_bytes: u64,
}

impl StatsSink {
    pub fn new(cfg: &MachineConfig) -> Self {
        StatsSink {
            stats: StreamStats::default(),
            open: [None, None],
            activated: [0.0, 0.0],
            clock: 0.0,
            period: cfg.pim_op_period_ns(),
            switch_ns: cfg.row_switch_ns(),
            t_ras: cfg.t_ras_ns,
            t_rcd: cfg.t_rcd_ns,
            scalar_bytes: cfg.scalar_bytes as u64,
            header_bytes: cfg.cmd_header_bytes as u64,
        }
    }

    pub fn stats(&self) -> StreamStats {
        self.stats
    }

    pub fn open_rows(&self) -> [Option<u32>; 2] {
        self.open
    }
}

impl CommandSink for StatsSink {
    fn push(&mut self, cmd: PimCommand) {
        let s = &mut self.stats;
        s.command_bytes += self.header_bytes + self.scalar_bytes * cmd.scalars() as u64;
        match cmd {
            PimCommand::RowOpen { parity, row } => {
                s.row_open += 1;
                let p = parity.index();
                if self.open[p] != Some(row) {
                    if self.open[p].is_some()
                        && self.clock - self.activated[p] + self.t_rcd < self.t_ras
                    {
                        s.tras_violations += 1;
                    }
                    s.row_switches += 1;
                    self.clock += self.switch_ns;
                    self.activated[p] = self.clock;
                    self.open[p] = Some(row);
                }
                return;
            }
            PimCommand::Madd { .. } => s.madd += 1,
            PimCommand::MaddSub { .. } => s.maddsub += 1,
            PimCommand::Mov { .. } => s.mov += 1,
            PimCommand::Shift { .. } => s.shift += 1,
        }
        self.clock += self.period;
    }
}

/// Counts of an already materialized stream.
pub fn count_commands(commands: &[PimCommand], cfg: &MachineConfig) -> StreamStats {
    let mut sink = StatsSink::new(cfg);
    for c in commands {
        sink.push(c.clone());
    }
    sink.stats()
}

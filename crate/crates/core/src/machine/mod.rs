//! PIM command set, functional executor and command accounting.

mod command;
mod state;
mod stats;

pub use command::{
    CommandKind, CommandSink, CommandStream, Coef, MovDir, Operand, Parity, PimCommand, Reg,
    Replication, TraceError,
};
pub use state::{validate, MachineState, StreamFault, UnitState, Violation};
pub use stats::{count_commands, StatsSink, StreamStats};

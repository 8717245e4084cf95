//! Functional and timing simulator for batched FFTs on bank-level PIM units
//! inside HBM stacks, and a planner that splits large transforms between the
//! GPU and PIM.
//!
//! The pieces, from the bottom up:
//!
//! * [`fft`]: reference transforms and the twiddle census used as oracles.
//! * [`machine`]: the PIM command set, a functional executor and command counts.
//! * [`layout`]: where each element of a batch lives in the banks.
//! * [`orchestrator`]: compiles a batch into a per-unit command stream.
//! * [`timing`]: first-order time and data-movement model.
//! * [`planner`]: GPU/PIM split of large transforms.
//! * [`experiments`]: named drivers that tabulate the model.

pub mod config;
pub mod experiments;
pub mod fft;
pub mod layout;
pub mod machine;
pub mod orchestrator;
pub mod planner;
pub mod timing;

pub use config::{ConfigError, MachineConfig};
pub use fft::{ComplexSample, FftError, FftProblem, TwiddleCensus, TwiddleClass};
pub use layout::{Component, LayoutError, MappingLayout, MappingScheme, PimAddress};
pub use machine::{CommandStream, MachineState, PimCommand, StreamStats};
pub use orchestrator::{OrchestratorError, ScheduleVariant};
pub use planner::{Plan, PlannerError};
pub use timing::TimingReport;

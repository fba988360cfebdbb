//! Compiler for zoned neutral-atom architectures.
//!
//! The pipeline layers a circuit, decides which atoms stay in the
//! entanglement zone, places the remaining atoms with a tree search, groups
//! the resulting moves into AOD rearrangement steps and emits timed
//! instructions.

pub mod arch;
pub mod bench;
pub mod circuit;
pub mod codegen;
pub mod compiler;
pub mod placement;
pub mod routing;
pub mod search;
pub mod timing;

pub use arch::{ArchError, Architecture, PairSlot, Position, TrapId, Zone, ZoneKind};
pub use circuit::{parse_circuit, reuse_analysis, schedule, Circuit, CircuitError, Gate, Layer, ReusePlan};
pub use codegen::{parse_instructions, to_text, validate, Instruction, ValidationReport};
pub use compiler::{compile, CompileError, CompileOptions, CompileStats, Compilation};
pub use placement::{HeuristicParams, PlacementConfig};
pub use routing::{Move, RearrangementStep, RoutingContext, RoutingMode, RoutingPolicy, RoutingResult};
pub use search::{SearchConfig, SearchOutcome, SearchSpace, Strategy};
pub use timing::MotionParams;

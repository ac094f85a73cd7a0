//! Automatic repair of non-terminating loops, driven by an in-file test
//! suite.
//!
//! The pipeline: instrument every loop with a monitor → run the tests under
//! an iteration cap to find the hanging loop → probe for the smallest forced
//! iteration count that makes each hanging test pass → re-run everything
//! collecting per-iteration state snapshots paired with the stay/break
//! decision → synthesize the simplest guard expression consistent with every
//! snapshot → splice it into the original program and re-run the whole suite.
//!
//! `repair::repair` runs the pipeline end to end; each stage is also usable
//! on its own (see `detect`, `angelic`, `collect`, `synth`).

pub mod angelic;
pub mod collect;
pub mod corpus;
pub mod detect;
pub mod instrument;
pub mod interp;
pub mod lang;
pub mod repair;
pub mod synth;

pub use interp::{MonitorConfig, TestOutcome, DEFAULT_GLOBAL_CAP};
pub use lang::{load_program, LoopId};

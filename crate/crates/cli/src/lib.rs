//! Trace parsing, generation, and execution for the dynamic-connectivity CLI.

pub mod exec;
pub mod gen;
pub mod trace;

pub use exec::{bench, run, ExecError, RunConfig, BENCH_HEADER};
pub use gen::{generate, Mix};
pub use trace::{parse, ParseError, Trace, TraceOp};

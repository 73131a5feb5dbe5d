//! Settlement: dual-metric W, report matching, benchmark success B, closure
//! labels, and the immutable trace record.

mod rules;
mod trace;

pub use rules::{match_report, MatchMode};
pub use trace::{
    settle, trace_digest, ClosureCase, Labels, RunConfig, SettleError, Settlement, StepRecord, TerminalCause, Trace,
    TraceError, TraceHeader, TRACE_FORMAT,
};

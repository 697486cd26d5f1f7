//! Convergence traces emitted by the iterative loops.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoopId {
    Cccp,
    Iwfa,
    DeFixedPoint,
}

impl LoopId {
    pub fn as_str(self) -> &'static str {
        match self {
            LoopId::Cccp => "cccp",
            LoopId::Iwfa => "iwfa",
            LoopId::DeFixedPoint => "de-fixed-point",
        }
    }
}

/// One row of a convergence trace.
///
/// `iteration` counts globally per loop id, so it is strictly increasing for
/// each loop even when inner loops restart; `outer` and `inner` carry the
/// enclosing CCCP iteration and the local counter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub loop_id: LoopId,
    pub iteration: u64,
    pub outer: u64,
    pub inner: u64,
    /// Objective in bits for cccp/iwfa rows, residual for fixed-point rows.
    pub value: f64,
    pub kkt_residual_max: Option<f64>,
    pub power_used: Option<f64>,
    pub mu: Option<f64>,
}

pub trait TraceSink {
    fn record(&mut self, row: TraceRow);

    /// Whether rows are wanted at all; lets hot loops skip building them.
    fn enabled(&self, _loop_id: LoopId) -> bool {
        true
    }
}

impl TraceSink for Vec<TraceRow> {
    fn record(&mut self, row: TraceRow) {
        self.push(row);
    }
}

/// Discards everything.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoTrace;

impl TraceSink for NoTrace {
    fn record(&mut self, _row: TraceRow) {}

    fn enabled(&self, _loop_id: LoopId) -> bool {
        false
    }
}

/// Keeps only the listed loops.
pub struct Filtered<'a, S: TraceSink + ?Sized> {
    pub inner: &'a mut S,
    pub loops: &'a [LoopId],
}

impl<S: TraceSink + ?Sized> TraceSink for Filtered<'_, S> {
    fn record(&mut self, row: TraceRow) {
        if self.loops.contains(&row.loop_id) {
            self.inner.record(row);
        }
    }

    fn enabled(&self, loop_id: LoopId) -> bool {
        self.loops.contains(&loop_id) && self.inner.enabled(loop_id)
    }
}

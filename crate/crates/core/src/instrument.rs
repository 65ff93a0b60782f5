//! Operation counting.
//!
//! Query cost is measured as the number of memory operations a search
//! performs: every array element it touches and every model evaluation it
//! makes is one operation. Arithmetic between those accesses is free.
//!
//! Counters live in an [`OpContext`] owned by the caller, so concurrent
//! queries never share state.

use crate::distributions::CdfModel;
use crate::error::{Error, Result};
use crate::keys::SortedKeyArray;

/// One recorded event in a traced query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TraceEvent {
    /// Array read at a 1-based position.
    Read(usize),
    /// Evaluation of a distribution CDF.
    Cdf,
    /// Read of a learned model parameter (a PCF piece).
    Model,
    /// A recursive search or tree walk entered the given depth (root = 0).
    Enter(usize),
}

#[derive(Debug, Clone, Default)]
pub struct OpContext {
    pub mem_ops: u64,
    pub cdf_evals: u64,
    trace: Option<Vec<TraceEvent>>,
}

impl OpContext {
    pub fn new() -> Self {
        Self::default()
    }

    /// A context that additionally records every counted event.
    pub fn traced() -> Self {
        OpContext {
            trace: Some(Vec::new()),
            ..Self::default()
        }
    }

    pub fn reset(&mut self) {
        self.mem_ops = 0;
        self.cdf_evals = 0;
        if let Some(t) = self.trace.as_mut() {
            t.clear();
        }
    }

    pub fn trace(&self) -> Option<&[TraceEvent]> {
        self.trace.as_deref()
    }

    /// Deepest `Enter` event seen in the trace, if any.
    pub fn max_depth(&self) -> Option<usize> {
        self.trace.as_ref()?.iter().filter_map(|e| match e {
            TraceEvent::Enter(d) => Some(*d),
            _ => None,
        }).max()
    }

    #[inline]
    fn record(&mut self, event: TraceEvent) {
        if let Some(t) = self.trace.as_mut() {
            t.push(event);
        }
    }

    /// Reads `keys[pos - 1]` (1-based) and charges one memory operation.
    #[inline]
    pub(crate) fn read(&mut self, keys: &[f64], pos: usize) -> f64 {
        self.mem_ops += 1;
        self.record(TraceEvent::Read(pos));
        keys[pos - 1]
    }

    /// Charges one model-parameter read.
    #[inline]
    pub(crate) fn model_read(&mut self) {
        self.mem_ops += 1;
        self.record(TraceEvent::Model);
    }

    /// Charges one CDF evaluation.
    #[inline]
    pub(crate) fn cdf_eval(&mut self) {
        self.mem_ops += 1;
        self.cdf_evals += 1;
        self.record(TraceEvent::Cdf);
    }

    #[inline]
    pub(crate) fn enter(&mut self, depth: usize) {
        self.record(TraceEvent::Enter(depth));
    }
}

/// Returns the key at 1-based position `i`, charging one memory operation.
pub fn counted_read(a: &SortedKeyArray, i: usize, ctx: &mut OpContext) -> Result<f64> {
    if i == 0 || i > a.len() {
        return Err(Error::IndexOutOfRange { index: i, n: a.len() });
    }
    Ok(ctx.read(a.keys(), i))
}

/// Evaluates the model CDF at `x`, charging one CDF evaluation.
pub fn counted_cdf(model: &CdfModel, x: f64, ctx: &mut OpContext) -> f64 {
    ctx.cdf_eval();
    model.cdf(x)
}

//! Label-querying policies.
//!
//! A policy is stepped once per stream event in two phases. [`Policy::decide`]
//! sees only the anomaly signal and returns whether to buy a label.
//! [`Policy::observe`] then receives the label, which is `Some` exactly when
//! the policy asked for it, and returns the current accuracy estimate. The
//! split makes it impossible for a policy to read outcomes it did not pay for.

mod mldemon;
mod pq;
mod rr;

use std::collections::VecDeque;

pub use mldemon::{MlDemon, MlDemonConfig, MonitorMode};
pub use pq::PeriodicQuerying;
pub use rr::RequestReverify;

use crate::error::{Error, Result};

/// What a policy emits for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyAction {
    pub query: bool,
    pub estimate: f64,
    /// Query made because the adaptive period elapsed.
    pub organic: bool,
    /// Query forced by the surveillance counter.
    pub safety: bool,
}

/// Output of the decision phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct QueryDecision {
    pub query: bool,
    pub organic: bool,
    pub safety: bool,
}

impl QueryDecision {
    pub fn skip() -> Self {
        Self::default()
    }

    pub fn plain(query: bool) -> Self {
        QueryDecision {
            query,
            ..Self::default()
        }
    }
}

pub trait Policy {
    fn decide(&mut self, signal: f64) -> QueryDecision;

    /// Must be called once after every `decide`, with the label iff it was
    /// requested.
    fn observe(&mut self, label: Option<bool>) -> f64;

    fn estimate(&self) -> f64;

    fn name(&self) -> &'static str;

    /// Both phases for one event whose outcome is known to the caller.
    fn step(&mut self, signal: f64, outcome: bool) -> PolicyAction {
        let d = self.decide(signal);
        let estimate = self.observe(d.query.then_some(outcome));
        PolicyAction {
            query: d.query,
            estimate,
            organic: d.organic,
            safety: d.safety,
        }
    }
}

/// Most recent `capacity` labels with their step indices.
#[derive(Debug, Clone)]
pub struct LabelBuffer {
    capacity: usize,
    labels: VecDeque<(usize, bool)>,
    hits: usize,
}

impl LabelBuffer {
    pub fn new(capacity: usize) -> Self {
        LabelBuffer {
            capacity: capacity.max(1),
            labels: VecDeque::with_capacity(capacity.clamp(1, 1 << 16)),
            hits: 0,
        }
    }

    pub fn push(&mut self, t: usize, outcome: bool) {
        if self.labels.len() == self.capacity {
            if let Some((_, old)) = self.labels.pop_front() {
                self.hits -= usize::from(old);
            }
        }
        self.labels.push_back((t, outcome));
        self.hits += usize::from(outcome);
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Mean of the buffered labels, or `None` when empty.
    pub fn mean(&self) -> Option<f64> {
        (!self.labels.is_empty()).then(|| self.hits as f64 / self.labels.len() as f64)
    }

    pub fn times(&self) -> impl Iterator<Item = usize> + '_ {
        self.labels.iter().map(|(t, _)| *t)
    }

    pub fn outcomes(&self) -> impl Iterator<Item = bool> + '_ {
        self.labels.iter().map(|(_, o)| *o)
    }
}

/// Window size and buffer multiplier implied by a risk tolerance:
/// `n = ⌈9 ln(2/ε) / (2ε²)⌉` and `α = ε³ / (15 Δ ln(2/ε))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceConstants {
    pub n: usize,
    pub alpha: f64,
    /// Whether `Δ ≤ ε³ / (10 ln(2/ε))`, the range in which the risk
    /// guarantee is proven.
    pub within_guarantee: bool,
}

/// Largest drift bound for which the tolerance constants are proven safe.
pub fn max_certified_delta(epsilon: f64) -> f64 {
    epsilon.powi(3) / (10.0 * (2.0 / epsilon).ln())
}

pub fn tolerance_constants(epsilon: f64, delta: f64) -> Result<ToleranceConstants> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::config(format!("risk tolerance {epsilon} outside (0, 1)")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::config(format!("drift bound {delta} must be > 0")));
    }
    let log_term = (2.0 / epsilon).ln();
    let n = (9.0 * log_term / (2.0 * epsilon * epsilon)).ceil() as usize;
    let alpha = epsilon.powi(3) / (15.0 * delta * log_term);
    Ok(ToleranceConstants {
        n,
        alpha,
        within_guarantee: delta <= max_certified_delta(epsilon),
    })
}

/// Counter value for a wait of `steps` (rounded up); saturates for
/// unbounded waits.
pub(crate) fn wait_counter(steps: f64) -> i64 {
    if steps.is_finite() && steps < i64::MAX as f64 / 2.0 {
        steps.ceil() as i64
    } else {
        i64::MAX
    }
}

/// Branch taken by the batch/buffer counter automaton on one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum CounterBranch {
    Waiting,
    Querying,
    BatchComplete,
    BatchStart,
}

/// The query/buffer counter pair shared by periodic querying and the
/// safety condition. `QC` counts remaining batch queries, `BC` remaining
/// waiting steps; the branches are tried in a fixed order so that exactly
/// one fires per step.
#[derive(Debug, Clone)]
pub(crate) struct BatchCounter {
    pub(crate) batch: usize,
    pub(crate) query_counter: i64,
    pub(crate) buffer_counter: i64,
}

impl BatchCounter {
    pub(crate) fn new(batch: usize, initial_wait: i64) -> Self {
        BatchCounter {
            batch,
            query_counter: -1,
            buffer_counter: initial_wait,
        }
    }

    pub(crate) fn tick(&mut self) -> CounterBranch {
        if self.buffer_counter > 0 {
            self.buffer_counter -= 1;
            CounterBranch::Waiting
        } else if self.query_counter > 0 {
            self.query_counter -= 1;
            CounterBranch::Querying
        } else if self.query_counter == 0 {
            self.query_counter = -1;
            CounterBranch::BatchComplete
        } else if self.buffer_counter == 0 {
            self.query_counter = self.batch as i64 - 1;
            self.buffer_counter = -1;
            CounterBranch::BatchStart
        } else {
            // Unreachable while the buffer is re-armed after every batch.
            CounterBranch::Waiting
        }
    }

    /// Re-arms the buffer after a completed batch.
    pub(crate) fn rearm(&mut self, wait_steps: f64) {
        self.buffer_counter = wait_counter(wait_steps).saturating_sub(1).max(0);
    }
}

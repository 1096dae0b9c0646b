use super::{tolerance_constants, wait_counter, BatchCounter, CounterBranch, LabelBuffer, Policy, QueryDecision};
use crate::error::{Error, Result};

/// Open-loop periodic querying: wait `n·α` steps, query `n` consecutive
/// labels, publish their mean, repeat. The amortized query rate is
/// `1/(1+α)`.
#[derive(Debug, Clone)]
pub struct PeriodicQuerying {
    n: usize,
    alpha: f64,
    counter: BatchCounter,
    labels: LabelBuffer,
    estimate: f64,
    t: usize,
    completing: bool,
    within_guarantee: bool,
}

impl PeriodicQuerying {
    /// `alpha` may be `f64::INFINITY`, which never queries.
    pub fn new(n: usize, alpha: f64, mu0: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("batch size n must be >= 1"));
        }
        if alpha.is_nan() || alpha < 0.0 {
            return Err(Error::config(format!("buffer multiplier alpha {alpha} must be >= 0")));
        }
        if !(0.0..=1.0).contains(&mu0) {
            return Err(Error::config(format!("initial estimate {mu0} outside [0, 1]")));
        }
        Ok(PeriodicQuerying {
            n,
            alpha,
            counter: BatchCounter::new(n, wait_counter(n as f64 * alpha)),
            labels: LabelBuffer::new(n),
            estimate: mu0,
            t: 0,
            completing: false,
            within_guarantee: true,
        })
    }

    /// Parameterized by the long-run fraction of steps spent querying.
    pub fn from_budget(n: usize, budget: f64, mu0: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&budget) {
            return Err(Error::config(format!("query budget {budget} outside [0, 1]")));
        }
        let alpha = if budget == 0.0 { f64::INFINITY } else { 1.0 / budget - 1.0 };
        Self::new(n, alpha, mu0)
    }

    /// Constants that guarantee expected risk at most `epsilon` under
    /// `delta`-Lipschitz drift. Outside the proven range of `delta` the
    /// policy is still built; check [`Self::within_guarantee`].
    pub fn from_tolerance(epsilon: f64, delta: f64, mu0: f64) -> Result<Self> {
        let c = tolerance_constants(epsilon, delta)?;
        let mut pq = Self::new(c.n, c.alpha, mu0)?;
        pq.within_guarantee = c.within_guarantee;
        Ok(pq)
    }

    pub fn batch_size(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn within_guarantee(&self) -> bool {
        self.within_guarantee
    }

    /// Long-run query rate `1/(1+α)`.
    pub fn asymptotic_rate(&self) -> f64 {
        1.0 / (1.0 + self.alpha)
    }
}

impl Policy for PeriodicQuerying {
    fn decide(&mut self, _signal: f64) -> QueryDecision {
        let branch = self.counter.tick();
        self.completing = branch == CounterBranch::BatchComplete;
        QueryDecision::plain(matches!(branch, CounterBranch::Querying | CounterBranch::BatchStart))
    }

    fn observe(&mut self, label: Option<bool>) -> f64 {
        if let Some(outcome) = label {
            self.labels.push(self.t, outcome);
        }
        if self.completing {
            if let Some(mean) = self.labels.mean() {
                self.estimate = mean;
            }
            self.counter.rearm(self.n as f64 * self.alpha);
        }
        self.t += 1;
        self.estimate
    }

    fn estimate(&self) -> f64 {
        self.estimate
    }

    fn name(&self) -> &'static str {
        "pq"
    }
}

use super::{LabelBuffer, Policy, QueryDecision};
use crate::error::{Error, Result};

/// Queries a batch of `n` consecutive labels whenever the anomaly signal
/// reaches the threshold, and otherwise holds its estimate.
#[derive(Debug, Clone)]
pub struct RequestReverify {
    n: usize,
    threshold: f64,
    remaining: usize,
    labels: LabelBuffer,
    estimate: f64,
    t: usize,
    completing: bool,
}

impl RequestReverify {
    pub fn new(n: usize, threshold: f64, mu0: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("batch size n must be >= 1"));
        }
        if threshold.is_nan() || threshold < 0.0 {
            return Err(Error::config(format!("anomaly threshold {threshold} must be >= 0")));
        }
        if !(0.0..=1.0).contains(&mu0) {
            return Err(Error::config(format!("initial estimate {mu0} outside [0, 1]")));
        }
        Ok(RequestReverify {
            n,
            threshold,
            remaining: 0,
            labels: LabelBuffer::new(n),
            estimate: mu0,
            t: 0,
            completing: false,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn in_batch(&self) -> bool {
        self.remaining > 0
    }
}

impl Policy for RequestReverify {
    fn decide(&mut self, signal: f64) -> QueryDecision {
        // a trigger inside an active batch does not extend it
        let query = if self.remaining > 0 {
            self.remaining -= 1;
            true
        } else if signal >= self.threshold {
            self.remaining = self.n - 1;
            true
        } else {
            false
        };
        self.completing = query && self.remaining == 0;
        QueryDecision::plain(query)
    }

    fn observe(&mut self, label: Option<bool>) -> f64 {
        if let Some(outcome) = label {
            self.labels.push(self.t, outcome);
        }
        if self.completing {
            if let Some(mean) = self.labels.mean() {
                self.estimate = mean;
            }
        }
        self.t += 1;
        self.estimate
    }

    fn estimate(&self) -> f64 {
        self.estimate
    }

    fn name(&self) -> &'static str {
        "rr"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_starts_a_batch() {
        let mut rr = RequestReverify::new(3, 0.4, 0.8).unwrap();
        assert!(rr.step(0.5, true).query);
        assert!(rr.in_batch());
    }

    #[test]
    fn quiet_signal_never_queries() {
        let mut rr = RequestReverify::new(3, 0.4, 0.8).unwrap();
        for _ in 0..1000 {
            let a = rr.step(0.3, false);
            assert!(!a.query);
            assert_eq!(a.estimate, 0.8);
        }
    }

    #[test]
    fn batch_mean_published_at_batch_end() {
        let mut rr = RequestReverify::new(3, 0.4, 0.8).unwrap();
        let a = [rr.step(0.9, true), rr.step(0.0, true), rr.step(0.0, false)];
        assert!(a.iter().all(|x| x.query));
        assert_eq!(a[0].estimate, 0.8);
        assert_eq!(a[1].estimate, 0.8);
        assert!((a[2].estimate - 2.0 / 3.0).abs() < 1e-15);
        assert!(!rr.step(0.0, true).query);
    }

    #[test]
    fn retrigger_inside_batch_is_ignored() {
        let mut rr = RequestReverify::new(4, 0.5, 0.5).unwrap();
        let q: Vec<bool> = (0..6).map(|_| rr.step(1.0, true).query).collect();
        // always above threshold: batch of 4, then a fresh batch immediately
        assert_eq!(q, vec![true; 6]);
        let mut rr = RequestReverify::new(4, 0.5, 0.5).unwrap();
        let signals = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0];
        let q: Vec<bool> = signals.iter().map(|&g| rr.step(g, true).query).collect();
        assert_eq!(q, vec![true, true, true, true, false, false]);
    }
}

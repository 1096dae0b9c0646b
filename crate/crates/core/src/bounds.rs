//! Concentration bounds for label means taken under bounded drift.
//!
//! Labels gathered at steps `i ∈ I` estimate the accuracy at `now` with a
//! bias of at most `ψ = Δ · mean(|now − i|)`. Hoeffding's inequality then
//! holds with the deviation shifted by that bias:
//! `P(|X̄ − p| ≥ δ + ψ) ≤ 2 exp(−2nδ²)`.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LabelSample {
    times: Vec<usize>,
    outcomes: Vec<bool>,
    now: usize,
}

impl LabelSample {
    pub fn new(times: Vec<usize>, outcomes: Vec<bool>, now: usize) -> Result<Self> {
        if times.len() != outcomes.len() {
            return Err(Error::validation(format!(
                "{} label times but {} outcomes",
                times.len(),
                outcomes.len()
            )));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation("label times must be strictly increasing"));
        }
        if times.last().is_some_and(|&t| t > now) {
            return Err(Error::validation("label times must not exceed the current step"));
        }
        Ok(LabelSample { times, outcomes, now })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn mean(&self) -> Option<f64> {
        (!self.is_empty()).then(|| self.outcomes.iter().filter(|&&o| o).count() as f64 / self.len() as f64)
    }
}

/// Drift-induced bias bound `Δ · mean(|now − i|)`.
pub fn psi(sample: &LabelSample, delta_lip: f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::validation("psi needs at least one label"));
    }
    let total: usize = sample.times.iter().map(|&i| sample.now - i).sum();
    Ok(delta_lip * total as f64 / sample.len() as f64)
}

/// `min(1, 2 exp(−2nδ²))`.
pub fn hoeffding_biased_tail(n: usize, deviation: f64) -> f64 {
    (2.0 * (-2.0 * n as f64 * deviation * deviation).exp()).min(1.0)
}

/// Deviation `δ` at which the tail bound equals `failure`.
pub fn hoeffding_deviation(n: usize, failure: f64) -> f64 {
    ((2.0 / failure).ln() / (2.0 * n as f64)).max(0.0).sqrt()
}

/// Interval `mean ± (ψ + δ)` clamped to `[0, 1]`, where `δ` makes the
/// tail bound equal to `1 − confidence_level`.
pub fn confidence_interval(sample: &LabelSample, delta_lip: f64, confidence_level: f64) -> Result<(f64, f64)> {
    if !(confidence_level > 0.0 && confidence_level < 1.0) {
        return Err(Error::validation(format!("confidence level {confidence_level} outside (0, 1)")));
    }
    let bias = psi(sample, delta_lip)?;
    let mean = sample.mean().expect("nonempty checked by psi");
    let half = bias + hoeffding_deviation(sample.len(), 1.0 - confidence_level);
    Ok(((mean - half).max(0.0), (mean + half).min(1.0)))
}

/// Monitoring configuration to certify.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertifyInput {
    pub epsilon: f64,
    pub delta: f64,
    pub n: usize,
    pub alpha: f64,
    /// Largest margin surplus the policy may add to its period (0 for
    /// estimation).
    pub beta_cap: f64,
    /// Distance of the estimate from the threshold that the surplus was
    /// earned on; widens the first condition by the same amount.
    pub threshold_margin: f64,
}

impl CertifyInput {
    pub fn periodic(epsilon: f64, delta: f64, n: usize, alpha: f64) -> Self {
        CertifyInput {
            epsilon,
            delta,
            n,
            alpha,
            beta_cap: 0.0,
            threshold_margin: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertifyReport {
    pub input: CertifyInput,
    /// Upper bound on `ψ` over the query cycle.
    pub psi_max: f64,
    /// Deviation at which `2 exp(−2nδ²) = ε`.
    pub deviation: f64,
    /// `ε + margin − (ψ_max + δ)`; non-negative when the first condition holds.
    pub bias_slack: f64,
    /// `ε − 2 exp(−2nδ²)` at the chosen `δ`.
    pub tail_slack: f64,
    pub pass: bool,
}

/// Checks `ψ_max + δ ≤ ε` and `2 exp(−2nδ²) ≤ ε` with
/// `ψ_max = Δ n (α + β) + Δ (n + 1) / 2`, the bias of a batch mean used
/// for a full waiting period.
pub fn certify_risk(input: CertifyInput) -> CertifyReport {
    let CertifyInput {
        epsilon,
        delta,
        n,
        alpha,
        beta_cap,
        threshold_margin,
    } = input;
    let n_f = n as f64;
    let psi_max = if delta == 0.0 {
        0.0
    } else {
        delta * n_f * (alpha + beta_cap) + delta * (n_f + 1.0) / 2.0
    };
    let deviation = hoeffding_deviation(n, epsilon);
    let bias_slack = epsilon + threshold_margin - (psi_max + deviation);
    let tail_slack = epsilon - hoeffding_biased_tail(n, deviation);
    // the tail condition holds with equality by construction of δ
    let pass = bias_slack >= 0.0 && tail_slack >= -1e-12;
    CertifyReport {
        input,
        psi_max,
        deviation,
        bias_slack,
        tail_slack,
        pass,
    }
}

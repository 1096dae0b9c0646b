use serde::{Deserialize, Serialize};

use super::{tolerance_constants, wait_counter, BatchCounter, CounterBranch, LabelBuffer, Policy, QueryDecision};
use crate::detector::{QuantileMap, SignalHistory};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonitorMode {
    /// Track the accuracy itself (MAE risk).
    Estimation,
    /// Track which side of the threshold `ρ` the accuracy is on (hinge risk).
    Decision,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlDemonConfig {
    /// Label window for the estimate, also the safety batch size.
    pub n: usize,
    pub epsilon: f64,
    /// Drift bound the policy assumes.
    pub delta: f64,
    /// `k_min = ν·k_max`.
    pub nu: f64,
    pub rho: f64,
    /// Margin surplus factor, at least 1.
    pub b: f64,
    /// Refresh the decision-mode estimate on every label, not only at
    /// safety-batch completion.
    pub unbiased: bool,
    pub mode: MonitorMode,
    /// Base query period.
    pub alpha: f64,
    pub quantile_map: QuantileMap,
    pub mu0: f64,
}

impl MlDemonConfig {
    /// `n` and `α` from the risk-tolerance constants shared with periodic
    /// querying.
    #[allow(clippy::too_many_arguments)]
    pub fn from_tolerance(
        epsilon: f64,
        delta: f64,
        nu: f64,
        rho: f64,
        mode: MonitorMode,
        b: f64,
        unbiased: bool,
        mu0: f64,
    ) -> Result<Self> {
        let c = tolerance_constants(epsilon, delta)?;
        let cfg = MlDemonConfig {
            n: c.n,
            epsilon,
            delta,
            nu,
            rho,
            b,
            unbiased,
            mode,
            alpha: c.alpha,
            quantile_map: QuantileMap::default(),
            mu0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Replaces the label window while keeping `α`.
    pub fn with_window(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_quantile_map(mut self, map: QuantileMap) -> Self {
        self.quantile_map = map;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("window n must be >= 1"));
        }
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(Error::config(format!("nu {} outside (0, 1]", self.nu)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::config(format!("risk tolerance {} outside (0, 1)", self.epsilon)));
        }
        if self.delta.is_nan() || self.delta <= 0.0 {
            return Err(Error::config("drift bound must be > 0"));
        }
        if self.b.is_nan() || self.b < 1.0 {
            return Err(Error::config(format!("margin surplus factor b = {} must be >= 1", self.b)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::config(format!("alpha {} must be finite and > 0", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.rho) || !(0.0..=1.0).contains(&self.mu0) {
            return Err(Error::config("rho and mu0 must lie in [0, 1]"));
        }
        self.quantile_map.validate()
    }
}

/// Extra query period earned by an estimate sitting far from the threshold:
/// `b · max(|μ̂ − ρ| − ε, 0) / Δ`.
pub fn margin_surplus(estimate: f64, rho: f64, epsilon: f64, delta: f64, b: f64) -> f64 {
    b * ((estimate - rho).abs() - epsilon).max(0.0) / delta
}

/// Query period `k` from the modulation factor, clipped to `[k_min, k_max]`.
pub fn modulated_period(factor: f64, k_min: f64, k_max: f64) -> f64 {
    (factor * (k_max - k_min) / 2.0).clamp(k_min, k_max)
}

/// Per-step internals, exposed for logging and tests.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepDiagnostics {
    pub quantile: f64,
    pub factor: f64,
    pub k: f64,
    pub k_min: f64,
    pub k_max: f64,
    /// Unqueried steps immediately before this one.
    pub idle_steps: usize,
    /// `max(|ρ − μ̂|, ε)` in decision mode, `ε` in estimation mode.
    pub margin: f64,
}

/// Anomaly-modulated querying with a bounded period range and, in decision
/// mode, a periodic safety batch whose spacing grows with the estimate's
/// distance from the threshold.
#[derive(Debug, Clone)]
pub struct MlDemon {
    cfg: MlDemonConfig,
    history: SignalHistory,
    labels: LabelBuffer,
    safety: BatchCounter,
    beta: f64,
    estimate: f64,
    idle_steps: usize,
    t: usize,
    completing: bool,
    diag: StepDiagnostics,
}

impl MlDemon {
    pub fn new(cfg: MlDemonConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(MlDemon {
            history: SignalHistory::new(),
            labels: LabelBuffer::new(cfg.n),
            safety: BatchCounter::new(cfg.n, wait_counter(cfg.alpha)),
            beta: 0.0,
            estimate: cfg.mu0,
            idle_steps: 0,
            t: 0,
            completing: false,
            diag: StepDiagnostics::default(),
            cfg,
        })
    }

    pub fn config(&self) -> &MlDemonConfig {
        &self.cfg
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn diagnostics(&self) -> StepDiagnostics {
        self.diag
    }

    pub fn k_max(&self) -> f64 {
        self.cfg.alpha + self.beta
    }
}

impl Policy for MlDemon {
    fn decide(&mut self, signal: f64) -> QueryDecision {
        let cfg = &self.cfg;
        let margin = match cfg.mode {
            MonitorMode::Decision => (cfg.rho - self.estimate).abs().max(cfg.epsilon),
            MonitorMode::Estimation => cfg.epsilon,
        };
        let k_max = cfg.alpha + self.beta;
        let k_min = cfg.nu * k_max;

        let signal = if signal.is_finite() { signal.max(0.0) } else { f64::MAX };
        let quantile = self.history.quantile(signal);
        self.history.push(signal);
        let factor = cfg
            .quantile_map
            .factor(quantile)
            .expect("mid-rank quantile lies in [0, 1]");
        let k = modulated_period(factor, k_min, k_max);

        // at least ⌊k⌋ unqueried steps since the previous label
        let organic = self.idle_steps as f64 >= k.floor();

        let mut safety = false;
        self.completing = false;
        if cfg.mode == MonitorMode::Decision {
            match self.safety.tick() {
                CounterBranch::Querying | CounterBranch::BatchStart => safety = true,
                CounterBranch::BatchComplete => self.completing = true,
                CounterBranch::Waiting => {}
            }
        }

        self.diag = StepDiagnostics {
            quantile,
            factor,
            k,
            k_min,
            k_max,
            idle_steps: self.idle_steps,
            margin,
        };
        let query = organic || safety;
        self.idle_steps = if query { 0 } else { self.idle_steps + 1 };
        QueryDecision {
            query,
            organic,
            safety,
        }
    }

    fn observe(&mut self, label: Option<bool>) -> f64 {
        if let Some(outcome) = label {
            self.labels.push(self.t, outcome);
        }
        let cfg = &self.cfg;
        if cfg.mode == MonitorMode::Estimation || cfg.unbiased {
            if let Some(mean) = self.labels.mean() {
                self.estimate = mean;
            }
        }
        if self.completing {
            if let Some(mean) = self.labels.mean() {
                self.estimate = mean;
            }
            self.beta = margin_surplus(self.estimate, cfg.rho, cfg.epsilon, cfg.delta, cfg.b);
            self.safety.rearm(cfg.n as f64 * (cfg.alpha + self.beta));
        }
        self.t += 1;
        self.estimate
    }

    fn estimate(&self) -> f64 {
        self.estimate
    }

    fn name(&self) -> &'static str {
        match self.cfg.mode {
            MonitorMode::Estimation => "mldemon_est",
            MonitorMode::Decision => "mldemon_dec",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est_config(nu: f64) -> MlDemonConfig {
        MlDemonConfig::from_tolerance(0.1, 1e-6, nu, 0.5, MonitorMode::Estimation, 1.0, true, 0.8).unwrap()
    }

    #[test]
    fn margin_surplus_substitution() {
        assert!((margin_surplus(0.9, 0.7, 0.1, 0.001, 1.0) - 100.0).abs() < 1e-9);
        assert_eq!(margin_surplus(0.75, 0.7, 0.1, 0.001, 1.0), 0.0);
    }

    #[test]
    fn organic_query_after_k_idle_steps() {
        // ν = 1 pins k to α; pick α = 4 directly
        let mut cfg = est_config(1.0);
        cfg.alpha = 4.0;
        let mut m = MlDemon::new(cfg).unwrap();
        let q: Vec<bool> = (0..11).map(|_| m.step(0.0, true).query).collect();
        assert_eq!(
            q,
            vec![false, false, false, false, true, false, false, false, false, true, false]
        );
        assert_eq!(m.diagnostics().k, 4.0);
    }

    #[test]
    fn constant_signal_gives_neutral_factor() {
        let mut m = MlDemon::new(est_config(0.15)).unwrap();
        for _ in 0..200 {
            m.step(0.3, true);
            let d = m.diagnostics();
            assert_eq!(d.quantile, 0.5);
            assert_eq!(d.factor, 1.0);
            assert!((d.k - (d.k_max - d.k_min) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_range_is_fixed_period() {
        let m = MlDemon::new(est_config(1.0)).unwrap();
        assert!((m.k_max() - 22.25388).abs() < 1e-4);
        let mut m = m;
        let mut signals = [0.0, 5.0, 0.1, 100.0].iter().cycle();
        for _ in 0..500 {
            m.step(*signals.next().unwrap(), true);
            let d = m.diagnostics();
            assert_eq!(d.k_min, d.k_max);
            assert_eq!(d.k, d.k_max);
        }
    }

    #[test]
    fn estimation_mode_never_sets_beta() {
        let mut m = MlDemon::new(est_config(0.15)).unwrap();
        for t in 0..50_000 {
            let a = m.step((t % 7) as f64, t % 3 != 0);
            assert!(!a.safety);
        }
        assert_eq!(m.beta(), 0.0);
    }

    #[test]
    fn decision_safety_batch_sets_beta() {
        let mut cfg = MlDemonConfig::from_tolerance(0.1, 1e-3, 0.15, 0.5, MonitorMode::Decision, 1.0, false, 0.9)
            .unwrap()
            .with_window(10);
        cfg.alpha = 3.0;
        let mut m = MlDemon::new(cfg).unwrap();
        let mut safety = 0;
        for _ in 0..14 {
            let a = m.step(0.0, true);
            safety += usize::from(a.safety);
        }
        // wait 3, ten safety queries, completion on step 13
        assert_eq!(safety, 10);
        assert_eq!(m.estimate(), 1.0);
        assert!((m.beta() - (1.0 - 0.5 - 0.1) / 1e-3).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_nu() {
        assert!(MlDemonConfig::from_tolerance(0.1, 1e-6, 0.0, 0.5, MonitorMode::Estimation, 1.0, true, 0.8).is_err());
        assert!(MlDemonConfig::from_tolerance(0.1, 1e-6, 1.5, 0.5, MonitorMode::Estimation, 1.0, true, 0.8).is_err());
    }
}

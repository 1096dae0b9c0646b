use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detector::{DetectorKind, QuantileMap, DEFAULT_WINDOW};
use crate::error::{Error, Result};
use crate::policy::{MlDemon, MlDemonConfig, MonitorMode, PeriodicQuerying, Policy, RequestReverify};
use crate::stream::{DriftKind, DriftSpec};

/// Label window shared by every policy unless overridden.
pub const DEFAULT_WINDOW_N: usize = 15;
pub const DEFAULT_NU: f64 = 0.15;
/// MLDemon's assumed drift bound is this constant over the horizon.
pub const DEFAULT_DELTA_SCALE: f64 = 3.0;
pub const DEFAULT_RHO_OFFSETS: [f64; 3] = [0.05, 0.10, 0.20];
pub const DEFAULT_TRUTH_WINDOW: usize = 100;
pub const DEFAULT_BLOCK_LEN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// Swept over the query budget `B`.
    Pq,
    /// Swept over the anomaly threshold.
    Rr,
    /// Swept over the risk tolerance `ε`.
    MldemonEst,
    /// Swept over the risk tolerance `ε`.
    MldemonDec,
}

impl PolicyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Pq => "pq",
            PolicyKind::Rr => "rr",
            PolicyKind::MldemonEst => "mldemon_est",
            PolicyKind::MldemonDec => "mldemon_dec",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "pq" => Ok(PolicyKind::Pq),
            "rr" => Ok(PolicyKind::Rr),
            "mldemon_est" => Ok(PolicyKind::MldemonEst),
            "mldemon_dec" => Ok(PolicyKind::MldemonDec),
            other => Err(Error::config(format!(
                "unknown policy '{other}' (expected pq, rr, mldemon_est or mldemon_dec)"
            ))),
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    pub sweep: Vec<f64>,
    /// Batch size for PQ and RR, label window for MLDemon.
    #[serde(default = "default_n")]
    pub n: usize,
    /// MLDemon's drift bound; `3 / horizon` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default = "default_nu")]
    pub nu: f64,
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(default = "default_true")]
    pub unbiased: bool,
    #[serde(default)]
    pub quantile_map: QuantileMap,
}

fn default_n() -> usize {
    DEFAULT_WINDOW_N
}
fn default_nu() -> f64 {
    DEFAULT_NU
}
fn default_b() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}

/// Facts about the stream that policies are built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyContext {
    pub horizon: usize,
    /// Initial estimate, the accuracy measured before deployment.
    pub mu0: f64,
    pub rho: f64,
}

impl PolicySpec {
    pub fn new(kind: PolicyKind, sweep: Vec<f64>) -> Self {
        PolicySpec {
            kind,
            sweep,
            n: DEFAULT_WINDOW_N,
            delta: None,
            nu: DEFAULT_NU,
            b: 1.0,
            unbiased: true,
            quantile_map: QuantileMap::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweep.is_empty() {
            return Err(Error::config(format!("policy {}: sweep must not be empty", self.kind)));
        }
        if self.n == 0 {
            return Err(Error::config(format!("policy {}: n must be >= 1", self.kind)));
        }
        if let Some(d) = self.delta {
            if d.is_nan() || d <= 0.0 {
                return Err(Error::config(format!("policy {}: delta must be > 0", self.kind)));
            }
        }
        if self.sweep.iter().any(|v| !v.is_finite()) {
            return Err(Error::config(format!("policy {}: sweep values must be finite", self.kind)));
        }
        self.quantile_map.validate()
    }

    /// Drift bound MLDemon assumes on a stream of `horizon` steps.
    pub fn assumed_delta(&self, horizon: usize) -> f64 {
        self.delta.unwrap_or(DEFAULT_DELTA_SCALE / horizon.max(1) as f64)
    }

    /// Instantiates the policy at one sweep value.
    pub fn build(&self, value: f64, ctx: PolicyContext) -> Result<Box<dyn Policy + Send>> {
        Ok(match self.kind {
            PolicyKind::Pq => Box::new(PeriodicQuerying::from_budget(self.n, value, ctx.mu0)?),
            PolicyKind::Rr => Box::new(RequestReverify::new(self.n, value, ctx.mu0)?),
            PolicyKind::MldemonEst | PolicyKind::MldemonDec => {
                let mode = if self.kind == PolicyKind::MldemonEst {
                    MonitorMode::Estimation
                } else {
                    MonitorMode::Decision
                };
                let cfg = MlDemonConfig::from_tolerance(
                    value,
                    self.assumed_delta(ctx.horizon),
                    self.nu,
                    ctx.rho,
                    mode,
                    self.b,
                    self.unbiased,
                    ctx.mu0,
                )?
                .with_window(self.n)
                .with_quantile_map(self.quantile_map);
                Box::new(MlDemon::new(cfg)?)
            }
        })
    }
}

/// A full experiment: one stream family, a detector, the policies to sweep
/// and the seeds to average over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub drift: DriftSpec,
    #[serde(default)]
    pub detector: DetectorKind,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(rename = "policy")]
    pub policies: Vec<PolicySpec>,
    pub seeds: Vec<u64>,
    /// Label cost used for the per-run losses.
    #[serde(default = "default_cost")]
    pub c: f64,
    /// Label costs at which the frontier minimum loss is reported; `[c]`
    /// when empty.
    #[serde(default)]
    pub costs: Vec<f64>,
    /// Thresholds are the reference accuracy minus each offset; the first
    /// offset is the one decision-mode policies target.
    #[serde(default = "default_rho_offsets")]
    pub rho_offsets: Vec<f64>,
    /// Block length for the replay bootstrap.
    #[serde(default = "default_block_len")]
    pub block_len: usize,
    /// Window of the moving-average accuracy proxy.
    #[serde(default = "default_truth_window")]
    pub truth_window: usize,
    #[serde(default = "default_true")]
    pub write_trajectories: bool,
}

fn default_window() -> usize {
    DEFAULT_WINDOW
}
fn default_cost() -> f64 {
    0.1
}
fn default_rho_offsets() -> Vec<f64> {
    DEFAULT_RHO_OFFSETS.to_vec()
}
fn default_block_len() -> usize {
    DEFAULT_BLOCK_LEN
}
fn default_truth_window() -> usize {
    DEFAULT_TRUTH_WINDOW
}

/// Command-line values that replace file keys.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub policy: Option<PolicyKind>,
}

impl ExperimentConfig {
    pub fn new(drift: DriftSpec, policies: Vec<PolicySpec>, seeds: Vec<u64>) -> Self {
        ExperimentConfig {
            drift,
            detector: DetectorKind::default(),
            window: DEFAULT_WINDOW,
            policies,
            seeds,
            c: default_cost(),
            costs: Vec::new(),
            rho_offsets: default_rho_offsets(),
            block_len: DEFAULT_BLOCK_LEN,
            truth_window: DEFAULT_TRUTH_WINDOW,
            write_trajectories: true,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(seed) = o.seed {
            self.seeds = vec![seed];
        }
        if let Some(kind) = o.policy {
            self.policies.retain(|p| p.kind == kind);
            if self.policies.is_empty() {
                return Err(Error::config(format!("policy {kind} is not configured")));
            }
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        self.drift.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        if self.policies.is_empty() {
            return Err(Error::config("at least one [[policy]] table is required"));
        }
        for (i, p) in self.policies.iter().enumerate() {
            p.validate()?;
            if self.policies[..i].iter().any(|q| q.kind == p.kind) {
                return Err(Error::config(format!("policy {} configured twice", p.kind)));
            }
        }
        if self.window == 0 {
            return Err(Error::config("detector window must be >= 1"));
        }
        if !(self.c >= 0.0 && self.c.is_finite()) || self.costs.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
            return Err(Error::config("label costs must be finite and >= 0"));
        }
        if self.rho_offsets.is_empty() {
            return Err(Error::config("at least one threshold offset is required"));
        }
        if matches!(self.drift.kind, DriftKind::Replay { .. }) && self.block_len == 0 {
            return Err(Error::config("block_len must be >= 1"));
        }
        Ok(())
    }

    pub fn loss_costs(&self) -> Vec<f64> {
        if self.costs.is_empty() {
            vec![self.c]
        } else {
            self.costs.clone()
        }
    }

    pub fn policy(&self, kind: PolicyKind) -> Option<&PolicySpec> {
        self.policies.iter().find(|p| p.kind == kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
seeds = [1, 2]
c = 0.25
detector = "mean_shift"

[drift]
kind = "random_walk"
delta = 1e-4
horizon = 500
mu0 = 0.9

[[policy]]
kind = "pq"
sweep = [0.05, 0.1]

[[policy]]
kind = "mldemon_dec"
sweep = [0.1]
nu = 0.2
"#;

    #[test]
    fn parses_sample() {
        let cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(cfg.seeds, vec![1, 2]);
        assert_eq!(cfg.detector, DetectorKind::MeanShift);
        assert_eq!(cfg.policies.len(), 2);
        assert_eq!(cfg.policies[0].n, DEFAULT_WINDOW_N);
        assert_eq!(cfg.policies[1].nu, 0.2);
        assert_eq!(cfg.rho_offsets, DEFAULT_RHO_OFFSETS.to_vec());
        assert_eq!(cfg.drift.mu0, 0.9);
        assert_eq!(cfg.loss_costs(), vec![0.25]);
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn overrides_replace_keys() {
        let mut cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        cfg.apply(&Overrides {
            seed: Some(9),
            policy: Some(PolicyKind::Pq),
        })
        .unwrap();
        assert_eq!(cfg.seeds, vec![9]);
        assert_eq!(cfg.policies.len(), 1);
        let missing = cfg.apply(&Overrides {
            seed: None,
            policy: Some(PolicyKind::Rr),
        });
        assert!(missing.is_err());
    }

    #[test]
    fn rejects_empty_sweep_and_unknown_keys() {
        let bad = SAMPLE.replace("sweep = [0.1]", "sweep = []");
        assert!(matches!(ExperimentConfig::from_toml_str(&bad), Err(Error::Config(_))));
        let bad = SAMPLE.replace("nu = 0.2", "nu = 0.2\nbogus = 1");
        assert!(ExperimentConfig::from_toml_str(&bad).is_err());
        let bad = SAMPLE.replace("seeds = [1, 2]", "seeds = []");
        assert!(ExperimentConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn default_mldemon_delta_scales_with_horizon() {
        let p = PolicySpec::new(PolicyKind::MldemonEst, vec![0.1]);
        assert_eq!(p.assumed_delta(30_000), 1e-4);
    }
}

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::detector::{DetectorKind, DetectorState};
use crate::error::{Error, Result};
use crate::policy::Policy;
use crate::risk::{amortize, RiskReport, TruthSource};
use crate::stream::{block_bootstrap, generate, moving_average_truth, replay_csv, DriftKind, StreamEvent};

use super::config::{ExperimentConfig, PolicyContext, PolicyKind};

/// Reference accuracy is the mean truth over at most this many leading steps.
const REFERENCE_STEPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub t: usize,
    pub a: bool,
    pub mu_hat: f64,
    pub mu: f64,
    pub signal: f64,
    pub organic: bool,
    pub safety: bool,
}

/// A stream prepared once and shared by every policy run on the same seed:
/// events, detector signals and the accuracy used for scoring.
#[derive(Debug, Clone)]
pub struct PreparedStream {
    pub events: Vec<StreamEvent>,
    pub signals: Vec<f64>,
    pub truth: Vec<f64>,
    pub truth_source: TruthSource,
}

impl PreparedStream {
    pub fn new(events: Vec<StreamEvent>, detector: DetectorKind, window: usize, truth_window: usize) -> Result<Self> {
        let signals = detector_signals(&events, detector, window)?;
        let (truth, truth_source) = ground_truth(&events, truth_window);
        Ok(PreparedStream {
            events,
            signals,
            truth,
            truth_source,
        })
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Accuracy measured before deployment: the mean truth over the first
    /// steps of the stream.
    pub fn reference_accuracy(&self) -> f64 {
        let k = self.truth.len().min(REFERENCE_STEPS);
        if k == 0 {
            return 0.5;
        }
        self.truth[..k].iter().sum::<f64>() / k as f64
    }
}

/// Stream for one seed of the configured drift. Replayed logs are resampled
/// by block bootstrap, one resample per seed.
pub fn prepare_stream(config: &ExperimentConfig, seed: u64) -> Result<PreparedStream> {
    let events = match &config.drift.kind {
        DriftKind::Replay { path } => {
            let log = replay_csv(path)?;
            let horizon = if config.drift.horizon == 0 {
                log.len()
            } else {
                config.drift.horizon.min(log.len())
            };
            block_bootstrap(&log[..horizon], config.block_len, seed)
        }
        _ => generate(&config.drift.with_seed(seed))?,
    };
    if events.is_empty() {
        return Err(Error::validation("stream has no events"));
    }
    PreparedStream::new(events, config.detector, config.window, config.truth_window)
}

pub fn detector_signals(events: &[StreamEvent], kind: DetectorKind, window: usize) -> Result<Vec<f64>> {
    let mut det = DetectorState::new(kind, window)?;
    events.iter().map(|e| det.observe(e)).collect()
}

/// Generator accuracy when every event carries it, otherwise the trailing
/// moving average of outcomes.
pub fn ground_truth(events: &[StreamEvent], window: usize) -> (Vec<f64>, TruthSource) {
    if let Some(truth) = events.iter().map(|e| e.true_accuracy).collect::<Option<Vec<f64>>>() {
        return (truth, TruthSource::Generator);
    }
    let outcomes: Vec<bool> = events.iter().map(|e| e.outcome).collect();
    (moving_average_truth(&outcomes, window), TruthSource::MovingAverage)
}

/// Steps `policy` through a prepared stream. The outcome of an event is
/// handed to the policy only on steps where it queried.
pub fn simulate(stream: &PreparedStream, policy: &mut dyn Policy) -> Vec<TrajectoryRecord> {
    stream
        .events
        .iter()
        .zip(&stream.signals)
        .zip(&stream.truth)
        .enumerate()
        .map(|(t, ((event, &signal), &mu))| {
            let d = policy.decide(signal);
            let label = if d.query { Some(event.outcome) } else { None };
            let mu_hat = policy.observe(label);
            TrajectoryRecord {
                t,
                a: d.query,
                mu_hat,
                mu,
                signal,
                organic: d.organic,
                safety: d.safety,
            }
        })
        .collect()
}

pub fn score(records: &[TrajectoryRecord], rho: f64, c: f64, source: TruthSource) -> Result<RiskReport> {
    let a: Vec<bool> = records.iter().map(|r| r.a).collect();
    let est: Vec<f64> = records.iter().map(|r| r.mu_hat).collect();
    let truth: Vec<f64> = records.iter().map(|r| r.mu).collect();
    amortize(&a, &est, &truth, rho, c, source)
}

/// One policy run on one seed, scored at every configured threshold.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub policy: PolicyKind,
    pub hyperparam: f64,
    pub seed: u64,
    pub records: Vec<TrajectoryRecord>,
    /// One report per threshold offset, in configuration order.
    pub reports: Vec<RiskReport>,
}

impl Trajectory {
    /// Report at the primary threshold.
    pub fn report(&self) -> &RiskReport {
        &self.reports[0]
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        writeln!(w, "t,a,mu_hat,mu,signal,organic,safety")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.t,
                u8::from(r.a),
                r.mu_hat,
                r.mu,
                r.signal,
                u8::from(r.organic),
                u8::from(r.safety)
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs one configured policy at one sweep value on an already prepared
/// stream.
pub fn run_on_stream(
    config: &ExperimentConfig,
    stream: &PreparedStream,
    policy: PolicyKind,
    hyperparam: f64,
    seed: u64,
) -> Result<Trajectory> {
    let spec = config
        .policy(policy)
        .ok_or_else(|| Error::config(format!("policy {policy} is not configured")))?;
    let mu0 = stream.reference_accuracy();
    let rhos: Vec<f64> = config.rho_offsets.iter().map(|o| (mu0 - o).clamp(0.0, 1.0)).collect();
    let ctx = PolicyContext {
        horizon: stream.len(),
        mu0,
        rho: rhos[0],
    };
    let mut p = spec.build(hyperparam, ctx)?;
    let records = simulate(stream, p.as_mut());
    let reports = rhos
        .iter()
        .map(|&rho| score(&records, rho, config.c, stream.truth_source))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        policy,
        hyperparam,
        seed,
        records,
        reports,
    })
}

/// Generates the stream for `seed` and runs one policy at one sweep value.
pub fn run_deployment(config: &ExperimentConfig, policy: PolicyKind, hyperparam: f64, seed: u64) -> Result<Trajectory> {
    config.validate()?;
    let stream = prepare_stream(config, seed)?;
    run_on_stream(config, &stream, policy, hyperparam, seed)
}

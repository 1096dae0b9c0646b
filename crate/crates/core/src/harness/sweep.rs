use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::risk::{build_frontier, frontier_curve, min_loss_over_frontier, normalized_auc, FrontierPoint, RiskKind, RiskReport};

use super::config::{ExperimentConfig, PolicyKind};
use super::run::{prepare_stream, run_on_stream, PreparedStream};

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Where to write CSV and JSON output; nothing is written when absent.
    pub out_dir: Option<PathBuf>,
    /// Worker threads; 0 lets the pool pick.
    pub jobs: usize,
}

/// Risk label used in the summary tables, e.g. `mae` or `hinge@0.1`.
pub fn risk_key(kind: RiskKind, offset: f64) -> String {
    match kind {
        RiskKind::Mae => "mae".to_string(),
        _ => format!("{}@{}", kind.as_str(), offset),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Normalization {
    /// Largest mean query rate over all policies' frontier points.
    pub q_max: f64,
    /// Largest mean risk per risk key over all policies.
    pub r_max: BTreeMap<String, f64>,
    pub convention: &'static str,
    pub truth_source: crate::risk::TruthSource,
}

const CONVENTION: &str = "each axis divided by its maximum over all policies (1 when that maximum is 0); \
frontier held flat to Q=0 and Q=1; trapezoidal rule; standard errors across seeds";

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub config: ExperimentConfig,
    /// policy → risk key → normalized AUC.
    pub auc: BTreeMap<String, BTreeMap<String, f64>>,
    /// policy → cost → risk key → minimum of `c·Q + R` over the frontier.
    pub min_loss: BTreeMap<String, BTreeMap<String, BTreeMap<String, f64>>>,
    pub normalization: Normalization,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    /// Frontier at the primary threshold, per policy.
    pub frontiers: BTreeMap<PolicyKind, Vec<FrontierPoint>>,
    /// Frontier per policy and threshold offset index.
    pub frontiers_by_offset: BTreeMap<PolicyKind, Vec<Vec<FrontierPoint>>>,
    pub summary: SweepSummary,
}

impl SweepResult {
    pub fn auc(&self, policy: PolicyKind, key: &str) -> Option<f64> {
        self.summary.auc.get(policy.as_str())?.get(key).copied()
    }
}

struct Job {
    policy: PolicyKind,
    index: usize,
    value: f64,
    seed_index: usize,
}

fn trajectory_file(dir: &Path, job: &Job, seed: u64) -> PathBuf {
    dir.join(format!("trajectory_{}_h{:02}_s{}.csv", job.policy, job.index, seed))
}

/// Runs every policy at every sweep value on every seed, then builds
/// frontiers and the summary tables. Output files depend only on the
/// configuration, never on scheduling.
pub fn run_sweep(config: &ExperimentConfig, opts: &SweepOptions) -> Result<SweepResult> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir)?;
    }

    let streams: Vec<PreparedStream> = pool.install(|| {
        config
            .seeds
            .par_iter()
            .map(|&seed| prepare_stream(config, seed))
            .collect::<Result<Vec<_>>>()
    })?;

    let jobs: Vec<Job> = config
        .policies
        .iter()
        .flat_map(|p| {
            p.sweep.iter().enumerate().flat_map(move |(index, &value)| {
                (0..config.seeds.len()).map(move |seed_index| Job {
                    policy: p.kind,
                    index,
                    value,
                    seed_index,
                })
            })
        })
        .collect();

    let write_dir = opts.out_dir.as_deref().filter(|_| config.write_trajectories);
    let reports: Vec<Vec<RiskReport>> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let seed = config.seeds[job.seed_index];
                let tr = run_on_stream(config, &streams[job.seed_index], job.policy, job.value, seed)?;
                if let Some(dir) = write_dir {
                    tr.write_csv(trajectory_file(dir, job, seed))?;
                }
                Ok(tr.reports)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let offsets = &config.rho_offsets;
    let mut frontiers_by_offset = BTreeMap::new();
    let mut cursor = 0;
    for p in &config.policies {
        let n_seeds = config.seeds.len();
        let per_offset: Vec<Vec<FrontierPoint>> = (0..offsets.len())
            .map(|j| {
                let groups: Vec<(f64, Vec<RiskReport>)> = p
                    .sweep
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        let start = cursor + i * n_seeds;
                        (v, reports[start..start + n_seeds].iter().map(|r| r[j]).collect())
                    })
                    .collect();
                build_frontier(&groups)
            })
            .collect();
        cursor += p.sweep.len() * n_seeds;
        frontiers_by_offset.insert(p.kind, per_offset);
    }

    let summary = summarize(config, &frontiers_by_offset, streams[0].truth_source)?;
    let frontiers: BTreeMap<PolicyKind, Vec<FrontierPoint>> =
        frontiers_by_offset.iter().map(|(k, v)| (*k, v[0].clone())).collect();

    if let Some(dir) = &opts.out_dir {
        for (kind, points) in &frontiers {
            write_frontier_csv(dir.join(format!("frontier_{kind}.csv")), points)?;
        }
        let file = std::fs::File::create(dir.join("summary.json"))?;
        let mut w = std::io::BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, &summary)?;
        writeln!(w)?;
        w.flush()?;
    }

    Ok(SweepResult {
        frontiers,
        frontiers_by_offset,
        summary,
    })
}

type Curves = Vec<(String, Vec<(f64, f64)>)>;

/// Frontier curves keyed by risk label for one policy.
fn curves(per_offset: &[Vec<FrontierPoint>], offsets: &[f64]) -> Curves {
    let mut out = vec![(risk_key(RiskKind::Mae, 0.0), frontier_curve(&per_offset[0], RiskKind::Mae))];
    for (j, &o) in offsets.iter().enumerate() {
        for kind in [RiskKind::Hinge, RiskKind::Bin] {
            out.push((risk_key(kind, o), frontier_curve(&per_offset[j], kind)));
        }
    }
    out
}

fn summarize(
    config: &ExperimentConfig,
    frontiers: &BTreeMap<PolicyKind, Vec<Vec<FrontierPoint>>>,
    truth_source: crate::risk::TruthSource,
) -> Result<SweepSummary> {
    let all: Vec<(PolicyKind, Curves)> = frontiers
        .iter()
        .map(|(k, f)| (*k, curves(f, &config.rho_offsets)))
        .collect();

    let positive_or_one = |x: f64| if x > 0.0 { x } else { 1.0 };
    let q_max = positive_or_one(
        all.iter()
            .flat_map(|(_, cs)| cs[0].1.iter().map(|p| p.0))
            .fold(0.0, f64::max),
    );
    let mut r_max = BTreeMap::new();
    for (_, cs) in &all {
        for (key, curve) in cs {
            let m = curve.iter().map(|p| p.1).fold(0.0, f64::max);
            let e = r_max.entry(key.clone()).or_insert(0.0f64);
            *e = e.max(m);
        }
    }
    for v in r_max.values_mut() {
        *v = positive_or_one(*v);
    }

    let mut auc = BTreeMap::new();
    let mut min_loss = BTreeMap::new();
    for (kind, cs) in &all {
        let mut a = BTreeMap::new();
        let mut by_cost = BTreeMap::new();
        for (key, curve) in cs {
            a.insert(key.clone(), normalized_auc(curve, q_max, r_max[key])?);
        }
        for c in config.loss_costs() {
            let mut m = BTreeMap::new();
            for (key, curve) in cs {
                m.insert(key.clone(), min_loss_over_frontier(curve, c)?);
            }
            by_cost.insert(format!("{c}"), m);
        }
        auc.insert(kind.to_string(), a);
        min_loss.insert(kind.to_string(), by_cost);
    }

    Ok(SweepSummary {
        config: config.clone(),
        auc,
        min_loss,
        normalization: Normalization {
            q_max,
            r_max,
            convention: CONVENTION,
            truth_source,
        },
    })
}

pub fn write_frontier_csv(path: impl AsRef<Path>, points: &[FrontierPoint]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "hyperparam,Q,Q_stderr,R_mae,R_hinge,R_bin,stderr_mae,stderr_hinge,stderr_bin")?;
    for p in points {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            p.hyperparam, p.q, p.q_stderr, p.r_mae, p.r_hinge, p.r_bin, p.stderr_mae, p.stderr_hinge, p.stderr_bin
        )?;
    }
    w.flush()?;
    Ok(())
}

//! Monitors a recorded prediction log. Without generator truth, risk is
//! scored against a moving average of outcomes, and each seed is a block
//! bootstrap of the log.
//!
//! cargo run --example replay_log -- path/to/log.csv

use deploy_monitor::harness::{run_sweep, ExperimentConfig, PolicyKind, PolicySpec, SweepOptions};
use deploy_monitor::stream::{generate, write_csv, DriftKind, DriftSpec};

fn main() -> deploy_monitor::Result<()> {
    let path = match std::env::args().nth(1) {
        Some(p) => p.into(),
        None => {
            // no log given: record one from a drifting stream
            let path = std::env::temp_dir().join("deploy_monitor_replay_demo.csv");
            write_csv(&path, &generate(&DriftSpec::random_walk(5e-4, 0.85, 20_000, 4))?)?;
            path
        }
    };
    let drift = DriftSpec {
        kind: DriftKind::Replay { path },
        delta: 0.0,
        horizon: 0,
        mu0: 0.0,
        seed: 0,
    };
    let cfg = ExperimentConfig::new(
        drift,
        vec![
            PolicySpec::new(PolicyKind::Pq, vec![0.01, 0.05, 0.2]),
            PolicySpec::new(PolicyKind::MldemonEst, vec![0.3, 0.5, 0.7]),
        ],
        vec![0, 1, 2],
    );
    let r = run_sweep(&cfg, &SweepOptions::default())?;
    for (policy, points) in &r.frontiers {
        for p in points {
            println!("{policy:<12} h={:<6} Q={:.4}±{:.4} R_mae={:.4}", p.hyperparam, p.q, p.q_stderr, p.r_mae);
        }
    }
    Ok(())
}

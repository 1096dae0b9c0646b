//! Sweeps every policy in a config file and prints the normalized AUC table.
//!
//! cargo run --release --example frontier_sweep -- [config.toml] [out_dir]

use deploy_monitor::harness::{run_sweep, ExperimentConfig, SweepOptions};

fn main() -> deploy_monitor::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/rotating_clusters.toml").into());
    let out = args.next().unwrap_or_else(|| "sweep_out".into());

    let cfg = ExperimentConfig::load(&config)?;
    let result = run_sweep(
        &cfg,
        &SweepOptions {
            out_dir: Some(out.clone().into()),
            jobs: 0,
        },
    )?;
    for (policy, table) in &result.summary.auc {
        let cells: Vec<String> = table.iter().map(|(k, v)| format!("{k}={v:.4}")).collect();
        println!("{policy:<12} {}", cells.join("  "));
    }
    println!("frontiers and trajectories written to {out}/");
    Ok(())
}

//! Generates one stream of each synthetic kind and writes them as replayable
//! CSV logs.
//!
//! cargo run --example generate_streams -- [out_dir]

use deploy_monitor::stream::{generate, rate_for_total_rotation, write_csv, DriftSpec, HALF_TURN};

fn main() -> deploy_monitor::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "streams".into());
    std::fs::create_dir_all(&out)?;

    let specs = [
        ("random_walk", DriftSpec::random_walk(1e-3, 0.85, 10_000, 1)),
        (
            "piecewise",
            DriftSpec::piecewise(vec![(0, 0.9), (2_000, 0.9), (4_000, 0.6), (10_000, 0.8)], 2e-4, 10_000, 1),
        ),
        ("adversarial_rr", DriftSpec::adversarial_rr(0.005, 0.9, 2_000, 1)),
        (
            "rotating_clusters",
            DriftSpec::rotating_clusters(4, rate_for_total_rotation(HALF_TURN, 10_000), 10_000, 1),
        ),
    ];
    for (name, spec) in specs {
        let events = generate(&spec)?;
        let mu: Vec<f64> = events.iter().filter_map(|e| e.true_accuracy).collect();
        let (lo, hi) = mu.iter().fold((1.0f64, 0.0f64), |(lo, hi), &m| (lo.min(m), hi.max(m)));
        let path = format!("{out}/{name}.csv");
        write_csv(&path, &events)?;
        println!("{name:<18} {:>6} events  accuracy in [{lo:.3}, {hi:.3}]  -> {path}", events.len());
    }
    Ok(())
}

//! How the four detectors react when both the confidences and the features
//! of a stream jump halfway through. KS and mean-shift signals are on a
//! p-value scale; the embedding signal is a standardized distance.

use deploy_monitor::detector::{DetectorKind, DEFAULT_WINDOW};
use deploy_monitor::harness::detector_signals;
use deploy_monitor::stream::{generate, DriftSpec};

fn main() -> deploy_monitor::Result<()> {
    let horizon = 4_000;
    let mut events = generate(&DriftSpec::rotating_clusters(4, 0.0, horizon, 3))?;
    for e in &mut events[horizon / 2..] {
        e.confidence = (e.confidence * 0.7).max(0.5);
        if let Some(f) = e.features.as_mut() {
            f[0] += 3.0;
        }
    }

    let warm = 2 * DEFAULT_WINDOW;
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let peak = |x: &[f64]| x.iter().copied().fold(0.0, f64::max);
    println!("{:<10} {:>12} {:>12} {:>12}", "detector", "mean before", "peak before", "peak at jump");
    for kind in [DetectorKind::Ks, DetectorKind::MeanShift, DetectorKind::Embedding, DetectorKind::Constant] {
        let g = detector_signals(&events, kind, DEFAULT_WINDOW)?;
        let before = &g[warm..horizon / 2];
        let jump = &g[horizon / 2..horizon / 2 + warm];
        println!(
            "{:<10} {:>12.4} {:>12.4} {:>12.4}",
            format!("{kind:?}"),
            mean(before),
            peak(before),
            peak(jump)
        );
    }
    Ok(())
}

//! Request-and-reverify relies on the detector alone. When features freeze
//! just before the accuracy drops, no threshold saves it; MLDemon's safety
//! queries still catch the drop.

use deploy_monitor::detector::{DetectorKind, DEFAULT_WINDOW};
use deploy_monitor::harness::{score, simulate, PreparedStream};
use deploy_monitor::policy::{MlDemon, MlDemonConfig, MonitorMode, RequestReverify};
use deploy_monitor::stream::{generate, DriftSpec};

fn main() -> deploy_monitor::Result<()> {
    let (delta, mu0, rho, c) = (0.005, 0.9, 0.7, 0.25);
    let streams = (0..10)
        .map(|seed| {
            let events = generate(&DriftSpec::adversarial_rr(delta, mu0, 4_000, seed))?;
            PreparedStream::new(events, DetectorKind::Ks, DEFAULT_WINDOW, 100)
        })
        .collect::<deploy_monitor::Result<Vec<_>>>()?;
    let mean_loss = |make: &dyn Fn() -> Box<dyn deploy_monitor::policy::Policy>| -> deploy_monitor::Result<f64> {
        let mut total = 0.0;
        for s in &streams {
            let mut p = make();
            total += score(&simulate(s, p.as_mut()), rho, c, s.truth_source)?.l_hinge;
        }
        Ok(total / streams.len() as f64)
    };

    for threshold in [0.0, 0.1, 0.5, 0.9, 1.0] {
        let l = mean_loss(&|| Box::new(RequestReverify::new(15, threshold, mu0).unwrap()))?;
        println!("rr threshold {threshold:<4} L_hinge {l:.4}");
    }
    let cfg = MlDemonConfig::from_tolerance(0.1, delta, 0.15, rho, MonitorMode::Decision, 1.0, true, mu0)?.with_window(15);
    let l = mean_loss(&|| Box::new(MlDemon::new(cfg.clone()).unwrap()))?;
    println!("mldemon_dec         L_hinge {l:.4}");
    Ok(())
}

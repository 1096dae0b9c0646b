//! Periodic querying and MLDemon built from the same risk tolerance on a
//! random-walk stream, plus the analytic certificate for that tolerance.

use deploy_monitor::bounds::{certify_risk, CertifyInput};
use deploy_monitor::detector::{DetectorKind, DEFAULT_WINDOW};
use deploy_monitor::harness::{score, simulate, PreparedStream};
use deploy_monitor::policy::{tolerance_constants, MlDemon, MlDemonConfig, MonitorMode, PeriodicQuerying};
use deploy_monitor::stream::{generate, DriftSpec};

fn main() -> deploy_monitor::Result<()> {
    let (eps, delta, mu0, rho) = (0.1, 1e-5, 0.8, 0.7);
    let c = tolerance_constants(eps, delta)?;
    println!("epsilon {eps}, drift {delta}: n = {}, alpha = {:.3}", c.n, c.alpha);
    let cert = certify_risk(CertifyInput::periodic(eps, delta, c.n, c.alpha));
    println!("certificate: pass {} (bias slack {:.4})", cert.pass, cert.bias_slack);

    let events = generate(&DriftSpec::random_walk(delta, mu0, 100_000, 7))?;
    let stream = PreparedStream::new(events, DetectorKind::Ks, DEFAULT_WINDOW, 100)?;

    let mut pq = PeriodicQuerying::from_tolerance(eps, delta, mu0)?;
    let est = MlDemonConfig::from_tolerance(eps, delta, 0.15, rho, MonitorMode::Estimation, 1.0, true, mu0)?;
    let dec = MlDemonConfig { mode: MonitorMode::Decision, ..est.clone() };

    let runs: Vec<(&str, Vec<_>)> = vec![
        ("pq", simulate(&stream, &mut pq)),
        ("mldemon_est", simulate(&stream, &mut MlDemon::new(est)?)),
        ("mldemon_dec", simulate(&stream, &mut MlDemon::new(dec)?)),
    ];
    println!("{:<12} {:>8} {:>8} {:>8}", "policy", "Q", "R_mae", "R_hinge");
    for (name, records) in runs {
        let r = score(&records, rho, 0.0, stream.truth_source)?;
        println!("{name:<12} {:>8.4} {:>8.4} {:>8.4}", r.q, r.r_mae, r.r_hinge);
    }
    Ok(())
}

//! Risk certificates across tolerances and drift bounds.

use deploy_monitor::bounds::{certify_risk, CertifyInput};
use deploy_monitor::policy::{max_certified_delta, tolerance_constants};

fn main() -> deploy_monitor::Result<()> {
    println!("{:>6} {:>10} {:>6} {:>10} {:>9} {:>6}", "eps", "delta", "n", "alpha", "slack", "pass");
    for eps in [0.05, 0.1, 0.2] {
        let boundary = max_certified_delta(eps);
        for delta in [boundary / 100.0, boundary, boundary * 100.0] {
            let c = tolerance_constants(eps, delta)?;
            let r = certify_risk(CertifyInput::periodic(eps, delta, c.n, c.alpha));
            println!(
                "{eps:>6} {delta:>10.3e} {:>6} {:>10.3} {:>9.4} {:>6}",
                c.n, c.alpha, r.bias_slack, r.pass
            );
        }
    }
    // a buffer far longer than the tolerance allows
    let c = tolerance_constants(0.1, 1e-6)?;
    let r = certify_risk(CertifyInput::periodic(0.1, 1e-6, c.n, 100.0 * c.alpha));
    println!("alpha x100 at eps 0.1: pass {} (psi_max {:.4})", r.pass, r.psi_max);
    Ok(())
}

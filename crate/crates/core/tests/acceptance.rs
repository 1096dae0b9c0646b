//! End-to-end acceptance checks. Runs as a plain binary and prints one
//! PASS/FAIL line per criterion; exits non-zero when any criterion fails.

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use deploy_monitor::bounds::{hoeffding_biased_tail, psi, LabelSample};
use deploy_monitor::detector::{modulation_factor, quantile_normalize, DetectorKind, QuantileMap, DEFAULT_WINDOW};
use deploy_monitor::harness::{
    run_sweep, score, simulate, ExperimentConfig, PolicyKind, PolicySpec, PreparedStream, SweepOptions,
    DEFAULT_TRUTH_WINDOW,
};
use deploy_monitor::policy::{MlDemon, MlDemonConfig, MonitorMode, PeriodicQuerying, Policy, RequestReverify};
use deploy_monitor::risk::{r_bin, r_hinge, r_mae, RiskReport};
use deploy_monitor::stream::{
    generate, rate_for_total_rotation, rotating_accuracy_lipschitz_bound, DriftKind, DriftSpec, HALF_TURN,
    LIPSCHITZ_SLACK,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn prepare(spec: &DriftSpec, detector: DetectorKind) -> PreparedStream {
    let events = generate(spec).expect("stream generation");
    PreparedStream::new(events, detector, DEFAULT_WINDOW, DEFAULT_TRUTH_WINDOW).expect("detector")
}

fn run(stream: &PreparedStream, policy: &mut dyn Policy, rho: f64, c: f64) -> RiskReport {
    score(&simulate(stream, policy), rho, c, stream.truth_source).expect("scoring")
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

const EPS: f64 = 0.1;
const MU0: f64 = 0.8;

fn risk_tolerance_guarantee() -> Outcome {
    let delta = 1e-6;
    let reports: Vec<(RiskReport, RiskReport)> = (0..20u64)
        .into_par_iter()
        .map(|seed| {
            let s = prepare(&DriftSpec::random_walk(delta, MU0, 200_000, seed), DetectorKind::Ks);
            let mut pq = PeriodicQuerying::from_tolerance(EPS, delta, MU0).unwrap();
            let cfg =
                MlDemonConfig::from_tolerance(EPS, delta, 0.15, MU0 - 0.1, MonitorMode::Estimation, 1.0, true, MU0)
                    .unwrap();
            let mut md = MlDemon::new(cfg).unwrap();
            (run(&s, &mut pq, 0.5, 0.0), run(&s, &mut md, 0.5, 0.0))
        })
        .collect();
    let pq = mean(reports.iter().map(|r| r.0.r_mae));
    let md = mean(reports.iter().map(|r| r.1.r_mae));
    outcome(
        pq <= EPS && md <= EPS,
        format!("mean R_mae: PQ {pq:.4}, MLDemon-est {md:.4} (limit {EPS})"),
    )
}

fn query_rate_scaling() -> Outcome {
    let q_at = |delta: f64| {
        mean((0..5u64).map(|seed| {
            let s = prepare(&DriftSpec::random_walk(delta, MU0, 200_000, seed), DetectorKind::Constant);
            let mut pq = PeriodicQuerying::from_tolerance(EPS, delta, MU0).unwrap();
            run(&s, &mut pq, 0.5, 0.0).q
        }))
    };
    let (q1, q2) = (q_at(1e-6), q_at(5e-7));
    let ratio = q2 / q1;
    outcome(
        (ratio - 0.5).abs() <= 0.05,
        format!("Q(1e-6) {q1:.5}, Q(5e-7) {q2:.5}, ratio {ratio:.4} (target 0.5 ± 10%)"),
    )
}

fn decision_mode_savings() -> Outcome {
    let rho = 0.5;
    let rates = |delta: f64| {
        let pairs: Vec<(f64, f64)> = (0..20u64)
            .into_par_iter()
            .map(|seed| {
                let s = prepare(&DriftSpec::random_walk(delta, MU0, 200_000, seed), DetectorKind::Ks);
                let cfg =
                    MlDemonConfig::from_tolerance(EPS, delta, 0.15, rho, MonitorMode::Decision, 1.0, true, MU0).unwrap();
                let mut md = MlDemon::new(cfg).unwrap();
                let mut pq = PeriodicQuerying::from_tolerance(EPS, delta, MU0).unwrap();
                (run(&s, &mut md, rho, 0.0).q, run(&s, &mut pq, rho, 0.0).q)
            })
            .collect();
        (mean(pairs.iter().map(|p| p.0)), mean(pairs.iter().map(|p| p.1)))
    };
    let (m5, p5) = rates(1e-5);
    let (m6, p6) = rates(1e-6);
    let (r5, r6) = (m5 / p5, m6 / p6);
    let cheaper = m5 < p5 && m6 < p6;
    let shrinking = r6 < r5;
    outcome(
        cheaper && shrinking,
        format!(
            "Δ=1e-5: Q_M {m5:.5} vs Q_PQ {p5:.5} (ratio {r5:.4}); Δ=1e-6: Q_M {m6:.5} vs Q_PQ {p6:.5} (ratio {r6:.4}); \
             fewer queries: {cheaper}, ratio decreasing: {shrinking}"
        ),
    )
}

fn rr_catastrophic_failure() -> Outcome {
    let (delta, mu0, rho, c) = (0.005, 0.9, 0.7, 0.25);
    let streams: Vec<PreparedStream> = (0..20u64)
        .into_par_iter()
        .map(|seed| prepare(&DriftSpec::adversarial_rr(delta, mu0, 4_000, seed), DetectorKind::Ks))
        .collect();
    let rr_best = (0..20)
        .map(|i| {
            let threshold = i as f64 / 19.0;
            mean(streams.iter().map(|s| {
                let mut rr = RequestReverify::new(15, threshold, mu0).unwrap();
                run(s, &mut rr, rho, c).l_hinge
            }))
        })
        .fold(f64::INFINITY, f64::min);
    let md = mean(streams.iter().map(|s| {
        let cfg = MlDemonConfig::from_tolerance(EPS, delta, 0.15, rho, MonitorMode::Decision, 1.0, true, mu0)
            .unwrap()
            .with_window(15);
        let mut md = MlDemon::new(cfg).unwrap();
        run(s, &mut md, rho, c).l_hinge
    }));
    let floor = c.min((1.0 - rho) / 2.0) - 0.05;
    outcome(
        rr_best >= floor - 1e-12 && md < floor,
        format!("min over thresholds of RR L_hinge {rr_best:.4} (needs >= {floor:.2}); MLDemon-dec L_hinge {md:.4}"),
    )
}

fn biased_hoeffding_soundness() -> Outcome {
    const TRIALS: usize = 100_000;
    let p = 0.5;
    let target_psi = 0.02;
    let cells: Vec<(usize, f64, &str)> = [30usize, 100, 300]
        .iter()
        .flat_map(|&n| {
            [0.05, 0.1]
                .iter()
                .flat_map(move |&d| ["constant", "ramp"].into_iter().map(move |profile| (n, d, profile)))
        })
        .collect();
    let results: Vec<(String, bool)> = cells
        .par_iter()
        .enumerate()
        .map(|(idx, &(n, dev, profile))| {
            // bias of label i; the ramp is the drift profile of labels
            // taken at 0..n with the estimate used at n − 1
            let biases: Vec<f64> = match profile {
                "constant" => vec![target_psi; n],
                _ => {
                    let lip = 2.0 * target_psi / (n - 1) as f64;
                    (0..n).map(|i| lip * (n - 1 - i) as f64).collect()
                }
            };
            let psi_value = if profile == "constant" {
                target_psi
            } else {
                let sample = LabelSample::new((0..n).collect(), vec![true; n], n - 1).unwrap();
                psi(&sample, 2.0 * target_psi / (n - 1) as f64).unwrap()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + idx as u64);
            let mut hits = 0usize;
            for _ in 0..TRIALS {
                let sum: usize = biases.iter().map(|b| usize::from(rng.gen::<f64>() < p + b)).sum();
                if (sum as f64 / n as f64 - p).abs() >= dev + psi_value {
                    hits += 1;
                }
            }
            let freq = hits as f64 / TRIALS as f64;
            let bound = hoeffding_biased_tail(n, dev);
            let se = (bound * (1.0 - bound) / TRIALS as f64).sqrt();
            let ok = freq <= bound + 3.0 * se;
            (format!("n={n} δ={dev} {profile}: {freq:.5} <= {bound:.5}"), ok)
        })
        .collect();
    let failures: Vec<&String> = results.iter().filter(|r| !r.1).map(|r| &r.0).collect();
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{} cells, {TRIALS} trials each, no exceedance", results.len())
        } else {
            format!("exceedances: {failures:?}")
        },
    )
}

fn risk_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut violations = 0usize;
    for _ in 0..100_000 {
        let (mu, mu_hat, rho): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
        let h = r_hinge(mu, mu_hat, rho);
        if h != (rho - mu).abs() * r_bin(mu, mu_hat, rho) || h > r_mae(mu, mu_hat).unwrap() {
            violations += 1;
        }
    }
    outcome(violations == 0, format!("{violations} violations in 100000 triples"))
}

fn lipschitz_invariant() -> Outcome {
    let rotating_rate = rate_for_total_rotation(HALF_TURN, 1_000);
    let specs = |seed: u64| {
        let mut rot = DriftSpec::rotating_clusters(4, rotating_rate, 1_000, seed);
        rot.delta = rotating_accuracy_lipschitz_bound(rotating_rate, 2.0, 1.0);
        vec![
            DriftSpec::random_walk(1e-3, MU0, 5_000, seed),
            DriftSpec::piecewise(vec![(0, 0.9), (1_000, 0.6), (1_500, 0.6), (2_500, 0.85)], 5e-4, 3_000, seed),
            DriftSpec::adversarial_rr(0.005, 0.9, 1_000, seed),
            rot,
        ]
    };
    let (violations, steps) = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let mut v = 0usize;
            let mut n = 0usize;
            for spec in specs(seed) {
                let events = generate(&spec).unwrap();
                let mu: Vec<f64> = events.iter().map(|e| e.true_accuracy.unwrap()).collect();
                v += mu.windows(2).filter(|w| (w[1] - w[0]).abs() > spec.delta + LIPSCHITZ_SLACK).count();
                n += mu.len().saturating_sub(1);
                assert!(!matches!(spec.kind, DriftKind::Replay { .. }));
            }
            (v, n)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    outcome(
        violations == 0,
        format!("{violations} violations over {steps} steps (4 generators × 100 seeds)"),
    )
}

fn files_in(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

fn determinism() -> Outcome {
    let cfg = ExperimentConfig::new(
        DriftSpec::random_walk(1e-4, MU0, 3_000, 0),
        vec![
            PolicySpec::new(PolicyKind::Pq, vec![0.02, 0.1]),
            PolicySpec::new(PolicyKind::Rr, vec![0.9, 0.99]),
            PolicySpec::new(PolicyKind::MldemonEst, vec![0.3, 0.5]),
            PolicySpec::new(PolicyKind::MldemonDec, vec![0.3, 0.5]),
        ],
        vec![1, 2, 3],
    );
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, jobs) in [(a.path(), 1), (b.path(), 4)] {
        run_sweep(
            &cfg,
            &SweepOptions {
                out_dir: Some(dir.to_path_buf()),
                jobs,
            },
        )
        .unwrap();
    }
    let (fa, fb) = (files_in(a.path()), files_in(b.path()));
    let same = !fa.is_empty() && fa == fb;
    outcome(
        same,
        format!("{} files compared, byte-identical: {same} (1 vs 4 workers)", fa.len()),
    )
}

fn quantile_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut non_monotone = 0usize;
    for _ in 0..1_000 {
        let len = rng.gen_range(1..200);
        let history: Vec<f64> = (0..len).map(|_| (rng.gen::<f64>() * 20.0).round() / 10.0).collect();
        let mut probes: Vec<f64> = (0..50).map(|_| rng.gen::<f64>() * 2.2 - 0.1).collect();
        probes.extend(history.iter().take(10));
        probes.sort_by(f64::total_cmp);
        let qs: Vec<f64> = probes.iter().map(|&g| quantile_normalize(&history, g)).collect();
        if qs.windows(2).any(|w| w[1] < w[0]) {
            non_monotone += 1;
        }
    }
    let map = QuantileMap::default();
    let ends = [
        modulation_factor(&map, 0.0).unwrap(),
        modulation_factor(&map, 0.5).unwrap(),
        modulation_factor(&map, 1.0).unwrap(),
    ];
    let exact = ends == [map.phi_max, 1.0, map.phi_min];
    outcome(
        non_monotone == 0 && exact,
        format!("{non_monotone} non-monotone histories of 1000; factor(0, 0.5, 1) = {ends:?}"),
    )
}

fn frontier_direction() -> Outcome {
    let horizon = 20_000;
    let cfg = ExperimentConfig::new(
        DriftSpec::rotating_clusters(4, rate_for_total_rotation(HALF_TURN, horizon), horizon, 0),
        vec![
            PolicySpec::new(PolicyKind::Pq, vec![0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5]),
            PolicySpec::new(PolicyKind::Rr, vec![0.5, 0.8, 0.9, 0.95, 0.99, 0.995, 0.999, 0.9999]),
            PolicySpec::new(PolicyKind::MldemonEst, vec![0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]),
        ],
        (0..5).collect(),
    );
    let r = run_sweep(&cfg, &SweepOptions::default()).unwrap();
    let auc = |k| r.auc(k, "mae").unwrap();
    let (md, rr, pq) = (auc(PolicyKind::MldemonEst), auc(PolicyKind::Rr), auc(PolicyKind::Pq));
    let best = md.min(rr).min(pq);
    outcome(
        md <= rr && md <= 1.2 * best,
        format!("normalized MAE-AUC: MLDemon {md:.4}, RR {rr:.4}, PQ {pq:.4}"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("risk-tolerance guarantee", risk_tolerance_guarantee),
        ("query-rate scaling", query_rate_scaling),
        ("decision-mode savings", decision_mode_savings),
        ("RR catastrophic failure", rr_catastrophic_failure),
        ("biased Hoeffding soundness", biased_hoeffding_soundness),
        ("risk algebra", risk_algebra),
        ("Lipschitz invariant", lipschitz_invariant),
        ("determinism", determinism),
        ("quantile/modulation contract", quantile_contract),
        ("directional frontier", frontier_direction),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        failed += usize::from(!o.pass);
        println!(
            "criterion {:>2} {:<30} {} ({:.1}s) {}",
            i + 1,
            name,
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

//! Synthetic and replayed prediction streams.
//!
//! A stream is a sequence of [`StreamEvent`]s, one per deployment step. The
//! synthetic generators also record the ground-truth accuracy `μ_t` that the
//! outcome at step `t` was drawn from, which lets the harness score policies
//! against the real target instead of a moving-average proxy.

use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{substream, MonitorRng, Substream};

/// Absolute slack allowed when checking `|μ_t − μ_{t−1}| ≤ Δ` on floats.
pub const LIPSCHITZ_SLACK: f64 = 1e-12;

/// Standard deviation of the confidence noise around `μ_t` for the
/// accuracy-driven generators.
const CONFIDENCE_NOISE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamEvent {
    pub t: usize,
    /// Whether the model's prediction was correct.
    pub outcome: bool,
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_accuracy: Option<f64>,
}

impl StreamEvent {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::validation(format!(
                "event {}: confidence {} outside [0, 1]",
                self.t, self.confidence
            )));
        }
        if let Some(mu) = self.true_accuracy {
            if !(0.0..=1.0).contains(&mu) {
                return Err(Error::validation(format!(
                    "event {}: true accuracy {} outside [0, 1]",
                    self.t, mu
                )));
            }
        }
        Ok(())
    }
}

/// Which generator produces a stream, with its kind-specific parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftKind {
    /// `μ_t = clamp(μ_{t−1} + Unif(−Δ, Δ), 0, 1)`.
    RandomWalk,
    /// Linear interpolation between `(t, μ)` waypoints.
    Piecewise { waypoints: Vec<(usize, f64)> },
    /// Feature stream that collapses onto a constant point, followed by an
    /// accuracy drop the detector cannot see.
    AdversarialRr {
        /// Steps between the collapse and the start of the accuracy drop.
        /// The default spans both windows of the default detector, so the
        /// anomaly signal is already constant when accuracy starts to move.
        #[serde(default = "default_pad")]
        pad: usize,
        /// `true` realizes the branch where accuracy falls to 1/2; `false`
        /// keeps it at `μ_0`.
        #[serde(default = "default_true")]
        flip: bool,
        #[serde(default = "default_dim")]
        dim: usize,
    },
    /// Gaussian class clusters rotating about the origin, scored by a
    /// nearest-centroid classifier fit on a training prefix.
    RotatingClusters {
        #[serde(default = "default_clusters")]
        clusters: usize,
        /// Angular velocity in radians per step.
        rate: f64,
        #[serde(default = "default_radius")]
        radius: f64,
        #[serde(default = "default_noise")]
        noise: f64,
        #[serde(default = "default_train_fraction")]
        train_fraction: f64,
        /// When false, `true_accuracy` is left empty and scoring falls back
        /// to the moving-average proxy.
        #[serde(default = "default_true")]
        analytic_accuracy: bool,
    },
    /// Prediction log read from CSV.
    Replay { path: PathBuf },
}

fn default_pad() -> usize {
    2 * crate::detector::DEFAULT_WINDOW
}
fn default_true() -> bool {
    true
}
fn default_dim() -> usize {
    2
}
fn default_clusters() -> usize {
    4
}
fn default_radius() -> f64 {
    2.0
}
fn default_noise() -> f64 {
    1.0
}
fn default_train_fraction() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    #[serde(flatten)]
    pub kind: DriftKind,
    /// Lipschitz bound on per-step accuracy change.
    #[serde(default)]
    pub delta: f64,
    pub horizon: usize,
    #[serde(default = "default_mu0")]
    pub mu0: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_mu0() -> f64 {
    0.8
}

impl DriftSpec {
    pub fn random_walk(delta: f64, mu0: f64, horizon: usize, seed: u64) -> Self {
        DriftSpec {
            kind: DriftKind::RandomWalk,
            delta,
            horizon,
            mu0,
            seed,
        }
    }

    pub fn piecewise(waypoints: Vec<(usize, f64)>, delta: f64, horizon: usize, seed: u64) -> Self {
        let mu0 = waypoints.first().map_or(0.0, |w| w.1);
        DriftSpec {
            kind: DriftKind::Piecewise { waypoints },
            delta,
            horizon,
            mu0,
            seed,
        }
    }

    pub fn adversarial_rr(delta: f64, mu0: f64, horizon: usize, seed: u64) -> Self {
        DriftSpec {
            kind: DriftKind::AdversarialRr {
                pad: default_pad(),
                flip: true,
                dim: default_dim(),
            },
            delta,
            horizon,
            mu0,
            seed,
        }
    }

    pub fn rotating_clusters(clusters: usize, rate: f64, horizon: usize, seed: u64) -> Self {
        DriftSpec {
            kind: DriftKind::RotatingClusters {
                clusters,
                rate,
                radius: default_radius(),
                noise: default_noise(),
                train_fraction: default_train_fraction(),
                analytic_accuracy: true,
            },
            delta: 0.0,
            horizon,
            mu0: 0.0,
            seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        DriftSpec {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(Error::config(format!("delta {} outside [0, 1]", self.delta)));
        }
        if !(0.0..=1.0).contains(&self.mu0) {
            return Err(Error::config(format!("mu0 {} outside [0, 1]", self.mu0)));
        }
        if self.horizon == 0 && !matches!(self.kind, DriftKind::Replay { .. }) {
            return Err(Error::config("horizon must be at least 1"));
        }
        Ok(())
    }
}

/// Produces the stream described by `spec`.
pub fn generate(spec: &DriftSpec) -> Result<Vec<StreamEvent>> {
    match &spec.kind {
        DriftKind::RandomWalk => gen_random_walk(spec),
        DriftKind::Piecewise { .. } => gen_piecewise(spec),
        DriftKind::AdversarialRr { .. } => gen_adversarial_rr(spec),
        DriftKind::RotatingClusters { .. } => gen_rotating_clusters(spec),
        DriftKind::Replay { path } => replay_csv(path),
    }
}

/// One clamped random-walk update.
pub fn random_walk_step(prev: f64, increment: f64) -> f64 {
    (prev + increment).clamp(0.0, 1.0)
}

fn noisy_confidence(mu: f64, rng: &mut MonitorRng) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    (mu + CONFIDENCE_NOISE * z).clamp(0.0, 1.0)
}

/// Turns an accuracy trajectory into events with Bernoulli outcomes and
/// noisy confidences centered on the accuracy.
fn events_from_accuracy(accuracy: &[f64], seed: u64) -> Vec<StreamEvent> {
    let mut outcome_rng = substream(seed, Substream::Outcomes);
    let mut conf_rng = substream(seed, Substream::Confidence);
    accuracy
        .iter()
        .enumerate()
        .map(|(t, &mu)| StreamEvent {
            t,
            outcome: outcome_rng.gen::<f64>() < mu,
            confidence: noisy_confidence(mu, &mut conf_rng),
            features: None,
            true_accuracy: Some(mu),
        })
        .collect()
}

pub fn gen_random_walk(spec: &DriftSpec) -> Result<Vec<StreamEvent>> {
    if spec.kind != DriftKind::RandomWalk {
        return Err(Error::config("gen_random_walk needs kind = random_walk"));
    }
    spec.validate()?;
    let mut drift_rng = substream(spec.seed, Substream::Drift);
    let mut accuracy = Vec::with_capacity(spec.horizon);
    let mut mu = spec.mu0;
    accuracy.push(mu);
    if spec.delta > 0.0 {
        let step = Uniform::new_inclusive(-spec.delta, spec.delta);
        for _ in 1..spec.horizon {
            mu = random_walk_step(mu, step.sample(&mut drift_rng));
            accuracy.push(mu);
        }
    } else {
        accuracy.resize(spec.horizon, mu);
    }
    Ok(events_from_accuracy(&accuracy, spec.seed))
}

/// Accuracy at every step of `0..horizon` from sorted waypoints. Values
/// before the first / after the last waypoint are held constant.
pub fn interpolate_waypoints(waypoints: &[(usize, f64)], delta: f64, horizon: usize) -> Result<Vec<f64>> {
    if waypoints.is_empty() {
        return Err(Error::config("piecewise drift needs at least one waypoint"));
    }
    for &(_, mu) in waypoints {
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::config(format!("waypoint accuracy {mu} outside [0, 1]")));
        }
    }
    for pair in waypoints.windows(2) {
        let ((t0, m0), (t1, m1)) = (pair[0], pair[1]);
        if t1 <= t0 {
            return Err(Error::config(format!(
                "waypoints must be strictly increasing in t ({t0} then {t1})"
            )));
        }
        let slope = (m1 - m0).abs() / (t1 - t0) as f64;
        if slope > delta + LIPSCHITZ_SLACK {
            return Err(Error::Lipschitz {
                from_t: t0,
                from_mu: m0,
                to_t: t1,
                to_mu: m1,
                slope,
                delta,
            });
        }
    }
    let mut out = Vec::with_capacity(horizon);
    let mut seg = 0;
    for t in 0..horizon {
        while seg + 1 < waypoints.len() && waypoints[seg + 1].0 <= t {
            seg += 1;
        }
        let (t0, m0) = waypoints[seg];
        let mu = if t <= t0 || seg + 1 == waypoints.len() {
            m0
        } else {
            let (t1, m1) = waypoints[seg + 1];
            m0 + (m1 - m0) * (t - t0) as f64 / (t1 - t0) as f64
        };
        out.push(mu);
    }
    Ok(out)
}

pub fn gen_piecewise(spec: &DriftSpec) -> Result<Vec<StreamEvent>> {
    let DriftKind::Piecewise { waypoints } = &spec.kind else {
        return Err(Error::config("gen_piecewise needs kind = piecewise"));
    };
    spec.validate()?;
    let accuracy = interpolate_waypoints(waypoints, spec.delta, spec.horizon)?;
    Ok(events_from_accuracy(&accuracy, spec.seed))
}

/// Steps needed for a Δ-Lipschitz sequence to travel total variation 1.
pub fn ramp_length(delta: f64) -> usize {
    (1.0 / delta).ceil() as usize
}

/// Accuracy schedule of the adversarial construction: `μ_0` until
/// `pad + ⌈1/Δ⌉`, then linear to the tail value by `pad + ⌈2/Δ⌉`.
pub fn adversarial_accuracy(delta: f64, mu0: f64, pad: usize, flip: bool, horizon: usize) -> Vec<f64> {
    let tail = if flip { 0.5 } else { mu0 };
    let start = pad + ramp_length(delta);
    let end = pad + (2.0 / delta).ceil() as usize;
    (0..horizon)
        .map(|t| {
            if t <= start {
                mu0
            } else if t >= end {
                tail
            } else {
                mu0 + (tail - mu0) * (t - start) as f64 / (end - start) as f64
            }
        })
        .collect()
}

pub fn gen_adversarial_rr(spec: &DriftSpec) -> Result<Vec<StreamEvent>> {
    let DriftKind::AdversarialRr { pad, flip, dim } = spec.kind else {
        return Err(Error::config("gen_adversarial_rr needs kind = adversarial_rr"));
    };
    spec.validate()?;
    if spec.delta <= 0.0 {
        return Err(Error::config("adversarial stream needs delta > 0 (ramp length is 1/delta)"));
    }
    if dim == 0 {
        return Err(Error::config("adversarial stream needs dim >= 1"));
    }
    let ramp = ramp_length(spec.delta);
    let accuracy = adversarial_accuracy(spec.delta, spec.mu0, pad, flip, spec.horizon);
    // The point every draw collapses onto, away from the bulk of N(0, I).
    let anchor = vec![3.0; dim];
    let anchor_confidence = spec.mu0;

    let mut feat_rng = substream(spec.seed, Substream::Features);
    let mut conf_rng = substream(spec.seed, Substream::Confidence);
    let mut outcome_rng = substream(spec.seed, Substream::Outcomes);
    let events = accuracy
        .iter()
        .enumerate()
        .map(|(t, &mu)| {
            // Mixture weight on the point mass grows linearly over the ramp.
            let collapsed = t >= ramp || feat_rng.gen::<f64>() < t as f64 / ramp as f64;
            let (features, confidence) = if collapsed {
                (anchor.clone(), anchor_confidence)
            } else {
                let x: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut feat_rng)).collect();
                (x, noisy_confidence(spec.mu0, &mut conf_rng))
            };
            StreamEvent {
                t,
                outcome: outcome_rng.gen::<f64>() < mu,
                confidence,
                features: Some(features),
                true_accuracy: Some(mu),
            }
        })
        .collect();
    Ok(events)
}

/// Upper bound on the per-step change of the rotating-cluster accuracy.
///
/// Each class-conditional law is an isotropic Gaussian whose mean moves by
/// at most `rate·radius` per step, and the total variation between two such
/// Gaussians is at most `shift / (σ√(2π))`.
pub fn rotating_accuracy_lipschitz_bound(rate: f64, radius: f64, noise: f64) -> f64 {
    rate.abs() * radius / (noise * (TAU).sqrt())
}

fn cluster_center(k: usize, clusters: usize, radius: f64, angle: f64) -> [f64; 2] {
    let theta = TAU * k as f64 / clusters as f64 + angle;
    [radius * theta.cos(), radius * theta.sin()]
}

/// Frozen nearest-centroid classifier.
#[derive(Debug, Clone)]
struct NearestCentroid {
    centroids: Vec<[f64; 2]>,
}

impl NearestCentroid {
    fn fit(points: &[([f64; 2], usize)], classes: usize) -> Result<Self> {
        let mut sums = vec![[0.0; 2]; classes];
        let mut counts = vec![0usize; classes];
        for (x, y) in points {
            sums[*y][0] += x[0];
            sums[*y][1] += x[1];
            counts[*y] += 1;
        }
        let mut centroids = Vec::with_capacity(classes);
        for (k, (s, n)) in sums.iter().zip(&counts).enumerate() {
            if *n == 0 {
                return Err(Error::config(format!(
                    "training prefix has no samples of cluster {k}; increase horizon or train_fraction"
                )));
            }
            centroids.push([s[0] / *n as f64, s[1] / *n as f64]);
        }
        Ok(NearestCentroid { centroids })
    }

    /// Predicted class and the gap between the two smallest distances.
    fn predict(&self, x: &[f64; 2]) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        let mut second = f64::INFINITY;
        for (k, c) in self.centroids.iter().enumerate() {
            let d = ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)).sqrt();
            if d < best.1 {
                second = best.1;
                best = (k, d);
            } else if d < second {
                second = d;
            }
        }
        (best.0, second - best.1)
    }

    /// Half-planes `a·x ≤ b` whose intersection is the Voronoi cell of `k`.
    fn cell(&self, k: usize) -> Vec<([f64; 2], f64)> {
        let ck = self.centroids[k];
        self.centroids
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != k)
            .map(|(_, cj)| {
                let a = [2.0 * (cj[0] - ck[0]), 2.0 * (cj[1] - ck[1])];
                let b = cj[0] * cj[0] + cj[1] * cj[1] - ck[0] * ck[0] - ck[1] * ck[1];
                (a, b)
            })
            .collect()
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

/// Probability that `N(mean, σ²I)` lands in the convex polygon given by
/// half-planes. Integrates over the first coordinate with composite Simpson;
/// the second coordinate is handled exactly through the normal CDF.
///
/// The integrand has kinks wherever the binding half-plane changes, which
/// happens at x-coordinates where two boundary lines cross. The range is
/// split there so that Simpson only sees smooth pieces.
fn gaussian_mass_in_cell(mean: [f64; 2], sigma: f64, cell: &[([f64; 2], f64)]) -> f64 {
    const NODES_PER_PIECE: usize = 64; // even
    let lo = mean[0] - 8.0 * sigma;
    let hi = mean[0] + 8.0 * sigma;
    let inv_sqrt_tau = 1.0 / (TAU).sqrt();
    let integrand = |x: f64| {
        let mut y_lo = f64::NEG_INFINITY;
        let mut y_hi = f64::INFINITY;
        for (a, b) in cell {
            let rhs = b - a[0] * x;
            if a[1] > 0.0 {
                y_hi = y_hi.min(rhs / a[1]);
            } else if a[1] < 0.0 {
                y_lo = y_lo.max(rhs / a[1]);
            } else if rhs < 0.0 {
                return 0.0;
            }
        }
        if y_hi <= y_lo {
            return 0.0;
        }
        let zx = (x - mean[0]) / sigma;
        let px = (-0.5 * zx * zx).exp() * inv_sqrt_tau / sigma;
        let py = std_normal_cdf((y_hi - mean[1]) / sigma) - std_normal_cdf((y_lo - mean[1]) / sigma);
        px * py
    };

    let mut breaks = vec![lo, hi];
    for (i, (a, b)) in cell.iter().enumerate() {
        if a[1] == 0.0 && a[0] != 0.0 {
            breaks.push(b / a[0]);
        }
        for (c, d) in &cell[i + 1..] {
            let det = a[0] * c[1] - a[1] * c[0];
            if det != 0.0 {
                breaks.push((b * c[1] - a[1] * d) / det);
            }
        }
    }
    breaks.retain(|x| x.is_finite() && *x >= lo && *x <= hi);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let h = (b - a) / NODES_PER_PIECE as f64;
        if h <= 0.0 {
            continue;
        }
        let mut sum = integrand(a) + integrand(b);
        for i in 1..NODES_PER_PIECE {
            let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += weight * integrand(a + i as f64 * h);
        }
        total += sum * h / 3.0;
    }
    total.clamp(0.0, 1.0)
}

pub fn gen_rotating_clusters(spec: &DriftSpec) -> Result<Vec<StreamEvent>> {
    let DriftKind::RotatingClusters {
        clusters,
        rate,
        radius,
        noise,
        train_fraction,
        analytic_accuracy,
    } = spec.kind
    else {
        return Err(Error::config("gen_rotating_clusters needs kind = rotating_clusters"));
    };
    if clusters < 2 {
        return Err(Error::config("rotating clusters need at least 2 clusters"));
    }
    if rate < 0.0 || !rate.is_finite() {
        return Err(Error::config(format!("rotation rate {rate} must be finite and >= 0")));
    }
    if radius <= 0.0 || !radius.is_finite() {
        return Err(Error::config("cluster radius must be > 0 (otherwise all centers coincide)"));
    }
    if noise <= 0.0 || !noise.is_finite() {
        return Err(Error::config("cluster noise must be > 0"));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::config("train_fraction must lie in (0, 1)"));
    }
    if spec.horizon == 0 {
        return Err(Error::config("horizon must be at least 1"));
    }

    let mut feat_rng = substream(spec.seed, Substream::Features);
    let gauss = Normal::new(0.0, noise).expect("noise checked positive");
    let class_dist = Uniform::new(0, clusters);
    let draw = |t: i64, rng: &mut MonitorRng| {
        let k = class_dist.sample(rng);
        let c = cluster_center(k, clusters, radius, rate * t as f64);
        ([c[0] + gauss.sample(rng), c[1] + gauss.sample(rng)], k)
    };

    // Training prefix precedes deployment step 0 in time.
    let n_train = ((train_fraction * spec.horizon as f64).ceil() as usize).max(clusters);
    let train: Vec<_> = (0..n_train)
        .map(|i| draw(i as i64 - n_train as i64, &mut feat_rng))
        .collect();
    let model = NearestCentroid::fit(&train, clusters)?;
    let cells: Vec<_> = (0..clusters).map(|k| model.cell(k)).collect();

    let mut events = Vec::with_capacity(spec.horizon);
    for t in 0..spec.horizon {
        let (x, y) = draw(t as i64, &mut feat_rng);
        let (pred, gap) = model.predict(&x);
        let true_accuracy = analytic_accuracy.then(|| {
            let angle = rate * t as f64;
            cells
                .iter()
                .enumerate()
                .map(|(k, cell)| gaussian_mass_in_cell(cluster_center(k, clusters, radius, angle), noise, cell))
                .sum::<f64>()
                / clusters as f64
        });
        events.push(StreamEvent {
            t,
            outcome: pred == y,
            confidence: logistic(gap),
            features: Some(x.to_vec()),
            true_accuracy,
        });
    }
    Ok(events)
}

/// Rotation rate that turns the clusters by `total` radians over `horizon` steps.
pub fn rate_for_total_rotation(total: f64, horizon: usize) -> f64 {
    total / horizon.max(1) as f64
}

/// Half a turn, for tests and examples that swap two clusters.
pub const HALF_TURN: f64 = PI;

/// Reads a prediction log with header `t,outcome,confidence[,f0,f1,...]`.
pub fn replay_csv(path: impl AsRef<Path>) -> Result<Vec<StreamEvent>> {
    let path = path.as_ref();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let names: Vec<&str> = headers.iter().collect();
    if names.len() < 3 || names[..3] != ["t", "outcome", "confidence"] {
        return Err(parse_err(1, format!("header must start with t,outcome,confidence; got {names:?}")));
    }
    for (i, name) in names[3..].iter().enumerate() {
        if *name != format!("f{i}") {
            return Err(parse_err(1, format!("feature column {i} must be named f{i}, got {name}")));
        }
    }
    let n_features = names.len() - 3;

    let mut events = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != names.len() {
            return Err(parse_err(line, format!("expected {} fields, found {}", names.len(), record.len())));
        }
        let t: usize = record[0]
            .parse()
            .map_err(|e| parse_err(line, format!("bad t {:?}: {e}", &record[0])))?;
        let outcome = match &record[1] {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::validation(format!(
                    "{}:{line}: outcome must be 0 or 1, got {other:?}",
                    path.display()
                )))
            }
        };
        let confidence: f64 = record[2]
            .parse()
            .map_err(|e| parse_err(line, format!("bad confidence {:?}: {e}", &record[2])))?;
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::validation(format!(
                "{}:{line}: confidence {confidence} outside [0, 1]",
                path.display()
            )));
        }
        let features = if n_features > 0 {
            let mut f = Vec::with_capacity(n_features);
            for field in record.iter().skip(3) {
                let v: f64 = field
                    .parse()
                    .map_err(|e| parse_err(line, format!("bad feature {field:?}: {e}")))?;
                f.push(v);
            }
            Some(f)
        } else {
            None
        };
        events.push(StreamEvent {
            t,
            outcome,
            confidence,
            features,
            true_accuracy: None,
        });
    }
    Ok(events)
}

/// Writes events in the replay schema, so generated streams can be replayed.
pub fn write_csv(path: impl AsRef<Path>, events: &[StreamEvent]) -> Result<()> {
    let n_features = events
        .first()
        .and_then(|e| e.features.as_ref())
        .map_or(0, Vec::len);
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string(), "outcome".into(), "confidence".into()];
    header.extend((0..n_features).map(|i| format!("f{i}")));
    writer.write_record(&header)?;
    for e in events {
        let mut row = vec![e.t.to_string(), u8::from(e.outcome).to_string(), e.confidence.to_string()];
        match &e.features {
            Some(f) if f.len() == n_features => row.extend(f.iter().map(f64::to_string)),
            None if n_features == 0 => {}
            _ => {
                return Err(Error::validation(format!(
                    "event {} has a feature count different from the first event",
                    e.t
                )))
            }
        }
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Shuffles events within consecutive blocks of `block_len`.
pub fn block_bootstrap(events: &[StreamEvent], block_len: usize, seed: u64) -> Vec<StreamEvent> {
    let mut out = events.to_vec();
    if block_len <= 1 {
        return out;
    }
    let mut rng = substream(seed, Substream::Bootstrap);
    for block in out.chunks_mut(block_len) {
        block.shuffle(&mut rng);
    }
    out
}

/// Trailing-window accuracy proxy; the first `w − 1` steps average over the
/// prefix seen so far.
pub fn moving_average_truth(outcomes: &[bool], w: usize) -> Vec<f64> {
    let w = w.max(1);
    let mut out = Vec::with_capacity(outcomes.len());
    let mut hits = 0usize;
    for (t, &o) in outcomes.iter().enumerate() {
        hits += usize::from(o);
        if t >= w {
            hits -= usize::from(outcomes[t - w]);
        }
        out.push(hits as f64 / (t + 1).min(w) as f64);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn accuracies(events: &[StreamEvent]) -> Vec<f64> {
        events.iter().map(|e| e.true_accuracy.unwrap()).collect()
    }

    fn max_step(mu: &[f64]) -> f64 {
        mu.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn zero_drift_freezes_accuracy() {
        let ev = gen_random_walk(&DriftSpec::random_walk(0.0, 0.8, 5, 1)).unwrap();
        assert_eq!(accuracies(&ev), vec![0.8; 5]);
    }

    #[test]
    fn walk_step_is_the_direct_recurrence() {
        assert!((random_walk_step(1.0, -0.7) - 0.3).abs() < 1e-15);
        assert_eq!(random_walk_step(0.95, 0.2), 1.0);
        assert_eq!(random_walk_step(0.05, -0.2), 0.0);
    }

    #[test]
    fn walk_respects_delta_over_long_horizon() {
        let ev = gen_random_walk(&DriftSpec::random_walk(0.01, 0.5, 100_000, 3)).unwrap();
        assert_eq!(ev.len(), 100_000);
        assert!(max_step(&accuracies(&ev)) <= 0.01 + LIPSCHITZ_SLACK);
    }

    #[test]
    fn walk_rejects_bad_spec() {
        assert!(matches!(
            gen_random_walk(&DriftSpec::random_walk(1.5, 0.5, 10, 0)),
            Err(Error::Config(_))
        ));
        assert!(gen_random_walk(&DriftSpec::random_walk(0.1, -0.1, 10, 0)).is_err());
        assert!(gen_random_walk(&DriftSpec::random_walk(0.1, 0.5, 0, 0)).is_err());
    }

    #[test]
    fn piecewise_examples() {
        let flat = gen_piecewise(&DriftSpec::piecewise(vec![(0, 0.9), (100, 0.9)], 0.0, 101, 0)).unwrap();
        assert!(accuracies(&flat).iter().all(|&m| m == 0.9));

        let mu = interpolate_waypoints(&[(0, 0.9), (100, 0.4)], 0.005, 101).unwrap();
        assert!((mu[50] - 0.65).abs() < 1e-12);

        let err = interpolate_waypoints(&[(0, 0.9), (10, 0.4)], 0.005, 11).unwrap_err();
        assert!(matches!(err, Error::Lipschitz { .. }));
    }

    #[test]
    fn adversarial_ramp_and_tail() {
        assert_eq!(ramp_length(0.01), 100);
        let spec = DriftSpec::adversarial_rr(0.005, 0.9, 2_000, 11);
        let ev = gen_adversarial_rr(&spec).unwrap();
        let mu = accuracies(&ev);
        let min = mu.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((min - 0.5).abs() < 1e-12);
        assert!(max_step(&mu) <= 0.005 + LIPSCHITZ_SLACK);
        let tail = &ev[ramp_length(0.005)..];
        assert!(tail.iter().all(|e| e.features == tail[0].features));
        assert!(tail.iter().all(|e| e.confidence == tail[0].confidence));
    }

    #[test]
    fn adversarial_needs_positive_delta() {
        let spec = DriftSpec::adversarial_rr(0.0, 0.9, 100, 0);
        assert!(matches!(gen_adversarial_rr(&spec), Err(Error::Config(_))));
    }

    #[test]
    fn adversarial_without_flip_keeps_accuracy() {
        let mut spec = DriftSpec::adversarial_rr(0.01, 0.8, 1_000, 0);
        spec.kind = DriftKind::AdversarialRr {
            pad: 75,
            flip: false,
            dim: 3,
        };
        let ev = gen_adversarial_rr(&spec).unwrap();
        assert!(accuracies(&ev).iter().all(|&m| m == 0.8));
        assert_eq!(ev[0].features.as_ref().unwrap().len(), 3);
    }

    #[test]
    fn stationary_clusters_have_constant_accuracy() {
        let ev = gen_rotating_clusters(&DriftSpec::rotating_clusters(4, 0.0, 500, 5)).unwrap();
        let mu = accuracies(&ev);
        assert!(mu.iter().all(|&m| m == mu[0]));
        assert!(mu[0] > 0.25 && mu[0] < 1.0);
    }

    #[test]
    fn two_cluster_half_turn_drops_below_chance() {
        let horizon = 4_000;
        let rate = rate_for_total_rotation(HALF_TURN, horizon);
        let ev = gen_rotating_clusters(&DriftSpec::rotating_clusters(2, rate, horizon, 9)).unwrap();
        let outcomes: Vec<bool> = ev.iter().map(|e| e.outcome).collect();
        let ma = moving_average_truth(&outcomes, 100);
        assert!(ma[horizon - 1] < 0.5, "moving average at end {}", ma[horizon - 1]);
        let mu = accuracies(&ev);
        // near chance at the quarter turn; the fitted boundary is slightly
        // tilted by training noise, which moves the value off 0.5
        assert!((mu[horizon / 2] - 0.5).abs() < 0.1, "quarter turn {}", mu[horizon / 2]);
        assert!(mu[0] > mu[horizon / 2] && mu[horizon / 2] > mu[horizon - 1]);
        assert!(mu[horizon - 1] < 0.5);
    }

    #[test]
    fn rotating_accuracy_steps_are_bounded() {
        let rate = 0.002;
        let ev = gen_rotating_clusters(&DriftSpec::rotating_clusters(4, rate, 3_000, 2)).unwrap();
        let bound = rotating_accuracy_lipschitz_bound(rate, default_radius(), default_noise());
        let measured = max_step(&accuracies(&ev));
        assert!(measured <= bound + 1e-6, "measured {measured} vs bound {bound}");
    }

    #[test]
    fn analytic_accuracy_matches_empirical_rate() {
        let ev = gen_rotating_clusters(&DriftSpec::rotating_clusters(4, 0.0, 40_000, 4)).unwrap();
        let hits = ev.iter().filter(|e| e.outcome).count() as f64 / ev.len() as f64;
        assert!((hits - ev[0].true_accuracy.unwrap()).abs() < 0.01);
    }

    #[test]
    fn rotating_clusters_reject_degenerate_geometry() {
        let mut spec = DriftSpec::rotating_clusters(4, 0.0, 100, 0);
        if let DriftKind::RotatingClusters { radius, .. } = &mut spec.kind {
            *radius = 0.0;
        }
        assert!(matches!(gen_rotating_clusters(&spec), Err(Error::Config(_))));
        assert!(gen_rotating_clusters(&DriftSpec::rotating_clusters(1, 0.0, 100, 0)).is_err());
    }

    #[test]
    fn disabled_analytic_accuracy_leaves_truth_empty() {
        let mut spec = DriftSpec::rotating_clusters(3, 0.001, 200, 0);
        if let DriftKind::RotatingClusters { analytic_accuracy, .. } = &mut spec.kind {
            *analytic_accuracy = false;
        }
        let ev = gen_rotating_clusters(&spec).unwrap();
        assert!(ev.iter().all(|e| e.true_accuracy.is_none()));
        assert!(ev.iter().all(|e| (0.5..=1.0).contains(&e.confidence)));
    }

    #[test]
    fn bootstrap_block_one_is_identity() {
        let ev = gen_random_walk(&DriftSpec::random_walk(0.01, 0.5, 50, 0)).unwrap();
        assert_eq!(block_bootstrap(&ev, 1, 9), ev);
    }

    #[test]
    fn bootstrap_stays_inside_blocks() {
        let ev = gen_random_walk(&DriftSpec::random_walk(0.01, 0.5, 16, 0)).unwrap();
        let shuffled = block_bootstrap(&ev, 8, 4);
        for (pos, e) in shuffled.iter().enumerate() {
            assert_eq!(pos / 8, e.t / 8);
        }
        assert_ne!(shuffled, ev);
    }

    #[test]
    fn moving_average_examples() {
        assert_eq!(moving_average_truth(&[true, true, false, true], 2), vec![1.0, 1.0, 0.5, 0.5]);
        assert!(moving_average_truth(&[true; 20], 4).iter().all(|&v| v == 1.0));
        let alt: Vec<bool> = (0..100).map(|i| i % 2 == 0).collect();
        let ma = moving_average_truth(&alt, 10);
        assert!(ma[10..].iter().all(|&v| v == 0.5));
    }
}

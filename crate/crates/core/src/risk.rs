//! Risk functionals, amortized metrics and trade-off frontiers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_unit(name: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::validation(format!("{name} = {x} outside [0, 1]")))
    }
}

pub fn r_mae(mu: f64, mu_hat: f64) -> Result<f64> {
    check_unit("mu", mu)?;
    check_unit("mu_hat", mu_hat)?;
    Ok((mu - mu_hat).abs())
}

/// 1 when truth and estimate sit strictly on opposite sides of `rho`.
pub fn r_bin(mu: f64, mu_hat: f64, rho: f64) -> f64 {
    let wrong = (mu > rho && mu_hat < rho) || (mu < rho && mu_hat > rho);
    if wrong {
        1.0
    } else {
        0.0
    }
}

/// Wrong-side indicator weighted by the true margin `|rho − mu|`.
pub fn r_hinge(mu: f64, mu_hat: f64, rho: f64) -> f64 {
    (rho - mu).abs() * r_bin(mu, mu_hat, rho)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum RiskKind {
    Mae,
    Hinge,
    Bin,
}

impl RiskKind {
    pub const ALL: [RiskKind; 3] = [RiskKind::Mae, RiskKind::Hinge, RiskKind::Bin];

    pub fn as_str(self) -> &'static str {
        match self {
            RiskKind::Mae => "mae",
            RiskKind::Hinge => "hinge",
            RiskKind::Bin => "bin",
        }
    }
}

/// Where the per-step accuracy used for scoring came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthSource {
    Generator,
    MovingAverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskReport {
    /// Fraction of steps with a query.
    pub q: f64,
    pub r_mae: f64,
    pub r_hinge: f64,
    pub r_bin: f64,
    pub l_mae: f64,
    pub l_hinge: f64,
    pub c: f64,
    pub rho: f64,
    pub horizon: usize,
    pub queries: usize,
    pub truth_source: TruthSource,
}

impl RiskReport {
    pub fn risk(&self, kind: RiskKind) -> f64 {
        match kind {
            RiskKind::Mae => self.r_mae,
            RiskKind::Hinge => self.r_hinge,
            RiskKind::Bin => self.r_bin,
        }
    }
}

/// Averages per-step risks and the query indicator over the horizon and
/// forms the losses `c·Q + R`.
pub fn amortize(
    queries: &[bool],
    estimates: &[f64],
    truth: &[f64],
    rho: f64,
    c: f64,
    truth_source: TruthSource,
) -> Result<RiskReport> {
    if queries.len() != estimates.len() || estimates.len() != truth.len() {
        return Err(Error::validation(format!(
            "misaligned inputs: {} queries, {} estimates, {} truth values",
            queries.len(),
            estimates.len(),
            truth.len()
        )));
    }
    if queries.is_empty() {
        return Err(Error::validation("cannot amortize an empty trajectory"));
    }
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::validation(format!("label cost {c} must be finite and >= 0")));
    }
    let (mut mae, mut hinge, mut bin) = (0.0, 0.0, 0.0);
    for (&mu_hat, &mu) in estimates.iter().zip(truth) {
        mae += r_mae(mu, mu_hat)?;
        hinge += r_hinge(mu, mu_hat, rho);
        bin += r_bin(mu, mu_hat, rho);
    }
    let horizon = queries.len();
    let count = queries.iter().filter(|&&a| a).count();
    let t = horizon as f64;
    let q = count as f64 / t;
    let (r_mae, r_hinge, r_bin) = (mae / t, hinge / t, bin / t);
    Ok(RiskReport {
        q,
        r_mae,
        r_hinge,
        r_bin,
        l_mae: c * q + r_mae,
        l_hinge: c * q + r_hinge,
        c,
        rho,
        horizon,
        queries: count,
        truth_source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierPoint {
    pub hyperparam: f64,
    pub q: f64,
    pub q_stderr: f64,
    pub r_mae: f64,
    pub r_hinge: f64,
    pub r_bin: f64,
    pub stderr_mae: f64,
    pub stderr_hinge: f64,
    pub stderr_bin: f64,
    pub seeds: usize,
    /// Set when a single seed makes the standard errors meaningless.
    pub low_confidence: bool,
}

impl FrontierPoint {
    pub fn risk(&self, kind: RiskKind) -> f64 {
        match kind {
            RiskKind::Mae => self.r_mae,
            RiskKind::Hinge => self.r_hinge,
            RiskKind::Bin => self.r_bin,
        }
    }
}

/// `(Q, R)` pairs of a frontier for one risk type.
pub fn frontier_curve(frontier: &[FrontierPoint], kind: RiskKind) -> Vec<(f64, f64)> {
    frontier.iter().map(|p| (p.q, p.risk(kind))).collect()
}

fn mean_stderr(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count();
    let mean = xs.clone().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// One point per hyperparameter value: across-seed means and standard
/// errors, ordered by `Q` (ties by hyperparameter). Groups without runs are
/// skipped.
pub fn build_frontier(groups: &[(f64, Vec<RiskReport>)]) -> Vec<FrontierPoint> {
    let mut points: Vec<FrontierPoint> = groups
        .iter()
        .filter(|(_, runs)| !runs.is_empty())
        .map(|(h, runs)| {
            let (q, q_stderr) = mean_stderr(runs.iter().map(|r| r.q));
            let (r_mae, stderr_mae) = mean_stderr(runs.iter().map(|r| r.r_mae));
            let (r_hinge, stderr_hinge) = mean_stderr(runs.iter().map(|r| r.r_hinge));
            let (r_bin, stderr_bin) = mean_stderr(runs.iter().map(|r| r.r_bin));
            FrontierPoint {
                hyperparam: *h,
                q,
                q_stderr,
                r_mae,
                r_hinge,
                r_bin,
                stderr_mae,
                stderr_hinge,
                stderr_bin,
                seeds: runs.len(),
                low_confidence: runs.len() < 2,
            }
        })
        .collect();
    points.sort_by(|a, b| a.q.total_cmp(&b.q).then(a.hyperparam.total_cmp(&b.hyperparam)));
    points
}

/// Area under the normalized frontier on `Q ∈ [0, 1]`.
///
/// Both axes are divided by the supplied constants. The curve is held flat
/// from its first point back to `Q = 0` and from its last point out to
/// `Q = 1`; anything beyond `Q = 1` is cut off. Points are sorted by `Q`
/// before integration.
pub fn normalized_auc(frontier: &[(f64, f64)], q_max_norm: f64, r_max_norm: f64) -> Result<f64> {
    if frontier.is_empty() {
        return Err(Error::validation("cannot integrate an empty frontier"));
    }
    if !(q_max_norm > 0.0 && r_max_norm > 0.0) {
        return Err(Error::validation("normalization constants must be > 0"));
    }
    let mut pts: Vec<(f64, f64)> = frontier.iter().map(|&(q, r)| (q / q_max_norm, r / r_max_norm)).collect();
    if pts.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::validation("frontier contains non-finite values"));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));

    let first = pts[0];
    let last = pts[pts.len() - 1];
    let mut curve = Vec::with_capacity(pts.len() + 2);
    curve.push((0.0, first.1));
    curve.extend(pts);
    curve.push((last.0.max(1.0), last.1));

    let mut area = 0.0;
    for w in curve.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        let (a, b) = (x0.clamp(0.0, 1.0), x1.clamp(0.0, 1.0));
        if b <= a {
            continue;
        }
        let at = |x: f64| if x1 == x0 { y0 } else { y0 + (y1 - y0) * (x - x0) / (x1 - x0) };
        area += (b - a) * (at(a) + at(b)) / 2.0;
    }
    Ok(area)
}

/// `min c·Q + R` over the frontier points.
pub fn min_loss_over_frontier(frontier: &[(f64, f64)], c: f64) -> Result<f64> {
    frontier
        .iter()
        .map(|&(q, r)| c * q + r)
        .min_by(f64::total_cmp)
        .ok_or_else(|| Error::validation("cannot minimize over an empty frontier"))
}

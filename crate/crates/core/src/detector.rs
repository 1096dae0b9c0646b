//! Unsupervised anomaly signals over sliding windows, and the quantile
//! normalization that turns them into query-period modulation factors.
//!
//! Every detector compares the most recent `m` observations against the `m`
//! before them and reports a non-negative signal where larger means "the
//! stream looks shifted". The test-based detectors report `1 − p`.

use std::collections::VecDeque;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::stream::StreamEvent;

/// Default sliding-window length.
pub const DEFAULT_WINDOW: usize = 75;

/// Terms kept in either Kolmogorov series.
const KOLMOGOROV_TERMS: usize = 100;

/// Floor applied to per-coordinate pooled variance when a window is constant
/// along a coordinate whose means still differ.
const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    /// Two-sample Kolmogorov-Smirnov on confidences.
    #[default]
    Ks,
    /// Welch two-sample mean test on confidences.
    MeanShift,
    /// Standardized distance between window mean feature vectors.
    Embedding,
    /// Always 0; a detector that carries no information.
    Constant,
}

/// Sliding windows for one stream.
#[derive(Debug, Clone)]
pub struct DetectorState {
    kind: DetectorKind,
    window_len: usize,
    scalars: VecDeque<f64>,
    vectors: VecDeque<Vec<f64>>,
    dim: Option<usize>,
}

impl DetectorState {
    pub fn new(kind: DetectorKind, window_len: usize) -> Result<Self> {
        if window_len == 0 {
            return Err(Error::config("detector window length must be >= 1"));
        }
        Ok(DetectorState {
            kind,
            window_len,
            scalars: VecDeque::with_capacity(2 * window_len + 1),
            vectors: VecDeque::new(),
            dim: None,
        })
    }

    pub fn kind(&self) -> DetectorKind {
        self.kind
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    /// Number of observations currently buffered (at most `2m`).
    pub fn buffered(&self) -> usize {
        self.scalars.len().max(self.vectors.len())
    }

    /// Feeds one event to the configured detector and returns its signal.
    pub fn observe(&mut self, event: &StreamEvent) -> Result<f64> {
        match self.kind {
            DetectorKind::Ks => Ok(self.ks_signal(event.confidence)),
            DetectorKind::MeanShift => Ok(self.mean_shift_signal(event.confidence)),
            DetectorKind::Embedding => {
                let x = event.features.as_deref().ok_or_else(|| {
                    Error::validation(format!("event {} has no features for the embedding detector", event.t))
                })?;
                self.embedding_distance_signal(x)
            }
            DetectorKind::Constant => Ok(0.0),
        }
    }

    fn push_scalar(&mut self, x: f64) -> bool {
        self.scalars.push_back(x);
        if self.scalars.len() > 2 * self.window_len {
            self.scalars.pop_front();
        }
        self.scalars.len() == 2 * self.window_len
    }

    fn scalar_windows(&mut self) -> (&[f64], &[f64]) {
        let m = self.window_len;
        let all = self.scalars.make_contiguous();
        all.split_at(m)
    }

    /// `1 − p` of the two-sample KS test between the previous and the
    /// current window. Zero until `2m` confidences have been seen.
    pub fn ks_signal(&mut self, confidence: f64) -> f64 {
        if !self.push_scalar(confidence) {
            return 0.0;
        }
        let (older, newer) = self.scalar_windows();
        1.0 - ks_p_value(older, newer)
    }

    /// `1 − p` of Welch's two-sample t-test between the two windows.
    pub fn mean_shift_signal(&mut self, confidence: f64) -> f64 {
        if !self.push_scalar(confidence) {
            return 0.0;
        }
        let (older, newer) = self.scalar_windows();
        1.0 - welch_p_value(older, newer)
    }

    /// Distance between the two windows' mean feature vectors, each
    /// coordinate scaled by its pooled within-window standard deviation.
    pub fn embedding_distance_signal(&mut self, features: &[f64]) -> Result<f64> {
        match self.dim {
            Some(d) if d != features.len() => {
                return Err(Error::validation(format!(
                    "feature dimension changed from {d} to {}",
                    features.len()
                )))
            }
            None => self.dim = Some(features.len()),
            _ => {}
        }
        self.vectors.push_back(features.to_vec());
        if self.vectors.len() > 2 * self.window_len {
            self.vectors.pop_front();
        }
        if self.vectors.len() < 2 * self.window_len {
            return Ok(0.0);
        }
        let m = self.window_len;
        let all = self.vectors.make_contiguous();
        let (older, newer) = all.split_at(m);
        Ok(standardized_mean_distance(older, newer))
    }
}

/// Largest gap between the two empirical CDFs.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] == v {
            i += 1;
        }
        while j < b.len() && b[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Survival function of the Kolmogorov distribution, `P(K > λ)`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let p = if lambda < 1.18 {
        // Jacobi-theta form; converges fast for small λ.
        let c = PI * PI / (8.0 * lambda * lambda);
        let cdf: f64 = (1..=KOLMOGOROV_TERMS)
            .map(|j| {
                let k = (2 * j - 1) as f64;
                (-k * k * c).exp()
            })
            // later terms are smaller still; once one underflows the rest add nothing
            .take_while(|&term| term > 0.0)
            .sum::<f64>()
            * (2.0 * PI).sqrt()
            / lambda;
        1.0 - cdf
    } else {
        2.0 * (1..=KOLMOGOROV_TERMS)
            .map(|j| {
                let j = j as f64;
                let sign = if j as usize % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * j * j * lambda * lambda).exp()
            })
            .take_while(|&term| term != 0.0)
            .sum::<f64>()
    };
    p.clamp(0.0, 1.0)
}

/// Asymptotic two-sample KS p-value with effective size `n·m/(n+m)`.
pub fn ks_p_value(a: &[f64], b: &[f64]) -> f64 {
    let d = ks_statistic(a, b);
    if d == 0.0 {
        return 1.0;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let effective = na * nb / (na + nb);
    kolmogorov_survival(effective.sqrt() * d)
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = if x.len() > 1 {
        x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

/// Two-sided Welch t-test p-value. With zero variance in both samples the
/// p-value is 1 for equal means and 0 otherwise.
pub fn welch_p_value(a: &[f64], b: &[f64]) -> f64 {
    if a.len() < 2 || b.len() < 2 {
        return 1.0;
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    if se2 == 0.0 {
        return if ma == mb { 1.0 } else { 0.0 };
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
}

/// `sqrt(Σ_j (ā_j − b̄_j)² / s_j²)` with `s_j²` the average of the two
/// windows' sample variances along coordinate `j`.
pub fn standardized_mean_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let dim = a.first().map_or(0, Vec::len);
    let mut total = 0.0;
    let mut col_a = Vec::with_capacity(a.len());
    let mut col_b = Vec::with_capacity(b.len());
    for j in 0..dim {
        col_a.clear();
        col_b.clear();
        col_a.extend(a.iter().map(|x| x[j]));
        col_b.extend(b.iter().map(|x| x[j]));
        let (ma, va) = mean_var(&col_a);
        let (mb, vb) = mean_var(&col_b);
        let diff = ma - mb;
        if diff == 0.0 {
            continue;
        }
        let pooled = (0.5 * (va + vb)).max(VARIANCE_FLOOR);
        total += diff * diff / pooled;
    }
    total.sqrt()
}

/// Mid-rank empirical CDF of `g` against `history`: the fraction strictly
/// below plus half the fraction tied. Empty history maps to 1/2.
pub fn quantile_normalize(history: &[f64], g: f64) -> f64 {
    if history.is_empty() {
        return 0.5;
    }
    let below = history.iter().filter(|&&h| h < g).count();
    let tied = history.iter().filter(|&&h| h == g).count();
    (below as f64 + 0.5 * tied as f64) / history.len() as f64
}

/// Every past signal, kept sorted in bounded buckets so that insertion and
/// rank queries stay cheap over long streams.
#[derive(Debug, Clone, Default)]
pub struct SignalHistory {
    buckets: Vec<Vec<f64>>,
    len: usize,
}

const BUCKET_CAP: usize = 512;

impl SignalHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn push(&mut self, g: f64) {
        debug_assert!(g.is_finite());
        self.len += 1;
        if self.buckets.is_empty() {
            self.buckets.push(vec![g]);
            return;
        }
        // first bucket whose last element is >= g, else the final bucket
        let idx = self
            .buckets
            .iter()
            .position(|b| *b.last().expect("buckets are never empty") >= g)
            .unwrap_or(self.buckets.len() - 1);
        let bucket = &mut self.buckets[idx];
        let pos = bucket.partition_point(|&v| v < g);
        bucket.insert(pos, g);
        if bucket.len() > BUCKET_CAP {
            let tail = bucket.split_off(BUCKET_CAP / 2);
            self.buckets.insert(idx + 1, tail);
        }
    }

    /// `(strictly below, equal)` counts.
    fn rank(&self, g: f64) -> (usize, usize) {
        let mut below = 0;
        let mut tied = 0;
        for b in &self.buckets {
            let first = b[0];
            let last = *b.last().expect("buckets are never empty");
            if last < g {
                below += b.len();
            } else if first > g {
                break;
            } else {
                let lo = b.partition_point(|&v| v < g);
                let hi = b.partition_point(|&v| v <= g);
                below += lo;
                tied += hi - lo;
            }
        }
        (below, tied)
    }

    /// Same value as [`quantile_normalize`] over the stored signals.
    pub fn quantile(&self, g: f64) -> f64 {
        if self.len == 0 {
            return 0.5;
        }
        let (below, tied) = self.rank(g);
        (below as f64 + 0.5 * tied as f64) / self.len as f64
    }
}

/// Range of the modulation factor applied to the query period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileMap {
    pub phi_min: f64,
    pub phi_max: f64,
}

impl Default for QuantileMap {
    fn default() -> Self {
        QuantileMap {
            phi_min: 0.125,
            phi_max: 4.0,
        }
    }
}

impl QuantileMap {
    pub fn new(phi_min: f64, phi_max: f64) -> Result<Self> {
        let map = QuantileMap { phi_min, phi_max };
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.phi_min > 0.0 && self.phi_min <= 1.0 && self.phi_max >= 1.0 && self.phi_max.is_finite()) {
            return Err(Error::config(format!(
                "need 0 < phi_min <= 1 <= phi_max, got ({}, {})",
                self.phi_min, self.phi_max
            )));
        }
        Ok(())
    }

    /// Continuous, non-increasing, piecewise-linear through
    /// `(0, φ_max)`, `(1/2, 1)`, `(1, φ_min)`.
    pub fn factor(&self, q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::validation(format!("quantile {q} outside [0, 1]")));
        }
        Ok(if q <= 0.5 {
            self.phi_max + (1.0 - self.phi_max) * (2.0 * q)
        } else {
            1.0 + (self.phi_min - 1.0) * (2.0 * q - 1.0)
        })
    }
}

pub fn modulation_factor(map: &QuantileMap, q: f64) -> Result<f64> {
    map.factor(q)
}

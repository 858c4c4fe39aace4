//! Stopping rule, stem-statistics EMA and the symmetric-KL shift score.

use crate::{Error, Result};

/// Variances are floored to this before any KL computation.
pub const VARIANCE_FLOOR: f64 = 1e-8;

/// `||m_curr - m_prev|| / ||m_prev|| < epsilon`. From the origin the change
/// is unbounded, so only `epsilon = inf` stops there.
pub fn should_stop(m_prev: &[f64], m_curr: &[f64], epsilon: f64) -> Result<bool> {
    if m_prev.len() != m_curr.len() {
        return Err(Error::DimensionMismatch {
            what: "stopping means",
            expected: m_prev.len(),
            got: m_curr.len(),
        });
    }
    if epsilon == f64::INFINITY {
        return Ok(true);
    }
    let prev_norm = m_prev.iter().map(|x| x * x).sum::<f64>().sqrt();
    if prev_norm == 0.0 {
        return Ok(false);
    }
    let diff = m_prev
        .iter()
        .zip(m_curr)
        .map(|(a, b)| (b - a) * (b - a))
        .sum::<f64>()
        .sqrt();
    Ok(diff / prev_norm < epsilon)
}

/// Per-feature Gaussian summary of the stem activations.
#[derive(Debug, Clone, PartialEq)]
pub struct StemStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl StemStats {
    pub fn new(mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        if mean.len() != var.len() {
            return Err(Error::DimensionMismatch {
                what: "stem variance",
                expected: mean.len(),
                got: var.len(),
            });
        }
        Ok(StemStats { mean, var })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// `ema <- beta * stats + (1 - beta) * ema` on means and variances; the
/// first call copies `stats`.
pub fn update_ema(ema: Option<&StemStats>, stats: &StemStats, beta: f64) -> Result<StemStats> {
    let Some(ema) = ema else {
        return Ok(stats.clone());
    };
    if ema.dim() != stats.dim() {
        return Err(Error::DimensionMismatch {
            what: "EMA statistics",
            expected: ema.dim(),
            got: stats.dim(),
        });
    }
    let blend = |old: &[f64], new: &[f64]| -> Vec<f64> {
        old.iter()
            .zip(new)
            .map(|(o, n)| beta * n + (1.0 - beta) * o)
            .collect()
    };
    Ok(StemStats {
        mean: blend(&ema.mean, &stats.mean),
        var: blend(&ema.var, &stats.var),
    })
}

/// `KL(N(m1, v1) || N(m2, v2))`.
pub fn gaussian_kl(m1: f64, v1: f64, m2: f64, v2: f64) -> f64 {
    0.5 * (v1 / v2 + (m2 - m1) * (m2 - m1) / v2 - 1.0 + (v2 / v1).ln())
}

/// Mean over features of the symmetric KL divergence between two diagonal
/// Gaussians.
pub fn shift_score(ema: &StemStats, stats: &StemStats) -> Result<f64> {
    if ema.dim() != stats.dim() {
        return Err(Error::DimensionMismatch {
            what: "shift score statistics",
            expected: ema.dim(),
            got: stats.dim(),
        });
    }
    if ema.dim() == 0 {
        return Err(Error::invalid("empty statistics"));
    }
    let mut total = 0.0;
    for i in 0..ema.dim() {
        let (m1, m2) = (ema.mean[i], stats.mean[i]);
        let (v1, v2) = (ema.var[i], stats.var[i]);
        if !(m1.is_finite() && m2.is_finite() && v1.is_finite() && v2.is_finite()) {
            return Err(Error::NonFinite("shift score statistics"));
        }
        if v1 < 0.0 || v2 < 0.0 {
            return Err(Error::invalid("negative variance in shift score"));
        }
        let v1 = v1.max(VARIANCE_FLOOR);
        let v2 = v2.max(VARIANCE_FLOOR);
        total += gaussian_kl(m1, v1, m2, v2) + gaussian_kl(m2, v2, m1, v1);
    }
    Ok(total / ema.dim() as f64)
}

/// EMA reference of stem statistics plus the detection threshold.
///
/// The reference only moves through [`ShiftMonitor::track`] and
/// [`ShiftMonitor::reset`]; scoring never changes it.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftMonitor {
    gamma: f64,
    beta: f64,
    ema: Option<StemStats>,
}

impl ShiftMonitor {
    pub fn new(gamma: f64, beta: f64) -> Result<Self> {
        if gamma.is_nan() || gamma <= 0.0 {
            return Err(Error::invalid(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::invalid(format!(
                "beta must be in (0, 1], got {beta}"
            )));
        }
        Ok(ShiftMonitor {
            gamma,
            beta,
            ema: None,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn ema(&self) -> Option<&StemStats> {
        self.ema.as_ref()
    }

    /// Score against the reference; NaN before the first tracked batch.
    pub fn score(&self, stats: &StemStats) -> Result<f64> {
        match &self.ema {
            Some(ema) => shift_score(ema, stats),
            None => Ok(f64::NAN),
        }
    }

    pub fn exceeds(&self, score: f64) -> bool {
        score > self.gamma
    }

    pub fn track(&mut self, stats: &StemStats) -> Result<()> {
        self.ema = Some(update_ema(self.ema.as_ref(), stats, self.beta)?);
        Ok(())
    }

    pub fn reset(&mut self, stats: StemStats) {
        self.ema = Some(stats);
    }
}

/// Threshold calibration from in-distribution batches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaCalibration {
    /// Percentile of the in-distribution score distribution, in `[0, 100]`.
    pub percentile: f64,
    /// Multiplier applied to the percentile.
    pub margin: f64,
    pub beta: f64,
}

impl Default for GammaCalibration {
    fn default() -> Self {
        GammaCalibration {
            percentile: 99.5,
            margin: 1.5,
            beta: 0.8,
        }
    }
}

/// Linear-interpolated percentile of `values` (not necessarily sorted).
pub fn percentile(values: &[f64], pct: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (pct / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64))
}

/// Scores every batch after the first against the running EMA of the
/// batches before it.
pub fn rolling_scores(batches: &[StemStats], beta: f64) -> Result<Vec<f64>> {
    let mut ema: Option<StemStats> = None;
    let mut scores = Vec::with_capacity(batches.len().saturating_sub(1));
    for stats in batches {
        if let Some(e) = &ema {
            scores.push(shift_score(e, stats)?);
        }
        ema = Some(update_ema(ema.as_ref(), stats, beta)?);
    }
    Ok(scores)
}

/// Returns `margin * percentile(scores)` over held-out in-distribution batches.
pub fn calibrate_gamma(batches: &[StemStats], calibration: &GammaCalibration) -> Result<f64> {
    let scores = rolling_scores(batches, calibration.beta)?;
    let p = percentile(&scores, calibration.percentile)
        .ok_or_else(|| Error::invalid("gamma calibration needs at least two batches"))?;
    Ok(p * calibration.margin)
}

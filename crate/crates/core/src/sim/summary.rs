use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{SimulationOutput, N_TYPES};
use crate::error::{Error, Result};

fn t_quantile(p: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom").inverse_cdf(p)
}

/// Mean and two-sided t half-width at level 1 − alpha. The half-width is
/// `None` with fewer than two values.
pub fn t_interval(values: &[f64], alpha: f64) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, Some(t_quantile(1.0 - alpha / 2.0, n - 1.0) * (var / n).sqrt()))
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandKind {
    #[default]
    Ci,
    Percentile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub pct_lo: f64,
    pub pct_hi: f64,
}

impl SeriesStats {
    fn from_values(values: &mut [f64], alpha: f64) -> Self {
        let (mean, half) = t_interval(values, alpha);
        let half = half.unwrap_or(0.0);
        values.sort_by(f64::total_cmp);
        SeriesStats {
            mean,
            ci_lo: mean - half,
            ci_hi: mean + half,
            pct_lo: quantile_sorted(values, alpha / 2.0),
            pct_hi: quantile_sorted(values, 1.0 - alpha / 2.0),
        }
    }

    pub fn band(&self, kind: BandKind) -> Band {
        match kind {
            BandKind::Ci => Band { mean: self.mean, lo: self.ci_lo, hi: self.ci_hi },
            BandKind::Percentile => Band { mean: self.mean, lo: self.pct_lo, hi: self.pct_hi },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaySummary {
    pub day: u32,
    pub census: SeriesStats,
    /// Indexed by caregiver type.
    pub demand: [SeriesStats; N_TYPES],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub alpha: f64,
    pub replications: usize,
    pub days: Vec<DaySummary>,
}

/// Per-day across-replication mean with t and percentile bands.
pub fn summarize(out: &SimulationOutput, alpha: f64) -> Result<Summary> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let reps = out.replications.len();
    if reps < 2 {
        return Err(Error::Precondition("bands need at least 2 replications".into()));
    }
    let horizon = out.horizon_days as usize;
    let mut days = Vec::with_capacity(horizon);
    let mut buf = vec![0.0; reps];
    for d in 0..horizon {
        for (b, r) in buf.iter_mut().zip(&out.replications) {
            *b = f64::from(r.days[d].census);
        }
        let census = SeriesStats::from_values(&mut buf, alpha);
        let demand = std::array::from_fn(|j| {
            for (b, r) in buf.iter_mut().zip(&out.replications) {
                *b = r.days[d].demand[j];
            }
            SeriesStats::from_values(&mut buf, alpha)
        });
        days.push(DaySummary { day: d as u32, census, demand });
    }
    Ok(Summary { alpha, replications: reps, days })
}

/// Smallest replication count i ≥ pilot size whose t half-width relative to
/// the pilot mean is at most gamma / (1 + gamma).
pub fn required_replications(pilot: &[f64], gamma: f64, alpha: f64) -> Result<usize> {
    let n0 = pilot.len();
    if n0 < 2 {
        return Err(Error::Precondition("pilot needs at least 2 replications".into()));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidInput(format!("gamma must be in (0, 1), got {gamma}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let n = n0 as f64;
    let mean = pilot.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return Err(Error::Precondition("pilot mean is 0; relative precision is undefined".into()));
    }
    let s2 = pilot.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let target = gamma / (1.0 + gamma);
    for i in n0..=10_000_000 {
        let fi = i as f64;
        if t_quantile(1.0 - alpha / 2.0, fi - 1.0) * (s2 / fi).sqrt() / mean.abs() <= target {
            return Ok(i);
        }
    }
    Err(Error::Precondition("required replications exceed 10^7".into()))
}

//! Tracking metrics over flight logs.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::math::geodesic_angle;
use crate::scenario::{FlightLog, LogRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("flight log has no records in the requested window")]
    EmptyLog,
    #[error("series lengths differ or are too short")]
    BadSeries,
}

fn mean_over(log: &FlightLog, f: impl Fn(&LogRecord) -> f64) -> Result<f64, MetricError> {
    if log.records.is_empty() {
        return Err(MetricError::EmptyLog);
    }
    Ok(log.records.iter().map(f).sum::<f64>() / log.records.len() as f64)
}

pub fn position_error(r: &LogRecord) -> f64 {
    (r.desired.position - r.estimate.position).norm()
}

/// Minimum rotation angle between the estimated attitude and the reference
/// attitude (level at the desired yaw, as in the reward), rad.
pub fn attitude_error(r: &LogRecord) -> f64 {
    geodesic_angle(&r.desired.attitude(), &r.estimate.attitude)
}

/// Root-mean-square position error.
pub fn e_pos(log: &FlightLog) -> Result<f64, MetricError> {
    mean_over(log, |r| position_error(r).powi(2)).map(f64::sqrt)
}

/// Root-mean-square geodesic attitude error.
pub fn e_att(log: &FlightLog) -> Result<f64, MetricError> {
    mean_over(log, |r| attitude_error(r).powi(2)).map(f64::sqrt)
}

pub fn max_altitude_error(log: &FlightLog) -> Result<f64, MetricError> {
    if log.records.is_empty() {
        return Err(MetricError::EmptyLog);
    }
    Ok(log.records.iter().map(|r| (r.estimate.position.z - r.desired.position.z).abs()).fold(0.0, f64::max))
}

/// Count rising crossings of `threshold` in a non-negative series.
pub fn count_pulses(series: &[f64], threshold: f64) -> usize {
    let mut above = false;
    let mut n = 0;
    for &x in series {
        if !above && x > threshold {
            n += 1;
            above = true;
        } else if above && x <= 0.5 * threshold {
            above = false;
        }
    }
    n
}

/// Downward downwash force magnitude at every record.
pub fn downwash_series(log: &FlightLog) -> Vec<f64> {
    log.records.iter().map(|r| (-r.wrench.force.z).max(0.0)).collect()
}

/// Sample Pearson correlation; `None` if a series is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Option<f64>, MetricError> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(MetricError::BadSeries);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some(sxy / (sxx * syy).sqrt()))
}

/// Relative improvement `(baseline − candidate) / baseline`.
pub fn improvement(baseline: f64, candidate: f64) -> f64 {
    (baseline - candidate) / baseline
}

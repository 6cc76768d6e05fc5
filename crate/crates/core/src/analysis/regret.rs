//! Cumulative regret and its growth rate.

use crate::error::{Error, Result};
use crate::plant::Trajectory;

/// Gaps below `-NEGATIVE_GAP_TOL` are counted as suspicious.
pub const NEGATIVE_GAP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct RegretReport {
    pub gaps: Vec<f64>,
    /// `R_t = sum_{k <= t} gap_k`.
    pub cumulative: Vec<f64>,
    /// Least-squares slope of `ln R_t` on `ln t` over the tail window.
    pub tail_slope: Option<f64>,
    /// Regret stopped growing (non-positive somewhere in the tail).
    pub converged: bool,
    pub negative_gaps: usize,
    /// Mean gap over the last tenth of the horizon.
    pub tail_gap_mean: f64,
    pub mu1: f64,
    pub mu2_estimate: Option<f64>,
    pub mu_star: f64,
}

impl RegretReport {
    pub fn total(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }
}

/// `mu* = max{mu1, 1 - mu1, 1 + mu1 - mu2}`.
pub fn mu_star(mu1: f64, mu2: f64) -> f64 {
    mu1.max(1.0 - mu1).max(1.0 + mu1 - mu2)
}

/// Least-squares slope of `y` on `x`.
pub fn ls_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Minimum number of points in a tail fit.
pub const MIN_TAIL_POINTS: usize = 100;

/// Log-log slope of a positive sequence over its last `fraction`, with
/// `values[t]` taken at time `t` (so `t = 0` is never used). `None` when a value in the window is not positive or the
/// window is too short.
pub fn tail_log_slope(values: &[f64], fraction: f64) -> Option<f64> {
    let n = values.len();
    let start = ((n as f64 * (1.0 - fraction)).floor() as usize).max(1);
    if n.saturating_sub(start) < MIN_TAIL_POINTS {
        return None;
    }
    let mut pts = Vec::with_capacity(n - start);
    for (t, &v) in values.iter().enumerate().skip(start) {
        if !(v > 0.0) {
            return None;
        }
        pts.push(((t as f64).ln(), v.ln()));
    }
    ls_slope(&pts)
}

/// Decay exponent `mu2` of `eps_t = |theta*_{t+1} - theta*_t|`, from a fit
/// over the positive entries in the last half.
pub fn estimate_mu2(theta_star: &[[f64; 2]]) -> Option<f64> {
    let eps: Vec<f64> = theta_star
        .windows(2)
        .map(|w| ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt())
        .collect();
    let start = (eps.len() / 2).max(1);
    let pts: Vec<(f64, f64)> = eps
        .iter()
        .enumerate()
        .skip(start)
        .filter(|(_, &e)| e > 0.0)
        .map(|(t, &e)| ((t as f64).ln(), e.ln()))
        .collect();
    if pts.len() < MIN_TAIL_POINTS {
        return None;
    }
    ls_slope(&pts).map(|s| -s)
}

/// Regret of a trajectory whose records all carry `J*`.
///
/// `theta_star` (optional) feeds the `mu2` estimate; without it `mu2 >= 1`
/// is assumed for the `mu*` reference.
pub fn regret(
    trajectory: &Trajectory,
    mu1: f64,
    theta_star: Option<&[[f64; 2]]>,
    tail_fraction: f64,
) -> Result<RegretReport> {
    let gaps = trajectory
        .records
        .iter()
        .map(|r| {
            r.j_star.map(|js| r.j - js).ok_or_else(|| {
                Error::config(format!("record {} has no optimal cost; enable J* analysis", r.t))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(regret_from_gaps(gaps, mu1, theta_star, tail_fraction))
}

pub fn regret_from_gaps(
    gaps: Vec<f64>,
    mu1: f64,
    theta_star: Option<&[[f64; 2]]>,
    tail_fraction: f64,
) -> RegretReport {
    let mut cumulative = Vec::with_capacity(gaps.len());
    let mut acc = 0.0;
    for g in &gaps {
        acc += g;
        cumulative.push(acc);
    }
    let tail_slope = tail_log_slope(&cumulative, tail_fraction);
    let tail_start = ((cumulative.len() as f64 * (1.0 - tail_fraction)) as usize).max(1);
    let converged = cumulative.iter().skip(tail_start).any(|&r| r <= 0.0);
    let last = (gaps.len() / 10).max(1).min(gaps.len());
    let tail_gap_mean = if gaps.is_empty() {
        0.0
    } else {
        gaps[gaps.len() - last..].iter().sum::<f64>() / last as f64
    };
    let mu2_estimate = theta_star.and_then(estimate_mu2);
    RegretReport {
        negative_gaps: gaps.iter().filter(|&&g| g < -NEGATIVE_GAP_TOL).count(),
        gaps,
        cumulative,
        tail_slope,
        converged,
        tail_gap_mean,
        mu1,
        mu2_estimate,
        mu_star: mu_star(mu1, mu2_estimate.unwrap_or(1.0).max(mu1)),
    }
}

/// Number of sign changes of `c_{t+1}/alpha_{t+1} - c_t/alpha_t`.
pub fn ratio_sign_changes(ct: &[f64], alpha: &[f64]) -> usize {
    let ratios: Vec<f64> = ct.iter().zip(alpha).map(|(c, a)| c / a).collect();
    let diffs: Vec<f64> = ratios
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d != 0.0)
        .collect();
    diffs.windows(2).filter(|w| w[0].signum() != w[1].signum()).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gaps_mean_converged_regret() {
        let r = regret_from_gaps(vec![0.0; 500], 0.5, None, 0.5);
        assert_eq!(r.total(), 0.0);
        assert!(r.converged);
        assert!(r.tail_slope.is_none());
    }

    #[test]
    fn mu_star_reference_value() {
        assert_eq!(mu_star(0.5, 1.0), 0.5);
        assert_eq!(mu_star(0.5, 2.0), 0.5);
        assert!((mu_star(0.3, 0.5) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn power_law_slope_is_recovered() {
        let vals: Vec<f64> = (0..2000).map(|t| 3.0 * (t.max(1) as f64).powf(0.6)).collect();
        let s = tail_log_slope(&vals, 0.5).unwrap();
        assert!((s - 0.6).abs() < 1e-9);
    }

    #[test]
    fn cumulative_matches_running_sum() {
        let gaps: Vec<f64> = (0..300).map(|t| 1.0 / (1.0 + t as f64)).collect();
        let r = regret_from_gaps(gaps.clone(), 0.5, None, 0.5);
        let mut acc = 0.0;
        for (g, c) in gaps.iter().zip(&r.cumulative) {
            acc += g;
            assert_eq!(acc, *c);
        }
    }

    #[test]
    fn mu2_from_geometric_drift() {
        let th: Vec<[f64; 2]> = (1..3000)
            .map(|t| {
                let v = (t as f64).powf(-0.5);
                [v, 0.0]
            })
            .collect();
        let mu2 = estimate_mu2(&th).unwrap();
        assert!((mu2 - 1.5).abs() < 0.05, "{mu2}");
    }

    #[test]
    fn sign_changes_of_alternating_ratio() {
        let ct = [1.0, 2.0, 1.0, 2.0, 1.0];
        let alpha = [1.0; 5];
        assert_eq!(ratio_sign_changes(&ct, &alpha), 3);
    }
}

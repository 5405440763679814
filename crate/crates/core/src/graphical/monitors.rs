use serde::{Deserialize, Serialize};

use super::GraphFlowTrajectory;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReversePoincare {
    pub max_kappa: f64,
    pub at: f64,
    pub flagged: bool,
}

/// Largest kappa = w1 / w0 over the stored times, flagged above `cap`.
pub fn monitor_reverse_poincare(traj: &GraphFlowTrajectory, cap: f64) -> Result<ReversePoincare> {
    let mut best = ReversePoincare { max_kappa: 0.0, at: 0.0, flagged: false };
    for d in &traj.diagnostics {
        if d.w0 == 0.0 {
            if d.w1 > 0.0 {
                return Err(Error::DegenerateRatio { t: d.t });
            }
            continue;
        }
        let k = d.w1 / d.w0;
        if k > best.max_kappa {
            best.max_kappa = k;
            best.at = d.t;
        }
    }
    best.flagged = best.max_kappa > cap;
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotoneViolation {
    pub t: f64,
    pub t_later: f64,
    pub index: usize,
    pub excess: f64,
}

/// Samples where v drops below its earlier maximum by more than `tol`. Each
/// (later time, sample) is reported once, against the earlier snapshot
/// attaining the maximum.
pub fn check_monotone(times: &[f64], snapshots: &[Vec<f64>], tol: f64) -> Vec<MonotoneViolation> {
    let mut out = Vec::new();
    let Some(first) = snapshots.first() else { return out };
    let mut best = first.clone();
    let mut best_t = vec![times[0]; first.len()];
    for (k, snap) in snapshots.iter().enumerate().skip(1) {
        for i in 0..snap.len() {
            if snap[i] < best[i] - tol {
                out.push(MonotoneViolation { t: best_t[i], t_later: times[k], index: i, excess: best[i] - snap[i] });
            } else if snap[i] > best[i] {
                best[i] = snap[i];
                best_t[i] = times[k];
            }
        }
    }
    out
}

/// Least-squares slope of ln w0 against t on [t_lo, t_hi].
pub fn fit_growth_rate(traj: &GraphFlowTrajectory, t_lo: f64, t_hi: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = traj
        .diagnostics
        .iter()
        .filter(|d| d.t >= t_lo && d.t <= t_hi && d.w0 > 0.0)
        .map(|d| (d.t, d.w0.ln()))
        .collect();
    linear_fit(&pts).map(|(slope, _)| slope)
}

/// Ordinary least squares y = a x + b; returns (a, b).
pub fn linear_fit(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let a = sxy / sxx;
    Some((a, my - a * mx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decreasing_sequence_is_reported() {
        let times = [0.0, 1.0, 2.0];
        let snaps = vec![vec![1.0, 0.0], vec![0.5, 0.1], vec![0.7, 0.2]];
        let v = check_monotone(&times, &snaps, 1e-8);
        assert_eq!(v.len(), 2);
        assert_eq!((v[0].t, v[0].t_later, v[0].index), (0.0, 1.0, 0));
        assert_eq!((v[1].t, v[1].t_later, v[1].index), (0.0, 2.0, 0));
        assert!(check_monotone(&times, &vec![vec![0.0; 2]; 3], 1e-8).is_empty());
    }

    #[test]
    fn line_fit() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0 * i as f64 - 1.0)).collect();
        let (a, b) = linear_fit(&pts).unwrap();
        assert!((a - 3.0).abs() < 1e-12 && (b + 1.0).abs() < 1e-12);
    }
}

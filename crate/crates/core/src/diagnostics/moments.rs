//! Ensemble moment bounds implied by the drift inequality.

use crate::{Error, Result};

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentPoint {
    pub t: f64,
    /// `log` of the sample mean of `W`.
    pub log_mean: f64,
    pub log_std_error: f64,
    /// `log(e^{-ct} W(x0) + K/c)`.
    pub log_bound: f64,
    /// Largest single-replica share of the sum; near one means the mean is
    /// carried by one sample.
    pub max_share: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentBoundReport {
    pub points: Vec<MomentPoint>,
    pub passed: bool,
    /// Some time's mean is dominated by a single replica.
    pub dominated: bool,
}

/// Checks `mean W(x_t) <= e^{-ct} W(x0) + K/c + 3 SE` in log space.
///
/// `log_w[k]` holds `log W` of every replica at `times[k]`.
pub fn moment_bound_check(
    times: &[f64],
    log_w: &[Vec<f64>],
    log_w0: f64,
    c: f64,
    log_k: f64,
) -> Result<MomentBoundReport> {
    if times.len() != log_w.len() || !(c > 0.0) {
        return Err(Error::Diagnostics("moment check needs one sample set per time and c > 0".into()));
    }
    let mut points = Vec::with_capacity(times.len());
    for (&t, lw) in times.iter().zip(log_w) {
        let n = lw.len();
        if n < 2 {
            return Err(Error::Diagnostics("moment check needs at least two replicas".into()));
        }
        let ln_n = (n as f64).ln();
        let lse = log_sum_exp(lw.iter().copied());
        let log_mean = lse - ln_n;
        let log_mean_sq = log_sum_exp(lw.iter().map(|x| 2.0 * x)) - ln_n;
        // Var / mean^2 = E W^2 / (E W)^2 - 1
        let rel_var = ((log_mean_sq - 2.0 * log_mean).exp() - 1.0).max(0.0) * n as f64 / (n - 1) as f64;
        let log_std_error = log_mean + 0.5 * (rel_var / n as f64).ln();
        let log_bound = log_sum_exp([-c * t + log_w0, log_k - c.ln()].into_iter());
        let slack = log_sum_exp([log_bound, 3f64.ln() + log_std_error].into_iter());
        let max_share = lw.iter().map(|x| (x - lse).exp()).fold(0.0, f64::max);
        points.push(MomentPoint { t, log_mean, log_std_error, log_bound, max_share, passed: log_mean <= slack });
    }
    Ok(MomentBoundReport {
        passed: points.iter().all(|p| p.passed),
        dominated: points.iter().any(|p| p.max_share > 0.5),
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyPoint {
    pub t: f64,
    pub mean: f64,
    pub std_error: f64,
    pub bound: f64,
    pub passed: bool,
}

/// Checks `mean H(x_t) <= H(x0) + gamma T N d t + 3 SE`.
pub fn energy_bound_check(times: &[f64], h: &[Vec<f64>], h0: f64, gamma: f64, temperature: f64, nd: usize) -> Result<Vec<EnergyPoint>> {
    if times.len() != h.len() {
        return Err(Error::Diagnostics("energy check needs one sample set per time".into()));
    }
    times
        .iter()
        .zip(h)
        .map(|(&t, hs)| {
            let n = hs.len() as f64;
            if n < 2.0 {
                return Err(Error::Diagnostics("energy check needs at least two replicas".into()));
            }
            let mean = hs.iter().sum::<f64>() / n;
            let var = hs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let std_error = (var / n).sqrt();
            let bound = h0 + gamma * temperature * nd as f64 * t;
            Ok(EnergyPoint { t, mean, std_error, bound, passed: mean <= bound + 3.0 * std_error })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_space_mean_survives_huge_weights() {
        let lw = vec![vec![1000.0, 1000.0 + 2f64.ln()]];
        let r = moment_bound_check(&[0.0], &lw, 1001.0, 1.0, 0.0).unwrap();
        assert!((r.points[0].log_mean - (1000.0 + 1.5f64.ln())).abs() < 1e-12);
        assert!(r.passed && r.dominated);
    }

    #[test]
    fn bound_violation_is_reported() {
        let lw = vec![vec![5.0; 100], vec![5.0; 100]];
        let r = moment_bound_check(&[0.0, 10.0], &lw, 5.0, 1.0, 0.0).unwrap();
        assert!(r.points[0].passed);
        assert!(!r.points[1].passed);
    }

    #[test]
    fn energy_bound() {
        let hs = vec![vec![1.0, 1.2, 0.8], vec![3.0, 3.1, 2.9]];
        let e = energy_bound_check(&[0.0, 1.0], &hs, 1.0, 1.0, 1.0, 1).unwrap();
        assert!(e[0].passed && !e[1].passed);
    }
}

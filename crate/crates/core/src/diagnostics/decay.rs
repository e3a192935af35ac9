//! Exponential decay fits for correlations and test-function gaps.

use super::stats::autocorrelation;
use crate::potential::PhaseState;
use crate::{Error, Result};

/// Correlations at or below this level are excluded from the fit.
pub const ACF_FLOOR: f64 = 0.05;
/// Fits on fewer usable lags are flagged.
pub const MIN_LAGS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub observable: String,
    pub lags: Vec<f64>,
    pub acf: Vec<f64>,
    /// Fitted rate in `acf(t) ~ C exp(-eta t)`.
    pub eta: f64,
    pub intercept: f64,
    /// Weighted coefficient of determination of the log-linear fit.
    pub r_squared: f64,
    /// Lags entering the fit.
    pub used: usize,
    pub unreliable: bool,
}

/// Weighted least squares `y = a + s x`; returns `(a, s, r^2)`.
fn weighted_line(x: &[f64], y: &[f64], w: &[f64]) -> (f64, f64, f64) {
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for ((xi, yi), wi) in x.iter().zip(y).zip(w) {
        sxy += wi * (xi - mx) * (yi - my);
        sxx += wi * (xi - mx).powi(2);
        syy += wi * (yi - my).powi(2);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let r2 = if sxx > 0.0 && syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (my - slope * mx, slope, r2)
}

/// Fits `log acf = log C - eta t` over the leading lags with `acf > 0.05`,
/// weighting each lag by `acf^2`.
///
/// `series` are equally spaced by `dt`; the leading `burn_in` fraction of
/// each is discarded.
pub fn decay_fit(observable: &str, series: &[Vec<f64>], dt: f64, max_lag: usize, burn_in: f64) -> Result<DecayFit> {
    if !(dt > 0.0) || !(0.0..1.0).contains(&burn_in) {
        return Err(Error::Diagnostics("need dt > 0 and a burn-in fraction in [0, 1)".into()));
    }
    let kept: Vec<Vec<f64>> = series.iter().map(|s| s[(s.len() as f64 * burn_in) as usize..].to_vec()).collect();
    let acf = autocorrelation(&kept, max_lag)?;
    let lags: Vec<f64> = (0..acf.len()).map(|k| k as f64 * dt).collect();
    let used = acf.iter().take_while(|&&r| r > ACF_FLOOR).count();
    let (intercept, eta, r_squared) = if used >= 2 {
        let y: Vec<f64> = acf[..used].iter().map(|r| r.ln()).collect();
        let w: Vec<f64> = acf[..used].iter().map(|r| r * r).collect();
        let (a, s, r2) = weighted_line(&lags[..used], &y, &w);
        (a, -s, r2)
    } else {
        (0.0, f64::NAN, 0.0)
    };
    Ok(DecayFit { observable: observable.into(), lags, acf, eta, intercept, r_squared, used, unreliable: used < MIN_LAGS })
}

type PhaseFn<'a> = Box<dyn Fn(&PhaseState<f64>) -> f64 + Sync + 'a>;

/// A scalar test function on phase space.
pub struct TestFunction<'a> {
    pub name: String,
    pub f: PhaseFn<'a>,
}

impl<'a> TestFunction<'a> {
    pub fn new(name: impl Into<String>, f: impl Fn(&PhaseState<f64>) -> f64 + Sync + 'a) -> Self {
        Self { name: name.into(), f: Box::new(f) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapSeries {
    pub name: String,
    /// Sampled `sup |phi| / (1 + W)` used to normalise.
    pub scale: f64,
    pub times: Vec<f64>,
    /// `E phi(x_t) - mu(phi)` after normalisation.
    pub gap: Vec<f64>,
    pub std_error: Vec<f64>,
    /// Rate fitted to `|gap|` where it exceeds twice its standard error.
    pub rate: Option<f64>,
}

/// Normalised gaps `|E phi(x_t) - mu(phi)|` across an ensemble.
///
/// `snapshots` holds the replica states at each time, `mu` the Gibbs
/// expectation of each test function and `log_w` the Lyapunov weight. The
/// normalising supremum is taken over `probes` and every snapshot state.
pub fn test_function_gap(
    snapshots: &[(f64, Vec<PhaseState<f64>>)],
    tests: &[TestFunction<'_>],
    mu: &[f64],
    log_w: &dyn Fn(&PhaseState<f64>) -> Result<f64>,
    probes: &[PhaseState<f64>],
) -> Result<Vec<GapSeries>> {
    if tests.len() != mu.len() {
        return Err(Error::Diagnostics("one reference expectation per test function".into()));
    }
    let states: Vec<&PhaseState<f64>> = probes.iter().chain(snapshots.iter().flat_map(|s| s.1.iter())).collect();
    // log(1 + W), overflow-safe
    let log1w: Vec<f64> = states
        .iter()
        .map(|x| log_w(x).map(|l| if l > 0.0 { l + (-l).exp().ln_1p() } else { l.exp().ln_1p() }))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(tests.len());
    for (tf, &m) in tests.iter().zip(mu) {
        let scale = states
            .iter()
            .zip(&log1w)
            .map(|(x, l)| ((tf.f)(x).abs().ln() - l).exp())
            .fold(0.0, f64::max);
        if !scale.is_finite() {
            return Err(Error::Diagnostics(format!("test function {} is not W-bounded on the samples", tf.name)));
        }
        let scale = if scale > 0.0 { scale } else { 1.0 };
        let (mut times, mut gap, mut se) = (Vec::new(), Vec::new(), Vec::new());
        for (t, xs) in snapshots {
            let v: Vec<f64> = xs.iter().map(|x| (tf.f)(x) / scale).collect();
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            times.push(*t);
            gap.push(mean - m / scale);
            se.push((var / n).sqrt());
        }
        let sig: Vec<usize> = (0..gap.len()).filter(|&k| gap[k].abs() > 2.0 * se[k]).collect();
        let rate = if sig.len() >= 2 {
            let x: Vec<f64> = sig.iter().map(|&k| times[k]).collect();
            let y: Vec<f64> = sig.iter().map(|&k| gap[k].abs().ln()).collect();
            let (_, s, _) = weighted_line(&x, &y, &vec![1.0; x.len()]);
            Some(-s)
        } else {
            None
        };
        out.push(GapSeries { name: tf.name.clone(), scale, times, gap, std_error: se, rate });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_exponential_is_recovered() {
        // deterministic series whose pooled ACF is exactly geometric is hard to build;
        // an AR(1) with known rate is enough
        use crate::rng::stream_rng;
        use rand_distr::{Distribution, StandardNormal};
        let (phi, dt) = (0.9f64, 0.1);
        let mut rng = stream_rng(2, 0);
        let series: Vec<Vec<f64>> = (0..20)
            .map(|_| {
                let mut x: f64 = StandardNormal.sample(&mut rng);
                (0..20_000)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        x = phi * x + (1.0 - phi * phi).sqrt() * z;
                        x
                    })
                    .collect()
            })
            .collect();
        let fit = decay_fit("x", &series, dt, 100, 0.0).unwrap();
        let eta = -phi.ln() / dt;
        assert!(((fit.eta - eta) / eta).abs() < 0.05, "{} vs {eta}", fit.eta);
        assert!(fit.r_squared > 0.99 && !fit.unreliable);
    }

    #[test]
    fn short_correlation_is_flagged() {
        let series = vec![(0..1000).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect::<Vec<f64>>()];
        let fit = decay_fit("x", &series, 1.0, 10, 0.5).unwrap();
        assert!(fit.unreliable);
    }

    #[test]
    fn gap_of_constant_is_zero() {
        let xs: Vec<PhaseState<f64>> = (0..10).map(|k| PhaseState::new(vec![k as f64], vec![0.0])).collect();
        let snaps = vec![(0.0, xs.clone()), (1.0, xs)];
        let tests = [TestFunction::new("one", |_| 1.0), TestFunction::new("q", |x| x.q[0])];
        let g = test_function_gap(&snaps, &tests, &[1.0, 4.5], &|x| Ok(x.q[0] * x.q[0]), &[]).unwrap();
        assert!(g[0].gap.iter().all(|v| v.abs() < 1e-15));
        assert!(g[1].gap.iter().all(|v| v.abs() < 1e-12));
        assert!(g[0].rate.is_none());
    }
}

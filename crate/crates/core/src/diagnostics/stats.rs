//! Autocorrelation, effective sample size and distribution distances.

use statrs::distribution::{ContinuousCDF, Normal};

use super::gibbs::GibbsReference;
use crate::{Error, Result};

/// Below this many samples a histogram comparison is flagged as noisy.
pub const FEW_SAMPLES: usize = 10_000;

/// Pooled normalised autocorrelation of equally spaced series, lags `0..=max_lag`.
///
/// Mean and variance are pooled over all series; lag products are averaged
/// over every available pair.
pub fn autocorrelation(series: &[Vec<f64>], max_lag: usize) -> Result<Vec<f64>> {
    let n: usize = series.iter().map(Vec::len).sum();
    if n < 2 {
        return Err(Error::Diagnostics("autocorrelation needs at least two samples".into()));
    }
    let mean = series.iter().flatten().sum::<f64>() / n as f64;
    let var = series.iter().flatten().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    if !(var > 0.0) {
        return Err(Error::Diagnostics("series has zero variance".into()));
    }
    let mut acf = Vec::with_capacity(max_lag + 1);
    for k in 0..=max_lag {
        let (mut s, mut m) = (0.0, 0usize);
        for x in series {
            if x.len() > k {
                s += x.iter().zip(&x[k..]).map(|(a, b)| (a - mean) * (b - mean)).sum::<f64>();
                m += x.len() - k;
            }
        }
        if m == 0 {
            break;
        }
        acf.push(s / m as f64 / var);
    }
    Ok(acf)
}

/// Integrated autocorrelation time with Sokal's self-consistent window (`M >= 5 tau`).
pub fn integrated_autocorrelation_time(x: &[f64]) -> Result<f64> {
    let n = x.len();
    let mut lag_cap = 64.min(n.saturating_sub(1)).max(1);
    loop {
        let acf = autocorrelation(&[x.to_vec()], lag_cap)?;
        let mut tau = 1.0;
        for (m, r) in acf.iter().enumerate().skip(1) {
            tau += 2.0 * r;
            if m as f64 >= 5.0 * tau {
                return Ok(tau.max(1.0));
            }
        }
        if lag_cap >= n / 2 {
            return Ok(tau.max(1.0));
        }
        lag_cap = (lag_cap * 4).min(n / 2);
    }
}

/// `n / tau_int`.
pub fn effective_sample_size(x: &[f64]) -> Result<f64> {
    Ok(x.len() as f64 / integrated_autocorrelation_time(x)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramDistance {
    pub tv: f64,
    /// Kolmogorov-Smirnov statistic of the first coordinate.
    pub ks: f64,
    pub samples: usize,
    /// Fraction of samples outside the reference grid.
    pub outside: f64,
    pub few_samples: bool,
}

/// Total variation over the reference cells and KS distance of the first marginal.
pub fn histogram_distance(positions: &[Vec<f64>], reference: &GibbsReference) -> Result<HistogramDistance> {
    let n = positions.len();
    if n == 0 {
        return Err(Error::Diagnostics("no samples".into()));
    }
    let mut counts = vec![0usize; reference.mass.len()];
    let mut outside = 0usize;
    for q in positions {
        if q.len() != reference.dim() {
            return Err(Error::Dimension { expected: reference.dim(), got: q.len() });
        }
        match reference.cell_of(q) {
            Some(c) => counts[c] += 1,
            None => outside += 1,
        }
    }
    let nf = n as f64;
    let tv = 0.5
        * (counts.iter().zip(&reference.mass).map(|(&c, &m)| (c as f64 / nf - m).abs()).sum::<f64>()
            + outside as f64 / nf);
    let mut xs: Vec<f64> = positions.iter().map(|q| q[0]).collect();
    xs.sort_by(f64::total_cmp);
    let ks = ks_statistic(&xs, |x| reference.cdf(x));
    Ok(HistogramDistance { tv, ks, samples: n, outside: outside as f64 / nf, few_samples: n < FEW_SAMPLES })
}

/// `sup |F_n - F|` for sorted data.
pub fn ks_statistic<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsTest {
    pub statistic: f64,
    pub n: usize,
    pub n_eff: f64,
    /// 1% critical value at the effective sample size.
    pub critical: f64,
    pub passed: bool,
}

/// KS test of momentum components against `N(0, T)` with the critical value
/// scaled to `n_eff` (correlated samples).
pub fn momentum_ks(values: &[f64], temperature: f64, n_eff: f64) -> Result<KsTest> {
    if values.is_empty() || !(temperature > 0.0) {
        return Err(Error::Diagnostics("momentum KS needs samples and T > 0".into()));
    }
    let normal = Normal::new(0.0, temperature.sqrt()).map_err(|e| Error::Diagnostics(e.to_string()))?;
    let mut xs = values.to_vec();
    xs.sort_by(f64::total_cmp);
    let statistic = ks_statistic(&xs, |x| normal.cdf(x));
    let n_eff = n_eff.clamp(1.0, values.len() as f64);
    let critical = 1.628 / n_eff.sqrt();
    Ok(KsTest { statistic, n: values.len(), n_eff, critical, passed: statistic <= critical })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equipartition {
    pub mean_p2: f64,
    pub target: f64,
    pub std_error: f64,
    pub z: f64,
    pub passed: bool,
}

/// Checks `E|p|^2 = N d T` with a 3-sigma band, the standard error taken from the ESS.
pub fn equipartition(p2: &[f64], temperature: f64, nd: usize) -> Result<Equipartition> {
    let n = p2.len();
    if n < 10 {
        return Err(Error::Diagnostics("equipartition needs at least 10 samples".into()));
    }
    let mean = p2.iter().sum::<f64>() / n as f64;
    let var = p2.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let ess = effective_sample_size(p2)?;
    let se = (var / ess).sqrt();
    let target = nd as f64 * temperature;
    let z = (mean - target) / se;
    Ok(Equipartition { mean_p2: mean, target, std_error: se, z, passed: z.abs() <= 3.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand_distr::{Distribution, StandardNormal};

    fn ar1(phi: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, 0);
        let mut x = 0.0;
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                x = phi * x + (1.0 - phi * phi).sqrt() * z;
                x
            })
            .collect()
    }

    #[test]
    fn ar1_autocorrelation_and_tau() {
        let x = ar1(0.8, 200_000, 1);
        let acf = autocorrelation(std::slice::from_ref(&x), 5).unwrap();
        for (k, r) in acf.iter().enumerate() {
            assert!((r - 0.8f64.powi(k as i32)).abs() < 0.02, "{k} {r}");
        }
        // tau = (1 + phi) / (1 - phi)
        let tau = integrated_autocorrelation_time(&x).unwrap();
        assert!((tau - 9.0).abs() < 1.0, "{tau}");
    }

    #[test]
    fn ks_of_gaussian_sample_passes() {
        let mut rng = stream_rng(5, 0);
        let xs: Vec<f64> = (0..20_000).map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                0.5f64.sqrt() * z
            })
            .collect();
        let t = momentum_ks(&xs, 0.5, xs.len() as f64).unwrap();
        assert!(t.passed, "{t:?}");
        let wrong = momentum_ks(&xs, 1.0, xs.len() as f64).unwrap();
        assert!(!wrong.passed);
    }

    #[test]
    fn equipartition_z_score() {
        let mut rng = stream_rng(6, 0);
        let p2: Vec<f64> = (0..50_000)
            .map(|_| {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                a * a + b * b
            })
            .collect();
        assert!(equipartition(&p2, 1.0, 2).unwrap().passed);
        assert!(!equipartition(&p2, 1.2, 2).unwrap().passed);
    }
}

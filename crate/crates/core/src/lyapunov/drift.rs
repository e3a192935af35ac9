//! Sampled verification of `LW <= -c W + K`.
//!
//! Everything is compared in log-space: a state violates the bound iff
//! `r + c > 0` and `log(r + c) + log W > log K`, where `r = LW/W`.

use rand::Rng;
use rayon::prelude::*;

use super::LyapunovFunction;
use crate::potential::PhaseState;
use crate::rng::{derive_seed, stream_rng};
use crate::{lit, Error, Result, Scalar};

const SAFETY: f64 = 0.9;
const MAX_WITNESSES: usize = 20;

/// Sampling strata.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stratum {
    /// `U <= R2` and `|p|^2 <= P^2`.
    Compact,
    /// `P^2 < |p|^2 <= 16 P^2`.
    LargeMomentum,
    /// `U >= R2`.
    HighEnergy,
    /// Points along escape routes with thermal momenta.
    Escape,
}

const STRATA: [Stratum; 4] = [Stratum::Compact, Stratum::LargeMomentum, Stratum::HighEnergy, Stratum::Escape];

#[derive(Debug, Clone, PartialEq)]
pub struct DriftSpec {
    pub n_samples: usize,
    pub seed: u64,
    /// Polish the compact-region maximum of `(r + c) W` by local search.
    pub refine: bool,
}

impl DriftSpec {
    pub fn new(n_samples: usize, seed: u64) -> Self {
        Self { n_samples, seed, refine: true }
    }
}

#[derive(Debug, Clone)]
pub struct DriftReport {
    pub c_hat: f64,
    /// `log K_hat`; `K_hat` routinely exceeds the double range.
    pub log_k_hat: f64,
    pub samples: usize,
    pub violations: usize,
    /// `min (K - (r + c) W) / K` over the fresh sample; negative on violation.
    pub worst_margin: f64,
    /// Counts of the relative margin in `(-inf, 0), [0, 0.1), ..., [0.9, 1), [1, inf)`.
    pub margin_histogram: [usize; 12],
    pub max_ratio_compact: f64,
    pub max_ratio_large_momentum: f64,
    pub max_ratio_high_energy: f64,
    pub witnesses: Vec<PhaseState<f64>>,
}

impl DriftReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.c_hat > 0.0
    }

    /// `K_hat` itself (`+inf` when it overflows).
    pub fn k_hat(&self) -> f64 {
        self.log_k_hat.exp()
    }
}

struct Sample {
    x: PhaseState<f64>,
    r: f64,
    log_w: f64,
    compact: bool,
    stratum: Stratum,
}

fn draw<T: Scalar, R: Rng + ?Sized>(lf: &LyapunovFunction<T>, stratum: Stratum, rng: &mut R) -> Option<PhaseState<T>> {
    let model = lf.model();
    let pr = lf.params();
    let dim = model.dim();
    let p_max = pr.momentum_radius_sq().sqrt();
    let q = match stratum {
        Stratum::Compact | Stratum::LargeMomentum => model.sample_below_level(rng, pr.r2)?,
        Stratum::HighEnergy => model.sample_high_energy(rng, pr.r2)?,
        Stratum::Escape => {
            let routes = model.escape_routes();
            let route = routes[(T::sample_unit(rng).to_f64_lossy() * routes.len() as f64) as usize % routes.len()];
            let base = model.random_config(rng, lit(0.3), lit(0.1))?;
            model.route_point(route, &base, lit::<T>(12.0) * T::sample_unit(rng))
        }
    };
    // random direction, radius chosen per stratum
    let mut dir: Vec<T> = (0..dim).map(|_| T::sample_normal(rng)).collect();
    let len = crate::linalg::norm(&dir);
    if !(len > T::zero()) {
        return None;
    }
    for v in dir.iter_mut() {
        *v /= len;
    }
    let u = T::sample_unit(rng);
    let radius = match stratum {
        // uniform in the ball
        Stratum::Compact => p_max * u.powf(T::one() / lit((dim) as f64)),
        Stratum::LargeMomentum => p_max * (T::one() + lit::<T>(3.0) * u),
        Stratum::HighEnergy | Stratum::Escape => {
            pr.temperature.sqrt() * lit::<T>(dim as f64).sqrt() * (lit::<T>(6.0) * u - lit(3.0)).exp()
        }
    };
    let p = dir.into_iter().map(|v| v * radius).collect();
    Some(PhaseState::new(q, p))
}

fn sample_all<T: Scalar>(lf: &LyapunovFunction<T>, n: usize, seed: u64) -> Result<Vec<Sample>> {
    let pr = lf.params();
    let r2 = pr.r2;
    let pmax2 = pr.momentum_radius_sq();
    let out: Vec<Result<Sample>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let stratum = STRATA[i % STRATA.len()];
            let mut rng = stream_rng(seed, i as u64);
            for _ in 0..100 {
                let Some(x) = draw(lf, stratum, &mut rng) else { continue };
                let u = match lf.model().potential(&x.q) {
                    Ok(u) if u.is_finite() => u,
                    _ => continue,
                };
                let r = lf.generator_ratio(&x)?;
                let log_w = lf.log_w(&x)?;
                return Ok(Sample {
                    compact: u <= r2 && x.p_norm_sq() <= pmax2,
                    x: x.to_f64(),
                    r: r.to_f64_lossy(),
                    log_w: log_w.to_f64_lossy(),
                    stratum,
                });
            }
            Err(Error::Sampling(format!("stratum {stratum:?}: no in-domain state after 100x oversampling")))
        })
        .collect();
    out.into_iter().collect()
}

/// `log((r + c) W)` or `-inf` when `r + c <= 0`.
fn log_excess(r: f64, c: f64, log_w: f64) -> f64 {
    if r + c > 0.0 {
        (r + c).ln() + log_w
    } else {
        f64::NEG_INFINITY
    }
}

/// Estimates `(c, K)` on one sample and counts violations on a fresh one.
pub fn verify_drift<T: Scalar>(lf: &LyapunovFunction<T>, spec: &DriftSpec) -> Result<DriftReport> {
    if spec.n_samples < STRATA.len() {
        return Err(Error::Config("verify_drift needs at least one sample per stratum".into()));
    }
    let pr = lf.params();
    let gamma_nd = (pr.gamma * pr.nd()).to_f64_lossy();

    let fit = sample_all(lf, spec.n_samples, derive_seed(spec.seed, 1))?;
    let max_far = fit.iter().filter(|s| !s.compact).map(|s| s.r).fold(f64::NEG_INFINITY, f64::max);
    let c_hat = SAFETY * (gamma_nd / 2.0).min(-max_far);

    let mut compact: Vec<(f64, &Sample)> =
        fit.iter().filter(|s| s.compact).map(|s| (log_excess(s.r, c_hat, s.log_w), s)).collect();
    compact.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut log_k = compact.first().map(|c| c.0).unwrap_or(f64::NEG_INFINITY);
    if spec.refine && c_hat > 0.0 {
        let starts: Vec<PhaseState<f64>> =
            compact.iter().take(16).filter(|c| c.0.is_finite()).map(|c| c.1.x.clone()).collect();
        let polished: Vec<f64> = starts.par_iter().map(|x| hill_climb(lf, x, c_hat)).collect();
        log_k = polished.into_iter().fold(log_k, f64::max);
    }
    // K_hat = sup / 0.9, i.e. a 0.9 safety factor on the bound
    let log_k_hat = log_k - SAFETY.ln();

    let fresh = sample_all(lf, spec.n_samples, derive_seed(spec.seed, 2))?;
    let mut violations = 0;
    let mut worst_margin = f64::INFINITY;
    let mut hist = [0usize; 12];
    let mut witnesses = Vec::new();
    let max_by = |st: Stratum| fresh.iter().filter(|s| s.stratum == st).map(|s| s.r).fold(f64::NEG_INFINITY, f64::max);
    let max_ratio_high_energy = max_by(Stratum::HighEnergy);
    let max_ratio_large_momentum = max_by(Stratum::LargeMomentum);
    let max_ratio_compact = max_by(Stratum::Compact);
    for s in &fresh {
        let le = log_excess(s.r, c_hat, s.log_w);
        let margin = if le == f64::NEG_INFINITY { 1.0 } else { -(le - log_k_hat).exp_m1() };
        if le > log_k_hat {
            violations += 1;
            if witnesses.len() < MAX_WITNESSES {
                witnesses.push(s.x.clone());
            }
        }
        worst_margin = worst_margin.min(margin);
        let bin = if margin < 0.0 {
            0
        } else if margin >= 1.0 {
            11
        } else {
            1 + ((margin * 10.0) as usize).min(9)
        };
        hist[bin] += 1;
    }

    Ok(DriftReport {
        c_hat,
        log_k_hat,
        samples: fresh.len(),
        violations,
        worst_margin,
        margin_histogram: hist,
        max_ratio_compact,
        max_ratio_large_momentum,
        max_ratio_high_energy,
        witnesses,
    })
}

/// Coordinate ascent of `log((r + c) W)` inside the compact region.
fn hill_climb<T: Scalar>(lf: &LyapunovFunction<T>, start: &PhaseState<f64>, c: f64) -> f64 {
    let pr = lf.params();
    let r2 = pr.r2.to_f64_lossy();
    let pmax2 = pr.momentum_radius_sq().to_f64_lossy();
    let dim = start.q.len();
    let objective = |x: &PhaseState<f64>| -> f64 {
        let xt = PhaseState::new(x.q.iter().map(|&v| lit::<T>(v)).collect(), x.p.iter().map(|&v| lit::<T>(v)).collect());
        let Ok(u) = lf.model().potential(&xt.q) else { return f64::NEG_INFINITY };
        if !(u.to_f64_lossy() <= r2) || xt.p_norm_sq().to_f64_lossy() > pmax2 {
            return f64::NEG_INFINITY;
        }
        match (lf.generator_ratio(&xt), lf.log_w(&xt)) {
            (Ok(r), Ok(lw)) => log_excess(r.to_f64_lossy(), c, lw.to_f64_lossy()),
            _ => f64::NEG_INFINITY,
        }
    };
    let mut x = start.clone();
    let mut best = objective(&x);
    let mut steps: Vec<f64> = x.q.iter().chain(&x.p).map(|v| 0.05 * (1.0 + v.abs())).collect();
    for _ in 0..400 {
        let mut improved = false;
        for k in 0..2 * dim {
            for dir in [1.0, -1.0] {
                let mut y = x.clone();
                let slot = if k < dim { &mut y.q[k] } else { &mut y.p[k - dim] };
                *slot += dir * steps[k];
                let v = objective(&y);
                if v > best {
                    best = v;
                    x = y;
                    improved = true;
                    steps[k] *= 1.5;
                    break;
                }
            }
        }
        if !improved {
            for s in steps.iter_mut() {
                *s *= 0.5;
            }
            if steps.iter().all(|&s| s < 1e-10) {
                break;
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::SdeConfig;
    use crate::lyapunov::{select_params, SelectOptions};
    use crate::potential::PotentialModel;

    #[test]
    fn quartic_confinement_drift_holds() {
        let m = PotentialModel::poly_confine(1.0, 4.0, 1, 1).unwrap();
        let sde = SdeConfig::new(1.0, 1.0, 1e-3);
        let p = select_params(&m, &sde, 0.5, &SelectOptions { samples: 4_000, ..Default::default() }).unwrap();
        let lf = LyapunovFunction::new(m, p).unwrap();
        let rep = verify_drift(&lf, &DriftSpec::new(8_000, 3)).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert!(rep.max_ratio_large_momentum < -1.0);
        assert_eq!(rep.margin_histogram.iter().sum::<usize>(), rep.samples);
    }

    #[test]
    fn excess_is_minus_infinity_when_dissipative() {
        assert_eq!(log_excess(-2.0, 1.0, 5.0), f64::NEG_INFINITY);
        assert!((log_excess(1.0, 1.0, 5.0) - (2f64.ln() + 5.0)).abs() < 1e-15);
    }
}

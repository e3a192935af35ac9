//! Constructive choice of `(kappa, C, R1, R2)`.

use rayon::prelude::*;

use super::LyapunovParams;
use crate::dynamics::SdeConfig;
use crate::linalg::{frobenius, mat_vec, norm_sq};
use crate::potential::PotentialModel;
use crate::rng::{derive_seed, stream_rng};
use crate::{lit, Error, Result, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct SelectOptions {
    /// Relative excess of `kappa` over `3 gamma N d` (and of `C` over its lower bound).
    pub kappa_slack: f64,
    pub r1_initial: f64,
    /// States sampled on `{U >= R1/2}` per candidate `R1`.
    pub samples: usize,
    pub seed: u64,
    pub max_r1: f64,
}

impl Default for SelectOptions {
    fn default() -> Self {
        Self { kappa_slack: 1e-3, r1_initial: 1.0, samples: 100_000, seed: 0x5eed, max_r1: 1e12 }
    }
}

/// Worst sampled slack of each inequality (positive means satisfied).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionMargins {
    /// `min |grad U| - 1`.
    pub grad_floor: f64,
    /// `b gamma (1-bT) / (8 kappa) - max |grad G|`.
    pub g_jacobian: f64,
    /// `gamma b T N d - max (kappa C/2 |2bT-1| gamma + kappa^2 gamma T) |G|^2`.
    pub g_size: f64,
    /// `b gamma (1-bT) / (8 kappa) - sup |alpha'|`.
    pub cutoff_slope: f64,
}

impl SelectionMargins {
    pub fn all_hold(&self) -> bool {
        self.grad_floor >= 0.0 && self.g_jacobian > 0.0 && self.g_size >= 0.0 && self.cutoff_slope > 0.0
    }

    fn first_failure(&self) -> Option<&'static str> {
        if !(self.grad_floor >= 0.0) {
            Some("|grad U| >= 1")
        } else if !(self.g_jacobian > 0.0) {
            Some("|grad G| < b gamma (1 - bT) / (8 kappa)")
        } else if !(self.g_size >= 0.0) {
            Some("(kappa C/2 |2bT - 1| gamma + kappa^2 gamma T) |G|^2 <= gamma b T N d")
        } else if !(self.cutoff_slope > 0.0) {
            Some("|alpha'| <= b gamma (1 - bT) / (8 kappa)")
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    pub doublings: u32,
    pub samples: usize,
    pub margins: SelectionMargins,
}

/// Picks the Lyapunov constants for `b`.
pub fn select_params<T: Scalar>(
    model: &PotentialModel<T>,
    sde: &SdeConfig<T>,
    b: T,
    opts: &SelectOptions,
) -> Result<LyapunovParams<T>> {
    select_params_with_report(model, sde, b, opts).map(|(p, _)| p)
}

/// [`select_params`] plus the sampled margins of the accepted `R1`.
pub fn select_params_with_report<T: Scalar>(
    model: &PotentialModel<T>,
    sde: &SdeConfig<T>,
    b: T,
    opts: &SelectOptions,
) -> Result<(LyapunovParams<T>, SelectionReport)> {
    sde.validate_thermal()?;
    let temp = sde.temperature;
    if !(b > T::zero() && b * temp < T::one()) {
        return Err(Error::Config(format!("b = {b} must lie in (0, 1/T) with T = {temp}")));
    }
    if !(opts.kappa_slack > 0.0 && opts.r1_initial > 0.0 && opts.samples > 0) {
        return Err(Error::Config("lyapunov.kappa_slack, r1_initial and samples must be positive".into()));
    }
    let (gamma, bf, tf) = (sde.gamma.to_f64_lossy(), b.to_f64_lossy(), temp.to_f64_lossy());
    let nd = (model.n() * model.d()) as f64;
    let bt = bf * tf;
    let slack = 1.0 + opts.kappa_slack;
    let kappa = 3.0 * gamma * nd * slack;
    let mut c_young = 4.0 * (2.0 * bt - 1.0).abs() * kappa / (bf * (1.0 - bt)) * slack;
    if c_young == 0.0 {
        // 2bT = 1: any positive C works, the inequality involving C is vacuous
        c_young = 1.0;
    }
    let dissipation = bf * gamma * (1.0 - bt);
    let jac_cap = dissipation / (8.0 * kappa);
    let size_coef = kappa * c_young / 2.0 * (2.0 * bt - 1.0).abs() * gamma + kappa * kappa * gamma * tf;
    let size_cap = gamma * bt * nd;
    let band = 16.0 * kappa / dissipation;

    let mut r1 = opts.r1_initial;
    let mut doublings = 0;
    loop {
        let r2 = 2.0 * r1 + band;
        let worst = sample_margins(model, lit(r1 / 2.0), opts, doublings)?;
        let margins = SelectionMargins {
            grad_floor: worst.min_grad - 1.0,
            g_jacobian: jac_cap - worst.max_jac,
            g_size: size_cap - size_coef * worst.max_g2,
            cutoff_slope: jac_cap - 15.0 / (8.0 * (r2 - r1)),
        };
        if margins.all_hold() {
            let params = LyapunovParams {
                b,
                kappa: lit(kappa),
                c_young: lit(c_young),
                r1: lit(r1),
                r2: lit(r2),
                gamma: sde.gamma,
                temperature: temp,
                n: model.n(),
                d: model.d(),
            };
            params.validate()?;
            return Ok((params, SelectionReport { doublings, samples: opts.samples, margins }));
        }
        if r1 * 2.0 > opts.max_r1 {
            return Err(Error::Selection {
                inequality: margins.first_failure().unwrap_or("unknown").to_string(),
                r1,
            });
        }
        r1 *= 2.0;
        doublings += 1;
    }
}

struct Worst {
    min_grad: f64,
    max_jac: f64,
    max_g2: f64,
}

fn sample_margins<T: Scalar>(model: &PotentialModel<T>, level: T, opts: &SelectOptions, round: u32) -> Result<Worst> {
    let seed = derive_seed(opts.seed, round as u64);
    let stats: Vec<Option<(f64, f64, f64)>> = (0..opts.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            for _ in 0..100 {
                let Some(q) = model.sample_high_energy(&mut rng, level) else { continue };
                let Ok(e) = model.evaluate(&q) else { continue };
                return Some(g_field_stats(&e.gradient, &e.hessian));
            }
            None
        })
        .collect();
    let mut worst = Worst { min_grad: f64::INFINITY, max_jac: 0.0, max_g2: 0.0 };
    for s in stats {
        let Some((gn, jac, g2inv)) = s else {
            return Err(Error::Sampling(format!(
                "no configuration with U >= {} after 100x oversampling",
                level
            )));
        };
        worst.min_grad = worst.min_grad.min(gn);
        worst.max_jac = worst.max_jac.max(jac);
        worst.max_g2 = worst.max_g2.max(g2inv);
    }
    Ok(worst)
}

/// `(|grad U|, |grad G|_F, |G|^2)` from the gradient and Hessian.
pub(crate) fn g_field_stats<T: Scalar>(g: &[T], hess: &[T]) -> (f64, f64, f64) {
    let g2 = norm_sq(g);
    if !(g2 > T::zero()) {
        return (0.0, f64::INFINITY, f64::INFINITY);
    }
    let n = g.len();
    let hg = mat_vec(hess, g);
    let two = lit::<T>(2.0);
    // d_j G_i = H_ij / |g|^2 - 2 g_i (Hg)_j / |g|^4
    let jac: Vec<T> = (0..n * n)
        .map(|k| {
            let (i, j) = (k / n, k % n);
            hess[k] / g2 - two * g[i] * hg[j] / (g2 * g2)
        })
        .collect();
    (
        g2.sqrt().to_f64_lossy(),
        frobenius(&jac).to_f64_lossy(),
        (T::one() / g2).to_f64_lossy(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartic_confinement_selects() {
        let m = PotentialModel::poly_confine(1.0, 4.0, 1, 2).unwrap();
        let sde = SdeConfig::new(1.0, 1.0, 1e-3);
        let opts = SelectOptions { samples: 5_000, ..Default::default() };
        let (p, rep) = select_params_with_report(&m, &sde, 0.5, &opts).unwrap();
        assert!(p.kappa > 3.0 * 2.0);
        assert!(rep.margins.all_hold());
        assert_eq!(p.r2, 2.0 * p.r1 + 16.0 * p.kappa / (0.5 * 0.5));
    }

    #[test]
    fn jacobian_of_g_matches_finite_differences() {
        let m = PotentialModel::lennard_jones(2, 2, 1.0, 2.0, 1.0, 1.0).unwrap();
        let q = vec![0.1, -0.3, 1.2, 0.4];
        let e = m.evaluate(&q).unwrap();
        let (_, jac, _) = g_field_stats(&e.gradient, &e.hessian);
        let gfield = |q: &[f64]| {
            let g = m.gradient(q).unwrap();
            let g2 = norm_sq(&g);
            g.iter().map(|v| v / g2).collect::<Vec<_>>()
        };
        let mut fro = 0.0;
        for j in 0..4 {
            let h = 1e-6;
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[j] += h;
            qm[j] -= h;
            let (a, b) = (gfield(&qp), gfield(&qm));
            for i in 0..4 {
                let d = (a[i] - b[i]) / (2.0 * h);
                fro += d * d;
            }
        }
        assert!((fro.sqrt() - jac).abs() < 1e-6 * jac.max(1.0));
    }

    #[test]
    fn rejects_b_outside_range() {
        let m = PotentialModel::singular_1d(1.0, 4.0, 1.0, 2.0).unwrap();
        let sde = SdeConfig::new(1.0, 0.5, 1e-3);
        assert!(select_params(&m, &sde, 2.0, &SelectOptions::default()).is_err());
        assert!(select_params(&m, &sde, 0.0, &SelectOptions::default()).is_err());
    }

    #[test]
    fn impossible_cap_reports_inequality() {
        let m = PotentialModel::singular_1d(1.0, 4.0, 1.0, 2.0).unwrap();
        let sde = SdeConfig::new(1.0, 0.5, 1e-3);
        let opts = SelectOptions { samples: 200, max_r1: 2.0, ..Default::default() };
        match select_params(&m, &sde, 1.8, &opts) {
            Err(Error::Selection { inequality, .. }) => assert!(!inequality.is_empty()),
            other => panic!("{other:?}"),
        }
    }
}

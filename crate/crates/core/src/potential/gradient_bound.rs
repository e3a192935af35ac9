//! Sampled check of the gradient lower bound for interacting systems:
//!
//! `|grad U(q)| >= c1 |q|^(alpha-1) + c2 sum_{i<j} |q_i - q_j|^(-beta-1) - D`.

use rayon::prelude::*;

use super::{Family, PotentialModel};
use crate::linalg::norm;
use crate::rng::stream_rng;
use crate::{lit, Error, Result, Scalar};

const D_LIMIT: f64 = 1e6;

#[derive(Debug, Clone)]
pub struct GradientBoundReport {
    pub c1: f64,
    pub c2: f64,
    pub d: f64,
    pub samples: usize,
    /// Quantiles (0, 0.01, 0.5, 0.99, 1) of `|grad U| - (rhs - D)` over the sample.
    pub margin_quantiles: [f64; 5],
    pub passed: bool,
}

/// Right-hand side without `D`.
pub(crate) fn bound_rhs<T: Scalar>(q: &[T], n: usize, d: usize, alpha: f64, beta: f64, c1: f64, c2: f64) -> f64 {
    let qn = norm(q).to_f64_lossy();
    let mut pair = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let r2: f64 = (0..d)
                .map(|k| {
                    let x = (q[i * d + k] - q[j * d + k]).to_f64_lossy();
                    x * x
                })
                .sum();
            pair += r2.sqrt().powf(-beta - 1.0);
        }
    }
    c1 * qn.powf(alpha - 1.0) + c2 * pair
}

/// Fits `(c1, c2, D)` over `samples` random in-domain configurations.
///
/// `c1 = A alpha / (2 sqrt N)` and `c2 = B beta / (2 sqrt N N^2)` are fixed
/// seeds; `D` is grown by doubling until every sample satisfies the bound.
pub fn verify_gradient_lower_bound<T: Scalar>(
    model: &PotentialModel<T>,
    samples: usize,
    seed: u64,
) -> Result<GradientBoundReport> {
    let (a, alpha, b, beta) = match model.family() {
        Family::InteractingSystem { a, alpha, b, beta, .. } => {
            (a.to_f64_lossy(), alpha.to_f64_lossy(), b.to_f64_lossy(), beta.to_f64_lossy())
        }
        _ => return Err(Error::Config("gradient lower bound applies to InteractingSystem models".into())),
    };
    let (n, d) = (model.n(), model.d());
    let sqrt_n = (n as f64).sqrt();
    let c1 = a * alpha / (2.0 * sqrt_n);
    let c2 = b * beta / (2.0 * sqrt_n * (n * n) as f64);

    let routes = model.escape_routes();
    let deficits: Vec<Option<f64>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            for _ in 0..100 {
                let Some(base) = model.random_config(&mut rng, lit(2.5), lit(0.3)) else { continue };
                let pick = (T::sample_unit(&mut rng).to_f64_lossy() * (routes.len() + 1) as f64) as usize;
                let q = if pick < routes.len() {
                    // geometric depth up to three decades along the route
                    let lam = lit::<T>(7.0) * T::sample_unit(&mut rng);
                    model.route_point(routes[pick], &base, lam)
                } else {
                    base
                };
                let Ok(g) = model.gradient(&q) else { continue };
                let gn = norm(&g).to_f64_lossy();
                let rhs = bound_rhs(&q, n, d, alpha, beta, c1, c2);
                if gn.is_finite() && rhs.is_finite() {
                    return Some(rhs - gn);
                }
            }
            None
        })
        .collect();
    if deficits.iter().any(Option::is_none) {
        return Err(Error::Sampling(
            "no in-domain configuration after 100x oversampling".into(),
        ));
    }
    let deficits: Vec<f64> = deficits.into_iter().flatten().collect();
    let worst = deficits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut dd = 0.0f64;
    if worst > 0.0 {
        dd = 1.0;
        while dd < worst && dd.is_finite() {
            dd *= 2.0;
        }
    }
    let mut margins: Vec<f64> = deficits.iter().map(|x| dd - x).collect();
    margins.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let qt = |p: f64| margins[((margins.len() - 1) as f64 * p).round() as usize];
    Ok(GradientBoundReport {
        c1,
        c2,
        d: dd,
        samples,
        margin_quantiles: [qt(0.0), qt(0.01), qt(0.5), qt(0.99), qt(1.0)],
        passed: dd.is_finite() && dd <= D_LIMIT && margins[0] >= 0.0,
    })
}

//! Tail behaviour of `W`: growth along escape routes and integrability against the Gibbs measure.

use super::LyapunovFunction;
use crate::diagnostics::quadrature::{integrate_sublevel, QuadResult, Tolerance};
use crate::linalg::norm;
use crate::potential::{EscapeRoute, PhaseState};
use crate::{lit, Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailPoint {
    pub h: f64,
    pub log_w: f64,
    /// `log W / (b H)`.
    pub ratio: f64,
}

/// `log W / (bH)` at energies geometrically spaced from 10 to `h_max`.
///
/// At each level the configuration sits on `route` with `U = H/2`, and the
/// momentum points along `grad U` with `|p|^2/2 = H/2`, which maximises `|psi|`.
pub fn tail_profile<T: Scalar>(
    lf: &LyapunovFunction<T>,
    route: EscapeRoute,
    points: usize,
    h_max: f64,
) -> Result<Vec<TailPoint>> {
    if points < 2 || !(h_max > 10.0) {
        return Err(Error::Config("tail profile needs at least two levels above 10".into()));
    }
    let model = lf.model();
    let base = model.reference_config();
    let u_at = |lam: f64| model.potential(&model.route_point(route, &base, lit(lam))).map(|u| u.to_f64_lossy());
    let mut out = Vec::with_capacity(points);
    for k in 0..points {
        let h = 10.0 * (h_max / 10.0).powf(k as f64 / (points - 1) as f64);
        let target = h / 2.0;
        // bracket then bisect the route parameter where U = H/2
        let (mut lo, mut hi) = (0.0, 1.0);
        if u_at(lo)? >= target {
            return Err(Error::Config(format!("route {} starts above U = {target}", route.label())));
        }
        while u_at(hi)? < target {
            lo = hi;
            hi *= 2.0;
            if hi > 1e3 {
                return Err(Error::Config(format!("route {} never reaches U = {target}", route.label())));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if u_at(mid)? < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let q = model.route_point(route, &base, lit(hi));
        let u = model.potential(&q)?;
        let g = model.gradient(&q)?;
        let gn = norm(&g);
        let pmag = ((lit::<T>(h) - u) * lit(2.0)).max(T::zero()).sqrt();
        let p = g.iter().map(|&v| v / gn * pmag).collect();
        let x = PhaseState::new(q, p);
        let hh = lf.hamiltonian(&x)?.to_f64_lossy();
        let log_w = lf.log_w(&x)?.to_f64_lossy();
        out.push(TailPoint { h: hh, log_w, ratio: log_w / (lf.params().b.to_f64_lossy() * hh) });
    }
    Ok(out)
}

/// Truncated `int W dmu` over `{H <= cap}` for each cap, for one-dimensional models.
///
/// Both the numerator and the normaliser are integrated over the same
/// truncated set, so a stabilising sequence means `W` is integrable.
pub fn w_mass_truncations(lf: &LyapunovFunction<f64>, caps: &[f64]) -> Result<Vec<(f64, QuadResult)>> {
    let model = lf.model();
    if model.dim() != 1 {
        return Err(Error::Config("truncated W mass is computed for N d = 1 only".into()));
    }
    let temp = lf.params().temperature;
    let h = |x: &[f64]| -> f64 {
        match model.potential(&x[..1]) {
            Ok(u) => u + 0.5 * x[1] * x[1],
            Err(_) => f64::INFINITY,
        }
    };
    let q0 = model.reference_config()[0];
    let tol = Tolerance { abs: 0.0, rel: 1e-10, max_panels: 4000 };
    let mut out = Vec::new();
    for &cap in caps {
        let num = integrate_sublevel(
            &h,
            &|x: &[f64], hv| {
                let x = PhaseState::new(vec![x[0]], vec![x[1]]);
                match lf.log_w(&x) {
                    Ok(lw) => (lw - hv / temp).exp(),
                    Err(_) => 0.0,
                }
            },
            &[q0, 0.0],
            cap,
            tol,
        );
        let den = integrate_sublevel(&h, &|_x: &[f64], hv| (-hv / temp).exp(), &[q0, 0.0], cap, tol);
        out.push((
            cap,
            QuadResult {
                value: num.value / den.value,
                error: num.error / den.value + num.value * den.error / (den.value * den.value),
                evals: num.evals + den.evals,
                panels: num.panels + den.panels,
                converged: num.converged && den.converged,
            },
        ));
    }
    Ok(out)
}

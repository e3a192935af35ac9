//! Configuration samplers: reference layouts, escape routes toward infinite
//! energy, and random bulk configurations.

use rand::Rng;

use crate::potential::{Family, PotentialModel};
use crate::{lit, Scalar};

/// A one-parameter family `lambda -> q(lambda)` leaving every bounded energy
/// level as `lambda -> inf` (or, for [`EscapeRoute::Translate`], approaching
/// an interior point where smoothness is probed).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EscapeRoute {
    /// `q = base * e^lambda`.
    Outward,
    /// `q = base * e^-lambda`; toward the wall of the one-dimensional singular family.
    Inward,
    /// Particle `j` approaches particle `i`: `q_j = q_i + (base_j - base_i) e^-lambda`.
    Collapse { i: usize, j: usize },
    /// Rigid translation bringing particle `k` to the origin: `q = base - base_k (1 - e^-lambda)`.
    Translate { k: usize },
}

impl EscapeRoute {
    pub fn label(&self) -> String {
        match self {
            EscapeRoute::Outward => "outward".into(),
            EscapeRoute::Inward => "inward".into(),
            EscapeRoute::Collapse { i, j } => format!("collapse({i},{j})"),
            EscapeRoute::Translate { k } => format!("translate({k})"),
        }
    }
}

impl<T: Scalar> PotentialModel<T> {
    /// A fixed in-domain layout with unit nearest-neighbour spacing.
    pub fn reference_config(&self) -> Vec<T> {
        let (n, d) = (self.n(), self.d());
        match self.family() {
            Family::PolyConfine { .. } => {
                let c = lit::<T>(1.0 / (self.dim() as f64).sqrt());
                vec![c; self.dim()]
            }
            Family::SingularPair1D { .. } => vec![T::one()],
            _ => {
                let mut q = vec![T::zero(); n * d];
                if d == 1 {
                    for (i, v) in q.iter_mut().enumerate() {
                        *v = lit(i as f64 - (n as f64 - 1.0) / 2.0);
                    }
                } else if n == 1 {
                    q[0] = T::one();
                } else {
                    let rho = 0.5 / (std::f64::consts::PI / n as f64).sin();
                    for i in 0..n {
                        let th = 2.0 * std::f64::consts::PI * i as f64 / n as f64 + std::f64::consts::PI;
                        q[i * d] = lit(rho * th.cos());
                        q[i * d + 1] = lit(rho * th.sin());
                    }
                }
                q
            }
        }
    }

    /// Routes to infinite energy appropriate for the family.
    pub fn escape_routes(&self) -> Vec<EscapeRoute> {
        match self.family() {
            Family::PolyConfine { .. } => vec![EscapeRoute::Outward],
            Family::SingularPair1D { .. } => vec![EscapeRoute::Outward, EscapeRoute::Inward],
            _ => {
                let mut routes = vec![EscapeRoute::Outward];
                if self.has_ordering_chart() || (self.n() > 1 && self.d() > 1) {
                    routes.push(EscapeRoute::Collapse { i: 0, j: 1 });
                    if self.n() > 2 {
                        routes.push(EscapeRoute::Collapse { i: self.n() - 2, j: self.n() - 1 });
                    }
                }
                routes
            }
        }
    }

    /// Routes approaching interior points where the confinement may fail to be smooth.
    pub fn regularity_routes(&self) -> Vec<EscapeRoute> {
        match self.family() {
            Family::PolyConfine { .. } => vec![EscapeRoute::Inward],
            Family::SingularPair1D { .. } => Vec::new(),
            _ => vec![EscapeRoute::Translate { k: 0 }],
        }
    }

    /// Point at parameter `lambda` along `route` starting from `base`.
    pub fn route_point(&self, route: EscapeRoute, base: &[T], lambda: T) -> Vec<T> {
        let d = self.d();
        match route {
            EscapeRoute::Outward => base.iter().map(|&v| v * lambda.exp()).collect(),
            EscapeRoute::Inward => base.iter().map(|&v| v * (-lambda).exp()).collect(),
            EscapeRoute::Collapse { i, j } => {
                let mut q = base.to_vec();
                let s = (-lambda).exp();
                for k in 0..d {
                    q[j * d + k] = base[i * d + k] + (base[j * d + k] - base[i * d + k]) * s;
                }
                q
            }
            EscapeRoute::Translate { k } => {
                let s = T::one() - (-lambda).exp();
                let shift: Vec<T> = base[k * d..(k + 1) * d].to_vec();
                base.iter().enumerate().map(|(idx, &v)| v - shift[idx % d] * s).collect()
            }
        }
    }

    /// Random in-domain configuration: the reference layout rescaled by
    /// `e^u`, `u ~ U[-spread, spread]`, plus Gaussian jitter of relative size `jitter`.
    pub fn random_config<R: Rng + ?Sized>(&self, rng: &mut R, spread: T, jitter: T) -> Option<Vec<T>> {
        let base = self.reference_config();
        for _ in 0..100 {
            let u = (T::sample_unit(rng) * lit(2.0) - T::one()) * spread;
            let scale = u.exp();
            let mut q: Vec<T> =
                base.iter().map(|&v| (v + jitter * T::sample_normal(rng)) * scale).collect();
            if matches!(self.family(), Family::SingularPair1D { .. }) {
                q[0] = q[0].abs();
            }
            if self.has_ordering_chart() {
                q.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            }
            if self.in_domain_finite(&q) {
                return Some(q);
            }
        }
        None
    }

    fn in_domain_finite(&self, q: &[T]) -> bool {
        matches!(self.potential(q), Ok(u) if u.is_finite())
    }

    /// Draws a configuration with `U >= level`, mixing escape routes and bulk draws.
    ///
    /// Returns `None` when a draw fails (caller oversamples).
    pub fn sample_high_energy<R: Rng + ?Sized>(&self, rng: &mut R, level: T) -> Option<Vec<T>> {
        let routes = self.escape_routes();
        let pick = (T::sample_unit(rng).to_f64_lossy() * (routes.len() + 1) as f64) as usize;
        if pick >= routes.len() {
            let q = self.random_config(rng, lit(3.0), lit(0.3))?;
            return match self.potential(&q) {
                Ok(u) if u >= level && u.is_finite() => Some(q),
                _ => None,
            };
        }
        let route = routes[pick];
        let base = self.random_config(rng, lit(0.5), lit(0.15))?;
        let step = lit::<T>(std::f64::consts::LN_2 / 8.0);
        let mut lambda = T::zero();
        let max_lambda = lit::<T>(60.0);
        loop {
            let u = self.potential(&self.route_point(route, &base, lambda)).ok()?;
            if !u.is_finite() {
                return None;
            }
            if u >= level {
                break;
            }
            lambda += step;
            if lambda > max_lambda {
                return None;
            }
        }
        // concentrate draws near the level set, where the asymptotic conditions are tightest
        let span = lit::<T>(4.0);
        let w = T::sample_unit(rng);
        let lam = (lambda - step).max(T::zero()) + span * w * w;
        let q = self.route_point(route, &base, lam);
        match self.potential(&q) {
            Ok(u) if u >= level && u.is_finite() => Some(q),
            _ => None,
        }
    }

    /// Draws a configuration with `U <= level` from rescaled bulk layouts.
    pub fn sample_low_energy<R: Rng + ?Sized>(&self, rng: &mut R, level: T) -> Option<Vec<T>> {
        let q = self.random_config(rng, lit(2.0), lit(0.4))?;
        match self.potential(&q) {
            Ok(u) if u <= level => Some(q),
            _ => None,
        }
    }

    /// Draws a configuration with `U <= level` covering the whole sublevel
    /// set: half bulk draws, half uniform in `lambda` along an escape route
    /// up to the point where the route crosses `level`.
    pub fn sample_below_level<R: Rng + ?Sized>(&self, rng: &mut R, level: T) -> Option<Vec<T>> {
        let routes = self.escape_routes();
        if T::sample_unit(rng) < lit(0.5) {
            return self.sample_low_energy(rng, level);
        }
        let route = routes[(T::sample_unit(rng).to_f64_lossy() * routes.len() as f64) as usize % routes.len()];
        let base = self.random_config(rng, lit(0.5), lit(0.15))?;
        let step = lit::<T>(std::f64::consts::LN_2 / 8.0);
        let mut lambda = T::zero();
        while lambda < lit(60.0) {
            match self.potential(&self.route_point(route, &base, lambda + step)) {
                Ok(u) if u.is_finite() && u <= level => lambda += step,
                _ => break,
            }
        }
        let q = self.route_point(route, &base, (lambda + step) * T::sample_unit(rng));
        match self.potential(&q) {
            Ok(u) if u <= level => Some(q),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn reference_configs_are_in_domain() {
        let models = [
            PotentialModel::singular_1d(1.0, 4.0, 1.0, 2.0).unwrap(),
            PotentialModel::poly_confine(1.0, 4.0, 2, 3).unwrap(),
            PotentialModel::lennard_jones(3, 1, 1.0, 2.0, 1.0, 1.0).unwrap(),
            PotentialModel::lennard_jones(4, 2, 1.0, 2.0, 1.0, 1.0).unwrap(),
            PotentialModel::lennard_jones(2, 3, 1.0, 2.0, 1.0, 1.0).unwrap(),
        ];
        for m in &models {
            let q = m.reference_config();
            assert!(m.is_in_domain(&q).unwrap(), "{}", m.family_name());
        }
    }

    #[test]
    fn escape_routes_raise_energy() {
        let m = PotentialModel::lennard_jones(3, 2, 1.0, 2.0, 1.0, 1.0).unwrap();
        let base = m.reference_config();
        for route in m.escape_routes() {
            let u: Vec<f64> = (8..14)
                .map(|k| m.potential(&m.route_point(route, &base, k as f64 * 0.7)).unwrap())
                .collect();
            assert!(u.windows(2).all(|w| w[1] > w[0]), "{route:?}: {u:?}");
        }
    }

    #[test]
    fn high_energy_sampler_respects_level() {
        let m = PotentialModel::singular_1d(1.0, 4.0, 1.0, 2.0).unwrap();
        let mut rng = stream_rng(1, 0);
        let mut hits = 0;
        for _ in 0..2000 {
            if let Some(q) = m.sample_high_energy(&mut rng, 50.0) {
                assert!(m.potential(&q).unwrap() >= 50.0);
                hits += 1;
            }
        }
        assert!(hits > 1000);
    }
}

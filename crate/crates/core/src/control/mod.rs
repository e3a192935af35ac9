//! Deterministic steering between phase points.
//!
//! A path `phi` is built from two linear endcaps, `phi(s) = q0 + s p0` near
//! `s = 0` and `phi(s) = q1 + (s - t) p1` near `s = t`, joined by C^2
//! quintic Hermite segments through corridor waypoints. The control
//!
//! `xi = (phi'' + gamma phi' + grad U(phi)) / sqrt(2 gamma T)`
//!
//! makes `(phi, phi')` solve `Q' = P`, `P' = -gamma P - grad U(Q) + sqrt(2 gamma T) xi`,
//! which [`verify_reachability`] checks by re-integrating that system.

pub mod ode;

use crate::diagnostics::quadrature::{integrate, Tolerance};
use crate::dynamics::SdeConfig;
use crate::linalg::norm;
use crate::potential::{Family, PhaseState, PotentialModel};
use crate::{Error, Result};
use ode::{dopri5, OdeStats, OdeTolerance};

const DOMAIN_GRID: usize = 2000;
const CORRIDOR_RETRIES: usize = 50;
const MIN_EPS_LOG2: i32 = 20;

#[derive(Debug, Clone, PartialEq)]
struct Piece {
    t0: f64,
    h: f64,
    /// Monomial coefficients in `tau = (s - t0)/h`, one row per coordinate.
    coef: Vec<[f64; 6]>,
}

impl Piece {
    /// Quintic Hermite data `(position, velocity, acceleration)` at both ends.
    fn hermite(t0: f64, t1: f64, a: [&[f64]; 3], b: [&[f64]; 3]) -> Self {
        let h = t1 - t0;
        let coef = (0..a[0].len())
            .map(|i| {
                let (p0, v0, a0) = (a[0][i], a[1][i] * h, a[2][i] * h * h);
                let (p1, v1, a1) = (b[0][i], b[1][i] * h, b[2][i] * h * h);
                [
                    p0,
                    v0,
                    0.5 * a0,
                    -10.0 * p0 - 6.0 * v0 - 1.5 * a0 + 0.5 * a1 - 4.0 * v1 + 10.0 * p1,
                    15.0 * p0 + 8.0 * v0 + 1.5 * a0 - a1 + 7.0 * v1 - 15.0 * p1,
                    -6.0 * p0 - 3.0 * v0 - 0.5 * a0 + 0.5 * a1 - 3.0 * v1 + 6.0 * p1,
                ]
            })
            .collect();
        Self { t0, h, coef }
    }

    fn eval(&self, s: f64, order: usize) -> Vec<f64> {
        let tau = (s - self.t0) / self.h;
        self.coef
            .iter()
            .map(|c| match order {
                0 => c[0] + tau * (c[1] + tau * (c[2] + tau * (c[3] + tau * (c[4] + tau * c[5])))),
                1 => {
                    (c[1] + tau * (2.0 * c[2] + tau * (3.0 * c[3] + tau * (4.0 * c[4] + tau * 5.0 * c[5])))) / self.h
                }
                _ => (2.0 * c[2] + tau * (6.0 * c[3] + tau * (12.0 * c[4] + tau * 20.0 * c[5]))) / (self.h * self.h),
            })
            .collect()
    }
}

/// A C^2 path `[0, t_final] -> O` with linear endcaps of duration `epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPath {
    pub t_final: f64,
    pub epsilon: f64,
    x0: PhaseState<f64>,
    x1: PhaseState<f64>,
    pieces: Vec<Piece>,
    /// Interior waypoints actually used.
    pub waypoints: Vec<Vec<f64>>,
}

impl ControlPath {
    pub fn dim(&self) -> usize {
        self.x0.q.len()
    }

    /// Knot times, endcap boundaries included.
    pub fn knots(&self) -> Vec<f64> {
        let mut k: Vec<f64> = self.pieces.iter().map(|p| p.t0).collect();
        k.push(self.t_final - self.epsilon);
        k
    }

    fn eval(&self, s: f64, order: usize) -> Vec<f64> {
        let (eps, t) = (self.epsilon, self.t_final);
        if s <= eps {
            return match order {
                0 => self.x0.q.iter().zip(&self.x0.p).map(|(q, p)| q + s * p).collect(),
                1 => self.x0.p.clone(),
                _ => vec![0.0; self.dim()],
            };
        }
        if s >= t - eps {
            return match order {
                0 => self.x1.q.iter().zip(&self.x1.p).map(|(q, p)| q + (s - t) * p).collect(),
                1 => self.x1.p.clone(),
                _ => vec![0.0; self.dim()],
            };
        }
        let idx = self.pieces.partition_point(|p| p.t0 <= s).saturating_sub(1);
        self.pieces[idx].eval(s, order)
    }

    pub fn phi(&self, s: f64) -> Vec<f64> {
        self.eval(s, 0)
    }

    pub fn dphi(&self, s: f64) -> Vec<f64> {
        self.eval(s, 1)
    }

    pub fn ddphi(&self, s: f64) -> Vec<f64> {
        self.eval(s, 2)
    }
}

/// How the automatic corridor connects the inner endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Corridor {
    Straight,
    /// Rotation of the particles about their centroid in the first two
    /// coordinates, with the radius inflated by `1 + bulge sin(pi u)`.
    Swirl { direction: i8, bulge: f64 },
}

fn is_convex_family(model: &PotentialModel<f64>) -> bool {
    match model.family() {
        Family::PolyConfine { .. } | Family::SingularPair1D { .. } => true,
        _ => model.d() == 1 || model.n() == 1,
    }
}

fn corridor_point(model: &PotentialModel<f64>, a: &[f64], b: &[f64], u: f64, c: Corridor) -> Vec<f64> {
    match c {
        Corridor::Straight => a.iter().zip(b).map(|(x, y)| x + u * (y - x)).collect(),
        Corridor::Swirl { direction, bulge } => {
            let (n, d) = (model.n(), model.d());
            let centroid = |q: &[f64]| -> Vec<f64> {
                (0..d).map(|k| (0..n).map(|i| q[i * d + k]).sum::<f64>() / n as f64).collect()
            };
            let (ca, cb) = (centroid(a), centroid(b));
            let c: Vec<f64> = ca.iter().zip(&cb).map(|(x, y)| x + u * (y - x)).collect();
            let mut out = vec![0.0; n * d];
            let tau = std::f64::consts::TAU;
            for i in 0..n {
                let (ax, ay) = (a[i * d] - ca[0], a[i * d + 1] - ca[1]);
                let (bx, by) = (b[i * d] - cb[0], b[i * d + 1] - cb[1]);
                let (ra, rb) = (ax.hypot(ay), bx.hypot(by));
                let (tha, thb) = (ay.atan2(ax), by.atan2(bx));
                let mut dth = (thb - tha).rem_euclid(tau);
                match direction {
                    1 => {}
                    -1 => dth -= tau,
                    _ => {
                        if dth > std::f64::consts::PI + 1e-9 {
                            dth -= tau;
                        }
                    }
                }
                let r = ((1.0 - u) * ra + u * rb) * (1.0 + bulge * (std::f64::consts::PI * u).sin());
                let th = tha + u * dth;
                out[i * d] = c[0] + r * th.cos();
                out[i * d + 1] = c[1] + r * th.sin();
                for k in 2..d {
                    out[i * d + k] = c[k] + (1.0 - u) * (a[i * d + k] - ca[k]) + u * (b[i * d + k] - cb[k]);
                }
            }
            out
        }
    }
}

fn corridor_schedule(attempt: usize, convex: bool) -> (usize, Corridor) {
    let waypoints = 6 + 2 * attempt;
    if convex {
        return (waypoints, Corridor::Straight);
    }
    let direction = [0i8, 1, -1][attempt % 3];
    let bulge = 0.25 * (attempt / 3) as f64;
    (waypoints, Corridor::Swirl { direction, bulge })
}

fn min_pair_distance(model: &PotentialModel<f64>, q: &[f64]) -> f64 {
    let (n, d) = (model.n(), model.d());
    if n < 2 || matches!(model.family(), Family::PolyConfine { .. } | Family::SingularPair1D { .. }) {
        return f64::INFINITY;
    }
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            let r2: f64 = (0..d).map(|k| (q[i * d + k] - q[j * d + k]).powi(2)).sum();
            best = best.min(r2.sqrt());
        }
    }
    best
}

fn in_domain(model: &PotentialModel<f64>, q: &[f64]) -> bool {
    matches!(model.potential(q), Ok(u) if u.is_finite())
}

fn assemble(x0: &PhaseState<f64>, x1: &PhaseState<f64>, t: f64, eps: f64, waypoints: &[Vec<f64>]) -> ControlPath {
    let dim = x0.q.len();
    let a: Vec<f64> = x0.q.iter().zip(&x0.p).map(|(q, p)| q + eps * p).collect();
    let b: Vec<f64> = x1.q.iter().zip(&x1.p).map(|(q, p)| q - eps * p).collect();
    let m = waypoints.len();
    let mut pos = vec![a];
    pos.extend(waypoints.iter().cloned());
    pos.push(b);
    let times: Vec<f64> = (0..m + 2).map(|k| eps + (t - 2.0 * eps) * k as f64 / (m + 1) as f64).collect();
    let mut vel = vec![x0.p.clone()];
    for k in 1..=m {
        let dt = times[k + 1] - times[k - 1];
        vel.push((0..dim).map(|i| (pos[k + 1][i] - pos[k - 1][i]) / dt).collect());
    }
    vel.push(x1.p.clone());
    let zero = vec![0.0; dim];
    let pieces = (0..=m)
        .map(|k| {
            Piece::hermite(times[k], times[k + 1], [&pos[k], &vel[k], &zero], [&pos[k + 1], &vel[k + 1], &zero])
        })
        .collect();
    ControlPath { t_final: t, epsilon: eps, x0: x0.clone(), x1: x1.clone(), pieces, waypoints: waypoints.to_vec() }
}

fn check_endpoint(model: &PotentialModel<f64>, x: &PhaseState<f64>, label: &str) -> Result<()> {
    let dim = model.dim();
    if x.q.len() != dim || x.p.len() != dim {
        return Err(Error::Dimension { expected: dim, got: x.q.len() });
    }
    if !in_domain(model, &x.q) {
        return Err(Error::Path(format!(
            "{label} lies outside the domain (for d = 1 systems, endpoints with different particle orderings lie in different components)"
        )));
    }
    Ok(())
}

/// Builds a path from `x0` to `x1` in time `t`.
///
/// With `waypoints = None` the corridor is chosen automatically (straight
/// for convex domains and single-axis systems, a rotation about the
/// centroid otherwise) and retried up to 50 times with more waypoints and
/// wider detours. Every candidate is checked on a dense grid for domain
/// membership and for pair distances of at least half the smaller
/// endpoint minimum.
pub fn build_path(
    model: &PotentialModel<f64>,
    x0: &PhaseState<f64>,
    x1: &PhaseState<f64>,
    t: f64,
    waypoints: Option<&[Vec<f64>]>,
) -> Result<ControlPath> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Config("control.t_final must be positive".into()));
    }
    check_endpoint(model, x0, "x0")?;
    check_endpoint(model, x1, "x1")?;
    if let Some(w) = waypoints {
        for (k, q) in w.iter().enumerate() {
            if q.len() != model.dim() || !in_domain(model, q) {
                return Err(Error::Path(format!("waypoint {k} is not an in-domain configuration")));
            }
        }
    }

    // longest admissible endcap from t/10 downward
    let mut eps = t / 10.0;
    let endcap_ok = |eps: f64| {
        (0..=200).all(|k| {
            let s = eps * k as f64 / 200.0;
            let a: Vec<f64> = x0.q.iter().zip(&x0.p).map(|(q, p)| q + s * p).collect();
            let b: Vec<f64> = x1.q.iter().zip(&x1.p).map(|(q, p)| q - s * p).collect();
            in_domain(model, &a) && in_domain(model, &b)
        })
    };
    while !endcap_ok(eps) {
        eps *= 0.5;
        if eps < t * 2f64.powi(-MIN_EPS_LOG2) {
            return Err(Error::Path("linear endcaps leave the domain for every epsilon >= t 2^-20".into()));
        }
    }

    let floor = 0.5 * min_pair_distance(model, &x0.q).min(min_pair_distance(model, &x1.q));
    let accept = |path: &ControlPath| {
        (0..=DOMAIN_GRID).all(|k| {
            let q = path.phi(t * k as f64 / DOMAIN_GRID as f64);
            in_domain(model, &q) && min_pair_distance(model, &q) >= floor
        })
    };

    if let Some(w) = waypoints {
        let path = assemble(x0, x1, t, eps, w);
        return if accept(&path) {
            Ok(path)
        } else {
            Err(Error::Path("spline through the supplied waypoints leaves the domain".into()))
        };
    }

    let convex = is_convex_family(model);
    let a: Vec<f64> = x0.q.iter().zip(&x0.p).map(|(q, p)| q + eps * p).collect();
    let b: Vec<f64> = x1.q.iter().zip(&x1.p).map(|(q, p)| q - eps * p).collect();
    for attempt in 0..CORRIDOR_RETRIES {
        let (m, corridor) = corridor_schedule(attempt, convex);
        let w: Vec<Vec<f64>> =
            (1..=m).map(|k| corridor_point(model, &a, &b, k as f64 / (m + 1) as f64, corridor)).collect();
        if w.iter().any(|q| !in_domain(model, q)) {
            continue;
        }
        let path = assemble(x0, x1, t, eps, &w);
        if accept(&path) {
            return Ok(path);
        }
    }
    Err(Error::Path(format!(
        "no in-domain corridor after {CORRIDOR_RETRIES} retries; supply waypoints"
    )))
}

/// `xi = (phi'' + gamma phi' + grad U(phi)) / sqrt(2 gamma T)` from given derivatives.
pub fn control_from_derivatives(
    model: &PotentialModel<f64>,
    sde: &SdeConfig<f64>,
    phi: &[f64],
    dphi: &[f64],
    ddphi: &[f64],
) -> Result<Vec<f64>> {
    let g = model.gradient(phi)?;
    let scale = 1.0 / (2.0 * sde.gamma * sde.temperature).sqrt();
    Ok((0..phi.len()).map(|i| (ddphi[i] + sde.gamma * dphi[i] + g[i]) * scale).collect())
}

/// Control along `path` at time `s`.
pub fn control_at(model: &PotentialModel<f64>, sde: &SdeConfig<f64>, path: &ControlPath, s: f64) -> Result<Vec<f64>> {
    control_from_derivatives(model, sde, &path.phi(s), &path.dphi(s), &path.ddphi(s))
}

/// Path and control on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSamples {
    pub s: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
    pub xi: Vec<Vec<f64>>,
}

pub fn synthesize_control(
    model: &PotentialModel<f64>,
    path: &ControlPath,
    sde: &SdeConfig<f64>,
    grid_points: usize,
) -> Result<ControlSamples> {
    sde.validate_thermal()?;
    let n = grid_points.max(2);
    let s: Vec<f64> = (0..n).map(|k| path.t_final * k as f64 / (n - 1) as f64).collect();
    let phi = s.iter().map(|&v| path.phi(v)).collect();
    let xi = s.iter().map(|&v| control_at(model, sde, path, v)).collect::<Result<_>>()?;
    Ok(ControlSamples { s, phi, xi })
}

/// `int_0^t |xi|^2 ds`, piecewise adaptive quadrature between knots.
pub fn control_cost(model: &PotentialModel<f64>, path: &ControlPath, sde: &SdeConfig<f64>) -> Result<f64> {
    let mut bounds = vec![0.0];
    bounds.extend(path.knots());
    bounds.push(path.t_final);
    let mut total = 0.0;
    let tol = Tolerance { abs: 1e-12, rel: 1e-10, max_panels: 500 };
    for w in bounds.windows(2) {
        let mut failure = None;
        let r = integrate(
            |s| match control_at(model, sde, path, s) {
                Ok(xi) => xi.iter().map(|v| v * v).sum(),
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            },
            w[0],
            w[1],
            tol,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        total += r.value;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReachabilityReport {
    pub endpoint_error: f64,
    pub tolerance: f64,
    /// `max |Q(s) - phi(s)|` over the check grid.
    pub tracking_error: f64,
    pub momentum_error_start: f64,
    pub momentum_error_end: f64,
    pub max_u: f64,
    pub control_cost: f64,
    pub epsilon: f64,
    pub ode_steps: usize,
    pub passed: bool,
}

/// Builds the path, synthesizes the control and re-integrates the controlled system.
pub fn verify_reachability(
    model: &PotentialModel<f64>,
    x0: &PhaseState<f64>,
    x1: &PhaseState<f64>,
    t: f64,
    sde: &SdeConfig<f64>,
    waypoints: Option<&[Vec<f64>]>,
) -> Result<ReachabilityReport> {
    sde.validate_thermal()?;
    let path = build_path(model, x0, x1, t, waypoints)?;
    reintegrate(model, &path, sde)
}

/// Re-integrates `Q' = P, P' = -gamma P - grad U(Q) + sqrt(2 gamma T) xi(s)` along `path`.
pub fn reintegrate(model: &PotentialModel<f64>, path: &ControlPath, sde: &SdeConfig<f64>) -> Result<ReachabilityReport> {
    let dim = path.dim();
    let amp = (2.0 * sde.gamma * sde.temperature).sqrt();
    let mut rhs = |s: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let (q, p) = y.split_at(dim);
        let g = model.gradient(q).map_err(|e| Error::Ode { time: s, reason: e.to_string() })?;
        let xi = control_at(model, sde, path, s).map_err(|e| Error::Ode { time: s, reason: e.to_string() })?;
        for i in 0..dim {
            dy[i] = p[i];
            dy[dim + i] = -sde.gamma * p[i] - g[i] + amp * xi[i];
        }
        Ok(())
    };
    // check grid: knots plus a uniform grid
    let t = path.t_final;
    let mut grid: Vec<f64> = (0..=1000).map(|k| t * k as f64 / 1000.0).collect();
    grid.extend(path.knots());
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * t);

    let mut y: Vec<f64> = path.x0.q.iter().chain(&path.x0.p).cloned().collect();
    let mut stats = OdeStats::default();
    let mut h = t * 1e-4;
    let mut tracking: f64 = 0.0;
    let mut max_u = model.potential(&path.x0.q)?;
    let tol = OdeTolerance::default();
    let momentum_error_start = norm(
        &path.dphi(0.0).iter().zip(&path.x0.p).map(|(a, b)| a - b).collect::<Vec<_>>(),
    );
    for w in grid.windows(2) {
        h = dopri5(&mut rhs, w[0], w[1], &mut y, h, tol, &mut stats)?;
        let q = &y[..dim];
        let u = model.potential(q)?;
        if !u.is_finite() {
            return Err(Error::Ode { time: w[1], reason: "trajectory left the domain".into() });
        }
        max_u = max_u.max(u);
        let phi = path.phi(w[1]);
        tracking = tracking.max(norm(&q.iter().zip(&phi).map(|(a, b)| a - b).collect::<Vec<_>>()));
    }
    let target: Vec<f64> = path.x1.q.iter().chain(&path.x1.p).cloned().collect();
    let endpoint_error = norm(&y.iter().zip(&target).map(|(a, b)| a - b).collect::<Vec<_>>());
    let momentum_error_end = norm(&y[dim..].iter().zip(&path.x1.p).map(|(a, b)| a - b).collect::<Vec<_>>());
    let tolerance = 1e-6 * (1.0 + norm(&target));
    let cost = control_cost(model, path, sde)?;
    Ok(ReachabilityReport {
        endpoint_error,
        tolerance,
        tracking_error: tracking,
        momentum_error_start,
        momentum_error_end,
        max_u,
        control_cost: cost,
        epsilon: path.epsilon,
        ode_steps: stats.accepted + stats.rejected,
        passed: endpoint_error <= tolerance && max_u.is_finite(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sde() -> SdeConfig<f64> {
        SdeConfig::new(1.0, 0.5, 1e-3)
    }

    #[test]
    fn path_is_c2_at_knots() {
        let m = PotentialModel::singular_1d(1.0, 4.0, 1.0, 2.0).unwrap();
        let x0 = PhaseState::new(vec![1.0], vec![0.3]);
        let x1 = PhaseState::new(vec![2.0], vec![0.5]);
        let path = build_path(&m, &x0, &x1, 2.0, None).unwrap();
        for s in path.knots() {
            for order in 0..3 {
                let l = path.eval(s - 1e-9, order)[0];
                let r = path.eval(s + 1e-9, order)[0];
                assert!((l - r).abs() < 1e-5, "order {order} at {s}: {l} vs {r}");
            }
        }
        assert_eq!(path.phi(0.0), vec![1.0]);
        assert!((path.phi(2.0)[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn stationary_control_is_gradient() {
        let m = PotentialModel::singular_1d(1.0, 4.0, 1.0, 2.0).unwrap();
        let x = PhaseState::at_rest(vec![1.3]);
        let path = build_path(&m, &x, &x, 1.0, None).unwrap();
        let c = synthesize_control(&m, &path, &sde(), 50).unwrap();
        let g = m.gradient(&[1.3]).unwrap()[0];
        for xi in &c.xi {
            assert!((xi[0] - g).abs() < 1e-12);
        }
    }

    #[test]
    fn free_straight_line_control() {
        let m = PotentialModel::poly_confine(0.0, 2.0, 1, 2).unwrap();
        let v = [0.5, -1.0];
        let x0 = PhaseState::new(vec![0.0, 0.0], v.to_vec());
        let x1 = PhaseState::new(vec![1.0, -2.0], v.to_vec());
        let path = build_path(&m, &x0, &x1, 2.0, None).unwrap();
        let s = sde();
        for k in 0..=20 {
            let xi = control_at(&m, &s, &path, 0.1 * k as f64).unwrap();
            for i in 0..2 {
                assert!((xi[i] - v[i]).abs() < 1e-9, "{xi:?}");
            }
        }
    }

    #[test]
    fn harmonic_control_matches_symbolic() {
        let m = PotentialModel::poly_confine(0.5, 2.0, 1, 2).unwrap();
        let s = SdeConfig::new(0.7, 0.4, 1e-3);
        let q0 = [0.8, -0.3];
        for k in 0..=30 {
            let t = 0.1 * k as f64;
            let phi: Vec<f64> = q0.iter().map(|v| t.cos() * v).collect();
            let dphi: Vec<f64> = q0.iter().map(|v| -t.sin() * v).collect();
            let ddphi: Vec<f64> = q0.iter().map(|v| -t.cos() * v).collect();
            let xi = control_from_derivatives(&m, &s, &phi, &dphi, &ddphi).unwrap();
            for i in 0..2 {
                let exact = -0.7 * t.sin() * q0[i] / (2.0f64 * 0.7 * 0.4).sqrt();
                assert!((xi[i] - exact).abs() <= 1e-8 * exact.abs().max(1e-300) + 1e-15);
            }
        }
    }

    #[test]
    fn ordering_is_preserved_on_a_line() {
        let m = PotentialModel::lennard_jones(3, 1, 1.0, 2.0, 1.0, 1.0).unwrap();
        let x0 = PhaseState::at_rest(vec![-1.0, 0.0, 1.0]);
        let x1 = PhaseState::at_rest(vec![-2.0, 0.5, 1.5]);
        let path = build_path(&m, &x0, &x1, 3.0, None).unwrap();
        for k in 0..=3000 {
            let q = path.phi(3.0 * k as f64 / 3000.0);
            assert!(q[0] < q[1] && q[1] < q[2]);
        }
    }

    #[test]
    fn cost_blows_up_for_short_horizons() {
        let m = PotentialModel::singular_1d(1.0, 4.0, 1.0, 2.0).unwrap();
        let x0 = PhaseState::at_rest(vec![1.0]);
        let x1 = PhaseState::at_rest(vec![2.0]);
        let s = sde();
        let c1 = control_cost(&m, &build_path(&m, &x0, &x1, 1.0, None).unwrap(), &s).unwrap();
        let c2 = control_cost(&m, &build_path(&m, &x0, &x1, 0.5, None).unwrap(), &s).unwrap();
        assert!(c1.is_finite() && c2 > c1);
    }

    #[test]
    fn rejects_out_of_domain_endpoints() {
        let m = PotentialModel::lennard_jones(2, 1, 1.0, 2.0, 1.0, 1.0).unwrap();
        let x0 = PhaseState::at_rest(vec![-1.0, 1.0]);
        let x1 = PhaseState::at_rest(vec![1.0, -1.0]);
        assert!(matches!(build_path(&m, &x0, &x1, 1.0, None), Err(Error::Path(_))));
    }
}

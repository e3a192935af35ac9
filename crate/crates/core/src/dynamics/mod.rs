//! Integrators for `dq = p dt`, `dp = [-gamma p - grad U(q)] dt + sqrt(2 gamma T) dB`.

mod simulate;

pub use simulate::{ensemble, simulate, simulate_with, Observable, Record, SimulateOptions, TrajectorySummary};

use rand::Rng;

use crate::potential::{PhaseState, PotentialModel};
use crate::{lit, Error, Result, Scalar};

/// Time-stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    EulerMaruyama,
    /// Half kick, half drift, exact Ornstein-Uhlenbeck momentum update, half drift, half kick.
    #[default]
    SplitOU,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::EulerMaruyama => "EulerMaruyama",
            Scheme::SplitOU => "SplitOU",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "EulerMaruyama" | "euler-maruyama" | "em" => Ok(Scheme::EulerMaruyama),
            "SplitOU" | "split-ou" | "splitou" => Ok(Scheme::SplitOU),
            other => Err(Error::Config(format!("unknown scheme `{other}`"))),
        }
    }
}

/// One simulation: friction, temperature, step, length, scheme and seed.
///
/// `temperature = 0` switches the noise off; it is accepted by the
/// integrators for deterministic checks but rejected by everything that
/// needs the Gibbs measure.
#[derive(Debug, Clone, PartialEq)]
pub struct SdeConfig<T> {
    pub gamma: T,
    pub temperature: T,
    pub dt: T,
    pub n_steps: u64,
    pub scheme: Scheme,
    pub seed: u64,
    /// Maximum number of step halvings before a step is declared failed.
    pub max_dt_shrink: u32,
    /// A step gaining more potential energy than this is retried with a smaller step.
    pub energy_jump_cap: T,
    pub sample_every: u64,
}

impl<T: Scalar> SdeConfig<T> {
    pub fn new(gamma: T, temperature: T, dt: T) -> Self {
        Self {
            gamma,
            temperature,
            dt,
            n_steps: 1000,
            scheme: Scheme::SplitOU,
            seed: 0,
            max_dt_shrink: 10,
            energy_jump_cap: lit(1e3),
            sample_every: 1,
        }
    }

    pub fn with_steps(mut self, n_steps: u64) -> Self {
        self.n_steps = n_steps;
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_sample_every(mut self, every: u64) -> Self {
        self.sample_every = every;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |x: T, name: &str| {
            if x.is_finite() && x > T::zero() {
                Ok(())
            } else {
                Err(Error::Config(format!("sde.{name} must be positive")))
            }
        };
        positive(self.gamma, "gamma")?;
        positive(self.dt, "dt")?;
        positive(self.energy_jump_cap, "energy_jump_cap")?;
        if !(self.temperature.is_finite() && self.temperature >= T::zero()) {
            return Err(Error::Config("sde.temperature must be nonnegative".into()));
        }
        if self.n_steps == 0 {
            return Err(Error::Config("sde.n_steps must be at least 1".into()));
        }
        if self.sample_every == 0 {
            return Err(Error::Config("sde.sample_every must be at least 1".into()));
        }
        if self.max_dt_shrink > 20 {
            return Err(Error::Config("sde.max_dt_shrink must be at most 20".into()));
        }
        Ok(())
    }

    /// Validation for uses that need a genuine Gibbs measure (`T > 0`).
    pub fn validate_thermal(&self) -> Result<()> {
        self.validate()?;
        if !(self.temperature > T::zero()) {
            return Err(Error::Config("sde.temperature must be positive".into()));
        }
        Ok(())
    }
}

/// Result of one safeguarded step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome<T> {
    pub state: PhaseState<T>,
    /// Halvings used (0 when the full step was accepted).
    pub shrinks: u32,
    /// Number of sub-steps actually taken.
    pub substeps: u32,
}

/// Gaussian increments for one sub-step.
fn normals<T: Scalar, R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<T> {
    (0..n).map(|_| T::sample_normal(rng)).collect()
}

/// One unguarded step of size `h` with the supplied standard normals.
pub fn raw_step<T: Scalar>(
    model: &PotentialModel<T>,
    sde: &SdeConfig<T>,
    x: &PhaseState<T>,
    h: T,
    xi: &[T],
) -> Result<PhaseState<T>> {
    let gamma = sde.gamma;
    let temp = sde.temperature;
    match sde.scheme {
        Scheme::EulerMaruyama => {
            let g = model.gradient(&x.q)?;
            let amp = (lit::<T>(2.0) * gamma * temp * h).sqrt();
            let q: Vec<T> = x.q.iter().zip(&x.p).map(|(&q, &p)| q + p * h).collect();
            let p: Vec<T> = x
                .p
                .iter()
                .zip(&g)
                .zip(xi)
                .map(|((&p, &g), &z)| p - (gamma * p + g) * h + amp * z)
                .collect();
            Ok(PhaseState { q, p })
        }
        Scheme::SplitOU => {
            let half = lit::<T>(0.5) * h;
            let g = model.gradient(&x.q)?;
            let mut p: Vec<T> = x.p.iter().zip(&g).map(|(&p, &g)| p - half * g).collect();
            let mut q: Vec<T> = x.q.iter().zip(&p).map(|(&q, &p)| q + half * p).collect();
            let decay = (-gamma * h).exp();
            let amp = (temp * (T::one() - (-lit::<T>(2.0) * gamma * h).exp())).sqrt();
            for (pi, &z) in p.iter_mut().zip(xi) {
                *pi = decay * *pi + amp * z;
            }
            for (qi, &pi) in q.iter_mut().zip(&p) {
                *qi += half * pi;
            }
            let g = model.gradient(&q)?;
            for (pi, &gi) in p.iter_mut().zip(&g) {
                *pi -= half * gi;
            }
            Ok(PhaseState { q, p })
        }
    }
}

fn acceptable<T: Scalar>(model: &PotentialModel<T>, u0: T, cap: T, next: &PhaseState<T>) -> bool {
    match model.potential(&next.q) {
        Ok(u) => u.is_finite() && u <= u0 + cap && next.p.iter().all(|v| v.is_finite()),
        Err(_) => false,
    }
}

/// One safeguarded step of size `sde.dt`.
///
/// A step landing outside the domain, or gaining more than
/// `energy_jump_cap` of potential energy, is replaced by two steps of half
/// the size (recursively, at most `max_dt_shrink` levels). The rejected
/// noise is discarded and fresh normals are drawn for the sub-steps.
pub fn step<T: Scalar, R: Rng + ?Sized>(
    model: &PotentialModel<T>,
    sde: &SdeConfig<T>,
    x: &PhaseState<T>,
    rng: &mut R,
) -> Result<StepOutcome<T>> {
    let u0 = model.potential(&x.q)?;
    if !u0.is_finite() {
        return Err(Error::Domain("step started outside the domain".into()));
    }
    let mut shrinks = 0;
    let mut substeps = 0;
    let state = guarded(model, sde, x, u0, sde.dt, 0, rng, &mut shrinks, &mut substeps)?;
    Ok(StepOutcome { state, shrinks, substeps })
}

#[allow(clippy::too_many_arguments)]
fn guarded<T: Scalar, R: Rng + ?Sized>(
    model: &PotentialModel<T>,
    sde: &SdeConfig<T>,
    x: &PhaseState<T>,
    u0: T,
    h: T,
    depth: u32,
    rng: &mut R,
    shrinks: &mut u32,
    substeps: &mut u32,
) -> Result<PhaseState<T>> {
    let xi = normals(rng, x.q.len());
    if let Ok(next) = raw_step(model, sde, x, h, &xi) {
        if acceptable(model, u0, sde.energy_jump_cap, &next) {
            *substeps += 1;
            return Ok(next);
        }
    }
    if depth >= sde.max_dt_shrink {
        return Err(Error::StepFailure {
            step: 0,
            q: x.q.iter().map(|v| v.to_f64_lossy()).collect(),
            p: x.p.iter().map(|v| v.to_f64_lossy()).collect(),
        });
    }
    *shrinks = (*shrinks).max(depth + 1);
    let half = h * lit(0.5);
    let mid = guarded(model, sde, x, u0, half, depth + 1, rng, shrinks, substeps)?;
    let u_mid = model.potential(&mid.q)?;
    guarded(model, sde, &mid, u_mid, half, depth + 1, rng, shrinks, substeps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn euler_step_by_hand() {
        let m = PotentialModel::<f64>::singular_1d(1.0, 2.0, 1.0, 1.0).unwrap();
        let sde = SdeConfig::new(1.0, 1.0, 1e-3).with_scheme(Scheme::EulerMaruyama);
        let x = PhaseState::new(vec![1.0], vec![0.0]);
        let next = raw_step(&m, &sde, &x, 1e-3, &[0.0]).unwrap();
        assert_eq!(next.q, vec![1.0]);
        assert!((next.p[0] + 1e-3).abs() < 1e-15);
    }

    #[test]
    fn split_step_without_force_is_exact_ou() {
        let m = PotentialModel::poly_confine(0.0, 2.0, 1, 1).unwrap();
        let sde = SdeConfig::new(2.0, 0.5, 0.1);
        let x = PhaseState::new(vec![0.0], vec![1.0]);
        let next = raw_step(&m, &sde, &x, 0.1, &[1.0]).unwrap();
        let expect = (-0.2f64).exp() + (0.5 * (1.0 - (-0.4f64).exp())).sqrt();
        assert!((next.p[0] - expect).abs() < 1e-14);
    }

    #[test]
    fn safeguard_halves_steps_near_the_wall() {
        let m = PotentialModel::singular_1d(1.0, 4.0, 1.0, 2.0).unwrap();
        let mut sde = SdeConfig::new(1.0, 0.5, 0.05);
        sde.energy_jump_cap = 1.0;
        let x = PhaseState::new(vec![0.3], vec![-6.0]);
        let mut rng = stream_rng(1, 0);
        let out = step(&m, &sde, &x, &mut rng).unwrap();
        assert!(out.shrinks > 0);
        assert!(m.is_in_domain(&out.state.q).unwrap());
    }

    #[test]
    fn exhausted_safeguard_is_a_step_failure() {
        let m = PotentialModel::singular_1d(1.0, 4.0, 1.0, 2.0).unwrap();
        let mut sde = SdeConfig::new(1.0, 0.5, 1.0);
        sde.max_dt_shrink = 0;
        let x = PhaseState::new(vec![0.05], vec![-50.0]);
        let mut rng = stream_rng(1, 0);
        assert!(matches!(step(&m, &sde, &x, &mut rng), Err(Error::StepFailure { .. })));
    }

    #[test]
    fn config_validation() {
        assert!(SdeConfig::new(1.0, 0.5, 1e-3).validate().is_ok());
        assert!(SdeConfig::new(0.0, 0.5, 1e-3).validate().is_err());
        assert!(SdeConfig::new(1.0, 0.0, 1e-3).validate().is_ok());
        assert!(SdeConfig::new(1.0, 0.0, 1e-3).validate_thermal().is_err());
        assert!("SplitOU".parse::<Scheme>().is_ok());
        assert!("leapfrog".parse::<Scheme>().is_err());
    }
}

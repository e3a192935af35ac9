//! The exponential Lyapunov function `W = exp(bH + psi)` with
//! `psi = kappa alpha(U) p . G`, `G = grad U / |grad U|^2`.
//!
//! All evaluation happens in log-space: `log W = bH + psi`. The generator
//! ratio `LW/W` has two independent code paths, the closed form
//! ([`LyapunovFunction::generator_ratio`]) and the identity
//! `L e^V / e^V = LV + gamma T |grad_p V|^2` applied to analytic derivatives
//! of `V` ([`LyapunovFunction::generator_ratio_via_identity`]).

mod drift;
mod select;
mod tails;

pub use drift::{verify_drift, DriftReport, DriftSpec, Stratum};
pub use select::{select_params, select_params_with_report, SelectOptions, SelectionMargins, SelectionReport};
pub use tails::{tail_profile, w_mass_truncations, TailPoint};

use crate::dynamics::SdeConfig;
use crate::linalg::{dot, mat_vec, norm_sq};
use crate::potential::{PhaseState, PotentialModel};
use crate::{lit, Error, Result, Scalar};

/// Quintic smoothstep switching from 0 at `r1` to 1 at `r2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffFunction<T> {
    r1: T,
    r2: T,
}

impl<T: Scalar> CutoffFunction<T> {
    pub fn new(r1: T, r2: T) -> Result<Self> {
        if !(r1.is_finite() && r2.is_finite() && r1 > T::zero() && r2 > r1) {
            return Err(Error::Config("cutoff needs 0 < R1 < R2".into()));
        }
        Ok(Self { r1, r2 })
    }

    pub fn r1(&self) -> T {
        self.r1
    }

    pub fn r2(&self) -> T {
        self.r2
    }

    fn t(&self, u: T) -> Option<T> {
        if u <= self.r1 || u >= self.r2 {
            None
        } else {
            Some((u - self.r1) / (self.r2 - self.r1))
        }
    }

    pub fn value(&self, u: T) -> T {
        if u >= self.r2 {
            return T::one();
        }
        match self.t(u) {
            None => T::zero(),
            Some(t) => t * t * t * (t * (t * lit(6.0) - lit(15.0)) + lit(10.0)),
        }
    }

    pub fn derivative(&self, u: T) -> T {
        match self.t(u) {
            None => T::zero(),
            Some(t) => {
                let s = t * (T::one() - t);
                lit::<T>(30.0) * s * s / (self.r2 - self.r1)
            }
        }
    }

    pub fn second_derivative(&self, u: T) -> T {
        match self.t(u) {
            None => T::zero(),
            Some(t) => {
                let w = self.r2 - self.r1;
                lit::<T>(60.0) * t * (T::one() - t) * (T::one() - lit::<T>(2.0) * t) / (w * w)
            }
        }
    }

    /// Exact supremum of `|alpha'|`, attained at the midpoint.
    pub fn max_slope(&self) -> T {
        lit::<T>(15.0 / 8.0) / (self.r2 - self.r1)
    }
}

/// Constants of the Lyapunov function together with the SDE constants they were chosen for.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovParams<T> {
    pub b: T,
    pub kappa: T,
    /// Young's-inequality constant.
    pub c_young: T,
    pub r1: T,
    pub r2: T,
    pub gamma: T,
    pub temperature: T,
    pub n: usize,
    pub d: usize,
}

impl<T: Scalar> LyapunovParams<T> {
    pub fn nd(&self) -> T {
        lit((self.n * self.d) as f64)
    }

    pub fn cutoff(&self) -> Result<CutoffFunction<T>> {
        CutoffFunction::new(self.r1, self.r2)
    }

    /// `b gamma (1 - bT)`, the coefficient of `-|p|^2` in the ratio.
    pub fn dissipation(&self) -> T {
        self.b * self.gamma * (T::one() - self.b * self.temperature)
    }

    /// Squared momentum radius beyond which the ratio is below `-gamma N d`.
    pub fn momentum_radius_sq(&self) -> T {
        lit::<T>(6.0) * self.gamma * self.nd() / self.dissipation()
    }

    /// Checks the structural inequalities that do not need sampling.
    pub fn validate(&self) -> Result<()> {
        let bt = self.b * self.temperature;
        if !(self.temperature > T::zero() && self.gamma > T::zero()) {
            return Err(Error::Config("gamma and temperature must be positive".into()));
        }
        if !(self.b > T::zero() && bt < T::one()) {
            return Err(Error::Config(format!("b = {} must lie in (0, 1/T)", self.b)));
        }
        if !(self.kappa > lit::<T>(3.0) * self.gamma * self.nd()) {
            return Err(Error::Config("kappa must exceed 3 gamma N d".into()));
        }
        let c_min = lit::<T>(4.0) * (lit::<T>(2.0) * bt - T::one()).abs() * self.kappa / (self.b * (T::one() - bt));
        if !(self.c_young > c_min || (c_min == T::zero() && self.c_young > T::zero())) {
            return Err(Error::Config("Young constant C too small".into()));
        }
        self.cutoff().map(|_| ())
    }
}

/// A scalar field on phase space given by its value and the derivatives the generator needs.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDerivs<T> {
    pub value: T,
    pub grad_q: Vec<T>,
    pub grad_p: Vec<T>,
    pub lap_p: T,
}

/// Pieces of `Lf = Hf + gamma Rf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitGenerator<T> {
    /// Liouville part `p . grad_q f - grad U . grad_p f`.
    pub hamiltonian: T,
    /// Ornstein-Uhlenbeck part `-p . grad_p f + T lap_p f` (before the factor gamma).
    pub ou: T,
    /// Force part `-grad U . grad_p f`.
    pub a_part: T,
    pub total: T,
}

/// `H = |p|^2/2 + U(q)`.
pub fn eval_hamiltonian<T: Scalar>(model: &PotentialModel<T>, x: &PhaseState<T>) -> Result<T> {
    let u = model.potential(&x.q)?;
    if !u.is_finite() {
        return Err(Error::Domain("Hamiltonian evaluated outside the domain".into()));
    }
    Ok(u + x.kinetic())
}

/// Derivatives of `H` itself.
pub fn hamiltonian_field<T: Scalar>(model: &PotentialModel<T>, x: &PhaseState<T>) -> Result<FieldDerivs<T>> {
    let (u, g) = model.value_and_gradient(&x.q)?;
    Ok(FieldDerivs {
        value: u + x.kinetic(),
        grad_q: g,
        grad_p: x.p.clone(),
        lap_p: lit((x.p.len()) as f64),
    })
}

/// Applies the split generator to a field with known derivatives.
pub fn eval_split_generator<T: Scalar>(
    model: &PotentialModel<T>,
    sde: &SdeConfig<T>,
    f: &FieldDerivs<T>,
    x: &PhaseState<T>,
) -> Result<SplitGenerator<T>> {
    let dim = model.dim();
    if f.grad_q.len() != dim || f.grad_p.len() != dim || x.p.len() != dim {
        return Err(Error::Dimension { expected: dim, got: f.grad_q.len().min(f.grad_p.len()).min(x.p.len()) });
    }
    let g = model.gradient(&x.q)?;
    let a_part = -dot(&g, &f.grad_p);
    let hamiltonian = dot(&x.p, &f.grad_q) + a_part;
    let ou = -dot(&x.p, &f.grad_p) + sde.temperature * f.lap_p;
    Ok(SplitGenerator { hamiltonian, ou, a_part, total: hamiltonian + sde.gamma * ou })
}

/// `log W` together with its exponential (`+inf` with `overflow` set when it does not fit).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WValue<T> {
    pub log: T,
    pub value: T,
    pub overflow: bool,
}

/// Potential-dependent quantities at one configuration.
struct Local<T> {
    u: T,
    g: Vec<T>,
    g2: T,
    hess: Option<Vec<T>>,
}

/// `W = exp(bH + psi)` for a fixed model and parameter set.
#[derive(Debug, Clone)]
pub struct LyapunovFunction<T> {
    model: PotentialModel<T>,
    params: LyapunovParams<T>,
    cutoff: CutoffFunction<T>,
}

impl<T: Scalar> LyapunovFunction<T> {
    pub fn new(model: PotentialModel<T>, params: LyapunovParams<T>) -> Result<Self> {
        params.validate()?;
        Self::new_unchecked(model, params)
    }

    /// Skips the parameter inequalities (the cutoff must still be well formed).
    /// Useful for probing what happens outside the admissible range, e.g. `bT >= 1`.
    pub fn new_unchecked(model: PotentialModel<T>, params: LyapunovParams<T>) -> Result<Self> {
        if params.n != model.n() || params.d != model.d() {
            return Err(Error::Config("parameters were selected for a different (N, d)".into()));
        }
        let cutoff = params.cutoff()?;
        Ok(Self { model, params, cutoff })
    }

    pub fn model(&self) -> &PotentialModel<T> {
        &self.model
    }

    pub fn params(&self) -> &LyapunovParams<T> {
        &self.params
    }

    pub fn cutoff(&self) -> &CutoffFunction<T> {
        &self.cutoff
    }

    fn local(&self, q: &[T], with_hessian: bool) -> Result<Local<T>> {
        let u = self.model.potential(q)?;
        if !u.is_finite() {
            return Err(Error::Domain("state outside the domain".into()));
        }
        if u <= self.cutoff.r1() {
            return Ok(Local { u, g: Vec::new(), g2: T::zero(), hess: None });
        }
        let (g, hess) = if with_hessian {
            let e = self.model.evaluate(q)?;
            (e.gradient, Some(e.hessian))
        } else {
            (self.model.gradient(q)?, None)
        };
        let g2 = norm_sq(&g);
        if !(g2 > T::zero()) {
            return Err(Error::Consistency(format!(
                "grad U vanishes at U = {u} above R1 = {}; R1 is too small",
                self.cutoff.r1()
            )));
        }
        Ok(Local { u, g, g2, hess })
    }

    pub fn hamiltonian(&self, x: &PhaseState<T>) -> Result<T> {
        eval_hamiltonian(&self.model, x)
    }

    fn psi_local(&self, loc: &Local<T>, p: &[T]) -> T {
        if loc.u <= self.cutoff.r1() {
            return T::zero();
        }
        self.params.kappa * self.cutoff.value(loc.u) * dot(p, &loc.g) / loc.g2
    }

    /// `psi = kappa alpha(U) p . grad U / |grad U|^2`.
    pub fn psi(&self, x: &PhaseState<T>) -> Result<T> {
        let loc = self.local(&x.q, false)?;
        Ok(self.psi_local(&loc, &x.p))
    }

    pub fn log_w(&self, x: &PhaseState<T>) -> Result<T> {
        let loc = self.local(&x.q, false)?;
        Ok(self.params.b * (loc.u + x.kinetic()) + self.psi_local(&loc, &x.p))
    }

    pub fn w(&self, x: &PhaseState<T>) -> Result<WValue<T>> {
        let log = self.log_w(x)?;
        let value = log.exp();
        Ok(WValue { log, value, overflow: !value.is_finite() })
    }

    /// Closed-form `LW/W`.
    pub fn generator_ratio(&self, x: &PhaseState<T>) -> Result<T> {
        let pr = &self.params;
        let loc = self.local(&x.q, true)?;
        let p2 = x.p_norm_sq();
        let base = -pr.dissipation() * p2 + pr.gamma * pr.b * pr.temperature * pr.nd();
        if loc.u <= self.cutoff.r1() {
            return Ok(base);
        }
        let hess = loc.hess.as_ref().expect("hessian requested");
        let (alpha, dalpha) = (self.cutoff.value(loc.u), self.cutoff.derivative(loc.u));
        let kappa = pr.kappa;
        let g2 = loc.g2;
        let pg = dot(&x.p, &loc.g);
        let hp = mat_vec(hess, &x.p);
        let php = dot(&x.p, &hp);
        let phg = dot(&hp, &loc.g);
        let two = lit::<T>(2.0);
        let p_grad_psi = kappa * alpha * (php / g2 - two * pg * phg / (g2 * g2)) + kappa * dalpha * pg * pg / g2;
        let psi = kappa * alpha * pg / g2;
        Ok(base - kappa * alpha
            + p_grad_psi
            + (two * pr.b * pr.temperature - T::one()) * pr.gamma * psi
            + kappa * kappa * pr.gamma * pr.temperature * alpha * alpha / g2)
    }

    /// Derivatives of `psi` (all zero below the cutoff).
    pub fn psi_field(&self, x: &PhaseState<T>) -> Result<FieldDerivs<T>> {
        let loc = self.local(&x.q, true)?;
        let dim = x.q.len();
        if loc.u <= self.cutoff.r1() {
            return Ok(FieldDerivs {
                value: T::zero(),
                grad_q: vec![T::zero(); dim],
                grad_p: vec![T::zero(); dim],
                lap_p: T::zero(),
            });
        }
        let hess = loc.hess.as_ref().expect("hessian requested");
        let kappa = self.params.kappa;
        let (alpha, dalpha) = (self.cutoff.value(loc.u), self.cutoff.derivative(loc.u));
        let g2 = loc.g2;
        let pg = dot(&x.p, &loc.g);
        let hp = mat_vec(hess, &x.p);
        let hg = mat_vec(hess, &loc.g);
        let two = lit::<T>(2.0);
        let grad_q = (0..dim)
            .map(|k| kappa * (dalpha * pg / g2 * loc.g[k] + alpha * (hp[k] / g2 - two * hg[k] * pg / (g2 * g2))))
            .collect();
        let grad_p = loc.g.iter().map(|&gk| kappa * alpha * gk / g2).collect();
        Ok(FieldDerivs { value: kappa * alpha * pg / g2, grad_q, grad_p, lap_p: T::zero() })
    }

    /// Derivatives of `V = bH + psi`, so that `W = e^V`.
    pub fn v_field(&self, x: &PhaseState<T>) -> Result<FieldDerivs<T>> {
        let h = hamiltonian_field(&self.model, x)?;
        let psi = self.psi_field(x)?;
        let b = self.params.b;
        Ok(FieldDerivs {
            value: b * h.value + psi.value,
            grad_q: h.grad_q.iter().zip(&psi.grad_q).map(|(&a, &c)| b * a + c).collect(),
            grad_p: h.grad_p.iter().zip(&psi.grad_p).map(|(&a, &c)| b * a + c).collect(),
            lap_p: b * h.lap_p + psi.lap_p,
        })
    }

    /// `LW/W = LV + gamma T |grad_p V|^2`, evaluated through [`eval_split_generator`].
    ///
    /// `LV` is taken as `b LH + L psi`: near a singularity `|grad U|` can reach
    /// 1e14, and summing the fields first would absorb `grad psi` into `b grad U`.
    pub fn generator_ratio_via_identity(&self, x: &PhaseState<T>) -> Result<T> {
        let sde = SdeConfig::new(self.params.gamma, self.params.temperature, T::one());
        let lh = eval_split_generator(&self.model, &sde, &hamiltonian_field(&self.model, x)?, x)?;
        let psi = self.psi_field(x)?;
        let lpsi = eval_split_generator(&self.model, &sde, &psi, x)?;
        let b = self.params.b;
        let grad_p_v: Vec<T> = x.p.iter().zip(&psi.grad_p).map(|(&p, &c)| b * p + c).collect();
        Ok(b * lh.total + lpsi.total + self.params.gamma * self.params.temperature * norm_sq(&grad_p_v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(b: f64, r1: f64, r2: f64) -> LyapunovParams<f64> {
        LyapunovParams { b, kappa: 3.003, c_young: 1.0, r1, r2, gamma: 1.0, temperature: 1.0, n: 1, d: 1 }
    }

    #[test]
    fn cutoff_shape() {
        let c = CutoffFunction::new(2.0, 6.0).unwrap();
        assert_eq!(c.value(1.0), 0.0);
        assert_eq!(c.value(2.0), 0.0);
        assert_eq!(c.value(6.0), 1.0);
        assert_eq!(c.value(7.0), 1.0);
        assert_relative_eq!(c.value(4.0), 0.5, epsilon = 1e-15);
        assert_relative_eq!(c.derivative(4.0), c.max_slope(), epsilon = 1e-15);
        assert!(c.max_slope() <= 2.0 / 4.0);
        for k in 1..400 {
            let u = 2.0 + 4.0 * k as f64 / 400.0;
            let h = 1e-6;
            let fd = (c.value(u + h) - c.value(u - h)) / (2.0 * h);
            assert!((fd - c.derivative(u)).abs() < 1e-8);
            let fd2 = (c.derivative(u + h) - c.derivative(u - h)) / (2.0 * h);
            assert!((fd2 - c.second_derivative(u)).abs() < 1e-7);
            assert!((0.0..=1.0).contains(&c.value(u)));
        }
        assert!(CutoffFunction::new(3.0, 3.0).is_err());
    }

    #[test]
    fn hamiltonian_by_hand() {
        let m = PotentialModel::singular_1d(1.0, 2.0, 1.0, 1.0).unwrap();
        assert_eq!(eval_hamiltonian(&m, &PhaseState::new(vec![1.0], vec![2.0])).unwrap(), 4.0);
        assert_eq!(eval_hamiltonian(&m, &PhaseState::at_rest(vec![1.0])).unwrap(), 2.0);
        assert!(eval_hamiltonian(&m, &PhaseState::at_rest(vec![-1.0])).is_err());
    }

    #[test]
    fn below_cutoff_everything_is_exp_bh() {
        let m = PotentialModel::singular_1d(1.0, 2.0, 1.0, 1.0).unwrap();
        let lf = LyapunovFunction::new_unchecked(m, LyapunovParams { b: 0.5, ..params(0.5, 10.0, 20.0) }).unwrap();
        let x = PhaseState::new(vec![1.0], vec![2.0]);
        assert_eq!(lf.psi(&x).unwrap(), 0.0);
        assert_relative_eq!(lf.w(&x).unwrap().value, 2f64.exp(), max_relative = 1e-15);
        let x = PhaseState::new(vec![1.0], vec![1.0]);
        assert_relative_eq!(lf.generator_ratio(&x).unwrap(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn psi_above_r2_is_kappa_p_dot_g() {
        // |q|^2/2 has grad U = q; at q = (3, 0) the gradient is (3, 0), G = (1/3, 0)
        let m = PotentialModel::poly_confine(0.5, 2.0, 1, 2).unwrap();
        let pr = LyapunovParams { n: 1, d: 2, ..params(0.5, 1.0, 2.0) };
        let lf = LyapunovFunction::new_unchecked(m, pr).unwrap();
        let x = PhaseState::new(vec![3.0, 0.0], vec![6.0, 1.0]);
        assert_relative_eq!(lf.psi(&x).unwrap(), 3.003 * 2.0, max_relative = 1e-15);
        assert_eq!(lf.psi(&PhaseState::at_rest(vec![3.0, 0.0])).unwrap(), 0.0);
        let w = lf.w(&x).unwrap();
        assert_relative_eq!(w.log - 0.5 * lf.hamiltonian(&x).unwrap(), lf.psi(&x).unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn hamiltonian_field_generator() {
        let m = PotentialModel::<f64>::lennard_jones(2, 2, 1.0, 2.0, 1.0, 1.0).unwrap();
        let sde = SdeConfig::new(0.7, 0.3, 1e-3);
        let x = PhaseState::new(vec![0.1, 0.2, 1.3, -0.4], vec![0.5, -1.0, 2.0, 0.3]);
        let f = hamiltonian_field(&m, &x).unwrap();
        let s = eval_split_generator(&m, &sde, &f, &x).unwrap();
        assert!(s.hamiltonian.abs() < 1e-12);
        let expect = -0.7 * x.p_norm_sq() + 0.7 * 0.3 * 4.0;
        assert_relative_eq!(s.total, expect, max_relative = 1e-12);
    }

    #[test]
    fn force_part_of_psi_is_minus_kappa_above_r2() {
        let m = PotentialModel::singular_1d(1.0, 4.0, 1.0, 2.0).unwrap();
        let lf = LyapunovFunction::new_unchecked(m.clone(), params(0.5, 1.0, 2.0)).unwrap();
        let x = PhaseState::new(vec![3.0], vec![0.4]);
        let f = lf.psi_field(&x).unwrap();
        let s = eval_split_generator(&m, &SdeConfig::new(1.0, 1.0, 1e-3), &f, &x).unwrap();
        assert_relative_eq!(s.a_part, -3.003, max_relative = 1e-13);
    }

    #[test]
    fn two_ratio_routes_agree_in_the_transition_band() {
        let m = PotentialModel::singular_1d(1.0, 4.0, 1.0, 2.0).unwrap();
        let lf = LyapunovFunction::new_unchecked(m, LyapunovParams { b: 0.6, ..params(0.6, 5.0, 40.0) }).unwrap();
        for &(q, p) in &[(1.6, 0.3), (2.0, -1.7), (0.3, 2.2), (0.2, -0.1), (2.6, 4.0)] {
            let x = PhaseState::new(vec![q], vec![p]);
            let a = lf.generator_ratio(&x).unwrap();
            let b = lf.generator_ratio_via_identity(&x).unwrap();
            assert!((a - b).abs() <= 1e-11 * a.abs().max(1.0), "{q} {p}: {a} {b}");
        }
    }

    #[test]
    fn parameter_validation() {
        let mut p = LyapunovParams { kappa: 3.1, c_young: 100.0, temperature: 0.5, ..params(1.0, 5.0, 50.0) };
        assert!(p.validate().is_ok());
        p.b = 2.0;
        assert!(p.validate().is_err());
        p.b = 1.0;
        p.kappa = 2.9;
        assert!(p.validate().is_err());
    }
}

//! Potential energy models on `(R^d)^N`.
//!
//! A [`PotentialModel`] evaluates `U`, `grad U` and the Hessian of `U` on its
//! finite-energy set `O = {U < inf}`. Outside `O` the potential is `+inf`;
//! derivatives there are domain errors.

mod admissibility;
mod gradient_bound;

pub use crate::sampling::EscapeRoute;
pub use admissibility::{
    probe_admissibility, AdmissibilityReport, Integrability, ProbeKind, ProbeSequence, ProbeSpec,
    Verdicts,
};
pub use gradient_bound::{verify_gradient_lower_bound, GradientBoundReport};

use crate::linalg::norm_sq;
use crate::{lit, Error, Result, Scalar};

/// Positions `q = (q_1, ..., q_N)`, each `q_i` in `R^d`, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleConfig<T> {
    coords: Vec<T>,
    n: usize,
    d: usize,
}

impl<T: Scalar> ParticleConfig<T> {
    pub fn new(coords: Vec<T>, n: usize, d: usize) -> Result<Self> {
        if coords.len() != n * d {
            return Err(Error::Dimension { expected: n * d, got: coords.len() });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("particle coordinates must be finite".into()));
        }
        Ok(Self { coords, n, d })
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn particle(&self, i: usize) -> &[T] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn into_coords(self) -> Vec<T> {
        self.coords
    }
}

/// A phase-space point `x = (q, p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState<T> {
    pub q: Vec<T>,
    pub p: Vec<T>,
}

impl<T: Scalar> PhaseState<T> {
    pub fn new(q: Vec<T>, p: Vec<T>) -> Self {
        Self { q, p }
    }

    /// State at rest at `q`.
    pub fn at_rest(q: Vec<T>) -> Self {
        let p = vec![T::zero(); q.len()];
        Self { q, p }
    }

    pub fn kinetic(&self) -> T {
        lit::<T>(0.5) * norm_sq(&self.p)
    }

    pub fn p_norm_sq(&self) -> T {
        norm_sq(&self.p)
    }

    pub fn to_f64(&self) -> PhaseState<f64> {
        PhaseState {
            q: self.q.iter().map(|v| v.to_f64_lossy()).collect(),
            p: self.p.iter().map(|v| v.to_f64_lossy()).collect(),
        }
    }
}

/// Radial power law `coef * r^exponent`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLaw<T> {
    pub coef: T,
    pub exponent: T,
}

impl<T: Scalar> PowerLaw<T> {
    pub fn new(coef: T, exponent: T) -> Self {
        Self { coef, exponent }
    }

    fn value(&self, r: T) -> T {
        if self.coef == T::zero() {
            return T::zero();
        }
        self.coef * r.powf(self.exponent)
    }

    /// `f'(r)/r`, the gradient coefficient multiplying `x`.
    fn d1_over_r(&self, r: T) -> T {
        let e = self.exponent;
        if self.coef == T::zero() {
            return T::zero();
        }
        if r == T::zero() {
            let two = lit::<T>(2.0);
            return if e == two {
                two * self.coef
            } else if e > two {
                T::zero()
            } else {
                T::infinity()
            };
        }
        self.coef * e * r.powf(e - lit(2.0))
    }

    /// `(f'' - f'/r)/r^2`, the coefficient of `x x^T` in the Hessian.
    fn outer_coef(&self, r: T) -> T {
        let e = self.exponent;
        let two = lit::<T>(2.0);
        if self.coef == T::zero() || e == two {
            return T::zero();
        }
        if r == T::zero() {
            return if e > lit(4.0) { T::zero() } else { T::infinity() };
        }
        self.coef * e * (e - two) * r.powf(e - lit(4.0))
    }
}

/// Built-in potential families.
#[derive(Debug, Clone, PartialEq)]
pub enum Family<T> {
    /// `U(q) = A |q|^alpha` over the whole configuration vector.
    PolyConfine { a: T, alpha: T },
    /// One particle on the half line: `A q^alpha + B q^-beta` for `q > 0`, `+inf` otherwise.
    SingularPair1D { a: T, alpha: T, b: T, beta: T },
    /// `sum_i A|q_i|^alpha + sum_{i<j} [B r^-beta - c1 r^-m] + shift` with `r = |q_i - q_j|`.
    ///
    /// The shift makes each pair term nonnegative. With `beta = 12, m = 6`
    /// this is the Lennard-Jones potential `c0/r^12 - c1/r^6 + c1^2/(4 c0)`.
    InteractingSystem { a: T, alpha: T, b: T, beta: T, c1: T, attract_power: T },
    /// Sums of confinement power laws on each particle and singular pair power laws.
    UserComposite { confine: Vec<PowerLaw<T>>, pair: Vec<PowerLaw<T>> },
}

/// A potential family bound to a particle count `N` and dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialModel<T> {
    family: Family<T>,
    n: usize,
    d: usize,
    pair_shift: T,
}

/// Which derivatives an evaluation should produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Order {
    Value,
    Gradient,
    Hessian,
}

/// Value with optional derivatives. `hessian` is row-major `(Nd) x (Nd)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation<T> {
    pub value: T,
    pub gradient: Vec<T>,
    pub hessian: Vec<T>,
}

impl<T: Scalar> PotentialModel<T> {
    pub fn new(family: Family<T>, n: usize, d: usize) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::Config("N and d must be at least 1".into()));
        }
        let pos = |x: T, name: &str| -> Result<()> {
            if x.is_finite() && x > T::zero() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive and finite")))
            }
        };
        let nonneg = |x: T, name: &str| -> Result<()> {
            if x.is_finite() && x >= T::zero() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be nonnegative and finite")))
            }
        };
        let mut pair_shift = T::zero();
        match &family {
            Family::PolyConfine { a, alpha } => {
                nonneg(*a, "A")?;
                pos(*alpha, "alpha")?;
            }
            Family::SingularPair1D { a, alpha, b, beta } => {
                if n != 1 || d != 1 {
                    return Err(Error::Config("SingularPair1D requires N = d = 1".into()));
                }
                nonneg(*a, "A")?;
                pos(*alpha, "alpha")?;
                pos(*b, "B")?;
                pos(*beta, "beta")?;
            }
            Family::InteractingSystem { a, alpha, b, beta, c1, attract_power } => {
                nonneg(*a, "A")?;
                pos(*alpha, "alpha")?;
                pos(*b, "B")?;
                pos(*beta, "beta")?;
                nonneg(*c1, "c1")?;
                pos(*attract_power, "attraction exponent")?;
                if *c1 > T::zero() {
                    if *attract_power >= *beta {
                        return Err(Error::Config(
                            "attraction exponent must be below the repulsive exponent beta".into(),
                        ));
                    }
                    // minimum of B r^-beta - c1 r^-m at r*^(beta-m) = beta B / (m c1)
                    let m = *attract_power;
                    let r_star = (*beta * *b / (m * *c1)).powf(T::one() / (*beta - m));
                    let min = *b * r_star.powf(-*beta) - *c1 * r_star.powf(-m);
                    pair_shift = -min;
                }
            }
            Family::UserComposite { confine, pair } => {
                for (k, t) in confine.iter().enumerate() {
                    nonneg(t.coef, &format!("confinement coefficient {k}"))?;
                    pos(t.exponent, &format!("confinement exponent {k}"))?;
                }
                for (k, t) in pair.iter().enumerate() {
                    nonneg(t.coef, &format!("pair coefficient {k}"))?;
                    if !(t.exponent < T::zero()) {
                        return Err(Error::Config(format!(
                            "pair exponent {k} must be negative (singular repulsion)"
                        )));
                    }
                }
                if confine.is_empty() {
                    return Err(Error::Config("UserComposite needs at least one confinement term".into()));
                }
            }
        }
        Ok(Self { family, n, d, pair_shift })
    }

    /// Lennard-Jones pairs `c0/r^12 - c1/r^6` (shifted to be nonnegative) in an `A|x|^alpha` trap.
    pub fn lennard_jones(n: usize, d: usize, a: T, alpha: T, c0: T, c1: T) -> Result<Self> {
        Self::new(
            Family::InteractingSystem { a, alpha, b: c0, beta: lit(12.0), c1, attract_power: lit(6.0) },
            n,
            d,
        )
    }

    pub fn singular_1d(a: T, alpha: T, b: T, beta: T) -> Result<Self> {
        Self::new(Family::SingularPair1D { a, alpha, b, beta }, 1, 1)
    }

    pub fn poly_confine(a: T, alpha: T, n: usize, d: usize) -> Result<Self> {
        Self::new(Family::PolyConfine { a, alpha }, n, d)
    }

    pub fn family(&self) -> &Family<T> {
        &self.family
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of configuration coordinates `N * d`.
    pub fn dim(&self) -> usize {
        self.n * self.d
    }

    /// Constant added to each pair term so that it is nonnegative.
    pub fn pair_shift(&self) -> T {
        self.pair_shift
    }

    pub fn family_name(&self) -> &'static str {
        match self.family {
            Family::PolyConfine { .. } => "PolyConfine",
            Family::SingularPair1D { .. } => "SingularPair1D",
            Family::InteractingSystem { .. } => "InteractingSystem",
            Family::UserComposite { .. } => "UserComposite",
        }
    }

    /// True when particles live on a line and must stay ordered.
    pub fn has_ordering_chart(&self) -> bool {
        self.d == 1
            && self.n > 1
            && matches!(
                &self.family,
                Family::InteractingSystem { .. } | Family::UserComposite { .. }
            )
            && self.has_pair_terms()
    }

    fn has_pair_terms(&self) -> bool {
        match &self.family {
            Family::InteractingSystem { .. } => true,
            Family::UserComposite { pair, .. } => !pair.is_empty(),
            _ => false,
        }
    }

    fn check_len(&self, q: &[T]) -> Result<()> {
        if q.len() != self.dim() {
            Err(Error::Dimension { expected: self.dim(), got: q.len() })
        } else {
            Ok(())
        }
    }

    /// `U(q)`; `+inf` exactly when `q` is outside `O`.
    pub fn potential(&self, q: &[T]) -> Result<T> {
        self.check_len(q)?;
        Ok(self.eval_inner(q, Order::Value).map(|e| e.value).unwrap_or_else(T::infinity))
    }

    /// Analytic `grad U(q)`.
    pub fn gradient(&self, q: &[T]) -> Result<Vec<T>> {
        self.check_len(q)?;
        self.eval_inner(q, Order::Gradient).map(|e| e.gradient).ok_or_else(|| self.domain_error(q))
    }

    /// Analytic Hessian, row-major.
    pub fn hessian(&self, q: &[T]) -> Result<Vec<T>> {
        self.check_len(q)?;
        self.eval_inner(q, Order::Hessian).map(|e| e.hessian).ok_or_else(|| self.domain_error(q))
    }

    /// Value, gradient and Hessian in one pass.
    pub fn evaluate(&self, q: &[T]) -> Result<Evaluation<T>> {
        self.check_len(q)?;
        self.eval_inner(q, Order::Hessian).ok_or_else(|| self.domain_error(q))
    }

    /// Value and gradient in one pass.
    pub fn value_and_gradient(&self, q: &[T]) -> Result<(T, Vec<T>)> {
        self.check_len(q)?;
        self.eval_inner(q, Order::Gradient)
            .map(|e| (e.value, e.gradient))
            .ok_or_else(|| self.domain_error(q))
    }

    pub fn is_in_domain(&self, q: &[T]) -> Result<bool> {
        self.check_len(q)?;
        Ok(self.in_domain_unchecked(q))
    }

    fn domain_error(&self, q: &[T]) -> Error {
        Error::Domain(format!(
            "{} at q = {:?}",
            self.family_name(),
            q.iter().map(|v| v.to_f64_lossy()).collect::<Vec<_>>()
        ))
    }

    fn in_domain_unchecked(&self, q: &[T]) -> bool {
        if q.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match &self.family {
            Family::PolyConfine { .. } => true,
            Family::SingularPair1D { .. } => q[0] > T::zero(),
            Family::InteractingSystem { .. } | Family::UserComposite { .. } => {
                if !self.has_pair_terms() {
                    return true;
                }
                if self.d == 1 {
                    q.windows(2).all(|w| w[0] < w[1])
                } else {
                    for i in 0..self.n {
                        for j in (i + 1)..self.n {
                            if self.pair_dist_sq(q, i, j) == T::zero() {
                                return false;
                            }
                        }
                    }
                    true
                }
            }
        }
    }

    fn pair_dist_sq(&self, q: &[T], i: usize, j: usize) -> T {
        let d = self.d;
        (0..d).fold(T::zero(), |acc, k| {
            let x = q[i * d + k] - q[j * d + k];
            acc + x * x
        })
    }

    fn eval_inner(&self, q: &[T], order: Order) -> Option<Evaluation<T>> {
        if !self.in_domain_unchecked(q) {
            return None;
        }
        let dim = self.dim();
        let mut acc = Accumulator {
            dim,
            value: T::zero(),
            gradient: if order != Order::Value { vec![T::zero(); dim] } else { Vec::new() },
            hessian: if order == Order::Hessian { vec![T::zero(); dim * dim] } else { Vec::new() },
            order,
        };
        match &self.family {
            Family::PolyConfine { a, alpha } => {
                let term = PowerLaw::new(*a, *alpha);
                acc.radial(&term, q, &(0..dim).collect::<Vec<_>>());
            }
            Family::SingularPair1D { a, alpha, b, beta } => {
                let x = q[0];
                let v = *a * x.powf(*alpha) + *b * x.powf(-*beta);
                acc.value = v;
                if order != Order::Value {
                    acc.gradient[0] = *a * *alpha * x.powf(*alpha - T::one())
                        - *b * *beta * x.powf(-*beta - T::one());
                }
                if order == Order::Hessian {
                    acc.hessian[0] = *a * *alpha * (*alpha - T::one()) * x.powf(*alpha - lit(2.0))
                        + *b * *beta * (*beta + T::one()) * x.powf(-*beta - lit(2.0));
                }
            }
            Family::InteractingSystem { a, alpha, b, beta, c1, attract_power } => {
                let confine = [PowerLaw::new(*a, *alpha)];
                let pair = [PowerLaw::new(*b, -*beta), PowerLaw::new(-*c1, -*attract_power)];
                self.accumulate_particles(&mut acc, q, &confine, &pair);
            }
            Family::UserComposite { confine, pair } => {
                self.accumulate_particles(&mut acc, q, confine, pair);
            }
        }
        if !acc.value.is_finite() {
            return None;
        }
        Some(Evaluation { value: acc.value, gradient: acc.gradient, hessian: acc.hessian })
    }

    fn accumulate_particles(
        &self,
        acc: &mut Accumulator<T>,
        q: &[T],
        confine: &[PowerLaw<T>],
        pair: &[PowerLaw<T>],
    ) {
        let d = self.d;
        for i in 0..self.n {
            let idx: Vec<usize> = (i * d..(i + 1) * d).collect();
            for term in confine {
                acc.radial(term, q, &idx);
            }
        }
        if pair.is_empty() {
            return;
        }
        let mut rel = vec![T::zero(); d];
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                for k in 0..d {
                    rel[k] = q[i * d + k] - q[j * d + k];
                }
                for term in pair {
                    acc.pair(term, &rel, i, j, d);
                }
                acc.value += self.pair_shift;
            }
        }
    }
}

struct Accumulator<T> {
    dim: usize,
    value: T,
    gradient: Vec<T>,
    hessian: Vec<T>,
    order: Order,
}

impl<T: Scalar> Accumulator<T> {
    /// Adds `f(|x|)` where `x = q[idx]`.
    fn radial(&mut self, term: &PowerLaw<T>, q: &[T], idx: &[usize]) {
        let r2 = idx.iter().fold(T::zero(), |a, &k| a + q[k] * q[k]);
        let r = r2.sqrt();
        self.value += term.value(r);
        if self.order == Order::Value {
            return;
        }
        let g = term.d1_over_r(r);
        if r > T::zero() {
            for &k in idx {
                self.gradient[k] += g * q[k];
            }
        }
        if self.order == Order::Hessian {
            let o = term.outer_coef(r);
            for &k in idx {
                self.hessian[k * self.dim + k] += g;
                if r > T::zero() && o != T::zero() {
                    for &l in idx {
                        self.hessian[k * self.dim + l] += o * q[k] * q[l];
                    }
                }
            }
        }
    }

    /// Adds `f(|q_i - q_j|)` given `rel = q_i - q_j` (nonzero).
    fn pair(&mut self, term: &PowerLaw<T>, rel: &[T], i: usize, j: usize, d: usize) {
        let r = norm_sq(rel).sqrt();
        self.value += term.value(r);
        if self.order == Order::Value {
            return;
        }
        let g = term.d1_over_r(r);
        for k in 0..d {
            self.gradient[i * d + k] += g * rel[k];
            self.gradient[j * d + k] -= g * rel[k];
        }
        if self.order == Order::Hessian {
            let o = term.outer_coef(r);
            let n = self.dim;
            for k in 0..d {
                for l in 0..d {
                    let mut m = o * rel[k] * rel[l];
                    if k == l {
                        m += g;
                    }
                    self.hessian[(i * d + k) * n + (i * d + l)] += m;
                    self.hessian[(j * d + k) * n + (j * d + l)] += m;
                    self.hessian[(i * d + k) * n + (j * d + l)] -= m;
                    self.hessian[(j * d + k) * n + (i * d + l)] -= m;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_asymmetry;
    use approx::assert_relative_eq;

    fn sp(a: f64, alpha: f64, b: f64, beta: f64) -> PotentialModel<f64> {
        PotentialModel::singular_1d(a, alpha, b, beta).unwrap()
    }

    #[test]
    fn singular_values_and_derivatives() {
        let m = sp(1.0, 2.0, 1.0, 1.0);
        assert_eq!(m.potential(&[1.0]).unwrap(), 2.0);
        assert_eq!(m.gradient(&[1.0]).unwrap(), vec![1.0]);
        assert_eq!(m.hessian(&[1.0]).unwrap(), vec![4.0]);
        assert_eq!(m.potential(&[-0.5]).unwrap(), f64::INFINITY);
        assert!(m.is_in_domain(&[0.1]).unwrap());
        assert!(!m.is_in_domain(&[0.0]).unwrap());
        assert!(matches!(m.gradient(&[0.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let m = sp(1.0, 2.0, 1.0, 1.0);
        assert_eq!(m.potential(&[1.0, 2.0]), Err(Error::Dimension { expected: 1, got: 2 }));
    }

    #[test]
    fn quadratic_confinement_has_identity_hessian() {
        for (n, d) in [(1, 1), (2, 3), (3, 2)] {
            let m = PotentialModel::poly_confine(1.0, 2.0, n, d).unwrap();
            let q: Vec<f64> = (0..n * d).map(|k| 0.3 * k as f64 - 0.7).collect();
            let h = m.hessian(&q).unwrap();
            for i in 0..n * d {
                for j in 0..n * d {
                    let expect = if i == j { 2.0 } else { 0.0 };
                    assert_relative_eq!(h[i * n * d + j], expect, epsilon = 1e-12);
                }
            }
            let zero = vec![0.0; n * d];
            assert_eq!(m.gradient(&zero).unwrap(), zero);
        }
    }

    #[test]
    fn lennard_jones_force_vanishes_at_minimum() {
        let m = PotentialModel::lennard_jones(2, 3, 0.0, 2.0, 1.0, 1.0).unwrap();
        let r = 2f64.powf(1.0 / 6.0);
        let q = [0.0, 0.0, 0.0, r, 0.0, 0.0];
        let g = m.gradient(&q).unwrap();
        assert!(g.iter().all(|x| x.abs() < 1e-12), "{g:?}");
        // pair term shifted to zero at its minimum
        assert!(m.potential(&q).unwrap().abs() < 1e-12);
    }

    #[test]
    fn interacting_domain_charts() {
        let m1 = PotentialModel::lennard_jones(2, 1, 1.0, 2.0, 1.0, 1.0).unwrap();
        assert_eq!(m1.potential(&[1.0, 0.5]).unwrap(), f64::INFINITY);
        assert_eq!(m1.potential(&[0.5, 0.5]).unwrap(), f64::INFINITY);
        assert!(m1.potential(&[0.0, 1.0]).unwrap().is_finite());
        let m2 = PotentialModel::lennard_jones(2, 2, 1.0, 2.0, 1.0, 1.0).unwrap();
        assert!(!m2.is_in_domain(&[0.3, 0.1, 0.3, 0.1]).unwrap());
        assert!(m2.is_in_domain(&[0.3, 0.1, 0.1, 0.3]).unwrap());
    }

    #[test]
    fn hessians_are_exactly_symmetric() {
        let m = PotentialModel::lennard_jones(3, 2, 1.0, 4.0, 1.0, 1.0).unwrap();
        let q = [0.1, -0.4, 0.9, 0.2, -0.6, 0.7];
        let h = m.hessian(&q).unwrap();
        assert_eq!(max_asymmetry(&h, 6), 0.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(PotentialModel::<f64>::singular_1d(1.0, 2.0, -1.0, 1.0).is_err());
        assert!(PotentialModel::<f64>::new(Family::PolyConfine { a: 1.0, alpha: 2.0 }, 0, 1).is_err());
        assert!(PotentialModel::<f64>::new(
            Family::SingularPair1D { a: 1.0, alpha: 2.0, b: 1.0, beta: 1.0 },
            2,
            1
        )
        .is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let m = PotentialModel::<f32>::singular_1d(1.0, 2.0, 1.0, 1.0).unwrap();
        assert_eq!(m.potential(&[1.0]).unwrap(), 2.0f32);
        assert_eq!(m.hessian(&[1.0]).unwrap(), vec![4.0f32]);
    }
}

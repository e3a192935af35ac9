//! Numerical evidence for admissibility.
//!
//! Asymptotic conditions cannot be proven from finitely many points. The
//! probes evaluate `|grad U|` and `|hess U| / |grad U|^2` along geometric
//! escape sequences and report monotone trends over the tail of each
//! sequence, together with an estimate of the Gibbs integral `int e^{-U/T}`.
//! Every verdict is numerical evidence, not a proof.

use rand::Rng;

use super::PotentialModel;
use crate::diagnostics::quadrature::{integrate_sublevel, Tolerance};
use crate::linalg::{frobenius, norm};
use crate::rng::stream_rng;
use crate::sampling::EscapeRoute;
use crate::{lit, Error, Result, Scalar};

/// Trend window: conditions are judged on the last five probe points.
const TAIL: usize = 5;

/// What a probe sequence is testing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeKind {
    /// `U -> inf` along the sequence: `|grad U|` must grow and the curvature ratio shrink.
    Escape,
    /// `U` stays bounded while approaching an interior point: the Hessian must stay bounded.
    Regularity,
}

#[derive(Debug, Clone)]
pub struct ProbeSpec {
    pub routes: Vec<(EscapeRoute, ProbeKind)>,
    /// Points per sequence (at least 8).
    pub points: usize,
    /// Geometric ratio between consecutive scales.
    pub ratio: f64,
    /// Monte Carlo sample count used when `N*d > 3`.
    pub mc_samples: usize,
    pub seed: u64,
}

impl ProbeSpec {
    /// Escape sequences toward every family-specific route plus interior smoothness probes.
    pub fn default_for<T: Scalar>(model: &PotentialModel<T>) -> Self {
        let mut routes: Vec<(EscapeRoute, ProbeKind)> =
            model.escape_routes().into_iter().map(|r| (r, ProbeKind::Escape)).collect();
        routes.extend(model.regularity_routes().into_iter().map(|r| (r, ProbeKind::Regularity)));
        Self { routes, points: 12, ratio: 2.0, mc_samples: 200_000, seed: 0x5eed }
    }
}

#[derive(Debug, Clone)]
pub struct ProbeSequence {
    pub label: String,
    pub kind: ProbeKind,
    pub u: Vec<f64>,
    pub grad_norm: Vec<f64>,
    pub hess_norm: Vec<f64>,
    /// `|hess U| / |grad U|^2` (Frobenius norm of the Hessian).
    pub ratio: Vec<f64>,
    /// False when a point left the domain or `U` failed to increase strictly.
    pub valid: bool,
    pub note: String,
    pub gradient_growing: bool,
    pub ratio_shrinking: bool,
    pub hessian_bounded: bool,
}

impl ProbeSequence {
    pub fn passed(&self) -> bool {
        match self.kind {
            ProbeKind::Escape => self.valid && self.gradient_growing && self.ratio_shrinking,
            ProbeKind::Regularity => self.valid && self.hessian_bounded,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integrability {
    pub value: f64,
    pub std_error: Option<f64>,
    pub converged: bool,
    pub method: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Verdicts {
    pub integrable: bool,
    pub gradient_growth: bool,
    pub curvature_ratio: bool,
    pub regularity: bool,
}

impl Verdicts {
    pub fn all(&self) -> bool {
        self.integrable && self.gradient_growth && self.curvature_ratio && self.regularity
    }
}

#[derive(Debug, Clone)]
pub struct AdmissibilityReport {
    pub integrability: Integrability,
    pub probes: Vec<ProbeSequence>,
    pub verdicts: Verdicts,
    pub evidence_note: &'static str,
}

impl AdmissibilityReport {
    pub fn passed(&self) -> bool {
        self.verdicts.all()
    }
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0])
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn run_sequence<T: Scalar>(
    model: &PotentialModel<T>,
    route: EscapeRoute,
    kind: ProbeKind,
    spec: &ProbeSpec,
) -> ProbeSequence {
    let base = model.reference_config();
    let step = spec.ratio.ln();
    let mut seq = ProbeSequence {
        label: route.label(),
        kind,
        u: Vec::new(),
        grad_norm: Vec::new(),
        hess_norm: Vec::new(),
        ratio: Vec::new(),
        valid: true,
        note: String::new(),
        gradient_growing: false,
        ratio_shrinking: false,
        hessian_bounded: false,
    };
    for k in 0..spec.points {
        let q = model.route_point(route, &base, lit(step * k as f64));
        match model.evaluate(&q) {
            Ok(ev) => {
                let g = norm(&ev.gradient).to_f64_lossy();
                let h = frobenius(&ev.hessian).to_f64_lossy();
                seq.u.push(ev.value.to_f64_lossy());
                seq.grad_norm.push(g);
                seq.hess_norm.push(h);
                seq.ratio.push(h / (g * g));
            }
            Err(_) => {
                seq.valid = false;
                seq.note = format!("probe point {k} outside the domain");
                return seq;
            }
        }
    }
    let finite = seq.u.iter().chain(&seq.grad_norm).chain(&seq.hess_norm).all(|v| v.is_finite());
    if !finite {
        seq.valid = false;
        seq.note = "non-finite values along the sequence".into();
        return seq;
    }
    let tail = seq.u.len().saturating_sub(TAIL);
    match kind {
        ProbeKind::Escape => {
            if !strictly_increasing(&seq.u) {
                seq.valid = false;
                seq.note = "U is not strictly increasing along the sequence".into();
            }
            seq.gradient_growing = strictly_increasing(&seq.grad_norm[tail..]);
            seq.ratio_shrinking = strictly_decreasing(&seq.ratio[tail..]);
        }
        ProbeKind::Regularity => {
            let h = &seq.hess_norm[tail..];
            // unbounded curvature shows up as sustained growth of the Hessian
            let growing = strictly_increasing(h) && h[h.len() - 1] > 2.0 * h[0];
            seq.hessian_bounded = !growing;
        }
    }
    seq
}

/// Probes the asymptotic and regularity conditions and estimates `int_O e^{-U/T} dq`.
pub fn probe_admissibility<T: Scalar>(
    model: &PotentialModel<T>,
    temperature: f64,
    spec: &ProbeSpec,
) -> Result<AdmissibilityReport> {
    if !(temperature > 0.0) {
        return Err(Error::Config("temperature must be positive".into()));
    }
    if spec.points < 8 {
        return Err(Error::Config("probe sequences need at least 8 points".into()));
    }
    let probes: Vec<ProbeSequence> =
        spec.routes.iter().map(|&(r, k)| run_sequence(model, r, k, spec)).collect();
    let escapes: Vec<&ProbeSequence> =
        probes.iter().filter(|p| p.kind == ProbeKind::Escape && p.valid).collect();
    let integrability = gibbs_integral(model, temperature, spec)?;
    let verdicts = Verdicts {
        integrable: integrability.converged && integrability.value.is_finite() && integrability.value > 0.0,
        gradient_growth: !escapes.is_empty() && escapes.iter().all(|p| p.gradient_growing),
        curvature_ratio: !escapes.is_empty() && escapes.iter().all(|p| p.ratio_shrinking),
        regularity: probes
            .iter()
            .filter(|p| p.kind == ProbeKind::Regularity)
            .all(|p| p.valid && p.hessian_bounded),
    };
    Ok(AdmissibilityReport {
        integrability,
        probes,
        verdicts,
        evidence_note: "numerical evidence from finite probe sequences, not a proof",
    })
}

/// `int_O e^{-U/T} dq`: nested adaptive quadrature for `N*d <= 3`, otherwise
/// importance sampling with a heavy-tailed (Student-t, 3 dof) proposal.
pub(crate) fn gibbs_integral<T: Scalar>(model: &PotentialModel<T>, temperature: f64, spec: &ProbeSpec) -> Result<Integrability> {
    let dim = model.dim();
    let u = |x: &[f64]| -> f64 {
        let q: Vec<T> = x.iter().map(|&v| lit(v)).collect();
        model.potential(&q).map(|v| v.to_f64_lossy()).unwrap_or(f64::INFINITY)
    };
    let center: Vec<f64> = model.reference_config().iter().map(|v| v.to_f64_lossy()).collect();
    if dim <= 3 {
        let cap = 60.0 * temperature + u(&center).max(0.0);
        let tol = match dim {
            1 => Tolerance { abs: 1e-14, rel: 1e-10, max_panels: 4000 },
            2 => Tolerance { abs: 1e-12, rel: 1e-8, max_panels: 400 },
            _ => Tolerance { abs: 1e-10, rel: 1e-6, max_panels: 60 },
        };
        let r = integrate_sublevel(&u, &|_x, v| (-v / temperature).exp(), &center, cap, tol);
        return Ok(Integrability {
            value: r.value,
            std_error: None,
            converged: r.converged,
            method: "adaptive Gauss-Kronrod",
        });
    }
    let mut rng = stream_rng(spec.seed, 0);
    let nu = 3.0;
    let scale = 1.0;
    let log_norm = ln_gamma((nu + dim as f64) / 2.0)
        - ln_gamma(nu / 2.0)
        - 0.5 * dim as f64 * (nu * std::f64::consts::PI).ln()
        - dim as f64 * f64::ln(scale);
    let chi = rand_distr::ChiSquared::new(nu).map_err(|e| Error::Sampling(e.to_string()))?;
    let (mut sum, mut sum_sq) = (0.0f64, 0.0f64);
    let n = spec.mc_samples.max(1000);
    for _ in 0..n {
        let w: f64 = rng.sample(chi);
        let factor = (nu / w).sqrt();
        let z: Vec<f64> = (0..dim).map(|_| f64::sample_normal(&mut rng) * factor * scale).collect();
        let x: Vec<f64> = center.iter().zip(&z).map(|(c, zi)| c + zi).collect();
        let r2: f64 = z.iter().map(|v| v * v).sum::<f64>() / (scale * scale);
        let log_g = log_norm - 0.5 * (nu + dim as f64) * (1.0 + r2 / nu).ln();
        let uv = u(&x);
        let weight = if uv.is_finite() { (-uv / temperature - log_g).exp() } else { 0.0 };
        sum += weight;
        sum_sq += weight * weight;
    }
    let mean = sum / n as f64;
    let var = (sum_sq / n as f64 - mean * mean).max(0.0);
    let se = (var / n as f64).sqrt();
    Ok(Integrability {
        value: mean,
        std_error: Some(se),
        converged: mean > 0.0 && se < 0.1 * mean,
        method: "importance sampling (Student-t proposal)",
    })
}

fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quartic_confinement_passes() {
        let m = PotentialModel::poly_confine(1.0, 4.0, 1, 1).unwrap();
        let r = probe_admissibility(&m, 1.0, &ProbeSpec::default_for(&m)).unwrap();
        assert!(r.passed(), "{r:#?}");
        // int e^{-q^4} dq = 2 Gamma(5/4)
        assert_relative_eq!(r.integrability.value, 2.0 * statrs::function::gamma::gamma(1.25), max_relative = 1e-8);
    }

    #[test]
    fn singular_ratio_matches_asymptotics() {
        let (b, beta) = (1.0, 2.0);
        let m = PotentialModel::singular_1d(1.0, 4.0, b, beta).unwrap();
        let spec = ProbeSpec { points: 16, ..ProbeSpec::default_for(&m) };
        let r = probe_admissibility(&m, 0.5, &spec).unwrap();
        assert!(r.passed());
        let inward = r.probes.iter().find(|p| p.label == "inward").unwrap();
        let q_last = 2f64.powi(-15);
        let predicted = (beta + 1.0) / (b * beta) * q_last.powf(beta);
        assert_relative_eq!(*inward.ratio.last().unwrap(), predicted, max_relative = 1e-6);
    }

    #[test]
    fn linear_growth_fails_gradient_condition() {
        let m = PotentialModel::poly_confine(1.0, 1.0, 1, 1).unwrap();
        let r = probe_admissibility(&m, 1.0, &ProbeSpec::default_for(&m)).unwrap();
        assert!(!r.verdicts.gradient_growth);
        assert!(!r.passed());
    }

    #[test]
    fn three_halves_power_has_unbounded_curvature_at_origin() {
        // U = |q|^{3/2}: |U''|/|U'|^2 = q^{-3/2}/3 blows up as q -> 0 with U bounded
        let m = PotentialModel::poly_confine(1.0, 1.5, 1, 1).unwrap();
        let r = probe_admissibility(&m, 1.0, &ProbeSpec::default_for(&m)).unwrap();
        let reg = r.probes.iter().find(|p| p.kind == ProbeKind::Regularity).unwrap();
        let q = 2f64.powi(-11);
        assert_relative_eq!(*reg.ratio.last().unwrap(), q.powf(-1.5) / 3.0, max_relative = 1e-9);
        assert!(!reg.hessian_bounded);
        assert!(!r.passed());
    }

    #[test]
    fn non_escaping_sequence_is_invalid() {
        let m = PotentialModel::poly_confine(1.0, 4.0, 1, 2).unwrap();
        let spec = ProbeSpec {
            routes: vec![(EscapeRoute::Inward, ProbeKind::Escape)],
            ..ProbeSpec::default_for(&m)
        };
        let r = probe_admissibility(&m, 1.0, &spec).unwrap();
        assert!(!r.probes[0].valid);
    }
}

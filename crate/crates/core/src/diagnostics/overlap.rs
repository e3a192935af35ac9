//! Empirical overlap of transition laws from a level set of `W`.

use crate::dynamics::{ensemble, SdeConfig, SimulateOptions};
use crate::lyapunov::LyapunovFunction;
use crate::potential::{PhaseState, PotentialModel};
use crate::rng::{derive_seed, stream_rng};
use crate::{Error, Result};
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapSpec {
    /// Transition time.
    pub t0: f64,
    pub replicas: usize,
    /// Cells per axis of the `(q_0, p_0)` histogram.
    pub bins: usize,
    /// Overlap below this fails the check.
    pub floor: f64,
}

impl Default for OverlapSpec {
    fn default() -> Self {
        Self { t0: 1.0, replicas: 2000, bins: 20, floor: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapReport {
    /// `sum_cells min_s P_s(cell)`.
    pub overlap: f64,
    pub starts: usize,
    pub replicas: usize,
    /// Replicas lost to step failures.
    pub failed: usize,
    /// Fewer than ten replicas per occupied cell on average.
    pub unreliable: bool,
    pub passed: bool,
}

/// Draws `count` states with `log W <= log_r` (rejection from low-energy
/// configurations and isotropic momenta).
pub fn level_set_starts(lf: &LyapunovFunction<f64>, log_r: f64, count: usize, seed: u64) -> Result<Vec<PhaseState<f64>>> {
    let model = lf.model();
    let level = log_r / lf.params().b;
    let mut rng = stream_rng(seed, 0);
    let mut out = Vec::with_capacity(count);
    let mut tries = 0usize;
    while out.len() < count {
        tries += 1;
        if tries > 10_000 * count.max(1) {
            return Err(Error::Sampling(format!("no states found below log W = {log_r}")));
        }
        let Some(q) = model.sample_below_level(&mut rng, level) else { continue };
        let u = model.potential(&q)?;
        let room = (level - u).max(0.0);
        let z: Vec<f64> = (0..model.dim()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        let radius = (2.0 * room).sqrt() * rand::Rng::random::<f64>(&mut rng);
        let x = PhaseState::new(q, z.iter().map(|v| v / norm * radius).collect());
        if lf.log_w(&x)? <= log_r {
            out.push(x);
        }
    }
    Ok(out)
}

/// Runs `spec.replicas` trajectories of length `t0` from each start and
/// measures the common mass of the `(q_0, p_0)` histograms.
pub fn minorization_overlap(
    model: &PotentialModel<f64>,
    sde: &SdeConfig<f64>,
    starts: &[PhaseState<f64>],
    spec: &OverlapSpec,
) -> Result<OverlapReport> {
    if starts.len() < 2 || spec.replicas == 0 || spec.bins == 0 {
        return Err(Error::Diagnostics("overlap needs two starts, replicas and bins".into()));
    }
    let n_steps = (spec.t0 / sde.dt).round().max(1.0) as u64;
    let mut finals: Vec<Vec<(f64, f64)>> = Vec::with_capacity(starts.len());
    let mut failed = 0;
    for (s, x0) in starts.iter().enumerate() {
        let cfg = sde.clone().with_steps(n_steps).with_seed(derive_seed(sde.seed, s as u64)).with_sample_every(n_steps);
        let runs = ensemble(model, &cfg, std::slice::from_ref(x0), spec.replicas, &SimulateOptions::default())?;
        let mut pts = Vec::with_capacity(spec.replicas);
        for r in runs {
            match r {
                Ok(tr) => pts.push((tr.final_state.q[0], tr.final_state.p[0])),
                Err(_) => failed += 1,
            }
        }
        if pts.is_empty() {
            return Err(Error::Diagnostics(format!("every replica from start {s} failed")));
        }
        finals.push(pts);
    }
    let all = finals.iter().flatten();
    let (mut qlo, mut qhi, mut plo, mut phi) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(q, p) in all {
        qlo = qlo.min(q);
        qhi = qhi.max(q);
        plo = plo.min(p);
        phi = phi.max(p);
    }
    let b = spec.bins;
    let cell = |x: f64, lo: f64, hi: f64| {
        if hi > lo {
            (((x - lo) / (hi - lo) * b as f64) as usize).min(b - 1)
        } else {
            0
        }
    };
    let hists: Vec<Vec<f64>> = finals
        .iter()
        .map(|pts| {
            let mut h = vec![0.0; b * b];
            for &(q, p) in pts {
                h[cell(q, qlo, qhi) * b + cell(p, plo, phi)] += 1.0 / pts.len() as f64;
            }
            h
        })
        .collect();
    let overlap: f64 = (0..b * b).map(|k| hists.iter().map(|h| h[k]).fold(f64::INFINITY, f64::min)).sum();
    let occupied = (0..b * b).filter(|&k| hists.iter().any(|h| h[k] > 0.0)).count().max(1);
    Ok(OverlapReport {
        overlap,
        starts: starts.len(),
        replicas: spec.replicas,
        failed,
        unreliable: (spec.replicas as f64 / occupied as f64) < 10.0,
        passed: overlap >= spec.floor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_temperature_has_no_overlap() {
        let m = PotentialModel::poly_confine(0.5, 2.0, 1, 1).unwrap();
        let sde = SdeConfig::new(1.0, 0.0, 1e-2);
        let starts = vec![PhaseState::new(vec![0.5], vec![0.0]), PhaseState::new(vec![-0.5], vec![0.0])];
        let r = minorization_overlap(&m, &sde, &starts, &OverlapSpec { replicas: 50, ..Default::default() }).unwrap();
        assert_eq!(r.overlap, 0.0);
        assert!(!r.passed);
    }

    #[test]
    fn identical_starts_overlap_almost_fully() {
        let m = PotentialModel::poly_confine(0.5, 2.0, 1, 1).unwrap();
        let sde = SdeConfig::new(1.0, 1.0, 1e-2).with_seed(8);
        let x = PhaseState::new(vec![0.5], vec![0.0]);
        let spec = OverlapSpec { replicas: 4000, bins: 8, ..Default::default() };
        let r = minorization_overlap(&m, &sde, &[x.clone(), x], &spec).unwrap();
        assert!(r.overlap > 0.9, "{r:?}");
    }

    #[test]
    fn thermal_laws_overlap() {
        let m = PotentialModel::poly_confine(0.5, 2.0, 1, 1).unwrap();
        let sde = SdeConfig::new(1.0, 1.0, 1e-2).with_seed(3);
        let starts = vec![PhaseState::new(vec![0.5], vec![0.0]), PhaseState::new(vec![-0.5], vec![0.3])];
        let spec = OverlapSpec { replicas: 2000, bins: 10, ..Default::default() };
        let r = minorization_overlap(&m, &sde, &starts, &spec).unwrap();
        assert!(r.overlap > 0.3, "{r:?}");
    }

    #[test]
    fn starts_lie_in_level_set() {
        use crate::lyapunov::{select_params, LyapunovFunction, SelectOptions};
        let m = PotentialModel::poly_confine(1.0, 4.0, 1, 1).unwrap();
        let sde = SdeConfig::new(1.0, 1.0, 1e-2);
        let p = select_params(&m, &sde, 0.5, &SelectOptions { samples: 2000, ..Default::default() }).unwrap();
        let lf = LyapunovFunction::new(m, p).unwrap();
        let xs = level_set_starts(&lf, 5.0, 8, 1).unwrap();
        assert_eq!(xs.len(), 8);
        for x in &xs {
            assert!(lf.log_w(x).unwrap() <= 5.0);
        }
    }

    #[test]
    fn singular_level_set_overlaps_on_average() {
        use crate::lyapunov::{select_params, LyapunovFunction, SelectOptions};
        let m = PotentialModel::singular_1d(1.0, 4.0, 1.0, 2.0).unwrap();
        let sde = SdeConfig::new(1.0, 1.0, 1e-3);
        let b = 0.5;
        let p = select_params(&m, &sde, b, &SelectOptions { samples: 5000, ..Default::default() }).unwrap();
        let lf = LyapunovFunction::new(m.clone(), p).unwrap();
        // a single draw of four starts can land on nearly disjoint orbits, so average over draws
        let spec = OverlapSpec { replicas: 2000, bins: 10, ..Default::default() };
        let mean = (0..8u64)
            .map(|seed| {
                let starts = level_set_starts(&lf, b * 20.0, 4, seed).unwrap();
                minorization_overlap(&m, &sde.clone().with_seed(seed), &starts, &spec).unwrap().overlap
            })
            .sum::<f64>()
            / 8.0;
        assert!(mean > 0.01, "mean overlap {mean}");
    }
}

use proptest::prelude::*;

use slangevin_core::potential::PowerLaw;
use slangevin_core::rng::stream_rng;
use slangevin_core::{Family, PotentialModel};

fn families() -> Vec<PotentialModel<f64>> {
    vec![
        PotentialModel::poly_confine(1.0, 4.0, 2, 2).unwrap(),
        PotentialModel::singular_1d(1.0, 4.0, 1.0, 2.0).unwrap(),
        PotentialModel::lennard_jones(3, 2, 1.0, 2.0, 1.0, 1.0).unwrap(),
        PotentialModel::new(
            Family::InteractingSystem { a: 0.5, alpha: 4.0, b: 1.0, beta: 3.0, c1: 0.0, attract_power: 6.0 },
            3,
            1,
        )
        .unwrap(),
        PotentialModel::new(
            Family::UserComposite {
                confine: vec![PowerLaw::new(1.0, 2.0), PowerLaw::new(0.2, 4.0)],
                pair: vec![PowerLaw::new(0.5, -2.0)],
            },
            2,
            2,
        )
        .unwrap(),
    ]
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn derivatives_match_finite_differences() {
    for m in families() {
        let dim = m.dim();
        let (mut worst_g, mut worst_h): (f64, f64) = (0.0, 0.0);
        for i in 0..10_000u64 {
            let mut rng = stream_rng(5, i);
            let Some(q) = m.random_config(&mut rng, 0.7, 0.2) else { continue };
            let e = m.evaluate(&q).unwrap();
            // steps small against the nearest singular length scale
            let scale = q.iter().map(|v| v.abs()).fold(1.0, f64::max);
            let h = 1e-6 * scale.min(1.0) * min_gap(&m, &q).min(1.0);
            let mut fd_g = vec![0.0; dim];
            let mut fd_h = vec![0.0; dim * dim];
            for k in 0..dim {
                let (mut a, mut b) = (q.clone(), q.clone());
                a[k] += h;
                b[k] -= h;
                fd_g[k] = (m.potential(&a).unwrap() - m.potential(&b).unwrap()) / (2.0 * h);
                let (ga, gb) = (m.gradient(&a).unwrap(), m.gradient(&b).unwrap());
                for j in 0..dim {
                    fd_h[j * dim + k] = (ga[j] - gb[j]) / (2.0 * h);
                }
            }
            let dg: Vec<f64> = fd_g.iter().zip(&e.gradient).map(|(a, b)| a - b).collect();
            let dh: Vec<f64> = fd_h.iter().zip(&e.hessian).map(|(a, b)| a - b).collect();
            worst_g = worst_g.max(norm(&dg) / norm(&e.gradient).max(1.0));
            worst_h = worst_h.max(norm(&dh) / norm(&e.hessian).max(1.0));
        }
        assert!(worst_g <= 1e-6, "{}: gradient error {worst_g:e}", m.family_name());
        assert!(worst_h <= 1e-5, "{}: hessian error {worst_h:e}", m.family_name());
    }
}

/// Smallest pair distance, or the distance to the wall for the half line.
fn min_gap(m: &PotentialModel<f64>, q: &[f64]) -> f64 {
    if matches!(m.family(), Family::SingularPair1D { .. }) {
        return q[0];
    }
    let d = m.d();
    let mut gap = f64::INFINITY;
    for i in 0..m.n() {
        for j in i + 1..m.n() {
            let r: f64 = (0..d).map(|k| (q[i * d + k] - q[j * d + k]).powi(2)).sum::<f64>().sqrt();
            gap = gap.min(r);
        }
    }
    gap
}

fn swap_particles(q: &[f64], d: usize, i: usize, j: usize) -> Vec<f64> {
    let mut out = q.to_vec();
    for k in 0..d {
        out.swap(i * d + k, j * d + k);
    }
    out
}

fn interacting_plane() -> PotentialModel<f64> {
    PotentialModel::new(
        Family::InteractingSystem { a: 1.0, alpha: 2.0, b: 1.0, beta: 12.0, c1: 1.0, attract_power: 6.0 },
        3,
        2,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn finite_value_iff_in_domain(q in prop::collection::vec(-2.0f64..2.0, 1..=1), q3 in prop::collection::vec(-2.0f64..2.0, 3)) {
        let single = PotentialModel::singular_1d(1.0, 4.0, 1.0, 2.0).unwrap();
        prop_assert_eq!(single.potential(&q).unwrap().is_finite(), single.is_in_domain(&q).unwrap());
        let chain = PotentialModel::new(
            Family::InteractingSystem { a: 0.5, alpha: 4.0, b: 1.0, beta: 3.0, c1: 0.0, attract_power: 6.0 },
            3,
            1,
        )
        .unwrap();
        prop_assert_eq!(chain.potential(&q3).unwrap().is_finite(), chain.is_in_domain(&q3).unwrap());
        let poly = PotentialModel::poly_confine(1.0, 4.0, 3, 1).unwrap();
        prop_assert!(poly.potential(&q3).unwrap().is_finite() && poly.is_in_domain(&q3).unwrap());
    }

    #[test]
    fn coincident_particles_are_outside(x in -2.0f64..2.0, y in -2.0f64..2.0, z in -2.0f64..2.0, w in -2.0f64..2.0) {
        let m = interacting_plane();
        let q = [x, y, x, y, z, w];
        prop_assert!(!m.is_in_domain(&q).unwrap());
        prop_assert_eq!(m.potential(&q).unwrap(), f64::INFINITY);
    }

    #[test]
    fn swapping_particles_leaves_energy_unchanged(q in prop::collection::vec(-2.0f64..2.0, 6), i in 0usize..3, j in 0usize..3) {
        let m = interacting_plane();
        let u = m.potential(&q).unwrap();
        prop_assume!(u.is_finite() && i != j);
        let swapped = swap_particles(&q, 2, i, j);
        let us = m.potential(&swapped).unwrap();
        prop_assert!((u - us).abs() <= 1e-12 * u.abs().max(1.0), "{} vs {}", u, us);
        let (g, gs) = (m.gradient(&q).unwrap(), m.gradient(&swapped).unwrap());
        let g_back = swap_particles(&gs, 2, i, j);
        for (a, b) in g.iter().zip(&g_back) {
            prop_assert!((a - b).abs() <= 1e-12 * norm(&g).max(1.0));
        }
    }
}

#[test]
fn lennard_jones_attraction_is_negligible_against_repulsion() {
    // two particles at +-r/2 in the plane: U = confinement + c0 r^-12 + phi_I(r)
    let (a, alpha, c0, c1) = (1.0, 2.0, 1.0, 1.0);
    let m = PotentialModel::lennard_jones(2, 2, a, alpha, c0, c1).unwrap();
    let mut last = f64::INFINITY;
    for k in 1..=8 {
        let r = 0.5f64.powi(k);
        let q = [r / 2.0, 0.0, -r / 2.0, 0.0];
        let confine = 2.0 * a * (r / 2.0).powf(alpha);
        let phi_i = m.potential(&q).unwrap() - confine - c0 * r.powi(-12);
        let ratio = r.powi(12) * phi_i.abs();
        assert!(ratio < last, "r = {r}: {ratio} after {last}");
        last = ratio;
    }
    assert!(last < 1e-12, "{last}");
}

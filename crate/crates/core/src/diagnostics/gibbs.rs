//! Quadrature reference for the position marginal of the Gibbs measure.

use rand::Rng;

use super::quadrature::{integrate, integrate_sublevel, sublevel_segments, QuadResult, Tolerance};
use crate::potential::PotentialModel;
use crate::{Error, Result};

/// Sub-cells per histogram bin in the inverse-CDF table.
const CDF_REFINE: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Truncation level in units of `T`: the reference lives on `{U < u_cap_factor T}`.
    pub u_cap_factor: f64,
    /// Bins per axis.
    pub bins: usize,
    pub tol: Tolerance,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { u_cap_factor: 60.0, bins: 100, tol: Tolerance { abs: 1e-14, rel: 1e-11, max_panels: 2000 } }
    }
}

/// Normalised position density `e^{-U/T} / Z_q` on a rectangular grid (one or two axes).
#[derive(Debug, Clone)]
pub struct GibbsReference {
    pub temperature: f64,
    pub z_q: f64,
    pub z_q_error: f64,
    pub u_cap: f64,
    /// Rough bound on the mass outside `{U < u_cap}` relative to `Z_q`.
    pub tail_estimate: f64,
    pub converged: bool,
    /// Bin edges per axis.
    pub edges: Vec<Vec<f64>>,
    /// Bin probabilities, row-major over the axes; they sum to one.
    pub mass: Vec<f64>,
    /// Fine `(x, F(x))` table of the first-axis marginal.
    cdf: Vec<(f64, f64)>,
}

/// `(2 pi T)^{Nd/2}`, the momentum normaliser.
pub fn z_p(temperature: f64, nd: usize) -> f64 {
    (2.0 * std::f64::consts::PI * temperature).powf(nd as f64 / 2.0)
}

fn weight(model: &PotentialModel<f64>, q: &[f64], temp: f64, cap: f64) -> f64 {
    match model.potential(q) {
        Ok(u) if u.is_finite() && u < cap => (-u / temp).exp(),
        _ => 0.0,
    }
}

/// Builds the reference for a model with `N d <= 2`.
pub fn gibbs_reference(model: &PotentialModel<f64>, temperature: f64, spec: &GridSpec) -> Result<GibbsReference> {
    if !(temperature > 0.0) {
        return Err(Error::Config("temperature must be positive".into()));
    }
    let dim = model.dim();
    if dim > 2 {
        return Err(Error::Config(format!("quadrature reference needs N d <= 2, got {dim}")));
    }
    if spec.bins < 2 {
        return Err(Error::Config("diagnostics.bins must be at least 2".into()));
    }
    let center = model.reference_config();
    let u_center = model.potential(&center)?;
    let cap = spec.u_cap_factor * temperature + u_center.max(0.0);
    let u = |x: &[f64]| model.potential(x).unwrap_or(f64::INFINITY);

    let zq = integrate_sublevel(&u, &|_x, v| (-v / temperature).exp(), &center, cap, spec.tol);
    if !(zq.value > 0.0 && zq.value.is_finite()) {
        return Err(Error::Quadrature(format!("normaliser is {} ({} panels)", zq.value, zq.panels)));
    }

    // bounding box of the truncated sublevel set
    let axis_line = |axis: usize, base: &[f64]| {
        let base = base.to_vec();
        move |x: f64| {
            let mut q = base.clone();
            q[axis] = x;
            u(&q)
        }
    };
    let span = |segs: &[(f64, f64)]| {
        segs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(a, b)| (lo.min(a), hi.max(b)))
    };
    let mut edges = Vec::with_capacity(dim);
    for axis in 0..dim {
        let (mut lo, mut hi) = span(&sublevel_segments(axis_line(axis, &center), center[axis], cap, 800));
        if dim == 2 {
            // sweep fibres across a widened range of the other coordinate
            let other = 1 - axis;
            let (a, b) = span(&sublevel_segments(axis_line(other, &center), center[other], cap, 800));
            let (a, b) = (a - 0.5 * (b - a), b + 0.5 * (b - a));
            for k in 0..=400 {
                let mut base = center.clone();
                base[other] = a + (b - a) * k as f64 / 400.0;
                let line = axis_line(axis, &base);
                // seed each fibre at its lowest point on a coarse scan
                let (l0, h0) = (lo.min(center[axis]), hi.max(center[axis]));
                let seed = (0..=200)
                    .map(|j| l0 + (h0 - l0) * j as f64 / 200.0)
                    .min_by(|x, y| line(*x).total_cmp(&line(*y)))
                    .unwrap_or(center[axis]);
                if line(seed) < cap {
                    let (l, h) = span(&sublevel_segments(&line, seed, cap, 200));
                    lo = lo.min(l);
                    hi = hi.max(h);
                }
            }
        }
        if !(lo < hi) {
            return Err(Error::Quadrature(format!("empty sublevel set along axis {axis}")));
        }
        edges.push((0..=spec.bins).map(|k| lo + (hi - lo) * k as f64 / spec.bins as f64).collect::<Vec<f64>>());
    }

    let cell_tol = Tolerance { abs: spec.tol.abs * 1e-2, rel: spec.tol.rel, max_panels: 400 };
    let mut converged = zq.converged;
    let mut mass;
    let cdf;
    if dim == 1 {
        let e = &edges[0];
        let n_fine = spec.bins * CDF_REFINE;
        let fine: Vec<f64> = (0..=n_fine).map(|k| e[0] + (e[spec.bins] - e[0]) * k as f64 / n_fine as f64).collect();
        let cells: Vec<QuadResult> = fine
            .windows(2)
            .map(|w| integrate(|x| weight(model, &[x], temperature, cap), w[0], w[1], cell_tol))
            .collect();
        converged &= cells.iter().all(|c| c.converged);
        let total: f64 = cells.iter().map(|c| c.value).sum();
        mass = cells.chunks(CDF_REFINE).map(|ch| ch.iter().map(|c| c.value).sum::<f64>() / total).collect();
        let mut acc = 0.0;
        let mut table = vec![(fine[0], 0.0)];
        for (c, x) in cells.iter().zip(&fine[1..]) {
            acc += c.value / total;
            table.push((*x, acc));
        }
        cdf = table;
    } else {
        let (ex, ey) = (&edges[0], &edges[1]);
        let b = spec.bins;
        mass = vec![0.0; b * b];
        for i in 0..b {
            for j in 0..b {
                let r = integrate(
                    |x| {
                        integrate(|y| weight(model, &[x, y], temperature, cap), ey[j], ey[j + 1], cell_tol).value
                    },
                    ex[i],
                    ex[i + 1],
                    cell_tol,
                );
                mass[i * b + j] = r.value;
            }
        }
        let total: f64 = mass.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Quadrature("grid carries no mass".into()));
        }
        // the cell sum and the sublevel integral are independent estimates of Z_q
        converged &= ((total - zq.value) / zq.value).abs() < 1e-6;
        for m in mass.iter_mut() {
            *m /= total;
        }
        let mut acc = 0.0;
        let mut table = vec![(ex[0], 0.0)];
        for i in 0..b {
            acc += (0..b).map(|j| mass[i * b + j]).sum::<f64>();
            table.push((ex[i + 1], acc));
        }
        cdf = table;
    }
    let volume: f64 = edges.iter().map(|e| e[e.len() - 1] - e[0]).product();
    Ok(GibbsReference {
        temperature,
        z_q: zq.value,
        z_q_error: zq.error,
        u_cap: cap,
        tail_estimate: (-cap / temperature).exp() * volume / zq.value,
        converged,
        edges,
        mass,
        cdf,
    })
}

impl GibbsReference {
    pub fn dim(&self) -> usize {
        self.edges.len()
    }

    pub fn bins(&self) -> usize {
        self.edges[0].len() - 1
    }

    /// Bin index along `axis`, `None` outside the grid.
    pub fn bin_of(&self, axis: usize, x: f64) -> Option<usize> {
        let e = &self.edges[axis];
        let (lo, hi) = (e[0], e[e.len() - 1]);
        if !(x >= lo && x <= hi) {
            return None;
        }
        let n = e.len() - 1;
        Some((((x - lo) / (hi - lo) * n as f64) as usize).min(n - 1))
    }

    /// Flat cell index of a configuration.
    pub fn cell_of(&self, q: &[f64]) -> Option<usize> {
        let mut idx = 0;
        for (axis, &x) in q.iter().enumerate().take(self.dim()) {
            idx = idx * self.bins() + self.bin_of(axis, x)?;
        }
        Some(idx)
    }

    /// Marginal CDF of the first coordinate (linear within table cells).
    pub fn cdf(&self, x: f64) -> f64 {
        let t = &self.cdf;
        if x <= t[0].0 {
            return 0.0;
        }
        if x >= t[t.len() - 1].0 {
            return 1.0;
        }
        let k = t.partition_point(|p| p.0 <= x);
        let (a, b) = (t[k - 1], t[k]);
        a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
    }

    /// Inverse-CDF draw of the first coordinate.
    pub fn sample_first_axis<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let t = &self.cdf;
        let k = t.partition_point(|p| p.1 < u).clamp(1, t.len() - 1);
        let (a, b) = (t[k - 1], t[k]);
        if b.1 > a.1 {
            a.0 + (b.0 - a.0) * (u - a.1) / (b.1 - a.1)
        } else {
            a.0
        }
    }

    /// Draw of a full configuration: a cell by its mass, then uniform inside it
    /// (exact inverse CDF in one dimension).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        if self.dim() == 1 {
            return vec![self.sample_first_axis(rng)];
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut cell = self.mass.len() - 1;
        for (k, m) in self.mass.iter().enumerate() {
            acc += m;
            if u < acc {
                cell = k;
                break;
            }
        }
        let b = self.bins();
        let (i, j) = (cell / b, cell % b);
        let (ex, ey) = (&self.edges[0], &self.edges[1]);
        vec![ex[i] + (ex[i + 1] - ex[i]) * rng.random::<f64>(), ey[j] + (ey[j + 1] - ey[j]) * rng.random::<f64>()]
    }

    /// `int f dmu_q` by quadrature (one-dimensional references only).
    pub fn expectation<F: Fn(f64) -> f64>(&self, model: &PotentialModel<f64>, f: F) -> Result<f64> {
        if self.dim() != 1 {
            return Err(Error::Diagnostics("expectations are computed for one-dimensional references".into()));
        }
        let e = &self.edges[0];
        let tol = Tolerance { abs: 1e-14, rel: 1e-11, max_panels: 400 };
        let mut num = 0.0;
        for w in e.windows(2) {
            num += integrate(|x| f(x) * weight(model, &[x], self.temperature, self.u_cap), w[0], w[1], tol).value;
        }
        Ok(num / self.z_q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use approx::assert_relative_eq;

    #[test]
    fn gaussian_normaliser() {
        let m = PotentialModel::poly_confine(0.5, 2.0, 1, 1).unwrap();
        let r = gibbs_reference(&m, 1.0, &GridSpec::default()).unwrap();
        assert_relative_eq!(r.z_q, (2.0 * std::f64::consts::PI).sqrt(), max_relative = 1e-9);
        assert_relative_eq!(r.mass.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!((r.cdf(0.0) - 0.5).abs() < 1e-9);
        assert_relative_eq!(z_p(1.0, 2), 2.0 * std::f64::consts::PI, max_relative = 1e-15);
    }

    #[test]
    fn singular_normaliser_is_stable_under_refinement() {
        let m = PotentialModel::singular_1d(1.0, 4.0, 1.0, 2.0).unwrap();
        let coarse = gibbs_reference(&m, 0.5, &GridSpec { bins: 50, ..Default::default() }).unwrap();
        let fine = gibbs_reference(
            &m,
            0.5,
            &GridSpec { bins: 200, tol: Tolerance { abs: 1e-16, rel: 1e-13, max_panels: 4000 }, ..Default::default() },
        )
        .unwrap();
        assert!(coarse.converged && fine.converged);
        assert!(((coarse.z_q - fine.z_q) / fine.z_q).abs() < 1e-6);
        let mean = fine.expectation(&m, |x| x).unwrap();
        assert!(mean > 0.5 && mean < 1.5);
    }

    #[test]
    fn sampler_reproduces_cdf() {
        let m = PotentialModel::singular_1d(1.0, 4.0, 1.0, 2.0).unwrap();
        let r = gibbs_reference(&m, 0.5, &GridSpec::default()).unwrap();
        let mut rng = stream_rng(3, 0);
        let n = 20_000;
        let xs: Vec<f64> = (0..n).map(|_| r.sample_first_axis(&mut rng)).collect();
        for probe in [0.8, 1.0, 1.2] {
            let emp = xs.iter().filter(|&&x| x <= probe).count() as f64 / n as f64;
            assert!((emp - r.cdf(probe)).abs() < 0.02);
        }
    }

    #[test]
    fn two_dimensional_gaussian() {
        let m = PotentialModel::poly_confine(0.5, 2.0, 1, 2).unwrap();
        let r = gibbs_reference(&m, 1.0, &GridSpec { bins: 20, ..Default::default() }).unwrap();
        assert_relative_eq!(r.z_q, 2.0 * std::f64::consts::PI, max_relative = 1e-7);
        assert!(r.converged);
        assert!((r.cdf(0.0) - 0.5).abs() < 1e-6);
    }
}

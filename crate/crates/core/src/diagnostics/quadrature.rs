//! Adaptive Gauss-Kronrod (7/15) quadrature and nested integration over
//! truncated sublevel sets `{U < cap}`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
    pub panels: usize,
    pub converged: bool,
}

impl QuadResult {
    fn zero() -> Self {
        Self { value: 0.0, error: 0.0, evals: 0, panels: 0, converged: true }
    }

    fn add(&mut self, other: QuadResult) {
        self.value += other.value;
        self.error += other.error;
        self.evals += other.evals;
        self.panels += other.panels;
        self.converged &= other.converged;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_panels: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs: 1e-13, rel: 1e-11, max_panels: 2000 }
    }
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let err = ((kron - gauss) * h).abs();
    (kron * h, err)
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.partial_cmp(&other.error).unwrap_or(Ordering::Equal)
    }
}

/// Globally adaptive G7/K15 on `[a, b]`, bisecting the worst panel first.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: Tolerance) -> QuadResult {
    if !(b > a) {
        return QuadResult::zero();
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value: v, error: e });
    let (mut total, mut err) = (v, e);
    let mut evals = 15;
    let mut panels = 1;
    while err > tol.abs.max(tol.rel * total.abs()) && panels < tol.max_panels {
        let worst = heap.pop().expect("heap is nonempty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk15(&mut f, worst.a, mid);
        let (v2, e2) = gk15(&mut f, mid, worst.b);
        evals += 30;
        panels += 1;
        total += v1 + v2 - worst.value;
        err += e1 + e2 - worst.error;
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
    }
    // re-sum to shed accumulated cancellation in the running totals
    let total: f64 = heap.iter().map(|p| p.value).sum();
    let err: f64 = heap.iter().map(|p| p.error).sum();
    let converged = err <= tol.abs.max(tol.rel * total.abs()) && total.is_finite();
    QuadResult { value: total, error: err, evals, panels, converged }
}

/// Intervals of the line `x -> u(x)` on which `u < cap`, located by bracket
/// expansion around `center`, a grid scan and bisection of the endpoints.
pub fn sublevel_segments<F: Fn(f64) -> f64>(u: F, center: f64, cap: f64, scan: usize) -> Vec<(f64, f64)> {
    let inside = |x: f64| {
        let v = u(x);
        v.is_finite() && v < cap
    };
    let settled = |x: f64| {
        let v = u(x);
        v.is_finite() && v >= cap
    };
    let w_max = 1e4 * (1.0 + center.abs());
    let mut lo_w = 1.0f64;
    while !settled(center - lo_w) && lo_w < w_max {
        lo_w *= 2.0;
    }
    let mut hi_w = 1.0f64;
    while !settled(center + hi_w) && hi_w < w_max {
        hi_w *= 2.0;
    }
    let (lo, hi) = (center - lo_w, center + hi_w);
    let mut n = scan.max(16);
    let mut segments = Vec::new();
    for _attempt in 0..4 {
        let xs: Vec<f64> = (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect();
        let flags: Vec<bool> = xs.iter().map(|&x| inside(x)).collect();
        let mut k = 0;
        while k <= n {
            if !flags[k] {
                k += 1;
                continue;
            }
            let start = k;
            while k <= n && flags[k] {
                k += 1;
            }
            let end = k - 1;
            let left = if start == 0 { xs[0] } else { bisect(&inside, xs[start - 1], xs[start]) };
            let right = if end == n { xs[n] } else { bisect(&inside, xs[end + 1], xs[end]) };
            segments.push((left, right));
        }
        if !segments.is_empty() {
            break;
        }
        n *= 8;
    }
    segments
}

/// Boundary between `outside` (not in set) and `inside` (in set).
fn bisect<F: Fn(f64) -> bool>(inside: &F, mut outside: f64, mut ins: f64) -> f64 {
    for _ in 0..80 {
        let mid = 0.5 * (outside + ins);
        if mid == outside || mid == ins {
            break;
        }
        if inside(mid) {
            ins = mid;
        } else {
            outside = mid;
        }
    }
    ins
}

/// Nested integral of `integrand(x)` over `{x : u(x) < cap}` in `center.len()` dimensions.
///
/// Coordinates are integrated outermost-first; each fibre is truncated to its
/// sublevel segments. `integrand` receives the point and `u(x)`.
pub fn integrate_sublevel<U, G>(u: &U, integrand: &G, center: &[f64], cap: f64, tol: Tolerance) -> QuadResult
where
    U: Fn(&[f64]) -> f64,
    G: Fn(&[f64], f64) -> f64,
{
    let mut point = center.to_vec();
    let scan = match center.len() {
        1 => 800,
        2 => 200,
        _ => 64,
    };
    nested(u, integrand, center, cap, tol, 0, &mut point, scan)
}

#[allow(clippy::too_many_arguments)]
fn nested<U, G>(
    u: &U,
    integrand: &G,
    center: &[f64],
    cap: f64,
    tol: Tolerance,
    axis: usize,
    point: &mut [f64],
    scan: usize,
) -> QuadResult
where
    U: Fn(&[f64]) -> f64,
    G: Fn(&[f64], f64) -> f64,
{
    let dim = center.len();
    // fibre through the current prefix, remaining coordinates held at the center
    let line = |x: f64, point: &mut [f64]| {
        point[axis] = x;
        if axis + 1 == dim {
            u(point)
        } else {
            // along an outer axis, a fibre is nonempty iff some inner point is inside;
            // the center of the inner coordinates serves as the witness
            let mut probe = point.to_vec();
            probe[axis + 1..].copy_from_slice(&center[axis + 1..]);
            inner_min(u, &mut probe, center, axis + 1, cap)
        }
    };
    let segments = sublevel_segments(|x| line(x, &mut point.to_vec()), center[axis], cap, scan);
    let mut out = QuadResult::zero();
    let inner_tol = Tolerance { abs: tol.abs * 1e-2, rel: tol.rel * 1e-1, max_panels: tol.max_panels };
    for (a, b) in segments {
        let mut pt = point.to_vec();
        let r = integrate(
            |x| {
                pt[axis] = x;
                if axis + 1 == dim {
                    let v = u(&pt);
                    if v.is_finite() && v < cap {
                        integrand(&pt, v)
                    } else {
                        0.0
                    }
                } else {
                    nested(u, integrand, center, cap, inner_tol, axis + 1, &mut pt, scan).value
                }
            },
            a,
            b,
            tol,
        );
        out.add(r);
    }
    out
}

/// Rough minimum of `u` over the trailing coordinates (coordinate search from the center).
fn inner_min<U: Fn(&[f64]) -> f64>(u: &U, probe: &mut [f64], center: &[f64], from: usize, cap: f64) -> f64 {
    let mut best = u(probe);
    let mut step = 1.0;
    for _ in 0..40 {
        let mut improved = false;
        for k in from..center.len() {
            for dir in [-1.0, 1.0] {
                let old = probe[k];
                probe[k] = old + dir * step;
                let v = u(probe);
                if v.is_finite() && (v < best || !best.is_finite()) {
                    best = v;
                    improved = true;
                } else {
                    probe[k] = old;
                }
            }
        }
        if best < cap * 0.5 && !improved {
            break;
        }
        if !improved {
            step *= 0.5;
            if step < 1e-6 {
                break;
            }
        }
    }
    best
}

//! Dormand-Prince 5(4) with standard step-size control.

use crate::{Error, Result};

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeTolerance {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeTolerance {
    fn default() -> Self {
        Self { rtol: 1e-11, atol: 1e-13, max_steps: 1_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` in place, starting with step `h`.
///
/// Returns the last accepted step size so that consecutive calls can chain.
pub fn dopri5<F>(
    f: &mut F,
    t0: f64,
    t1: f64,
    y: &mut [f64],
    h: f64,
    tol: OdeTolerance,
    stats: &mut OdeStats,
) -> Result<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = y.len();
    let span = t1 - t0;
    if span <= 0.0 {
        return Ok(h);
    }
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut t = t0;
    let mut h = h.min(span).max(span * 1e-12);
    let mut last_h = h;
    f(t, y, &mut k[0])?;
    let mut steps = 0;
    while t < t1 {
        if steps >= tol.max_steps {
            return Err(Error::Ode { time: t, reason: "step budget exhausted".into() });
        }
        steps += 1;
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[i];
                }
                tmp[i] = y[i] + h * acc;
            }
            f(t + C[s] * h, &tmp, &mut k[s])?;
        }
        // tmp holds the fifth-order solution (stage 7 is evaluated there)
        let mut err = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for (s, ks) in k.iter().enumerate() {
                e += E[s] * ks[i];
            }
            let sc = tol.atol + tol.rtol * y[i].abs().max(tmp[i].abs());
            let r = h * e / sc;
            err += r * r;
        }
        let err = (err / n as f64).sqrt();
        if !err.is_finite() {
            stats.rejected += 1;
            h *= 0.1;
            if h < span * 1e-16 {
                return Err(Error::Ode { time: t, reason: "non-finite right-hand side".into() });
            }
            continue;
        }
        if err <= 1.0 {
            t = if last { t1 } else { t + h };
            y.copy_from_slice(&tmp);
            k.swap(0, 6);
            stats.accepted += 1;
            last_h = h;
        } else {
            stats.rejected += 1;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h < (t1 - t0).abs() * 1e-15 && t < t1 {
            return Err(Error::Ode { time: t, reason: "step size underflow".into() });
        }
    }
    Ok(last_h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let mut f = |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = -y[0];
            Ok(())
        };
        let mut y = [1.0];
        let mut st = OdeStats::default();
        dopri5(&mut f, 0.0, 3.0, &mut y, 0.1, OdeTolerance::default(), &mut st).unwrap();
        assert!((y[0] - (-3f64).exp()).abs() < 1e-11);
        assert!(st.accepted > 0);
    }

    #[test]
    fn harmonic_oscillator_period() {
        let mut f = |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0];
            Ok(())
        };
        let mut y = [1.0, 0.0];
        let mut st = OdeStats::default();
        let tp = 2.0 * std::f64::consts::PI;
        dopri5(&mut f, 0.0, tp, &mut y, 0.01, OdeTolerance::default(), &mut st).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-9 && y[1].abs() < 1e-9);
    }
}

//! Adaptive Dormand-Prince 5(4) integration with output on prescribed points.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self { rtol: 1e-11, atol: 1e-13, h_init: 1e-3, h_min: 1e-14, h_max: 0.05 }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy<const N: usize>(y: &[f64; N], terms: &[(f64, &[f64; N])], h: f64) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Integrate y' = f(s, y) from `s0` through the increasing `outputs`, landing
/// exactly on each. `keep_going` is called at every output; returning false
/// stops the integration after recording that point.
///
/// Returns the recorded states (the first output may equal `s0`).
pub fn integrate<const N: usize, F, G>(
    f: F,
    s0: f64,
    y0: [f64; N],
    outputs: &[f64],
    opts: &Dopri5,
    mut keep_going: G,
) -> Result<Vec<[f64; N]>>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
    G: FnMut(f64, &[f64; N]) -> bool,
{
    let mut out = Vec::with_capacity(outputs.len());
    let mut s = s0;
    let mut y = y0;
    let mut h = opts.h_init;
    let mut k1 = f(s, &y);
    for &target in outputs {
        while s < target {
            let last = target - s <= h;
            let step = if last { target - s } else { h };
            let k2 = f(s + C2 * step, &axpy(&y, &[(A21, &k1)], step));
            let k3 = f(s + C3 * step, &axpy(&y, &[(A31, &k1), (A32, &k2)], step));
            let k4 = f(s + C4 * step, &axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], step));
            let k5 = f(
                s + C5 * step,
                &axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], step),
            );
            let k6 = f(
                s + step,
                &axpy(&y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], step),
            );
            let ynew = axpy(&y, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], step);
            let k7 = f(s + step, &ynew);
            let mut err: f64 = 0.0;
            for i in 0..N {
                let e = step
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
                err = err.max((e / sc).abs());
            }
            if !err.is_finite() {
                err = 1e10;
            }
            if err <= 1.0 {
                s = if last { target } else { s + step };
                y = ynew;
                k1 = k7;
                if !last {
                    h = (step * (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)).min(opts.h_max);
                }
            } else {
                h = step * (0.9 * err.powf(-0.2)).max(0.1);
                if h < opts.h_min {
                    return Err(Error::Stiffness { at: s });
                }
            }
        }
        out.push(y);
        if !keep_going(target, &y) {
            break;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        let outs: Vec<f64> = (0..=100).map(|i| 0.1 * i as f64).collect();
        let ys = integrate(|_, y: &[f64; 2]| [y[1], -y[0]], 0.0, [1.0, 0.0], &outs, &Dopri5::default(), |_, _| true)
            .unwrap();
        for (s, y) in outs.iter().zip(&ys) {
            assert!((y[0] - s.cos()).abs() < 1e-9);
            assert!((y[1] + s.sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn stops_on_request() {
        let outs: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let ys = integrate(|_, _y: &[f64; 1]| [1.0], 0.0, [0.0], &outs, &Dopri5::default(), |s, _| s < 3.5).unwrap();
        assert_eq!(ys.len(), 5);
    }
}

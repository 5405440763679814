use super::curve::ProfileCurve;
use crate::stencil::fornberg;

#[derive(Debug, Clone, Copy)]
struct Tap {
    idx: usize,
    mirrored: bool,
    w1: f64,
    w2: f64,
}

/// Five-point derivative operator in the chord parameter of a fixed curve.
///
/// Ends on the axis are handled by reflecting through r = 0 (radial
/// coordinates are odd, heights and rotationally symmetric functions even);
/// periodic loops wrap; free ends use shifted stencils. Weights only depend on
/// the base samples, so the operator can be reused for any curve or function
/// parametrised over them.
#[derive(Debug, Clone)]
pub struct CurveDiff {
    taps: Vec<Vec<Tap>>,
}

impl CurveDiff {
    pub fn new(curve: &ProfileCurve) -> Self {
        let s = curve.chord_param();
        let len = s.len();
        let pts = curve.points();
        let periodic = curve.is_periodic() && len >= 3;
        let period = if periodic {
            let (a, b) = (pts[0], pts[len - 1]);
            s[len - 1] + (a[0] - b[0]).hypot(a[1] - b[1])
        } else {
            0.0
        };
        let lo_axis = curve.starts_on_axis();
        let hi_axis = curve.ends_on_axis();
        let width = len.min(5);
        let half = (width / 2) as isize;

        // Resolve a virtual index to (sample, parameter, mirrored).
        let node = |k: isize| -> Option<(usize, f64, bool)> {
            let l = len as isize;
            if (0..l).contains(&k) {
                return Some((k as usize, s[k as usize], false));
            }
            if periodic {
                let j = k.rem_euclid(l) as usize;
                let shift = (k.div_euclid(l)) as f64 * period;
                return Some((j, s[j] + shift, false));
            }
            if k < 0 && lo_axis && -k < l {
                let j = (-k) as usize;
                return Some((j, -s[j], true));
            }
            if k >= l && hi_axis && 2 * (l - 1) - k >= 0 {
                let j = (2 * (l - 1) - k) as usize;
                return Some((j, 2.0 * s[len - 1] - s[j], true));
            }
            None
        };

        let mut taps = Vec::with_capacity(len);
        for i in 0..len {
            let ii = i as isize;
            let mut start = ii - half;
            let mut nodes: Vec<(usize, f64, bool)>;
            loop {
                let cand: Vec<_> = (start..start + width as isize).map(node).collect();
                if cand.iter().all(Option::is_some) {
                    nodes = cand.into_iter().flatten().collect();
                    break;
                }
                if cand[0].is_none() {
                    start += 1;
                } else {
                    start -= 1;
                }
            }
            let xs: Vec<f64> = nodes.iter().map(|t| t.1).collect();
            let c = fornberg(s[i], &xs, 2);
            taps.push(
                nodes
                    .drain(..)
                    .enumerate()
                    .map(|(j, (idx, _, mirrored))| Tap { idx, mirrored, w1: c[1][j], w2: c[2][j] })
                    .collect(),
            );
        }
        Self { taps }
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// First and second derivatives at sample `i`; `odd` flips the sign of
    /// reflected values.
    #[inline]
    pub fn at(&self, i: usize, vals: &[f64], odd: bool) -> (f64, f64) {
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for t in &self.taps[i] {
            let v = if odd && t.mirrored { -vals[t.idx] } else { vals[t.idx] };
            d1 += t.w1 * v;
            d2 += t.w2 * v;
        }
        (d1, d2)
    }

    pub fn apply(&self, vals: &[f64], odd: bool) -> (Vec<f64>, Vec<f64>) {
        (0..self.len()).map(|i| self.at(i, vals, odd)).unzip()
    }
}

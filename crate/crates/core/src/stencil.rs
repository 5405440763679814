//! Finite-difference weights on arbitrary node sets (Fornberg's recursion).

/// Weights for derivatives `0..=max_order` at `x0` from the nodes `xs`.
///
/// Returns `w[k][j]`, the weight of `f(xs[j])` in the `k`-th derivative.
pub fn fornberg(x0: f64, xs: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let npts = xs.len();
    let mut c = vec![vec![0.0; npts]; max_order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..npts {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// First and second derivatives of `f` at every node of a 1D grid `s`, using a
/// window of `width` nodes (3 or 5), shifted inward at the ends.
pub fn derivatives(s: &[f64], f: &[f64], width: usize) -> (Vec<f64>, Vec<f64>) {
    let len = s.len();
    let w = width.min(len);
    let half = w / 2;
    let mut d1 = vec![0.0; len];
    let mut d2 = vec![0.0; len];
    for i in 0..len {
        let start = i.saturating_sub(half).min(len - w);
        let nodes = &s[start..start + w];
        let c = fornberg(s[i], nodes, 2);
        let mut a = 0.0;
        let mut b = 0.0;
        for j in 0..w {
            a += c[1][j] * f[start + j];
            b += c[2][j] * f[start + j];
        }
        d1[i] = a;
        d2[i] = b;
    }
    (d1, d2)
}

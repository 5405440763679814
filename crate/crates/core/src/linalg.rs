//! Symmetric tridiagonal matrices: Sturm counts, bisection and Thomas solves.

use crate::error::{Error, Result};

/// Symmetric tridiagonal matrix with diagonal `d` and off-diagonal `e`
/// (`e[i]` couples rows i and i+1).
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub d: Vec<f64>,
    pub e: Vec<f64>,
}

impl SymTridiag {
    pub fn new(d: Vec<f64>, e: Vec<f64>) -> Result<Self> {
        if d.is_empty() || e.len() + 1 != d.len() {
            return Err(Error::Assembly(format!(
                "tridiagonal shape mismatch: {} diagonal, {} off-diagonal",
                d.len(),
                e.len()
            )));
        }
        Ok(Self { d, e })
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.d[i] * x[i];
                if i > 0 {
                    s += self.e[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.e[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn sturm_count(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.len() {
            let b2 = if i > 0 { self.e[i - 1] * self.e[i - 1] } else { 0.0 };
            q = self.d[i] - x - if i > 0 { b2 / q } else { 0.0 };
            if q == 0.0 {
                q = -f64::EPSILON * (self.d[i].abs() + x.abs() + 1.0);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Gershgorin interval containing the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut rad = 0.0;
            if i > 0 {
                rad += self.e[i - 1].abs();
            }
            if i + 1 < n {
                rad += self.e[i].abs();
            }
            lo = lo.min(self.d[i] - rad);
            hi = hi.max(self.d[i] + rad);
        }
        (lo, hi)
    }

    /// The k-th smallest eigenvalue (k = 0 is the lowest) by bisection.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        let pad = 1e-12 * (lo.abs() + hi.abs() + 1.0);
        lo -= pad;
        hi += pad;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.sturm_count(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Solve (A - sigma I) x = rhs by the Thomas algorithm.
    pub fn solve_shifted(&self, sigma: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        let mut c = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut piv = self.d[0] - sigma;
        if piv == 0.0 {
            return Err(Error::Spectral("zero pivot in tridiagonal solve".into()));
        }
        if n > 1 {
            c[0] = self.e[0] / piv;
        }
        y[0] = rhs[0] / piv;
        for i in 1..n {
            piv = self.d[i] - sigma - self.e[i - 1] * c[i - 1];
            if piv == 0.0 || !piv.is_finite() {
                return Err(Error::Spectral("zero pivot in tridiagonal solve".into()));
            }
            if i + 1 < n {
                c[i] = self.e[i] / piv;
            }
            y[i] = (rhs[i] - self.e[i - 1] * y[i - 1]) / piv;
        }
        for i in (0..n - 1).rev() {
            y[i] -= c[i] * y[i + 1];
        }
        Ok(y)
    }
}

/// Solve a general tridiagonal system with sub-diagonal `a` (a[i] multiplies
/// x[i-1] in row i, a[0] unused), diagonal `b` and super-diagonal `c`.
pub fn thomas(a: &[f64], b: &[f64], c: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut piv = b[0];
    cp[0] = if n > 1 { c[0] / piv } else { 0.0 };
    x[0] = rhs[0] / piv;
    for i in 1..n {
        piv = b[i] - a[i] * cp[i - 1];
        if i + 1 < n {
            cp[i] = c[i] / piv;
        }
        x[i] = (rhs[i] - a[i] * x[i - 1]) / piv;
    }
    for i in (0..n - 1).rev() {
        x[i] -= cp[i] * x[i + 1];
    }
    x
}


/// Square band matrix with `kl` sub- and `ku` super-diagonals, factorised by
/// Gaussian elimination with partial pivoting (rows store `kl` extra columns
/// for fill-in).
#[derive(Debug, Clone)]
pub struct Banded {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    a: Vec<f64>,
    piv: Vec<usize>,
    factored: bool,
}

impl Banded {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, a: vec![0.0; n * width], piv: vec![0; n], factored: false }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku + self.kl {
            0.0
        } else {
            self.a[self.idx(i, j)]
        }
    }

    /// Set entry (i, j); it must lie inside the declared band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "entry ({i}, {j}) outside the band");
        let k = self.idx(i, j);
        self.a[k] = v;
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        assert!(!self.factored);
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.a[self.idx(i, j)] * x[j]).sum()
            })
            .collect()
    }

    pub fn factor(&mut self) -> Result<()> {
        let n = self.n;
        let span = self.ku + self.kl;
        for k in 0..n {
            let last = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.a[self.idx(k, k)].abs();
            for i in k + 1..=last {
                let v = self.a[self.idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Assembly(format!("singular band matrix at column {k}")));
            }
            self.piv[k] = p;
            let jmax = (k + span).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let (x, y) = (self.idx(k, j), self.idx(p, j));
                    self.a.swap(x, y);
                }
            }
            let d = self.a[self.idx(k, k)];
            for i in k + 1..=last {
                let li = self.idx(i, k);
                let l = self.a[li] / d;
                self.a[li] = l;
                if l != 0.0 {
                    for j in k + 1..=jmax {
                        let (ij, kj) = (self.idx(i, j), self.idx(k, j));
                        self.a[ij] -= l * self.a[kj];
                    }
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert!(self.factored);
        let n = self.n;
        let span = self.ku + self.kl;
        let mut b = rhs.to_vec();
        for k in 0..n {
            b.swap(k, self.piv[k]);
            let last = (k + self.kl).min(n - 1);
            for i in k + 1..=last {
                b[i] -= self.a[self.idx(i, k)] * b[k];
            }
        }
        for k in (0..n).rev() {
            let jmax = (k + span).min(n - 1);
            let mut s = b[k];
            for j in k + 1..=jmax {
                s -= self.a[self.idx(k, j)] * b[j];
            }
            b[k] = s / self.a[self.idx(k, k)];
        }
        b
    }
}

#[cfg(test)]
mod band_tests {
    use super::*;

    #[test]
    fn banded_solve_with_pivoting() {
        let n = 30;
        let mut m = Banded::zeros(n, 2, 2);
        for i in 0..n {
            for j in i.saturating_sub(2)..=(i + 2).min(n - 1) {
                // small diagonal forces row exchanges
                let v = if i == j { 0.01 } else { 1.0 + ((i * 7 + j * 3) % 5) as f64 };
                m.set(i, j, v);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = m.mul(&x);
        m.factor().unwrap();
        let y = m.solve(&b);
        for (p, q) in x.iter().zip(&y) {
            assert!((p - q).abs() < 1e-9, "{p} {q}");
        }
    }
}

//! Small numerical kernels shared across modules: adaptive quadrature, a
//! banded direct solver for the structured-grid systems, and safeguarded
//! scalar root finding.

use crate::error::{Error, Result};

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, max_depth: u32) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(&f, a, b, fa, fm, fb, whole, tol, max_depth)
}

/// Composite Simpson over `[a, b]` with `n` subintervals (rounded up to even).
pub fn composite_simpson(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 0 { n.max(2) } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + k as f64 * h);
    }
    sum * h / 3.0
}

/// Square banded matrix with `kl` sub- and `ku` super-diagonals, row-major
/// compact storage. Factorization is in-place LU without pivoting — adequate
/// here because every assembled system is strongly diagonally dominated by
/// the 2·L² part.
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    /// row i holds columns i−kl ..= i+ku at data[i*(kl+ku+1) ..]
    data: Vec<f64>,
    factored: bool,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self { n, kl, ku, data: vec![0.0; n * (kl + ku + 1)], factored: false }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let w = self.kl + self.ku + 1;
        let lo = i.saturating_sub(self.kl);
        if j < lo || j > (i + self.ku).min(self.n - 1) {
            return None;
        }
        Some(i * w + (j + self.kl - i))
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(!self.factored, "matrix already factored");
        let k = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i},{j}) outside band kl={} ku={}", self.kl, self.ku));
        self.data[k] += v;
    }

    /// In-place banded LU. Fails on a vanishing pivot.
    pub fn factor(&mut self) -> Result<()> {
        assert!(!self.factored);
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let w = kl + ku + 1;
        let mut pivot_row = vec![0.0; ku];
        for k in 0..n {
            let pivot = self.data[k * w + kl];
            if pivot.abs() < 1e-300 {
                return Err(Error::Singular(format!("zero pivot at row {k}")));
            }
            // columns k+1 ..= k+ku of row k sit contiguously after the pivot
            let reach = ku.min(n - 1 - k);
            pivot_row[..reach].copy_from_slice(&self.data[k * w + kl + 1..k * w + kl + 1 + reach]);
            let imax = (k + kl).min(n - 1);
            for i in k + 1..=imax {
                // column k in row i
                let si = i * w + (k + kl - i);
                let m = self.data[si] / pivot;
                self.data[si] = m;
                if m == 0.0 {
                    continue;
                }
                // columns k+1 ..= k+reach of row i are contiguous from si+1,
                // but clipped by row i's own band end (j ≤ i + ku)
                let jreach = reach.min(i + ku - k);
                let row = &mut self.data[si + 1..si + 1 + jreach];
                for (a, b) in row.iter_mut().zip(&pivot_row[..jreach]) {
                    *a -= m * b;
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    /// Solve `Ax = b` after [`factor`]; `b` is overwritten with the solution.
    pub fn solve(&self, b: &mut [f64]) {
        assert!(self.factored, "factor() first");
        assert_eq!(b.len(), self.n);
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let w = kl + ku + 1;
        // forward substitution with unit lower factor
        for i in 0..n {
            let lo = i.saturating_sub(kl);
            let mut s = b[i];
            for j in lo..i {
                s -= self.data[i * w + (j + kl - i)] * b[j];
            }
            b[i] = s;
        }
        // back substitution
        for i in (0..n).rev() {
            let hi = (i + ku).min(n - 1);
            let mut s = b[i];
            for j in i + 1..=hi {
                s -= self.data[i * w + (j + kl - i)] * b[j];
            }
            b[i] = s / self.data[i * w + kl];
        }
    }
}

/// Safeguarded Newton–bisection for a strictly monotone function with
/// sign(f(a)) ≠ sign(f(b)): Newton steps inside the current bracket, bisection
/// otherwise, so the bracket shrinks every iteration and a rejected Newton
/// step can never fake convergence.
pub fn solve_monotone(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<f64> {
    let (fa, fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Parameter(format!("root not bracketed on [{a:.6e}, {b:.6e}]")));
    }
    // orient so f(lo) < 0 < f(hi); lo, hi need not be ordered
    let (mut lo, mut hi) = if fa < 0.0 { (a, b) } else { (b, a) };
    let mut x = 0.5 * (a + b);
    for _ in 0..300 {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let (lo_m, hi_m) = (lo.min(hi), lo.max(hi));
        let dfx = df(x);
        let newton = x - fx / dfx;
        let xn = if dfx != 0.0 && newton.is_finite() && newton > lo_m && newton < hi_m {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let dx = (xn - x).abs();
        x = xn;
        if dx <= tol * (1.0 + x.abs()) || (hi_m - lo_m) <= tol * (1.0 + x.abs()) {
            return Ok(x);
        }
    }
    Ok(x)
}

/// Neumaier-compensated sum. The 5-point stencils cancel O(1) node values
/// down to O(h²); the naive sum's rounding, amplified by 1/h⁴ through the
/// composed bilaplacian, would put a ~1e-7 noise floor under the Newton
/// residual at h = 1/128. Compensation keeps the floor near 1e-11.
#[inline]
pub fn compensated_sum(terms: &[f64]) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for &x in terms {
        let t = s + x;
        c += if s.abs() >= x.abs() { (s - t) + x } else { (x - t) + s };
        s = t;
    }
    s + c
}

/// Deterministic 64-bit mix for deriving per-stream seeds.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_handles_smooth_integrands() {
        let v = adaptive_simpson(|x| x.sin(), 0.0, std::f64::consts::PI, 1e-12, 50);
        assert!((v - 2.0).abs() < 1e-11);
        let v = adaptive_simpson(|x| (-x * x).exp(), -6.0, 6.0, 1e-13, 60);
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-11);
    }

    #[test]
    fn band_solves_tridiagonal_poisson() {
        let n = 50;
        let mut a = BandMatrix::zeros(n, 1, 1);
        for i in 0..n {
            a.add(i, i, 2.0);
            if i > 0 {
                a.add(i, i - 1, -1.0);
            }
            if i + 1 < n {
                a.add(i, i + 1, -1.0);
            }
        }
        a.factor().unwrap();
        // manufactured solution
        let x_exact: Vec<f64> = (0..n).map(|i| ((i * 7919) % 13) as f64 / 13.0 - 0.4).collect();
        let mut b = vec![0.0; n];
        for i in 0..n {
            b[i] = 2.0 * x_exact[i]
                - if i > 0 { x_exact[i - 1] } else { 0.0 }
                - if i + 1 < n { x_exact[i + 1] } else { 0.0 };
        }
        a.solve(&mut b);
        for i in 0..n {
            assert!((b[i] - x_exact[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn band_solves_wide_band_system() {
        let n = 40;
        let (kl, ku) = (5, 5);
        let mut a = BandMatrix::zeros(n, kl, ku);
        for i in 0..n {
            a.add(i, i, 20.0 + (i % 3) as f64);
            for d in 1..=5usize {
                if i >= d {
                    a.add(i, i - d, -1.0 / d as f64);
                }
                if i + d < n {
                    a.add(i, i + d, -1.2 / d as f64);
                }
            }
        }
        let x_exact: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut b = vec![0.0; n];
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                let v = if i == j {
                    20.0 + (i % 3) as f64
                } else if j < i {
                    -1.0 / (i - j) as f64
                } else {
                    -1.2 / (j - i) as f64
                };
                b[i] += v * x_exact[j];
            }
        }
        a.factor().unwrap();
        a.solve(&mut b);
        for i in 0..n {
            assert!((b[i] - x_exact[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn monotone_root_finder_hits_tolerance() {
        let f = |x: f64| x * x * x - 2.0;
        let df = |x: f64| 3.0 * x * x;
        let r = solve_monotone(f, df, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2.0f64.powf(1.0 / 3.0)).abs() < 1e-12);
    }
}

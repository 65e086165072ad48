//! Oracle helpers for the acceptance suite, independent of the library's own
//! quadrature and root-finding paths.

/// Adaptive Simpson quadrature, written against the textbook recursion rather
/// than the library's implementation.
pub fn oracle_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn s(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) * (fa + 4.0 * fm + fb) / 6.0
    }
    fn go(
        f: &dyn Fn(f64) -> f64,
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
        let (l, r) = (0.5 * (a + m), 0.5 * (m + b));
        let (fl, fr) = (f(l), f(r));
        let left = s(fa, fl, fm, a, m);
        let right = s(fm, fr, fb, m, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            go(f, a, m, fa, fl, fm, left, tol / 2.0, depth - 1)
                + go(f, m, b, fm, fr, fb, right, tol / 2.0, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    go(f, a, b, fa, fm, fb, s(fa, fm, fb, a, b), tol, 48)
}

/// 2D midpoint-grid quadrature over a rectangle.
pub fn oracle_grid2d(f: &dyn Fn(f64, f64) -> f64, r: [f64; 4], n: usize) -> f64 {
    let [x0, x1, y0, y1] = r;
    let (hx, hy) = ((x1 - x0) / n as f64, (y1 - y0) / n as f64);
    let mut s = 0.0;
    for j in 0..n {
        let y = y0 + (j as f64 + 0.5) * hy;
        for i in 0..n {
            let x = x0 + (i as f64 + 0.5) * hx;
            s += f(x, y);
        }
    }
    s * hx * hy
}

/// Least-squares slope of log2(err) against the refinement level: the
/// observed convergence order.
pub fn observed_order(errors: &[f64]) -> f64 {
    let n = errors.len() as f64;
    let mean_x = (n - 1.0) / 2.0;
    let mean_y = errors.iter().map(|e| e.log2()).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (k, e) in errors.iter().enumerate() {
        let dx = k as f64 - mean_x;
        sxy += dx * (e.log2() - mean_y);
        sxx += dx * dx;
    }
    -sxy / sxx
}

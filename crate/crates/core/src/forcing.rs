//! The smooth compactly supported forcing β, its rescaling β_ε, and the
//! primitive 𝓑_ε(v) = ∫₀^v β_ε.

use crate::error::{Error, Result};
use crate::numerics::adaptive_simpson;

const TABLE_SIZE: usize = 4096;

/// Normalized exponential bump: β(t) = c·exp(−1/(t(1−t))) on (0,1), zero
/// elsewhere, with c fixed so ∫β = 1. Symmetric about t = 1/2.
#[derive(Debug, Clone)]
pub struct BumpProfile {
    normalization: f64,
    /// primitive ∫₀^{k/N} β at the table nodes
    primitive: Vec<f64>,
    /// monotone (PCHIP) slopes of the primitive at the table nodes
    slopes: Vec<f64>,
    peak: f64,
}

#[inline]
fn raw_bump(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        (-1.0 / (t * (1.0 - t))).exp()
    }
}

#[inline]
fn raw_bump_prime(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        let g = t * (1.0 - t);
        raw_bump(t) * (1.0 - 2.0 * t) / (g * g)
    }
}

impl BumpProfile {
    pub fn standard() -> Self {
        let mass = adaptive_simpson(raw_bump, 0.0, 1.0, 1e-14, 60);
        let c = 1.0 / mass;
        // cumulative primitive of the normalized bump on a uniform table
        let n = TABLE_SIZE;
        let mut primitive = Vec::with_capacity(n + 1);
        primitive.push(0.0);
        let mut acc = 0.0;
        for k in 0..n {
            let (a, b) = (k as f64 / n as f64, (k + 1) as f64 / n as f64);
            acc += c * adaptive_simpson(raw_bump, a, b, 1e-15, 40);
            primitive.push(acc);
        }
        // normalize the tail exactly to 1 (quadrature residue ~1e-13)
        let total = primitive[n];
        for p in primitive.iter_mut() {
            *p /= total;
        }
        let slopes = limited_slopes(&primitive, 1.0 / n as f64, |t| c / total * raw_bump(t));
        let profile = Self {
            normalization: c / total,
            primitive,
            slopes,
            peak: c / total * raw_bump(0.5),
        };
        debug_assert!((profile.integral_check() - 1.0).abs() < 1e-10);
        profile
    }

    /// Residual quadrature check of the unit-mass invariant.
    pub fn integral_check(&self) -> f64 {
        let c = self.normalization;
        adaptive_simpson(move |t| c * raw_bump(t), 0.0, 1.0, 1e-13, 60)
    }

    pub fn peak(&self) -> f64 {
        self.peak
    }

    /// β(t)
    pub fn beta(&self, t: f64) -> f64 {
        self.normalization * raw_bump(t)
    }

    /// β′(t)
    pub fn beta_prime(&self, t: f64) -> f64 {
        self.normalization * raw_bump_prime(t)
    }

    /// β_ε(t) = (1/ε)·β(t/ε)
    pub fn beta_eps(&self, t: f64, eps: f64) -> Result<f64> {
        check_eps(eps)?;
        Ok(self.beta(t / eps) / eps)
    }

    /// β_ε′(t) = (1/ε²)·β′(t/ε)
    pub fn beta_eps_prime(&self, t: f64, eps: f64) -> Result<f64> {
        check_eps(eps)?;
        Ok(self.beta_prime(t / eps) / (eps * eps))
    }

    /// 𝓑(s) = ∫₀^s β for s ∈ ℝ (0 below the support, 1 above).
    pub fn primitive(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if s >= 1.0 {
            return 1.0;
        }
        let n = TABLE_SIZE;
        let x = s * n as f64;
        let k = (x.floor() as usize).min(n - 1);
        let t = x - k as f64;
        let h = 1.0 / n as f64;
        let (p0, p1) = (self.primitive[k], self.primitive[k + 1]);
        let (m0, m1) = (self.slopes[k], self.slopes[k + 1]);
        // cubic Hermite on [k, k+1]
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * p0
            + (t3 - 2.0 * t2 + t) * h * m0
            + (-2.0 * t3 + 3.0 * t2) * p1
            + (t3 - t2) * h * m1
    }

    /// 𝓑_ε(v) = ∫₀^v β_ε = 𝓑(v/ε); equals 1 for v > ε and 0 for v ≤ 0.
    pub fn beta_eps_integral(&self, v: f64, eps: f64) -> Result<f64> {
        check_eps(eps)?;
        Ok(self.primitive(v / eps))
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Parameter(format!("ε must lie in (0, 1], got {eps}")));
    }
    Ok(())
}

/// Hermite slopes for a nondecreasing table with uniform spacing `h`: the
/// exact derivative where admissible, clipped into the Fritsch–Carlson
/// monotonicity box (≤ 3× the adjacent secants) so the interpolant never
/// undershoots or overshoots the table values.
fn limited_slopes(values: &[f64], h: f64, derivative: impl Fn(f64) -> f64) -> Vec<f64> {
    let n = values.len();
    let deltas: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]) / h).collect();
    let mut m = vec![0.0; n];
    for k in 0..n {
        let d_left = if k > 0 { deltas[k - 1] } else { deltas[0] };
        let d_right = if k < n - 1 { deltas[k] } else { deltas[n - 2] };
        let cap = 3.0 * d_left.min(d_right).max(0.0);
        m[k] = derivative(k as f64 * h).clamp(0.0, cap);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile() -> BumpProfile {
        BumpProfile::standard()
    }

    #[test]
    fn support_and_mass() {
        let b = profile();
        assert_eq!(b.beta(-0.3), 0.0);
        assert_eq!(b.beta(0.0), 0.0);
        assert_eq!(b.beta(1.0), 0.0);
        assert_eq!(b.beta(1.7), 0.0);
        assert!((b.integral_check() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn midpoint_value_and_symmetry() {
        let b = profile();
        // β(1/2) = c·e⁻⁴ with c from the quadrature normalization
        let c = 1.0 / adaptive_simpson(raw_bump, 0.0, 1.0, 1e-14, 60);
        assert!(((b.beta(0.5) - c * (-4.0f64).exp()) / b.beta(0.5)).abs() < 1e-9);
        for t in [0.1, 0.23, 0.4] {
            assert!((b.beta(t) - b.beta(1.0 - t)).abs() < 1e-12 * b.peak());
        }
    }

    #[test]
    fn beta_eps_scaling_and_support() {
        let b = profile();
        let eps = 0.1;
        assert_eq!(b.beta_eps(2.0 * eps, eps).unwrap(), 0.0);
        let expected = b.beta(0.5) / eps;
        assert!((b.beta_eps(eps / 2.0, eps).unwrap() - expected).abs() < 1e-12 * expected);
        // mass preserved under scaling
        let mass = adaptive_simpson(|t| b.beta_eps(t, eps).unwrap(), -0.05, 0.2, 1e-12, 60);
        assert!((mass - 1.0).abs() < 1e-9);
        assert!(b.beta_eps(0.5, 0.0).is_err());
        assert!(b.beta_eps(0.5, -1.0).is_err());
    }

    #[test]
    fn primitive_saturation_and_midpoint() {
        let b = profile();
        assert_eq!(b.beta_eps_integral(5.0, 0.01).unwrap(), 1.0);
        assert_eq!(b.beta_eps_integral(-1.0, 0.1).unwrap(), 0.0);
        // symmetric bump ⇒ 𝓑(1/2) = 1/2
        let eps = 0.3;
        let half = b.beta_eps_integral(eps / 2.0, eps).unwrap();
        assert!((half - 0.5).abs() < 1e-10, "𝓑_ε(ε/2) = {half}");
    }

    #[test]
    fn primitive_matches_quadrature() {
        let b = profile();
        for s in [0.05, 0.2, 0.41, 0.63, 0.88, 0.97] {
            let q = adaptive_simpson(|t| b.beta(t), 0.0, s, 1e-13, 60);
            assert!((b.primitive(s) - q).abs() < 1e-10, "s = {s}");
        }
    }

    #[test]
    fn primitive_bounds_and_monotonicity() {
        let b = profile();
        let mut prev = -1.0;
        for k in 0..=1000 {
            let v = -0.2 + 1.4 * k as f64 / 1000.0;
            let p = b.beta_eps_integral(v, 0.7).unwrap();
            assert!((0.0..=1.0).contains(&p));
            assert!(p >= prev - 1e-15);
            prev = p;
        }
    }

    #[test]
    fn primitive_derivative_matches_beta() {
        // d/dv 𝓑_ε(v) = β_ε(v), finite-difference check at the table points
        let b = profile();
        let eps = 0.5;
        let dv = 1e-6;
        for k in 1..100 {
            let v = eps * k as f64 / 100.0;
            let fd =
                (b.beta_eps_integral(v + dv, eps).unwrap() - b.beta_eps_integral(v - dv, eps).unwrap())
                    / (2.0 * dv);
            let exact = b.beta_eps(v, eps).unwrap();
            assert!((fd - exact).abs() < 1e-6 * (1.0 + exact), "v = {v}: {fd} vs {exact}");
        }
    }

    #[test]
    fn flat_contact_at_zero() {
        // all one-sided difference quotients of β vanish numerically at 0
        let b = profile();
        for p in 1..=4 {
            let h = 4e-3f64;
            let mut quotient = 0.0;
            for k in 0..=p {
                let sign = if (p - k) % 2 == 0 { 1.0 } else { -1.0 };
                quotient += sign * choose(p, k) * b.beta(k as f64 * h);
            }
            quotient /= h.powi(p as i32);
            assert!(quotient.abs() < 1e-12, "order {p} quotient {quotient}");
        }
    }

    fn choose(n: usize, k: usize) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn primitive_stays_in_unit_interval(v in -3.0f64..3.0, eps in 1e-3f64..1.0) {
                let b = profile();
                let p = b.beta_eps_integral(v, eps).unwrap();
                prop_assert!((0.0..=1.0).contains(&p));
            }

            #[test]
            fn primitive_is_monotone(v in -1.0f64..2.0, dv in 0.0f64..1.0, eps in 1e-3f64..1.0) {
                let b = profile();
                let lo = b.beta_eps_integral(v, eps).unwrap();
                let hi = b.beta_eps_integral(v + dv, eps).unwrap();
                prop_assert!(hi >= lo);
            }

            #[test]
            fn beta_is_nonnegative(t in -2.0f64..2.0) {
                prop_assert!(profile().beta(t) >= 0.0);
            }
        }
    }
}

//! Numerical verification of the domain-variation integral identity
//! 2∫(2 tr(D²u Dφ) + ∇u·Δφ)Δu = ∫ div φ (|Δu|² + 𝓑_ε(u))
//! against compactly supported closed-form vector fields.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{gradient, hessian, laplacian, NodeClass, ScalarField2D};
use crate::forcing::BumpProfile;
use crate::numerics::splitmix64;

/// Value, gradient and second derivatives of a 1D bump profile
/// b(s) = exp(−1/(s(1−s))) on (0,1), by closed form.
#[derive(Debug, Clone, Copy)]
struct Bump1D {
    lo: f64,
    hi: f64,
}

impl Bump1D {
    /// (b, b′, b″) at x, with the chain rule for the affine map onto (0,1).
    fn jet(&self, x: f64) -> [f64; 3] {
        let w = self.hi - self.lo;
        let s = (x - self.lo) / w;
        if s <= 0.0 || s >= 1.0 {
            return [0.0; 3];
        }
        let g = s * (1.0 - s);
        let gp = 1.0 - 2.0 * s;
        let b = (-1.0 / g).exp();
        let q1 = gp / (g * g);
        let q2 = -2.0 / (g * g) - 2.0 * gp * gp / (g * g * g);
        let bp = b * q1;
        let bpp = b * (q2 + q1 * q1);
        [b, bp / w, bpp / (w * w)]
    }
}

/// Smooth compactly supported test vector field: tensor-product exponential
/// bumps times an amplitude vector, with closed-form derivatives.
#[derive(Debug, Clone, Copy)]
pub struct TestVectorField {
    bx: Bump1D,
    by: Bump1D,
    pub amplitude: [f64; 2],
}

/// First and second derivatives of one component of the test field.
#[derive(Debug, Clone, Copy)]
pub struct VectorJet {
    pub phi: [f64; 2],
    /// grad[m] = (∂_x φ^m, ∂_y φ^m)
    pub grad: [[f64; 2]; 2],
    pub lap: [f64; 2],
    pub div: f64,
}

impl TestVectorField {
    pub fn support(&self) -> [f64; 4] {
        [self.bx.lo, self.bx.hi, self.by.lo, self.by.hi]
    }

    pub fn jet(&self, x: f64, y: f64) -> VectorJet {
        let [bx, bxp, bxpp] = self.bx.jet(x);
        let [by, byp, bypp] = self.by.jet(y);
        let shape = bx * by;
        let dx = bxp * by;
        let dy = bx * byp;
        let lap = bxpp * by + bx * bypp;
        let [a0, a1] = self.amplitude;
        VectorJet {
            phi: [a0 * shape, a1 * shape],
            grad: [[a0 * dx, a0 * dy], [a1 * dx, a1 * dy]],
            lap: [a0 * lap, a1 * lap],
            div: a0 * dx + a1 * dy,
        }
    }
}

/// Tensor-product bump field on the given support box.
pub fn make_bump_field(support: [f64; 4], amplitude: [f64; 2]) -> Result<TestVectorField> {
    let [x0, x1, y0, y1] = support;
    if !(x1 > x0 && y1 > y0) {
        return Err(Error::Parameter("bump support box must have positive extent".into()));
    }
    Ok(TestVectorField {
        bx: Bump1D { lo: x0, hi: x1 },
        by: Bump1D { lo: y0, hi: y1 },
        amplitude,
    })
}

/// Both sides of the integral identity and the normalized residual
/// |lhs − rhs| / (1 + |lhs| + |rhs|).
#[derive(Debug, Clone, Copy)]
pub struct IdentityResidual {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// Evaluate the identity for the field `u` and test field `phi` by nodal
/// quadrature; φ-derivatives come from closed forms.
pub fn identity_residual(
    u: &ScalarField2D,
    eps: f64,
    forcing: &BumpProfile,
    phi: &TestVectorField,
) -> Result<IdentityResidual> {
    let g = u.grid();
    let h = g.h();
    let (ux, uy) = gradient(u)?;
    let (uxx, uxy, uyy) = hessian(u)?;
    let lap = laplacian(u)?;

    // the support must stay a stencil-width inside the interior
    let [sx0, sx1, sy0, sy1] = phi.support();
    let margin = 2.0 * h;
    let [ox, oy] = g.origin();
    let (x1, y1) = (ox + (g.nx() - 1) as f64 * h, oy + (g.ny() - 1) as f64 * h);
    if sx0 < ox + margin || sx1 > x1 - margin || sy0 < oy + margin || sy1 > y1 - margin {
        return Err(Error::Geometry(format!(
            "test-field support [{sx0:.3},{sx1:.3}]×[{sy0:.3},{sy1:.3}] leaves the interior margin"
        )));
    }

    let h2 = h * h;
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for (i, j) in uxx.interior_nodes() {
        let p = g.pos(i, j);
        if p[0] <= sx0 || p[0] >= sx1 || p[1] <= sy0 || p[1] >= sy1 {
            continue;
        }
        let vj = phi.jet(p[0], p[1]);
        let tr = uxx.at(i, j) * vj.grad[0][0]
            + uxy.at(i, j) * (vj.grad[0][1] + vj.grad[1][0])
            + uyy.at(i, j) * vj.grad[1][1];
        let grad_dot_lap = ux.at(i, j) * vj.lap[0] + uy.at(i, j) * vj.lap[1];
        let l = lap.at(i, j);
        lhs += h2 * 2.0 * (2.0 * tr + grad_dot_lap) * l;
        rhs += h2 * vj.div * (l * l + forcing.beta_eps_integral(u.at(i, j), eps)?);
    }
    // interior check: the support box saw only Hessian-valid nodes
    for (i, j) in g.nodes() {
        let p = g.pos(i, j);
        if p[0] > sx0 && p[0] < sx1 && p[1] > sy0 && p[1] < sy1 && u.class(i, j) != NodeClass::Interior
        {
            return Err(Error::Geometry("test-field support touches non-interior nodes".into()));
        }
    }
    let residual = (lhs - rhs).abs() / (1.0 + lhs.abs() + rhs.abs());
    Ok(IdentityResidual { lhs, rhs, residual })
}

/// One row of the randomized suite.
#[derive(Debug, Clone, Copy)]
pub struct SuiteRow {
    pub field_id: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SuiteReport {
    pub rows: Vec<SuiteRow>,
}

impl SuiteReport {
    pub fn max_residual(&self) -> f64 {
        self.rows.iter().map(|r| r.residual).fold(0.0, f64::max)
    }

    pub fn median_residual(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        let mut v: Vec<f64> = self.rows.iter().map(|r| r.residual).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    }

    /// CSV with header `field_id,lhs,rhs,residual`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("field_id,lhs,rhs,residual\n");
        for r in &self.rows {
            s.push_str(&format!("{},{:.12e},{:.12e},{:.12e}\n", r.field_id, r.lhs, r.rhs, r.residual));
        }
        s
    }
}

/// Run the identity against `n_fields` seeded random bump fields; bit-identical
/// across reruns with the same seed.
pub fn identity_suite(
    u: &ScalarField2D,
    eps: f64,
    forcing: &BumpProfile,
    n_fields: usize,
    seed: u64,
) -> Result<SuiteReport> {
    let g = u.grid();
    let h = g.h();
    let [ox, oy] = g.origin();
    let (x1, y1) = (ox + (g.nx() - 1) as f64 * h, oy + (g.ny() - 1) as f64 * h);
    let margin = 3.0 * h;

    let fields: Vec<TestVectorField> = (0..n_fields)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ (k as u64).wrapping_mul(0x9E37)));
            let min_w = 8.0 * h;
            let gen_range = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| rng.random_range(lo..hi);
            let wx = gen_range(&mut rng, min_w, (x1 - ox) * 0.5 - margin);
            let wy = gen_range(&mut rng, min_w, (y1 - oy) * 0.5 - margin);
            let cx = gen_range(&mut rng, ox + margin, x1 - margin - wx);
            let cy = gen_range(&mut rng, oy + margin, y1 - margin - wy);
            let a0 = gen_range(&mut rng, -1.0, 1.0);
            let a1 = gen_range(&mut rng, -1.0, 1.0);
            make_bump_field([cx, cx + wx, cy, cy + wy], [a0 + 0.1, a1 - 0.1])
                .expect("generated support is valid")
        })
        .collect();

    let rows: Result<Vec<SuiteRow>> = fields
        .par_iter()
        .enumerate()
        .map(|(field_id, phi)| {
            let r = identity_residual(u, eps, forcing, phi)?;
            Ok(SuiteRow { field_id, lhs: r.lhs, rhs: r.rhs, residual: r.residual })
        })
        .collect();
    Ok(SuiteReport { rows: rows? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid2D;

    fn forcing() -> BumpProfile {
        BumpProfile::standard()
    }

    #[test]
    fn bump_field_value_at_center() {
        // amplitude (1,0) at the box center: bump(1/2)² = e⁻⁸
        let phi = make_bump_field([-0.4, 0.4, -0.2, 0.6], [1.0, 0.0]).unwrap();
        let j = phi.jet(0.0, 0.2);
        assert!((j.phi[0] - (-8.0f64).exp()).abs() < 1e-18);
        assert_eq!(j.phi[1], 0.0);
        // zero amplitude ⇒ zero field
        let z = make_bump_field([-0.4, 0.4, -0.2, 0.6], [0.0, 0.0]).unwrap();
        assert_eq!(z.jet(0.1, 0.3).phi, [0.0, 0.0]);
    }

    #[test]
    fn bump_derivatives_match_finite_differences() {
        let phi = make_bump_field([-0.35, 0.45, -0.25, 0.55], [0.8, -0.6]).unwrap();
        let d = 1e-6;
        for (x, y) in [(0.0, 0.1), (-0.2, 0.3), (0.33, -0.11)] {
            let j = phi.jet(x, y);
            for m in 0..2 {
                let fd_x = (phi.jet(x + d, y).phi[m] - phi.jet(x - d, y).phi[m]) / (2.0 * d);
                let fd_y = (phi.jet(x, y + d).phi[m] - phi.jet(x, y - d).phi[m]) / (2.0 * d);
                assert!((fd_x - j.grad[m][0]).abs() < 1e-6);
                assert!((fd_y - j.grad[m][1]).abs() < 1e-6);
                let fd_lap = (phi.jet(x + d, y).phi[m] + phi.jet(x - d, y).phi[m]
                    + phi.jet(x, y + d).phi[m]
                    + phi.jet(x, y - d).phi[m]
                    - 4.0 * j.phi[m])
                    / (d * d);
                assert!((fd_lap - j.lap[m]).abs() < 2e-4, "lap fd {fd_lap} vs {}", j.lap[m]);
            }
        }
    }

    #[test]
    fn divergence_integrates_to_zero() {
        let phi = make_bump_field([-0.3, 0.3, -0.3, 0.3], [0.7, 1.3]).unwrap();
        let n = 400;
        let mut s = 0.0;
        for j in 0..n {
            for i in 0..n {
                let x = -0.5 + (i as f64 + 0.5) / n as f64;
                let y = -0.5 + (j as f64 + 0.5) / n as f64;
                s += phi.jet(x, y).div;
            }
        }
        s /= (n * n) as f64;
        assert!(s.abs() < 1e-12, "∫div φ = {s}");
    }

    #[test]
    fn identity_exact_on_zero_and_constants() {
        // the discrete ∫div φ of a wide bump is spectrally small (periodic
        // trapezoid of a compactly supported smooth derivative), so constants
        // pass at 1e-12 once the bump spans enough nodes
        let g = Grid2D::from_box(-1.0, 1.0, -1.0, 1.0, 129).unwrap();
        let phi = make_bump_field([-0.6, 0.55, -0.58, 0.62], [1.0, -0.7]).unwrap();
        let b = forcing();
        let zero = ScalarField2D::constant(g, 0.0).unwrap();
        let r = identity_residual(&zero, 0.1, &b, &phi).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert_eq!(r.rhs, 0.0);
        // positive constant: lhs = 0 and rhs = 𝓑_ε(c)·∫div φ = 0 by compact support
        let c = ScalarField2D::constant(g, 0.04).unwrap();
        let r = identity_residual(&c, 0.1, &b, &phi).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!(r.residual < 1e-12, "residual {}", r.residual);
    }

    #[test]
    fn identity_scales_linearly_in_phi() {
        let g = Grid2D::from_box(-1.0, 1.0, -1.0, 1.0, 65).unwrap();
        let u = ScalarField2D::from_fn(g, |x, y| (2.0 * x).sin() * (y).cos() * 0.1).unwrap();
        let b = forcing();
        let base = make_bump_field([-0.5, 0.4, -0.45, 0.5], [0.8, -0.5]).unwrap();
        let r1 = identity_residual(&u, 0.1, &b, &base).unwrap();
        for lambda in [2.0, -1.0] {
            let scaled =
                make_bump_field([-0.5, 0.4, -0.45, 0.5], [0.8 * lambda, -0.5 * lambda]).unwrap();
            let r = identity_residual(&u, 0.1, &b, &scaled).unwrap();
            assert!((r.lhs - lambda * r1.lhs).abs() < 1e-13 * (1.0 + r1.lhs.abs()));
            assert!((r.rhs - lambda * r1.rhs).abs() < 1e-13 * (1.0 + r1.rhs.abs()));
        }
    }

    #[test]
    fn suite_is_deterministic_and_handles_empty() {
        let g = Grid2D::from_box(-1.0, 1.0, -1.0, 1.0, 65).unwrap();
        let u = ScalarField2D::from_fn(g, |x, y| 0.2 * (x * x - y * y)).unwrap();
        let b = forcing();
        let empty = identity_suite(&u, 0.1, &b, 0, 7).unwrap();
        assert!(empty.rows.is_empty());
        assert_eq!(empty.max_residual(), 0.0);
        let a = identity_suite(&u, 0.1, &b, 12, 42).unwrap();
        let c = identity_suite(&u, 0.1, &b, 12, 42).unwrap();
        for (x, y) in a.rows.iter().zip(&c.rows) {
            assert_eq!(x.lhs, y.lhs);
            assert_eq!(x.rhs, y.rhs);
        }
        let d = identity_suite(&u, 0.1, &b, 12, 43).unwrap();
        assert!(a.rows.iter().zip(&d.rows).any(|(x, y)| x.lhs != y.lhs));
    }

    #[test]
    fn support_outside_interior_errors() {
        let g = Grid2D::from_box(0.0, 1.0, 0.0, 1.0, 33).unwrap();
        let u = ScalarField2D::constant(g, 0.0).unwrap();
        let phi = make_bump_field([-0.1, 0.5, 0.2, 0.8], [1.0, 1.0]).unwrap();
        assert!(matches!(
            identity_residual(&u, 0.1, &forcing(), &phi),
            Err(Error::Geometry(_))
        ));
    }
}

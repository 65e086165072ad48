use crate::error::{Error, Result};
use crate::fields::interp::bicubic;
use crate::fields::stencil::{gradient, hessian, laplacian};
use crate::fields::ScalarField2D;

/// Values and polar derivatives of a scalar field sampled on a circle.
///
/// Samples sit at the `ntheta` equispaced angles θ_k = 2πk/nθ. All derivative
/// conventions are the polar ones: `u_theta` is the plain ∂/∂θ (not arc-length)
/// derivative, `u_theta_r` the mixed ∂²/∂θ∂r.
#[derive(Debug, Clone)]
pub struct PolarRing {
    pub center: [f64; 2],
    pub r: f64,
    pub u: Vec<f64>,
    pub u_r: Vec<f64>,
    pub u_theta: Vec<f64>,
    pub u_rr: Vec<f64>,
    pub u_theta_r: Vec<f64>,
    pub lap: Vec<f64>,
}

impl PolarRing {
    pub fn ntheta(&self) -> usize {
        self.u.len()
    }

    pub fn theta(&self, k: usize) -> f64 {
        2.0 * std::f64::consts::PI * k as f64 / self.ntheta() as f64
    }

    fn check_params(r: f64, ntheta: usize) -> Result<()> {
        if ntheta < 16 || ntheta % 2 != 0 {
            return Err(Error::Parameter(format!(
                "ring needs an even number of angles ≥ 16, got {ntheta}"
            )));
        }
        if !(r > 0.0) {
            return Err(Error::Parameter(format!("ring radius must be positive, got {r}")));
        }
        Ok(())
    }

    /// Build a ring directly from closed-form polar data. Intended for
    /// analytic reference cases where the exact derivatives are known.
    pub fn from_closed_form(
        center: [f64; 2],
        r: f64,
        ntheta: usize,
        // (u, u_r, u_theta, u_rr, u_theta_r, lap) as functions of θ
        f: impl Fn(f64) -> [f64; 6],
    ) -> Result<Self> {
        Self::check_params(r, ntheta)?;
        let mut ring = PolarRing {
            center,
            r,
            u: Vec::with_capacity(ntheta),
            u_r: Vec::with_capacity(ntheta),
            u_theta: Vec::with_capacity(ntheta),
            u_rr: Vec::with_capacity(ntheta),
            u_theta_r: Vec::with_capacity(ntheta),
            lap: Vec::with_capacity(ntheta),
        };
        for k in 0..ntheta {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / ntheta as f64;
            let v = f(theta);
            ring.u.push(v[0]);
            ring.u_r.push(v[1]);
            ring.u_theta.push(v[2]);
            ring.u_rr.push(v[3]);
            ring.u_theta_r.push(v[4]);
            ring.lap.push(v[5]);
        }
        Ok(ring)
    }
}

/// Precomputed difference-derivative fields of `f`, bicubically interpolated
/// by ring sampling. Building them once amortizes over many rings.
pub struct DerivativeFields {
    pub f: ScalarField2D,
    pub fx: ScalarField2D,
    pub fy: ScalarField2D,
    pub fxx: ScalarField2D,
    pub fxy: ScalarField2D,
    pub fyy: ScalarField2D,
    pub lap: ScalarField2D,
}

impl DerivativeFields {
    pub fn new(f: &ScalarField2D) -> Result<Self> {
        let (fx, fy) = gradient(f)?;
        let (fxx, fxy, fyy) = hessian(f)?;
        let lap = laplacian(f)?;
        Ok(Self { f: f.clone(), fx, fy, fxx, fxy, fyy, lap })
    }

    /// Interpolated (u, ∇u, D²u, Δu) at a point.
    pub fn eval(&self, x: f64, y: f64) -> Result<PointJet> {
        Ok(PointJet {
            u: bicubic(&self.f, x, y)?,
            ux: bicubic(&self.fx, x, y)?,
            uy: bicubic(&self.fy, x, y)?,
            uxx: bicubic(&self.fxx, x, y)?,
            uxy: bicubic(&self.fxy, x, y)?,
            uyy: bicubic(&self.fyy, x, y)?,
            lap: bicubic(&self.lap, x, y)?,
        })
    }

    pub fn sample_ring(&self, center: [f64; 2], r: f64, ntheta: usize) -> Result<PolarRing> {
        PolarRing::check_params(r, ntheta)?;
        let h = self.f.grid().h();
        if r < 3.0 * h {
            return Err(Error::Resolution(format!(
                "ring radius {r:.5} below the 3h interpolation floor (h = {h:.5})"
            )));
        }
        let mut ring = PolarRing {
            center,
            r,
            u: Vec::with_capacity(ntheta),
            u_r: Vec::with_capacity(ntheta),
            u_theta: Vec::with_capacity(ntheta),
            u_rr: Vec::with_capacity(ntheta),
            u_theta_r: Vec::with_capacity(ntheta),
            lap: Vec::with_capacity(ntheta),
        };
        for k in 0..ntheta {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / ntheta as f64;
            let (ct, st) = (theta.cos(), theta.sin());
            let (x, y) = (center[0] + r * ct, center[1] + r * st);
            let j = self.eval(x, y).map_err(|e| match e {
                Error::Geometry(msg) => Error::Geometry(format!(
                    "ring B_{r:.4}({:.4},{:.4}) exits the interior: {msg}",
                    center[0], center[1]
                )),
                other => other,
            })?;
            ring.u.push(j.u);
            ring.u_r.push(ct * j.ux + st * j.uy);
            ring.u_theta.push(r * (-st * j.ux + ct * j.uy));
            ring.u_rr.push(ct * ct * j.uxx + 2.0 * ct * st * j.uxy + st * st * j.uyy);
            // ∂θ of u_r = cosθ·u_x + sinθ·u_y along the circle
            ring.u_theta_r.push(
                -st * j.ux
                    + ct * j.uy
                    + r * (-st * ct * j.uxx + (ct * ct - st * st) * j.uxy + st * ct * j.uyy),
            );
            ring.lap.push(j.lap);
        }
        Ok(ring)
    }
}

/// Interpolated point values of a field and its first two derivatives.
#[derive(Debug, Clone, Copy)]
pub struct PointJet {
    pub u: f64,
    pub ux: f64,
    pub uy: f64,
    pub uxx: f64,
    pub uxy: f64,
    pub uyy: f64,
    pub lap: f64,
}

/// Ring samples of `f` with polar derivatives assembled by the chain rule from
/// bicubically interpolated difference-derivative fields.
pub fn polar_ring_sample(
    f: &ScalarField2D,
    center: [f64; 2],
    r: f64,
    ntheta: usize,
) -> Result<PolarRing> {
    DerivativeFields::new(f)?.sample_ring(center, r, ntheta)
}

/// ∮_{∂B_r} of a per-sample integrand: periodic trapezoid rule times arc length.
pub fn ring_integral(ring: &PolarRing, integrand: &[f64]) -> f64 {
    assert_eq!(integrand.len(), ring.ntheta(), "integrand length must match ring");
    let sum: f64 = integrand.iter().sum();
    sum * 2.0 * std::f64::consts::PI * ring.r / ring.ntheta() as f64
}

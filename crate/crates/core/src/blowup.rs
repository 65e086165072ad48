//! Quadratic blow-up rescaling around free-boundary points, two-plane
//! profile fitting, and the classification of the admissible coefficient
//! pairs (α, γ) with their constraint defects.

use crate::error::{Error, Result};
use crate::fields::{
    hessian, ring_integral, DerivativeFields, Grid2D, NodeClass,
    ScalarField2D,
};
use crate::numerics::composite_simpson;

/// Resolution of the fixed reference window used by [`rescale`].
pub const RESCALE_NODES: usize = 65;

/// v(x) = u(center + r·x)/r² resampled on the fixed reference window
/// [−1, 1]² by bicubic interpolation.
pub fn rescale(u: &ScalarField2D, center: [f64; 2], r: f64) -> Result<ScalarField2D> {
    if !(r > 0.0) {
        return Err(Error::Parameter(format!("rescale radius must be positive, got {r}")));
    }
    let reference = Grid2D::from_box(-1.0, 1.0, -1.0, 1.0, RESCALE_NODES)?;
    let mut values = Vec::with_capacity(reference.len());
    for (i, j) in reference.nodes() {
        let p = reference.pos(i, j);
        let (x, y) = (center[0] + r * p[0], center[1] + r * p[1]);
        values.push(crate::fields::bicubic(u, x, y)? / (r * r));
    }
    let mask = ScalarField2D::rect_mask(&reference);
    ScalarField2D::new(reference, values, mask)
}

/// Fitted two-plane quadratic profile u ≈ (α/2)(s)₊² + (γ/2)(s)₋² along the
/// signed coordinate s = direction·(x − center).
#[derive(Debug, Clone, Copy)]
pub struct DetachmentFit {
    pub center: [f64; 2],
    pub direction: [f64; 2],
    pub alpha: f64,
    pub gamma: f64,
    /// Relative L² misfit over the window.
    pub fit_residual: f64,
    /// |α − γ| and |α² − γ² − 1|, the two constraint distances.
    pub relation_defects: [f64; 2],
    /// Set when the window carried no signal (α = γ = 0 forced).
    pub zero_profile: bool,
}

/// Least-squares fit of the two-plane profile on the disc window of radius
/// `window` around `center`. The detachment direction is the principal axis
/// of the window-averaged squared Hessian; the sign is fixed so α ≥ γ.
pub fn fit_quadratic_detachment(
    u: &ScalarField2D,
    center: [f64; 2],
    window: f64,
) -> Result<DetachmentFit> {
    if !(window > 0.0) {
        return Err(Error::Parameter("window radius must be positive".into()));
    }
    let g = u.grid();
    let (uxx, uxy, uyy) = hessian(u)?;
    let mut nodes = Vec::new();
    let mut umax = 0.0f64;
    for (i, j) in uxx.interior_nodes() {
        let p = g.pos(i, j);
        if (p[0] - center[0]).hypot(p[1] - center[1]) <= window {
            nodes.push((i, j));
            umax = umax.max(u.at(i, j).abs());
        }
    }
    if nodes.len() < 12 {
        return Err(Error::Geometry(format!(
            "window of radius {window} holds only {} usable nodes",
            nodes.len()
        )));
    }
    if umax <= 1e-14 {
        return Ok(DetachmentFit {
            center,
            direction: [1.0, 0.0],
            alpha: 0.0,
            gamma: 0.0,
            fit_residual: 0.0,
            relation_defects: [0.0, 1.0],
            zero_profile: true,
        });
    }

    // window-averaged H·H seeds the axis: for a two-plane profile it is ∝ d dᵀ
    // away from the kink band
    let (mut m11, mut m12, mut m22) = (0.0, 0.0, 0.0);
    for &(i, j) in &nodes {
        let (a, b, c) = (uxx.at(i, j), uxy.at(i, j), uyy.at(i, j));
        m11 += a * a + b * b;
        m12 += b * (a + c);
        m22 += b * b + c * c;
    }
    let seed = principal_axis(m11, m12, m22);
    let theta0 = seed[1].atan2(seed[0]);

    // per-angle separable least squares
    let fit_at = |theta: f64| -> (f64, f64, f64, f64) {
        let dir = [theta.cos(), theta.sin()];
        let (mut num_p, mut den_p, mut num_m, mut den_m) = (0.0, 0.0, 0.0, 0.0);
        for &(i, j) in &nodes {
            let p = g.pos(i, j);
            let s = dir[0] * (p[0] - center[0]) + dir[1] * (p[1] - center[1]);
            let basis = 0.5 * s * s;
            if s > 0.0 {
                num_p += u.at(i, j) * basis;
                den_p += basis * basis;
            } else if s < 0.0 {
                num_m += u.at(i, j) * basis;
                den_m += basis * basis;
            }
        }
        let alpha = if den_p > 0.0 { num_p / den_p } else { 0.0 };
        let gamma = if den_m > 0.0 { num_m / den_m } else { 0.0 };
        let (mut misfit, mut norm) = (0.0, 0.0);
        for &(i, j) in &nodes {
            let p = g.pos(i, j);
            let s = dir[0] * (p[0] - center[0]) + dir[1] * (p[1] - center[1]);
            let model = if s > 0.0 { 0.5 * alpha * s * s } else { 0.5 * gamma * s * s };
            misfit += (u.at(i, j) - model).powi(2);
            norm += u.at(i, j).powi(2);
        }
        (alpha, gamma, misfit, norm)
    };

    // polish the axis: golden-section on the misfit, the kink band biases the
    // Hessian seed at O(h)
    let golden = 0.5 * (3.0 - 5.0f64.sqrt());
    let (mut lo, mut hi) = (theta0 - 0.35, theta0 + 0.35);
    let mut x1 = lo + golden * (hi - lo);
    let mut x2 = hi - golden * (hi - lo);
    let (mut f1, mut f2) = (fit_at(x1).2, fit_at(x2).2);
    for _ in 0..80 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = lo + golden * (hi - lo);
            f1 = fit_at(x1).2;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = hi - golden * (hi - lo);
            f2 = fit_at(x2).2;
        }
    }
    let theta = 0.5 * (lo + hi);
    let (mut alpha, mut gamma, misfit, norm) = fit_at(theta);
    let mut dir = [theta.cos(), theta.sin()];
    if alpha < gamma {
        // flip the axis so the larger coefficient sits on the positive side
        (alpha, gamma) = (gamma, alpha);
        dir = [-dir[0], -dir[1]];
    }
    let fit_residual = (misfit / norm.max(1e-300)).sqrt();
    Ok(DetachmentFit {
        center,
        direction: dir,
        alpha,
        gamma,
        fit_residual,
        relation_defects: [(alpha - gamma).abs(), (alpha * alpha - gamma * gamma - 1.0).abs()],
        zero_profile: false,
    })
}

/// Unit principal eigenvector of the symmetric 2×2 matrix [[m11,m12],[m12,m22]].
fn principal_axis(m11: f64, m12: f64, m22: f64) -> [f64; 2] {
    let tr = m11 + m22;
    let det = m11 * m22 - m12 * m12;
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    let lam = tr / 2.0 + disc;
    // eigenvector of the larger eigenvalue
    let v = if m12.abs() > 1e-300 {
        [m12, lam - m11]
    } else if m11 >= m22 {
        [1.0, 0.0]
    } else {
        [0.0, 1.0]
    };
    let n = v[0].hypot(v[1]);
    let mut d = [v[0] / n, v[1] / n];
    if d[0] < 0.0 || (d[0] == 0.0 && d[1] < 0.0) {
        d = [-d[0], -d[1]];
    }
    d
}

/// Classification of a fitted coefficient pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetachmentCase {
    /// α, γ > 0 with α = γ.
    BothPositive,
    /// α, γ < 0 with α = γ.
    BothNegative,
    /// α > 0 ≥ γ with α² − γ² = 1.
    Mixed,
    /// α < 0, γ = 0 — excluded.
    Forbidden,
    /// max(|α|, |γ|) below tolerance.
    Zero,
    Unclassified,
}

impl DetachmentCase {
    pub fn label(&self) -> &'static str {
        match self {
            DetachmentCase::BothPositive => "both-positive",
            DetachmentCase::BothNegative => "both-negative",
            DetachmentCase::Mixed => "mixed",
            DetachmentCase::Forbidden => "forbidden",
            DetachmentCase::Zero => "zero",
            DetachmentCase::Unclassified => "unclassified",
        }
    }
}

/// Total classification of (α, γ) with the distance to the assigned case's
/// constraint manifold (for `Unclassified`, the smallest admissible distance).
pub fn classify_detachment(alpha: f64, gamma: f64, tol: f64) -> (DetachmentCase, f64) {
    let eq_defect = (alpha - gamma).abs();
    let mixed_defect = (alpha * alpha - gamma * gamma - 1.0).abs();
    if alpha.abs().max(gamma.abs()) <= tol {
        return (DetachmentCase::Zero, alpha.abs().max(gamma.abs()));
    }
    if alpha < -tol && gamma.abs() <= tol {
        return (DetachmentCase::Forbidden, gamma.abs());
    }
    if alpha > tol && gamma > tol && eq_defect <= tol * (1.0 + alpha.abs()) {
        return (DetachmentCase::BothPositive, eq_defect);
    }
    if alpha < -tol && gamma < -tol && eq_defect <= tol * (1.0 + alpha.abs()) {
        return (DetachmentCase::BothNegative, eq_defect);
    }
    if alpha > tol && gamma <= tol && mixed_defect <= tol {
        return (DetachmentCase::Mixed, mixed_defect);
    }
    (DetachmentCase::Unclassified, eq_defect.min(mixed_defect))
}

/// Residual of the reduced half-plane identity behind the classification:
/// α²∫_{s>0}ψ₁ + γ²∫_{s<0}ψ₁ − ∫_{profile>0}ψ₁ for a mass-normalized tensor
/// bump ψ on the given support box (which must straddle s = 0). The integrals
/// factor over the tensor product and each factor is evaluated by composite
/// Simpson quadrature; the positivity set of the two-plane profile is the
/// case-dependent union of the two half-planes.
pub fn detachment_identity_residual(alpha: f64, gamma: f64, support: [f64; 4]) -> Result<f64> {
    let [x0, x1, y0, y1] = support;
    if !(x0 < 0.0 && x1 > 0.0 && y0 < y1) {
        return Err(Error::Parameter(
            "support box must straddle the detachment line x₁ = 0".into(),
        ));
    }
    let bump = crate::identity::make_bump_field(support, [1.0, 0.0])?;
    // per-axis masses normalize ψ so the residual scale is O(1)
    let n = 2048;
    let mass_x = composite_simpson(|x| bump.jet(x, 0.5 * (y0 + y1)).phi[0], x0, x1, n);
    let mass_y = composite_simpson(|y| bump.jet(0.5 * (x0 + x1), y).phi[0], y0, y1, n);
    let mid_x = bump.jet(0.5 * (x0 + x1), 0.5 * (y0 + y1)).phi[0];
    // tensor split: ψ = bx(x)·by(y), ∫∫ over a half-box = (∫bx′)·(∫by)
    let scale = 1.0 / (mass_x * mass_y / mid_x); // ∫bx·∫by with the shared peak factored once
    let dx_half = |lo: f64, hi: f64| -> f64 {
        composite_simpson(|x| bump.jet(x, 0.5 * (y0 + y1)).grad[0][0], lo, hi, n)
    };
    let int_pos = dx_half(0.0, x1) * (mass_y / mid_x) * scale;
    let int_neg = dx_half(x0, 0.0) * (mass_y / mid_x) * scale;
    // {profile > 0} is a union of the two half-planes, selected by the signs
    let mut int_supp = 0.0;
    if alpha > 0.0 {
        int_supp += int_pos;
    }
    if gamma > 0.0 {
        int_supp += int_neg;
    }
    Ok((alpha * alpha * int_pos + gamma * gamma * int_neg - int_supp).abs())
}

/// Euler-relation defect of degree-2 homogeneity about `center`: max over the
/// given rings of ∮|r·u_r − 2u| / (∮(|u| + r|∇u|) + tiny).
pub fn homogeneity_defect(u: &ScalarField2D, center: [f64; 2], radii: &[f64]) -> Result<f64> {
    let fields = DerivativeFields::new(u)?;
    let mut worst = 0.0f64;
    for &r in radii {
        let ring = fields.sample_ring(center, r, 128)?;
        let num: Vec<f64> =
            (0..ring.ntheta()).map(|k| (r * ring.u_r[k] - 2.0 * ring.u[k]).abs()).collect();
        let den: Vec<f64> = (0..ring.ntheta())
            .map(|k| {
                let grad = (ring.u_r[k].powi(2) + (ring.u_theta[k] / r).powi(2)).sqrt();
                ring.u[k].abs() + r * grad
            })
            .collect();
        let defect = ring_integral(&ring, &num) / (ring_integral(&ring, &den) + 1e-300);
        worst = worst.max(defect);
    }
    Ok(worst)
}

/// Interior nodes where u changes sign against a 4-neighbour, ranked by
/// distance from the domain edge; the best-ranked position is the preferred
/// center for blow-up diagnostics.
pub fn detect_free_boundary_point(u: &ScalarField2D) -> Option<[f64; 2]> {
    let g = u.grid();
    let mut best: Option<([f64; 2], f64)> = None;
    let [ox, oy] = g.origin();
    let (x1, y1) = (ox + (g.nx() - 1) as f64 * g.h(), oy + (g.ny() - 1) as f64 * g.h());
    for (i, j) in u.interior_nodes() {
        let v = u.at(i, j);
        let mut crossing = false;
        for (ii, jj) in [(i + 1, j), (i, j + 1)] {
            if u.class(ii, jj) != NodeClass::Exterior {
                let w = u.at(ii, jj);
                if (v <= 0.0 && w > 0.0) || (v > 0.0 && w <= 0.0) {
                    crossing = true;
                }
            }
        }
        if !crossing {
            continue;
        }
        let p = g.pos(i, j);
        let margin = (p[0] - ox).min(x1 - p[0]).min(p[1] - oy).min(y1 - p[1]);
        if best.map(|(_, m)| margin > m).unwrap_or(true) {
            best = Some((p, margin));
        }
    }
    best.map(|(p, _)| p)
}

/// Rescaling ladder diagnostics: sup-norm distances between consecutive
/// rescalings u(r_k·)/r_k², the dichotomy probe of the blow-up limit.
pub fn rescale_cauchy_trace(
    u: &ScalarField2D,
    center: [f64; 2],
    radii: &[f64],
) -> Result<Vec<f64>> {
    let fields: Vec<ScalarField2D> =
        radii.iter().map(|&r| rescale(u, center, r)).collect::<Result<_>>()?;
    Ok(fields.windows(2).map(|w| w[0].max_diff(&w[1])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(n: usize, f: impl Fn(f64, f64) -> f64) -> ScalarField2D {
        let g = Grid2D::from_box(-1.0, 1.0, -1.0, 1.0, n).unwrap();
        ScalarField2D::from_fn(g, f).unwrap()
    }

    #[test]
    fn rescale_fixes_homogeneous_quadratics() {
        let u = field(257, |x, y| x * x + y * y);
        let v = rescale(&u, [0.0, 0.0], 0.3).unwrap();
        for (i, j) in v.interior_nodes() {
            let p = v.grid().pos(i, j);
            assert!((v.at(i, j) - (p[0] * p[0] + p[1] * p[1])).abs() < 1e-10);
        }
    }

    #[test]
    fn rescale_shrinks_cubics_linearly() {
        let u = field(257, |x, _| x.powi(3));
        let r = 0.25;
        let v = rescale(&u, [0.0, 0.0], r).unwrap();
        for (i, j) in v.interior_nodes() {
            let p = v.grid().pos(i, j);
            assert!((v.at(i, j) - r * p[0].powi(3)).abs() < 1e-9);
        }
    }

    #[test]
    fn rescale_ladder_converges_at_degenerate_points() {
        // around a point with u = ∇u = 0, the quadratic rescalings settle on
        // the degree-2 part: distances of consecutive rescalings shrink
        let u = field(257, |x, y| x * x - y * y + 2.0 * x.powi(3) - x * y * y * y);
        let trace = rescale_cauchy_trace(&u, [0.0, 0.0], &[0.1, 0.2, 0.4]).unwrap();
        assert!(trace[0] < trace[1], "not contracting: {trace:?}");
        // and the smallest rescaling is close to the quadratic part
        let v = rescale(&u, [0.0, 0.0], 0.1).unwrap();
        let mut worst = 0.0f64;
        for (i, j) in v.interior_nodes() {
            let p = v.grid().pos(i, j);
            worst = worst.max((v.at(i, j) - (p[0] * p[0] - p[1] * p[1])).abs());
        }
        assert!(worst < 0.3, "rescaling far from the blow-up limit: {worst}");
    }

    #[test]
    fn rescale_composes_multiplicatively() {
        let u = field(257, |x, y| (1.3 * x).sin() * (0.9 * y).cos());
        let (r, s) = (0.5, 0.5);
        let once = rescale(&u, [0.0, 0.0], r * s).unwrap();
        let twice = rescale(&rescale(&u, [0.0, 0.0], r).unwrap(), [0.0, 0.0], s).unwrap();
        assert!(once.max_diff(&twice) < 1e-6);
    }

    #[test]
    fn fit_recovers_exact_profiles() {
        // pure one-sided profile
        let u = field(129, |x, _| if x > 0.0 { 0.5 * x * x } else { 0.0 });
        let fit = fit_quadratic_detachment(&u, [0.0, 0.0], 0.4).unwrap();
        assert!((fit.alpha - 1.0).abs() < 1e-8, "α = {}", fit.alpha);
        assert!(fit.gamma.abs() < 1e-8);
        assert!(fit.fit_residual < 1e-8);
        // symmetric parabola: α = γ = 1
        let u = field(129, |x, _| 0.5 * x * x);
        let fit = fit_quadratic_detachment(&u, [0.0, 0.0], 0.4).unwrap();
        assert!((fit.alpha - 1.0).abs() < 1e-8);
        assert!((fit.gamma - 1.0).abs() < 1e-8);
    }

    #[test]
    fn fit_recovers_rotated_two_plane_profile() {
        let th = 30.0f64.to_radians();
        let (c, s) = (th.cos(), th.sin());
        let (a_true, g_true) = (0.6, -0.8);
        let u = field(257, move |x, y| {
            let t = c * x + s * y;
            if t > 0.0 {
                0.5 * a_true * t * t
            } else {
                0.5 * g_true * t * t
            }
        });
        let fit = fit_quadratic_detachment(&u, [0.0, 0.0], 0.35).unwrap();
        assert!((fit.alpha - a_true).abs() < 1e-6, "α = {}", fit.alpha);
        assert!((fit.gamma - g_true).abs() < 1e-6, "γ = {}", fit.gamma);
        assert!((fit.direction[0] - c).abs() < 1e-6 && (fit.direction[1] - s).abs() < 1e-6);
        assert!(fit.fit_residual < 1e-6);
    }

    #[test]
    fn fit_flags_zero_window() {
        let u = field(65, |_, _| 0.0);
        let fit = fit_quadratic_detachment(&u, [0.0, 0.0], 0.3).unwrap();
        assert!(fit.zero_profile);
        assert_eq!(fit.alpha, 0.0);
        assert_eq!(fit.gamma, 0.0);
    }

    #[test]
    fn classification_cases() {
        let tol = 1e-2;
        assert_eq!(classify_detachment(2.0, 2.0, tol).0, DetachmentCase::BothPositive);
        assert_eq!(classify_detachment(2.0, 2.0, tol).1, 0.0);
        assert_eq!(classify_detachment(-1.5, -1.5, tol).0, DetachmentCase::BothNegative);
        let (case, defect) = classify_detachment(2.0f64.sqrt(), -1.0, tol);
        assert_eq!(case, DetachmentCase::Mixed);
        assert!(defect < 1e-12);
        assert_eq!(classify_detachment(-1.0, 0.0, tol).0, DetachmentCase::Forbidden);
        assert_eq!(classify_detachment(0.0, 0.0, tol).0, DetachmentCase::Zero);
        assert_eq!(classify_detachment(1.0, -1.0, tol).0, DetachmentCase::Unclassified);
    }

    #[test]
    fn classification_scale_behaviour() {
        let tol = 1e-2;
        // equality cases keep their label under positive scaling
        for lambda in [0.5, 2.0, 7.0] {
            assert_eq!(
                classify_detachment(2.0 * lambda, 2.0 * lambda, tol).0,
                DetachmentCase::BothPositive
            );
            assert_eq!(
                classify_detachment(-2.0 * lambda, -2.0 * lambda, tol).0,
                DetachmentCase::BothNegative
            );
        }
        // the mixed manifold is not scale-invariant: doubling leaves it
        let a = 2.0f64.sqrt();
        assert_eq!(classify_detachment(a, -1.0, tol).0, DetachmentCase::Mixed);
        assert_ne!(classify_detachment(2.0 * a, -2.0, tol).0, DetachmentCase::Mixed);
    }

    #[test]
    fn identity_residual_vanishes_on_admissible_cases() {
        let support = [-0.5, 0.5, -0.4, 0.4];
        // both-positive α = γ
        assert!(detachment_identity_residual(1.0, 1.0, support).unwrap() < 1e-7);
        // both-negative α = γ (empty positivity set, both integrals of ψ₁ cancel)
        assert!(detachment_identity_residual(-1.0, -1.0, support).unwrap() < 1e-7);
        // mixed α² − γ² = 1
        assert!(detachment_identity_residual(2.0f64.sqrt(), -1.0, support).unwrap() < 1e-7);
        // inadmissible pair: residual = (α² − 1)∫₊ψ₁ + γ²∫₋ψ₁ ≠ 0
        let r = detachment_identity_residual(1.0, -1.0, support).unwrap();
        assert!(r > 1e-2, "residual {r}");
    }

    #[test]
    fn homogeneity_defect_cases() {
        let hom = field(129, |x, y| x * x - y * y);
        let d = homogeneity_defect(&hom, [0.0, 0.0], &[0.2, 0.35]).unwrap();
        assert!(d < 1e-8, "defect {d}");
        let zero = field(129, |_, _| 0.0);
        assert_eq!(homogeneity_defect(&zero, [0.0, 0.0], &[0.3]).unwrap(), 0.0);
        // u = x³: closed-form ring integrals give (8/3)/(8/3 + 3π); the
        // gradient stencil carries an h² error on cubics, hence the tolerance
        let cubic = field(129, |x, _| x.powi(3));
        let d = homogeneity_defect(&cubic, [0.0, 0.0], &[0.3]).unwrap();
        let expect = (8.0 / 3.0) / (8.0 / 3.0 + 3.0 * std::f64::consts::PI);
        assert!((d - expect).abs() < 1e-3, "defect {d} vs {expect}");
        let fine = field(257, |x, _| x.powi(3));
        let d2 = homogeneity_defect(&fine, [0.0, 0.0], &[0.3]).unwrap();
        assert!((d2 - expect).abs() < 0.3 * (d - expect).abs(), "no h² refinement");
    }

    #[test]
    fn free_boundary_detection_prefers_deep_points() {
        let u = field(65, |x, y| x * x + y * y - 0.2);
        let p = detect_free_boundary_point(&u).unwrap();
        let r = p[0].hypot(p[1]);
        assert!((r - 0.2f64.sqrt()).abs() < 0.05, "detected {p:?}");
        let none = field(65, |_, _| 1.0);
        assert!(detect_free_boundary_point(&none).is_none());
    }
}

//! Closed-form 1D families with exact derivatives: the logarithmic
//! bifurcation family (unbounded second derivatives as ε → 0) and the bump
//! train family (uniformly small solutions with unbounded first derivatives
//! at the probe point), each solving 2u'''' = −β_ε(u) on its branch.

use crate::error::{Error, Result};
use crate::forcing::BumpProfile;
use crate::numerics::{adaptive_simpson, solve_monotone};

/// Raw (unnormalized) bump e^{−1/(s(1−s))} and its mass on (0,1).
#[inline]
fn raw_bump(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        0.0
    } else {
        (-1.0 / (s * (1.0 - s))).exp()
    }
}

fn raw_bump_mass() -> f64 {
    adaptive_simpson(raw_bump, 0.0, 1.0, 1e-14, 60)
}

/// Quintic smoothstep: s³(10 − 15s + 6s²), C² monotone from 0 to 1.
#[inline]
fn smoothstep5(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

// ---------------------------------------------------------------------------
// Logarithmic bifurcation family
// ---------------------------------------------------------------------------

/// u(x) = −x² log(ε + x⁴) for x > 0, 0 for x ≤ 0, with a forcing β_ε defined
/// through the inverse of the increasing branch, extended smoothly to carry
/// unit mass on (0, ε).
#[derive(Debug, Clone)]
pub struct LogBifurcationFamily {
    pub eps: f64,
    /// Threshold below which the inverse-function formula defines β_ε.
    pub iota: f64,
    /// Right end of the strictly increasing branch, e^{−3/4}.
    pub x_max: f64,
    /// Amplitude of the mass-carrying bump on (ι, ε).
    bump_amp: f64,
    /// Mass contributed by the formula and the blend, for reporting.
    pub formula_mass: f64,
}

/// (u, u′, u″, u‴, u⁗) at one point.
pub type Jet5 = [f64; 5];

/// Closed-form derivatives of the family's u at `x` (any ε > 0).
pub fn log_bifurcation_jet(x: f64, eps: f64) -> Jet5 {
    if x <= 0.0 {
        return [0.0; 5];
    }
    let p = eps + x.powi(4);
    let l = p.ln();
    let x2 = x * x;
    let u = -x2 * l;
    let u1 = -2.0 * x * l - 4.0 * x.powi(5) / p;
    let u2 = -2.0 * l - 28.0 * x.powi(4) / p + 16.0 * x.powi(8) / (p * p);
    let u3 = -8.0 * x.powi(3) / p - 112.0 * eps * x.powi(3) / (p * p)
        + 128.0 * eps * x.powi(7) / p.powi(3);
    let u4 = 8.0 * x2
        * (x.powi(12) - 11.0 * eps * x.powi(8) + 135.0 * eps * eps * x.powi(4)
            - 45.0 * eps.powi(3))
        / p.powi(4);
    [u, u1, u2, u3, u4]
}

/// The sign-indefinite polynomial factor whose negativity keeps β_ε ≥ 0 on
/// the formula branch.
fn bracket(x: f64, eps: f64) -> f64 {
    x.powi(12) - 11.0 * eps * x.powi(8) + 135.0 * eps * eps * x.powi(4) - 45.0 * eps.powi(3)
}

impl LogBifurcationFamily {
    pub fn new(eps: f64) -> Result<Self> {
        // the increasing branch must reach past 2e^{−3/2}
        let cap = (-2.0f64).exp() - (-3.0f64).exp();
        if !(eps > 0.0 && eps < cap) {
            return Err(Error::Parameter(format!(
                "ε must lie in (0, {cap:.4}) for the increasing branch, got {eps}"
            )));
        }
        let x_max = (-0.75f64).exp();
        // largest dyadic ι = 2^{-m} ≤ ε/4 with the bracket negative on the
        // whole branch (0, ζ(ι)], located by sampling + halving
        let mut iota = (2.0f64).powi((eps / 4.0).log2().floor() as i32);
        let mut family = Self { eps, iota, x_max, bump_amp: 0.0, formula_mass: 0.0 };
        loop {
            let z = family.zeta(iota)?;
            let neg = (1..=64).all(|k| bracket(z * k as f64 / 64.0, eps) < 0.0);
            if neg {
                break;
            }
            iota *= 0.5;
            if iota < 1e-12 * eps {
                return Err(Error::Parameter("no admissible threshold ι found".into()));
            }
            family.iota = iota;
        }
        family.iota = iota;

        // masses of the exact-formula piece and the blend, in x-space where
        // β_ε(u(x))·u′(x) = −2u⁗(x)·u′(x)
        let z_half = family.zeta(iota / 2.0)?;
        let z_full = family.zeta(iota)?;
        let m1 = adaptive_simpson(
            |x| {
                let j = log_bifurcation_jet(x, eps);
                -2.0 * j[4] * j[1]
            },
            0.0,
            z_half,
            1e-13,
            60,
        );
        let m2 = adaptive_simpson(
            |x| {
                let j = log_bifurcation_jet(x, eps);
                let s = (iota - j[0]) / (iota / 2.0);
                smoothstep5(s) * (-2.0 * j[4] * j[1])
            },
            z_half,
            z_full,
            1e-13,
            60,
        );
        let formula_mass = m1 + m2;
        if formula_mass >= 1.0 {
            return Err(Error::Parameter(format!(
                "formula branch already carries mass {formula_mass} ≥ 1"
            )));
        }
        let i0 = raw_bump_mass();
        family.bump_amp = (1.0 - formula_mass) / (i0 * (eps - iota));
        family.formula_mass = formula_mass;
        Ok(family)
    }

    /// Inverse of u on the increasing branch: ζ(t) with u(ζ(t)) = t.
    pub fn zeta(&self, t: f64) -> Result<f64> {
        let top = log_bifurcation_jet(self.x_max, self.eps)[0];
        if !(t > 0.0 && t < top) {
            return Err(Error::Parameter(format!(
                "t = {t} outside the invertible range (0, {top:.4})"
            )));
        }
        solve_monotone(
            |x| log_bifurcation_jet(x, self.eps)[0] - t,
            |x| log_bifurcation_jet(x, self.eps)[1],
            0.0,
            self.x_max,
            1e-15,
        )
    }

    /// β_ε(t): the inverse-function formula on (0, ι/2], a quintic blend down
    /// to zero on (ι/2, ι), and the mass-carrying bump on (ι, ε).
    pub fn beta(&self, t: f64) -> f64 {
        if t <= 0.0 || t >= self.eps {
            return 0.0;
        }
        if t < self.iota {
            let z = self.zeta(t).expect("t inside the invertible range");
            let formula = -16.0 * z * z * bracket(z, self.eps) / (z.powi(4) + self.eps).powi(4);
            if t <= 0.5 * self.iota {
                formula
            } else {
                smoothstep5((self.iota - t) / (0.5 * self.iota)) * formula
            }
        } else {
            self.bump_amp * raw_bump((t - self.iota) / (self.eps - self.iota))
        }
    }

    /// Quadrature check of ∫β_ε = 1; evaluates the root-finding formula
    /// pointwise, independent of the construction-time mass bookkeeping.
    pub fn mass_check(&self) -> f64 {
        adaptive_simpson(|t| self.beta(t), 0.0, 0.5 * self.iota, 1e-10, 40)
            + adaptive_simpson(|t| self.beta(t), 0.5 * self.iota, self.iota, 1e-10, 40)
            + adaptive_simpson(|t| self.beta(t), self.iota, self.eps, 1e-11, 50)
    }

    /// Relative residual of 2u⁗ + β_ε(u) at `x` on the exact-formula branch.
    pub fn ode_residual(&self, x: f64) -> Result<f64> {
        let z_half = self.zeta(0.5 * self.iota)? * (1.0 + 1e-12);
        if !(x > 0.0 && x <= z_half) {
            return Err(Error::Parameter(format!(
                "x = {x} outside the exact branch (0, {z_half:.4e}]"
            )));
        }
        let j = log_bifurcation_jet(x, self.eps);
        let lhs = 2.0 * j[4];
        let rhs = -self.beta(j[0]);
        Ok((lhs - rhs).abs() / (1.0 + lhs.abs().max(rhs.abs())))
    }
}

/// One row of the blow-up report.
#[derive(Debug, Clone, Copy)]
pub struct BlowupRow {
    pub eps: f64,
    /// max |u″| on (−δ, δ), δ = e^{−3/4}/2.
    pub sup_u2: f64,
    /// −u″(∜ε), the probe value in the reference's sign convention.
    pub probe: f64,
    /// 10 + 2 log(2ε).
    pub reference: f64,
}

/// Evaluate the second-derivative blow-up along an ε-list.
pub fn log_bifurcation_blowup_report(eps_list: &[f64]) -> Result<Vec<BlowupRow>> {
    let delta = (-0.75f64).exp() / 2.0;
    eps_list
        .iter()
        .map(|&eps| {
            if !(eps > 0.0) {
                return Err(Error::Parameter(format!("ε must be positive, got {eps}")));
            }
            // x ≤ 0 contributes nothing; sample the positive side densely
            let n = 40_000;
            let mut sup = 0.0f64;
            for k in 1..=n {
                let x = delta * k as f64 / n as f64;
                sup = sup.max(log_bifurcation_jet(x, eps)[2].abs());
            }
            let probe = -log_bifurcation_jet(eps.powf(0.25), eps)[2];
            Ok(BlowupRow { eps, sup_u2: sup, probe, reference: 10.0 + 2.0 * (2.0 * eps).ln() })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Bump train family
// ---------------------------------------------------------------------------

const G_TABLE_STEP: f64 = 1.0 / 256.0;
const G_TABLE_END: f64 = 80.0;
const J_MAX: usize = 100;

/// φ = minorant + base bump + Σ_j c_j·(unit-height bump at j), built so that
/// φ = 0 on (−∞,0], φ > 0 on (0,∞), φ(j) = j² for j ∈ ℕ, and ∫φ = 1; u is
/// its primitive, v the inverse of u, and β(t) = −2u⁗(v(t)).
pub struct BumpTrainFamily {
    /// scale of the strictly positive minorant s·e^{−1/x−x}
    minorant_scale: f64,
    /// cumulative ∫₀^{kh} e^{−1/t−t} dt
    g_table: Vec<f64>,
    /// normalized bump primitive lookups
    profile: BumpProfile,
    /// mass of the raw bump on (0,1)
    i0: f64,
    /// amplitude of the base bump on (0, ½)
    base_amp: f64,
    /// prefix sums of the train masses c_j·w_j·I₀·e⁴
    mass_prefix: Vec<f64>,
}

#[inline]
fn train_width(j: usize) -> f64 {
    0.25 * (2.0f64).powi(-(j as i32)) / (j * j) as f64
}

/// e^{−1/x−x} and its first three derivatives via the exponent chain rule.
fn minorant_jet(x: f64) -> [f64; 4] {
    if x <= 0.0 {
        return [0.0; 4];
    }
    let f = (-1.0 / x - x).exp();
    let p1 = 1.0 / (x * x) - 1.0;
    let p2 = -2.0 / x.powi(3);
    let p3 = 6.0 / x.powi(4);
    [
        f,
        p1 * f,
        (p2 + p1 * p1) * f,
        (p3 + 3.0 * p1 * p2 + p1.powi(3)) * f,
    ]
}

/// Raw bump jet on (0,1): value and first three derivatives, via the
/// exponent q = −1/g, g = s(1−s) (g″ = −2, g‴ = 0).
fn raw_bump_jet(s: f64) -> [f64; 4] {
    if s <= 0.0 || s >= 1.0 {
        return [0.0; 4];
    }
    let g = s * (1.0 - s);
    let gp = 1.0 - 2.0 * s;
    let b = (-1.0 / g).exp();
    let q1 = gp / (g * g);
    let q2 = -2.0 / (g * g) - 2.0 * gp * gp / g.powi(3);
    let q3 = 12.0 * gp / g.powi(3) + 6.0 * gp.powi(3) / g.powi(4);
    [
        b,
        q1 * b,
        (q2 + q1 * q1) * b,
        (q3 + 3.0 * q1 * q2 + q1.powi(3)) * b,
    ]
}

impl BumpTrainFamily {
    pub fn new() -> Self {
        let i0 = raw_bump_mass();
        // minorant mass fixed at 1/4
        let k_total = adaptive_simpson(|x| minorant_jet(x)[0], 0.0, 60.0, 1e-14, 60);
        let minorant_scale = 0.25 / k_total;

        // cumulative minorant table
        let n = (G_TABLE_END / G_TABLE_STEP) as usize;
        let mut g_table = Vec::with_capacity(n + 1);
        g_table.push(0.0);
        let mut acc = 0.0;
        for k in 0..n {
            let (a, b) = (k as f64 * G_TABLE_STEP, (k + 1) as f64 * G_TABLE_STEP);
            acc += adaptive_simpson(|x| minorant_jet(x)[0], a, b, 1e-15, 40);
            g_table.push(acc);
        }

        // train masses: c_j = j² − g(j) so that φ(j) = j² exactly
        let e4 = (4.0f64).exp();
        let mut mass_prefix = Vec::with_capacity(J_MAX + 1);
        mass_prefix.push(0.0);
        let mut total = 0.0;
        for j in 1..=J_MAX {
            let c_j = (j * j) as f64 - minorant_scale * minorant_jet(j as f64)[0];
            total += c_j * train_width(j) * i0 * e4;
            mass_prefix.push(total);
        }

        // the base bump on (0, ½) carries the remaining mass
        let base_amp = (1.0 - 0.25 - total) / (0.5 * i0);
        assert!(base_amp > 0.0, "mass budget exhausted");
        Self {
            minorant_scale,
            g_table,
            profile: BumpProfile::standard(),
            i0,
            base_amp,
            mass_prefix,
        }
    }

    fn minorant_integral(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= G_TABLE_END {
            return *self.g_table.last().unwrap();
        }
        let k = (x / G_TABLE_STEP).floor() as usize;
        self.g_table[k]
            + adaptive_simpson(|t| minorant_jet(t)[0], k as f64 * G_TABLE_STEP, x, 1e-14, 30)
    }

    /// φ(x) and its first three derivatives.
    pub fn phi_jet(&self, x: f64) -> [f64; 4] {
        if x <= 0.0 {
            return [0.0; 4];
        }
        let mut out = [0.0; 4];
        let m = minorant_jet(x);
        for (o, v) in out.iter_mut().zip(m) {
            *o += self.minorant_scale * v;
        }
        if x < 0.5 {
            let b = raw_bump_jet(2.0 * x);
            for (k, o) in out.iter_mut().enumerate() {
                *o += self.base_amp * b[k] * (2.0f64).powi(k as i32);
            }
        }
        let j = x.round() as usize;
        if j >= 1 && j <= J_MAX {
            let w = train_width(j);
            let s = (x - j as f64) / w + 0.5;
            if s > 0.0 && s < 1.0 {
                let c_j = (j * j) as f64 - self.minorant_scale * minorant_jet(j as f64)[0];
                let e4 = (4.0f64).exp();
                let b = raw_bump_jet(s);
                for (k, o) in out.iter_mut().enumerate() {
                    *o += c_j * e4 * b[k] / w.powi(k as i32);
                }
            }
        }
        out
    }

    pub fn phi(&self, x: f64) -> f64 {
        self.phi_jet(x)[0]
    }

    /// u(x) = ∫₀ˣ φ, from the per-piece closed-form primitives.
    pub fn u(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let mut total = self.minorant_scale * self.minorant_integral(x);
        // base bump: ∫₀ˣ A·b(2t) dt = A·I₀·𝓑(2x)/2
        total += self.base_amp * self.i0 * self.profile.primitive(2.0 * x) / 2.0;
        // bumps whose support [j − w/2, j + w/2] lies fully left of x
        let full = (1..=J_MAX)
            .take_while(|&j| j as f64 + 0.5 * train_width(j) <= x)
            .count();
        total += self.mass_prefix[full];
        // plus the partial mass of the bump x currently sits in, if any
        let j_here = x.round() as usize;
        if (1..=J_MAX).contains(&j_here) && j_here > full {
            let w = train_width(j_here);
            let s = (x - j_here as f64) / w + 0.5;
            if s > 0.0 && s < 1.0 {
                let c_j = (j_here * j_here) as f64
                    - self.minorant_scale * minorant_jet(j_here as f64)[0];
                total += c_j * w * (4.0f64).exp() * self.i0 * self.profile.primitive(s);
            }
        }
        total
    }

    /// Inverse v of u on [0, 1): v(u(x)) = x.
    pub fn inverse(&self, t: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&t) {
            return Err(Error::Parameter(format!("t = {t} outside [0, 1)")));
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        let mut hi = 1.0;
        while self.u(hi) <= t {
            hi *= 2.0;
            if hi > G_TABLE_END {
                return Err(Error::Parameter(format!("t = {t} beyond the tabulated range")));
            }
        }
        solve_monotone(|x| self.u(x) - t, |x| self.phi(x), 0.0, hi, 1e-15)
    }

    /// β(t) = −2u⁗(v(t)) on [0, 1], zero outside.
    pub fn beta(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Ok(0.0);
        }
        if t == 0.0 || t == 1.0 {
            return Ok(0.0);
        }
        let x = self.inverse(t)?;
        Ok(-2.0 * self.phi_jet(x)[3])
    }

    /// Scaled member u^ε(x) = ε·u(x/√ε) with ε_k = k⁻²; returns (u^ε, (u^ε)′).
    pub fn scaled(&self, x: f64, k: u32) -> (f64, f64) {
        let eps = 1.0 / (k as f64 * k as f64);
        let root = eps.sqrt();
        (eps * self.u(x / root), root * self.phi(x / root))
    }

    /// β_{ε_k}(t) = (1/ε)β(t/ε).
    pub fn scaled_beta(&self, t: f64, k: u32) -> Result<f64> {
        let eps = 1.0 / (k as f64 * k as f64);
        Ok(self.beta(t / eps)? / eps)
    }

    /// Residual of 2(u^ε)⁗(x) + β_ε(u^ε(x)) at `x > 0`, relative form.
    pub fn ode_residual(&self, x: f64, k: u32) -> Result<f64> {
        let eps = 1.0 / (k as f64 * k as f64);
        let y = x / eps.sqrt();
        let lhs = 2.0 * self.phi_jet(y)[3] / eps;
        let rhs = -self.scaled_beta(eps * self.u(y), k)?;
        Ok((lhs - rhs).abs() / (1.0 + lhs.abs().max(rhs.abs())))
    }

    /// Piecewise quadrature check of ∫φ = 1, independent of the mass
    /// bookkeeping used at construction.
    pub fn mass_check(&self) -> f64 {
        let mut total = adaptive_simpson(|x| self.phi(x), 0.0, 0.5, 1e-12, 50);
        // between-bump stretches hold only the minorant; integrate it in one go
        total += self.minorant_scale
            * (self.minorant_integral(G_TABLE_END) - self.minorant_integral(0.5));
        for j in 1..=J_MAX {
            let w = train_width(j);
            let (a, b) = (j as f64 - 0.5 * w, j as f64 + 0.5 * w);
            let c_j = (j * j) as f64 - self.minorant_scale * minorant_jet(j as f64)[0];
            let e4 = (4.0f64).exp();
            total += adaptive_simpson(
                |x| c_j * e4 * raw_bump((x - j as f64) / w + 0.5),
                a,
                b,
                1e-13,
                50,
            );
            if self.mass_prefix[J_MAX] - self.mass_prefix[j] < 1e-15 {
                break;
            }
        }
        total
    }
}

impl Default for BumpTrainFamily {
    fn default() -> Self {
        Self::new()
    }
}
